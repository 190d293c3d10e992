//! `tda`: sample point processes, build Rips/Cech filtrations, compute
//! persistence diagrams and diagram metrics, evaluate weighted
//! representations, and run reproducible experiments.

use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use tda_core::experiments::{run_experiment, ExperimentConfig, CONFIG_SCHEMA};
use tda_core::filtration::{
    build_cech_with_budget, build_rips_with_budget, default_simplex_budget, FilteredComplex,
};
use tda_core::io;
use tda_core::metrics::{bottleneck_distance, wasserstein_distance, Ground};
use tda_core::oracle;
use tda_core::persistence::compute_persistence;
use tda_core::pointcloud::DensitySpec;
use tda_core::representations::{
    default_bandwidth, default_grid, persistence_image, silhouette, RepresentationValue,
    WeightSpec,
};
use tda_core::{sample_binomial, sample_poisson, sample_torus, PointCloud};

#[derive(Parser)]
#[command(name = "tda", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a point process and write it as CSV.
    Sample(SampleArgs),
    /// Build a filtration and print its statistics as JSON.
    ComplexStats(ComplexArgs),
    /// Compute persistence diagrams of a cloud; write diagram CSV and a JSON
    /// summary.
    Persist(PersistArgs),
    /// Bottleneck or p-Wasserstein distance between two diagram CSVs.
    Distance(DistanceArgs),
    /// Persistence image or silhouette of a diagram CSV.
    Represent(RepresentArgs),
    /// Run a configured experiment; exit code 0 only if all checks pass.
    Experiment(ExperimentArgs),
    /// Run the oracle cross-check suite and print a pass/fail table.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Binomial,
    Poisson,
    Torus,
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityArg {
    Uniform,
    LinearX1,
}

#[derive(Clone, Copy, ValueEnum)]
enum FiltrationArg {
    Rips,
    Cech,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroundArg {
    Euclidean,
    Sup,
}

impl From<GroundArg> for Ground {
    fn from(g: GroundArg) -> Self {
        match g {
            GroundArg::Euclidean => Ground::Euclidean,
            GroundArg::Sup => Ground::Sup,
        }
    }
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long, value_enum)]
    model: Model,
    /// Point count (binomial, torus) or intensity (poisson).
    #[arg(long)]
    n: f64,
    /// Ambient dimension for cube processes.
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, value_enum, default_value = "uniform")]
    density: DensityArg,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    r_major: f64,
    #[arg(long, default_value_t = 1.0)]
    r_minor: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ComplexArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long, value_enum)]
    filtration: FiltrationArg,
    #[arg(long)]
    r_max: f64,
    #[arg(long)]
    q_max: usize,
    /// Simplex budget; also settable via TDA_SIMPLEX_BUDGET.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PersistArgs {
    #[arg(long)]
    cloud: PathBuf,
    #[arg(long, value_enum)]
    filtration: FiltrationArg,
    #[arg(long)]
    r_max: f64,
    #[arg(long)]
    q_max: usize,
    /// Comma-separated exponents for the total-persistence summary.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    /// Append pairing columns (vertex lists of the positive and negative
    /// simplices).
    #[arg(long)]
    pairing: bool,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct DistanceArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// Finite p for Wasserstein, or `inf` for the bottleneck distance.
    #[arg(long, default_value = "inf")]
    p: String,
    #[arg(long, value_enum, default_value = "euclidean")]
    ground: GroundArg,
}

#[derive(Args)]
struct RepresentArgs {
    #[arg(long)]
    diagram: PathBuf,
    #[arg(long, default_value_t = 1)]
    degree: usize,
    /// `image` or `silhouette`.
    #[arg(long, default_value = "image")]
    kind: String,
    /// Weight family: `power` or `arctan`.
    #[arg(long, default_value = "power")]
    weight: String,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Arctan steepness.
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long)]
    bandwidth: Option<f64>,
    #[arg(long, default_value_t = 40)]
    resolution: usize,
    /// Output prefix; writes `<prefix>.csv` and `<prefix>.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, required_unless_present = "print_schema")]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the JSON schema for configs and exit.
    #[arg(long)]
    print_schema: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Number of random clouds for the rank cross-check.
    #[arg(long, default_value_t = 25)]
    clouds: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
}

fn density_spec(d: DensityArg, dim: usize) -> DensitySpec {
    match d {
        DensityArg::Uniform => DensitySpec::uniform(dim),
        DensityArg::LinearX1 => DensitySpec::linear_x1(dim),
    }
}

fn build_complex_cli(
    cloud: &PointCloud,
    filtration: FiltrationArg,
    r_max: f64,
    q_max: usize,
    budget: Option<usize>,
) -> anyhow::Result<FilteredComplex> {
    let budget = budget.unwrap_or_else(default_simplex_budget);
    let complex = match filtration {
        FiltrationArg::Rips => build_rips_with_budget(cloud, r_max, q_max, budget)?,
        FiltrationArg::Cech => build_cech_with_budget(cloud, r_max, q_max, budget)?,
    };
    Ok(complex)
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Sample(args) => {
            let cloud = match args.model {
                Model::Binomial => sample_binomial(
                    args.n as usize,
                    &density_spec(args.density, args.d),
                    args.d,
                    args.seed,
                )?,
                Model::Poisson => {
                    sample_poisson(args.n, &density_spec(args.density, args.d), args.d, args.seed)?
                }
                Model::Torus => {
                    sample_torus(args.n as usize, args.r_major, args.r_minor, args.seed)?
                }
            };
            io::write_cloud_csv(&args.out, &cloud)?;
            eprintln!("wrote {} points to {}", cloud.len(), args.out.display());
        }
        Command::ComplexStats(args) => {
            let cloud = io::read_cloud_csv(&args.cloud)?;
            let complex =
                build_complex_cli(&cloud, args.filtration, args.r_max, args.q_max, args.budget)?;
            let stats = complex.stats();
            let json = serde_json::to_string_pretty(&stats)?;
            match args.out {
                Some(path) => std::fs::write(path, json + "\n")?,
                None => println!("{json}"),
            }
        }
        Command::Persist(args) => {
            let cloud = io::read_cloud_csv(&args.cloud)?;
            let complex =
                build_complex_cli(&cloud, args.filtration, args.r_max, args.q_max, args.budget)?;
            let diagrams = compute_persistence(&complex, args.q_max)?;
            io::write_diagrams_csv(&args.out, &diagrams, args.pairing.then_some(&complex))?;
            let mut summary = serde_json::Map::new();
            for d in &diagrams {
                let mut entry = serde_json::Map::new();
                entry.insert("points".into(), d.len().into());
                entry.insert("censored".into(), d.censored_count().into());
                for &alpha in &args.alpha {
                    let value = tda_core::total_persistence(d, alpha);
                    entry.insert(
                        format!("pers_alpha_{alpha}"),
                        match value {
                            Ok(v) => serde_json::json!(v),
                            Err(e) => serde_json::json!(format!("unavailable: {e}")),
                        },
                    );
                }
                summary.insert(format!("degree_{}", d.degree), entry.into());
            }
            let summary = serde_json::Value::Object(summary);
            match args.summary {
                Some(path) => io::write_json(&path, &summary)?,
                None => println!("{}", serde_json::to_string_pretty(&summary)?),
            }
        }
        Command::Distance(args) => {
            let da = io::read_diagrams_csv(&args.a)?;
            let db = io::read_diagrams_csv(&args.b)?;
            let empty = tda_core::PersistenceDiagram::new(args.degree, 0.0, vec![]);
            let a = da.get(args.degree).unwrap_or(&empty);
            let b = db.get(args.degree).unwrap_or(&empty);
            let start = Instant::now();
            let (cost, matching_size) = if args.p == "inf" {
                (bottleneck_distance(a, b, args.ground.into())?, a.len() + b.len())
            } else {
                let p: f64 = args.p.parse().context("p must be a number or `inf`")?;
                let m = wasserstein_distance(a, b, p, args.ground.into())?;
                (m.cost, m.pairs.len())
            };
            let runtime_ms = start.elapsed().as_secs_f64() * 1e3;
            println!(
                "{}",
                serde_json::json!({
                    "cost": cost,
                    "matching_size": matching_size,
                    "runtime_ms": runtime_ms,
                })
            );
        }
        Command::Represent(args) => {
            let diagrams = io::read_diagrams_csv(&args.diagram)?;
            let diagram = diagrams
                .get(args.degree)
                .with_context(|| format!("no degree {} in the diagram file", args.degree))?;
            let weight = match args.weight.as_str() {
                "power" => WeightSpec::power_any(args.alpha)?,
                "arctan" => WeightSpec::arctan(args.b, args.alpha)?,
                other => bail!("unknown weight family {other}"),
            };
            let value = match args.kind.as_str() {
                "image" => {
                    let bandwidth = args.bandwidth.unwrap_or_else(|| default_bandwidth(diagram));
                    let grid = default_grid(diagram, bandwidth, args.resolution);
                    let image = persistence_image(diagram, &weight, &grid, bandwidth)?;
                    io::write_json(
                        &args.out.with_extension("json"),
                        &serde_json::json!({
                            "grid": grid,
                            "bandwidth": bandwidth,
                            "weight": weight,
                            "degree": args.degree,
                        }),
                    )?;
                    image
                }
                "silhouette" => {
                    let s = silhouette(diagram, &weight, args.resolution)?;
                    io::write_json(
                        &args.out.with_extension("json"),
                        &serde_json::json!({ "weight": weight, "degree": args.degree }),
                    )?;
                    s
                }
                other => bail!("unknown representation kind {other}"),
            };
            write_value_csv(&args.out.with_extension("csv"), &value)?;
            eprintln!("wrote {}.csv", args.out.display());
        }
        Command::Experiment(args) => {
            if args.print_schema {
                println!("{CONFIG_SCHEMA}");
                return Ok(());
            }
            let path = args.config.expect("clap enforces presence");
            let text = io::read_to_string(&path)?;
            let config = ExperimentConfig::from_json(&text)
                .with_context(|| format!("invalid config {}", path.display()))?;
            let out_dir = args
                .out
                .or_else(|| config.out_dir.as_ref().map(PathBuf::from));
            let record = run_experiment(&config, out_dir.as_deref())?;
            for check in &record.checks {
                println!(
                    "[{}] {} value={:.6e} threshold={:.6e}",
                    if check.passed { "PASS" } else { "FAIL" },
                    check.name,
                    check.value,
                    check.threshold
                );
            }
            for note in &record.notes {
                eprintln!("note: {note}");
            }
            if !record.all_checks_passed() {
                bail!("experiment checks failed");
            }
        }
        Command::Verify(args) => {
            let failures = run_verify(args.clouds, args.seed)?;
            if failures > 0 {
                bail!("{failures} oracle cross-check(s) failed");
            }
        }
    }
    Ok(())
}

fn write_value_csv(path: &PathBuf, value: &RepresentationValue) -> anyhow::Result<()> {
    let mut w = csv::WriterBuilder::new().from_path(path)?;
    match value {
        RepresentationValue::Scalar(v) => {
            w.write_record([format!("{v}")])?;
        }
        RepresentationValue::Image { grid, values } => {
            for ip in 0..grid.res_pers {
                let row: Vec<String> = (0..grid.res_birth)
                    .map(|ib| format!("{}", values[ip * grid.res_birth + ib]))
                    .collect();
                w.write_record(&row)?;
            }
        }
        RepresentationValue::Function { start, stop, values } => {
            w.write_record(["t", "value"])?;
            let dt = (stop - start) / (values.len() as f64 - 1.0);
            for (i, v) in values.iter().enumerate() {
                w.write_record([format!("{}", start + dt * i as f64), format!("{v}")])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Oracle cross-checks: rank identity vs diagram counts, assignment solver
/// vs exhaustive matching, weight derivative bounds, image quadrature.
fn run_verify(clouds: usize, seed: u64) -> anyhow::Result<usize> {
    use tda_core::persistence::persistent_betti;
    use tda_core::rng::seed_chain;

    let mut failures = 0usize;
    let mut report = |name: &str, pass: bool, detail: String| {
        println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failures += 1;
        }
    };

    // persistent Betti numbers against the rank oracle
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    for c in 0..clouds {
        let d = if c % 2 == 0 { 2 } else { 3 };
        let n = 7 + c % 6;
        let cloud = sample_binomial(n, &DensitySpec::uniform(d), d, seed_chain(seed, &[c as u64]))?;
        let r_top = (d as f64).sqrt() * 1.01;
        for (kind, r_max) in [(FiltrationArg::Rips, r_top), (FiltrationArg::Cech, r_top / 2.0)] {
            let complex = build_complex_cli(&cloud, kind, r_max, 2, None)?;
            let diagrams = compute_persistence(&complex, 2)?;
            for q in 0..=2usize {
                for t in 0..5u64 {
                    let h = seed_chain(seed, &[c as u64, q as u64, t]);
                    let r = (h % 1000) as f64 / 1000.0 * r_max;
                    let s = r + (h / 1000 % 1000) as f64 / 1000.0 * (r_max - r);
                    let from_diagram = persistent_betti(&diagrams[q], r, s)?;
                    let from_rank = oracle::diagram_betti_via_rank(&complex, q, r, s)?;
                    checked += 1;
                    if from_diagram != from_rank {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    report(
        "rank_oracle",
        mismatches == 0,
        format!("{checked} (r,s) probes, {mismatches} mismatches"),
    );

    // assignment solver against exhaustive matching
    let mut worst = 0.0f64;
    for k in 0..200u64 {
        let d1 = random_diagram(seed_chain(seed, &[500, k]), 4);
        let d2 = random_diagram(seed_chain(seed, &[501, k]), 4);
        for p in [1.0, 2.0] {
            let solver = wasserstein_distance(&d1, &d2, p, Ground::Euclidean)?.cost;
            let exact = oracle::exhaustive_wasserstein(&d1, &d2, p, Ground::Euclidean)?;
            worst = worst.max((solver - exact).abs());
        }
        let b = bottleneck_distance(&d1, &d2, Ground::Euclidean)?;
        let be = oracle::exhaustive_bottleneck(&d1, &d2, Ground::Euclidean)?;
        worst = worst.max((b - be).abs());
    }
    report("matching_oracle", worst <= 1e-9, format!("max |solver - exhaustive| = {worst:.3e}"));

    // weight derivative bounds
    let grid: Vec<f64> = (1..=10_000).map(|k| k as f64 * 10.0 / 10_000.0).collect();
    let mut worst = 0.0f64;
    for w in [
        WeightSpec::power(1.0)?,
        WeightSpec::power(2.0)?,
        WeightSpec::arctan(1.0, 1.0)?,
        WeightSpec::arctan(3.0, 2.0)?,
    ] {
        worst = worst.max(oracle::finite_difference_weight_check(&w, &grid)?);
    }
    report("weight_bounds", worst <= 1.0 + 1e-6, format!("max derivative ratio = {worst:.9}"));

    // image cells against quadrature
    let d = random_diagram(seed_chain(seed, &[900]), 3);
    let mut worst = 0.0f64;
    if !d.is_empty() {
        let w = WeightSpec::power_any(0.0)?;
        let h = 0.08;
        let grid = default_grid(&d, h, 8);
        let img = persistence_image(&d, &w, &grid, h)?;
        let values = img.values();
        for ip in 0..grid.res_pers {
            for ib in 0..grid.res_birth {
                let x0 = grid.birth_min + grid.cell_width() * ib as f64;
                let y0 = grid.pers_min + grid.cell_height() * ip as f64;
                let mut expected = 0.0;
                for point in d.points() {
                    expected += oracle::gaussian_cell_quadrature(
                        (point.birth, point.persistence()),
                        h,
                        (x0, x0 + grid.cell_width(), y0, y0 + grid.cell_height()),
                    )?;
                }
                worst = worst.max((values[ip * grid.res_birth + ib] - expected).abs());
            }
        }
    }
    report("image_quadrature", worst <= 1e-3, format!("max cell deviation = {worst:.3e}"));

    Ok(failures)
}

fn random_diagram(seed: u64, max_points: usize) -> tda_core::PersistenceDiagram {
    use rand::Rng as _;
    let mut rng = tda_core::rng::rng_from_seed(seed);
    let count = rng.random_range(0..=max_points);
    let points = (0..count)
        .map(|i| {
            let birth: f64 = rng.random::<f64>() * 2.0;
            let pers: f64 = rng.random::<f64>() * 1.5 + 1e-3;
            tda_core::DiagramPoint {
                birth,
                death: birth + pers,
                censored: false,
                positive: i as u32,
                negative: Some(i as u32),
            }
        })
        .collect();
    tda_core::PersistenceDiagram::new(1, 100.0, points)
}
