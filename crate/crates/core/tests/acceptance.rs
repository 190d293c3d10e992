//! Acceptance suite: every release criterion as one test, each printing a
//! `[PASS]`/`[FAIL]` line. Heavy experiment records are computed once and
//! shared; the determinism criterion recomputes them at a different worker
//! count and compares bit-for-bit.
//!
//! Run with `cargo test -p tda-core --test acceptance -- --nocapture`.

use std::path::{Path, PathBuf};
use std::sync::LazyLock;
use std::time::{Duration, Instant};

use tda_core::experiments::{
    run_experiment_with_workers, ExperimentConfig, RunRecord,
};
use tda_core::filtration::{build_cech, build_rips, FilteredComplex};
use tda_core::metrics::{bottleneck_distance, wasserstein_distance, Ground};
use tda_core::oracle::{diagram_betti_via_rank, exhaustive_wasserstein};
use tda_core::pointcloud::DensitySpec;
use tda_core::rng::{rng_from_seed, seed_chain};
use tda_core::{
    compute_persistence, persistent_betti, sample_binomial, DiagramPoint, PersistenceDiagram,
    PointCloud,
};

use rand::Rng as _;

const SHARED_WORKERS: usize = 2;
const RERUN_WORKERS: usize = 1;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn out_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target/acceptance").join(name);
    std::fs::create_dir_all(&dir).expect("create acceptance output dir");
    dir
}

fn load_config(name: &str) -> ExperimentConfig {
    let text = std::fs::read_to_string(config_path(name)).expect("config file readable");
    ExperimentConfig::from_json(&text).expect("config valid")
}

struct SharedRun {
    config: ExperimentConfig,
    record: RunRecord,
    elapsed: Duration,
}

fn shared_run(name: &str, artifacts: &str) -> SharedRun {
    let config = load_config(name);
    let start = Instant::now();
    let record = run_experiment_with_workers(&config, Some(&out_dir(artifacts)), SHARED_WORKERS)
        .expect("experiment runs");
    SharedRun { config, record, elapsed: start.elapsed() }
}

static SPACINGS: LazyLock<SharedRun> =
    LazyLock::new(|| shared_run("spacings_d1.json", "spacings"));
static CONVERGENCE: LazyLock<SharedRun> =
    LazyLock::new(|| shared_run("convergence_d2.json", "convergence"));
static TAIL: LazyLock<SharedRun> = LazyLock::new(|| shared_run("tail_d2.json", "tail"));
static AUDIT: LazyLock<SharedRun> =
    LazyLock::new(|| shared_run("stability_audit.json", "stability_audit"));
static FIGURE2: LazyLock<SharedRun> =
    LazyLock::new(|| shared_run("figure2_torus.json", "figure2"));

fn assert_check(record: &RunRecord, name: &str) {
    let check = record
        .check(name)
        .unwrap_or_else(|| panic!("check {name} missing from record"));
    assert!(
        check.passed,
        "check {name} failed: value {} vs threshold {}",
        check.value, check.threshold
    );
}

// -------------------------------------------------------------------------

#[test]
fn criterion_1_oracle_equivalence() {
    let start = Instant::now();
    let clouds = 100;
    let mut probes = 0usize;
    for c in 0..clouds {
        let d = if c % 2 == 0 { 2 } else { 3 };
        let n = 6 + (c % 7);
        let seed = seed_chain(101, &[c as u64]);
        let cloud = sample_binomial(n, &DensitySpec::uniform(d), d, seed).unwrap();
        let builds: [(fn(&PointCloud, f64, usize) -> tda_core::Result<FilteredComplex>, f64); 2] = [
            (build_rips, (d as f64).sqrt() * 1.01),
            (build_cech, (d as f64).sqrt() * 0.51),
        ];
        for (build, r_max) in builds {
            let complex = build(&cloud, r_max, 2).unwrap();
            let diagrams = compute_persistence(&complex, 2).unwrap();
            for q in 0..=2usize {
                assert_eq!(diagrams[q].censored_count(), 0, "untruncated by construction");
                let mut rng = rng_from_seed(seed_chain(seed, &[q as u64]));
                for _ in 0..5 {
                    let r = rng.random::<f64>() * r_max;
                    let s = r + rng.random::<f64>() * (r_max - r);
                    let from_diagram = persistent_betti(&diagrams[q], r, s).unwrap();
                    let from_rank = diagram_betti_via_rank(&complex, q, r, s).unwrap();
                    assert_eq!(
                        from_diagram, from_rank,
                        "cloud {c} d={d} q={q} r={r} s={s}"
                    );
                    probes += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed < Duration::from_secs(60), "took {elapsed:?}");
    println!(
        "[PASS] criterion 1: rank oracle equals diagram counts on {probes} probes \
         across {clouds} clouds in {elapsed:.2?}"
    );
}

#[test]
fn criterion_2_hand_fixtures() {
    let square = PointCloud::new(
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
        2,
    )
    .unwrap();
    let rips_h1 = &compute_persistence(&build_rips(&square, 2.0, 1).unwrap(), 1).unwrap()[1];
    assert_eq!(rips_h1.len(), 1);
    let p = rips_h1.points()[0];
    assert!((p.birth - 1.0).abs() < 1e-9 && (p.death - 2f64.sqrt()).abs() < 1e-9);

    let cech_h1 = &compute_persistence(&build_cech(&square, 1.0, 1).unwrap(), 1).unwrap()[1];
    assert_eq!(cech_h1.len(), 1);
    let p = cech_h1.points()[0];
    assert!((p.birth - 0.5).abs() < 1e-6 && (p.death - 2f64.sqrt() / 2.0).abs() < 1e-6);

    let triangle = PointCloud::new(
        vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.5, 3f64.sqrt() / 2.0]],
        2,
    )
    .unwrap();
    let complex = build_cech(&triangle, 1.0, 1).unwrap();
    let tri_value = (0..complex.len())
        .find(|&i| complex.dim(i) == 2)
        .map(|i| complex.value(i))
        .expect("triangle present");
    assert!((tri_value - 1.0 / 3f64.sqrt()).abs() < 1e-9);

    println!(
        "[PASS] criterion 2: square Rips H1 (1, sqrt2), square Cech H1 (0.5, sqrt2/2), \
         equilateral Cech value 1/sqrt3"
    );
}

#[test]
fn criterion_3_remark_b_spacings_law() {
    let run = &*SPACINGS;
    assert_check(&run.record, "ks_mean n=5000");
    assert_check(&run.record, "pers1_mean n=5000");
    assert!(run.elapsed < Duration::from_secs(30), "took {:?}", run.elapsed);
    let ks = run.record.group("ks n=5000").unwrap().mean;
    let pers1 = run.record.group("pers1 n=5000").unwrap().mean;
    println!(
        "[PASS] criterion 3: mean KS {ks:.4} < 0.03 against Exp(1), scaled Pers_1 {pers1:.4} \
         within 5% of 1, in {:.2?}",
        run.elapsed
    );
}

#[test]
fn criterion_4_theorem_1_1_stabilization() {
    let run = &*CONVERGENCE;
    assert_check(&run.record, "stabilization q=1 alpha=2");
    assert!(run.elapsed < Duration::from_secs(15 * 60), "took {:?}", run.elapsed);
    assert!(
        out_dir("convergence").join("convergence.svg").exists(),
        "stabilization plot emitted"
    );
    let rel = run.record.check("stabilization q=1 alpha=2").unwrap().value;
    let last = run.record.group("q=1 alpha=2 n=2000").unwrap();
    println!(
        "[PASS] criterion 4: scaled Pers_2 stabilizes (relative change {rel:.4} < 0.10, \
         mean at n=2000 is {:.4} +- {:.4}) in {:.2?}",
        last.mean, last.stderr, run.elapsed
    );
}

#[test]
fn criterion_5_theorem_3_1_audit() {
    let run = &*AUDIT;
    assert_eq!(run.config.replicates, 200);
    assert!(
        !run.record.notes.iter().any(|n| n.contains("skipped")),
        "all 200 pairs evaluated: {:?}",
        run.record.notes
    );
    assert_check(&run.record, "audit_min_margin");
    assert_check(&run.record, "solver_vs_oracle");
    let min_margin = run.record.check("audit_min_margin").unwrap().value;
    println!(
        "[PASS] criterion 5: stability-bound margin >= {min_margin:.3e} over 200 pairs x 24 \
         (p, a, weight, feature) combinations"
    );
}

#[test]
fn criterion_6_bottleneck_stability() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (i, &eta) in [0.01f64, 0.05].iter().enumerate() {
        for c in 0..25u64 {
            let seed = seed_chain(601, &[i as u64, c]);
            let cloud = sample_binomial(13, &DensitySpec::uniform(2), 2, seed).unwrap();
            let moved = {
                let mut rng = rng_from_seed(seed_chain(seed, &[1]));
                let points = cloud
                    .points()
                    .iter()
                    .map(|p| {
                        let angle = rng.random::<f64>() * std::f64::consts::TAU;
                        let radius = eta * rng.random::<f64>();
                        vec![p[0] + radius * angle.cos(), p[1] + radius * angle.sin()]
                    })
                    .collect();
                PointCloud::new(points, 2).unwrap()
            };
            let r_max = (2f64.sqrt() + 2.0 * eta) * 0.51;
            let a = compute_persistence(&build_cech(&cloud, r_max, 1).unwrap(), 1).unwrap();
            let b = compute_persistence(&build_cech(&moved, r_max, 1).unwrap(), 1).unwrap();
            for q in 0..=1 {
                let dist = bottleneck_distance(&a[q], &b[q], Ground::Sup).unwrap();
                assert!(dist <= eta + 1e-9, "eta={eta} cloud={c} q={q}: {dist}");
                worst = worst.max(dist / eta);
            }
        }
    }
    println!(
        "[PASS] criterion 6: sup-ground bottleneck <= eta on 50 perturbed clouds \
         (worst ratio {worst:.3}) in {:.2?}",
        start.elapsed()
    );
}

fn random_diagram(seed: u64, max_points: usize) -> PersistenceDiagram {
    let mut rng = rng_from_seed(seed);
    let count = rng.random_range(0..=max_points);
    let points = (0..count)
        .map(|i| {
            let birth: f64 = rng.random::<f64>() * 2.0;
            let pers: f64 = rng.random::<f64>() * 1.5 + 1e-3;
            DiagramPoint {
                birth,
                death: birth + pers,
                censored: false,
                positive: i as u32,
                negative: Some(i as u32),
            }
        })
        .collect();
    PersistenceDiagram::new(1, 1e6, points)
}

#[test]
fn criterion_7_metric_axioms_and_solver_exactness() {
    let start = Instant::now();
    for t in 0..200u64 {
        let a = random_diagram(seed_chain(701, &[t, 0]), 5);
        let b = random_diagram(seed_chain(701, &[t, 1]), 5);
        let c = random_diagram(seed_chain(701, &[t, 2]), 5);
        for p in [1.0, 2.0] {
            let ab = wasserstein_distance(&a, &b, p, Ground::Euclidean).unwrap().cost;
            let ba = wasserstein_distance(&b, &a, p, Ground::Euclidean).unwrap().cost;
            assert_eq!(ab, ba, "symmetry is exact");
            let bc = wasserstein_distance(&b, &c, p, Ground::Euclidean).unwrap().cost;
            let ac = wasserstein_distance(&a, &c, p, Ground::Euclidean).unwrap().cost;
            assert!(ac <= ab + bc + 1e-9, "triangle inequality at p={p} triple {t}");
            assert_eq!(
                wasserstein_distance(&a, &a, p, Ground::Euclidean).unwrap().cost,
                0.0
            );
        }
    }
    let mut worst: f64 = 0.0;
    for t in 0..500u64 {
        let a = random_diagram(seed_chain(702, &[t, 0]), 4);
        let b = random_diagram(seed_chain(702, &[t, 1]), 4);
        for p in [1.0, 2.0] {
            let solver = wasserstein_distance(&a, &b, p, Ground::Euclidean).unwrap().cost;
            let oracle = exhaustive_wasserstein(&a, &b, p, Ground::Euclidean).unwrap();
            worst = worst.max((solver - oracle).abs());
        }
    }
    assert!(worst < 1e-9, "solver vs oracle gap {worst}");
    println!(
        "[PASS] criterion 7: metric axioms on 200 triples; solver within {worst:.2e} of the \
         exhaustive oracle on 500 pairs, in {:.2?}",
        start.elapsed()
    );
}

#[test]
fn criterion_8_tail_shape() {
    let run = &*TAIL;
    assert_check(&run.record, "tail_slope_negative n=1000");
    assert_check(&run.record, "tail_r_squared n=1000");
    let fit = &run.record.fits[0];
    println!(
        "[PASS] criterion 8: log mean tail mass vs M^2 fits slope {:.3} < 0 with R^2 {:.4} > 0.9 \
         over {} bins",
        fit.slope,
        fit.r_squared,
        fit.points.len()
    );
}

#[test]
fn criterion_9_figure2_weight_sweep() {
    let run = &*FIGURE2;
    assert_check(&run.record, "signal_noise_monotone");
    assert_check(&run.record, "dominance alpha=100");
    assert_check(&run.record, "two_features_detected");
    assert!(run.elapsed < Duration::from_secs(20 * 60), "took {:?}", run.elapsed);
    for alpha in ["0", "1", "2", "100"] {
        for n in ["500", "2000"] {
            assert!(
                out_dir("figure2").join(format!("image_n{n}_alpha{alpha}.csv")).exists(),
                "image file for n={n} alpha={alpha}"
            );
        }
    }
    let detected = run.record.check("two_features_detected").unwrap().value;
    let dominance = run.record.check("dominance alpha=100").unwrap().value;
    let ratios: Vec<f64> = ["0", "1", "2"]
        .iter()
        .map(|a| run.record.group(&format!("signal_noise n=2000 alpha={a}")).unwrap().mean)
        .collect();
    println!(
        "[PASS] criterion 9: signal/noise {ratios:.3?} strictly increasing over alpha 0,1,2; \
         dominance {dominance:.1}x >= 10 at alpha=100; {detected}/20 seeds with two features, \
         in {:.2?}",
        run.elapsed
    );
}

#[test]
fn criterion_10_determinism_across_worker_counts() {
    let runs = [&*SPACINGS, &*CONVERGENCE, &*TAIL, &*FIGURE2];
    let names = ["spacings", "convergence", "tail", "figure2"];
    for (run, name) in runs.iter().zip(names) {
        let rerun = run_experiment_with_workers(&run.config, None, RERUN_WORKERS)
            .expect("rerun succeeds");
        assert_eq!(
            run.record.canonical_json(),
            rerun.canonical_json(),
            "{name}: records differ between {SHARED_WORKERS} and {RERUN_WORKERS} workers"
        );
    }
    println!(
        "[PASS] criterion 10: spacings, convergence, tail and figure2 records are bit-identical \
         at {SHARED_WORKERS} and {RERUN_WORKERS} workers"
    );
}
