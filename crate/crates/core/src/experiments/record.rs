//! Run records: per-replicate statistics, aggregates, fits and invariant
//! checks, reproducible bit-for-bit from (config, base seed).

use serde::Serialize;

use super::config::ExperimentKind;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct StatGroup {
    pub key: String,
    /// One value per replicate, in replicate-index order.
    pub replicate_values: Vec<f64>,
    pub mean: f64,
    pub stderr: f64,
}

impl StatGroup {
    pub fn new(key: String, replicate_values: Vec<f64>) -> Self {
        let n = replicate_values.len() as f64;
        let mean = replicate_values.iter().sum::<f64>() / n;
        let stderr = if replicate_values.len() > 1 {
            let var = replicate_values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        Self { key, replicate_values, mean, stderr }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FitResult {
    pub key: String,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// (x, y) pairs that entered the fit.
    pub points: Vec<(f64, f64)>,
}

/// Ordinary least squares y = slope x + intercept.
pub fn linear_fit(key: &str, points: &[(f64, f64)]) -> FitResult {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<f64>();
    let sxy = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>();
    let syy = points.iter().map(|p| (p.1 - my) * (p.1 - my)).sum::<f64>();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    FitResult { key: key.into(), slope, intercept, r_squared, points: points.to_vec() }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

impl CheckOutcome {
    pub fn new(name: impl Into<String>, passed: bool, value: f64, threshold: f64) -> Self {
        Self { name: name.into(), passed, value, threshold }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunRecord {
    pub kind: ExperimentKind,
    pub config_hash: String,
    pub version: String,
    pub groups: Vec<StatGroup>,
    pub fits: Vec<FitResult>,
    pub checks: Vec<CheckOutcome>,
    pub notes: Vec<String>,
    pub wall_clock_ms: u64,
}

impl RunRecord {
    pub fn new(kind: ExperimentKind, config_hash: String) -> Self {
        Self {
            kind,
            config_hash,
            version: env!("CARGO_PKG_VERSION").to_string(),
            groups: Vec::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            wall_clock_ms: 0,
        }
    }

    pub fn all_checks_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn group(&self, key: &str) -> Option<&StatGroup> {
        self.groups.iter().find(|g| g.key == key)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Serialization of everything that must reproduce bit-identically
    /// across reruns and worker counts (wall-clock time excluded).
    pub fn canonical_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("record serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("wall_clock_ms");
        }
        value.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stat_group_aggregates() {
        let g = StatGroup::new("k".into(), vec![1.0, 2.0, 3.0]);
        assert_eq!(g.mean, 2.0);
        assert!((g.stderr - (1.0f64 / 3.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exact_line_fit() {
        let fit = linear_fit("f", &[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]);
        assert!((fit.slope - 2.0).abs() < 1e-12);
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn canonical_json_ignores_wall_clock() {
        let mut a = RunRecord::new(ExperimentKind::Tail, "h".into());
        let mut b = a.clone();
        a.wall_clock_ms = 10;
        b.wall_clock_ms = 99;
        assert_eq!(a.canonical_json(), b.canonical_json());
    }
}
