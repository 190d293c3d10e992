//! Point processes on the unit cube, uniform samples on an embedded torus,
//! and elementary geometry on finite clouds.

use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// A finite set of points in ambient dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
            }
        }
        Ok(Self { points, dim })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i]
    }
}

/// Euclidean distance between two coordinate slices.
///
/// Shared by every module that measures distances so that equal geometric
/// quantities are equal bit-for-bit.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

type Evaluator = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A probability density on `[0,1]^d` with certified positive bounds.
///
/// Rejection sampling only needs the supremum; the infimum being positive is
/// the standing assumption on the intensity.
#[derive(Clone)]
pub struct DensitySpec {
    dim: usize,
    lower: f64,
    upper: f64,
    eval: Evaluator,
    uniform: bool,
}

impl std::fmt::Debug for DensitySpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensitySpec")
            .field("dim", &self.dim)
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("uniform", &self.uniform)
            .finish()
    }
}

impl DensitySpec {
    /// Uniform density on the cube.
    pub fn uniform(dim: usize) -> Self {
        Self {
            dim,
            lower: 1.0,
            upper: 1.0,
            eval: Arc::new(|_| 1.0),
            uniform: true,
        }
    }

    /// The tilted preset `kappa(x) = 0.5 + x_1`, a valid density in any dimension.
    pub fn linear_x1(dim: usize) -> Self {
        Self::custom(dim, 0.5, 1.5, Arc::new(|x: &[f64]| 0.5 + x[0]))
            .expect("preset density is valid")
    }

    /// A user-supplied density with certified bounds.
    ///
    /// Construction spot-checks the bounds on a grid and verifies by midpoint
    /// quadrature that the density integrates to one within `1e-3`.
    pub fn custom(dim: usize, lower: f64, upper: f64, eval: Evaluator) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if !(lower > 0.0) {
            return Err(Error::InvalidDensity(format!(
                "lower bound must be positive, got {lower}"
            )));
        }
        if upper < lower {
            return Err(Error::InvalidDensity(format!(
                "upper bound {upper} below lower bound {lower}"
            )));
        }
        let k = grid_side(dim);
        let mut idx = vec![0usize; dim];
        let mut point = vec![0.0f64; dim];
        let mut integral = 0.0f64;
        let cell = (1.0 / k as f64).powi(dim as i32);
        loop {
            for (a, &i) in point.iter_mut().zip(idx.iter()) {
                *a = (i as f64 + 0.5) / k as f64;
            }
            let v = (eval)(&point);
            if v < lower - 1e-9 || v > upper + 1e-9 {
                return Err(Error::InvalidDensity(format!(
                    "evaluator value {v} at {point:?} violates certified bounds [{lower}, {upper}]"
                )));
            }
            integral += v * cell;
            // odometer over the grid
            let mut carry = true;
            for i in idx.iter_mut() {
                *i += 1;
                if *i < k {
                    carry = false;
                    break;
                }
                *i = 0;
            }
            if carry {
                break;
            }
        }
        if (integral - 1.0).abs() > 1e-3 {
            return Err(Error::InvalidDensity(format!(
                "density integrates to {integral}, not 1 within 1e-3"
            )));
        }
        Ok(Self { dim, lower, upper, eval, uniform: false })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }
}

fn grid_side(dim: usize) -> usize {
    match dim {
        1 => 4096,
        2 => 256,
        3 => 48,
        4 => 20,
        _ => 5,
    }
}

/// Draw `n` i.i.d. points from `density` on `[0,1]^d` by rejection sampling.
pub fn sample_binomial(n: usize, density: &DensitySpec, d: usize, seed: u64) -> Result<PointCloud> {
    if density.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: density.dim() });
    }
    let mut rng = rng_from_seed(seed);
    let mut points = Vec::with_capacity(n);
    let sup = density.upper();
    while points.len() < n {
        let candidate: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let u: f64 = rng.random();
        if u * sup <= density.eval(&candidate) {
            points.push(candidate);
        }
    }
    PointCloud::new(points, d)
}

/// Draw a Poisson process of intensity `n * density` on the cube: the point
/// count is `Poisson(n)`, conditionally i.i.d. from the density.
pub fn sample_poisson(n: f64, density: &DensitySpec, d: usize, seed: u64) -> Result<PointCloud> {
    if !(n >= 0.0) {
        return Err(Error::InvalidParameter(format!("intensity must be >= 0, got {n}")));
    }
    if density.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: density.dim() });
    }
    let mut rng = rng_from_seed(seed);
    let count = if n == 0.0 {
        0
    } else {
        let pois = Poisson::new(n)
            .map_err(|e| Error::InvalidParameter(format!("invalid Poisson intensity: {e}")))?;
        pois.sample(&mut rng) as usize
    };
    let sup = density.upper();
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let candidate: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let u: f64 = rng.random();
        if u * sup <= density.eval(&candidate) {
            points.push(candidate);
        }
    }
    PointCloud::new(points, d)
}

/// Sample `n` points uniformly (with respect to surface area) on the torus
/// `{ (sqrt(x^2+y^2) - R)^2 + z^2 = r^2 }` embedded in dimension 3.
///
/// The minor angle is drawn by rejection against the tilted density
/// `1 + (r/R) cos(theta)`, which is the area distortion of the embedding.
pub fn sample_torus(n: usize, r_major: f64, r_minor: f64, seed: u64) -> Result<PointCloud> {
    if !(r_minor > 0.0) || !(r_major > r_minor) {
        return Err(Error::InvalidParameter(format!(
            "torus radii must satisfy 0 < r_minor < R_major, got R={r_major}, r={r_minor}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let ratio = r_minor / r_major;
    let mut points = Vec::with_capacity(n);
    while points.len() < n {
        let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let u: f64 = rng.random();
        if u * (1.0 + ratio) > 1.0 + ratio * theta.cos() {
            continue;
        }
        let phi = 2.0 * std::f64::consts::PI * rng.random::<f64>();
        let ring = r_major + r_minor * theta.cos();
        points.push(vec![ring * phi.cos(), ring * phi.sin(), r_minor * theta.sin()]);
    }
    PointCloud::new(points, 3)
}

/// Multiply every coordinate by `factor`.
pub fn rescale(cloud: &PointCloud, factor: f64) -> Result<PointCloud> {
    if !(factor > 0.0) {
        return Err(Error::InvalidParameter(format!("rescale factor must be > 0, got {factor}")));
    }
    let points = cloud
        .points()
        .iter()
        .map(|p| p.iter().map(|&c| c * factor).collect())
        .collect();
    PointCloud::new(points, cloud.dim())
}

/// Hausdorff distance between two non-empty clouds of the same dimension.
pub fn hausdorff_distance(x: &PointCloud, y: &PointCloud) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyInput("hausdorff_distance requires non-empty clouds"));
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch { expected: x.dim(), got: y.dim() });
    }
    let directed = |a: &PointCloud, b: &PointCloud| -> f64 {
        a.points()
            .iter()
            .map(|p| {
                b.points()
                    .iter()
                    .map(|q| euclidean(p, q))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    Ok(directed(x, y).max(directed(y, x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_count_and_support() {
        let cloud = sample_binomial(100, &DensitySpec::uniform(2), 2, 1).unwrap();
        assert_eq!(cloud.len(), 100);
        for p in cloud.points() {
            assert!(p.iter().all(|&c| (0.0..=1.0).contains(&c)));
        }
    }

    #[test]
    fn binomial_empty() {
        let cloud = sample_binomial(0, &DensitySpec::uniform(3), 3, 7).unwrap();
        assert!(cloud.is_empty());
        assert_eq!(cloud.dim(), 3);
    }

    #[test]
    fn binomial_tilted_first_moment() {
        // E[x_1] under kappa(x) = 0.5 + x_1 is 1/4 + 1/3 = 7/12.
        let cloud = sample_binomial(100_000, &DensitySpec::linear_x1(2), 2, 11).unwrap();
        let mean: f64 = cloud.points().iter().map(|p| p[0]).sum::<f64>() / cloud.len() as f64;
        assert!((mean - 7.0 / 12.0).abs() < 0.02, "mean {mean}");
    }

    #[test]
    fn binomial_rejects_nonpositive_lower_bound() {
        let err = DensitySpec::custom(1, 0.0, 2.0, Arc::new(|x: &[f64]| 2.0 * x[0]));
        assert!(err.is_err());
    }

    #[test]
    fn density_integral_check() {
        let err = DensitySpec::custom(2, 0.5, 3.0, Arc::new(|_| 2.0));
        assert!(matches!(err, Err(Error::InvalidDensity(_))));
    }

    #[test]
    fn piecewise_density_cell_frequencies() {
        // Two-cell density on [0,1]: 0.5 on the left half, 1.5 on the right.
        let spec = DensitySpec::custom(
            1,
            0.5,
            1.5,
            Arc::new(|x: &[f64]| if x[0] < 0.5 { 0.5 } else { 1.5 }),
        )
        .unwrap();
        let n = 100_000;
        let cloud = sample_binomial(n, &spec, 1, 5).unwrap();
        let left = cloud.points().iter().filter(|p| p[0] < 0.5).count() as f64 / n as f64;
        let mass = 0.25;
        let se = (mass * (1.0 - mass) / n as f64).sqrt();
        assert!((left - mass).abs() < 3.0 * se, "left frequency {left}");
    }

    #[test]
    fn poisson_moments() {
        let n = 1000.0;
        let reps = 10_000;
        let density = DensitySpec::uniform(1);
        let counts: Vec<f64> = (0..reps)
            .map(|k| sample_poisson(n, &density, 1, 1000 + k).unwrap().len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (reps - 1) as f64;
        assert!((mean - n).abs() / n < 0.02, "mean {mean}");
        assert!((var - n).abs() / n < 0.05, "variance {var}");
    }

    #[test]
    fn poisson_zero_intensity() {
        for seed in 0..5 {
            assert!(sample_poisson(0.0, &DensitySpec::uniform(2), 2, seed).unwrap().is_empty());
        }
    }

    #[test]
    fn samplers_are_deterministic() {
        let d = DensitySpec::linear_x1(2);
        assert_eq!(
            sample_binomial(50, &d, 2, 99).unwrap(),
            sample_binomial(50, &d, 2, 99).unwrap()
        );
        assert_eq!(
            sample_poisson(50.0, &d, 2, 99).unwrap(),
            sample_poisson(50.0, &d, 2, 99).unwrap()
        );
        assert_eq!(sample_torus(50, 2.0, 1.0, 99).unwrap(), sample_torus(50, 2.0, 1.0, 99).unwrap());
    }

    #[test]
    fn torus_surface_membership() {
        let (big_r, small_r) = (2.0, 1.0);
        let cloud = sample_torus(500, big_r, small_r, 3).unwrap();
        for p in cloud.points() {
            let ring = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let lhs = (ring - big_r) * (ring - big_r) + p[2] * p[2];
            assert!((lhs - small_r * small_r).abs() < 1e-12);
        }
    }

    #[test]
    fn torus_rejects_degenerate_radii() {
        assert!(sample_torus(10, 1.0, 1.0, 0).is_err());
        assert!(sample_torus(10, 1.0, 2.0, 0).is_err());
    }

    #[test]
    fn torus_minor_angle_histogram() {
        // Recover the minor angle and chi-square it against 1 + (r/R) cos(theta).
        let (big_r, small_r) = (2.0, 1.0);
        let n = 100_000;
        let cloud = sample_torus(n, big_r, small_r, 17).unwrap();
        let bins = 36;
        let mut observed = vec![0.0f64; bins];
        for p in cloud.points() {
            let ring = (p[0] * p[0] + p[1] * p[1]).sqrt();
            let theta = p[2].atan2(ring - big_r).rem_euclid(2.0 * std::f64::consts::PI);
            let b = ((theta / (2.0 * std::f64::consts::PI) * bins as f64) as usize).min(bins - 1);
            observed[b] += 1.0;
        }
        let ratio = small_r / big_r;
        let mut chi2 = 0.0;
        for (b, &obs) in observed.iter().enumerate() {
            let mid = (b as f64 + 0.5) / bins as f64 * 2.0 * std::f64::consts::PI;
            let expected = n as f64 / bins as f64 * (1.0 + ratio * mid.cos());
            chi2 += (obs - expected) * (obs - expected) / expected;
        }
        // 35 degrees of freedom; 1e-4 quantile is ~ 78.
        assert!(chi2 < 78.0, "chi-square {chi2}");
    }

    #[test]
    fn rescale_identity_and_inverse() {
        let cloud = sample_binomial(40, &DensitySpec::uniform(3), 3, 2).unwrap();
        assert_eq!(rescale(&cloud, 1.0).unwrap(), cloud);
        let back = rescale(&rescale(&cloud, 2.0).unwrap(), 0.5).unwrap();
        for (p, q) in back.points().iter().zip(cloud.points()) {
            for (a, b) in p.iter().zip(q) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hausdorff_singletons_and_identity() {
        let x = PointCloud::new(vec![vec![0.0]], 1).unwrap();
        let y = PointCloud::new(vec![vec![1.0]], 1).unwrap();
        assert_eq!(hausdorff_distance(&x, &y).unwrap(), 1.0);
        assert_eq!(hausdorff_distance(&x, &x).unwrap(), 0.0);
        assert!(hausdorff_distance(&x, &PointCloud::new(vec![], 1).unwrap()).is_err());
    }

    #[test]
    fn hausdorff_matches_brute_force() {
        for seed in 0..10 {
            let x = sample_binomial(37, &DensitySpec::uniform(2), 2, seed).unwrap();
            let y = sample_binomial(23, &DensitySpec::uniform(2), 2, seed + 100).unwrap();
            // independent double loop
            let mut fwd = 0.0f64;
            for p in x.points() {
                let mut best = f64::INFINITY;
                for q in y.points() {
                    let mut s = 0.0;
                    for k in 0..2 {
                        s += (p[k] - q[k]) * (p[k] - q[k]);
                    }
                    best = best.min(s.sqrt());
                }
                fwd = fwd.max(best);
            }
            let mut bwd = 0.0f64;
            for q in y.points() {
                let mut best = f64::INFINITY;
                for p in x.points() {
                    let mut s = 0.0;
                    for k in 0..2 {
                        s += (p[k] - q[k]) * (p[k] - q[k]);
                    }
                    best = best.min(s.sqrt());
                }
                bwd = bwd.max(best);
            }
            assert_eq!(hausdorff_distance(&x, &y).unwrap(), fwd.max(bwd));
        }
    }
}
