//! Weighted linear feature maps on diagrams: a diagram `D` is sent to
//! `sum_{r in D} w(r) phi(r)` for a weight `w` from an admissible family and
//! a feature map `phi` with certified Lipschitz constant and sup-norm.

use serde::Serialize;
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::persistence::{DiagramPoint, PersistenceDiagram};

/// Weight families `w(r) = wtilde(pers(r))`.
///
/// The admissible class requires `wtilde(0) = 0` and
/// `|wtilde'(u)| <= A u^(alpha-1)` with `alpha >= 1`; both shipped families
/// satisfy it, `power` with `A = alpha` and `arctan` with `A = B alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightSpec {
    pub family: WeightFamily,
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightFamily {
    Power,
    Arctan { b: f64 },
}

impl WeightSpec {
    /// `wtilde(u) = u^alpha`, `alpha >= 1`.
    pub fn power(alpha: f64) -> Result<Self> {
        if alpha < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "power weight needs alpha >= 1 to be admissible, got {alpha}"
            )));
        }
        Ok(Self { family: WeightFamily::Power, alpha })
    }

    /// Power weight with any `alpha >= 0`. Exponents below one leave the
    /// admissible class (no certified derivative bound) but are meaningful
    /// for image sweeps, e.g. `alpha = 0` weighs every point equally.
    pub fn power_any(alpha: f64) -> Result<Self> {
        if alpha < 0.0 {
            return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
        }
        Ok(Self { family: WeightFamily::Power, alpha })
    }

    /// `wtilde(u) = arctan(B u^alpha)`, `B > 0`, `alpha >= 1`.
    pub fn arctan(b: f64, alpha: f64) -> Result<Self> {
        if alpha < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "arctan weight needs alpha >= 1 to be admissible, got {alpha}"
            )));
        }
        if !(b > 0.0) {
            return Err(Error::InvalidParameter(format!("arctan weight needs B > 0, got {b}")));
        }
        Ok(Self { family: WeightFamily::Arctan { b }, alpha })
    }

    /// `wtilde` applied to a persistence value.
    pub fn eval_pers(&self, u: f64) -> f64 {
        match self.family {
            WeightFamily::Power => u.powf(self.alpha),
            WeightFamily::Arctan { b } => (b * u.powf(self.alpha)).atan(),
        }
    }

    /// Certified `A` with `|wtilde'(u)| <= A u^(alpha-1)`; `None` outside the
    /// admissible class.
    pub fn derivative_bound(&self) -> Option<f64> {
        if self.alpha < 1.0 {
            return None;
        }
        Some(match self.family {
            WeightFamily::Power => self.alpha,
            WeightFamily::Arctan { b } => b * self.alpha,
        })
    }
}

/// `w` evaluated on a diagram point.
pub fn weight_eval(w: &WeightSpec, point: &DiagramPoint) -> f64 {
    w.eval_pers(point.persistence())
}

/// Uniform grid over the (birth, persistence) plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub birth_min: f64,
    pub birth_max: f64,
    pub pers_min: f64,
    pub pers_max: f64,
    pub res_birth: usize,
    pub res_pers: usize,
}

impl GridSpec {
    pub fn cell_width(&self) -> f64 {
        (self.birth_max - self.birth_min) / self.res_birth as f64
    }

    pub fn cell_height(&self) -> f64 {
        (self.pers_max - self.pers_min) / self.res_pers as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_width() * self.cell_height()
    }

    pub fn total_area(&self) -> f64 {
        (self.birth_max - self.birth_min) * (self.pers_max - self.pers_min)
    }

    fn validate(&self) -> Result<()> {
        if !(self.birth_max > self.birth_min)
            || !(self.pers_max > self.pers_min)
            || self.res_birth == 0
            || self.res_pers == 0
        {
            return Err(Error::InvalidParameter("degenerate image grid".into()));
        }
        Ok(())
    }
}

/// Feature maps `phi` from the half-plane into a concrete normed target.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FeatureSpec {
    /// `phi == 1`; the representation is a weighted point count.
    ConstantOne,
    /// Per-cell mass of an isotropic Gaussian placed at (birth, persistence).
    GaussianBump { grid: GridSpec, bandwidth: f64 },
    /// Tent function of height `pers/2` peaked at the bar midpoint, sampled
    /// on a uniform 1-d grid.
    Tent { start: f64, stop: f64, resolution: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    L2,
    Sup,
}

/// Operator norm of the (birth, death) -> (birth, persistence) change of
/// coordinates, sqrt((3 + sqrt 5) / 2).
const COORD_MAP_NORM: f64 = 1.618033988749895;

impl FeatureSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            FeatureSpec::ConstantOne => Ok(()),
            FeatureSpec::GaussianBump { grid, bandwidth } => {
                grid.validate()?;
                if !(*bandwidth > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "bandwidth must be positive, got {bandwidth}"
                    )));
                }
                Ok(())
            }
            FeatureSpec::Tent { start, stop, resolution } => {
                if *resolution < 2 {
                    return Err(Error::InvalidParameter("tent resolution must be >= 2".into()));
                }
                if !(stop > start) {
                    return Err(Error::InvalidParameter("tent range is empty".into()));
                }
                Ok(())
            }
        }
    }

    /// Certified upper bound on the Lipschitz constant of `phi` with respect
    /// to the Euclidean metric on diagram points and the given target norm.
    pub fn lipschitz(&self, norm: Norm) -> f64 {
        match self {
            FeatureSpec::ConstantOne => 0.0,
            FeatureSpec::GaussianBump { grid, bandwidth } => {
                // each cell mass is a product of axis CDF differences; its
                // gradient in the center is bounded by two peak densities per
                // axis, sqrt(4/pi)/h overall
                let per_cell = (4.0 / std::f64::consts::PI).sqrt() / bandwidth;
                let base = COORD_MAP_NORM * per_cell;
                match norm {
                    Norm::Sup => base,
                    Norm::L2 => base * grid.total_area().sqrt(),
                }
            }
            FeatureSpec::Tent { start, stop, .. } => match norm {
                Norm::Sup => 1.0,
                Norm::L2 => (stop - start).sqrt(),
            },
        }
    }

    /// Certified upper bound on `sup_r ||phi(r)||`; `None` when unbounded
    /// (the tent height grows with persistence).
    pub fn sup_norm(&self, norm: Norm) -> Option<f64> {
        match self {
            FeatureSpec::ConstantOne => Some(1.0),
            FeatureSpec::GaussianBump { grid, bandwidth } => {
                let peak = 1.0 / (2.0 * std::f64::consts::PI * bandwidth * bandwidth);
                let per_cell = (grid.cell_area() * peak).min(1.0);
                Some(match norm {
                    Norm::Sup => per_cell,
                    Norm::L2 => (grid.cell_area() * per_cell).sqrt().min(1.0),
                })
            }
            FeatureSpec::Tent { .. } => None,
        }
    }
}

/// A representation value; linear in the diagram seen as a measure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RepresentationValue {
    Scalar(f64),
    /// Row-major over persistence rows, birth columns.
    Image { grid: GridSpec, values: Vec<f64> },
    Function { start: f64, stop: f64, values: Vec<f64> },
}

impl RepresentationValue {
    pub fn values(&self) -> &[f64] {
        match self {
            RepresentationValue::Scalar(_) => &[],
            RepresentationValue::Image { values, .. } => values,
            RepresentationValue::Function { values, .. } => values,
        }
    }

    /// Total of all entries (for images, the accumulated mass).
    pub fn total_mass(&self) -> f64 {
        match self {
            RepresentationValue::Scalar(v) => *v,
            RepresentationValue::Image { values, .. } => values.iter().sum(),
            RepresentationValue::Function { values, .. } => values.iter().sum(),
        }
    }
}

fn ensure_no_censored(diagram: &PersistenceDiagram) -> Result<()> {
    let count = diagram.censored_count();
    if count > 0 {
        return Err(Error::CensoredPoints { count });
    }
    Ok(())
}

/// Standard normal CDF.
fn ncdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

/// The linear representation `sum w(r) phi(r)`.
pub fn linear_representation(
    diagram: &PersistenceDiagram,
    w: &WeightSpec,
    phi: &FeatureSpec,
) -> Result<RepresentationValue> {
    phi.validate()?;
    ensure_no_censored(diagram)?;
    match phi {
        FeatureSpec::ConstantOne => {
            let total = diagram.points().iter().map(|p| weight_eval(w, p)).sum();
            Ok(RepresentationValue::Scalar(total))
        }
        FeatureSpec::GaussianBump { grid, bandwidth } => {
            persistence_image(diagram, w, grid, *bandwidth)
        }
        FeatureSpec::Tent { start, stop, resolution } => {
            let mut values = vec![0.0f64; *resolution];
            let dt = (stop - start) / (*resolution as f64 - 1.0);
            for p in diagram.points() {
                let weight = weight_eval(w, p);
                for (j, v) in values.iter_mut().enumerate() {
                    let t = start + dt * j as f64;
                    let tent = (t - p.birth).min(p.death - t).max(0.0);
                    *v += weight * tent;
                }
            }
            Ok(RepresentationValue::Function { start: *start, stop: *stop, values })
        }
    }
}

/// Persistence image: every point is mapped to (birth, persistence) and
/// contributes `w(r)` times the mass of an isotropic Gaussian integrated per
/// grid cell. Points outside the grid contribute whatever part of their mass
/// falls inside, which clips the image without distorting interior cells.
pub fn persistence_image(
    diagram: &PersistenceDiagram,
    w: &WeightSpec,
    grid: &GridSpec,
    bandwidth: f64,
) -> Result<RepresentationValue> {
    grid.validate()?;
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    ensure_no_censored(diagram)?;
    let (rb, rp) = (grid.res_birth, grid.res_pers);
    let mut values = vec![0.0f64; rb * rp];
    let mut cdf_b = vec![0.0f64; rb + 1];
    let mut cdf_p = vec![0.0f64; rp + 1];
    for point in diagram.points() {
        let weight = weight_eval(w, point);
        if weight == 0.0 {
            continue;
        }
        let (cb, cp) = (point.birth, point.persistence());
        for (k, v) in cdf_b.iter_mut().enumerate() {
            let edge = grid.birth_min + grid.cell_width() * k as f64;
            *v = ncdf((edge - cb) / bandwidth);
        }
        for (k, v) in cdf_p.iter_mut().enumerate() {
            let edge = grid.pers_min + grid.cell_height() * k as f64;
            *v = ncdf((edge - cp) / bandwidth);
        }
        for ip in 0..rp {
            let mass_p = cdf_p[ip + 1] - cdf_p[ip];
            if mass_p == 0.0 {
                continue;
            }
            let row = &mut values[ip * rb..(ip + 1) * rb];
            for (ib, cell) in row.iter_mut().enumerate() {
                *cell += weight * mass_p * (cdf_b[ib + 1] - cdf_b[ib]);
            }
        }
    }
    Ok(RepresentationValue::Image { grid: *grid, values })
}

/// Deterministic scale-adaptive default: half the median persistence.
pub fn default_bandwidth(diagram: &PersistenceDiagram) -> f64 {
    if diagram.is_empty() {
        return 1.0;
    }
    let mut pers: Vec<f64> = diagram.points().iter().map(|p| p.persistence()).collect();
    pers.sort_by(f64::total_cmp);
    let n = pers.len();
    let median = if n % 2 == 1 { pers[n / 2] } else { 0.5 * (pers[n / 2 - 1] + pers[n / 2]) };
    let h = median / 2.0;
    if h > 0.0 {
        h
    } else {
        1.0
    }
}

/// Grid covering the (birth, persistence) bounding box padded by three
/// bandwidths.
pub fn default_grid(diagram: &PersistenceDiagram, bandwidth: f64, resolution: usize) -> GridSpec {
    let (mut b_lo, mut b_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut p_lo, mut p_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in diagram.points() {
        b_lo = b_lo.min(p.birth);
        b_hi = b_hi.max(p.birth);
        p_lo = p_lo.min(p.persistence());
        p_hi = p_hi.max(p.persistence());
    }
    if !b_lo.is_finite() {
        (b_lo, b_hi, p_lo, p_hi) = (0.0, 1.0, 0.0, 1.0);
    }
    let pad = 3.0 * bandwidth;
    GridSpec {
        birth_min: b_lo - pad,
        birth_max: b_hi + pad,
        pers_min: (p_lo - pad).max(-pad),
        pers_max: p_hi + pad,
        res_birth: resolution,
        res_pers: resolution,
    }
}

/// Weighted sum of tent functions sampled on a uniform grid over the
/// diagram's support.
pub fn silhouette(
    diagram: &PersistenceDiagram,
    w: &WeightSpec,
    resolution: usize,
) -> Result<RepresentationValue> {
    let (start, stop) = silhouette_range(diagram);
    silhouette_on(diagram, w, start, stop, resolution)
}

pub fn silhouette_range(diagram: &PersistenceDiagram) -> (f64, f64) {
    if diagram.is_empty() {
        return (0.0, 1.0);
    }
    let start = diagram.points().iter().map(|p| p.birth).fold(f64::INFINITY, f64::min);
    let stop = diagram.points().iter().map(|p| p.death).fold(f64::NEG_INFINITY, f64::max);
    (start, stop)
}

/// Silhouette sampled on an explicit range, so values of different diagrams
/// share a shape.
pub fn silhouette_on(
    diagram: &PersistenceDiagram,
    w: &WeightSpec,
    start: f64,
    stop: f64,
    resolution: usize,
) -> Result<RepresentationValue> {
    linear_representation(diagram, w, &FeatureSpec::Tent { start, stop, resolution })
}

/// Grid-weighted L2 or sup distance between two values of the same shape.
pub fn representation_distance(
    a: &RepresentationValue,
    b: &RepresentationValue,
    norm: Norm,
) -> Result<f64> {
    match (a, b) {
        (RepresentationValue::Scalar(x), RepresentationValue::Scalar(y)) => Ok((x - y).abs()),
        (
            RepresentationValue::Image { grid: ga, values: va },
            RepresentationValue::Image { grid: gb, values: vb },
        ) => {
            if ga != gb {
                return Err(Error::ShapeMismatch);
            }
            Ok(match norm {
                Norm::Sup => va.iter().zip(vb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
                Norm::L2 => {
                    let area = ga.cell_area();
                    va.iter()
                        .zip(vb)
                        .map(|(x, y)| (x - y) * (x - y) * area)
                        .sum::<f64>()
                        .sqrt()
                }
            })
        }
        (
            RepresentationValue::Function { start: sa, stop: ta, values: va },
            RepresentationValue::Function { start: sb, stop: tb, values: vb },
        ) => {
            if sa != sb || ta != tb || va.len() != vb.len() {
                return Err(Error::ShapeMismatch);
            }
            Ok(match norm {
                Norm::Sup => va.iter().zip(vb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
                Norm::L2 => {
                    let dt = (ta - sa) / (va.len() as f64 - 1.0);
                    va.iter()
                        .zip(vb)
                        .map(|(x, y)| (x - y) * (x - y) * dt)
                        .sum::<f64>()
                        .sqrt()
                }
            })
        }
        _ => Err(Error::ShapeMismatch),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persistence::PersistenceDiagram;

    fn point(birth: f64, death: f64) -> DiagramPoint {
        DiagramPoint { birth, death, censored: false, positive: 0, negative: Some(1) }
    }

    fn diagram(points: Vec<DiagramPoint>) -> PersistenceDiagram {
        PersistenceDiagram::new(1, 100.0, points)
    }

    #[test]
    fn weight_eval_examples() {
        let w2 = WeightSpec::power(2.0).unwrap();
        assert_eq!(weight_eval(&w2, &point(0.0, 1.0)), 1.0);
        let at = WeightSpec::arctan(1.0, 1.0).unwrap();
        assert!((weight_eval(&at, &point(0.0, 1.0)) - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        assert!(WeightSpec::power(0.5).is_err());
        assert!(WeightSpec::arctan(-1.0, 2.0).is_err());
        assert_eq!(WeightSpec::power_any(0.0).unwrap().eval_pers(0.3), 1.0);
        assert!(WeightSpec::power_any(0.5).unwrap().derivative_bound().is_none());
    }

    #[test]
    fn constant_one_matches_total_persistence() {
        let d = diagram(vec![point(0.0, 1.0), point(0.5, 2.0), point(0.1, 0.2)]);
        for alpha in [1.0, 2.0, 3.5] {
            let w = WeightSpec::power(alpha).unwrap();
            let rep = linear_representation(&d, &w, &FeatureSpec::ConstantOne).unwrap();
            let expected = crate::persistence::total_persistence(&d, alpha).unwrap();
            match rep {
                RepresentationValue::Scalar(v) => assert_eq!(v, expected),
                _ => panic!("wrong kind"),
            }
        }
    }

    #[test]
    fn empty_diagram_representations_are_zero() {
        let d = diagram(vec![]);
        let w = WeightSpec::power(1.0).unwrap();
        let grid = GridSpec {
            birth_min: 0.0,
            birth_max: 1.0,
            pers_min: 0.0,
            pers_max: 1.0,
            res_birth: 8,
            res_pers: 8,
        };
        let img = persistence_image(&d, &w, &grid, 0.1).unwrap();
        assert!(img.values().iter().all(|&v| v == 0.0));
        let sil = silhouette(&d, &w, 16).unwrap();
        assert!(sil.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn image_order_invariance_is_bit_exact() {
        let w = WeightSpec::power(1.0).unwrap();
        let grid = GridSpec {
            birth_min: -0.5,
            birth_max: 2.5,
            pers_min: -0.5,
            pers_max: 2.5,
            res_birth: 16,
            res_pers: 16,
        };
        let d1 = diagram(vec![point(0.0, 1.0), point(0.4, 2.0), point(1.0, 1.4)]);
        let d2 = diagram(vec![point(1.0, 1.4), point(0.0, 1.0), point(0.4, 2.0)]);
        // PersistenceDiagram sorts its points, so both orders collapse to the
        // same sequence and the float accumulation is identical
        let a = persistence_image(&d1, &w, &grid, 0.2).unwrap();
        let b = persistence_image(&d2, &w, &grid, 0.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_point_gaussian_mass() {
        let w = WeightSpec::power(2.0).unwrap();
        let p = point(0.3, 0.8);
        let d = diagram(vec![p]);
        let h = 0.05;
        let grid = GridSpec {
            birth_min: 0.0,
            birth_max: 0.6,
            pers_min: 0.2,
            pers_max: 0.8,
            res_birth: 32,
            res_pers: 32,
        };
        let img = persistence_image(&d, &w, &grid, h).unwrap();
        let inside_b = ncdf((0.6 - 0.3) / h) - ncdf((0.0 - 0.3) / h);
        let inside_p = ncdf((0.8 - 0.5) / h) - ncdf((0.2 - 0.5) / h);
        let expected = 0.25 * inside_b * inside_p;
        assert!((img.total_mass() - expected).abs() < 1e-3);
    }

    #[test]
    fn silhouette_peak_and_additivity() {
        let w = WeightSpec::power_any(0.0).unwrap(); // w == 1
        let d = diagram(vec![point(0.0, 2.0)]);
        let s = silhouette_on(&d, &w, 0.0, 2.0, 5).unwrap();
        match &s {
            RepresentationValue::Function { values, .. } => {
                assert_eq!(values[2], 1.0); // apex pers/2 at the midpoint
                assert_eq!(values[0], 0.0);
                assert_eq!(values[4], 0.0);
            }
            _ => panic!("wrong kind"),
        }
        // additivity over a disjoint union on a shared grid
        let d1 = diagram(vec![point(0.0, 2.0)]);
        let d2 = diagram(vec![point(0.5, 1.5), point(1.0, 1.9)]);
        let both = diagram(vec![point(0.0, 2.0), point(0.5, 1.5), point(1.0, 1.9)]);
        let w1 = WeightSpec::power(1.0).unwrap();
        let sa = silhouette_on(&d1, &w1, 0.0, 2.0, 33).unwrap();
        let sb = silhouette_on(&d2, &w1, 0.0, 2.0, 33).unwrap();
        let sc = silhouette_on(&both, &w1, 0.0, 2.0, 33).unwrap();
        for ((a, b), c) in sa.values().iter().zip(sb.values()).zip(sc.values()) {
            assert!((a + b - c).abs() < 1e-12);
        }
    }

    #[test]
    fn representation_linearity() {
        let w = WeightSpec::power(2.0).unwrap();
        let grid = GridSpec {
            birth_min: -0.5,
            birth_max: 2.5,
            pers_min: -0.5,
            pers_max: 2.5,
            res_birth: 12,
            res_pers: 12,
        };
        let phi = FeatureSpec::GaussianBump { grid, bandwidth: 0.15 };
        let d1 = diagram(vec![point(0.0, 1.0), point(0.2, 0.9)]);
        let d2 = diagram(vec![point(0.7, 2.0)]);
        let union = diagram(vec![point(0.0, 1.0), point(0.2, 0.9), point(0.7, 2.0)]);
        let a = linear_representation(&d1, &w, &phi).unwrap();
        let b = linear_representation(&d2, &w, &phi).unwrap();
        let c = linear_representation(&union, &w, &phi).unwrap();
        for ((x, y), z) in a.values().iter().zip(b.values()).zip(c.values()) {
            assert!((x + y - z).abs() < 1e-12);
        }
    }

    #[test]
    fn distance_trivial_cases() {
        let a = RepresentationValue::Scalar(1.5);
        let b = RepresentationValue::Scalar(-0.5);
        assert_eq!(representation_distance(&a, &a, Norm::L2).unwrap(), 0.0);
        assert_eq!(representation_distance(&a, &b, Norm::Sup).unwrap(), 2.0);
        let grid = GridSpec {
            birth_min: 0.0,
            birth_max: 1.0,
            pers_min: 0.0,
            pers_max: 1.0,
            res_birth: 2,
            res_pers: 2,
        };
        let x = RepresentationValue::Image { grid, values: vec![1.0, 0.0, 0.0, 0.0] };
        let y = RepresentationValue::Image { grid, values: vec![0.0, 0.0, 0.0, 2.0] };
        let area: f64 = 0.25;
        let expected = ((1.0 + 4.0) * area).sqrt();
        assert!((representation_distance(&x, &y, Norm::L2).unwrap() - expected).abs() < 1e-12);
        assert_eq!(representation_distance(&x, &y, Norm::Sup).unwrap(), 2.0);
        assert!(representation_distance(&x, &a, Norm::L2).is_err());
    }

    #[test]
    fn censored_points_rejected() {
        let censored =
            DiagramPoint { birth: 0.0, death: 1.0, censored: true, positive: 0, negative: None };
        let d = diagram(vec![censored]);
        let w = WeightSpec::power(1.0).unwrap();
        assert!(linear_representation(&d, &w, &FeatureSpec::ConstantOne).is_err());
    }
}
