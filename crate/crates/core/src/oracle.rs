//! Independent brute-force implementations used only in tests and acceptance
//! runs: rank-based persistent Betti numbers by dense elimination, exhaustive
//! diagram matchings, finite-difference weight checks, and quadrature.
//!
//! Nothing here shares algorithmic code with the modules it validates; the
//! elimination, distance, and integration routines are self-contained.

use crate::error::{Error, Result};
use crate::filtration::FilteredComplex;
use crate::metrics::Ground;
use crate::persistence::PersistenceDiagram;
use crate::representations::WeightSpec;

/// Dense matrix over the two-element field, column-major bitsets.
#[derive(Debug, Clone)]
pub struct DenseBoolMatrix {
    rows: usize,
    cols: usize,
    words_per_col: usize,
    data: Vec<u64>,
}

impl DenseBoolMatrix {
    pub fn new(rows: usize, cols: usize) -> Self {
        let words_per_col = rows.div_ceil(64).max(1);
        Self { rows, cols, words_per_col, data: vec![0; words_per_col * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn set(&mut self, row: usize, col: usize) {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[col * self.words_per_col + row / 64] ^= 1u64 << (row % 64);
    }

    fn col(&self, c: usize) -> &[u64] {
        &self.data[c * self.words_per_col..(c + 1) * self.words_per_col]
    }

    fn col_mut(&mut self, c: usize) -> &mut [u64] {
        &mut self.data[c * self.words_per_col..(c + 1) * self.words_per_col]
    }

    fn highest_bit(col: &[u64]) -> Option<usize> {
        for (w, &word) in col.iter().enumerate().rev() {
            if word != 0 {
                return Some(w * 64 + 63 - word.leading_zeros() as usize);
            }
        }
        None
    }

    /// Rank by column elimination; consumes a working copy.
    pub fn rank(&self) -> usize {
        let mut work = self.clone();
        let mut pivot_of_row: Vec<Option<usize>> = vec![None; work.rows.max(1)];
        let mut rank = 0;
        for c in 0..work.cols {
            loop {
                let low = match Self::highest_bit(work.col(c)) {
                    None => break,
                    Some(l) => l,
                };
                match pivot_of_row[low] {
                    None => {
                        pivot_of_row[low] = Some(c);
                        rank += 1;
                        break;
                    }
                    Some(owner) => {
                        let (a, b) = if owner < c { (owner, c) } else { (c, owner) };
                        let (left, right) = work.data.split_at_mut(b * work.words_per_col);
                        let src = &left[a * work.words_per_col..(a + 1) * work.words_per_col];
                        let dst = &mut right[..work.words_per_col];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d ^= s;
                        }
                    }
                }
            }
        }
        rank
    }

    /// Basis of the kernel, as coefficient bitsets over the columns.
    pub fn kernel_basis(&self) -> Vec<Vec<u64>> {
        let mut work = self.clone();
        let track_words = self.cols.div_ceil(64).max(1);
        let mut track: Vec<Vec<u64>> = (0..self.cols)
            .map(|c| {
                let mut t = vec![0u64; track_words];
                t[c / 64] |= 1 << (c % 64);
                t
            })
            .collect();
        let mut pivot_of_row: Vec<Option<usize>> = vec![None; work.rows.max(1)];
        let mut kernel = Vec::new();
        for c in 0..work.cols {
            loop {
                let low = match Self::highest_bit(work.col(c)) {
                    None => {
                        kernel.push(track[c].clone());
                        break;
                    }
                    Some(l) => l,
                };
                match pivot_of_row[low] {
                    None => {
                        pivot_of_row[low] = Some(c);
                        break;
                    }
                    Some(owner) => {
                        let src: Vec<u64> = work.col(owner).to_vec();
                        for (d, s) in work.col_mut(c).iter_mut().zip(&src) {
                            *d ^= s;
                        }
                        let t_src = track[owner].clone();
                        for (d, s) in track[c].iter_mut().zip(&t_src) {
                            *d ^= s;
                        }
                    }
                }
            }
        }
        kernel
    }
}

/// Persistent Betti number by Gaussian elimination:
/// `dim Z_q(K^r) - dim(Z_q(K^r) /\ B_q(K^s))`, computed as
/// `rank [Z | B] - rank B`. Includes classes that never die in the truncated
/// filtration.
pub fn betti_via_rank(complex: &FilteredComplex, q: usize, r: f64, s: f64) -> Result<usize> {
    if r > s {
        return Err(Error::InvalidParameter(format!("need r <= s, got r={r}, s={s}")));
    }
    if s > complex.r_max() {
        return Err(Error::InvalidParameter(format!(
            "s={s} exceeds the truncation radius {}",
            complex.r_max()
        )));
    }
    if complex.max_dim() < q + 1 {
        return Err(Error::InvalidParameter(format!(
            "complex built to dimension {} cannot answer degree {q}",
            complex.max_dim()
        )));
    }

    // enumerate simplices of the three relevant dimensions
    let mut q_le_s: Vec<usize> = Vec::new(); // q-simplices with value <= s (rows)
    let mut q_row: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut qm1_le_r: Vec<usize> = Vec::new(); // (q-1)-simplices with value <= r
    let mut qm1_row: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    let mut q_le_r: Vec<usize> = Vec::new(); // q-simplices with value <= r (columns of D_q)
    let mut qp1_le_s: Vec<usize> = Vec::new(); // (q+1)-simplices with value <= s
    for i in 0..complex.len() {
        let d = complex.dim(i) as usize;
        let v = complex.value(i);
        if d == q && v <= s {
            q_row.insert(i, q_le_s.len());
            q_le_s.push(i);
            if v <= r {
                q_le_r.push(i);
            }
        } else if q > 0 && d == q - 1 && v <= r {
            qm1_row.insert(i, qm1_le_r.len());
            qm1_le_r.push(i);
        } else if d == q + 1 && v <= s {
            qp1_le_s.push(i);
        }
    }

    // kernel of the boundary operator restricted to K^r
    let kernel: Vec<Vec<u64>> = if q == 0 {
        // vertices have empty boundary: the kernel is everything
        let words = q_le_r.len().div_ceil(64).max(1);
        (0..q_le_r.len())
            .map(|c| {
                let mut t = vec![0u64; words];
                t[c / 64] |= 1 << (c % 64);
                t
            })
            .collect()
    } else {
        let mut d_q = DenseBoolMatrix::new(qm1_le_r.len(), q_le_r.len());
        for (c, &simplex) in q_le_r.iter().enumerate() {
            for facet in facets_of(complex, simplex) {
                let row = *qm1_row
                    .get(&facet)
                    .ok_or(Error::NotFaceClosed(simplex))?;
                d_q.set(row, c);
            }
        }
        d_q.kernel_basis()
    };

    // boundary image of K^s in degree q
    let mut b_mat = DenseBoolMatrix::new(q_le_s.len(), qp1_le_s.len());
    for (c, &simplex) in qp1_le_s.iter().enumerate() {
        for facet in facets_of(complex, simplex) {
            let row = *q_row.get(&facet).ok_or(Error::NotFaceClosed(simplex))?;
            b_mat.set(row, c);
        }
    }
    let rank_b = b_mat.rank();

    // [Z | B] over the rows of K^s
    let mut combined = DenseBoolMatrix::new(q_le_s.len(), kernel.len() + qp1_le_s.len());
    for (c, vector) in kernel.iter().enumerate() {
        for (pos, &simplex) in q_le_r.iter().enumerate() {
            if vector[pos / 64] >> (pos % 64) & 1 == 1 {
                combined.set(q_row[&simplex], c);
            }
        }
    }
    for (c, &simplex) in qp1_le_s.iter().enumerate() {
        for facet in facets_of(complex, simplex) {
            combined.set(q_row[&facet], kernel.len() + c);
        }
    }
    let rank_zb = combined.rank();

    Ok(rank_zb - rank_b)
}

/// Rank-based persistent Betti number with the diagram convention applied:
/// classes still alive at the truncation radius (essential or censored) are
/// removed, leaving exactly the count of finite diagram points in
/// `[0, r] x (s, infinity)`.
pub fn diagram_betti_via_rank(
    complex: &FilteredComplex,
    q: usize,
    r: f64,
    s: f64,
) -> Result<usize> {
    let raw = betti_via_rank(complex, q, r, s)?;
    let alive_at_end = betti_via_rank(complex, q, r, complex.r_max())?;
    Ok(raw - alive_at_end)
}

/// Vertex-list facets of a simplex, resolved to sorted indices by linear
/// scan over the matching dimension (intentionally naive).
fn facets_of(complex: &FilteredComplex, simplex: usize) -> Vec<usize> {
    let vs = complex.vertices(simplex);
    let mut out = Vec::with_capacity(vs.len());
    if vs.len() == 1 {
        return out;
    }
    for drop in 0..vs.len() {
        let facet: Vec<u32> =
            vs.iter().enumerate().filter(|&(k, _)| k != drop).map(|(_, &v)| v).collect();
        let mut found = None;
        for i in 0..complex.len() {
            if complex.dim(i) as usize == facet.len() - 1 && complex.vertices(i) == facet {
                found = Some(i);
                break;
            }
        }
        if let Some(i) = found {
            out.push(i);
        }
    }
    out
}

const ORACLE_MATCHING_LIMIT: usize = 8;

fn oracle_point_dist(a: (f64, f64), b: (f64, f64), ground: Ground) -> f64 {
    match ground {
        Ground::Euclidean => ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt(),
        Ground::Sup => (a.0 - b.0).abs().max((a.1 - b.1).abs()),
    }
}

fn oracle_diag_dist(a: (f64, f64), ground: Ground) -> f64 {
    let pers = a.1 - a.0;
    match ground {
        Ground::Euclidean => pers / std::f64::consts::SQRT_2,
        Ground::Sup => pers / 2.0,
    }
}

fn coords(d: &PersistenceDiagram) -> Vec<(f64, f64)> {
    d.points().iter().map(|p| (p.birth, p.death)).collect()
}

fn enumerate_matchings<F: FnMut(&[Option<usize>])>(
    n1: usize,
    n2: usize,
    assignment: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
    visit: &mut F,
) {
    if assignment.len() == n1 {
        visit(assignment);
        return;
    }
    assignment.push(None); // diagonal
    enumerate_matchings(n1, n2, assignment, used, visit);
    assignment.pop();
    for j in 0..n2 {
        if !used[j] {
            used[j] = true;
            assignment.push(Some(j));
            enumerate_matchings(n1, n2, assignment, used, visit);
            assignment.pop();
            used[j] = false;
        }
    }
}

/// Minimum p-Wasserstein cost by literal enumeration of all matchings where
/// each point matches a point of the other diagram or its diagonal
/// projection. Limited to `#D1 + #D2 <= 8`.
pub fn exhaustive_wasserstein(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    p: f64,
    ground: Ground,
) -> Result<f64> {
    exhaustive_matching(d1, d2, ground, |costs| {
        costs.iter().map(|c| c.powf(p)).sum::<f64>().powf(1.0 / p)
    })
}

/// Minimum over matchings of the maximum pair distance.
pub fn exhaustive_bottleneck(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    ground: Ground,
) -> Result<f64> {
    exhaustive_matching(d1, d2, ground, |costs| costs.iter().copied().fold(0.0, f64::max))
}

fn exhaustive_matching<F: Fn(&[f64]) -> f64>(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    ground: Ground,
    objective: F,
) -> Result<f64> {
    let (a, b) = (coords(d1), coords(d2));
    if a.len() + b.len() > ORACLE_MATCHING_LIMIT {
        return Err(Error::OracleSizeBound(format!(
            "{} + {} points exceeds the {ORACLE_MATCHING_LIMIT}-point matching oracle bound",
            a.len(),
            b.len()
        )));
    }
    let mut best = f64::INFINITY;
    let mut assignment = Vec::new();
    let mut used = vec![false; b.len()];
    let mut visit = |assignment: &[Option<usize>]| {
        let mut costs = Vec::with_capacity(a.len() + b.len());
        for (i, m) in assignment.iter().enumerate() {
            costs.push(match m {
                Some(j) => oracle_point_dist(a[i], b[*j], ground),
                None => oracle_diag_dist(a[i], ground),
            });
        }
        let mut matched = vec![false; b.len()];
        for m in assignment.iter().flatten() {
            matched[*m] = true;
        }
        for (j, &hit) in matched.iter().enumerate() {
            if !hit {
                costs.push(oracle_diag_dist(b[j], ground));
            }
        }
        let value = objective(&costs);
        if value < best {
            best = value;
        }
    };
    if a.is_empty() && b.is_empty() {
        return Ok(0.0);
    }
    enumerate_matchings(a.len(), b.len(), &mut assignment, &mut used, &mut visit);
    Ok(best)
}

/// Max over the grid of the central-difference derivative of `wtilde`
/// divided by the certified bound `A u^(alpha-1)`; admissible weights stay
/// at or below one.
pub fn finite_difference_weight_check(w: &WeightSpec, u_grid: &[f64]) -> Result<f64> {
    let a = w.derivative_bound().ok_or_else(|| {
        Error::InvalidParameter("weight is outside the certified class".into())
    })?;
    let mut worst: f64 = 0.0;
    for &u in u_grid {
        if !(u > 0.0) {
            return Err(Error::InvalidParameter("u grid must be positive".into()));
        }
        let h = (u * 1e-7).max(1e-12);
        let fd = (w.eval_pers(u + h) - w.eval_pers(u - h)) / (2.0 * h);
        let bound = a * u.powf(w.alpha - 1.0);
        worst = worst.max(fd.abs() / bound);
    }
    Ok(worst)
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on [-1, 1].
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // Legendre recurrence for P_n(x), P'_n(x)
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn gaussian_1d_integral(c: f64, h: f64, a: f64, b: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(16);
    let panels = (((b - a) / h).ceil() as usize).clamp(1, 400);
    let width = (b - a) / panels as f64;
    let norm = 1.0 / (h * (2.0 * std::f64::consts::PI).sqrt());
    let mut total = 0.0;
    for k in 0..panels {
        let (lo, hi) = (a + k as f64 * width, a + (k + 1) as f64 * width);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        let mut panel = 0.0;
        for (x, w) in nodes.iter().zip(&weights) {
            let t = mid + half * x;
            let z = (t - c) / h;
            panel += w * (-0.5 * z * z).exp();
        }
        total += panel * half * norm;
    }
    total
}

/// Mass of the isotropic Gaussian at `center` with the given bandwidth over
/// the rectangle `[x0, x1] x [y0, y1]`, by tensor Gauss-Legendre quadrature.
pub fn gaussian_cell_quadrature(
    center: (f64, f64),
    bandwidth: f64,
    cell: (f64, f64, f64, f64),
) -> Result<f64> {
    let (x0, x1, y0, y1) = cell;
    if !(x1 > x0) || !(y1 > y0) {
        return Err(Error::InvalidParameter("cell must have positive area".into()));
    }
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidParameter("bandwidth must be positive".into()));
    }
    Ok(gaussian_1d_integral(center.0, bandwidth, x0, x1)
        * gaussian_1d_integral(center.1, bandwidth, y0, y1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::build_rips;
    use crate::persistence::DiagramPoint;
    use crate::pointcloud::PointCloud;

    fn unit_square() -> PointCloud {
        PointCloud::new(
            vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            2,
        )
        .unwrap()
    }

    fn point(birth: f64, death: f64) -> DiagramPoint {
        DiagramPoint { birth, death, censored: false, positive: 0, negative: Some(1) }
    }

    fn diagram(points: Vec<DiagramPoint>) -> PersistenceDiagram {
        PersistenceDiagram::new(0, 100.0, points)
    }

    #[test]
    fn square_rank_fixture() {
        let complex = build_rips(&unit_square(), 2.0, 1).unwrap();
        assert_eq!(betti_via_rank(&complex, 1, 1.2, 1.2).unwrap(), 1);
        // only vertices at r = s = 0: all boundary ranks vanish
        assert_eq!(betti_via_rank(&complex, 0, 0.0, 0.0).unwrap(), 4);
        // and with the essential class removed
        assert_eq!(diagram_betti_via_rank(&complex, 0, 0.0, 0.0).unwrap(), 3);
        assert!(betti_via_rank(&complex, 1, 1.0, 0.5).is_err());
    }

    #[test]
    fn exhaustive_matching_trivia() {
        let d1 = diagram(vec![point(0.0, 1.0)]);
        let empty = diagram(vec![]);
        let w = exhaustive_wasserstein(&d1, &empty, 2.0, Ground::Euclidean).unwrap();
        assert!((w - 1.0 / std::f64::consts::SQRT_2).abs() < 1e-12);
        // symmetry
        let d2 = diagram(vec![point(0.1, 0.9), point(0.4, 2.0)]);
        for p in [1.0, 2.0] {
            let ab = exhaustive_wasserstein(&d1, &d2, p, Ground::Euclidean).unwrap();
            let ba = exhaustive_wasserstein(&d2, &d1, p, Ground::Euclidean).unwrap();
            assert!((ab - ba).abs() < 1e-12);
        }
        let big = diagram((0..9).map(|i| point(0.0, 1.0 + i as f64)).collect());
        assert!(exhaustive_wasserstein(&big, &empty, 1.0, Ground::Euclidean).is_err());
    }

    #[test]
    fn weight_derivative_ratios() {
        let grid: Vec<f64> = (1..=10_000).map(|k| k as f64 * 10.0 / 10_000.0).collect();
        let power = WeightSpec::power(2.0).unwrap();
        let ratio = finite_difference_weight_check(&power, &grid).unwrap();
        assert!(ratio <= 1.0 + 1e-6, "power ratio {ratio}");
        assert!(ratio > 1.0 - 1e-4);

        let arctan = WeightSpec::arctan(3.0, 2.0).unwrap();
        let ratio = finite_difference_weight_check(&arctan, &grid).unwrap();
        assert!(ratio <= 1.0 + 1e-6, "arctan ratio {ratio}");
        // strictly below one away from the diagonal, where the calculus
        // bound B alpha u^(alpha-1) / (1 + B^2 u^(2 alpha)) has slack that
        // finite-difference noise cannot mask
        let away: Vec<f64> = (1..=100).map(|k| 0.5 + k as f64 * 0.095).collect();
        let ratio = finite_difference_weight_check(&arctan, &away).unwrap();
        assert!(ratio < 1.0, "arctan ratio away from zero {ratio}");

        // the bound is tight at the diagonal for the arctan family
        let near_zero = [1e-4, 1e-3];
        let ratio = finite_difference_weight_check(&arctan, &near_zero).unwrap();
        assert!(ratio > 1.0 - 1e-3 && ratio <= 1.0 + 1e-6, "limit ratio {ratio}");
    }

    #[test]
    fn quadrature_total_mass_and_symmetry() {
        let h = 0.3;
        let mass =
            gaussian_cell_quadrature((0.0, 0.0), h, (-8.0 * h, 8.0 * h, -8.0 * h, 8.0 * h))
                .unwrap();
        assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
        let left = gaussian_cell_quadrature((0.0, 0.0), h, (-0.4, -0.1, -0.2, 0.2)).unwrap();
        let right = gaussian_cell_quadrature((0.0, 0.0), h, (0.1, 0.4, -0.2, 0.2)).unwrap();
        assert!((left - right).abs() < 1e-12);
    }

    #[test]
    fn quadrature_agrees_with_image_cells() {
        use crate::representations::{persistence_image, GridSpec, WeightSpec};
        let d = diagram(vec![point(0.2, 0.7)]);
        let w = WeightSpec::power_any(0.0).unwrap(); // weight one
        let grid = GridSpec {
            birth_min: 0.0,
            birth_max: 0.5,
            pers_min: 0.2,
            pers_max: 0.8,
            res_birth: 5,
            res_pers: 6,
        };
        let h = 0.11;
        let img = persistence_image(&d, &w, &grid, h).unwrap();
        let values = img.values();
        for ip in 0..6 {
            for ib in 0..5 {
                let x0 = grid.birth_min + grid.cell_width() * ib as f64;
                let y0 = grid.pers_min + grid.cell_height() * ip as f64;
                let q = gaussian_cell_quadrature(
                    (0.2, 0.5),
                    h,
                    (x0, x0 + grid.cell_width(), y0, y0 + grid.cell_height()),
                )
                .unwrap();
                assert!((values[ip * 5 + ib] - q).abs() < 1e-3);
            }
        }
    }
}
