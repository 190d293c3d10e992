//! Truncated Vietoris-Rips and Cech filtered complexes with exact filtration
//! values.
//!
//! Convention: a simplex is present in the Rips complex at parameter `r` when
//! its diameter is at most `r` (not `2r`; other ecosystems differ by that
//! factor). The Cech value of a simplex is the radius of the smallest
//! enclosing ball of its vertices.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pointcloud::{euclidean, PointCloud};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FiltrationKind {
    Rips,
    Cech,
}

/// Default cap on the number of simplices a single build may create.
pub fn default_simplex_budget() -> usize {
    std::env::var("TDA_SIMPLEX_BUDGET")
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(50_000_000)
}

/// A filtered simplicial complex stored as a struct of arrays, sorted by
/// `(value, dimension, lexicographic vertex list)`.
#[derive(Debug, Clone)]
pub struct FilteredComplex {
    kind: FiltrationKind,
    r_max: f64,
    max_dim: usize,
    n_vertices: usize,
    values: Vec<f64>,
    dims: Vec<u8>,
    verts: Vec<u32>,
    offsets: Vec<u32>,
}

impl FilteredComplex {
    pub fn kind(&self) -> FiltrationKind {
        self.kind
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Largest simplex dimension stored (`q_max + 1` at build time).
    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn vertex_count(&self) -> usize {
        self.n_vertices
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn dim(&self, i: usize) -> u8 {
        self.dims[i]
    }

    pub fn vertices(&self, i: usize) -> &[u32] {
        &self.verts[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    /// Count of simplices per dimension.
    pub fn counts_per_dim(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.max_dim + 1];
        for &d in &self.dims {
            counts[d as usize] += 1;
        }
        counts
    }

    /// Check that every facet of every simplex is present with a value not
    /// larger than the simplex's own. Quadratic-ish; intended for tests.
    pub fn validate_face_monotone(&self) -> Result<()> {
        let index = SimplexIndex::new(self);
        let mut facet = Vec::new();
        for i in 0..self.len() {
            let vs = self.vertices(i);
            if vs.len() == 1 {
                continue;
            }
            for drop in 0..vs.len() {
                facet.clear();
                facet.extend(vs.iter().enumerate().filter(|&(k, _)| k != drop).map(|(_, &v)| v));
                let j = index.find(&facet).ok_or(Error::NotFaceClosed(i))?;
                if self.values[j] > self.values[i] {
                    return Err(Error::InvalidParameter(format!(
                        "face value {} exceeds coface value {}",
                        self.values[j], self.values[i]
                    )));
                }
                if j >= i {
                    return Err(Error::InvalidParameter(
                        "facet does not precede coface in filtration order".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> ComplexStats {
        let counts = self.counts_per_dim();
        let bins = 32;
        let hi = if self.r_max.is_finite() { self.r_max } else { 1.0 };
        let mut histograms = Vec::new();
        for d in 0..=self.max_dim {
            let mut h = vec![0usize; bins];
            for i in 0..self.len() {
                if self.dims[i] as usize == d {
                    let b = ((self.values[i] / hi * bins as f64) as usize).min(bins - 1);
                    h[b] += 1;
                }
            }
            histograms.push(ValueHistogram { lo: 0.0, hi, counts: h });
        }
        ComplexStats {
            kind: self.kind,
            r_max: self.r_max,
            max_dim: self.max_dim,
            vertex_count: self.n_vertices,
            simplex_count: self.len(),
            counts_per_dim: counts,
            value_histograms: histograms,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValueHistogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComplexStats {
    pub kind: FiltrationKind,
    pub r_max: f64,
    pub max_dim: usize,
    pub vertex_count: usize,
    pub simplex_count: usize,
    pub counts_per_dim: Vec<usize>,
    pub value_histograms: Vec<ValueHistogram>,
}

/// Sorted-key lookup from a vertex list to the simplex index.
pub(crate) struct SimplexIndex {
    // one sorted (key, simplex index) array per dimension; keys pack up to
    // four vertex ids
    per_dim: Vec<Vec<(u128, u32)>>,
}

impl SimplexIndex {
    pub(crate) fn new(complex: &FilteredComplex) -> Self {
        Self::up_to(complex, complex.max_dim())
    }

    /// Index only the dimensions that can appear as facets; top-dimensional
    /// simplices are never looked up and dominate the simplex count.
    pub(crate) fn new_facet_index(complex: &FilteredComplex) -> Self {
        Self::up_to(complex, complex.max_dim().saturating_sub(1))
    }

    pub(crate) fn up_to(complex: &FilteredComplex, max_dim: usize) -> Self {
        let mut per_dim: Vec<Vec<(u128, u32)>> = vec![Vec::new(); max_dim + 1];
        for i in 0..complex.len() {
            let d = complex.dim(i) as usize;
            if d <= max_dim {
                per_dim[d].push((Self::pack_key(complex.vertices(i)), i as u32));
            }
        }
        for v in &mut per_dim {
            v.sort_unstable_by_key(|&(k, _)| k);
        }
        Self { per_dim }
    }

    pub(crate) fn pack_key(verts: &[u32]) -> u128 {
        // 25 bits per vertex id fits five vertices (dimension 4) in a u128
        debug_assert!(verts.len() <= 5, "index supports simplices up to dimension 4");
        let mut k: u128 = 0;
        for &v in verts {
            debug_assert!(v < (1 << 25) - 1);
            k = (k << 25) | (v as u128 + 1);
        }
        k
    }

    pub(crate) fn find(&self, verts: &[u32]) -> Option<usize> {
        let d = verts.len() - 1;
        let arr = self.per_dim.get(d)?;
        let key = Self::pack_key(verts);
        arr.binary_search_by_key(&key, |&(k, _)| k)
            .ok()
            .map(|pos| arr[pos].1 as usize)
    }
}

struct DimBuffer {
    verts: Vec<u32>,
    values: Vec<f64>,
    arity: usize,
}

impl DimBuffer {
    fn new(arity: usize) -> Self {
        Self { verts: Vec::new(), values: Vec::new(), arity }
    }

    fn len(&self) -> usize {
        self.values.len()
    }
}

struct Builder<'a> {
    cloud: &'a PointCloud,
    kind: FiltrationKind,
    r_max: f64,
    max_dim: usize,
    budget: usize,
    adjacency: Vec<Vec<(u32, f64)>>,
    buffers: Vec<DimBuffer>,
    total: usize,
}

impl<'a> Builder<'a> {
    fn run(mut self) -> Result<FilteredComplex> {
        let n = self.cloud.len();
        // dimension 0
        self.buffers[0].values.extend(std::iter::repeat(0.0).take(n));
        self.buffers[0].verts.extend(0..n as u32);
        self.total = n;
        self.check_budget()?;

        if self.max_dim >= 1 {
            self.build_adjacency();
            for i in 0..n {
                // clone of the forward-neighbor row keeps the borrow checker
                // out of the recursion; rows are short
                let row = self.adjacency[i].clone();
                for (pos, &(j, dij)) in row.iter().enumerate() {
                    let edge_value = match self.kind {
                        FiltrationKind::Rips => dij,
                        FiltrationKind::Cech => dij / 2.0,
                    };
                    if edge_value > self.r_max {
                        continue;
                    }
                    self.push(&[i as u32, j], edge_value)?;
                    if self.max_dim >= 2 {
                        let mut cands: Vec<(u32, f64)> = Vec::new();
                        intersect_forward(&row[pos + 1..], &self.adjacency[j as usize], &mut cands);
                        let mut verts = vec![i as u32, j];
                        self.extend(&mut verts, dij, &cands)?;
                    }
                }
            }
        }

        self.finish()
    }

    fn build_adjacency(&mut self) {
        let n = self.cloud.len();
        let threshold = match self.kind {
            FiltrationKind::Rips => self.r_max,
            FiltrationKind::Cech => 2.0 * self.r_max,
        };
        let mut adjacency = Vec::with_capacity(n);
        for i in 0..n {
            let mut row = Vec::new();
            for j in (i + 1)..n {
                let d = euclidean(self.cloud.point(i), self.cloud.point(j));
                if d <= threshold {
                    row.push((j as u32, d));
                }
            }
            adjacency.push(row);
        }
        self.adjacency = adjacency;
    }

    fn extend(&mut self, verts: &mut Vec<u32>, diam: f64, cands: &[(u32, f64)]) -> Result<()> {
        for (pos, &(k, dk)) in cands.iter().enumerate() {
            let new_diam = diam.max(dk);
            verts.push(k);
            let value = match self.kind {
                FiltrationKind::Rips => new_diam,
                FiltrationKind::Cech => {
                    let pts: Vec<&[f64]> =
                        verts.iter().map(|&v| self.cloud.point(v as usize)).collect();
                    min_enclosing_ball(&pts)?.1
                }
            };
            if value <= self.r_max {
                self.push(verts, value)?;
                if verts.len() < self.max_dim + 1 {
                    let mut narrowed = Vec::new();
                    intersect_forward(&cands[pos + 1..], &self.adjacency[k as usize], &mut narrowed);
                    if !narrowed.is_empty() {
                        self.extend(verts, new_diam, &narrowed)?;
                    }
                }
            }
            verts.pop();
        }
        Ok(())
    }

    fn push(&mut self, verts: &[u32], value: f64) -> Result<()> {
        let buf = &mut self.buffers[verts.len() - 1];
        buf.verts.extend_from_slice(verts);
        buf.values.push(value);
        self.total += 1;
        self.check_budget()
    }

    fn check_budget(&self) -> Result<()> {
        if self.total > self.budget {
            Err(Error::BudgetExceeded { estimate: self.total, budget: self.budget })
        } else {
            Ok(())
        }
    }

    fn finish(self) -> Result<FilteredComplex> {
        let total = self.total;
        let mut values = Vec::with_capacity(total);
        let mut dims = Vec::with_capacity(total);
        let mut entry: Vec<(u32, u32)> = Vec::with_capacity(total); // (dim, offset within buffer)
        for (d, buf) in self.buffers.iter().enumerate() {
            for i in 0..buf.len() {
                values.push(buf.values[i]);
                dims.push(d as u8);
                entry.push((d as u32, i as u32));
            }
        }
        // Sort by value with the generation index as tie-break; generation
        // order is dimension-major and lexicographic within a dimension, so
        // ties resolve to the required (value, dimension, lexicographic)
        // order. Values are non-negative, so their bit patterns sort like
        // the floats and the whole key packs into one integer.
        let mut packed: Vec<u128> = values
            .iter()
            .enumerate()
            .map(|(i, v)| ((v.to_bits() as u128) << 32) | i as u128)
            .collect();
        packed.sort_unstable();
        let order: Vec<u32> = packed.into_iter().map(|p| p as u32).collect();

        let mut out_values = Vec::with_capacity(total);
        let mut out_dims = Vec::with_capacity(total);
        let mut out_offsets = Vec::with_capacity(total + 1);
        let mut out_verts = Vec::with_capacity(self.buffers.iter().map(|b| b.verts.len()).sum());
        out_offsets.push(0u32);
        for &o in &order {
            let o = o as usize;
            out_values.push(values[o]);
            out_dims.push(dims[o]);
            let (d, i) = entry[o];
            let arity = self.buffers[d as usize].arity;
            let start = i as usize * arity;
            out_verts.extend_from_slice(&self.buffers[d as usize].verts[start..start + arity]);
            out_offsets.push(out_verts.len() as u32);
        }

        let complex = FilteredComplex {
            kind: self.kind,
            r_max: self.r_max,
            max_dim: self.max_dim,
            n_vertices: self.cloud.len(),
            values: out_values,
            dims: out_dims,
            verts: out_verts,
            offsets: out_offsets,
        };
        #[cfg(debug_assertions)]
        if complex.len() <= 100_000 {
            complex.validate_face_monotone()?;
        }
        Ok(complex)
    }
}

/// Merge-intersect two forward-neighbor lists sorted by vertex id. The
/// retained distance is the max over the already-fixed vertices.
fn intersect_forward(a: &[(u32, f64)], b: &[(u32, f64)], out: &mut Vec<(u32, f64)>) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push((a[i].0, a[i].1.max(b[j].1)));
                i += 1;
                j += 1;
            }
        }
    }
}

fn build(
    cloud: &PointCloud,
    kind: FiltrationKind,
    r_max: f64,
    q_max: usize,
    budget: usize,
) -> Result<FilteredComplex> {
    if !(r_max > 0.0) {
        return Err(Error::InvalidParameter(format!("r_max must be > 0, got {r_max}")));
    }
    if q_max > 3 {
        return Err(Error::InvalidParameter(format!(
            "homology degree {q_max} not supported (maximum is 3)"
        )));
    }
    if cloud.len() >= (1 << 25) - 1 {
        return Err(Error::InvalidParameter("clouds above 2^25 points are not supported".into()));
    }
    let max_dim = q_max + 1;
    let buffers = (0..=max_dim).map(|d| DimBuffer::new(d + 1)).collect();
    Builder { cloud, kind, r_max, max_dim, budget, adjacency: Vec::new(), buffers, total: 0 }.run()
}

/// Build the Rips filtration truncated at `r_max`, with simplices up to
/// dimension `q_max + 1`.
pub fn build_rips(cloud: &PointCloud, r_max: f64, q_max: usize) -> Result<FilteredComplex> {
    build(cloud, FiltrationKind::Rips, r_max, q_max, default_simplex_budget())
}

pub fn build_rips_with_budget(
    cloud: &PointCloud,
    r_max: f64,
    q_max: usize,
    budget: usize,
) -> Result<FilteredComplex> {
    build(cloud, FiltrationKind::Rips, r_max, q_max, budget)
}

/// Build the Cech filtration truncated at `r_max`.
pub fn build_cech(cloud: &PointCloud, r_max: f64, q_max: usize) -> Result<FilteredComplex> {
    build(cloud, FiltrationKind::Cech, r_max, q_max, default_simplex_budget())
}

pub fn build_cech_with_budget(
    cloud: &PointCloud,
    r_max: f64,
    q_max: usize,
    budget: usize,
) -> Result<FilteredComplex> {
    build(cloud, FiltrationKind::Cech, r_max, q_max, budget)
}

/// Smallest ball enclosing the given points, by move-to-front Welzl recursion
/// with closed-form balls of up to `d+1` affinely independent support points.
pub fn min_enclosing_ball(points: &[&[f64]]) -> Result<(Vec<f64>, f64)> {
    if points.is_empty() {
        return Err(Error::EmptyInput("min_enclosing_ball requires at least one point"));
    }
    let d = points[0].len();
    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut support = Vec::new();
    let ball = welzl(points, &mut order, points.len(), &mut support, d);
    match ball {
        Some(b) => Ok((b.0, b.1)),
        None => Err(Error::InvalidParameter("degenerate input to min_enclosing_ball".into())),
    }
}

type Ball = (Vec<f64>, f64);

fn welzl(
    points: &[&[f64]],
    order: &mut Vec<usize>,
    end: usize,
    support: &mut Vec<usize>,
    d: usize,
) -> Option<Ball> {
    let mut ball = ball_of_support(points, support);
    if support.len() == d + 1 {
        return ball;
    }
    let mut i = 0;
    while i < end {
        let p = order[i];
        let inside = match &ball {
            Some((c, r)) => euclidean(c, points[p]) <= r + 1e-13,
            None => false,
        };
        if !inside {
            support.push(p);
            let grown = welzl(points, order, i, support, d);
            support.pop();
            if grown.is_some() {
                ball = grown;
            }
            order[..=i].rotate_right(1);
        }
        i += 1;
    }
    ball
}

fn ball_of_support(points: &[&[f64]], support: &[usize]) -> Option<Ball> {
    match support.len() {
        0 => None,
        1 => Some((points[support[0]].to_vec(), 0.0)),
        2 => {
            let (p, q) = (points[support[0]], points[support[1]]);
            let center: Vec<f64> = p.iter().zip(q).map(|(a, b)| 0.5 * (a + b)).collect();
            Some((center, euclidean(p, q) / 2.0))
        }
        _ => circumball(points, support),
    }
}

/// Ball with all support points on its boundary: solve the Gram system
/// `2 (u_i . u_j) lambda_j = |u_i|^2` for the center in the affine hull.
fn circumball(points: &[&[f64]], support: &[usize]) -> Option<Ball> {
    let p0 = points[support[0]];
    let m = support.len() - 1;
    let u: Vec<Vec<f64>> = support[1..]
        .iter()
        .map(|&i| points[i].iter().zip(p0).map(|(a, b)| a - b).collect())
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut a = vec![0.0f64; m * m];
    let mut b = vec![0.0f64; m];
    for i in 0..m {
        for j in 0..m {
            a[i * m + j] = 2.0 * dot(&u[i], &u[j]);
        }
        b[i] = dot(&u[i], &u[i]);
    }
    let lambda = solve_dense(&mut a, &mut b, m)?;
    let mut center = p0.to_vec();
    for (li, ui) in lambda.iter().zip(&u) {
        for (c, x) in center.iter_mut().zip(ui) {
            *c += li * x;
        }
    }
    let radius = euclidean(&center, p0);
    Some((center, radius))
}

/// Gaussian elimination with partial pivoting; returns `None` when singular.
fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> Option<Vec<f64>> {
    for col in 0..m {
        let mut pivot = col;
        for row in (col + 1)..m {
            if a[row * m + col].abs() > a[pivot * m + col].abs() {
                pivot = row;
            }
        }
        if a[pivot * m + col].abs() < 1e-300 {
            return None;
        }
        if pivot != col {
            for k in 0..m {
                a.swap(col * m + k, pivot * m + k);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * m + col];
        for row in (col + 1)..m {
            let factor = a[row * m + col] / diag;
            if factor != 0.0 {
                for k in col..m {
                    a[row * m + k] -= factor * a[col * m + k];
                }
                b[row] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0f64; m];
    for col in (0..m).rev() {
        let mut s = b[col];
        for k in (col + 1)..m {
            s -= a[col * m + k] * x[k];
        }
        x[col] = s / a[col * m + col];
    }
    Some(x)
}
