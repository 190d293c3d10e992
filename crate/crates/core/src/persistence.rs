//! Persistent homology over the field of two elements: sparse boundary-matrix
//! reduction with the clearing optimization, union-find in degree zero,
//! positive/negative simplex pairing, and total-persistence functionals.
//!
//! Essential classes are excluded from diagrams; the single class of the
//! connected component surviving the whole filtration is therefore never
//! reported. Classes alive at the truncation radius that would die later are
//! reported with `censored = true` and `death = r_max`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filtration::{FilteredComplex, SimplexIndex};

/// One off-diagonal diagram point with its simplex pairing.
///
/// `positive` and `negative` are indices into the sorted simplex sequence of
/// the complex the diagram was computed from; censored points have no
/// negative simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiagramPoint {
    pub birth: f64,
    pub death: f64,
    pub censored: bool,
    pub positive: u32,
    pub negative: Option<u32>,
}

impl DiagramPoint {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// Multiset of (birth, death) pairs for one homology degree.
#[derive(Debug, Clone, Serialize)]
pub struct PersistenceDiagram {
    pub degree: usize,
    pub r_max: f64,
    points: Vec<DiagramPoint>,
}

impl PersistenceDiagram {
    pub fn new(degree: usize, r_max: f64, mut points: Vec<DiagramPoint>) -> Self {
        points.sort_by(|a, b| {
            a.birth
                .total_cmp(&b.birth)
                .then(a.death.total_cmp(&b.death))
                .then(a.positive.cmp(&b.positive))
        });
        Self { degree, r_max, points }
    }

    pub fn points(&self) -> &[DiagramPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn censored_count(&self) -> usize {
        self.points.iter().filter(|p| p.censored).count()
    }

    /// Diagram with every coordinate multiplied by `factor` (pairing kept).
    pub fn scaled(&self, factor: f64) -> Self {
        let points = self
            .points
            .iter()
            .map(|p| DiagramPoint {
                birth: p.birth * factor,
                death: p.death * factor,
                ..*p
            })
            .collect();
        Self { degree: self.degree, r_max: self.r_max * factor, points }
    }
}

/// The rescaled diagram measure: each point carries mass `1/n` where `n` is
/// the process intensity, coordinates as stored in `base`.
#[derive(Debug, Clone, Serialize)]
pub struct DiagramMeasure {
    pub base: PersistenceDiagram,
    pub scale: f64,
    pub mass_per_point: f64,
}

impl DiagramMeasure {
    pub fn new(base: PersistenceDiagram, scale: f64, mass_per_point: f64) -> Self {
        Self { base, scale, mass_per_point }
    }

    pub fn total_mass(&self) -> f64 {
        self.base.len() as f64 * self.mass_per_point
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionStrategy {
    /// Column reduction of the anti-transposed (coboundary) matrix with
    /// clearing; degree 0 by union-find. Produces the identical pairing to
    /// the boundary-matrix strategies but reduces one column per q-simplex
    /// instead of one per (q+1)-simplex, which is decisive for Rips
    /// complexes whose top dimension dominates the simplex count.
    Cohomology,
    /// High-dimension-first boundary-column reduction with clearing; degree
    /// 0 by union-find.
    Clearing,
    /// Single left-to-right pass over all boundary columns, no clearing;
    /// kept for differential testing.
    Plain,
}

/// Compute persistence diagrams for degrees `0..=q_max`.
pub fn compute_persistence(
    complex: &FilteredComplex,
    q_max: usize,
) -> Result<Vec<PersistenceDiagram>> {
    compute_persistence_with(complex, q_max, ReductionStrategy::Cohomology)
}

pub fn compute_persistence_with(
    complex: &FilteredComplex,
    q_max: usize,
    strategy: ReductionStrategy,
) -> Result<Vec<PersistenceDiagram>> {
    if complex.max_dim() < q_max + 1 {
        return Err(Error::InvalidParameter(format!(
            "complex built to dimension {} cannot support degree {} (needs dimension {})",
            complex.max_dim(),
            q_max,
            q_max + 1
        )));
    }
    let outcome = match strategy {
        ReductionStrategy::Cohomology => reduce_cohomology(complex, q_max)?,
        ReductionStrategy::Clearing => reduce_clearing(complex, q_max)?,
        ReductionStrategy::Plain => reduce_plain(complex)?,
    };
    Ok(assemble(complex, q_max, outcome))
}

struct ReductionOutcome {
    /// (positive simplex, negative simplex) sorted-index pairs.
    pairs: Vec<(u32, u32)>,
    /// Positive simplices never paired, per dimension.
    unpaired_positive: Vec<Vec<u32>>,
}

fn facet_column(
    complex: &FilteredComplex,
    index: &SimplexIndex,
    s: usize,
    out: &mut Vec<u32>,
) -> Result<()> {
    out.clear();
    let vs = complex.vertices(s);
    let mut facet = Vec::with_capacity(vs.len() - 1);
    for drop in 0..vs.len() {
        facet.clear();
        facet.extend(vs.iter().enumerate().filter(|&(k, _)| k != drop).map(|(_, &v)| v));
        let j = index.find(&facet).ok_or(Error::NotFaceClosed(s))?;
        out.push(j as u32);
    }
    out.sort_unstable();
    Ok(())
}

/// Working column as a hierarchical bitset over row indices with maximal-bit
/// queries; adding a cached pivot column costs one bit flip per entry
/// instead of a merge of the whole working column.
struct BitTreeColumn {
    levels: Vec<Vec<u64>>,
}

impl BitTreeColumn {
    fn new(rows: usize) -> Self {
        let mut levels = Vec::new();
        let mut len = rows.max(1);
        loop {
            len = len.div_ceil(64);
            levels.push(vec![0u64; len]);
            if len == 1 {
                break;
            }
        }
        Self { levels }
    }

    fn flip(&mut self, idx: u32) {
        let mut word = idx as usize / 64;
        let mut bit = idx as usize % 64;
        for level in 0..self.levels.len() {
            let w = &mut self.levels[level][word];
            let was_empty = *w == 0;
            *w ^= 1u64 << bit;
            let is_empty = *w == 0;
            if was_empty == is_empty {
                break; // occupancy unchanged; summaries above are correct
            }
            bit = word % 64;
            word /= 64;
        }
    }

    fn max(&self) -> Option<u32> {
        let top = *self.levels.last().unwrap().first().unwrap();
        if top == 0 {
            return None;
        }
        let mut word = 0usize;
        let mut level = self.levels.len();
        loop {
            level -= 1;
            let w = self.levels[level][word];
            debug_assert_ne!(w, 0);
            let bit = 63 - w.leading_zeros() as usize;
            word = word * 64 + bit;
            if level == 0 {
                return Some(word as u32);
            }
        }
    }

    /// Pop all set bits in descending order into `out` (ascending after the
    /// final reverse), leaving the tree empty.
    fn drain_into(&mut self, out: &mut Vec<u32>) {
        out.clear();
        while let Some(m) = self.max() {
            out.push(m);
            self.flip(m);
        }
        out.reverse();
    }
}

/// Reduce the given columns in order against a shared pivot cache. Pushes
/// discovered pairs and returns the indices whose columns vanished.
fn reduce_columns(
    complex: &FilteredComplex,
    index: &SimplexIndex,
    columns: &[u32],
    skip_cleared: bool,
    pairs: &mut Vec<(u32, u32)>,
    cleared: &mut [bool],
) -> Result<Vec<u32>> {
    let mut pivot_slot: Vec<u32> = vec![u32::MAX; complex.len()];
    let mut stored: Vec<Vec<u32>> = Vec::new();
    let mut positives = Vec::new();
    let mut working = BitTreeColumn::new(complex.len());
    let mut facets = Vec::new();
    let mut col = Vec::new();
    for &s in columns {
        // entries set during this pass belong to the facet dimension, so the
        // skip test only sees marks from the previous (higher) pass
        if skip_cleared && cleared[s as usize] {
            continue;
        }
        facet_column(complex, index, s as usize, &mut facets)?;
        // fast path: an untouched pivot pairs without entering the tree
        let initial_low = *facets.last().expect("positive-dimensional simplex");
        if pivot_slot[initial_low as usize] == u32::MAX {
            pivot_slot[initial_low as usize] = stored.len() as u32;
            pairs.push((initial_low, s));
            cleared[initial_low as usize] = true;
            stored.push(std::mem::take(&mut facets));
            facets = Vec::new();
            continue;
        }
        for &f in &facets {
            working.flip(f);
        }
        loop {
            match working.max() {
                None => {
                    positives.push(s);
                    break;
                }
                Some(low) => {
                    let slot = pivot_slot[low as usize];
                    if slot == u32::MAX {
                        pivot_slot[low as usize] = stored.len() as u32;
                        pairs.push((low, s));
                        cleared[low as usize] = true;
                        working.drain_into(&mut col);
                        stored.push(col.clone());
                        break;
                    }
                    for &f in &stored[slot as usize] {
                        working.flip(f);
                    }
                }
            }
        }
    }
    Ok(positives)
}

fn dim_lists(complex: &FilteredComplex) -> Vec<Vec<u32>> {
    let mut lists = vec![Vec::new(); complex.max_dim() + 1];
    for i in 0..complex.len() {
        lists[complex.dim(i) as usize].push(i as u32);
    }
    lists
}

/// Degree-0 persistence by union-find over the edges, with output identical
/// to column reduction: when two components merge, the one created by the
/// younger vertex dies.
struct UnionFindOutcome {
    /// (dying vertex, merging edge) pairs as sorted indices.
    pairs: Vec<(u32, u32)>,
    /// Non-merging edges in sorted order.
    positive_edges: Vec<u32>,
    /// Elder vertex of each surviving component, in sorted order.
    roots: Vec<u32>,
}

fn union_find_pass(complex: &FilteredComplex, lists: &[Vec<u32>]) -> UnionFindOutcome {
    let mut uf = UnionFind::new(complex.vertex_count());
    let vertex_pos: Vec<u32> = {
        // sorted position of each vertex id
        let mut pos = vec![u32::MAX; complex.vertex_count()];
        for &i in &lists[0] {
            pos[complex.vertices(i as usize)[0] as usize] = i;
        }
        pos
    };
    let mut pairs = Vec::new();
    let mut positive_edges = Vec::new();
    for &e in &lists[1] {
        let vs = complex.vertices(e as usize);
        let (a, b) = (vs[0] as usize, vs[1] as usize);
        match uf.merge(a, b, &vertex_pos) {
            Some(dying_vertex) => pairs.push((vertex_pos[dying_vertex], e)),
            None => positive_edges.push(e),
        }
    }
    let mut roots = Vec::new();
    for v in 0..complex.vertex_count() {
        if uf.find(v) == v {
            roots.push(vertex_pos[uf.elder(v)]);
        }
    }
    roots.sort_unstable();
    UnionFindOutcome { pairs, positive_edges, roots }
}

fn reduce_clearing(complex: &FilteredComplex, q_max: usize) -> Result<ReductionOutcome> {
    let lists = dim_lists(complex);
    let index = SimplexIndex::new_facet_index(complex);
    let mut cleared = vec![false; complex.len()];
    let mut pairs = Vec::new();
    let mut unpaired_positive = vec![Vec::new(); complex.max_dim() + 1];

    for p in (2..=complex.max_dim()).rev() {
        // columns cleared by the dimension-(p+1) pass are known positive
        let positives =
            reduce_columns(complex, &index, &lists[p], true, &mut pairs, &mut cleared)?;
        if p <= q_max {
            unpaired_positive[p] = positives;
        }
    }

    let uf = union_find_pass(complex, &lists);
    pairs.extend_from_slice(&uf.pairs);
    if q_max >= 1 {
        unpaired_positive[1] =
            uf.positive_edges.into_iter().filter(|&e| !cleared[e as usize]).collect();
    }
    unpaired_positive[0] = uf.roots;

    Ok(ReductionOutcome { pairs, unpaired_positive })
}

/// Anti-transposed reduction: for each degree `q`, reduce the coboundary
/// columns of the q-simplices in reverse filtration order. The pairing
/// theorem for the anti-transpose gives exactly the boundary-reduction
/// pairs, at one column per q-simplex. Negative simplices discovered in a
/// pass are cleared from the next; merging edges found by union-find are
/// cleared from the degree-1 pass.
fn reduce_cohomology(complex: &FilteredComplex, q_max: usize) -> Result<ReductionOutcome> {
    let len = complex.len();
    let lists = dim_lists(complex);
    let mut cleared = vec![false; len];
    let mut unpaired_positive = vec![Vec::new(); complex.max_dim() + 1];

    let uf = union_find_pass(complex, &lists);
    let mut pairs = uf.pairs.clone();
    for &(_, edge) in &uf.pairs {
        cleared[edge as usize] = true; // negative edges reduce to nothing
    }
    unpaired_positive[0] = uf.roots;

    let rev = |i: u32| (len - 1) as u32 - i;
    for q in 1..=q_max {
        let (offsets, cofacets) = cofacet_csr(complex, &lists, q)?;
        let mut pivot_slot: Vec<u32> = vec![u32::MAX; len];
        let mut stored: Vec<Vec<u32>> = Vec::new();
        let mut working = BitTreeColumn::new(len);
        let mut col = Vec::new();
        let mut empties = Vec::new();
        for (rank, &sigma) in lists[q].iter().enumerate().rev() {
            if cleared[sigma as usize] {
                continue;
            }
            let slice = &cofacets[offsets[rank] as usize..offsets[rank + 1] as usize];
            if slice.is_empty() {
                empties.push(sigma);
                continue;
            }
            // cofacets are stored by ascending simplex index, so the first
            // entry is the pivot row in reversed order
            let initial_low = rev(slice[0]);
            if pivot_slot[initial_low as usize] == u32::MAX {
                pivot_slot[initial_low as usize] = stored.len() as u32;
                pairs.push((sigma, slice[0]));
                cleared[slice[0] as usize] = true;
                stored.push(slice.iter().rev().map(|&t| rev(t)).collect());
                continue;
            }
            for &t in slice {
                working.flip(rev(t));
            }
            loop {
                match working.max() {
                    None => {
                        empties.push(sigma);
                        break;
                    }
                    Some(low) => {
                        let slot = pivot_slot[low as usize];
                        if slot == u32::MAX {
                            pivot_slot[low as usize] = stored.len() as u32;
                            let tau = rev(low);
                            pairs.push((sigma, tau));
                            cleared[tau as usize] = true;
                            working.drain_into(&mut col);
                            stored.push(col.clone());
                            break;
                        }
                        for &f in &stored[slot as usize] {
                            working.flip(f);
                        }
                    }
                }
            }
        }
        // empty columns belong to simplices that either died in a lower
        // degree (excluded via clearing) or never pair: the censored ones
        if q == 1 {
            let merging: std::collections::HashSet<u32> =
                uf.pairs.iter().map(|&(_, e)| e).collect();
            unpaired_positive[1] =
                empties.into_iter().filter(|e| !merging.contains(e)).collect();
        } else {
            unpaired_positive[q] = empties;
        }
        unpaired_positive[q].sort_unstable();
    }
    Ok(ReductionOutcome { pairs, unpaired_positive })
}

/// Cofacet lists of the dimension-q simplices, CSR-indexed by the rank of a
/// simplex within its dimension; entries are ascending sorted indices.
fn cofacet_csr(
    complex: &FilteredComplex,
    lists: &[Vec<u32>],
    q: usize,
) -> Result<(Vec<u32>, Vec<u32>)> {
    let rows = &lists[q];
    let upper = &lists[q + 1];
    // vertex-key to within-dimension rank, one probe per facet
    let mut key_to_rank: Vec<(u128, u32)> = rows
        .iter()
        .enumerate()
        .map(|(rank, &idx)| (SimplexIndex::pack_key(complex.vertices(idx as usize)), rank as u32))
        .collect();
    key_to_rank.sort_unstable_by_key(|&(k, _)| k);
    let mut counts = vec![0u32; rows.len() + 1];
    let mut facet = Vec::with_capacity(q + 1);
    let mut facet_ranks = Vec::with_capacity((q + 2) * upper.len());
    for &tau in upper {
        let vs = complex.vertices(tau as usize);
        for drop in 0..vs.len() {
            facet.clear();
            facet.extend(vs.iter().enumerate().filter(|&(k, _)| k != drop).map(|(_, &v)| v));
            let key = SimplexIndex::pack_key(&facet);
            let pos = key_to_rank
                .binary_search_by_key(&key, |&(k, _)| k)
                .map_err(|_| Error::NotFaceClosed(tau as usize))?;
            let rank = key_to_rank[pos].1 as usize;
            counts[rank + 1] += 1;
            facet_ranks.push(rank as u32);
        }
    }
    for i in 1..counts.len() {
        counts[i] += counts[i - 1];
    }
    let offsets = counts;
    let mut fill = offsets.clone();
    let mut data = vec![0u32; facet_ranks.len()];
    let mut pos = 0usize;
    for &tau in upper {
        let arity = complex.vertices(tau as usize).len();
        for _ in 0..arity {
            let rank = facet_ranks[pos] as usize;
            data[fill[rank] as usize] = tau;
            fill[rank] += 1;
            pos += 1;
        }
    }
    // within one facet the taus arrive in ascending sorted order because the
    // upper list is ascending
    Ok((offsets, data))
}

fn reduce_plain(complex: &FilteredComplex) -> Result<ReductionOutcome> {
    let index = SimplexIndex::new_facet_index(complex);
    let mut cleared = vec![false; complex.len()];
    let mut pairs = Vec::new();
    let all: Vec<u32> = (0..complex.len() as u32)
        .filter(|&i| complex.dim(i as usize) > 0)
        .collect();
    let positives = reduce_columns(complex, &index, &all, false, &mut pairs, &mut cleared)?;
    let mut unpaired_positive = vec![Vec::new(); complex.max_dim() + 1];
    let mut paired = vec![false; complex.len()];
    for &(low, _) in &pairs {
        paired[low as usize] = true;
    }
    for i in 0..complex.len() {
        if complex.dim(i) == 0 && !paired[i] {
            unpaired_positive[0].push(i as u32);
        }
    }
    for s in positives {
        if !paired[s as usize] {
            unpaired_positive[complex.dim(s as usize) as usize].push(s);
        }
    }
    Ok(ReductionOutcome { pairs, unpaired_positive })
}

fn assemble(
    complex: &FilteredComplex,
    q_max: usize,
    outcome: ReductionOutcome,
) -> Vec<PersistenceDiagram> {
    let r_max = complex.r_max();
    let mut per_degree: Vec<Vec<DiagramPoint>> = vec![Vec::new(); q_max + 1];
    for (low, s) in outcome.pairs {
        let q = complex.dim(low as usize) as usize;
        if q > q_max {
            continue;
        }
        let (birth, death) = (complex.value(low as usize), complex.value(s as usize));
        if birth == death {
            continue; // zero-persistence pair
        }
        per_degree[q].push(DiagramPoint {
            birth,
            death,
            censored: false,
            positive: low,
            negative: Some(s),
        });
    }
    for q in 0..=q_max {
        let unpaired = &outcome.unpaired_positive[q];
        // the eldest unpaired class is essential and dropped by convention
        let skip_essential = if q == 0 { unpaired.iter().copied().min() } else { None };
        for &s in unpaired {
            if Some(s) == skip_essential {
                continue;
            }
            let birth = complex.value(s as usize);
            if birth >= r_max {
                continue;
            }
            per_degree[q].push(DiagramPoint {
                birth,
                death: r_max,
                censored: true,
                positive: s,
                negative: None,
            });
        }
    }
    per_degree
        .into_iter()
        .enumerate()
        .map(|(q, points)| PersistenceDiagram::new(q, r_max, points))
        .collect()
}

struct UnionFind {
    parent: Vec<u32>,
    rank: Vec<u8>,
    /// Per root, the vertex id of the component's eldest vertex (smallest
    /// sorted position).
    elder: Vec<u32>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
            elder: (0..n as u32).collect(),
        }
    }

    fn find(&mut self, mut v: usize) -> usize {
        let mut root = v;
        while self.parent[root] as usize != root {
            root = self.parent[root] as usize;
        }
        while self.parent[v] as usize != v {
            let next = self.parent[v] as usize;
            self.parent[v] = root as u32;
            v = next;
        }
        root
    }

    fn elder(&self, root: usize) -> usize {
        self.elder[root] as usize
    }

    /// Merge the components of `a` and `b`. Returns the vertex id whose class
    /// dies (the younger elder), or `None` when already connected.
    fn merge(&mut self, a: usize, b: usize, vertex_pos: &[u32]) -> Option<usize> {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        let (ea, eb) = (self.elder[ra], self.elder[rb]);
        let (surviving, dying) =
            if vertex_pos[ea as usize] <= vertex_pos[eb as usize] { (ea, eb) } else { (eb, ea) };
        let (mut hi, mut lo) = (ra, rb);
        if self.rank[hi] < self.rank[lo] {
            std::mem::swap(&mut hi, &mut lo);
        }
        self.parent[lo] = hi as u32;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        self.elder[hi] = surviving;
        Some(dying as usize)
    }
}

/// Number of diagram points in `[0, r] x (s, inf)`.
///
/// Censored points carry `death = r_max` and are counted exactly when their
/// censoring radius exceeds `s`; when `s >= r_max` their status is unknowable
/// under truncation and they are not counted.
pub fn persistent_betti(diagram: &PersistenceDiagram, r: f64, s: f64) -> Result<usize> {
    if r > s {
        return Err(Error::InvalidParameter(format!("need r <= s, got r={r}, s={s}")));
    }
    Ok(diagram.points().iter().filter(|p| p.birth <= r && p.death > s).count())
}

/// Sum of persistences to the power `alpha`.
pub fn total_persistence(diagram: &PersistenceDiagram, alpha: f64) -> Result<f64> {
    truncated_persistence(diagram, alpha, 0.0)
}

/// Sum of `persistence^alpha` over points with persistence at least `M`.
pub fn truncated_persistence(diagram: &PersistenceDiagram, alpha: f64, m: f64) -> Result<f64> {
    if alpha < 0.0 {
        return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
    }
    if m < 0.0 {
        return Err(Error::InvalidParameter(format!("M must be >= 0, got {m}")));
    }
    let censored = diagram.censored_count();
    if censored > 0 {
        return Err(Error::CensoredPoints { count: censored });
    }
    Ok(diagram
        .points()
        .iter()
        .map(|p| p.persistence())
        .filter(|&pers| pers >= m)
        .map(|pers| pers.powf(alpha))
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMode {
    Death,
    Persistence,
}

/// Measure of the region `{death >= M}` (mode `Death`, the set `U_M`) or
/// `{persistence >= M}` (mode `Persistence`).
pub fn count_tail(measure: &DiagramMeasure, m: f64, mode: TailMode) -> f64 {
    let count = measure
        .base
        .points()
        .iter()
        .filter(|p| match mode {
            TailMode::Death => p.death >= m,
            TailMode::Persistence => p.persistence() >= m,
        })
        .count();
    count as f64 * measure.mass_per_point
}

/// Number of degree-`q` diagram points whose negative simplex has filtration
/// value at least `M`.
pub fn count_negative_simplexes(
    diagrams: &[PersistenceDiagram],
    complex: &FilteredComplex,
    q: usize,
    m: f64,
) -> Result<usize> {
    let diagram = diagrams
        .get(q)
        .ok_or_else(|| Error::InvalidParameter(format!("no diagram of degree {q}")))?;
    let mut count = 0;
    for p in diagram.points() {
        if p.censored {
            continue;
        }
        let neg = p.negative.ok_or(Error::MissingPairing)?;
        if complex.value(neg as usize) >= m {
            count += 1;
        }
    }
    Ok(count)
}
