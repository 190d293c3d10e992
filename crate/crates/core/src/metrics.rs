//! Bottleneck and p-Wasserstein distances between persistence diagrams with
//! diagonal matching.
//!
//! The default ground metric is Euclidean on the plane; the sup norm is
//! available because the bottleneck stability statement is sharp in that
//! norm and other ecosystems use it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::persistence::{DiagramPoint, PersistenceDiagram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ground {
    Euclidean,
    Sup,
}

pub fn point_distance(a: &DiagramPoint, b: &DiagramPoint, ground: Ground) -> f64 {
    let (db, dd) = (a.birth - b.birth, a.death - b.death);
    match ground {
        Ground::Euclidean => (db * db + dd * dd).sqrt(),
        Ground::Sup => db.abs().max(dd.abs()),
    }
}

/// Distance from a point to its orthogonal projection onto the diagonal.
pub fn diagonal_distance(a: &DiagramPoint, ground: Ground) -> f64 {
    match ground {
        Ground::Euclidean => a.persistence() / std::f64::consts::SQRT_2,
        Ground::Sup => a.persistence() / 2.0,
    }
}

/// One side of a matched pair: a diagram point or the diagonal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MatchEnd {
    Point(usize),
    Diagonal,
}

/// An optimal matching together with its cost.
#[derive(Debug, Clone, Serialize)]
pub struct MatchingResult {
    pub cost: f64,
    /// (end in the first diagram, end in the second); every off-diagonal
    /// point of both diagrams appears exactly once.
    pub pairs: Vec<(MatchEnd, MatchEnd)>,
}

/// Cost of a given matching, recomputed from its pairs.
pub fn matching_cost(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    pairs: &[(MatchEnd, MatchEnd)],
    p: f64,
    ground: Ground,
) -> f64 {
    let mut total = 0.0f64;
    for &(a, b) in pairs {
        let dist = match (a, b) {
            (MatchEnd::Point(i), MatchEnd::Point(j)) => {
                point_distance(&d1.points()[i], &d2.points()[j], ground)
            }
            (MatchEnd::Point(i), MatchEnd::Diagonal) => diagonal_distance(&d1.points()[i], ground),
            (MatchEnd::Diagonal, MatchEnd::Point(j)) => diagonal_distance(&d2.points()[j], ground),
            (MatchEnd::Diagonal, MatchEnd::Diagonal) => 0.0,
        };
        total += dist.powf(p);
    }
    total.powf(1.0 / p)
}

fn ensure_no_censored(d: &PersistenceDiagram) -> Result<()> {
    let count = d.censored_count();
    if count > 0 {
        return Err(Error::CensoredPoints { count });
    }
    Ok(())
}

/// Canonical order on diagrams: point count, then the coordinate sequence.
fn diagram_key(d: &PersistenceDiagram) -> (usize, Vec<(u64, u64)>) {
    (
        d.len(),
        d.points().iter().map(|p| (p.birth.to_bits(), p.death.to_bits())).collect(),
    )
}

/// Optimal p-Wasserstein matching, solved as a square assignment problem of
/// size `#D1 + #D2` where each point may also match its diagonal projection.
///
/// Arguments are ordered canonically before solving, so the cost is
/// symmetric bit-for-bit.
pub fn wasserstein_distance(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    p: f64,
    ground: Ground,
) -> Result<MatchingResult> {
    if diagram_key(d2) < diagram_key(d1) {
        let mut result = wasserstein_distance(d2, d1, p, ground)?;
        for pair in &mut result.pairs {
            *pair = (pair.1, pair.0);
        }
        return Ok(result);
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("need finite p >= 1, got {p}")));
    }
    ensure_no_censored(d1)?;
    ensure_no_censored(d2)?;
    let (n1, n2) = (d1.len(), d2.len());
    let k = n1 + n2;
    if k == 0 {
        return Ok(MatchingResult { cost: 0.0, pairs: Vec::new() });
    }
    // scale distances to [0, 1] so large p does not overflow
    let mut scale = 0.0f64;
    for a in d1.points() {
        scale = scale.max(diagonal_distance(a, ground));
        for b in d2.points() {
            scale = scale.max(point_distance(a, b, ground));
        }
    }
    for b in d2.points() {
        scale = scale.max(diagonal_distance(b, ground));
    }
    if scale == 0.0 {
        scale = 1.0;
    }
    let mut cost = vec![0.0f64; k * k];
    for i in 0..k {
        for j in 0..k {
            let dist = match (i < n1, j < n2) {
                (true, true) => point_distance(&d1.points()[i], &d2.points()[j], ground),
                (true, false) => diagonal_distance(&d1.points()[i], ground),
                (false, true) => diagonal_distance(&d2.points()[j], ground),
                (false, false) => 0.0,
            };
            cost[i * k + j] = (dist / scale).powf(p);
        }
    }
    let assignment = solve_assignment(&cost, k);
    let mut total = 0.0f64;
    let mut pairs = Vec::new();
    for (i, &j) in assignment.iter().enumerate() {
        total += cost[i * k + j];
        match (i < n1, j < n2) {
            (true, true) => pairs.push((MatchEnd::Point(i), MatchEnd::Point(j))),
            (true, false) => pairs.push((MatchEnd::Point(i), MatchEnd::Diagonal)),
            (false, true) => pairs.push((MatchEnd::Diagonal, MatchEnd::Point(j))),
            (false, false) => {}
        }
    }
    Ok(MatchingResult { cost: scale * total.powf(1.0 / p), pairs })
}

/// Exact dense linear assignment by shortest augmenting paths with dual
/// potentials, O(k^3).
fn solve_assignment(cost: &[f64], n: usize) -> Vec<usize> {
    let inf = f64::INFINITY;
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut assigned = vec![0usize; n + 1]; // assigned[j] = row occupying column j, 1-based
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        assigned[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = assigned[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[assigned[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if assigned[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            assigned[j0] = assigned[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![usize::MAX; n];
    for j in 1..=n {
        if assigned[j] > 0 {
            result[assigned[j] - 1] = j - 1;
        }
    }
    result
}

/// Bottleneck distance: binary search over the candidate-distance set with a
/// bipartite perfect-matching feasibility test at each candidate.
pub fn bottleneck_distance(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    ground: Ground,
) -> Result<f64> {
    ensure_no_censored(d1)?;
    ensure_no_censored(d2)?;
    let (n1, n2) = (d1.len(), d2.len());
    if n1 == 0 && n2 == 0 {
        return Ok(0.0);
    }
    let mut candidates = vec![0.0f64];
    for a in d1.points() {
        candidates.push(diagonal_distance(a, ground));
        for b in d2.points() {
            candidates.push(point_distance(a, b, ground));
        }
    }
    for b in d2.points() {
        candidates.push(diagonal_distance(b, ground));
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let feasible = |t: f64| -> bool { bottleneck_feasible(d1, d2, ground, t) };
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    debug_assert!(feasible(candidates[hi]));
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(candidates[lo])
}

/// Does a perfect matching exist in the augmented bipartite graph at
/// threshold `t`? Left vertices are the first diagram's points plus one
/// diagonal ghost per point of the second; right vertices symmetrically.
/// A point may match its own diagonal projection; ghosts match each other
/// freely.
fn bottleneck_feasible(
    d1: &PersistenceDiagram,
    d2: &PersistenceDiagram,
    ground: Ground,
    t: f64,
) -> bool {
    let (n1, n2) = (d1.len(), d2.len());
    let total = n1 + n2;
    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); total];
    for (i, a) in d1.points().iter().enumerate() {
        for (j, b) in d2.points().iter().enumerate() {
            if point_distance(a, b, ground) <= t {
                adj[i].push(j as u32);
            }
        }
        if diagonal_distance(a, ground) <= t {
            adj[i].push((n2 + i) as u32);
        }
    }
    for j in 0..n2 {
        if diagonal_distance(&d2.points()[j], ground) <= t {
            adj[n1 + j].push(j as u32);
        }
        for g in 0..n1 {
            adj[n1 + j].push((n2 + g) as u32);
        }
    }
    hopcroft_karp(&adj, total) == total
}

/// Maximum bipartite matching (Hopcroft-Karp).
fn hopcroft_karp(adj: &[Vec<u32>], right_size: usize) -> usize {
    let left_size = adj.len();
    const NIL: u32 = u32::MAX;
    let mut match_left = vec![NIL; left_size];
    let mut match_right = vec![NIL; right_size];
    let mut dist = vec![0u32; left_size];
    let mut queue = std::collections::VecDeque::new();
    let mut matching = 0usize;
    loop {
        queue.clear();
        let mut found = false;
        for u in 0..left_size {
            if match_left[u] == NIL {
                dist[u] = 0;
                queue.push_back(u as u32);
            } else {
                dist[u] = u32::MAX;
            }
        }
        let mut layer_limit = u32::MAX;
        while let Some(u) = queue.pop_front() {
            if dist[u as usize] >= layer_limit {
                continue;
            }
            for &v in &adj[u as usize] {
                let w = match_right[v as usize];
                if w == NIL {
                    layer_limit = dist[u as usize] + 1;
                    found = true;
                } else if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dist[u as usize] + 1;
                    queue.push_back(w);
                }
            }
        }
        if !found {
            break;
        }
        fn dfs(
            u: usize,
            adj: &[Vec<u32>],
            match_left: &mut [u32],
            match_right: &mut [u32],
            dist: &mut [u32],
        ) -> bool {
            for k in 0..adj[u].len() {
                let v = adj[u][k] as usize;
                let w = match_right[v];
                let ok = if w == u32::MAX {
                    true
                } else if dist[w as usize] == dist[u] + 1 {
                    dfs(w as usize, adj, match_left, match_right, dist)
                } else {
                    false
                };
                if ok {
                    match_left[u] = v as u32;
                    match_right[v] = u as u32;
                    return true;
                }
            }
            dist[u] = u32::MAX;
            false
        }
        for u in 0..left_size {
            if match_left[u] == NIL && dfs(u, adj, &mut match_left, &mut match_right, &mut dist) {
                matching += 1;
            }
        }
    }
    matching
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(birth: f64, death: f64) -> DiagramPoint {
        DiagramPoint { birth, death, censored: false, positive: 0, negative: Some(1) }
    }

    fn diagram(points: Vec<DiagramPoint>) -> PersistenceDiagram {
        PersistenceDiagram::new(0, 100.0, points)
    }

    #[test]
    fn single_point_to_empty() {
        let d1 = diagram(vec![point(0.0, 1.0)]);
        let empty = diagram(vec![]);
        for p in [1.0, 2.0, 7.0, 64.0] {
            let m = wasserstein_distance(&d1, &empty, p, Ground::Euclidean).unwrap();
            assert!((m.cost - 1.0 / std::f64::consts::SQRT_2).abs() < 1e-12, "p={p}");
            assert_eq!(m.pairs, vec![(MatchEnd::Point(0), MatchEnd::Diagonal)]);
        }
        let b = bottleneck_distance(&d1, &empty, Ground::Euclidean).unwrap();
        assert!((b - 1.0 / std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(bottleneck_distance(&empty, &empty, Ground::Sup).unwrap(), 0.0);
    }

    #[test]
    fn self_distance_is_zero() {
        let d = diagram(vec![point(0.0, 1.0), point(0.3, 2.1), point(1.0, 1.1)]);
        for p in [1.0, 2.0, 3.0] {
            assert!(wasserstein_distance(&d, &d, p, Ground::Euclidean).unwrap().cost < 1e-12);
        }
        assert_eq!(bottleneck_distance(&d, &d, Ground::Euclidean).unwrap(), 0.0);
    }

    #[test]
    fn direct_match_beats_double_diagonal() {
        let d1 = diagram(vec![point(0.0, 1.0)]);
        let d2 = diagram(vec![point(0.0, 1.2)]);
        let b = bottleneck_distance(&d1, &d2, Ground::Euclidean).unwrap();
        assert!((b - 0.2).abs() < 1e-12);
        let m = wasserstein_distance(&d1, &d2, 1.0, Ground::Euclidean).unwrap();
        assert!((m.cost - 0.2).abs() < 1e-12);
        assert_eq!(m.pairs, vec![(MatchEnd::Point(0), MatchEnd::Point(0))]);
    }

    #[test]
    fn matching_cost_is_consistent() {
        let d1 = diagram(vec![point(0.0, 1.0), point(0.5, 0.9)]);
        let d2 = diagram(vec![point(0.1, 1.1), point(2.0, 2.5), point(0.4, 0.6)]);
        for ground in [Ground::Euclidean, Ground::Sup] {
            for p in [1.0, 2.0, 4.0] {
                let m = wasserstein_distance(&d1, &d2, p, ground).unwrap();
                let recomputed = matching_cost(&d1, &d2, &m.pairs, p, ground);
                assert!((m.cost - recomputed).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let d = diagram(vec![point(0.0, 1.0)]);
        assert!(wasserstein_distance(&d, &d, 0.5, Ground::Euclidean).is_err());
        assert!(wasserstein_distance(&d, &d, f64::INFINITY, Ground::Euclidean).is_err());
        let censored = PersistenceDiagram::new(
            0,
            1.0,
            vec![DiagramPoint {
                birth: 0.0,
                death: 1.0,
                censored: true,
                positive: 0,
                negative: None,
            }],
        );
        assert!(wasserstein_distance(&censored, &d, 2.0, Ground::Euclidean).is_err());
        assert!(bottleneck_distance(&censored, &d, Ground::Euclidean).is_err());
    }

    #[test]
    fn sup_ground_differs_from_euclidean() {
        let d1 = diagram(vec![point(0.0, 2.0)]);
        let empty = diagram(vec![]);
        let e = bottleneck_distance(&d1, &empty, Ground::Euclidean).unwrap();
        let s = bottleneck_distance(&d1, &empty, Ground::Sup).unwrap();
        assert!((e - 2.0 / std::f64::consts::SQRT_2).abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-12);
    }
}
