//! Property tests for the diagram functionals and metrics.

use proptest::prelude::*;

use tda_core::metrics::{matching_cost, wasserstein_distance, Ground};
use tda_core::persistence::{persistent_betti, truncated_persistence};
use tda_core::representations::{
    linear_representation, representation_distance, FeatureSpec, Norm, WeightSpec,
};
use tda_core::{DiagramPoint, PersistenceDiagram};

fn arb_point() -> impl Strategy<Value = (f64, f64)> {
    (0.0f64..2.0, 1e-3f64..1.5).prop_map(|(birth, pers)| (birth, birth + pers))
}

fn arb_diagram(max_points: usize) -> impl Strategy<Value = PersistenceDiagram> {
    proptest::collection::vec(arb_point(), 0..=max_points).prop_map(|pts| {
        let points = pts
            .iter()
            .enumerate()
            .map(|(i, &(birth, death))| DiagramPoint {
                birth,
                death,
                censored: false,
                positive: i as u32,
                negative: Some(i as u32),
            })
            .collect();
        PersistenceDiagram::new(1, 1e6, points)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn persistent_betti_monotone(d in arb_diagram(12), r in 0.0f64..2.0, s_off in 0.0f64..1.5, dr in 0.0f64..0.5) {
        let s = r + s_off;
        let base = persistent_betti(&d, r, s).unwrap();
        // non-decreasing in r (while r stays at most s)
        let r_up = (r + dr).min(s);
        prop_assert!(persistent_betti(&d, r_up, s).unwrap() >= base);
        // non-increasing in s
        prop_assert!(persistent_betti(&d, r, s + dr).unwrap() <= base);
    }

    #[test]
    fn truncation_shrinks_total_persistence(d in arb_diagram(12), alpha in 0.0f64..3.0, m in 0.0f64..2.0, dm in 0.0f64..1.0) {
        let total = truncated_persistence(&d, alpha, 0.0).unwrap();
        let at_m = truncated_persistence(&d, alpha, m).unwrap();
        let higher = truncated_persistence(&d, alpha, m + dm).unwrap();
        prop_assert!(at_m <= total + 1e-12);
        prop_assert!(higher <= at_m + 1e-12);
    }

    #[test]
    fn representation_is_linear(pts in proptest::collection::vec(arb_point(), 1..8), split in 0usize..8) {
        let split = split % pts.len();
        let mk = |slice: &[(f64, f64)], offset: usize| {
            let points = slice.iter().enumerate().map(|(i, &(b, d))| DiagramPoint {
                birth: b, death: d, censored: false,
                positive: (offset + i) as u32, negative: Some((offset + i) as u32),
            }).collect();
            PersistenceDiagram::new(1, 1e6, points)
        };
        let whole = mk(&pts, 0);
        let left = mk(&pts[..split], 0);
        let right = mk(&pts[split..], split);
        let w = WeightSpec::power(2.0).unwrap();
        let phi = FeatureSpec::ConstantOne;
        let a = linear_representation(&left, &w, &phi).unwrap();
        let b = linear_representation(&right, &w, &phi).unwrap();
        let c = linear_representation(&whole, &w, &phi).unwrap();
        let sum = match (&a, &b) {
            (tda_core::representations::RepresentationValue::Scalar(x),
             tda_core::representations::RepresentationValue::Scalar(y)) => x + y,
            _ => unreachable!(),
        };
        let total = match &c {
            tda_core::representations::RepresentationValue::Scalar(x) => *x,
            _ => unreachable!(),
        };
        prop_assert!((sum - total).abs() < 1e-12);
        prop_assert_eq!(representation_distance(&a, &a, Norm::Sup).unwrap(), 0.0);
    }

    #[test]
    fn matching_cost_reconstructs_reported_cost(d1 in arb_diagram(6), d2 in arb_diagram(6), p in 1.0f64..8.0) {
        let m = wasserstein_distance(&d1, &d2, p, Ground::Euclidean).unwrap();
        let recomputed = matching_cost(&d1, &d2, &m.pairs, p, Ground::Euclidean);
        prop_assert!((m.cost - recomputed).abs() < 1e-9);
        // every off-diagonal point appears exactly once
        let mut seen1 = vec![false; d1.len()];
        let mut seen2 = vec![false; d2.len()];
        for &(a, b) in &m.pairs {
            if let tda_core::metrics::MatchEnd::Point(i) = a {
                prop_assert!(!seen1[i]);
                seen1[i] = true;
            }
            if let tda_core::metrics::MatchEnd::Point(j) = b {
                prop_assert!(!seen2[j]);
                seen2[j] = true;
            }
        }
        prop_assert!(seen1.iter().all(|&s| s));
        prop_assert!(seen2.iter().all(|&s| s));
    }
}
