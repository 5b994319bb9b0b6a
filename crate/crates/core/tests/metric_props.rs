mod common;

use common::*;
use proptest::prelude::*;
use warpgeo::{Chart, FactorKind, C64};

/// Largest entry error relative to the table magnitude (floored at 1, so
/// identically vanishing tables are compared absolutely).
fn max_rel_error(m: &warpgeo::WarpedMetric, u: &[C64], rho: f64) -> f64 {
    let table = m.christoffel(u).unwrap();
    let oracle = christoffel_oracle(m, u, rho);
    let n = m.dim();
    let mut scale = 0.0_f64;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                scale = scale.max(oracle[k][i][j].norm());
            }
        }
    }
    let mut err = 0.0_f64;
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                err = err.max((table.get(k, i, j) - oracle[k][i][j]).norm() / scale.max(1.0));
            }
        }
    }
    err
}

#[test]
fn christoffel_table_matches_general_formula() {
    let mut g = rng(11);
    for _ in 0..10 {
        let m = rand_metric(&mut g);
        for _ in 0..10 {
            let u = rand_ordinary_point(&m, &mut g, 0.05);
            let err = max_rel_error(&m, &u, 0.01);
            assert!(err <= 1e-10, "metric {m:?} at {u:?}: relative error {err:e}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symbols_outside_the_pattern_vanish(seed in any::<u64>()) {
        let mut g = rng(seed);
        let m = rand_metric(&mut g);
        let u = rand_ordinary_point(&m, &mut g, 0.05);
        let t = m.christoffel(&u).unwrap();
        let n = m.dim();
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let allowed = match k {
                        0 => i == j,
                        _ => (i == k && j == k) || (i.min(j) == 0 && i.max(j) == k),
                    };
                    if !allowed {
                        prop_assert_eq!(t.get(k, i, j), C64::new(0.0, 0.0));
                    }
                }
            }
        }
    }

    #[test]
    fn ordinary_exactly_off_the_singular_sets(seed in any::<u64>()) {
        let mut g = rng(seed);
        let m = rand_metric(&mut g);
        let u = rand_ordinary_point(&m, &mut g, 0.05);
        prop_assert!(m.is_metrically_ordinary(&u));
        // Moving one component onto any of its reported zeros or poles
        // makes the point non-ordinary.
        for i in 0..m.dim() {
            for l in m.loci(i, Chart::Affine) {
                if m.factors()[i] == FactorKind::Disc && l.at.norm() >= 1.0 {
                    continue;
                }
                let mut p = u.clone();
                p[i] = l.at;
                prop_assert!(!m.is_metrically_ordinary(&p), "{} at {}", l.label(), l.at);
            }
        }
    }
}
