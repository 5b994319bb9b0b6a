mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use warpgeo::{
    conservation_drift, geodesic_rhs, integrate_segment, FactorKind, GeodesicState, Status, WarpedMetric, C64,
};

const TOL: f64 = 1e-10;

/// A random metric, an ordinary start with a small velocity and a target at
/// distance `len` in a random direction.
fn setup(seed: u64, max_len: f64) -> (WarpedMetric, GeodesicState, C64, f64) {
    let mut g = rng(seed);
    let m = rand_metric(&mut g);
    let u = rand_ordinary_point(&m, &mut g, 0.1);
    let v: Vec<C64> = (0..m.dim()).map(|_| rand_c(&mut g, 0.2)).collect();
    let len = g.gen_range(0.5..max_len);
    let dir = C64::from_polar(1.0, g.gen_range(0.0..std::f64::consts::TAU));
    (m, GeodesicState::new(c(0.0, 0.0), u, v), dir * len, len)
}

fn dist(a: &[C64], b: &[C64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rhs_matches_christoffel_contraction(seed in any::<u64>()) {
        let mut g = rng(seed);
        let m = rand_metric(&mut g);
        let u = rand_ordinary_point(&m, &mut g, 0.05);
        let v: Vec<C64> = (0..m.dim()).map(|_| rand_c(&mut g, 1.0)).collect();
        let acc = geodesic_rhs(&m, &GeodesicState::new(c(0.0, 0.0), u.clone(), v.clone())).unwrap();
        let t = m.christoffel(&u).unwrap();
        let n = m.dim();
        for k in 0..n {
            let mut sum = c(0.0, 0.0);
            let mut size = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let term = t.get(k, i, j) * v[i] * v[j];
                    sum -= term;
                    size += term.norm();
                }
            }
            prop_assert!((acc[k] - sum).norm() <= 1e-12 * size.max(1e-300) + 1e-300, "k={k}: {} vs {sum}", acc[k]);
        }
    }

    #[test]
    fn first_integrals_are_conserved(seed in any::<u64>()) {
        let (m, s, target, len) = setup(seed, 10.0);
        let rec = integrate_segment(&m, &s, target, TOL).unwrap();
        prop_assume!(rec.status == Status::Completed);
        let drift = conservation_drift(&m, &rec);
        prop_assert!(drift <= 100.0 * TOL * (1.0 + len), "drift {drift:e} over length {len}");
        prop_assert_eq!(rec.drift, Some(drift));
    }

    #[test]
    fn time_reversal_returns_to_start(seed in any::<u64>()) {
        let (m, s, target, len) = setup(seed, 3.0);
        let there = integrate_segment(&m, &s, target, TOL).unwrap();
        prop_assume!(there.status == Status::Completed);
        let back = integrate_segment(&m, &there.last().to_affine(), s.z, TOL).unwrap();
        prop_assume!(back.status == Status::Completed);
        let end = back.last().to_affine();
        let err = dist(&end.u, &s.u).max(dist(&end.v, &s.v));
        prop_assert!(err <= 10.0 * TOL * (1.0 + 2.0 * len), "error {err:e}");
    }

    /// `u1` stays put only where the forcing `sum a_l'(u1) f_l v_l^2`
    /// vanishes, so start at a critical point of the warping function.
    #[test]
    fn constant_base_coordinate_stays_constant(seed in any::<u64>()) {
        let mut g = rng(seed);
        let m = loop {
            let m = rand_metric(&mut g);
            if m.dim() == 2 {
                break m;
            }
        };
        let da = m.warping()[0].derivative();
        let crit: Vec<C64> = da.singular_points().unwrap().zeros.iter().map(|r| r.at).collect();
        let Some(&u1) = crit.iter().find(|&&z| {
            locus_distance(&m, 0, z) > 0.1 && (m.factors()[0] != FactorKind::Disc || z.norm() < 0.8)
        }) else {
            return Ok(());
        };
        let mut u = rand_ordinary_point(&m, &mut g, 0.1);
        u[0] = u1;
        let v = vec![c(0.0, 0.0), rand_c(&mut g, 0.2)];
        let len = g.gen_range(0.5..10.0);
        let target = C64::from_polar(len, g.gen_range(0.0..std::f64::consts::TAU));
        let rec = integrate_segment(&m, &GeodesicState::new(c(0.0, 0.0), u, v), target, TOL).unwrap();
        prop_assume!(rec.status == Status::Completed);
        for x in &rec.samples {
            prop_assert!((x.u[0] - u1).norm() <= 10.0 * TOL, "drifted to {}", x.u[0]);
        }
    }

    #[test]
    fn flat_geodesics_are_straight_lines(seed in any::<u64>()) {
        let mut g = rng(seed);
        let n = g.gen_range(1..=3);
        let m = WarpedMetric::flat(vec![FactorKind::Plane; n]);
        let u0: Vec<C64> = (0..n).map(|_| rand_c(&mut g, 2.0)).collect();
        let v: Vec<C64> = (0..n).map(|_| rand_c(&mut g, 1.0)).collect();
        let target = C64::from_polar(g.gen_range(0.0..10.0), g.gen_range(0.0..std::f64::consts::TAU));
        let rec = integrate_segment(&m, &GeodesicState::new(c(0.0, 0.0), u0.clone(), v.clone()), target, TOL).unwrap();
        prop_assert_eq!(&rec.status, &Status::Completed);
        for x in &rec.samples {
            for i in 0..n {
                prop_assert!((x.u[i] - (u0[i] + v[i] * x.z)).norm() <= 1e-10);
                prop_assert!((x.v[i] - v[i]).norm() <= 1e-10);
            }
        }
    }
}

#[test]
fn exponential_metric_oracle() {
    // b1 = 1/eta^2: u'' = u'^2 / u, so u = e^z from u = v = 1.
    let b1 = warpgeo::RationalFn::from_real(&[1.0], &[0.0, 0.0, 1.0]).unwrap();
    let m = WarpedMetric::new(vec![FactorKind::Plane], b1, vec![], vec![]).unwrap();
    let s = GeodesicState::new(c(0.0, 0.0), vec![c(1.0, 0.0)], vec![c(1.0, 0.0)]);
    for z in [c(1.0, 0.0), c(2.0, 0.0), c(1.0, 1.0)] {
        let rec = integrate_segment(&m, &s, z, TOL).unwrap();
        let end = rec.last();
        assert!((end.u[0] - z.exp()).norm() <= 1e-7, "{z}: {}", end.u[0]);
    }
}
