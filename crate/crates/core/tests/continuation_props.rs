mod common;

use std::f64::consts::{PI, TAU};

use common::*;
use proptest::prelude::*;
use rand::Rng;
use warpgeo::continuation::monodromy_probe;
use warpgeo::ode::Sample;
use warpgeo::{continue_along, GeodesicState, IntegratorConfig, MonodromyOutcome, PlanePath, Status, SyntheticProblem, C64};

const TOL: f64 = 1e-10;

fn dist(a: &GeodesicState, b: &GeodesicState) -> f64 {
    let (a, b) = (a.to_affine(), b.to_affine());
    a.u.iter()
        .chain(&a.v)
        .zip(b.u.iter().chain(&b.v))
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

fn start(seed: u64) -> (warpgeo::WarpedMetric, GeodesicState, rand_chacha::ChaCha8Rng) {
    let mut g = rng(seed);
    let m = rand_metric(&mut g);
    let u = rand_ordinary_point(&m, &mut g, 0.1);
    let v: Vec<C64> = (0..m.dim()).map(|_| rand_c(&mut g, 0.2)).collect();
    (m, GeodesicState::new(c(0.0, 0.0), u, v), g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn reversed_path_returns_to_start(seed in any::<u64>()) {
        let (m, s, mut g) = start(seed);
        let vertices: Vec<C64> = std::iter::once(s.z).chain((0..3).map(|_| rand_c(&mut g, 2.0))).collect();
        let path = PlanePath::polyline(&vertices).unwrap();
        let there = continue_along(&m, &s, &path, TOL).unwrap();
        prop_assume!(there.status == Status::Completed);
        let back = continue_along(&m, there.last(), &path.reversed(), TOL).unwrap();
        prop_assume!(back.status == Status::Completed);
        let err = dist(back.last(), &s);
        prop_assert!(err <= 10.0 * TOL * (1.0 + 2.0 * path.length()), "error {err:e}");
    }

    /// A segment and a detour through a third vertex agree when the
    /// triangle between them is safe: straight continuations to a fan of
    /// points covering it complete, and every sample stays away from the
    /// singular loci with bounded velocity (geodesic branch points sit where
    /// the position runs into a locus).
    #[test]
    fn homotopic_paths_agree(seed in any::<u64>()) {
        let (m, s, mut g) = start(seed);
        let end = s.z + C64::from_polar(g.gen_range(0.5..2.0), g.gen_range(0.0..TAU));
        let via = 0.5 * (s.z + end) + (end - s.z) * c(0.0, g.gen_range(-0.5..0.5));
        const FAN: usize = 16;
        for i in 0..=FAN {
            for j in (usize::from(i == 0))..=(FAN - i) {
                let (a, b) = (i as f64 / FAN as f64, j as f64 / FAN as f64);
                let p = s.z + a * (end - s.z) + b * (via - s.z);
                let rec = continue_along(&m, &s, &PlanePath::segment(s.z, p), TOL).unwrap();
                prop_assume!(rec.status == Status::Completed);
                for x in &rec.samples {
                    let x = x.to_affine();
                    for k in 0..m.dim() {
                        prop_assume!(locus_distance(&m, k, x.u[k]) >= 0.05 && x.v[k].norm() <= 20.0);
                    }
                }
            }
        }
        let straight = continue_along(&m, &s, &PlanePath::segment(s.z, end), TOL).unwrap();
        let bent_path = PlanePath::polyline(&[s.z, via, end]).unwrap();
        let bent = continue_along(&m, &s, &bent_path, TOL).unwrap();
        prop_assume!(bent.status == Status::Completed);
        let err = dist(straight.last(), bent.last());
        prop_assert!(err <= 100.0 * TOL * (1.0 + bent_path.length()), "error {err:e}");
    }
}

fn on_circle(name: &str, r: f64, u: C64) -> (SyntheticProblem, Sample) {
    let p = SyntheticProblem::preset(name).unwrap();
    let s = Sample {
        z: c(r, 0.0),
        y: vec![u],
        charts: Vec::new(),
    };
    (p, s)
}

#[test]
fn monodromy_orders_on_three_radii() {
    let cfg = IntegratorConfig::with_tol(TOL);
    for r in [0.5, 1.0, 2.0] {
        let (p, s) = on_circle("sqrt", r, c(r.sqrt(), 0.0));
        let rep = monodromy_probe(&p.system, &s, c(0.0, 0.0), r, 8, &cfg).unwrap();
        assert_eq!(rep.outcome, MonodromyOutcome::ClosedAfter { turns: 2 }, "sqrt at r = {r}");

        let (p, s) = on_circle("identity", r, c(r, 0.0));
        let rep = monodromy_probe(&p.system, &s, c(0.0, 0.0), r, 8, &cfg).unwrap();
        assert_eq!(rep.outcome, MonodromyOutcome::ClosedAfter { turns: 1 }, "identity at r = {r}");

        let (p, s) = on_circle("log", r, c(r.ln(), 0.0));
        let rep = monodromy_probe(&p.system, &s, c(0.0, 0.0), r, 8, &cfg).unwrap();
        assert_eq!(rep.outcome, MonodromyOutcome::OpenAfter { turns: 8 }, "log at r = {r}");
        for inc in rep.increments() {
            assert!((inc[0] - c(0.0, 2.0 * PI)).norm() <= 1e-6, "log increment {}", inc[0]);
        }
    }
}
