//! Shared generators and independent oracles for the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use warpgeo::{Chart, ComplexPoly, FactorKind, RationalFn, WarpedMetric, C64};

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_c(rng: &mut ChaCha8Rng, r: f64) -> C64 {
    c(rng.gen_range(-r..r), rng.gen_range(-r..r))
}

pub fn rand_poly(rng: &mut ChaCha8Rng, max_deg: usize) -> ComplexPoly {
    let d = rng.gen_range(0..=max_deg);
    let mut coeffs: Vec<C64> = (0..=d).map(|_| rand_c(rng, 1.0)).collect();
    // Keep the leading coefficient away from zero.
    coeffs[d] += c(0.5, 0.0);
    ComplexPoly::new(coeffs)
}

pub fn rand_rational(rng: &mut ChaCha8Rng, max_deg: usize) -> RationalFn {
    loop {
        if let Ok(r) = RationalFn::new(rand_poly(rng, max_deg), rand_poly(rng, max_deg)) {
            if r.is_nonzero() {
                return r;
            }
        }
    }
}

/// A random warped metric on 1 to 3 plane factors (the first factor is a
/// disc with probability 1/4) with coefficients of degree at most 2.
pub fn rand_metric(rng: &mut ChaCha8Rng) -> WarpedMetric {
    loop {
        let n = rng.gen_range(1..=3);
        let mut factors = vec![FactorKind::Plane; n];
        if rng.gen_bool(0.25) {
            factors[0] = FactorKind::Disc;
        }
        let b1 = rand_rational(rng, 2);
        let a = (1..n).map(|_| rand_rational(rng, 2)).collect();
        let f = (1..n).map(|_| rand_rational(rng, 2)).collect();
        if let Ok(m) = WarpedMetric::new(factors, b1, a, f) {
            return m;
        }
    }
}

/// Distance from `z` to the singular set of component `i`.
pub fn locus_distance(m: &WarpedMetric, i: usize, z: C64) -> f64 {
    m.loci(i, Chart::Affine)
        .iter()
        .map(|l| (l.at - z).norm())
        .fold(f64::INFINITY, f64::min)
}

/// A point at distance at least `margin` from every singular set, inside
/// the disc where required.
pub fn rand_ordinary_point(m: &WarpedMetric, rng: &mut ChaCha8Rng, margin: f64) -> Vec<C64> {
    (0..m.dim())
        .map(|i| loop {
            let z = rand_c(rng, 1.5);
            let inside = m.factors()[i] != FactorKind::Disc || z.norm() < 0.9 - margin;
            if inside && locus_distance(m, i, z) >= margin {
                return z;
            }
        })
        .collect()
}

/// `f'(z)` by the Cauchy integral over a circle of radius `rho`
/// (trapezoid rule, spectrally accurate for holomorphic `f`).
pub fn cauchy_derivative(f: impl Fn(C64) -> C64, z: C64, rho: f64) -> C64 {
    const N: usize = 32;
    let mut acc = c(0.0, 0.0);
    for k in 0..N {
        let w = C64::from_polar(1.0, 2.0 * PI * k as f64 / N as f64);
        acc += f(z + rho * w) * w.conj();
    }
    acc / (N as f64 * rho)
}

/// Christoffel symbols `G[k][i][j]` from the general formula
/// `2 G^k_ij = sum_m g^km (-d_m g_ij + d_j g_im + d_i g_jm)`, with the
/// metric derivatives taken numerically from `WarpedMetric::eval`.
pub fn christoffel_oracle(m: &WarpedMetric, u: &[C64], rho: f64) -> Vec<Vec<Vec<C64>>> {
    let n = m.dim();
    let g = |p: &[C64]| -> Vec<C64> {
        m.eval(p)
            .expect("ordinary point")
            .into_iter()
            .map(|e| e.finite().expect("finite metric"))
            .collect()
    };
    let g0 = g(u);
    // dg[m][i] = d g_ii / d u_m
    let dg: Vec<Vec<C64>> = (0..n)
        .map(|mm| {
            (0..n)
                .map(|i| {
                    cauchy_derivative(
                        |z| {
                            let mut p = u.to_vec();
                            p[mm] = z;
                            g(&p)[i]
                        },
                        u[mm],
                        rho,
                    )
                })
                .collect()
        })
        .collect();
    let d = |mm: usize, i: usize, j: usize| if i == j { dg[mm][i] } else { c(0.0, 0.0) };
    (0..n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| (-d(k, i, j) + d(j, i, k) + d(i, j, k)) / (2.0 * g0[k]))
                        .collect()
                })
                .collect()
        })
        .collect()
}
