//! The geodesic system of a warped metric, its first integrals, and
//! continuation of geodesics along plane paths.
//!
//! For `b1(u1) du1^2 + sum_k a_k(u1) f_k(uk) duk^2` the geodesic equations are
//!
//! ```text
//! u1'' = -(b1'/2b1) (u1')^2 + sum_l (a_l' f_l / 2b1) (ul')^2
//! uk'' = -(fk'/2fk) (uk')^2 - (ak'/ak) uk' u1'
//! ```
//!
//! and they admit `N` first integrals. If `u1' != 0` (case A):
//! `Ak = (uk')^2 fk ak^2` and `A1 = (u1')^2 b1 + sum_l Al/al`.
//! If `u1' = 0` (case B), `u1` stays constant, `A1 = u1` and
//! `Ak = (uk')^2 fk`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{GeodesicError, MetricError};
use crate::metric::{Chart, FactorKind, WarpedMetric};
use crate::ode::{integrate_legs, IntegratorConfig, Obstruction, OdeSystem, Sample, SingularRhs, Status};
use crate::path::PlanePath;
use crate::rational::C64;

/// Parameter value, position and velocity `du/dz`.
///
/// `charts` flags sphere components held in the `w = 1/u` chart; it is
/// omitted from JSON when every component is affine, and an empty list
/// means all-affine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub z: C64,
    pub u: Vec<C64>,
    pub v: Vec<C64>,
    #[serde(default, skip_serializing_if = "all_affine")]
    pub charts: Vec<Chart>,
}

fn all_affine(c: &[Chart]) -> bool {
    c.iter().all(|&c| c == Chart::Affine)
}

impl GeodesicState {
    pub fn new(z: C64, u: Vec<C64>, v: Vec<C64>) -> Self {
        let n = u.len();
        Self {
            z,
            u,
            v,
            charts: vec![Chart::Affine; n],
        }
    }

    /// Per-component charts, filling in the all-affine default.
    pub fn charts(&self) -> Vec<Chart> {
        if self.charts.len() == self.u.len() {
            self.charts.clone()
        } else {
            vec![Chart::Affine; self.u.len()]
        }
    }

    /// The same state with every component in the affine chart.
    /// Components at `u = infinity` stay in the `w` chart.
    pub fn to_affine(&self) -> Self {
        let mut out = self.clone();
        out.charts = self.charts();
        for i in 0..out.u.len() {
            if out.charts[i] == Chart::Inverted && out.u[i].norm() > 0.0 {
                let w = out.u[i];
                out.u[i] = w.inv();
                out.v[i] = -self.v[i] / (w * w);
                out.charts[i] = Chart::Affine;
            }
        }
        out
    }

    fn to_sample(&self) -> Sample {
        let mut y = self.u.clone();
        y.extend_from_slice(&self.v);
        Sample {
            z: self.z,
            y,
            charts: self.charts(),
        }
    }

    fn from_sample(s: &Sample) -> Self {
        let n = s.y.len() / 2;
        Self {
            z: s.z,
            u: s.y[..n].to_vec(),
            v: s.y[n..].to_vec(),
            charts: s.charts.clone(),
        }
    }
}

/// The geodesic equations as a first-order system in `(u, v)`.
pub struct GeodesicSystem<'a> {
    metric: &'a WarpedMetric,
}

impl<'a> GeodesicSystem<'a> {
    pub fn new(metric: &'a WarpedMetric) -> Self {
        Self { metric }
    }

    pub fn metric(&self) -> &WarpedMetric {
        self.metric
    }
}

fn acceleration(m: &WarpedMetric, u: &[C64], v: &[C64], charts: &[Chart], out: &mut [C64]) -> Option<()> {
    let c = m.raw_coefficient_values(u, charts)?;
    let two_b1 = 2.0 * c.b1;
    let mut acc1 = -c.db1 / two_b1 * v[0] * v[0];
    for k in 0..m.dim() - 1 {
        let vk = v[k + 1];
        acc1 += c.da[k] * c.f[k] / two_b1 * vk * vk;
        out[k + 1] = -c.df[k] / (2.0 * c.f[k]) * vk * vk - c.da[k] / c.a[k] * vk * v[0];
    }
    out[0] = acc1;
    Some(())
}

impl OdeSystem for GeodesicSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.metric.dim()
    }

    fn position_dim(&self) -> usize {
        self.metric.dim()
    }

    fn rhs(&self, _z: C64, y: &[C64], charts: &[Chart], dy: &mut [C64]) -> Result<(), SingularRhs> {
        let n = self.metric.dim();
        let (u, v) = y.split_at(n);
        dy[..n].copy_from_slice(v);
        acceleration(self.metric, u, v, charts, &mut dy[n..]).ok_or(SingularRhs)
    }

    fn obstruction(&self, _z: C64, y: &[C64], charts: &[Chart], guard_rel: f64) -> Option<Obstruction> {
        let n = self.metric.dim();
        for (i, kind) in self.metric.factors().iter().enumerate() {
            if *kind == FactorKind::Disc && y[i].norm() >= 1.0 {
                return Some(Obstruction::DomainExit { factor: i });
            }
        }
        for i in 0..n {
            let ui = y[i];
            let guard = guard_rel * (1.0 + ui.norm());
            if let Some(l) = self.metric.loci(i, charts[i]).iter().find(|l| (l.at - ui).norm() <= guard) {
                return Some(Obstruction::SingularLocus { locus: l.label() });
            }
        }
        if self.metric.raw_coefficient_values(&y[..n], charts).is_none() {
            return Some(Obstruction::SingularLocus {
                locus: "coefficient zero or pole".into(),
            });
        }
        None
    }

    fn switch_charts(&self, y: &mut [C64], charts: &mut [Chart], threshold: f64) -> bool {
        let n = self.metric.dim();
        let mut changed = false;
        for (i, kind) in self.metric.factors().iter().enumerate() {
            if *kind == FactorKind::Sphere && y[i].norm() > threshold {
                let u = y[i];
                y[i] = u.inv();
                y[n + i] = -y[n + i] / (u * u);
                charts[i] = charts[i].flip();
                changed = true;
            }
        }
        changed
    }

    fn convert_charts(&self, y: &mut [C64], charts: &mut [Chart], target: &[Chart]) {
        let n = self.metric.dim();
        for i in 0..n {
            if charts[i] != target[i] && y[i].norm() > 0.0 {
                let u = y[i];
                y[i] = u.inv();
                y[n + i] = -y[n + i] / (u * u);
                charts[i] = target[i];
            }
        }
    }

    fn blow_up_exempt(&self, component: usize, y: &[C64], _charts: &[Chart], limit: f64) -> bool {
        let n = self.metric.dim();
        let i = component % n;
        if self.metric.factors()[i] != FactorKind::Sphere {
            return false;
        }
        if component < n {
            return true;
        }
        // Velocity in the other chart.
        let u = y[i];
        u.norm() > 0.0 && (y[component] / (u * u)).norm() <= limit
    }
}

fn check_state(m: &WarpedMetric, s: &GeodesicState) -> Result<(), MetricError> {
    let n = m.dim();
    for len in [s.u.len(), s.v.len()] {
        if len != n {
            return Err(MetricError::DimensionMismatch { expected: n, got: len });
        }
    }
    if !s.charts.is_empty() && s.charts.len() != n {
        return Err(MetricError::DimensionMismatch {
            expected: n,
            got: s.charts.len(),
        });
    }
    Ok(())
}

/// `u''` at a metrically ordinary state.
pub fn geodesic_rhs(m: &WarpedMetric, s: &GeodesicState) -> Result<Vec<C64>, MetricError> {
    check_state(m, s)?;
    let charts = s.charts();
    // Validates that the point is ordinary.
    m.christoffel_in(&s.u, &charts)?;
    let mut out = vec![C64::new(0.0, 0.0); m.dim()];
    acceleration(m, &s.u, &s.v, &charts, &mut out).ok_or_else(|| MetricError::SingularMetricPoint {
        reason: "coefficient zero or pole".into(),
    })?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IntegralCase {
    /// `u1` non-constant.
    A,
    /// `u1` constant.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstIntegrals {
    pub case: IntegralCase,
    /// `A_1..A_N`.
    pub a: Vec<C64>,
}

/// First integrals at a metrically ordinary state; case B iff `v1 = 0`.
pub fn first_integrals(m: &WarpedMetric, s: &GeodesicState) -> Result<FirstIntegrals, MetricError> {
    let case = if s.v.first().is_some_and(|v| *v == C64::new(0.0, 0.0)) {
        IntegralCase::B
    } else {
        IntegralCase::A
    };
    integrals_in_case(m, s, case)
}

/// First integrals evaluated with the formulas of a fixed case.
pub fn integrals_in_case(
    m: &WarpedMetric,
    s: &GeodesicState,
    case: IntegralCase,
) -> Result<FirstIntegrals, MetricError> {
    check_state(m, s)?;
    let charts = s.charts();
    let c = m.coefficient_values(&s.u, &charts)?;
    let n = m.dim();
    let mut a = vec![C64::new(0.0, 0.0); n];
    match case {
        IntegralCase::A => {
            let mut a1 = s.v[0] * s.v[0] * c.b1;
            for k in 0..n - 1 {
                let vk = s.v[k + 1];
                a[k + 1] = vk * vk * c.f[k] * c.a[k] * c.a[k];
                a1 += a[k + 1] / c.a[k];
            }
            a[0] = a1;
        }
        IntegralCase::B => {
            a[0] = match charts[0] {
                Chart::Affine => s.u[0],
                Chart::Inverted => s.u[0].inv(),
            };
            for k in 0..n - 1 {
                let vk = s.v[k + 1];
                a[k + 1] = vk * vk * c.f[k];
            }
        }
    }
    Ok(FirstIntegrals { case, a })
}

/// A sampled continuation and how it ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationRecord {
    pub path: PlanePath,
    pub samples: Vec<GeodesicState>,
    pub status: Status,
    pub drift: Option<f64>,
}

impl ContinuationRecord {
    pub fn first(&self) -> &GeodesicState {
        &self.samples[0]
    }

    pub fn last(&self) -> &GeodesicState {
        self.samples.last().expect("record has at least one sample")
    }

    /// Samples as CSV: `z_re, z_im, u1_re, u1_im, ..., v1_re, v1_im, ...`.
    pub fn to_csv(&self) -> String {
        let n = self.first().u.len();
        let mut out = String::from("z_re,z_im");
        for p in ["u", "v"] {
            for i in 1..=n {
                let _ = write!(out, ",{p}{i}_re,{p}{i}_im");
            }
        }
        out.push('\n');
        for s in &self.samples {
            let _ = write!(out, "{},{}", s.z.re, s.z.im);
            for x in s.u.iter().chain(&s.v) {
                let _ = write!(out, ",{},{}", x.re, x.im);
            }
            out.push('\n');
        }
        out
    }
}

/// Validates the tolerance range.
pub fn check_tol(tol: f64) -> Result<(), GeodesicError> {
    if (1e-12..=1e-3).contains(&tol) {
        Ok(())
    } else {
        Err(GeodesicError::InvalidTolerance(tol))
    }
}

/// Continues a geodesic along `path` with explicit integrator settings.
/// Stops at the first obstruction; `drift` is filled in.
pub fn trace(
    m: &WarpedMetric,
    s: &GeodesicState,
    path: &PlanePath,
    cfg: &IntegratorConfig,
) -> Result<ContinuationRecord, GeodesicError> {
    check_tol(cfg.tol)?;
    check_state(m, s)?;
    if (path.start() - s.z).norm() > 1e-12 * (1.0 + s.z.norm()) {
        return Err(GeodesicError::PathStartMismatch);
    }
    let charts = s.charts();
    if !m.is_ordinary_in(&s.u, &charts) {
        // Reuse the metric's reason string.
        m.christoffel_in(&s.u, &charts)?;
    }
    let sys = GeodesicSystem::new(m);
    let mut start = s.to_sample();
    start.z = path.start();
    let tr = integrate_legs(&sys, &path.geometric_legs(), start, cfg);
    let mut rec = ContinuationRecord {
        path: path.clone(),
        samples: tr.samples.iter().map(GeodesicState::from_sample).collect(),
        status: tr.status,
        drift: None,
    };
    rec.drift = Some(conservation_drift(m, &rec));
    Ok(rec)
}

/// Integrates along the straight segment from `s.z` to `z_target`.
pub fn integrate_segment(
    m: &WarpedMetric,
    s: &GeodesicState,
    z_target: C64,
    tol: f64,
) -> Result<ContinuationRecord, GeodesicError> {
    trace(m, s, &PlanePath::segment(s.z, z_target), &IntegratorConfig::with_tol(tol))
}

/// Largest relative change of the first integrals along a record,
/// `max |A_k(s) - A_k(0)| / (1 + |A_k(0)|)`, using the start's case.
/// The localized terminal state of an obstructed record is skipped.
pub fn conservation_drift(m: &WarpedMetric, rec: &ContinuationRecord) -> f64 {
    let Some(first) = rec.samples.first() else {
        return 0.0;
    };
    let Ok(init) = first_integrals(m, first) else {
        return f64::NAN;
    };
    let upto = if rec.status.is_success() {
        rec.samples.len()
    } else {
        rec.samples.len().saturating_sub(1)
    };
    let mut drift = 0.0_f64;
    for s in &rec.samples[1..upto.max(1)] {
        if let Ok(now) = integrals_in_case(m, s, init.case) {
            for (x, x0) in now.a.iter().zip(&init.a) {
                drift = drift.max((x - x0).norm() / (1.0 + x0.norm()));
            }
        }
    }
    drift
}
