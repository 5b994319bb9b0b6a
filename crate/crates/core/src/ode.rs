//! Adaptive Dormand-Prince 5(4) integration of holomorphic systems along
//! straight segments and circular arcs of the complex parameter plane.
//!
//! A leg is parametrized by arc length `t`, so the real-parameter system is
//! `dy/dt = f(z(t), y) z'(t)`. Error control is per unit step: a step of
//! length `h` is accepted when its embedded error estimate, scaled by
//! `1 + |y|`, is at most `tol * h`.

use serde::{Deserialize, Serialize};

use crate::metric::Chart;
use crate::rational::C64;

/// Something the right-hand side cannot be evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingularRhs;

/// Why an accepted state is unusable.
#[derive(Debug, Clone, PartialEq)]
pub enum Obstruction {
    DomainExit { factor: usize },
    SingularLocus { locus: String },
}

/// A holomorphic first-order system `dy/dz = f(z, y)`.
///
/// `charts` has one entry per position component; systems without chart
/// switching receive an empty slice.
pub trait OdeSystem: Sync {
    fn dim(&self) -> usize;

    /// Leading state components that form the position (the map into the
    /// target manifold); the rest are auxiliary, e.g. velocities.
    fn position_dim(&self) -> usize;

    fn rhs(&self, z: C64, y: &[C64], charts: &[Chart], dy: &mut [C64]) -> Result<(), SingularRhs>;

    /// Domain exits and approaches to singular loci, checked on accepted
    /// states. `guard_rel` is the relative guard distance.
    fn obstruction(&self, z: C64, y: &[C64], charts: &[Chart], guard_rel: f64)
        -> Option<Obstruction>;

    /// Moves components to a better chart. Returns true if anything changed.
    fn switch_charts(&self, _y: &mut [C64], _charts: &mut [Chart], _threshold: f64) -> bool {
        false
    }

    /// Rewrites `y` from `charts` into `target` charts where possible.
    fn convert_charts(&self, _y: &mut [C64], _charts: &mut [Chart], _target: &[Chart]) {}

    /// Components whose magnitude may exceed the blow-up threshold without
    /// it being a blow-up (e.g. coordinates on a sphere).
    fn blow_up_exempt(&self, _component: usize, _y: &[C64], _charts: &[Chart], _limit: f64) -> bool {
        false
    }
}

/// Terminal status of a continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Status {
    Completed,
    BlowUp { component: usize, z: C64 },
    SingularLocusHit { z: C64, locus: String },
    DomainExit { z: C64, factor: usize },
    StepUnderflow { z: C64 },
    LoopClosed,
    LoopOpen,
}

impl Status {
    /// Completed, or a closed path traversed without obstruction.
    pub fn is_success(&self) -> bool {
        matches!(self, Status::Completed | Status::LoopClosed | Status::LoopOpen)
    }

    /// Where the obstruction happened, if any.
    pub fn location(&self) -> Option<C64> {
        match self {
            Status::BlowUp { z, .. }
            | Status::SingularLocusHit { z, .. }
            | Status::DomainExit { z, .. }
            | Status::StepUnderflow { z } => Some(*z),
            _ => None,
        }
    }
}

/// Integration knobs. Thresholds are relative where noted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub tol: f64,
    /// `|y_i|` above this is a blow-up (`1/eps_blowup`).
    pub blow_up: f64,
    /// Guard distance to singular loci, relative to `1 + |u|`.
    pub guard_rel: f64,
    /// Minimum step, relative to `1 + |z|`.
    pub underflow_rel: f64,
    /// Sphere coordinates switch chart above this magnitude.
    pub chart_switch: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            blow_up: 1e8,
            guard_rel: 1e-6,
            underflow_rel: 1e-13,
            chart_switch: 10.0,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }
}

/// A straight segment or circular arc in the parameter plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Leg {
    Segment { from: C64, to: C64 },
    Arc { center: C64, radius: f64, angle_from: f64, angle_to: f64 },
}

impl Leg {
    pub fn length(&self) -> f64 {
        match *self {
            Leg::Segment { from, to } => (to - from).norm(),
            Leg::Arc { radius, angle_from, angle_to, .. } => radius * (angle_to - angle_from).abs(),
        }
    }

    pub fn start(&self) -> C64 {
        self.point(0.0)
    }

    pub fn end(&self) -> C64 {
        match *self {
            Leg::Segment { to, .. } => to,
            Leg::Arc { center, radius, angle_to, .. } => center + C64::from_polar(radius, angle_to),
        }
    }

    /// Point at arc length `t` from the start.
    pub fn point(&self, t: f64) -> C64 {
        match *self {
            Leg::Segment { from, to } => {
                let len = (to - from).norm();
                if len == 0.0 {
                    from
                } else {
                    from + (to - from) * (t / len)
                }
            }
            Leg::Arc { center, radius, angle_from, angle_to } => {
                let dir = (angle_to - angle_from).signum();
                center + C64::from_polar(radius, angle_from + dir * t / radius)
            }
        }
    }

    /// `dz/dt`, a unit complex number.
    pub fn tangent(&self, t: f64) -> C64 {
        match *self {
            Leg::Segment { from, to } => {
                let len = (to - from).norm();
                if len == 0.0 {
                    C64::new(1.0, 0.0)
                } else {
                    (to - from) / len
                }
            }
            Leg::Arc { radius, angle_from, angle_to, .. } => {
                let dir = (angle_to - angle_from).signum();
                let th = angle_from + dir * t / radius;
                C64::new(0.0, dir) * C64::from_polar(1.0, th)
            }
        }
    }
}

/// One recorded state.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub z: C64,
    pub y: Vec<C64>,
    pub charts: Vec<Chart>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub status: Status,
}

impl Trajectory {
    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }
}

/// Multiple of machine epsilon treated as rounding noise in the error estimate.
const ROUNDING_NOISE: f64 = 64.0 * f64::EPSILON;

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Stepper<'a, S: OdeSystem + ?Sized> {
    sys: &'a S,
    leg: Leg,
    k: Vec<Vec<C64>>,
    tmp: Vec<C64>,
}

impl<'a, S: OdeSystem + ?Sized> Stepper<'a, S> {
    fn new(sys: &'a S, leg: Leg) -> Self {
        let n = sys.dim();
        Self {
            sys,
            leg,
            k: vec![vec![C64::new(0.0, 0.0); n]; 7],
            tmp: vec![C64::new(0.0, 0.0); n],
        }
    }

    /// One trial step; returns the 5th-order solution and the scaled error.
    fn step(
        &mut self,
        t: f64,
        y: &[C64],
        charts: &[Chart],
        h: f64,
    ) -> Result<(Vec<C64>, f64), SingularRhs> {
        let n = y.len();
        for s in 0..7 {
            for i in 0..n {
                let mut acc = y[i];
                for j in 0..s {
                    if A[s][j] != 0.0 {
                        acc += self.k[j][i] * (h * A[s][j]);
                    }
                }
                self.tmp[i] = acc;
            }
            let ts = t + C[s] * h;
            let z = self.leg.point(ts);
            let dz = self.leg.tangent(ts);
            let ks = &mut self.k[s];
            self.sys.rhs(z, &self.tmp, charts, ks)?;
            for v in ks.iter_mut() {
                *v *= dz;
                if !v.is_finite() {
                    return Err(SingularRhs);
                }
            }
        }
        let mut out = vec![C64::new(0.0, 0.0); n];
        let mut err = 0.0_f64;
        let z_scale = 1.0 + self.leg.start().norm() + t + self.leg.point(t).norm();
        for i in 0..n {
            let mut acc = y[i];
            let mut e = C64::new(0.0, 0.0);
            let mut kmax = 0.0_f64;
            let mut kspread = 0.0_f64;
            for s in 0..7 {
                acc += self.k[s][i] * (h * B[s]);
                e += self.k[s][i] * (h * E[s]);
                kmax = kmax.max(self.k[s][i].norm());
                kspread = kspread.max((self.k[s][i] - self.k[0][i]).norm());
            }
            if !acc.is_finite() {
                return Err(SingularRhs);
            }
            let scale = 1.0 + y[i].norm().max(acc.norm());
            // Discount the rounding noise of the estimate itself: cancellation
            // among the stages, and the absolute rounding of the stage
            // abscissas, which is amplified by |df/dz| near singularities.
            let noise = ROUNDING_NOISE * (h * kmax + z_scale * kspread);
            err = err.max((e.norm() - noise).max(0.0) / scale);
            out[i] = acc;
        }
        Ok((out, err))
    }
}

fn blow_up_component<S: OdeSystem + ?Sized>(
    sys: &S,
    y: &[C64],
    charts: &[Chart],
    limit: f64,
) -> Option<usize> {
    y.iter()
        .enumerate()
        .find(|(i, v)| v.norm() > limit && !sys.blow_up_exempt(*i, y, charts, limit))
        .map(|(i, _)| i)
}

/// Event raised by a trial state, after chart normalization.
fn event_at<S: OdeSystem + ?Sized>(
    sys: &S,
    z: C64,
    y: &mut [C64],
    charts: &mut [Chart],
    cfg: &IntegratorConfig,
) -> Option<Status> {
    sys.switch_charts(y, charts, cfg.chart_switch);
    if let Some(component) = blow_up_component(sys, y, charts, cfg.blow_up) {
        return Some(Status::BlowUp { component, z });
    }
    match sys.obstruction(z, y, charts, cfg.guard_rel) {
        Some(Obstruction::DomainExit { factor }) => Some(Status::DomainExit { z, factor }),
        Some(Obstruction::SingularLocus { locus }) => Some(Status::SingularLocusHit { z, locus }),
        None => None,
    }
}

/// Integrates along one leg from `start` (which must sit at `leg.start()`).
pub fn integrate_leg<S: OdeSystem + ?Sized>(
    sys: &S,
    leg: Leg,
    start: Sample,
    cfg: &IntegratorConfig,
) -> Trajectory {
    let total = leg.length();
    let mut stepper = Stepper::new(sys, leg);
    let mut t = 0.0_f64;
    let mut y = start.y.clone();
    let mut charts = start.charts.clone();
    let mut samples = vec![start];
    let mut h = total.min(0.05).max(total * 1e-3);
    let mut err_prev = 1.0_f64;
    let mut steps = 0usize;

    while total - t > 1e-14 * total.max(1.0) {
        let z = leg.point(t);
        steps += 1;
        if h < cfg.underflow_rel * (1.0 + z.norm()) || steps > cfg.max_steps {
            return Trajectory {
                samples,
                status: Status::StepUnderflow { z },
            };
        }
        let h_try = h.min(total - t);
        let (y_new, err) = match stepper.step(t, &y, &charts, h_try) {
            Ok(r) => r,
            Err(SingularRhs) => {
                h = h_try * 0.25;
                continue;
            }
        };
        let ratio = err / (cfg.tol * h_try);
        if ratio > 1.0 {
            h = h_try * (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9);
            continue;
        }

        let z_new = leg.point(t + h_try);
        let mut y_trial = y_new;
        let mut c_trial = charts.clone();
        if event_at(sys, z_new, &mut y_trial, &mut c_trial, cfg).is_some() {
            // Bisect the step length to localize the first event.
            let (mut lo, mut hi) = (0.0_f64, h_try);
            let mut hit = (y_trial, c_trial);
            for _ in 0..60 {
                if hi - lo <= 1e-13 * (1.0 + z.norm()) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                let probe = stepper.step(t, &y, &charts, mid);
                match probe {
                    Ok((ym, _)) => {
                        let mut ym = ym;
                        let mut cm = charts.clone();
                        if event_at(sys, leg.point(t + mid), &mut ym, &mut cm, cfg).is_some() {
                            hi = mid;
                            hit = (ym, cm);
                        } else {
                            lo = mid;
                        }
                    }
                    Err(SingularRhs) => hi = mid,
                }
            }
            let z_hit = leg.point(t + hi);
            let (mut yh, mut ch) = hit;
            let status = event_at(sys, z_hit, &mut yh, &mut ch, cfg).unwrap_or(Status::StepUnderflow { z: z_hit });
            samples.push(Sample {
                z: z_hit,
                y: yh,
                charts: ch,
            });
            return Trajectory { samples, status };
        }

        t += h_try;
        y = y_trial;
        charts = c_trial;
        samples.push(Sample {
            z: z_new,
            y: y.clone(),
            charts: charts.clone(),
        });
        // PI controller
        let r = ratio.max(1e-10);
        let fac = 0.9 * r.powf(-0.7 / 5.0) * err_prev.powf(0.4 / 5.0);
        err_prev = r;
        h = h_try * fac.clamp(0.2, 5.0);
    }

    // Snap the final sample onto the exact leg end.
    if let Some(last) = samples.last_mut() {
        last.z = leg.end();
    }
    Trajectory {
        samples,
        status: Status::Completed,
    }
}

/// Integrates a chain of legs, stopping at the first obstruction.
pub fn integrate_legs<S: OdeSystem + ?Sized>(
    sys: &S,
    legs: &[Leg],
    start: Sample,
    cfg: &IntegratorConfig,
) -> Trajectory {
    let mut samples = vec![start];
    for leg in legs {
        let from = samples.pop().expect("non-empty");
        let part = integrate_leg(sys, *leg, from, cfg);
        samples.extend(part.samples);
        if part.status != Status::Completed {
            return Trajectory {
                samples,
                status: part.status,
            };
        }
    }
    Trajectory {
        samples,
        status: Status::Completed,
    }
}
