//! Continuation along plane paths, monodromy loops and classification of
//! the singularities that stop a continuation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::GeodesicError;
use crate::geodesic::{check_tol, trace, ContinuationRecord, GeodesicState, GeodesicSystem};
use crate::metric::WarpedMetric;
use crate::ode::{integrate_legs, IntegratorConfig, OdeSystem, Sample, Status, Trajectory};
use crate::path::PlanePath;
use crate::rational::C64;

/// Shrink factor between successive monodromy circles.
const RADIUS_SHRINK: f64 = 4.0;
const MONODROMY_TRIALS: usize = 3;
const MAX_TURNS: usize = 8;
/// Closest approach to the classified point, relative to `1 + |z*|`.
const APPROACH_STOP: f64 = 1e-6;

/// Relative distance between two states, per component `|a - b| / (1 + |b|)`.
fn state_distance(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm() / (1.0 + y.norm()))
        .fold(0.0, f64::max)
}

/// Continues a general system along a path.
pub fn continue_system<S: OdeSystem + ?Sized>(
    sys: &S,
    start: &Sample,
    path: &PlanePath,
    cfg: &IntegratorConfig,
) -> Trajectory {
    let mut s = start.clone();
    s.z = path.start();
    if s.charts.is_empty() && sys.position_dim() > 0 {
        s.charts = vec![Default::default(); sys.position_dim()];
    }
    integrate_legs(sys, &path.geometric_legs(), s, cfg)
}

/// Continues a geodesic along `path`. A closed path that is traversed
/// without obstruction ends in `loop_closed` or `loop_open` depending on
/// whether the state returns to its start within `100 tol (1 + length)`.
pub fn continue_along(
    m: &WarpedMetric,
    s: &GeodesicState,
    path: &PlanePath,
    tol: f64,
) -> Result<ContinuationRecord, GeodesicError> {
    continue_along_with(m, s, path, &IntegratorConfig::with_tol(tol))
}

pub fn continue_along_with(
    m: &WarpedMetric,
    s: &GeodesicState,
    path: &PlanePath,
    cfg: &IntegratorConfig,
) -> Result<ContinuationRecord, GeodesicError> {
    let mut rec = trace(m, s, path, cfg)?;
    if rec.status == Status::Completed && path.is_closed() {
        let sys = GeodesicSystem::new(m);
        let first = rec.first();
        let last = rec.last();
        let (mut y, mut charts) = (pack(last), last.charts());
        sys.convert_charts(&mut y, &mut charts, &first.charts());
        let closed = state_distance(&y, &pack(first)) <= 100.0 * cfg.tol * (1.0 + path.length());
        rec.status = if closed { Status::LoopClosed } else { Status::LoopOpen };
    }
    Ok(rec)
}

fn pack(s: &GeodesicState) -> Vec<C64> {
    let mut y = s.u.clone();
    y.extend_from_slice(&s.v);
    y
}

fn unpack(sample: &Sample) -> GeodesicState {
    let n = sample.y.len() / 2;
    GeodesicState {
        z: sample.z,
        u: sample.y[..n].to_vec(),
        v: sample.y[n..].to_vec(),
        charts: sample.charts.clone(),
    }
}

fn geodesic_sample(s: &GeodesicState) -> Sample {
    Sample {
        z: s.z,
        y: pack(s),
        charts: s.charts(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonodromyOutcome {
    ClosedAfter { turns: usize },
    OpenAfter { turns: usize },
    Blocked { status: Status },
}

/// Result of looping around a point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromyReport {
    pub center: C64,
    pub radius: f64,
    pub outcome: MonodromyOutcome,
    /// The state at the loop's base point before the first turn and after
    /// each completed turn, in the initial charts.
    pub turn_states: Vec<Vec<C64>>,
}

impl MonodromyReport {
    /// Differences between successive turn states.
    pub fn increments(&self) -> Vec<Vec<C64>> {
        self.turn_states
            .windows(2)
            .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| a - b).collect())
            .collect()
    }
}

/// Loops counter-clockwise around `center` starting from `start`, which
/// must lie on the circle of the given radius. After each turn the state is
/// compared with the initial one within `100 tol (1 + 2 pi r)`.
pub fn monodromy_probe<S: OdeSystem + ?Sized>(
    sys: &S,
    start: &Sample,
    center: C64,
    radius: f64,
    max_turns: usize,
    cfg: &IntegratorConfig,
) -> Result<MonodromyReport, GeodesicError> {
    check_tol(cfg.tol)?;
    if ((start.z - center).norm() - radius).abs() > 1e-9 * (1.0 + radius) {
        return Err(GeodesicError::PathStartMismatch);
    }
    let circle = PlanePath::circle(center, start.z, 1.0).map_err(|_| GeodesicError::PathStartMismatch)?;
    let tol = 100.0 * cfg.tol * (1.0 + 2.0 * PI * radius);
    let mut at = start.clone();
    if at.charts.is_empty() {
        at.charts = vec![Default::default(); sys.position_dim()];
    }
    let base_charts = at.charts.clone();
    let y0 = at.y.clone();
    let mut turn_states = vec![y0.clone()];
    for turn in 1..=max_turns {
        let tr = continue_system(sys, &at, &circle, cfg);
        if tr.status != Status::Completed {
            return Ok(MonodromyReport {
                center,
                radius,
                outcome: MonodromyOutcome::Blocked { status: tr.status },
                turn_states,
            });
        }
        at = tr.last().clone();
        at.z = start.z;
        let (mut y, mut charts) = (at.y.clone(), at.charts.clone());
        sys.convert_charts(&mut y, &mut charts, &base_charts);
        let closed = state_distance(&y, &y0) <= tol;
        turn_states.push(y);
        if closed {
            return Ok(MonodromyReport {
                center,
                radius,
                outcome: MonodromyOutcome::ClosedAfter { turns: turn },
                turn_states,
            });
        }
    }
    Ok(MonodromyReport {
        center,
        radius,
        outcome: MonodromyOutcome::OpenAfter { turns: max_turns },
        turn_states,
    })
}

/// Monodromy of a geodesic around `center`.
pub fn monodromy_probe_geodesic(
    m: &WarpedMetric,
    s: &GeodesicState,
    center: C64,
    radius: f64,
    max_turns: usize,
    tol: f64,
) -> Result<MonodromyReport, GeodesicError> {
    monodromy_probe(
        &GeodesicSystem::new(m),
        &geodesic_sample(s),
        center,
        radius,
        max_turns,
        &IntegratorConfig::with_tol(tol),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SingularityKind {
    Regular,
    Pole { order_estimate: u32 },
    Logarithmic,
    RemovableLogarithmic,
    BoundaryBlocked,
    Undetermined,
}

/// Diagnostics behind a verdict.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Evidence {
    /// How the straight approach to the point ended.
    pub approach: Option<Status>,
    pub monodromy: Vec<MonodromySummary>,
    /// Common closure turn count, if every loop closed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sheets: Option<usize>,
    /// Position component growing fastest towards the point, and its fit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_component: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    /// Per position component: converges (true) or not under shrinking loops.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub converging: Vec<bool>,
    /// Some component diverges while others converge.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub polar: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonodromySummary {
    pub radius: f64,
    pub outcome: MonodromyOutcome,
    /// Largest per-turn displacement of each position component.
    pub spread: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularityVerdict {
    #[serde(flatten)]
    pub kind: SingularityKind,
    pub location: C64,
    pub evidence: Evidence,
}

/// Geodesic wrapper of [`classify_system`].
pub fn classify_singularity(
    m: &WarpedMetric,
    s: &GeodesicState,
    z_star: C64,
    tol: f64,
) -> Result<SingularityVerdict, GeodesicError> {
    check_tol(tol)?;
    let charts = s.charts();
    if !m.is_ordinary_in(&s.u, &charts) {
        m.christoffel_in(&s.u, &charts)?;
    }
    Ok(classify_system(
        &GeodesicSystem::new(m),
        &geodesic_sample(s),
        z_star,
        &IntegratorConfig::with_tol(tol),
    ))
}

/// Classifies the singularity near `z_star` of the continuation of `start`.
///
/// 1. Continue straight towards `z_star`, stopping `1e-6 (1 + |z*|)` short
///    of it; a domain exit means `boundary_blocked`.
/// 2. Loop around the point on three shrinking circles.
/// 3. All loops close after `m` turns: fit `log|1/u_i|` against
///    `log|z - z*|` over the last decade of the approach. A position
///    component growing like `|z - z*|^-s` gives a pole of order
///    `round(m s)` in the local uniformizer, rejected if the fit residual
///    exceeds 0.1. Otherwise the point is regular (possibly a branch point,
///    reported through `sheets`).
/// 4. No loop closes: `removable_logarithmic` if every position component
///    settles as the loops shrink, otherwise `logarithmic`.
/// 5. Anything else is `undetermined`.
pub fn classify_system<S: OdeSystem + ?Sized>(
    sys: &S,
    start: &Sample,
    z_star: C64,
    cfg: &IntegratorConfig,
) -> SingularityVerdict {
    let mut ev = Evidence::default();
    let verdict = |kind, location, ev| SingularityVerdict {
        kind,
        location,
        evidence: ev,
    };

    let stop = APPROACH_STOP * (1.0 + z_star.norm());
    let d_start = (start.z - z_star).norm();
    if d_start <= 100.0 * stop {
        ev.note = Some("start is too close to the point".into());
        return verdict(SingularityKind::Undetermined, z_star, ev);
    }
    let near = z_star + (start.z - z_star) * (stop / d_start);
    let approach = continue_system(sys, start, &PlanePath::segment(start.z, near), cfg);
    ev.approach = Some(approach.status.clone());
    let loc = match approach.status {
        Status::Completed => z_star,
        Status::DomainExit { z, .. } => return verdict(SingularityKind::BoundaryBlocked, z, ev),
        ref s => s.location().unwrap_or(z_star),
    };
    // Blow-ups of order k are detected about (1/blow_up)^(1/k) short of the
    // point, so "near" is relative to the approach length.
    let center = if (loc - z_star).norm() <= 0.05 * d_start {
        z_star
    } else {
        ev.note = Some("obstruction found away from the requested point".into());
        loc
    };
    let d_end = (loc - center).norm().max(stop);

    let d0 = (start.z - center).norm();
    let dir = (start.z - center) / d0;
    let npos = sys.position_dim();
    let mut r = (0.25 * d0).min(0.5);
    let mut reports = Vec::with_capacity(MONODROMY_TRIALS);
    for _ in 0..MONODROMY_TRIALS {
        let on_circle = center + dir * r;
        let lead = continue_system(sys, start, &PlanePath::segment(start.z, on_circle), cfg);
        let report = if lead.status == Status::Completed {
            let mut s = lead.last().clone();
            s.z = on_circle;
            match monodromy_probe(sys, &s, center, r, MAX_TURNS, cfg) {
                Ok(rep) => rep,
                Err(_) => MonodromyReport {
                    center,
                    radius: r,
                    outcome: MonodromyOutcome::Blocked {
                        status: Status::StepUnderflow { z: on_circle },
                    },
                    turn_states: vec![],
                },
            }
        } else {
            MonodromyReport {
                center,
                radius: r,
                outcome: MonodromyOutcome::Blocked { status: lead.status },
                turn_states: vec![],
            }
        };
        ev.monodromy.push(MonodromySummary {
            radius: r,
            outcome: report.outcome.clone(),
            spread: spread(&report, npos),
        });
        reports.push(report);
        r /= RADIUS_SHRINK;
    }

    let closed: Vec<usize> = reports
        .iter()
        .filter_map(|r| match r.outcome {
            MonodromyOutcome::ClosedAfter { turns } => Some(turns),
            _ => None,
        })
        .collect();
    let open = reports
        .iter()
        .filter(|r| matches!(r.outcome, MonodromyOutcome::OpenAfter { .. }))
        .count();

    if closed.len() == reports.len() {
        let sheets = closed[0];
        if closed.iter().any(|&m| m != sheets) {
            ev.note = Some("closure turn count depends on the loop radius".into());
            return verdict(SingularityKind::Undetermined, center, ev);
        }
        ev.sheets = Some(sheets);
        return match approach_fit(sys, start, center, dir, d_end, cfg) {
            None => {
                ev.note = Some("could not resample the approach".into());
                verdict(SingularityKind::Undetermined, center, ev)
            }
            Some((component, slope, residual)) => {
                ev.fit_component = Some(component);
                ev.slope = Some(slope);
                ev.residual = Some(residual);
                let order = (sheets as f64 * slope).round();
                if residual > 0.1 {
                    verdict(SingularityKind::Undetermined, center, ev)
                } else if order < 1.0 {
                    verdict(SingularityKind::Regular, center, ev)
                } else {
                    verdict(
                        SingularityKind::Pole {
                            order_estimate: order as u32,
                        },
                        center,
                        ev,
                    )
                }
            }
        };
    }

    if open == reports.len() {
        let first = &ev.monodromy[0];
        let last = &ev.monodromy[reports.len() - 1];
        let b_first = &reports[0].turn_states[0];
        let b_last = &reports[reports.len() - 1].turn_states[0];
        let mut converging = Vec::with_capacity(npos);
        let mut diverging = false;
        for i in 0..npos {
            let settles = last.spread[i] <= 0.5 * first.spread[i] + 1e-9;
            let grows = b_last[i].norm() > 4.0 * (1.0 + b_first[i].norm());
            converging.push(settles && !grows);
            diverging |= grows;
        }
        let all = converging.iter().all(|&c| c);
        ev.polar = Some(diverging && converging.iter().any(|&c| c));
        ev.converging = converging;
        let kind = if all {
            SingularityKind::RemovableLogarithmic
        } else {
            SingularityKind::Logarithmic
        };
        return verdict(kind, center, ev);
    }

    ev.note = Some(if closed.is_empty() && open == 0 {
        "every monodromy loop was blocked".into()
    } else {
        "monodromy loops disagree across radii".into()
    });
    verdict(SingularityKind::Undetermined, center, ev)
}

fn spread(rep: &MonodromyReport, npos: usize) -> Vec<f64> {
    let Some(y0) = rep.turn_states.first() else {
        return vec![];
    };
    (0..npos)
        .map(|i| {
            rep.turn_states
                .iter()
                .map(|y| (y[i] - y0[i]).norm())
                .fold(0.0, f64::max)
        })
        .collect()
}

/// Least-squares fit of `log|1/u_i|` against `log|z - z*|` at ten points
/// spanning the decade above the distance `d_hit`. Returns
/// the position component with the steepest slope, the slope and the RMS
/// residual.
fn approach_fit<S: OdeSystem + ?Sized>(
    sys: &S,
    start: &Sample,
    center: C64,
    dir: C64,
    d_hit: f64,
    cfg: &IntegratorConfig,
) -> Option<(usize, f64, f64)> {
    let npos = sys.position_dim();
    let dists: Vec<f64> = (1..=10).rev().map(|j| d_hit * 10f64.powf(j as f64 / 10.0)).collect();
    if dists[0] >= (start.z - center).norm() {
        return None;
    }
    let mut at = start.clone();
    let mut logs: Vec<Vec<f64>> = vec![Vec::with_capacity(dists.len()); npos];
    for &d in &dists {
        let target = center + dir * d;
        let tr = continue_system(sys, &at, &PlanePath::segment(at.z, target), cfg);
        if tr.status != Status::Completed {
            return None;
        }
        at = tr.last().clone();
        at.z = target;
        // Compare magnitudes in the affine chart of each component.
        let (mut y, mut charts) = (at.y.clone(), at.charts.clone());
        let affine = vec![Default::default(); charts.len()];
        sys.convert_charts(&mut y, &mut charts, &affine);
        for i in 0..npos {
            logs[i].push(-y[i].norm().ln());
        }
    }
    let xs: Vec<f64> = dists.iter().map(|d| d.ln()).collect();
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, ys) in logs.iter().enumerate() {
        if ys.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let (slope, residual) = linear_fit(&xs, ys);
        if best.is_none_or(|(_, s, _)| slope > s) {
            best = Some((i, slope, residual));
        }
    }
    best
}

/// Slope and RMS residual of the least-squares line through `(x, y)`.
fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
        .sum();
    (slope, (rss / n).sqrt())
}

/// Geodesic state from a system sample.
pub fn state_of(sample: &Sample) -> GeodesicState {
    unpack(sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::FactorKind;
    use crate::synthetic::SyntheticProblem;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn cfg() -> IntegratorConfig {
        IntegratorConfig::with_tol(1e-10)
    }

    fn probe(name: &str, turns: usize) -> MonodromyReport {
        let p = SyntheticProblem::preset(name).unwrap();
        monodromy_probe(&p.system, &p.start(), c(0., 0.), 1.0, turns, &cfg()).unwrap()
    }

    #[test]
    fn monodromy_examples() {
        assert_eq!(probe("identity", 8).outcome, MonodromyOutcome::ClosedAfter { turns: 1 });
        assert_eq!(probe("sqrt", 8).outcome, MonodromyOutcome::ClosedAfter { turns: 2 });
        let log = probe("log", 8);
        assert_eq!(log.outcome, MonodromyOutcome::OpenAfter { turns: 8 });
        for inc in log.increments() {
            assert!((inc[0] - c(0., 2.0 * PI)).norm() < 1e-8);
        }
    }

    #[test]
    fn square_loop_closes() {
        let m = WarpedMetric::flat(vec![FactorKind::Plane; 2]);
        let s = GeodesicState::new(c(0., 0.), vec![c(0., 0.); 2], vec![c(1., 0.), c(0., 0.)]);
        let path = PlanePath::polyline(&[c(0., 0.), c(1., 0.), c(1., 1.), c(0., 1.), c(0., 0.)]).unwrap();
        let rec = continue_along(&m, &s, &path, 1e-10).unwrap();
        assert_eq!(rec.status, Status::LoopClosed);
        assert!((rec.last().u[0]).norm() < 1e-9);
        assert!((rec.last().v[0] - c(1., 0.)).norm() < 1e-9);
    }

    #[test]
    fn classify_examples() {
        let check = |name: &str| {
            let p = SyntheticProblem::preset(name).unwrap();
            classify_system(&p.system, &p.start(), p.z_star, &cfg())
        };
        assert_eq!(check("riccati").kind, SingularityKind::Pole { order_estimate: 1 });
        assert_eq!(check("log").kind, SingularityKind::Logarithmic);
        let sqrt = check("sqrt");
        assert_eq!(sqrt.kind, SingularityKind::Regular);
        assert_eq!(sqrt.evidence.sheets, Some(2));
        assert_eq!(check("removable_log").kind, SingularityKind::RemovableLogarithmic);
        assert_eq!(check("identity").kind, SingularityKind::Regular);
        for k in 1..=3 {
            assert_eq!(check(&format!("pole:{k}")).kind, SingularityKind::Pole { order_estimate: k });
            let b = check(&format!("branch_pole:{k}"));
            assert_eq!(b.kind, SingularityKind::Pole { order_estimate: 1 });
            assert_eq!(b.evidence.sheets, Some(k as usize));
        }
    }

    #[test]
    fn disc_exit_is_boundary_blocked() {
        let m = WarpedMetric::flat(vec![FactorKind::Disc]);
        let s = GeodesicState::new(c(0., 0.), vec![c(0., 0.)], vec![c(1., 0.)]);
        let v = classify_singularity(&m, &s, c(2., 0.), 1e-10).unwrap();
        assert_eq!(v.kind, SingularityKind::BoundaryBlocked);
        assert!((v.location - c(1., 0.)).norm() < 1e-6);
    }

    #[test]
    fn verdict_json() {
        let v = SingularityVerdict {
            kind: SingularityKind::Pole { order_estimate: 2 },
            location: c(1., 0.),
            evidence: Evidence::default(),
        };
        let j = serde_json::to_value(&v).unwrap();
        assert_eq!(j["kind"], "pole");
        assert_eq!(j["order_estimate"], 2);
    }
}
