//! Sampled completeness test: continue a geodesic to a grid of parameter
//! values, detouring around obstructions, and compare how the blocked set
//! behaves under grid refinement.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::continuation::{classify_system, SingularityKind, SingularityVerdict};
use crate::error::GeodesicError;
use crate::geodesic::{check_tol, trace, ContinuationRecord, GeodesicState, GeodesicSystem};
use crate::metric::WarpedMetric;
use crate::ode::{IntegratorConfig, Sample, Status};
use crate::path::{PathLeg, PlanePath};
use crate::rational::C64;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOptions {
    /// Ring radii around the start parameter.
    pub rings: Vec<f64>,
    /// Targets per ring.
    pub angles: usize,
    /// `|z - z0|` at which the point at infinity counts as reached.
    pub infinity_radius: f64,
    pub infinity_rays: usize,
    /// Detour retries per target.
    pub budget: usize,
    pub tol: f64,
    /// Classify the obstruction behind each blocked target.
    pub classify: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            rings: vec![0.5, 1.0, 2.0, 4.0, 8.0, 16.0],
            angles: 24,
            infinity_radius: 1e3,
            infinity_rays: 8,
            budget: 6,
            tol: 1e-10,
            classify: true,
        }
    }
}

/// A probe target: a finite parameter value or the point at infinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Zeta {
    Finite(C64),
    Infinity,
}

impl Serialize for Zeta {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Zeta::Finite(z) => z.serialize(s),
            Zeta::Infinity => s.serialize_str("infinity"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetStatus {
    Reached { detours: usize },
    Blocked { obstruction: Status, retries: usize },
}

impl TargetStatus {
    pub fn is_reached(&self) -> bool {
        matches!(self, TargetStatus::Reached { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TargetReport {
    pub zeta: Zeta,
    pub status: TargetStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<SingularityVerdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CompletenessVerdict {
    LooksComplete,
    LooksIncomplete,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridSummary {
    pub targets: usize,
    pub reached: usize,
    pub blocked: usize,
    /// Obstruction locations after clustering nearby ones.
    pub distinct_obstructions: usize,
    /// No two blocked targets are grid neighbours.
    pub blocked_isolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeSummary {
    pub reached: usize,
    pub blocked: usize,
    pub verdict: CompletenessVerdict,
    pub grid: GridSummary,
    pub refined: GridSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeReport {
    pub targets: Vec<TargetReport>,
    pub summary: ProbeSummary,
}

impl ProbeReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("zeta_re,zeta_im,status\n");
        for t in &self.targets {
            let (re, im) = match t.zeta {
                Zeta::Finite(z) => (z.re.to_string(), z.im.to_string()),
                Zeta::Infinity => ("inf".into(), "inf".into()),
            };
            let st = if t.status.is_reached() { "reached" } else { "blocked" };
            let _ = writeln!(out, "{re},{im},{st}");
        }
        out
    }

    /// Target grid as SVG circles, green for reached and red for blocked.
    /// The point at infinity is drawn as a ring around the plot.
    pub fn to_svg(&self) -> String {
        let finite: Vec<(C64, bool)> = self
            .targets
            .iter()
            .filter_map(|t| match t.zeta {
                Zeta::Finite(z) => Some((z, t.status.is_reached())),
                Zeta::Infinity => None,
            })
            .collect();
        let (mut lo, mut hi) = (C64::new(f64::MAX, f64::MAX), C64::new(f64::MIN, f64::MIN));
        for (z, _) in &finite {
            lo = C64::new(lo.re.min(z.re), lo.im.min(z.im));
            hi = C64::new(hi.re.max(z.re), hi.im.max(z.im));
        }
        let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-9);
        let size = 600.0;
        let margin = 30.0;
        let scale = (size - 2.0 * margin) / span;
        let mut out = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">\n"
        );
        if let Some(inf) = self.targets.iter().find(|t| t.zeta == Zeta::Infinity) {
            let color = if inf.status.is_reached() { "green" } else { "red" };
            let _ = writeln!(
                out,
                "<rect x=\"2\" y=\"2\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"3\"/>",
                size - 4.0,
                size - 4.0
            );
        }
        for (z, ok) in finite {
            let x = margin + (z.re - lo.re) * scale;
            let y = size - margin - (z.im - lo.im) * scale;
            let color = if ok { "green" } else { "red" };
            let _ = writeln!(out, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"{color}\"/>");
        }
        out.push_str("</svg>\n");
        out
    }
}

/// A semicircular detour around the point at arc length `t` of a segment.
#[derive(Debug, Clone, Copy)]
struct Detour {
    t: f64,
    base: f64,
    tries: u32,
}

impl Detour {
    fn radius(&self) -> f64 {
        self.base * 4f64.powi((self.tries / 2) as i32)
    }

    fn side(&self) -> f64 {
        if self.tries.is_multiple_of(2) {
            1.0
        } else {
            -1.0
        }
    }

    fn center(&self, a: C64, dir: C64) -> C64 {
        a + dir * self.t
    }
}

/// Straight segment from `a` to `b` with semicircles around each detour
/// center; `None` if detours overlap or stick out of the segment.
fn detour_path(a: C64, b: C64, detours: &mut [Detour]) -> Option<PlanePath> {
    let len = (b - a).norm();
    let dir = (b - a) / len;
    detours.sort_by(|x, y| x.t.total_cmp(&y.t));
    let mut legs = Vec::with_capacity(2 * detours.len() + 1);
    let mut pos = 0.0;
    for d in detours.iter() {
        let r = d.radius();
        if d.t - r <= pos || d.t + r >= len {
            return None;
        }
        legs.push(PathLeg::Segment {
            to: a + dir * (d.t - r),
        });
        let phi = (-dir).arg();
        legs.push(PathLeg::Arc {
            center: d.center(a, dir),
            radius: r,
            angle_from: phi,
            angle_to: phi - d.side() * PI,
        });
        pos = d.t + r;
    }
    legs.push(PathLeg::Segment { to: b });
    PlanePath::new(a, legs).ok()
}

fn detour_base(p: C64) -> f64 {
    1e-3 * (1.0 + p.norm())
}

struct Leg {
    state: Option<GeodesicState>,
    status: TargetStatus,
}

/// Smallest guard tried after a singular-locus hit.
const GUARD_FLOOR: f64 = 1e-12;

/// Retraces `path` with the locus guard shrunk by 1e3 at a time. A
/// trajectory that only approaches a locus asymptotically gets through; one
/// that really runs into it stays blocked.
fn refine_guard(
    m: &WarpedMetric,
    from: &GeodesicState,
    path: &PlanePath,
    cfg: &IntegratorConfig,
) -> Option<ContinuationRecord> {
    let mut fine = *cfg;
    while fine.guard_rel * 1e-3 >= GUARD_FLOOR * 0.999 {
        fine.guard_rel *= 1e-3;
        let rec = trace(m, from, path, &fine).ok()?;
        if rec.status == Status::Completed {
            return Some(rec);
        }
        if !matches!(rec.status, Status::SingularLocusHit { .. }) {
            return None;
        }
    }
    None
}

/// Continues from `from` to `b`, retrying with detours around each
/// obstruction up to `budget` times.
fn reach(m: &WarpedMetric, from: &GeodesicState, b: C64, budget: usize, cfg: &IntegratorConfig) -> Leg {
    let a = from.z;
    let len = (b - a).norm();
    if len == 0.0 {
        return Leg {
            state: Some(from.clone()),
            status: TargetStatus::Reached { detours: 0 },
        };
    }
    let dir = (b - a) / len;
    let mut detours: Vec<Detour> = Vec::new();
    let mut last = Status::StepUnderflow { z: a };
    for attempt in 0..=budget {
        let Some(path) = detour_path(a, b, &mut detours) else {
            break;
        };
        let rec = match trace(m, from, &path, cfg) {
            Ok(r) => r,
            Err(_) => break,
        };
        let rec = match rec.status {
            Status::SingularLocusHit { .. } => refine_guard(m, from, &path, cfg).unwrap_or(rec),
            _ => rec,
        };
        if rec.status == Status::Completed {
            let mut s = rec.last().clone();
            s.z = b;
            return Leg {
                state: Some(s),
                status: TargetStatus::Reached {
                    detours: detours.len(),
                },
            };
        }
        last = rec.status.clone();
        if attempt == budget {
            break;
        }
        let p = rec.status.location().unwrap_or(b);
        if let Some(d) = detours
            .iter_mut()
            .find(|d| (p - d.center(a, dir)).norm() <= 1.5 * d.radius() + 1e-12)
        {
            d.tries += 1;
        } else {
            let t = ((p - a) * dir.conj()).re;
            detours.push(Detour {
                t,
                base: detour_base(p),
                tries: 0,
            });
        }
    }
    Leg {
        state: None,
        status: TargetStatus::Blocked {
            obstruction: last,
            retries: budget,
        },
    }
}

struct Grid {
    rings: Vec<f64>,
    angles: usize,
}

impl Grid {
    fn point(&self, center: C64, ring: usize, angle: usize) -> C64 {
        center + C64::from_polar(self.rings[ring], 2.0 * PI * angle as f64 / self.angles as f64)
    }
}

/// Results on one grid: `finite[angle][ring]` plus infinity.
struct GridRun {
    finite: Vec<Vec<TargetStatus>>,
    infinity: TargetStatus,
}

fn run_grid(m: &WarpedMetric, s: &GeodesicState, grid: &Grid, opts: &ProbeOptions, cfg: &IntegratorConfig) -> GridRun {
    let finite: Vec<Vec<TargetStatus>> = (0..grid.angles)
        .into_par_iter()
        .map(|j| {
            let mut at = s.clone();
            let mut out = Vec::with_capacity(grid.rings.len());
            for i in 0..grid.rings.len() {
                let leg = reach(m, &at, grid.point(s.z, i, j), opts.budget, cfg);
                if let Some(st) = leg.state {
                    at = st;
                }
                out.push(leg.status);
            }
            out
        })
        .collect();
    let rays: Vec<TargetStatus> = (0..opts.infinity_rays)
        .into_par_iter()
        .map(|j| {
            let th = 2.0 * PI * (j as f64 + 0.5) / opts.infinity_rays as f64;
            reach(m, s, s.z + C64::from_polar(opts.infinity_radius, th), opts.budget, cfg).status
        })
        .collect();
    let infinity = rays
        .iter()
        .find(|r| r.is_reached())
        .or(rays.first())
        .cloned()
        .unwrap_or(TargetStatus::Reached { detours: 0 });
    GridRun { finite, infinity }
}

fn obstruction_of(st: &TargetStatus) -> Option<&Status> {
    match st {
        TargetStatus::Blocked { obstruction, .. } => Some(obstruction),
        TargetStatus::Reached { .. } => None,
    }
}

/// Groups obstruction locations lying within `1e-3 (1 + |z|)` of each other.
fn cluster(points: impl Iterator<Item = C64>) -> Vec<C64> {
    let mut reps: Vec<C64> = Vec::new();
    for p in points {
        if !reps.iter().any(|q| (p - q).norm() <= 1e-3 * (1.0 + q.norm())) {
            reps.push(p);
        }
    }
    reps
}

fn summarize(run: &GridRun, grid: &Grid) -> GridSummary {
    let nr = grid.rings.len();
    let na = grid.angles;
    let blocked = |i: usize, j: usize| !run.finite[j][i].is_reached();
    let mut n_blocked = usize::from(!run.infinity.is_reached());
    let mut isolated = true;
    for j in 0..na {
        for i in 0..nr {
            if blocked(i, j) {
                n_blocked += 1;
                let next_ring = i + 1 < nr && blocked(i + 1, j);
                let next_angle = na > 1 && blocked(i, (j + 1) % na);
                isolated &= !(next_ring || next_angle);
            }
        }
    }
    let locations = run
        .finite
        .iter()
        .flatten()
        .chain(std::iter::once(&run.infinity))
        .filter_map(obstruction_of)
        .filter_map(Status::location);
    let total = na * nr + 1;
    GridSummary {
        targets: total,
        reached: total - n_blocked,
        blocked: n_blocked,
        distinct_obstructions: cluster(locations).len(),
        blocked_isolated: isolated,
    }
}

/// Continues `s` to every grid target, and to a refined grid (angles
/// doubled, geometric midpoints between rings), then compares:
///
/// * `looks_complete`: the refined grid blocks no more targets and the
///   blocked targets are isolated;
/// * `looks_incomplete`: refinement uncovers new obstruction locations,
///   i.e. the obstructions form a curve rather than isolated points;
/// * `inconclusive` otherwise.
pub fn probe_completeness(
    m: &WarpedMetric,
    s: &GeodesicState,
    opts: &ProbeOptions,
) -> Result<ProbeReport, GeodesicError> {
    check_tol(opts.tol)?;
    let charts = s.charts();
    if !m.is_ordinary_in(&s.u, &charts) {
        m.christoffel_in(&s.u, &charts)?;
    }
    let cfg = IntegratorConfig::with_tol(opts.tol);
    let mut rings = opts.rings.clone();
    rings.retain(|r| r.is_finite() && *r > 0.0);
    rings.sort_by(f64::total_cmp);
    rings.dedup();
    let angles = opts.angles.max(1);
    let mut fine_rings = Vec::with_capacity(2 * rings.len());
    for (i, &r) in rings.iter().enumerate() {
        if i > 0 {
            fine_rings.push((rings[i - 1] * r).sqrt());
        }
        fine_rings.push(r);
    }
    let fine = Grid {
        rings: fine_rings,
        angles: 2 * angles,
    };
    let run = run_grid(m, s, &fine, opts, &cfg);

    // The base grid is the even-angle, original-ring subset of the fine one.
    let coarse = Grid {
        rings: rings.clone(),
        angles,
    };
    let coarse_run = GridRun {
        finite: (0..angles)
            .map(|j| (0..rings.len()).map(|i| run.finite[2 * j][2 * i].clone()).collect())
            .collect(),
        infinity: run.infinity.clone(),
    };
    let grid = summarize(&coarse_run, &coarse);
    let refined = summarize(&run, &fine);
    let verdict = if refined.blocked == grid.blocked && refined.blocked_isolated {
        CompletenessVerdict::LooksComplete
    } else if refined.distinct_obstructions > grid.distinct_obstructions {
        CompletenessVerdict::LooksIncomplete
    } else {
        CompletenessVerdict::Inconclusive
    };

    let mut targets = Vec::with_capacity(grid.targets);
    for i in 0..rings.len() {
        for j in 0..angles {
            targets.push(TargetReport {
                zeta: Zeta::Finite(coarse.point(s.z, i, j)),
                status: coarse_run.finite[j][i].clone(),
                verdict: None,
            });
        }
    }
    targets.push(TargetReport {
        zeta: Zeta::Infinity,
        status: coarse_run.infinity.clone(),
        verdict: None,
    });
    if opts.classify {
        classify_blocked(m, s, &mut targets, &cfg);
    }

    Ok(ProbeReport {
        summary: ProbeSummary {
            reached: grid.reached,
            blocked: grid.blocked,
            verdict,
            grid,
            refined,
        },
        targets,
    })
}

/// Attaches a singularity verdict to each blocked target, classifying each
/// cluster of obstruction locations once.
fn classify_blocked(m: &WarpedMetric, s: &GeodesicState, targets: &mut [TargetReport], cfg: &IntegratorConfig) {
    let locations: Vec<Option<(C64, bool)>> = targets
        .iter()
        .map(|t| {
            obstruction_of(&t.status).and_then(|st| {
                st.location()
                    .map(|z| (z, matches!(st, Status::DomainExit { .. })))
            })
        })
        .collect();
    let reps = cluster(locations.iter().flatten().map(|(z, _)| *z));
    let sys = GeodesicSystem::new(m);
    let start = Sample {
        z: s.z,
        y: s.u.iter().chain(&s.v).copied().collect(),
        charts: s.charts(),
    };
    let verdicts: Vec<SingularityVerdict> = reps
        .par_iter()
        .map(|&p| {
            let boundary = locations
                .iter()
                .flatten()
                .any(|(z, exit)| *exit && (z - p).norm() <= 1e-3 * (1.0 + p.norm()));
            if boundary {
                SingularityVerdict {
                    kind: SingularityKind::BoundaryBlocked,
                    location: p,
                    evidence: Default::default(),
                }
            } else {
                classify_system(&sys, &start, p, cfg)
            }
        })
        .collect();
    for (t, loc) in targets.iter_mut().zip(&locations) {
        if let Some((z, _)) = loc {
            let k = reps
                .iter()
                .position(|q| (z - q).norm() <= 1e-3 * (1.0 + q.norm()))
                .expect("every location has a cluster");
            t.verdict = Some(verdicts[k].clone());
        }
    }
}
