//! Coercivity: whether the primitives `int d eta / alpha` (base factor) and
//! `int sqrt(f_k) d eta` (fibers) continue to functions whose images miss at
//! most finitely many values, for every admissible tuple of first
//! integrals.
//!
//! Quadratic cases are decided by the closed-form primitives of
//! `1/sqrt(a eta^2 + b eta + c)`; everything else is sampled by continuing
//! the primitive along rays, approach paths and loops and checking whether
//! the image grows without bound in every direction.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CoercivityError;
use crate::metric::{Chart, FactorKind, WarpedMetric};
use crate::ode::{integrate_legs, IntegratorConfig, Obstruction, OdeSystem, Sample, SingularRhs, Status};
use crate::path::{PathLeg, PlanePath};
use crate::rational::{ComplexPoly, RationalFn, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveKind {
    LogForm,
    SqrtForm,
    LinearForm,
}

/// A closed-form primitive of `1/sqrt(a eta^2 + b eta + c)`:
///
/// * `log_form` (`a != 0`, `delta != 0`):
///   `log(eta + b/2a + sqrt(eta^2 + (b/a) eta + c/a)) / sqrt(a)`
/// * `sqrt_form` (`a = 0`, `b != 0`): `(2/b) sqrt(b eta + c)`
/// * `linear_form` (`a = b = 0`): `eta / sqrt(c)`
///
/// Principal branches throughout; [`PrimitiveForm::radical`] returns the
/// square root that the chosen branch actually differentiates against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveForm {
    pub kind: PrimitiveKind,
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub delta: C64,
}

/// Coefficients below this fraction of the triple's size count as zero.
const ZERO_REL: f64 = 1e-12;

/// Picks the primitive form for `(a, b, c)`.
pub fn classify_quadratic_primitive(a: C64, b: C64, c: C64) -> Result<PrimitiveForm, CoercivityError> {
    let size = a.norm() + b.norm() + c.norm();
    if size == 0.0 {
        return Err(CoercivityError::AllZero);
    }
    let zero = |x: C64| x.norm() <= ZERO_REL * size;
    let delta = b * b - 4.0 * a * c;
    let kind = if !zero(a) {
        if delta.norm() <= ZERO_REL * (b.norm().powi(2) + 4.0 * (a * c).norm()) {
            return Err(CoercivityError::DegenerateTriple);
        }
        PrimitiveKind::LogForm
    } else if !zero(b) {
        PrimitiveKind::SqrtForm
    } else {
        PrimitiveKind::LinearForm
    };
    let (a, b) = match kind {
        PrimitiveKind::LogForm => (a, b),
        PrimitiveKind::SqrtForm => (C64::new(0.0, 0.0), b),
        PrimitiveKind::LinearForm => (C64::new(0.0, 0.0), C64::new(0.0, 0.0)),
    };
    Ok(PrimitiveForm {
        kind,
        a,
        b,
        c,
        delta: b * b - 4.0 * a * c,
    })
}

impl PrimitiveForm {
    pub fn eval(&self, eta: C64) -> C64 {
        match self.kind {
            PrimitiveKind::LogForm => {
                let s = self.inner_sqrt(eta);
                (eta + self.b / (2.0 * self.a) + s).ln() / self.a.sqrt()
            }
            PrimitiveKind::SqrtForm => 2.0 / self.b * (self.b * eta + self.c).sqrt(),
            PrimitiveKind::LinearForm => eta / self.c.sqrt(),
        }
    }

    /// The branch of `sqrt(a eta^2 + b eta + c)` with `eval' * radical = 1`.
    pub fn radical(&self, eta: C64) -> C64 {
        match self.kind {
            PrimitiveKind::LogForm => self.a.sqrt() * self.inner_sqrt(eta),
            PrimitiveKind::SqrtForm => (self.b * eta + self.c).sqrt(),
            PrimitiveKind::LinearForm => self.c.sqrt(),
        }
    }

    fn inner_sqrt(&self, eta: C64) -> C64 {
        (eta * eta + self.b / self.a * eta + self.c / self.a).sqrt()
    }
}

/// Sign of the initial square root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

/// Statistics of a sampled primitive image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEvidence {
    pub base: C64,
    pub paths: usize,
    pub failed_paths: usize,
    /// Paths on which the primitive itself exceeded the blow-up threshold.
    pub blow_ups: usize,
    pub periods: Vec<C64>,
    /// `[min re, max re, min im, max im]` of the sampled values.
    pub bbox: [f64; 4],
    /// Support function `max Re(Phi e^{-i theta})` in 8 directions, for the
    /// reduced and the full sampling budget.
    pub support_half: Vec<f64>,
    pub support_full: Vec<f64>,
    pub growing: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ComponentVerdict {
    CoerciveClosedForm { form: PrimitiveForm },
    CoerciveSampled { evidence: SampleEvidence },
    NotCoercive { witness: String, evidence: Option<SampleEvidence> },
    Undetermined { reason: String, evidence: Option<SampleEvidence> },
}

impl ComponentVerdict {
    fn rank(&self) -> u8 {
        match self {
            ComponentVerdict::NotCoercive { .. } => 0,
            ComponentVerdict::Undetermined { .. } => 1,
            ComponentVerdict::CoerciveSampled { .. } => 2,
            ComponentVerdict::CoerciveClosedForm { .. } => 3,
        }
    }

    pub fn is_coercive(&self) -> bool {
        self.rank() >= 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Overall {
    Coercive,
    NotCoercive,
    Undetermined,
}

/// How the sampled tuples fared for the base component.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleTally {
    pub closed_form: usize,
    pub sampled: usize,
    pub not_coercive: usize,
    pub undetermined: usize,
    /// Tuples skipped because their quadratic is a perfect square.
    #[serde(skip_serializing_if = "is_zero")]
    pub degenerate: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentReport {
    /// 1-based coordinate index.
    pub component: usize,
    pub verdict: ComponentVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tuples: Option<TupleTally>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoercivityVerdict {
    pub overall: Overall,
    pub components: Vec<ComponentReport>,
    pub base_point: Vec<C64>,
    pub seed: u64,
    pub tuples: usize,
}

/// Knobs for sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOptions {
    pub rays: usize,
    pub ray_length: f64,
    pub tol: f64,
    /// Loop turns credited to each period at the full budget.
    pub turns: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            rays: 64,
            ray_length: 1e3,
            tol: 1e-8,
            turns: 8,
        }
    }
}

const DIRECTIONS: usize = 8;
const GROWTH: f64 = 1.05;
const STALL: f64 = 1.01;
/// Cap on the sheets rays leave from.
const MAX_SHEETS: usize = 4;

/// `y = (Phi, s)` with `s^2 = r`: `Phi' = s`, `s' = s r' / (2 r)`.
struct PrimitiveSystem<'a> {
    r: &'a RationalFn,
    dr: RationalFn,
    singular: Vec<C64>,
    disc: bool,
}

impl OdeSystem for PrimitiveSystem<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn position_dim(&self) -> usize {
        1
    }

    fn rhs(&self, z: C64, y: &[C64], _c: &[Chart], dy: &mut [C64]) -> Result<(), SingularRhs> {
        let r = self.r.eval_finite(z).ok_or(SingularRhs)?;
        if r.norm() == 0.0 {
            return Err(SingularRhs);
        }
        let dr = self.dr.eval_finite(z).ok_or(SingularRhs)?;
        dy[0] = y[1];
        dy[1] = y[1] * dr / (2.0 * r);
        Ok(())
    }

    fn obstruction(&self, z: C64, _y: &[C64], _c: &[Chart], guard_rel: f64) -> Option<Obstruction> {
        if self.disc && z.norm() >= 1.0 {
            return Some(Obstruction::DomainExit { factor: 0 });
        }
        self.singular
            .iter()
            .find(|p| (z - *p).norm() <= guard_rel * (1.0 + p.norm()))
            .map(|p| Obstruction::SingularLocus {
                locus: format!("singular point of the integrand at {p}"),
            })
    }
}

/// A singular point of the integrand with its pole order (0 for zeros) and
/// its exclusion radius.
#[derive(Debug, Clone, Copy)]
struct Spot {
    at: C64,
    pole_order: usize,
    /// Odd multiplicity: the square root changes sign around it.
    branch: bool,
    radius: f64,
}

/// Out along a lead from the base, once around a circle, and back.
struct Lasso {
    center: C64,
    on: C64,
    skip: Option<usize>,
}

impl Lasso {
    fn run(&self, sys: &PrimitiveSystem, spots: &[Spot], base: C64, from: Sample, cfg: &IntegratorConfig) -> Option<Sample> {
        let lead = avoiding_path(base, self.on, spots, self.skip)?;
        let circle = PlanePath::circle(self.center, self.on, 1.0).ok()?;
        let path = lead.clone().then(&circle).ok()?.then(&lead.reversed()).ok()?;
        let mut end = run_path(sys, &from, &path, cfg).end?;
        end.z = base;
        Some(end)
    }
}

/// Straight segment with semicircles around spots lying close to it,
/// passing on the side away from each spot. `skip` excludes one spot.
fn avoiding_path(a: C64, b: C64, spots: &[Spot], skip: Option<usize>) -> Option<PlanePath> {
    let len = (b - a).norm();
    if len == 0.0 {
        return None;
    }
    let dir = (b - a) / len;
    let mut hits: Vec<(f64, f64, f64)> = spots
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != skip)
        .filter_map(|(_, s)| {
            let rel = (s.at - a) * dir.conj();
            (rel.im.abs() < s.radius && rel.re > -s.radius && rel.re < len + s.radius).then(|| {
                // Arc on the side away from the spot.
                let side = if rel.im >= 0.0 { 1.0 } else { -1.0 };
                (rel.re, s.radius, side)
            })
        })
        .collect();
    hits.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut legs = Vec::with_capacity(2 * hits.len() + 1);
    let mut pos = 0.0;
    for (t, r, side) in hits {
        if t - r <= pos || t + r >= len {
            return None;
        }
        legs.push(PathLeg::Segment { to: a + dir * (t - r) });
        let phi = (-dir).arg();
        legs.push(PathLeg::Arc {
            center: a + dir * t,
            radius: r,
            angle_from: phi,
            // side > 0: spot on the left, so pass clockwise below it.
            angle_to: phi + side * PI,
        });
        pos = t + r;
    }
    legs.push(PathLeg::Segment { to: b });
    PlanePath::new(a, legs).ok()
}

/// Running support statistics over sampled values.
#[derive(Debug, Clone)]
struct Support {
    h: [f64; DIRECTIONS],
    bbox: [f64; 4],
}

impl Support {
    fn new() -> Self {
        Self {
            h: [0.0; DIRECTIONS],
            bbox: [0.0; 4],
        }
    }

    fn add(&mut self, v: C64) {
        if !v.is_finite() {
            return;
        }
        for (k, h) in self.h.iter_mut().enumerate() {
            let th = 2.0 * PI * k as f64 / DIRECTIONS as f64;
            *h = h.max((v * C64::from_polar(1.0, -th)).re);
        }
        self.bbox = [
            self.bbox[0].min(v.re),
            self.bbox[1].max(v.re),
            self.bbox[2].min(v.im),
            self.bbox[3].max(v.im),
        ];
    }

    fn merge(&mut self, o: &Support) {
        for k in 0..DIRECTIONS {
            self.h[k] = self.h[k].max(o.h[k]);
        }
        self.bbox = [
            self.bbox[0].min(o.bbox[0]),
            self.bbox[1].max(o.bbox[1]),
            self.bbox[2].min(o.bbox[2]),
            self.bbox[3].max(o.bbox[3]),
        ];
    }
}

struct PathOutcome {
    support: Support,
    failed: bool,
    /// Primitive value at a blow-up of the primitive itself.
    blow_up: Option<C64>,
    end: Option<Sample>,
}

fn run_path(sys: &PrimitiveSystem, start: &Sample, path: &PlanePath, cfg: &IntegratorConfig) -> PathOutcome {
    let tr = integrate_legs(sys, &path.geometric_legs(), start.clone(), cfg);
    let mut support = Support::new();
    for s in &tr.samples {
        support.add(s.y[0]);
    }
    let blow_up = match tr.status {
        Status::BlowUp { component: 0, .. } => Some(tr.last().y[0]),
        _ => None,
    };
    let failed = tr.status != Status::Completed;
    PathOutcome {
        support,
        failed,
        blow_up,
        end: (!failed).then(|| tr.last().clone()),
    }
}

/// Samples the continuation of `int sqrt(r)` from a regular base point.
///
/// Paths: `rays` rays (stopping at `|eta| = 1 - margin` on a disc), approach
/// paths into poles of order >= 2, and loops around every zero and pole
/// (whose periods are credited `turns` times). Everything runs at a reduced
/// and at the full budget; the image grows in direction `theta` if its
/// support grows by 5% or a ray blew up in that direction. All directions
/// growing gives `coercive_sampled`; a direction whose support stalls
/// (below 1% growth) is a bounded-image witness (`not_coercive`).
pub fn coercivity_sample(
    integrand_square: &RationalFn,
    factor: FactorKind,
    rays: usize,
    ray_length: f64,
    tol: f64,
) -> ComponentVerdict {
    let opts = SampleOptions {
        rays,
        ray_length,
        tol,
        ..Default::default()
    };
    let Some(base) = default_base(integrand_square, factor) else {
        return ComponentVerdict::Undetermined {
            reason: "no regular base point for the integrand".into(),
            evidence: None,
        };
    };
    coercivity_sample_at(integrand_square, factor, base, &opts)
}

/// [`coercivity_sample`] from a given base point, for both branches.
pub fn coercivity_sample_at(r: &RationalFn, factor: FactorKind, base: C64, opts: &SampleOptions) -> ComponentVerdict {
    let plus = sample_branch(r, factor, base, Branch::Plus, opts);
    let minus = sample_branch(r, factor, base, Branch::Minus, opts);
    if plus.rank() == minus.rank() {
        plus
    } else {
        ComponentVerdict::Undetermined {
            reason: "the two square-root branches disagree".into(),
            evidence: None,
        }
    }
}

fn default_base(r: &RationalFn, factor: FactorKind) -> Option<C64> {
    let candidates = [0.0, 0.1, 0.25, 0.5];
    for &m in &candidates {
        for k in 0..8 {
            let z = C64::from_polar(m, 2.0 * PI * k as f64 / 8.0 + 0.3 * (m > 0.0) as u8 as f64);
            if factor == FactorKind::Disc && z.norm() >= 1.0 {
                continue;
            }
            if r.eval_finite(z).is_some_and(|v| v.norm() > 0.0) {
                return Some(z);
            }
            if m == 0.0 {
                break;
            }
        }
    }
    None
}

/// Samples one branch of the primitive.
pub fn sample_branch(
    r: &RationalFn,
    factor: FactorKind,
    base: C64,
    branch: Branch,
    opts: &SampleOptions,
) -> ComponentVerdict {
    let undetermined = |reason: &str| ComponentVerdict::Undetermined {
        reason: reason.into(),
        evidence: None,
    };
    let disc = factor == FactorKind::Disc;
    let Some(r0) = r.eval_finite(base).filter(|v| v.norm() > 0.0) else {
        return undetermined("integrand vanishes or is infinite at the base point");
    };
    let sing = match r.singular_points() {
        Ok(s) => s,
        Err(_) => return undetermined("could not locate the integrand's zeros and poles"),
    };
    let mut raw: Vec<(C64, usize, bool)> = sing.zeros.iter().map(|z| (z.at, 0, z.multiplicity % 2 == 1)).collect();
    raw.extend(sing.poles.iter().map(|p| (p.at, p.multiplicity, p.multiplicity % 2 == 1)));
    if disc {
        raw.retain(|(p, _, _)| p.norm() < 1.0);
    }
    let spots: Vec<Spot> = raw
        .iter()
        .map(|&(at, pole_order, branch)| {
            let mut radius = 0.25 * (at - base).norm();
            for &(q, _, _) in &raw {
                if q != at {
                    radius = radius.min(0.25 * (q - at).norm());
                }
            }
            radius = radius.min(0.05 * (1.0 + at.norm()));
            if disc {
                radius = radius.min(0.5 * (1.0 - at.norm()));
            }
            Spot {
                at,
                pole_order,
                branch,
                radius,
            }
        })
        .collect();

    let sys = PrimitiveSystem {
        r,
        dr: r.derivative(),
        singular: spots.iter().map(|s| s.at).collect(),
        disc,
    };
    let s0 = match branch {
        Branch::Plus => r0.sqrt(),
        Branch::Minus => -r0.sqrt(),
    };
    let start = Sample {
        z: base,
        y: vec![C64::new(0.0, 0.0), s0],
        charts: vec![Chart::Affine],
    };
    let cfg = IntegratorConfig::with_tol(opts.tol);

    // Periods: lassos around single spots, around pairs of branch points
    // (where a single lasso flips the root) and around everything at once.
    let mut lassos: Vec<Lasso> = spots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let toward = (base - s.at) / (base - s.at).norm();
            Lasso {
                center: s.at,
                on: s.at + toward * s.radius,
                skip: Some(i),
            }
        })
        .collect();
    if !disc && !spots.is_empty() {
        let reach = spots.iter().map(|s| (s.at - base).norm()).fold(0.0, f64::max);
        let radius = 2.0 * reach + 1.0;
        lassos.push(Lasso {
            center: base,
            on: base + C64::from_polar(radius, 0.1234),
            skip: None,
        });
    }
    let mut words: Vec<Vec<usize>> = (0..lassos.len()).map(|i| vec![i]).collect();
    let branch: Vec<usize> = (0..spots.len()).filter(|&i| spots[i].branch).collect();
    for (k, &i) in branch.iter().enumerate() {
        for &j in &branch[k + 1..] {
            words.push(vec![i, j]);
        }
    }
    let same_root = |s: C64| (s - s0).norm() <= 1e-6 * (1.0 + s0.norm());
    // (period, state after one pass when it lands on another sheet)
    let runs: Vec<(Option<C64>, Option<Sample>)> = words
        .par_iter()
        .map(|word| {
            let mut cur = start.clone();
            let mut flipped = None;
            for pass in 0..2 {
                for &l in word {
                    match lassos[l].run(&sys, &spots, base, cur, &cfg) {
                        Some(next) => cur = next,
                        None => return (None, flipped),
                    }
                }
                if same_root(cur.y[1]) {
                    return (Some(cur.y[0]), flipped);
                }
                if pass == 0 {
                    flipped = Some(cur.clone());
                }
            }
            (None, flipped)
        })
        .collect();
    let mut periods: Vec<C64> = Vec::new();
    for p in runs.iter().filter_map(|r| r.0) {
        let tol = 1e-6 * (1.0 + p.norm());
        if p.norm() > 1e-8 && !periods.iter().any(|q| (q - p).norm() <= tol || (q + p).norm() <= tol) {
            periods.push(p);
        }
    }
    // Rays also leave from the other sheets the lassos reach.
    let mut starts = vec![start.clone()];
    for s in runs.into_iter().filter_map(|r| r.1) {
        if starts.len() >= MAX_SHEETS {
            break;
        }
        let tol = 1e-6 * (1.0 + s.y[0].norm() + s.y[1].norm());
        if !starts.iter().any(|t| (t.y[0] - s.y[0]).norm() + (t.y[1] - s.y[1]).norm() <= tol) {
            starts.push(s);
        }
    }

    // Paths for (half, full) budgets.
    let ray_end = |th: f64, half: bool| -> Option<C64> {
        let dir = C64::from_polar(1.0, th);
        if disc {
            let margin = if half { 2e-3 } else { 1e-3 };
            // |base + t dir| = 1 - margin
            let rho = 1.0 - margin;
            let bd = (base * dir.conj()).re;
            let disc_ = bd * bd - (base.norm_sqr() - rho * rho);
            (disc_ >= 0.0).then(|| base + dir * (-bd + disc_.sqrt()))
        } else {
            let l = if half { 0.5 * opts.ray_length } else { opts.ray_length };
            Some(base + dir * l)
        }
    };
    let mut jobs: Vec<(bool, Option<PlanePath>)> = Vec::new();
    for half in [true, false] {
        for j in 0..opts.rays {
            let th = 2.0 * PI * (j as f64 + 0.5) / opts.rays as f64;
            let path = ray_end(th, half).and_then(|b| avoiding_path(base, b, &spots, None));
            jobs.push((half, path));
        }
        for (i, s) in spots.iter().enumerate() {
            if s.pole_order >= 2 {
                let depth = if half { 1e-3 } else { 1e-5 * (1.0 + s.at.norm()) };
                let toward = (base - s.at) / (base - s.at).norm();
                let path = avoiding_path(base, s.at + toward * depth.min(s.radius), &spots, Some(i));
                jobs.push((half, path));
            }
        }
    }
    let outcomes: Vec<(bool, Option<PathOutcome>)> = starts
        .iter()
        .flat_map(|from| jobs.iter().map(move |job| (from, job)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|(from, (half, p))| (*half, p.as_ref().map(|p| run_path(&sys, from, p, &cfg))))
        .collect();

    let mut half = Support::new();
    let mut full = Support::new();
    let mut blow_ups = Vec::new();
    let (mut paths, mut failed) = (0, 0);
    for (is_half, o) in &outcomes {
        paths += usize::from(!is_half);
        let Some(o) = o else {
            failed += usize::from(!is_half);
            continue;
        };
        if *is_half {
            half.merge(&o.support);
        } else {
            full.merge(&o.support);
            failed += usize::from(o.failed);
            blow_ups.extend(o.blow_up);
        }
    }
    let k_full = opts.turns as f64;
    let k_half = (opts.turns / 2).max(1) as f64;
    let mut growing = Vec::with_capacity(DIRECTIONS);
    let mut stalled = None;
    let (mut sh, mut sf) = (Vec::new(), Vec::new());
    for k in 0..DIRECTIONS {
        let rot = C64::from_polar(1.0, -2.0 * PI * k as f64 / DIRECTIONS as f64);
        let per: f64 = periods.iter().map(|p| (p * rot).re.abs()).sum();
        let h_half = half.h[k] + k_half * per;
        let h_full = full.h[k] + k_full * per;
        let blown = blow_ups.iter().any(|b| (b * rot).re >= 0.5 * b.norm());
        let grows = blown || h_full >= GROWTH * h_half + 1e-9;
        if !grows && h_full < STALL * h_half + 1e-6 && stalled.is_none() {
            stalled = Some((k, h_full));
        }
        growing.push(grows);
        sh.push(h_half);
        sf.push(h_full);
    }
    let evidence = SampleEvidence {
        base,
        paths,
        failed_paths: failed,
        blow_ups: blow_ups.len(),
        periods,
        bbox: full.bbox,
        support_half: sh,
        support_full: sf,
        growing: growing.clone(),
    };
    if growing.iter().all(|&g| g) {
        ComponentVerdict::CoerciveSampled { evidence }
    } else if let Some((k, h)) = stalled {
        ComponentVerdict::NotCoercive {
            witness: format!(
                "primitive image stays bounded in direction {}/{DIRECTIONS} turn (support {h:.6})",
                k
            ),
            evidence: Some(evidence),
        }
    } else {
        ComponentVerdict::Undetermined {
            reason: "image growth is inconclusive".into(),
            evidence: Some(evidence),
        }
    }
}

/// `(a, b, c)` if `p` is a polynomial of degree at most 2.
fn quadratic_coeffs(p: &ComplexPoly) -> Option<(C64, C64, C64)> {
    if p.degree() > 2 || p.is_zero() {
        return None;
    }
    let c = |i: usize| p.coeffs().get(i).copied().unwrap_or_default();
    Some((c(2), c(1), c(0)))
}

/// Closed form for `int dη / sqrt(q)` with `q` the reciprocal of `r`.
fn closed_form_of_reciprocal(r: &RationalFn) -> Option<Result<PrimitiveForm, CoercivityError>> {
    // r = k / q  =>  sqrt(r) = 1 / sqrt(q / k)
    if !r.num().is_constant() {
        return None;
    }
    let k = r.num().coeffs()[0];
    let q = r.den().scale(C64::new(1.0, 0.0) / k);
    let (a, b, c) = quadratic_coeffs(&q)?;
    Some(classify_quadratic_primitive(a, b, c))
}

/// Options for the metric-level checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CoercivityOptions {
    pub tuples: usize,
    pub seed: u64,
    pub sample: SampleOptions,
}

impl Default for CoercivityOptions {
    fn default() -> Self {
        Self {
            tuples: 32,
            seed: 0,
            sample: SampleOptions::default(),
        }
    }
}

/// A random tuple `(A_1..A_N)` with `|A_i|` uniform by area on
/// `[0.1, 10]`, resampled until `A_1 - sum A_l / a_l(x0) != 0`.
fn sample_tuples(rng: &mut ChaCha8Rng, n: usize, a_at_base: &[C64], count: usize) -> Vec<Vec<C64>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let t: Vec<C64> = (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                let rad = (0.01 + u * (100.0 - 0.01)).sqrt();
                let th: f64 = rng.gen::<f64>() * 2.0 * PI;
                C64::from_polar(rad, th)
            })
            .collect();
        let rest: C64 = t[1..].iter().zip(a_at_base).map(|(al, a)| al / a).sum();
        let lead = t[0] - rest;
        if lead.norm() > 1e-6 * (t[0].norm() + rest.norm()) {
            out.push(t);
        }
    }
    out
}

/// `alpha^2 = (A_1 - sum_l A_l / a_l) / b_1` as a rational function.
fn alpha_squared(m: &WarpedMetric, tuple: &[C64]) -> Option<RationalFn> {
    let mut acc = RationalFn::constant(tuple[0]);
    for (al, a) in tuple[1..].iter().zip(m.warping()) {
        let term = a.recip().ok()?.scale(*al);
        acc = &acc - &term;
    }
    acc.checked_div(m.b1()).ok()
}

/// A metrically ordinary point from a small search grid.
pub fn find_base_point(m: &WarpedMetric) -> Result<Vec<C64>, CoercivityError> {
    let mut candidates = vec![C64::new(0.0, 0.0)];
    for rad in [0.1, 0.3, 0.5, 0.7] {
        for k in 0..8 {
            candidates.push(C64::from_polar(rad, 2.0 * PI * k as f64 / 8.0 + 0.2));
        }
    }
    let n = m.dim();
    let mut point = vec![C64::new(0.0, 0.0); n];
    // Components are independent: u1 meets b1 and the a_k, uk meets f_k.
    for comp in 0..n {
        let ok = candidates.iter().find(|&&c| {
            m.loci(comp, Chart::Affine)
                .iter()
                .all(|l| (l.at - c).norm() > 1e-6)
                && (m.factors()[comp] != FactorKind::Disc || c.norm() < 1.0)
        });
        point[comp] = *ok.ok_or(CoercivityError::NoOrdinaryBasePoint)?;
    }
    if m.is_metrically_ordinary(&point) {
        Ok(point)
    } else {
        Err(CoercivityError::NoOrdinaryBasePoint)
    }
}

/// Coercivity check at the default base point.
pub fn coercivity_check(m: &WarpedMetric, tuples: usize, seed: u64) -> Result<CoercivityVerdict, CoercivityError> {
    let base = find_base_point(m)?;
    coercivity_check_at(
        m,
        &base,
        &CoercivityOptions {
            tuples,
            seed,
            ..Default::default()
        },
    )
}

/// Coercivity check at a given metrically ordinary base point.
pub fn coercivity_check_at(
    m: &WarpedMetric,
    base: &[C64],
    opts: &CoercivityOptions,
) -> Result<CoercivityVerdict, CoercivityError> {
    if opts.tuples == 0 {
        return Err(CoercivityError::NoTuples);
    }
    if !m.is_metrically_ordinary(base) {
        m.christoffel(base)?;
        return Err(CoercivityError::NoOrdinaryBasePoint);
    }
    let n = m.dim();
    let x0 = base[0];
    let a_at: Vec<C64> = m
        .warping()
        .iter()
        .map(|a| a.eval_finite(x0).expect("ordinary base point"))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let tuples = sample_tuples(&mut rng, n, &a_at, opts.tuples);
    let f0 = m.factors()[0];

    let per_tuple: Vec<ComponentVerdict> = tuples
        .par_iter()
        .map(|t| {
            let Some(alpha2) = alpha_squared(m, t) else {
                return ComponentVerdict::Undetermined {
                    reason: "could not form alpha^2".into(),
                    evidence: None,
                };
            };
            if f0 == FactorKind::Plane {
                if let Some(Ok(form)) = alpha2.as_polynomial().as_ref().and_then(quadratic_coeffs).map(|(a, b, c)| {
                    classify_quadratic_primitive(a, b, c)
                }) {
                    return ComponentVerdict::CoerciveClosedForm { form };
                }
            }
            match alpha2.recip() {
                Ok(r) => coercivity_sample_at(&r, f0, x0, &opts.sample),
                Err(_) => ComponentVerdict::Undetermined {
                    reason: "alpha^2 vanishes identically".into(),
                    evidence: None,
                },
            }
        })
        .collect();
    let mut tally = TupleTally::default();
    for v in &per_tuple {
        match v {
            ComponentVerdict::CoerciveClosedForm { .. } => tally.closed_form += 1,
            ComponentVerdict::CoerciveSampled { .. } => tally.sampled += 1,
            ComponentVerdict::NotCoercive { .. } => tally.not_coercive += 1,
            ComponentVerdict::Undetermined { .. } => tally.undetermined += 1,
        }
    }
    let worst = per_tuple
        .iter()
        .min_by_key(|v| v.rank())
        .cloned()
        .expect("at least one tuple");
    let mut components = vec![ComponentReport {
        component: 1,
        verdict: worst,
        tuples: Some(tally),
    }];

    let fibers: Vec<ComponentVerdict> = (1..n)
        .into_par_iter()
        .map(|k| {
            let f = &m.fiber()[k - 1];
            let kind = m.factors()[k];
            if kind == FactorKind::Plane {
                if let Some(Ok(form)) = closed_form_of_reciprocal(f) {
                    return ComponentVerdict::CoerciveClosedForm { form };
                }
            }
            coercivity_sample_at(f, kind, base[k], &opts.sample)
        })
        .collect();
    for (k, v) in fibers.into_iter().enumerate() {
        components.push(ComponentReport {
            component: k + 2,
            verdict: v,
            tuples: None,
        });
    }
    Ok(CoercivityVerdict {
        overall: overall(&components),
        components,
        base_point: base.to_vec(),
        seed: opts.seed,
        tuples: opts.tuples,
    })
}

fn overall(components: &[ComponentReport]) -> Overall {
    let worst = components.iter().map(|c| c.verdict.rank()).min().unwrap_or(3);
    match worst {
        0 => Overall::NotCoercive,
        1 => Overall::Undetermined,
        _ => Overall::Coercive,
    }
}

/// Exact decision for the quadratic warped family: plane factors,
/// `b1 = 1`, `f_l = 1` and `a_l = 1/q_l` with `q_l` of degree at most 2.
/// Then `alpha^2 = A_1 - sum A_l q_l` is quadratic and every primitive has
/// a closed form.
pub fn coercivity_check_family(m: &WarpedMetric) -> Result<CoercivityVerdict, CoercivityError> {
    let mismatch = |why: &str| Err(CoercivityError::PatternMismatch(why.into()));
    if m.factors().iter().any(|&f| f != FactorKind::Plane) {
        return mismatch("all factors must be planes");
    }
    if m.b1() != &RationalFn::one() {
        return mismatch("b1 must be 1");
    }
    if m.fiber().iter().any(|f| f != &RationalFn::one()) {
        return mismatch("every f_l must be 1");
    }
    let mut qs = Vec::with_capacity(m.dim() - 1);
    for a in m.warping() {
        let q = a.recip().ok().and_then(|q| q.as_polynomial());
        match q.as_ref().and_then(quadratic_coeffs) {
            Some(_) => qs.push(q.expect("checked")),
            None => return mismatch("every a_l must be 1/(quadratic)"),
        }
    }
    let opts = CoercivityOptions::default();
    let base = find_base_point(m)?;
    let a_at: Vec<C64> = m.warping().iter().map(|a| a.eval_finite(base[0]).expect("ordinary")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let tuples = sample_tuples(&mut rng, m.dim(), &a_at, opts.tuples);
    let mut tally = TupleTally::default();
    let mut first = None;
    for t in &tuples {
        let mut alpha2 = ComplexPoly::constant(t[0]);
        for (al, q) in t[1..].iter().zip(&qs) {
            alpha2 = &alpha2 - &q.scale(*al);
        }
        let (a, b, c) = quadratic_coeffs(&alpha2).expect("degree <= 2");
        match classify_quadratic_primitive(a, b, c) {
            Ok(form) => {
                tally.closed_form += 1;
                first.get_or_insert(form);
            }
            Err(_) => tally.degenerate += 1,
        }
    }
    let Some(form) = first else {
        return Err(CoercivityError::DegenerateTriple);
    };
    let mut components = vec![ComponentReport {
        component: 1,
        verdict: ComponentVerdict::CoerciveClosedForm { form },
        tuples: Some(tally),
    }];
    let linear = classify_quadratic_primitive(C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0))?;
    for k in 2..=m.dim() {
        components.push(ComponentReport {
            component: k,
            verdict: ComponentVerdict::CoerciveClosedForm { form: linear },
            tuples: None,
        });
    }
    Ok(CoercivityVerdict {
        overall: Overall::Coercive,
        components,
        base_point: base,
        seed: opts.seed,
        tuples: opts.tuples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn fd_identity(form: &PrimitiveForm, eta: C64) -> C64 {
        let h = 1e-6 * (1.0 + eta.norm());
        let d = (form.eval(eta + h) - form.eval(eta - h)) / (2.0 * h);
        d * form.radical(eta)
    }

    #[test]
    fn primitive_examples() {
        let f = classify_quadratic_primitive(c(0., 0.), c(1., 0.), c(0., 0.)).unwrap();
        assert_eq!(f.kind, PrimitiveKind::SqrtForm);
        assert!((f.eval(c(4., 0.)) - c(4., 0.)).norm() < 1e-14);
        let f = classify_quadratic_primitive(c(0., 0.), c(0., 0.), c(1., 0.)).unwrap();
        assert_eq!(f.kind, PrimitiveKind::LinearForm);
        assert_eq!(f.eval(c(2., 3.)), c(2., 3.));
        let f = classify_quadratic_primitive(c(1., 0.), c(0., 0.), c(-1., 0.)).unwrap();
        assert_eq!(f.kind, PrimitiveKind::LogForm);
        assert_eq!(f.delta, c(4., 0.));
        let eta = c(2., 0.);
        assert!((f.eval(eta) - (eta + (eta * eta - 1.0).sqrt()).ln()).norm() < 1e-14);
        assert!((fd_identity(&f, c(0.3, 0.7)) - 1.0).norm() < 1e-8);
    }

    #[test]
    fn degenerate_and_zero() {
        assert_eq!(
            classify_quadratic_primitive(c(1., 0.), c(2., 0.), c(1., 0.)),
            Err(CoercivityError::DegenerateTriple)
        );
        assert_eq!(
            classify_quadratic_primitive(c(0., 0.), c(0., 0.), c(0., 0.)),
            Err(CoercivityError::AllZero)
        );
    }

    fn fast() -> SampleOptions {
        SampleOptions {
            rays: 16,
            ..Default::default()
        }
    }

    #[test]
    fn sampled_examples() {
        let one = RationalFn::one();
        let v = coercivity_sample_at(&one, FactorKind::Disc, c(0., 0.), &fast());
        assert!(matches!(v, ComponentVerdict::NotCoercive { .. }), "{v:?}");
        let v = coercivity_sample_at(&one, FactorKind::Plane, c(0., 0.), &fast());
        assert!(matches!(v, ComponentVerdict::CoerciveSampled { .. }), "{v:?}");
        let eta = RationalFn::identity();
        let v = coercivity_sample_at(&eta, FactorKind::Plane, c(0.5, 0.), &fast());
        assert!(matches!(v, ComponentVerdict::CoerciveSampled { .. }), "{v:?}");
    }

    #[test]
    fn log_primitive_is_unbounded_through_loops() {
        // sqrt(r) = 1/eta: Phi = log eta, bounded on rays in the imaginary
        // direction except through the period 2 pi i.
        let r = RationalFn::new(ComplexPoly::one(), ComplexPoly::from_real(&[0.0, 0.0, 1.0])).unwrap();
        let v = coercivity_sample_at(&r, FactorKind::Plane, c(1., 0.), &fast());
        match v {
            ComponentVerdict::CoerciveSampled { evidence } => {
                assert_eq!(evidence.periods.len(), 1);
                assert!((evidence.periods[0].norm() - 2.0 * PI).abs() < 1e-6);
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn family_examples() {
        let q = |a: f64, b: f64, c: f64| RationalFn::new(ComplexPoly::one(), ComplexPoly::from_real(&[c, b, a])).unwrap();
        let fam = |a2: RationalFn| {
            WarpedMetric::new(vec![FactorKind::Plane; 2], RationalFn::one(), vec![a2], vec![RationalFn::one()]).unwrap()
        };
        let v = coercivity_check_family(&fam(q(1.0, 0.0, -1.0))).unwrap();
        assert_eq!(v.overall, Overall::Coercive);
        let v = coercivity_check_family(&fam(q(0.0, 1.0, 0.0))).unwrap();
        assert_eq!(v.overall, Overall::Coercive);
        match &v.components[0].verdict {
            ComponentVerdict::CoerciveClosedForm { form } => assert_eq!(form.kind, PrimitiveKind::SqrtForm),
            v => panic!("{v:?}"),
        }
        let flat1 = WarpedMetric::flat(vec![FactorKind::Plane]);
        assert_eq!(coercivity_check_family(&flat1).unwrap().overall, Overall::Coercive);
        let disc = WarpedMetric::flat(vec![FactorKind::Disc]);
        assert!(matches!(
            coercivity_check_family(&disc),
            Err(CoercivityError::PatternMismatch(_))
        ));
    }

    #[test]
    fn metric_checks() {
        let plane = WarpedMetric::flat(vec![FactorKind::Plane; 2]);
        assert_eq!(coercivity_check(&plane, 4, 0).unwrap().overall, Overall::Coercive);
        let disc = WarpedMetric::flat(vec![FactorKind::Disc, FactorKind::Plane]);
        let v = coercivity_check_at(
            &disc,
            &[c(0., 0.), c(0., 0.)],
            &CoercivityOptions {
                tuples: 2,
                seed: 1,
                sample: fast(),
            },
        )
        .unwrap();
        assert_eq!(v.overall, Overall::NotCoercive);
        assert_eq!(coercivity_check(&plane, 0, 0), Err(CoercivityError::NoTuples));
    }
}
