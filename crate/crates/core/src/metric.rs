//! Diagonal warped-product metrics
//! `b1(u1) du1^2 + sum_k a_k(u1) f_k(uk) duk^2` on products of discs,
//! planes and Riemann spheres.
//!
//! Sphere factors carry two affine charts, `u` and `w = 1/u`. Coefficients are
//! transported to the `w` chart by substitution; the coefficient of the
//! factor's own line element also picks up the Jacobian `w^-4`.

use serde::{Deserialize, Serialize};

use crate::error::{MetricError, RationalError};
use crate::rational::{Extended, RationalFn, C64, ROOT_SEPARATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactorKind {
    Disc,
    Plane,
    Sphere,
}

/// Affine chart of a coordinate. Only sphere factors use `Inverted`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Chart {
    #[default]
    Affine,
    Inverted,
}

impl Chart {
    pub fn flip(self) -> Self {
        match self {
            Chart::Affine => Chart::Inverted,
            Chart::Inverted => Chart::Affine,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocusKind {
    Zero,
    Pole,
}

/// A zero or pole of one metric coefficient, as seen by one coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocusPoint {
    pub component: usize,
    pub chart: Chart,
    pub coefficient: String,
    pub kind: LocusKind,
    pub at: C64,
}

impl LocusPoint {
    pub fn label(&self) -> String {
        let kind = match self.kind {
            LocusKind::Zero => "zero",
            LocusKind::Pole => "pole",
        };
        let chart = match self.chart {
            Chart::Affine => "",
            Chart::Inverted => " (w chart)",
        };
        format!(
            "{kind} of {} at u{} = {}{chart}",
            self.coefficient,
            self.component + 1,
            self.at
        )
    }
}

/// Coefficients and their derivatives in one chart.
#[derive(Debug, Clone)]
struct ChartCoeffs {
    b1: RationalFn,
    db1: RationalFn,
    a: Vec<RationalFn>,
    da: Vec<RationalFn>,
}

#[derive(Debug, Clone)]
struct FiberCoeffs {
    f: RationalFn,
    df: RationalFn,
}

/// Nonzero Christoffel symbols at a point, 0-based component indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ChristoffelTable {
    /// `G^1_11 = b1'/(2 b1)`
    pub g1_11: C64,
    /// `G^1_kk = -a_k' f_k / (2 b1)`, indexed by `k - 1`
    pub g1_kk: Vec<C64>,
    /// `G^k_kk = f_k'/(2 f_k)`
    pub gk_kk: Vec<C64>,
    /// `G^k_1k = G^k_k1 = a_k'/(2 a_k)`
    pub gk_1k: Vec<C64>,
}

impl ChristoffelTable {
    pub fn dim(&self) -> usize {
        self.g1_kk.len() + 1
    }

    /// `Gamma^upper_{i j}`; zero outside the warped sparsity pattern.
    pub fn get(&self, upper: usize, i: usize, j: usize) -> C64 {
        let zero = C64::new(0.0, 0.0);
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        match (upper, i, j) {
            (0, 0, 0) => self.g1_11,
            (0, i, j) if i == j => self.g1_kk[i - 1],
            (k, 0, j) if k > 0 && j == k => self.gk_1k[k - 1],
            (k, i, j) if k > 0 && i == k && j == k => self.gk_kk[k - 1],
            _ => zero,
        }
    }
}

/// The configuration-file shape of a warped metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub factors: Vec<FactorKind>,
    pub b1: RationalFn,
    #[serde(default)]
    pub a: Vec<RationalFn>,
    #[serde(default)]
    pub f: Vec<RationalFn>,
}

/// A warped product metric together with its precomputed derivatives and
/// singular sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MetricConfig", into = "MetricConfig")]
pub struct WarpedMetric {
    factors: Vec<FactorKind>,
    b1: RationalFn,
    a: Vec<RationalFn>,
    f: Vec<RationalFn>,
    base: [ChartCoeffs; 2],
    fibers: Vec<[FiberCoeffs; 2]>,
    /// `loci[component][chart]`
    loci: Vec<[Vec<LocusPoint>; 2]>,
}

impl PartialEq for WarpedMetric {
    fn eq(&self, other: &Self) -> bool {
        self.factors == other.factors && self.b1 == other.b1 && self.a == other.a && self.f == other.f
    }
}

impl From<WarpedMetric> for MetricConfig {
    fn from(m: WarpedMetric) -> Self {
        MetricConfig {
            factors: m.factors,
            b1: m.b1,
            a: m.a,
            f: m.f,
        }
    }
}

impl TryFrom<MetricConfig> for WarpedMetric {
    type Error = MetricError;
    fn try_from(c: MetricConfig) -> Result<Self, Self::Error> {
        WarpedMetric::new(c.factors, c.b1, c.a, c.f)
    }
}

fn chart_index(c: Chart) -> usize {
    match c {
        Chart::Affine => 0,
        Chart::Inverted => 1,
    }
}

fn loci_of(
    r: &RationalFn,
    name: &str,
    component: usize,
    chart: Chart,
    out: &mut Vec<LocusPoint>,
) -> Result<(), RationalError> {
    let sp = r.singular_points()?;
    for (roots, kind) in [(sp.zeros, LocusKind::Zero), (sp.poles, LocusKind::Pole)] {
        for root in roots {
            out.push(LocusPoint {
                component,
                chart,
                coefficient: name.to_string(),
                kind,
                at: root.at,
            });
        }
    }
    Ok(())
}

impl WarpedMetric {
    /// Validates and precomputes a warped metric. `a` and `f` belong to
    /// factors `2..=N` in order.
    pub fn new(
        factors: Vec<FactorKind>,
        b1: RationalFn,
        a: Vec<RationalFn>,
        f: Vec<RationalFn>,
    ) -> Result<Self, MetricError> {
        let n = factors.len();
        if n == 0 {
            return Err(MetricError::InvalidMetric("at least one factor required".into()));
        }
        if a.len() != n - 1 || f.len() != n - 1 {
            return Err(MetricError::InvalidMetric(format!(
                "{} factors need {} warping and fiber functions, got {} and {}",
                n,
                n - 1,
                a.len(),
                f.len()
            )));
        }
        if !b1.is_nonzero() || a.iter().chain(f.iter()).any(|r| !r.is_nonzero()) {
            return Err(MetricError::InvalidMetric(
                "coefficients must be nonzero rational functions".into(),
            ));
        }

        let affine = ChartCoeffs {
            db1: b1.derivative(),
            da: a.iter().map(RationalFn::derivative).collect(),
            b1: b1.clone(),
            a: a.clone(),
        };
        let inverted = if factors[0] == FactorKind::Sphere {
            let b1w = b1.compose_reciprocal().mul_power(-4);
            let aw: Vec<RationalFn> = a.iter().map(RationalFn::compose_reciprocal).collect();
            ChartCoeffs {
                db1: b1w.derivative(),
                da: aw.iter().map(RationalFn::derivative).collect(),
                b1: b1w,
                a: aw,
            }
        } else {
            affine.clone()
        };

        let mut fibers = Vec::with_capacity(n - 1);
        for (k, fk) in f.iter().enumerate() {
            let aff = FiberCoeffs {
                f: fk.clone(),
                df: fk.derivative(),
            };
            let inv = if factors[k + 1] == FactorKind::Sphere {
                let fw = fk.compose_reciprocal().mul_power(-4);
                FiberCoeffs {
                    df: fw.derivative(),
                    f: fw,
                }
            } else {
                aff.clone()
            };
            fibers.push([aff, inv]);
        }

        let mut loci = Vec::with_capacity(n);
        for comp in 0..n {
            let mut pair: [Vec<LocusPoint>; 2] = [Vec::new(), Vec::new()];
            for chart in [Chart::Affine, Chart::Inverted] {
                if chart == Chart::Inverted && factors[comp] != FactorKind::Sphere {
                    continue;
                }
                let out = &mut pair[chart_index(chart)];
                if comp == 0 {
                    let cc = if chart == Chart::Affine { &affine } else { &inverted };
                    loci_of(&cc.b1, "b1", 0, chart, out)?;
                    for (k, ak) in cc.a.iter().enumerate() {
                        loci_of(ak, &format!("a{}", k + 2), 0, chart, out)?;
                    }
                } else {
                    let fc = &fibers[comp - 1][chart_index(chart)];
                    loci_of(&fc.f, &format!("f{}", comp + 1), comp, chart, out)?;
                }
            }
            loci.push(pair);
        }

        Ok(Self {
            factors,
            b1,
            a,
            f,
            base: [affine, inverted],
            fibers,
            loci,
        })
    }

    /// Flat metric on the given factors.
    pub fn flat(factors: Vec<FactorKind>) -> Self {
        let n = factors.len();
        Self::new(
            factors,
            RationalFn::one(),
            vec![RationalFn::one(); n - 1],
            vec![RationalFn::one(); n - 1],
        )
        .expect("flat metric is valid")
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[FactorKind] {
        &self.factors
    }

    pub fn b1(&self) -> &RationalFn {
        &self.b1
    }

    /// Warping functions `a_2..a_N`.
    pub fn warping(&self) -> &[RationalFn] {
        &self.a
    }

    /// Fiber coefficients `f_2..f_N`.
    pub fn fiber(&self) -> &[RationalFn] {
        &self.f
    }

    /// Zeros and poles of the coefficients that constrain `component`, in
    /// the given chart.
    pub fn loci(&self, component: usize, chart: Chart) -> &[LocusPoint] {
        &self.loci[component][chart_index(chart)]
    }

    fn check_point(&self, u: &[C64], charts: &[Chart]) -> Result<(), MetricError> {
        if u.len() != self.dim() {
            return Err(MetricError::DimensionMismatch {
                expected: self.dim(),
                got: u.len(),
            });
        }
        if charts.len() != self.dim() {
            return Err(MetricError::DimensionMismatch {
                expected: self.dim(),
                got: charts.len(),
            });
        }
        for (i, (&ui, &kind)) in u.iter().zip(&self.factors).enumerate() {
            if kind == FactorKind::Disc && ui.norm() >= 1.0 {
                return Err(MetricError::DomainViolation {
                    component: i,
                    value: ui,
                });
            }
            if kind != FactorKind::Sphere && charts[i] == Chart::Inverted {
                return Err(MetricError::InvalidMetric(format!(
                    "component {} is not a sphere factor but is flagged as w-chart",
                    i + 1
                )));
            }
        }
        Ok(())
    }

    fn base_in(&self, chart: Chart) -> &ChartCoeffs {
        &self.base[chart_index(chart)]
    }

    fn fiber_in(&self, k: usize, chart: Chart) -> &FiberCoeffs {
        &self.fibers[k][chart_index(chart)]
    }

    /// Diagonal of the metric at an affine point.
    pub fn eval(&self, u: &[C64]) -> Result<Vec<Extended>, MetricError> {
        self.eval_in(u, &vec![Chart::Affine; u.len()])
    }

    /// Diagonal of the metric in the given per-component charts.
    pub fn eval_in(&self, u: &[C64], charts: &[Chart]) -> Result<Vec<Extended>, MetricError> {
        self.check_point(u, charts)?;
        let base = self.base_in(charts[0]);
        let mut g = Vec::with_capacity(self.dim());
        g.push(base.b1.eval(u[0])?);
        for k in 0..self.dim() - 1 {
            let a = base.a[k].eval(u[0])?;
            let f = self.fiber_in(k, charts[k + 1]).f.eval(u[k + 1])?;
            g.push(match (a, f) {
                (Extended::Finite(a), Extended::Finite(f)) => Extended::Finite(a * f),
                _ => Extended::Infinity,
            });
        }
        Ok(g)
    }

    /// True iff every coefficient is finite and nonzero at `u`.
    pub fn is_metrically_ordinary(&self, u: &[C64]) -> bool {
        self.is_ordinary_in(u, &vec![Chart::Affine; u.len()])
    }

    pub fn is_ordinary_in(&self, u: &[C64], charts: &[Chart]) -> bool {
        self.ordinary_reason(u, charts).is_none()
    }

    /// `None` if ordinary, otherwise why not.
    fn ordinary_reason(&self, u: &[C64], charts: &[Chart]) -> Option<String> {
        if let Err(e) = self.check_point(u, charts) {
            return Some(e.to_string());
        }
        for (i, &ui) in u.iter().enumerate() {
            if let Some(l) = self.loci(i, charts[i]).iter().find(|l| {
                (l.at - ui).norm() <= ROOT_SEPARATION * (1.0 + l.at.norm())
            }) {
                return Some(l.label());
            }
        }
        let base = self.base_in(charts[0]);
        let ok = |r: &RationalFn, z: C64| matches!(r.eval(z), Ok(v) if v.is_finite_nonzero());
        if !ok(&base.b1, u[0]) {
            return Some("b1 is zero or infinite".into());
        }
        for k in 0..self.dim() - 1 {
            if !ok(&base.a[k], u[0]) {
                return Some(format!("a{} is zero or infinite", k + 2));
            }
            if !ok(&self.fiber_in(k, charts[k + 1]).f, u[k + 1]) {
                return Some(format!("f{} is zero or infinite", k + 2));
            }
        }
        None
    }

    fn require_ordinary(&self, u: &[C64], charts: &[Chart]) -> Result<(), MetricError> {
        match self.ordinary_reason(u, charts) {
            None => Ok(()),
            Some(reason) => Err(MetricError::SingularMetricPoint { reason }),
        }
    }

    /// Nonzero Christoffel symbols at an affine point.
    pub fn christoffel(&self, u: &[C64]) -> Result<ChristoffelTable, MetricError> {
        self.christoffel_in(u, &vec![Chart::Affine; u.len()])
    }

    pub fn christoffel_in(
        &self,
        u: &[C64],
        charts: &[Chart],
    ) -> Result<ChristoffelTable, MetricError> {
        let c = self.coefficient_values(u, charts)?;
        let n = self.dim();
        let mut t = ChristoffelTable {
            g1_11: c.db1 / (2.0 * c.b1),
            g1_kk: Vec::with_capacity(n - 1),
            gk_kk: Vec::with_capacity(n - 1),
            gk_1k: Vec::with_capacity(n - 1),
        };
        for k in 0..n - 1 {
            t.g1_kk.push(-c.da[k] * c.f[k] / (2.0 * c.b1));
            t.gk_kk.push(c.df[k] / (2.0 * c.f[k]));
            t.gk_1k.push(c.da[k] / (2.0 * c.a[k]));
        }
        Ok(t)
    }

    /// Coefficient values and derivatives at an ordinary point.
    pub(crate) fn coefficient_values(
        &self,
        u: &[C64],
        charts: &[Chart],
    ) -> Result<CoefficientValues, MetricError> {
        self.require_ordinary(u, charts)?;
        let base = self.base_in(charts[0]);
        let fin = |r: &RationalFn, z: C64| -> Result<C64, MetricError> {
            r.eval_finite(z).ok_or_else(|| MetricError::SingularMetricPoint {
                reason: "coefficient derivative is infinite".into(),
            })
        };
        let n = self.dim();
        let mut v = CoefficientValues {
            b1: fin(&base.b1, u[0])?,
            db1: fin(&base.db1, u[0])?,
            a: Vec::with_capacity(n - 1),
            da: Vec::with_capacity(n - 1),
            f: Vec::with_capacity(n - 1),
            df: Vec::with_capacity(n - 1),
        };
        for k in 0..n - 1 {
            let fc = self.fiber_in(k, charts[k + 1]);
            v.a.push(fin(&base.a[k], u[0])?);
            v.da.push(fin(&base.da[k], u[0])?);
            v.f.push(fin(&fc.f, u[k + 1])?);
            v.df.push(fin(&fc.df, u[k + 1])?);
        }
        Ok(v)
    }
}

impl WarpedMetric {
    /// Coefficient values without the ordinary-point or domain checks, for
    /// right-hand sides that must stay evaluable slightly past a boundary.
    /// `None` where a value is infinite or a coefficient vanishes.
    pub(crate) fn raw_coefficient_values(&self, u: &[C64], charts: &[Chart]) -> Option<CoefficientValues> {
        let base = self.base_in(charts[0]);
        let n = self.dim();
        let nz = |x: C64| if x.norm() > 0.0 { Some(x) } else { None };
        let mut v = CoefficientValues {
            b1: nz(base.b1.eval_finite(u[0])?)?,
            db1: base.db1.eval_finite(u[0])?,
            a: Vec::with_capacity(n - 1),
            da: Vec::with_capacity(n - 1),
            f: Vec::with_capacity(n - 1),
            df: Vec::with_capacity(n - 1),
        };
        for k in 0..n - 1 {
            let fc = self.fiber_in(k, charts[k + 1]);
            v.a.push(nz(base.a[k].eval_finite(u[0])?)?);
            v.da.push(base.da[k].eval_finite(u[0])?);
            v.f.push(nz(fc.f.eval_finite(u[k + 1])?)?);
            v.df.push(fc.df.eval_finite(u[k + 1])?);
        }
        Some(v)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct CoefficientValues {
    pub b1: C64,
    pub db1: C64,
    pub a: Vec<C64>,
    pub da: Vec<C64>,
    pub f: Vec<C64>,
    pub df: Vec<C64>,
}
