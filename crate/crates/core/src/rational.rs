//! Complex polynomials and rational functions of one variable.
//!
//! Every metric coefficient is a [`RationalFn`]. Rational functions are kept
//! in reduced form: numerator and denominator share no root within the root
//! separation tolerance, and the denominator is monic.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::RationalError;

pub type C64 = Complex64;

/// Two roots coincide iff their distance is at most this times `1 + |root|`.
pub const ROOT_SEPARATION: f64 = 1e-9;

const POLISH_MAX_ITER: usize = 100;
const ABERTH_MAX_ITER: usize = 500;

/// A point of the extended complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extended {
    Finite(C64),
    Infinity,
}

impl Extended {
    pub fn finite(self) -> Option<C64> {
        match self {
            Extended::Finite(z) => Some(z),
            Extended::Infinity => None,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Extended::Infinity)
    }

    /// True for a finite, exactly nonzero value.
    pub fn is_finite_nonzero(&self) -> bool {
        matches!(self, Extended::Finite(z) if *z != C64::new(0.0, 0.0))
    }
}

impl fmt::Display for Extended {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(z) => write!(f, "{z}"),
            Extended::Infinity => write!(f, "inf"),
        }
    }
}

/// A root with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub at: C64,
    pub multiplicity: usize,
}

/// Complex polynomial, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ComplexPoly {
    coeffs: Vec<C64>,
}

impl ComplexPoly {
    /// Builds a polynomial, trimming exactly-zero leading coefficients.
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == C64::new(0.0, 0.0) {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(C64::new(0.0, 0.0));
        }
        ComplexPoly { coeffs }
    }

    pub fn from_real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&c| C64::new(c, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self::constant(C64::new(0.0, 0.0))
    }

    pub fn one() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }

    pub fn constant(c: C64) -> Self {
        Self::new(vec![c])
    }

    /// The identity polynomial `eta`.
    pub fn identity() -> Self {
        Self::new(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)])
    }

    /// `lead * prod (eta - r)`.
    pub fn from_roots(lead: C64, roots: &[C64]) -> Self {
        let mut p = Self::constant(lead);
        for &r in roots {
            p = &p * &Self::new(vec![-r, C64::new(1.0, 0.0)]);
        }
        p
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0] == C64::new(0.0, 0.0)
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.len() == 1
    }

    pub fn leading(&self) -> C64 {
        *self.coeffs.last().unwrap()
    }

    /// Sum of coefficient magnitudes.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(C64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn derivative(&self) -> Self {
        if self.coeffs.len() == 1 {
            return Self::zero();
        }
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Coefficients in reverse order: `eta^deg * p(1/eta)`.
    pub fn reversed(&self) -> Self {
        let mut c = self.coeffs.clone();
        c.reverse();
        Self::new(c)
    }

    /// Multiplicity of the root at zero.
    pub fn zero_order(&self) -> usize {
        if self.is_zero() {
            return 0;
        }
        self.coeffs
            .iter()
            .take_while(|c| **c == C64::new(0.0, 0.0))
            .count()
    }

    /// Quotient and remainder of polynomial long division.
    pub fn div_rem(&self, divisor: &Self) -> Result<(Self, Self), RationalError> {
        if divisor.is_zero() {
            return Err(RationalError::ZeroDenominator);
        }
        let dd = divisor.degree();
        if self.degree() < dd || self.is_zero() {
            return Ok((Self::zero(), self.clone()));
        }
        let mut rem = self.coeffs.clone();
        let lead = divisor.leading();
        let mut quot = vec![C64::new(0.0, 0.0); self.degree() - dd + 1];
        for k in (0..quot.len()).rev() {
            let q = rem[k + dd] / lead;
            quot[k] = q;
            for (j, &d) in divisor.coeffs.iter().enumerate() {
                rem[k + j] -= q * d;
            }
            rem[k + dd] = C64::new(0.0, 0.0);
        }
        rem.truncate(dd.max(1));
        Ok((Self::new(quot), Self::new(rem)))
    }

    /// Divides out `(eta - r)`, discarding the remainder.
    pub fn deflate(&self, r: C64) -> Self {
        let n = self.degree();
        if n == 0 {
            return self.clone();
        }
        let mut out = vec![C64::new(0.0, 0.0); n];
        let mut acc = self.coeffs[n];
        for k in (0..n).rev() {
            out[k] = acc;
            acc = self.coeffs[k] + acc * r;
        }
        Self::new(out)
    }

    /// Residual scale used to judge a root: `sum|c| * max(1,|z|)^deg`.
    pub fn residual_scale(&self, z: C64) -> f64 {
        self.coeff_norm() * z.norm().max(1.0).powi(self.degree() as i32)
    }

    /// All roots with multiplicity, polished by Newton iteration.
    pub fn roots(&self) -> Result<Vec<Root>, RationalError> {
        if self.is_zero() {
            return Err(RationalError::ZeroPolynomialRoots);
        }
        if !self.is_finite() {
            return Err(RationalError::NonFiniteCoefficient);
        }
        // Strip exact roots at the origin; Aberth handles the rest.
        let z0 = self.zero_order();
        let reduced = Self::new(self.coeffs[z0..].to_vec());
        let mut out = Vec::new();
        if z0 > 0 {
            out.push(Root {
                at: C64::new(0.0, 0.0),
                multiplicity: z0,
            });
        }
        match reduced.degree() {
            0 => {}
            1 => out.push(Root {
                at: -reduced.coeffs[0] / reduced.coeffs[1],
                multiplicity: 1,
            }),
            _ => {
                let raw = reduced.aberth()?;
                out.extend(reduced.cluster_and_polish(raw)?);
            }
        }
        out.sort_by(|a, b| {
            a.at.re
                .partial_cmp(&b.at.re)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.at.im.partial_cmp(&b.at.im).unwrap_or(std::cmp::Ordering::Equal))
        });
        Ok(out)
    }

    /// Aberth-Ehrlich simultaneous iteration. Returns unpolished roots.
    fn aberth(&self) -> Result<Vec<C64>, RationalError> {
        let n = self.degree();
        let lead = self.leading();
        // Fujiwara-style bound for the initial circle.
        let radius = (0..n)
            .map(|k| (self.coeffs[k] / lead).norm().powf(1.0 / (n - k) as f64))
            .fold(0.0_f64, f64::max)
            .max(1e-3);
        let mut z: Vec<C64> = (0..n)
            .map(|k| {
                let th = 2.0 * std::f64::consts::PI * k as f64 / n as f64 + 0.4;
                C64::from_polar(radius, th)
            })
            .collect();
        let dp = self.derivative();
        for _ in 0..ABERTH_MAX_ITER {
            let mut max_step = 0.0_f64;
            for i in 0..n {
                let p = self.eval(z[i]);
                if p == C64::new(0.0, 0.0) {
                    continue;
                }
                let ratio = p / dp.eval(z[i]);
                let sum: C64 = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| {
                        let d = z[i] - z[j];
                        if d == C64::new(0.0, 0.0) {
                            C64::new(0.0, 0.0)
                        } else {
                            d.inv()
                        }
                    })
                    .sum();
                let denom = C64::new(1.0, 0.0) - ratio * sum;
                let step = if denom.norm() > 0.0 && (ratio / denom).is_finite() {
                    ratio / denom
                } else {
                    ratio
                };
                if step.is_finite() {
                    z[i] -= step;
                    max_step = max_step.max(step.norm() / (1.0 + z[i].norm()));
                }
            }
            if max_step < 1e-15 {
                break;
            }
        }
        if z.iter().any(|r| !r.is_finite()) {
            return Err(RationalError::RootFindingFailure);
        }
        Ok(z)
    }

    /// Groups nearby approximate roots into multiple roots, then polishes
    /// each cluster centre on the `(m-1)`-th derivative.
    fn cluster_and_polish(&self, raw: Vec<C64>) -> Result<Vec<Root>, RationalError> {
        let n = raw.len();
        // single-link clustering at a loose radius; verified below
        let mut group: Vec<usize> = (0..n).collect();
        fn find(g: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while g[r] != r {
                r = g[r];
            }
            let mut k = i;
            while g[k] != r {
                let next = g[k];
                g[k] = r;
                k = next;
            }
            r
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (raw[i] - raw[j]).norm() <= 1e-3 * (1.0 + raw[i].norm()) {
                    let (a, b) = (find(&mut group, i), find(&mut group, j));
                    group[a] = b;
                }
            }
        }
        let mut clusters: Vec<Vec<C64>> = Vec::new();
        let mut index = std::collections::BTreeMap::new();
        for (i, &r) in raw.iter().enumerate() {
            let root = find(&mut group, i);
            let slot = *index.entry(root).or_insert_with(|| {
                clusters.push(Vec::new());
                clusters.len() - 1
            });
            clusters[slot].push(r);
        }

        let mut out = Vec::new();
        for members in clusters {
            let m = members.len();
            if m > 1 {
                let centre = members.iter().sum::<C64>() / m as f64;
                if let Some(r) = self.polish_multiple(centre, m) {
                    out.push(Root {
                        at: r,
                        multiplicity: m,
                    });
                    continue;
                }
            }
            for r in members {
                out.push(Root {
                    at: self.polish_simple(r)?,
                    multiplicity: 1,
                });
            }
        }
        Ok(out)
    }

    fn polish_simple(&self, start: C64) -> Result<C64, RationalError> {
        newton(self, &self.derivative(), start).ok_or(RationalError::RootFindingFailure)
    }

    /// Polishes an `m`-fold root candidate and verifies that the lower
    /// derivatives vanish there.
    fn polish_multiple(&self, start: C64, m: usize) -> Option<C64> {
        let mut derivs = vec![self.clone()];
        for _ in 0..m {
            let d = derivs.last().unwrap().derivative();
            derivs.push(d);
        }
        let r = newton(&derivs[m - 1], &derivs[m], start)?;
        for d in derivs.iter().take(m) {
            if d.eval(r).norm() > 1e-12 * d.residual_scale(r) {
                return None;
            }
        }
        Some(r)
    }
}

fn newton(p: &ComplexPoly, dp: &ComplexPoly, start: C64) -> Option<C64> {
    let mut z = start;
    for _ in 0..POLISH_MAX_ITER {
        let val = p.eval(z);
        let scale = p.residual_scale(z);
        if val.norm() <= 1e-12 * scale {
            return Some(z);
        }
        let d = dp.eval(z);
        if d == C64::new(0.0, 0.0) || !d.is_finite() {
            return None;
        }
        let step = val / d;
        z -= step;
        if step.norm() <= 4.0 * f64::EPSILON * (1.0 + z.norm()) {
            return (p.eval(z).norm() <= 1e-10 * p.residual_scale(z)).then_some(z);
        }
    }
    None
}

impl Add for &ComplexPoly {
    type Output = ComplexPoly;
    fn add(self, rhs: &ComplexPoly) -> ComplexPoly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        let zero = C64::new(0.0, 0.0);
        ComplexPoly::new(
            (0..n)
                .map(|k| {
                    *self.coeffs.get(k).unwrap_or(&zero) + *rhs.coeffs.get(k).unwrap_or(&zero)
                })
                .collect(),
        )
    }
}

impl Sub for &ComplexPoly {
    type Output = ComplexPoly;
    fn sub(self, rhs: &ComplexPoly) -> ComplexPoly {
        self + &(-rhs)
    }
}

impl Neg for &ComplexPoly {
    type Output = ComplexPoly;
    fn neg(self) -> ComplexPoly {
        ComplexPoly::new(self.coeffs.iter().map(|c| -c).collect())
    }
}

impl Mul for &ComplexPoly {
    type Output = ComplexPoly;
    fn mul(self, rhs: &ComplexPoly) -> ComplexPoly {
        if self.is_zero() || rhs.is_zero() {
            return ComplexPoly::zero();
        }
        let mut out = vec![C64::new(0.0, 0.0); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        ComplexPoly::new(out)
    }
}

/// Zeros and poles of a rational function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularPoints {
    pub zeros: Vec<Root>,
    pub poles: Vec<Root>,
}

impl SingularPoints {
    /// All points, zeros first.
    pub fn all(&self) -> impl Iterator<Item = C64> + '_ {
        self.zeros.iter().chain(self.poles.iter()).map(|r| r.at)
    }
}

/// Reduced quotient of two complex polynomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRational")]
pub struct RationalFn {
    num: ComplexPoly,
    den: ComplexPoly,
}

#[derive(Deserialize)]
struct RawRational {
    num: ComplexPoly,
    #[serde(default = "ComplexPoly::one")]
    den: ComplexPoly,
}

impl TryFrom<RawRational> for RationalFn {
    type Error = RationalError;
    fn try_from(raw: RawRational) -> Result<Self, Self::Error> {
        RationalFn::new(raw.num, raw.den)
    }
}

impl RationalFn {
    /// Builds and reduces `num / den`.
    pub fn new(num: ComplexPoly, den: ComplexPoly) -> Result<Self, RationalError> {
        if den.is_zero() {
            return Err(RationalError::ZeroDenominator);
        }
        if !num.is_finite() || !den.is_finite() {
            return Err(RationalError::NonFiniteCoefficient);
        }
        Self { num, den }.reduced()
    }

    pub fn from_poly(p: ComplexPoly) -> Self {
        Self {
            num: p,
            den: ComplexPoly::one(),
        }
    }

    pub fn constant(c: C64) -> Self {
        Self::from_poly(ComplexPoly::constant(c))
    }

    pub fn one() -> Self {
        Self::constant(C64::new(1.0, 0.0))
    }

    /// The identity `eta`.
    pub fn identity() -> Self {
        Self::from_poly(ComplexPoly::identity())
    }

    /// Convenience constructor from real ascending coefficients.
    pub fn from_real(num: &[f64], den: &[f64]) -> Result<Self, RationalError> {
        Self::new(ComplexPoly::from_real(num), ComplexPoly::from_real(den))
    }

    pub fn num(&self) -> &ComplexPoly {
        &self.num
    }

    pub fn den(&self) -> &ComplexPoly {
        &self.den
    }

    pub fn is_nonzero(&self) -> bool {
        !self.num.is_zero()
    }

    pub fn is_polynomial(&self) -> bool {
        self.den.is_constant()
    }

    /// The polynomial `num/den` when the denominator is constant.
    pub fn as_polynomial(&self) -> Option<ComplexPoly> {
        self.is_polynomial()
            .then(|| self.num.scale(self.den.coeffs[0].inv()))
    }

    /// Cancels common roots and makes the denominator monic.
    pub fn reduced(self) -> Result<Self, RationalError> {
        let Self { mut num, mut den } = self;
        if num.is_zero() {
            return Ok(Self {
                num: ComplexPoly::zero(),
                den: ComplexPoly::one(),
            });
        }
        if num.degree() > 0 && den.degree() > 0 {
            let num_roots = num.roots()?;
            let den_roots = den.roots()?;
            for d in &den_roots {
                if let Some(n) = num_roots
                    .iter()
                    .find(|n| (n.at - d.at).norm() <= ROOT_SEPARATION * (1.0 + d.at.norm()))
                {
                    for _ in 0..d.multiplicity.min(n.multiplicity) {
                        num = num.deflate(d.at);
                        den = den.deflate(d.at);
                    }
                }
            }
        }
        let lead = den.leading();
        if lead != C64::new(1.0, 0.0) {
            let inv = lead.inv();
            num = num.scale(inv);
            den = den.scale(inv);
            // lead * (1/lead) can miss 1 by an ulp.
            if let Some(l) = den.coeffs.last_mut() {
                *l = C64::new(1.0, 0.0);
            }
        }
        Ok(Self { num, den })
    }

    /// Value in the extended plane.
    pub fn eval(&self, z: C64) -> Result<Extended, RationalError> {
        let n = self.num.eval(z);
        let d = self.den.eval(z);
        let zero = C64::new(0.0, 0.0);
        match (n == zero, d == zero) {
            (true, true) => Err(RationalError::IndeterminateValue),
            (false, true) => Ok(Extended::Infinity),
            _ => {
                let q = n / d;
                if q.is_finite() {
                    Ok(Extended::Finite(q))
                } else {
                    Ok(Extended::Infinity)
                }
            }
        }
    }

    /// Finite value, or `None` at a pole.
    pub fn eval_finite(&self, z: C64) -> Option<C64> {
        self.eval(z).ok().and_then(Extended::finite)
    }

    /// Quotient-rule derivative, reduced.
    pub fn derivative(&self) -> Self {
        let num = &(&self.num.derivative() * &self.den) - &(&self.num * &self.den.derivative());
        let den = &self.den * &self.den;
        // Squared denominator keeps every pole of the input, so reduction only
        // needs to cancel roots of `num` against `den`; fall back to the
        // unreduced quotient if root finding misbehaves.
        let raw = Self {
            num: num.clone(),
            den: den.clone(),
        };
        raw.reduced().unwrap_or(Self { num, den })
    }

    pub fn scale(&self, s: C64) -> Self {
        if s == C64::new(0.0, 0.0) {
            return Self::constant(s);
        }
        Self {
            num: self.num.scale(s),
            den: self.den.clone(),
        }
    }

    pub fn recip(&self) -> Result<Self, RationalError> {
        if self.num.is_zero() {
            return Err(RationalError::DivisionByZero);
        }
        Self::new(self.den.clone(), self.num.clone())
    }

    pub fn checked_div(&self, rhs: &Self) -> Result<Self, RationalError> {
        if rhs.num.is_zero() {
            return Err(RationalError::DivisionByZero);
        }
        Self::new(&self.num * &rhs.den, &self.den * &rhs.num)
    }

    /// `r(1/w)` as a rational function of `w`.
    pub fn compose_reciprocal(&self) -> Self {
        let dn = self.num.degree() as i32;
        let dd = self.den.degree() as i32;
        let shift = ComplexPoly::new({
            let mut c = vec![C64::new(0.0, 0.0); (dn - dd).unsigned_abs() as usize];
            c.push(C64::new(1.0, 0.0));
            c
        });
        let (num, den) = if dd >= dn {
            (&self.num.reversed() * &shift, self.den.reversed())
        } else {
            (self.num.reversed(), &self.den.reversed() * &shift)
        };
        let raw = Self {
            num: num.clone(),
            den: den.clone(),
        };
        raw.reduced().unwrap_or(Self { num, den })
    }

    /// Multiplies by `w^k` (negative `k` divides).
    pub fn mul_power(&self, k: i32) -> Self {
        let mono = ComplexPoly::new({
            let mut c = vec![C64::new(0.0, 0.0); k.unsigned_abs() as usize];
            c.push(C64::new(1.0, 0.0));
            c
        });
        let (num, den) = if k >= 0 {
            (&self.num * &mono, self.den.clone())
        } else {
            (self.num.clone(), &self.den * &mono)
        };
        let raw = Self {
            num: num.clone(),
            den: den.clone(),
        };
        raw.reduced().unwrap_or(Self { num, den })
    }

    /// Zeros and poles with multiplicity.
    pub fn singular_points(&self) -> Result<SingularPoints, RationalError> {
        let zeros = if self.num.is_constant() {
            Vec::new()
        } else {
            self.num.roots()?
        };
        let poles = if self.den.is_constant() {
            Vec::new()
        } else {
            self.den.roots()?
        };
        Ok(SingularPoints { zeros, poles })
    }
}

macro_rules! rational_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait for &RationalFn {
            type Output = RationalFn;
            fn $method(self, rhs: &RationalFn) -> RationalFn {
                let f: fn(&RationalFn, &RationalFn) -> (ComplexPoly, ComplexPoly) = $body;
                let (num, den) = f(self, rhs);
                let raw = RationalFn {
                    num: num.clone(),
                    den: den.clone(),
                };
                raw.reduced().unwrap_or(RationalFn { num, den })
            }
        }
    };
}

rational_binop!(Add, add, |a, b| (
    &(&a.num * &b.den) + &(&b.num * &a.den),
    &a.den * &b.den
));
rational_binop!(Sub, sub, |a, b| (
    &(&a.num * &b.den) - &(&b.num * &a.den),
    &a.den * &b.den
));
rational_binop!(Mul, mul, |a, b| (&a.num * &b.num, &a.den * &b.den));

impl fmt::Display for ComplexPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if *c == C64::new(0.0, 0.0) && self.coeffs.len() > 1 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            match k {
                0 => write!(f, "({c})")?,
                1 => write!(f, "({c})η")?,
                _ => write!(f, "({c})η^{k}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Display for RationalFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den.is_constant() && self.den.coeffs[0] == C64::new(1.0, 0.0) {
            write!(f, "{}", self.num)
        } else {
            write!(f, "[{}] / [{}]", self.num, self.den)
        }
    }
}
