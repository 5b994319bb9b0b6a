//! Text and JSON front ends: metric files, rational functions, complex
//! numbers, plane paths and synthetic systems. Every parser returns a
//! [`ConfigError`] on bad input and never panics.

use serde::Deserialize;

use crate::error::ConfigError;
use crate::metric::{MetricConfig, WarpedMetric};
use crate::path::{PathLeg, PlanePath};
use crate::rational::{RationalFn, C64};
use crate::synthetic::SyntheticProblem;

/// Largest polynomial degree accepted from configuration input.
pub const MAX_DEGREE: usize = 64;

fn json<'a, T: Deserialize<'a>>(text: &'a str) -> Result<T, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))
}

fn check_degree(r: &RationalFn) -> Result<(), ConfigError> {
    // Raw coefficient counts, before any trailing-zero trimming.
    let d = r.num().degree().max(r.den().degree());
    if d > MAX_DEGREE {
        return Err(ConfigError::DegreeTooLarge(d));
    }
    Ok(())
}

/// A `{"num": [...], "den": [...]}` rational function.
pub fn parse_rational(text: &str) -> Result<RationalFn, ConfigError> {
    #[derive(Deserialize)]
    struct Raw {
        num: Vec<[f64; 2]>,
        #[serde(default)]
        den: Option<Vec<[f64; 2]>>,
    }
    let raw: Raw = json(text)?;
    let too_long = |v: &[[f64; 2]]| v.len() > MAX_DEGREE + 1;
    if too_long(&raw.num) || raw.den.as_deref().is_some_and(too_long) {
        let n = raw.num.len().max(raw.den.as_ref().map_or(0, Vec::len));
        return Err(ConfigError::DegreeTooLarge(n - 1));
    }
    let r: RationalFn = json(text)?;
    check_degree(&r)?;
    Ok(r)
}

/// A metric configuration file.
pub fn parse_metric(text: &str) -> Result<WarpedMetric, ConfigError> {
    #[derive(Deserialize)]
    struct Shape {
        b1: serde_json::Value,
        #[serde(default)]
        a: Vec<serde_json::Value>,
        #[serde(default)]
        f: Vec<serde_json::Value>,
    }
    // Size-check every coefficient before any root finding happens.
    let shape: Shape = json(text)?;
    for v in std::iter::once(&shape.b1).chain(&shape.a).chain(&shape.f) {
        parse_rational(&v.to_string())?;
    }
    let cfg: MetricConfig = json(text)?;
    Ok(WarpedMetric::new(cfg.factors, cfg.b1, cfg.a, cfg.f)?)
}

/// A complex number such as `2`, `-1.5i`, `1+2i` or `3e-2-4i`.
pub fn parse_complex(text: &str) -> Result<C64, ConfigError> {
    let t = text.trim();
    let z: C64 = t.parse().map_err(|_| ConfigError::Complex(text.to_string()))?;
    if !z.is_finite() {
        return Err(ConfigError::Complex(text.to_string()));
    }
    Ok(z)
}

/// Comma-separated complex numbers.
pub fn parse_complex_list(text: &str) -> Result<Vec<C64>, ConfigError> {
    if text.trim().is_empty() {
        return Err(ConfigError::Complex(text.to_string()));
    }
    text.split(',').map(parse_complex).collect()
}

/// A path from `start` given as `;`-separated items: a complex vertex
/// (straight segment to it) or `arc:center:radius:from:to` (angles in
/// radians, counterclockwise when `to > from`).
pub fn parse_path(text: &str, start: C64) -> Result<PlanePath, ConfigError> {
    let bad = |why: &str| ConfigError::Path(format!("{why} in {text:?}"));
    let mut legs = Vec::new();
    for item in text.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        match item.strip_prefix("arc:") {
            Some(rest) => {
                let parts: Vec<&str> = rest.split(':').collect();
                let [c, r, a0, a1] = parts[..] else {
                    return Err(bad("arc needs center:radius:from:to"));
                };
                let real = |s: &str| {
                    s.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| bad("non-numeric arc parameter"))
                };
                legs.push(PathLeg::Arc {
                    center: parse_complex(c)?,
                    radius: real(r)?,
                    angle_from: real(a0)?,
                    angle_to: real(a1)?,
                });
            }
            None => legs.push(PathLeg::Segment { to: parse_complex(item)? }),
        }
    }
    if legs.is_empty() {
        return Err(bad("empty path"));
    }
    Ok(PlanePath::new(start, legs)?)
}

/// A synthetic problem: a preset name (`log`, `pole:2`, ...) or a JSON
/// object `{"system": {"equations": ...}, "z0", "u0", "z_star"}`.
pub fn parse_synthetic(text: &str) -> Result<SyntheticProblem, ConfigError> {
    let t = text.trim();
    if !t.starts_with('{') {
        return SyntheticProblem::preset(t);
    }
    #[derive(Deserialize)]
    struct Shape {
        system: Equations,
    }
    #[derive(Deserialize)]
    struct Equations {
        equations: Vec<Vec<TermShape>>,
    }
    #[derive(Deserialize)]
    struct TermShape {
        coef: serde_json::Value,
        #[serde(default)]
        powers: Vec<i32>,
    }
    let shape: Shape = json(t)?;
    for term in shape.system.equations.iter().flatten() {
        parse_rational(&term.coef.to_string())?;
        if term.powers.iter().any(|p| p.unsigned_abs() > MAX_DEGREE as u32) {
            return Err(ConfigError::DegreeTooLarge(MAX_DEGREE + 1));
        }
    }
    let p: SyntheticProblem = json(t)?;
    if p.u0.len() != p.system.equations().len() {
        return Err(ConfigError::Json(format!(
            "u0 has {} entries for a {}-dimensional system",
            p.u0.len(),
            p.system.equations().len()
        )));
    }
    Ok(p)
}
