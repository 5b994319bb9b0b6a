//! Rational first-order systems `u_i' = sum_t c_t(z) prod_l u_l^p_tl`,
//! used as closed-form oracles for continuation and classification.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::metric::Chart;
use crate::ode::{Obstruction, OdeSystem, Sample, SingularRhs};
use crate::rational::{ComplexPoly, RationalFn, C64};

/// One monomial term `coef(z) * prod_l u_l^powers[l]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coef: RationalFn,
    #[serde(default)]
    pub powers: Vec<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticSystem {
    equations: Vec<Vec<Term>>,
    #[serde(skip)]
    z_poles: Vec<C64>,
    #[serde(skip)]
    u_singular: Vec<bool>,
}

#[derive(Deserialize)]
struct RawSystem {
    equations: Vec<Vec<Term>>,
}

impl<'de> Deserialize<'de> for SyntheticSystem {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawSystem::deserialize(d)?;
        SyntheticSystem::new(raw.equations).map_err(serde::de::Error::custom)
    }
}

impl SyntheticSystem {
    pub fn new(equations: Vec<Vec<Term>>) -> Result<Self, ConfigError> {
        let n = equations.len();
        if n == 0 {
            return Err(ConfigError::Json("a synthetic system needs at least one equation".into()));
        }
        let mut u_singular = vec![false; n];
        let mut z_poles: Vec<C64> = Vec::new();
        for eq in &equations {
            for t in eq {
                if t.powers.len() > n {
                    return Err(ConfigError::Json(format!(
                        "term has {} exponents for a {n}-dimensional system",
                        t.powers.len()
                    )));
                }
                for (l, &p) in t.powers.iter().enumerate() {
                    if p < 0 {
                        u_singular[l] = true;
                    }
                }
                for r in t.coef.singular_points()?.poles {
                    if !z_poles.iter().any(|&q| (q - r.at).norm() <= 1e-9 * (1.0 + q.norm())) {
                        z_poles.push(r.at);
                    }
                }
            }
        }
        Ok(Self {
            equations,
            z_poles,
            u_singular,
        })
    }

    /// Single equation `u' = sum_t coef_t(z) u^p_t`.
    pub fn scalar(terms: Vec<(RationalFn, i32)>) -> Self {
        Self::new(vec![terms
            .into_iter()
            .map(|(coef, p)| Term { coef, powers: vec![p] })
            .collect()])
        .expect("scalar system with valid coefficients")
    }

    pub fn equations(&self) -> &[Vec<Term>] {
        &self.equations
    }

    /// Poles of the coefficients in the parameter plane.
    pub fn parameter_poles(&self) -> &[C64] {
        &self.z_poles
    }
}

impl OdeSystem for SyntheticSystem {
    fn dim(&self) -> usize {
        self.equations.len()
    }

    fn position_dim(&self) -> usize {
        self.equations.len()
    }

    fn rhs(&self, z: C64, y: &[C64], _charts: &[Chart], dy: &mut [C64]) -> Result<(), SingularRhs> {
        for (i, eq) in self.equations.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for t in eq {
                let mut term = t.coef.eval_finite(z).ok_or(SingularRhs)?;
                for (l, &p) in t.powers.iter().enumerate() {
                    if p != 0 {
                        if p < 0 && y[l].norm() == 0.0 {
                            return Err(SingularRhs);
                        }
                        term *= y[l].powi(p);
                    }
                }
                acc += term;
            }
            dy[i] = acc;
        }
        Ok(())
    }

    fn obstruction(&self, z: C64, y: &[C64], _charts: &[Chart], guard_rel: f64) -> Option<Obstruction> {
        for &p in &self.z_poles {
            if (z - p).norm() <= guard_rel * (1.0 + p.norm()) {
                return Some(Obstruction::SingularLocus {
                    locus: format!("coefficient pole at z = {p}"),
                });
            }
        }
        for (l, &sing) in self.u_singular.iter().enumerate() {
            if sing && y[l].norm() <= guard_rel * (1.0 + y[l].norm()) {
                return Some(Obstruction::SingularLocus {
                    locus: format!("u{} = 0", l + 1),
                });
            }
        }
        None
    }
}

/// A synthetic system with an initial condition and the parameter value of
/// its singularity of interest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProblem {
    pub system: SyntheticSystem,
    pub z0: C64,
    pub u0: Vec<C64>,
    pub z_star: C64,
}

impl SyntheticProblem {
    pub fn start(&self) -> Sample {
        Sample {
            z: self.z0,
            y: self.u0.clone(),
            charts: Vec::new(),
        }
    }

    /// Built-in oracle systems, by name:
    ///
    /// | name | equation | start | solution |
    /// |---|---|---|---|
    /// | `identity` | `u' = 1` | `u(1) = 1` | `z` |
    /// | `sqrt` | `u' = 1/(2u)` | `u(1) = 1` | `sqrt z` |
    /// | `log` | `u' = 1/z` | `u(1) = 0` | `log z` |
    /// | `removable_log` | `u' = u/z + 1` | `u(1) = 0` | `z log z` |
    /// | `riccati` | `u' = u^2` | `u(0) = 1` | `1/(1-z)` |
    /// | `pole:k` | `u' = k u/(1-z)` | `u(0) = 1` | `(1-z)^-k` |
    /// | `branch_pole:k` | `u' = u^(k+1)/k` | `u(0) = 1` | `(1-z)^(-1/k)` |
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let c = |re: f64| C64::new(re, 0.0);
        let unknown = || ConfigError::UnknownSynthetic(name.to_string());
        let (base, k) = match name.split_once(':') {
            Some((b, k)) => {
                let k: u32 = k.trim().parse().map_err(|_| unknown())?;
                if !(1..=16).contains(&k) {
                    return Err(unknown());
                }
                (b.trim(), Some(k))
            }
            None => (name.trim(), None),
        };
        let inv_z = RationalFn::new(ComplexPoly::one(), ComplexPoly::identity())?;
        let (system, z0, u0, z_star) = match (base, k) {
            ("identity", None) => (SyntheticSystem::scalar(vec![(RationalFn::one(), 0)]), 1.0, 1.0, 0.0),
            ("sqrt", None) => (
                SyntheticSystem::scalar(vec![(RationalFn::constant(c(0.5)), -1)]),
                1.0,
                1.0,
                0.0,
            ),
            ("log", None) => (SyntheticSystem::scalar(vec![(inv_z, 0)]), 1.0, 0.0, 0.0),
            ("removable_log", None) => (
                SyntheticSystem::scalar(vec![(inv_z, 1), (RationalFn::one(), 0)]),
                1.0,
                0.0,
                0.0,
            ),
            ("riccati", None) => (SyntheticSystem::scalar(vec![(RationalFn::one(), 2)]), 0.0, 1.0, 1.0),
            ("pole", Some(k)) => {
                let coef = RationalFn::new(
                    ComplexPoly::constant(c(k as f64)),
                    ComplexPoly::from_real(&[1.0, -1.0]),
                )?;
                (SyntheticSystem::scalar(vec![(coef, 1)]), 0.0, 1.0, 1.0)
            }
            ("branch_pole", Some(k)) => (
                SyntheticSystem::scalar(vec![(RationalFn::constant(c(1.0 / k as f64)), k as i32 + 1)]),
                0.0,
                1.0,
                1.0,
            ),
            _ => return Err(unknown()),
        };
        Ok(Self {
            system,
            z0: c(z0),
            u0: vec![c(u0)],
            z_star: c(z_star),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{integrate_leg, IntegratorConfig, Leg, Status};

    fn run(name: &str, to: C64) -> (Status, C64) {
        let p = SyntheticProblem::preset(name).unwrap();
        let leg = Leg::Segment { from: p.z0, to };
        let tr = integrate_leg(&p.system, leg, p.start(), &IntegratorConfig::with_tol(1e-10));
        (tr.status.clone(), tr.last().y[0])
    }

    #[test]
    fn presets_match_closed_forms() {
        let z = C64::new(2.0, 1.0);
        let (s, u) = run("sqrt", z);
        assert_eq!(s, Status::Completed);
        assert!((u - z.sqrt()).norm() < 1e-8);
        let (_, u) = run("log", z);
        assert!((u - z.ln()).norm() < 1e-8);
        let (_, u) = run("removable_log", z);
        assert!((u - z * z.ln()).norm() < 1e-8);
        let (_, u) = run("pole:3", C64::new(0.5, 0.5));
        assert!((u - (C64::new(0.5, -0.5)).powi(-3)).norm() < 1e-8);
        let (_, u) = run("branch_pole:2", C64::new(0.5, 0.0));
        assert!((u - 2f64.sqrt()).norm() < 1e-8);
        let (_, u) = run("riccati", C64::new(-1.0, 0.0));
        assert!((u - 0.5).norm() < 1e-8);
    }

    #[test]
    fn riccati_blows_up_at_one() {
        let (s, _) = run("riccati", C64::new(2.0, 0.0));
        match s {
            Status::BlowUp { z, .. } => assert!((z - 1.0).norm() < 1e-7),
            s => panic!("unexpected {s:?}"),
        }
    }

    #[test]
    fn log_hits_coefficient_pole() {
        let (s, _) = run("log", C64::new(-1.0, 0.0));
        assert!(matches!(s, Status::SingularLocusHit { .. }));
    }

    #[test]
    fn unknown_names_rejected() {
        for n in ["nope", "pole", "pole:0", "pole:x", "sqrt:2"] {
            assert!(SyntheticProblem::preset(n).is_err(), "{n}");
        }
    }

    #[test]
    fn json_roundtrip() {
        let p = SyntheticProblem::preset("removable_log").unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: SyntheticProblem = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
    }
}
