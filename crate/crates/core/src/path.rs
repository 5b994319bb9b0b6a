//! Piecewise paths in the complex parameter plane.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::PathError;
use crate::ode::Leg;
use crate::rational::C64;

const CONTIGUITY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PathLeg {
    Segment {
        to: C64,
    },
    Arc {
        center: C64,
        radius: f64,
        angle_from: f64,
        angle_to: f64,
    },
}

/// A start point followed by contiguous segments and arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPath")]
pub struct PlanePath {
    start: C64,
    legs: Vec<PathLeg>,
}

#[derive(Deserialize)]
struct RawPath {
    start: C64,
    legs: Vec<PathLeg>,
}

impl TryFrom<RawPath> for PlanePath {
    type Error = PathError;
    fn try_from(raw: RawPath) -> Result<Self, PathError> {
        PlanePath::new(raw.start, raw.legs)
    }
}

impl PlanePath {
    pub fn new(start: C64, legs: Vec<PathLeg>) -> Result<Self, PathError> {
        if !start.is_finite() {
            return Err(PathError::NonFinite);
        }
        let mut at = start;
        for (i, leg) in legs.iter().enumerate() {
            match *leg {
                PathLeg::Segment { to } => {
                    if !to.is_finite() {
                        return Err(PathError::NonFinite);
                    }
                    at = to;
                }
                PathLeg::Arc {
                    center,
                    radius,
                    angle_from,
                    angle_to,
                } => {
                    if !(radius > 0.0 && radius.is_finite()) {
                        return Err(PathError::BadRadius);
                    }
                    if !center.is_finite() || !angle_from.is_finite() || !angle_to.is_finite() {
                        return Err(PathError::NonFinite);
                    }
                    let from = center + C64::from_polar(radius, angle_from);
                    if (from - at).norm() > CONTIGUITY * (1.0 + at.norm()) {
                        return Err(PathError::Discontinuous(i));
                    }
                    at = center + C64::from_polar(radius, angle_to);
                }
            }
        }
        Ok(Self { start, legs })
    }

    /// Straight segment.
    pub fn segment(from: C64, to: C64) -> Self {
        Self {
            start: from,
            legs: vec![PathLeg::Segment { to }],
        }
    }

    /// Polygon through the given vertices.
    pub fn polyline(vertices: &[C64]) -> Result<Self, PathError> {
        let (&start, rest) = vertices.split_first().ok_or(PathError::NonFinite)?;
        Self::new(
            start,
            rest.iter().map(|&to| PathLeg::Segment { to }).collect(),
        )
    }

    /// `turns` full counter-clockwise (negative: clockwise) circles around
    /// `center`, starting and ending at `start`.
    pub fn circle(center: C64, start: C64, turns: f64) -> Result<Self, PathError> {
        let d = start - center;
        let th = d.arg();
        Self::new(
            start,
            vec![PathLeg::Arc {
                center,
                radius: d.norm(),
                angle_from: th,
                angle_to: th + 2.0 * PI * turns,
            }],
        )
    }

    pub fn start(&self) -> C64 {
        self.start
    }

    pub fn legs(&self) -> &[PathLeg] {
        &self.legs
    }

    pub fn end(&self) -> C64 {
        self.geometric_legs()
            .last()
            .map(Leg::end)
            .unwrap_or(self.start)
    }

    pub fn is_closed(&self) -> bool {
        !self.legs.is_empty() && (self.end() - self.start).norm() <= CONTIGUITY * (1.0 + self.start.norm())
    }

    pub fn length(&self) -> f64 {
        self.geometric_legs().iter().map(Leg::length).sum()
    }

    /// Legs with explicit start points, for the integrator.
    pub fn geometric_legs(&self) -> Vec<Leg> {
        let mut at = self.start;
        self.legs
            .iter()
            .map(|leg| {
                let g = match *leg {
                    PathLeg::Segment { to } => Leg::Segment { from: at, to },
                    PathLeg::Arc {
                        center,
                        radius,
                        angle_from,
                        angle_to,
                    } => Leg::Arc {
                        center,
                        radius,
                        angle_from,
                        angle_to,
                    },
                };
                at = g.end();
                g
            })
            .collect()
    }

    /// The same curve traversed backwards.
    pub fn reversed(&self) -> Self {
        let geo = self.geometric_legs();
        let mut legs = Vec::with_capacity(geo.len());
        for g in geo.iter().rev() {
            legs.push(match *g {
                Leg::Segment { from, .. } => PathLeg::Segment { to: from },
                Leg::Arc {
                    center,
                    radius,
                    angle_from,
                    angle_to,
                } => PathLeg::Arc {
                    center,
                    radius,
                    angle_from: angle_to,
                    angle_to: angle_from,
                },
            });
        }
        Self {
            start: self.end(),
            legs,
        }
    }

    /// Appends another path that starts where this one ends.
    pub fn then(mut self, other: &PlanePath) -> Result<Self, PathError> {
        if (other.start - self.end()).norm() > CONTIGUITY * (1.0 + self.end().norm()) {
            return Err(PathError::Discontinuous(self.legs.len()));
        }
        self.legs.extend_from_slice(&other.legs);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn square_is_closed() {
        let p = PlanePath::polyline(&[c(0., 0.), c(1., 0.), c(1., 1.), c(0., 1.), c(0., 0.)]).unwrap();
        assert!(p.is_closed());
        assert!((p.length() - 4.0).abs() < 1e-15);
        let r = p.reversed();
        assert_eq!(r.start(), c(0., 0.));
        assert_eq!(r.geometric_legs()[0].end(), c(0., 1.));
    }

    #[test]
    fn discontinuous_arc_rejected() {
        let e = PlanePath::new(
            c(2.0, 0.0),
            vec![PathLeg::Arc {
                center: c(0.0, 0.0),
                radius: 1.0,
                angle_from: 0.0,
                angle_to: 1.0,
            }],
        );
        assert_eq!(e, Err(PathError::Discontinuous(0)));
        let e = PlanePath::new(
            c(1.0, 0.0),
            vec![PathLeg::Arc {
                center: c(0.0, 0.0),
                radius: -1.0,
                angle_from: 0.0,
                angle_to: 1.0,
            }],
        );
        assert_eq!(e, Err(PathError::BadRadius));
    }

    #[test]
    fn circle_closes() {
        let p = PlanePath::circle(c(0.0, 0.0), c(0.0, 2.0), 1.0).unwrap();
        assert!(p.is_closed());
        assert!((p.length() - 4.0 * PI).abs() < 1e-12);
    }
}
