//! Complex geodesics of meromorphic warped-product metrics: continuation
//! along paths in the parameter plane, singularity classification,
//! completeness probing and coercivity checks.
#![allow(clippy::needless_range_loop)]

pub mod coercivity;
pub mod config;
pub mod continuation;
pub mod error;
pub mod geodesic;
pub mod metric;
pub mod ode;
pub mod path;
pub mod probe;
pub mod rational;
pub mod synthetic;

pub use coercivity::{
    classify_quadratic_primitive, coercivity_check, coercivity_check_at, coercivity_check_family, coercivity_sample,
    CoercivityOptions, CoercivityVerdict, ComponentVerdict, Overall, PrimitiveForm, PrimitiveKind,
};
pub use config::{parse_complex, parse_complex_list, parse_metric, parse_path, parse_rational, parse_synthetic};
pub use continuation::{
    classify_singularity, classify_system, continue_along, continue_along_with, monodromy_probe, MonodromyOutcome, SingularityKind,
    SingularityVerdict,
};
pub use error::*;
pub use geodesic::{
    conservation_drift, first_integrals, geodesic_rhs, integrate_segment, trace, ContinuationRecord,
    FirstIntegrals, GeodesicState, GeodesicSystem, IntegralCase,
};
pub use metric::{Chart, ChristoffelTable, FactorKind, WarpedMetric};
pub use ode::{IntegratorConfig, Status};
pub use path::{PathLeg, PlanePath};
pub use probe::{probe_completeness, CompletenessVerdict, ProbeOptions, ProbeReport};
pub use rational::{ComplexPoly, Extended, RationalFn, C64};
pub use synthetic::{SyntheticProblem, SyntheticSystem};
