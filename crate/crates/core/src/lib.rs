//! Sectional curvature of kernel metrics on landmark and shape spaces.

pub mod chart_oracle;
pub mod dynamics;
pub mod error;
pub mod kernels;
pub mod landmark;
pub mod linalg;
pub mod mario_curvature;
pub mod metric_dsl;
pub mod submanifold;
pub mod submersion;
pub mod validate;

pub use chart_oracle::{CometricJet, MetricJet};
pub use dynamics::{ConservationReport, GeodesicSystem, IntegratorConfig, MatchOptions, MatchReport, Method, ShapeSystem};
pub use error::{Error, ParseError, Result};
pub use kernels::{Kernel, KernelFamily, KernelJet, KernelSpec};
pub use landmark::{LandmarkFile, LandmarkMetric, LandmarkState};
pub use mario_curvature::{Coform, CurvatureBreakdown};
pub use metric_dsl::{Cometric, CometricDef, Expr};
pub use submanifold::{DiscreteSubmanifold, NormalMomentum, ShapeFile, SubmanifoldMetric};
pub use submersion::{OneillRecord, SubmersionCase};
