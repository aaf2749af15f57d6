//! Simulation and verification toolkit for the discrete Safronov–Dubovski aggregation
//! equation, approximated by its non-conservative finite truncation.

pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod gamma;
pub mod integrator;
pub mod kernel;
pub mod report;
pub mod rhs;
pub mod state;
pub mod sum;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use gamma::ConvexWeight;
pub use integrator::{integrate, IntegratorOptions, Method, Trajectory};
pub use kernel::{BoundClass, Family, KernelSpec, RateTable};
pub use report::{CheckEntry, DiagnosticsReport, Verdict};
pub use state::{InitialCondition, TruncatedState};
