//! Time integration, the constraint-wave dispersion check, check suites,
//! reports and configuration.

pub mod catalog;
pub mod checks;
pub mod config;
pub mod dispersion;
pub mod integrate;
pub mod report;
pub mod suite;

pub use integrate::{rhs, simulate, Monitor, MonitorHistory, Trajectory};
pub use dispersion::{dispersion_check, DispersionResult};
pub use report::{CheckResult, Expect, Report, Status};
pub use config::Config;
pub use suite::run_suite;
