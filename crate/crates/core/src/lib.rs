pub mod error;
pub mod lp;
pub mod model;
pub mod oracle;
pub mod par;
pub mod rational;
pub mod verdict;
pub mod sufficiency;
pub mod dichotomy;
pub mod bernoulli;
pub mod controlled;
pub mod fixtures;

/// Version of this library, embedded in CLI reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
