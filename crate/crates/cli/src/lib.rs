//! Command-line front end: file formats, dispatch to the comparison
//! engines, and report rendering.

pub mod args;
pub mod commands;
pub mod error;
pub mod input;
pub mod report;
pub mod schema;

pub use commands::run;
