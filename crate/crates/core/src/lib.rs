//! Task assignment for hyperlocal spatial crowdsourcing.
//!
//! A campaign runs over `Q` periods. Tasks appear at locations with a radius
//! and a validity window; workers check in at locations each period. The
//! engine picks, period by period, which present workers to activate under a
//! total budget so that as many tasks as possible get answered.

pub mod budget;
pub mod campaign;
pub mod error;
pub mod harness;
pub mod heuristics;
pub mod instance_file;
pub mod model;
pub mod moo;
pub mod offline;
pub mod spatial;
pub mod workload;

pub use error::{Error, Result};
