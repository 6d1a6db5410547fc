//! Optimal design, verification and hardware generation for multiplierless
//! second-order IIR filters.

pub mod error;
pub mod filterspec;
pub mod fixedpoint;
pub mod hardware;
pub mod mcm;
pub mod milp;
pub mod report;
pub mod bench;
pub mod bounds;
pub mod response;
pub mod search;

pub use error::{Error, Result};
