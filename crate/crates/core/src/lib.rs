pub mod circle;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod nt;
pub mod report;
pub mod transfer;

pub use error::{Error, Result};
