pub mod dynamics;
pub mod error;
pub mod gauge;
pub mod lattice;
pub mod meter;
mod spectral;
pub mod tridiag;
pub mod weak_value;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
