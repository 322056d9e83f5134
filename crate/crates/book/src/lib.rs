//! Compiles the guide's code listings as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/lattice.md")]
pub mod lattice {}
#[doc = include_str!("../../../book/src/gauge.md")]
pub mod gauge {}
#[doc = include_str!("../../../book/src/weak-values.md")]
pub mod weak_values {}
#[doc = include_str!("../../../book/src/meter.md")]
pub mod meter {}
#[doc = include_str!("../../../book/src/dynamics.md")]
pub mod dynamics {}
#[doc = include_str!("../../../book/src/scenarios.md")]
pub mod scenarios {}
