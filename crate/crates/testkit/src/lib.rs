//! Independent numerical oracles for checking closed forms and simulators.
//!
//! Nothing here knows about the physics crate: integrands are plain closures,
//! so an oracle can never share a code path with the implementation it checks.

pub mod quadrature;
pub mod stats;
