//! Born-rule probability spaces over configuration space, Madelung random
//! variables and grid-based Schrödinger evolution.

pub mod born;
pub mod catalog;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod madelung;
pub mod observables;
pub mod propagator;
pub mod spectral;

pub use error::{Error, Result};
