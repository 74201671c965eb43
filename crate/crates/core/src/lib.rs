//! Laboratory for small non-Hermitian effective Hamiltonians: build models
//! coupled to one or more environments, compute biorthogonal eigen-systems
//! along parameter paths, locate and encircle exceptional points, and test
//! entropy-based equilibrium criteria.

pub mod cplx;
pub mod eplocator;
pub mod error;
pub mod harness;
pub mod interface;
pub mod model;
pub mod observables;
pub mod spectral;
pub mod testkit;

pub use error::{Error, Result};
