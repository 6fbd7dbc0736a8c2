//! Detection, classification and simulation-based verification of Bautin
//! (generalized Hopf) bifurcations in delay differential systems
//! `x'(t) = A(α) x(t) + B(α) x(t-r) + f(x(t), x(t-r), α)`.

pub mod ddesim;
pub mod eigenbasis;
pub mod error;
pub mod fixtures;
pub mod manifold;
pub mod normalform;
pub mod quadrature;
pub mod quasipoly;
pub mod report;
pub mod series;
pub mod spectrum;
pub mod system;

pub use error::{Error, Result};
pub use system::{parse_system, DelaySystem, ParamPoint};
