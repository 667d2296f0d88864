//! Exact and numerical tools for self-similar and S-adic suspension flows:
//! substitutions, Rauzy induction, the renormalization cocycle, twisted
//! Birkhoff integrals and the Erdős–Kahane style exceptional-set counts.

pub mod cocycle;
pub mod error;
pub mod fit;
pub mod flow;
pub mod intmat;
pub mod rauzy;
pub mod symbolic;
pub mod veech;

pub use error::{Error, Result};
