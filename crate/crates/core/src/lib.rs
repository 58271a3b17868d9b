//! Isotonic least-squares projection through greatest-convex-minorant geometry,
//! exact risk formulas for exchangeable noise, and a harness that checks the
//! underlying distributional identities by enumeration and Monte Carlo.

pub mod cli;
pub mod cone_projection;
pub mod error;
pub mod exact_formulas;
pub mod experiments;
pub mod noise_models;
pub mod numerics;
pub mod sequence;
pub mod walk_geometry;

pub use error::{Error, Result};
pub use sequence::RealSequence;
