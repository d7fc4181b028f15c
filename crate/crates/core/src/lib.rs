//! Numerical experiments with Dirichlet problems whose boundary data may be
//! unbounded: Poisson integrals and truncation ladders on the disk, Perron
//! envelopes, and a monotone solver for the toric complex Monge-Ampere equation.

pub mod disk;
pub mod envelope;
pub mod error;
pub mod grid;
pub mod harness;
pub mod hull;
pub mod linalg;
pub mod maximal;
pub mod toric;
pub mod xreal;

pub use error::{Error, Result};
pub use xreal::XReal;
