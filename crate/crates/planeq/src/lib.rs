//! Orthogonal polynomials for planar weights `e^{-N V}` with
//! `V(z) = alpha |z|^2 + sum_k beta_k log(1/|z - a_k|)`, their equilibrium
//! problem, zero trajectories and weighted Fekete points.

pub mod dbar;
pub mod dd;
pub mod equilibrium;
pub mod error;
pub mod fekete;
pub mod gauss;
pub mod measures;
pub mod orthopoly;
pub mod planarquad;
pub mod roots;
pub mod schwarz;
pub mod real;
pub mod sum;

pub use dd::Dd;
pub use error::{Error, Result};
pub use measures::{ExtReal, PerturbedPotential, PointCharge, PointChargeMeasure};
