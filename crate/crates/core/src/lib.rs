//! Numerical core of the warm-start actor-critic lab.
//!
//! Everything is generic over [`Scalar`] (`f32` or `f64`); the aliases at the
//! bottom of this file fix the common `f64` instantiations.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ac;
pub mod analysis;
pub mod bounds;
pub mod dp;
pub mod error;
pub mod gridworld;
pub mod linalg;
pub mod mdp;
pub mod rng;
pub mod scalar;

pub use analysis::{
    decompose_perturbation, estimate_bias, newton_residual, BiasEstimate, ErrorDecomposition, NewtonResidual,
};
pub use bounds::BoundConstants;
pub use error::{Error, Result};
pub use linalg::Matrix;
pub use mdp::{DeterministicPolicy, Mdp, Policy, StochasticPolicy};
pub use scalar::Scalar;

pub type Mdp64 = Mdp<f64>;
pub type Mdp32 = Mdp<f32>;
pub type Matrix64 = Matrix<f64>;
pub type StochasticPolicy64 = StochasticPolicy<f64>;
pub type AcTrace64 = ac::AcTrace<f64>;
pub type ErrorDecomposition64 = analysis::ErrorDecomposition<f64>;
pub type BiasEstimate64 = analysis::BiasEstimate<f64>;
