//! Discrete laboratory for mean-square pullback absorption of stochastic
//! evolution equations `du = (A(u) + F(u) + g) dt + eps G(u) dW` under the
//! hypotheses (H0)-(H5).

pub mod constants;
pub mod discretization;
pub mod energy;
pub mod error;
pub mod estimators;
pub mod forcing;
pub mod hypotheses;
pub mod integrator;
pub mod noise;
pub mod rng;

pub use error::{Error, Result};
