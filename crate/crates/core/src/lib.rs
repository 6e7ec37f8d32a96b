//! Stochastic nonlinear dynamics of an elastic bar fixed at one end and
//! attached at the other to a lumped mass, a linear spring and a cubic
//! spring, with a gamma-distributed elastic modulus.
//!
//! The deterministic solver is a Galerkin reduced-order model on the bar's
//! own mode shapes ([`modal`], [`rom`]) integrated by the Newmark method with
//! Newton iterations ([`integrate`]). Uncertainty is propagated by Monte
//! Carlo over independent, reproducible random streams ([`uncertainty`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod integrate;
pub mod modal;
pub mod quadrature;
pub mod rom;
pub mod uncertainty;

pub use config::{
    mass_ratio, validate_config, wave_speed, ModelConfig, NumericsConfig, PhysicalConfig,
    StochasticConfig,
};
pub use modal::{solve_basis, ModalBasis};
