//! Physical, stochastic and numerical parameters of the bar model.
//!
//! All quantities are SI. The damping coefficient `c` is a distributed
//! coefficient (force per unit velocity per unit length), so that it enters
//! the bar equation next to `ρA ∂²u/∂t²`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use thiserror::Error;

/// Deterministic description of the fixed-mass-spring bar and its loading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConfig {
    /// Mass density ρ (kg/m³)
    pub rho: f64,
    /// Cross-section area A (m²)
    pub area: f64,
    /// Unstretched length L (m)
    pub length: f64,
    /// Distributed damping coefficient c (N·s/m²)
    pub damping: f64,
    /// Linear end-spring stiffness k (N/m)
    pub k_lin: f64,
    /// Cubic end-spring stiffness k_NL (N/m³)
    pub k_cub: f64,
    /// Lumped end mass m (kg)
    pub lumped_mass: f64,
    /// Amplitude σ of the distributed harmonic force (N)
    pub sigma: f64,
    /// Amplitude of the third nominal mode in the initial displacement (m)
    pub alpha1: f64,
    /// Slope of the linear ramp in the initial displacement (-)
    pub alpha2: f64,
    /// Final time T (s)
    pub t_final: f64,
}

impl PhysicalConfig {
    /// The steel bar used throughout the numerical experiments, with the
    /// lightest of the four end masses (1.5 kg).
    pub fn baseline() -> Self {
        PhysicalConfig {
            rho: 7900.0,
            area: 625.0 * PI * 1e-6,
            length: 1.0,
            damping: 10e3,
            k_lin: 650.0,
            k_cub: 650e13,
            lumped_mass: 1.5,
            sigma: 1.0,
            alpha1: 0.1e-3,
            alpha2: 0.5e-3,
            t_final: 8e-3,
        }
    }

    pub fn with_lumped_mass(mut self, mass: f64) -> Self {
        self.lumped_mass = mass;
        self
    }

    /// Distributed mass of the bar, ρAL (kg).
    pub fn bar_mass(&self) -> f64 {
        self.rho * self.area * self.length
    }

    fn violations(&self, out: &mut Vec<FieldViolation>) {
        positive(out, "rho", self.rho);
        positive(out, "area", self.area);
        positive(out, "length", self.length);
        non_negative(out, "damping", self.damping);
        non_negative(out, "k_lin", self.k_lin);
        non_negative(out, "k_cub", self.k_cub);
        non_negative(out, "lumped_mass", self.lumped_mass);
        non_negative(out, "sigma", self.sigma);
        finite(out, "alpha1", self.alpha1);
        finite(out, "alpha2", self.alpha2);
        positive(out, "t_final", self.t_final);
    }
}

/// Law of the random elastic modulus and Monte Carlo controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticConfig {
    /// Mean elastic modulus μ_E (Pa)
    pub e_mean: f64,
    /// Dispersion factor δ_E (coefficient of variation)
    pub e_dispersion: f64,
    pub n_samples: usize,
    pub master_seed: u64,
}

impl StochasticConfig {
    pub fn baseline() -> Self {
        StochasticConfig {
            e_mean: 203e9,
            e_dispersion: 0.1,
            n_samples: 1024,
            master_seed: 5489,
        }
    }

    fn violations(&self, out: &mut Vec<FieldViolation>) {
        positive(out, "e_mean", self.e_mean);
        if !(self.e_dispersion > 0.0 && self.e_dispersion < 1.0) {
            out.push(FieldViolation::new(
                "e_dispersion",
                format!("must lie in the open interval (0, 1), got {}", self.e_dispersion),
            ));
        }
        if self.n_samples < 1 {
            out.push(FieldViolation::new("n_samples", "must be at least 1"));
        }
    }
}

/// Discretization and solver controls.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericsConfig {
    /// Number of retained modes N
    pub n_modes: usize,
    /// Time step (s)
    pub dt: f64,
    pub newmark_beta: f64,
    pub newmark_gamma: f64,
    pub newton_tol_rel: f64,
    /// Absolute residual tolerance (N)
    pub newton_tol_abs: f64,
    pub newton_max_iter: usize,
    /// Gauss-Legendre points used by quadrature-based diagnostics
    pub quadrature_order: usize,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig {
            n_modes: 10,
            dt: 1e-6,
            newmark_beta: 0.25,
            newmark_gamma: 0.5,
            newton_tol_rel: 1e-10,
            newton_tol_abs: 1e-12,
            newton_max_iter: 25,
            quadrature_order: 64,
        }
    }
}

impl NumericsConfig {
    fn violations(&self, out: &mut Vec<FieldViolation>) {
        if self.n_modes < 1 {
            out.push(FieldViolation::new("n_modes", "must be at least 1"));
        }
        positive(out, "dt", self.dt);
        if !(0.0..=0.5).contains(&self.newmark_beta) {
            out.push(FieldViolation::new(
                "newmark_beta",
                format!("must lie in [0, 0.5], got {}", self.newmark_beta),
            ));
        }
        if !(0.0..=1.0).contains(&self.newmark_gamma) {
            out.push(FieldViolation::new(
                "newmark_gamma",
                format!("must lie in [0, 1], got {}", self.newmark_gamma),
            ));
        }
        non_negative(out, "newton_tol_rel", self.newton_tol_rel);
        non_negative(out, "newton_tol_abs", self.newton_tol_abs);
        if self.newton_max_iter < 1 {
            out.push(FieldViolation::new("newton_max_iter", "must be at least 1"));
        }
        if self.quadrature_order < 1 {
            out.push(FieldViolation::new("quadrature_order", "must be at least 1"));
        }
    }
}

/// A configuration triple that passed [`validate_config`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub physical: PhysicalConfig,
    pub stochastic: StochasticConfig,
    pub numerics: NumericsConfig,
}

impl ModelConfig {
    /// Baseline parameters with default numerics. Always valid.
    pub fn baseline() -> Self {
        ModelConfig {
            physical: PhysicalConfig::baseline(),
            stochastic: StochasticConfig::baseline(),
            numerics: NumericsConfig::default(),
        }
    }

    /// Re-checks every invariant; returns the bundle unchanged when valid.
    pub fn validate(self) -> Result<Self, ConfigError> {
        validate_config(self.physical, self.stochastic, self.numerics)
    }
}

/// One violated invariant.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldViolation {
    pub field: &'static str,
    pub reason: String,
}

impl FieldViolation {
    fn new(field: &'static str, reason: impl Into<String>) -> Self {
        FieldViolation {
            field,
            reason: reason.into(),
        }
    }
}

impl fmt::Display for FieldViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ConfigError {
    #[error("invalid configuration: {}", list(.0))]
    Invalid(Vec<FieldViolation>),
}

impl ConfigError {
    pub fn violations(&self) -> &[FieldViolation] {
        match self {
            ConfigError::Invalid(v) => v,
        }
    }

    /// True when `field` is among the reported violations.
    pub fn names(&self, field: &str) -> bool {
        self.violations().iter().any(|v| v.field == field)
    }
}

fn list(v: &[FieldViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

/// Error for scalar helpers evaluated outside their domain.
#[derive(Clone, Debug, PartialEq, Error)]
#[error("{what} must be positive, got {value}")]
pub struct DomainError {
    pub what: &'static str,
    pub value: f64,
}

/// Checks every field invariant and returns the bundle unchanged, or the
/// complete list of violations.
pub fn validate_config(
    physical: PhysicalConfig,
    stochastic: StochasticConfig,
    numerics: NumericsConfig,
) -> Result<ModelConfig, ConfigError> {
    let mut out = Vec::new();
    physical.violations(&mut out);
    stochastic.violations(&mut out);
    numerics.violations(&mut out);
    if out.is_empty() {
        Ok(ModelConfig {
            physical,
            stochastic,
            numerics,
        })
    } else {
        Err(ConfigError::Invalid(out))
    }
}

/// Longitudinal wave speed √(E/ρ) (m/s).
pub fn wave_speed(e_modulus: f64, rho: f64) -> Result<f64, DomainError> {
    if !(e_modulus > 0.0) {
        return Err(DomainError {
            what: "elastic modulus",
            value: e_modulus,
        });
    }
    if !(rho > 0.0) {
        return Err(DomainError {
            what: "density",
            value: rho,
        });
    }
    Ok((e_modulus / rho).sqrt())
}

/// Continuous-discrete mass ratio ρAL/m.
pub fn mass_ratio(physical: &PhysicalConfig) -> Result<f64, DomainError> {
    if !(physical.lumped_mass > 0.0) {
        return Err(DomainError {
            what: "lumped mass",
            value: physical.lumped_mass,
        });
    }
    Ok(physical.bar_mass() / physical.lumped_mass)
}

fn positive(out: &mut Vec<FieldViolation>, field: &'static str, x: f64) {
    if !(x > 0.0 && x.is_finite()) {
        out.push(FieldViolation::new(field, format!("must be positive and finite, got {x}")));
    }
}

fn non_negative(out: &mut Vec<FieldViolation>, field: &'static str, x: f64) {
    if !(x >= 0.0 && x.is_finite()) {
        out.push(FieldViolation::new(
            field,
            format!("must be non-negative and finite, got {x}"),
        ));
    }
}

fn finite(out: &mut Vec<FieldViolation>, field: &'static str, x: f64) {
    if !x.is_finite() {
        out.push(FieldViolation::new(field, format!("must be finite, got {x}")));
    }
}
