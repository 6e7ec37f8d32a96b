//! Natural frequencies and mode shapes of the fixed-mass-spring bar.
//!
//! The modes are φₙ(x) = sin(λₙ x / L), where λₙ is the n-th positive root of
//!
//! ```text
//! cot λ + κ/λ − μ λ = 0,    κ = kL/(AE),  μ = m/(ρAL)
//! ```
//!
//! and the natural frequency is νₙ = λₙ √(E/ρ) / L. The left-hand side is
//! strictly decreasing between consecutive poles of the cotangent, so each
//! interval ((n−1)π, nπ) holds exactly one root.
//!
//! The closed-form inner products of the mode shapes used by the Galerkin
//! assembly also live here.

use crate::config::{wave_speed, PhysicalConfig};
use serde::Serialize;
use std::f64::consts::PI;
use thiserror::Error;

/// Offset from the cotangent poles used to bracket each root.
const POLE_GAP: f64 = 1e-9;
const MAX_BISECTION: usize = 200;
const POLISH_STEPS: usize = 3;
/// Below this separation two eigenvalues are treated as coincident.
const COINCIDENCE: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum BasisError {
    #[error("characteristic equation evaluated at a cotangent pole (lambda = {0})")]
    Pole(f64),
    #[error("eigenvalue argument must be positive, got {0}")]
    NonPositive(f64),
    #[error("elastic modulus must be positive, got {0}")]
    Modulus(f64),
    #[error("at least one mode is required")]
    NoModes,
    #[error("no sign change of the characteristic equation on mode interval {0}")]
    Bracket(usize),
    #[error("position {x} lies outside the bar [0, {length}]")]
    OutsideBar { x: f64, length: f64 },
}

/// Eigenvalues and frequencies of the bar at one elastic modulus.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModalBasis {
    /// Dimensionless eigenvalues λₙ, strictly increasing
    pub lambdas: Vec<f64>,
    /// Natural frequencies νₙ (rad/s)
    pub frequencies: Vec<f64>,
    /// Elastic modulus used (Pa)
    pub e_modulus: f64,
    /// Bar length (m)
    pub length: f64,
    /// kL/(AE)
    pub kappa: f64,
    /// m/(ρAL)
    pub mu: f64,
}

impl ModalBasis {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// Mode shape values φₙ(L) = sin λₙ.
    pub fn end_values(&self) -> Vec<f64> {
        self.lambdas.iter().map(|l| l.sin()).collect()
    }

    /// φₙ(x) for mode index `n` (zero based).
    pub fn shape(&self, n: usize, x: f64) -> Result<f64, BasisError> {
        mode_value(self.lambdas[n], x, self.length)
    }
}

/// cot λ + κ/λ − μλ.
pub fn characteristic_residual(lambda: f64, kappa: f64, mu: f64) -> Result<f64, BasisError> {
    if !(lambda > 0.0) {
        return Err(BasisError::NonPositive(lambda));
    }
    let s = lambda.sin();
    if s.abs() <= f64::EPSILON * lambda.max(1.0) {
        return Err(BasisError::Pole(lambda));
    }
    Ok(lambda.cos() / s + kappa / lambda - mu * lambda)
}

fn residual_slope(lambda: f64, kappa: f64, mu: f64) -> f64 {
    let s = lambda.sin();
    -1.0 / (s * s) - kappa / (lambda * lambda) - mu
}

/// Root of the characteristic equation inside ((n−1)π, nπ), `n` one based.
fn root_in_interval(n: usize, kappa: f64, mu: f64) -> Result<f64, BasisError> {
    let mut lo = (n - 1) as f64 * PI + POLE_GAP;
    let mut hi = n as f64 * PI - POLE_GAP;
    let f_lo = characteristic_residual(lo, kappa, mu)?;
    let f_hi = characteristic_residual(hi, kappa, mu)?;
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(BasisError::Bracket(n));
    }
    for _ in 0..MAX_BISECTION {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f = characteristic_residual(mid, kappa, mu)?;
        if f > 0.0 {
            lo = mid;
        } else if f < 0.0 {
            hi = mid;
        } else {
            return Ok(mid);
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..POLISH_STEPS {
        let f = characteristic_residual(x, kappa, mu)?;
        if f == 0.0 {
            break;
        }
        let next = x - f / residual_slope(x, kappa, mu);
        // the bracket is already at machine resolution; a Newton step that
        // leaves it is rejected
        if next.is_finite() && next >= lo - 4.0 * f64::EPSILON * x && next <= hi + 4.0 * f64::EPSILON * x {
            x = next;
        } else {
            break;
        }
    }
    Ok(x)
}

/// First `n_modes` eigenvalues and natural frequencies at modulus `e_modulus`.
///
/// The cubic spring does not enter: the basis comes from the linear
/// eigenproblem.
pub fn solve_basis(
    physical: &PhysicalConfig,
    e_modulus: f64,
    n_modes: usize,
) -> Result<ModalBasis, BasisError> {
    if n_modes == 0 {
        return Err(BasisError::NoModes);
    }
    let speed = wave_speed(e_modulus, physical.rho).map_err(|_| BasisError::Modulus(e_modulus))?;
    let kappa = physical.k_lin * physical.length / (physical.area * e_modulus);
    let mu = physical.lumped_mass / physical.bar_mass();
    let lambdas = (1..=n_modes)
        .map(|n| root_in_interval(n, kappa, mu))
        .collect::<Result<Vec<_>, _>>()?;
    let frequencies = lambdas.iter().map(|l| l * speed / physical.length).collect();
    Ok(ModalBasis {
        lambdas,
        frequencies,
        e_modulus,
        length: physical.length,
        kappa,
        mu,
    })
}

/// sin(λx/L) for 0 ≤ x ≤ L.
pub fn mode_value(lambda: f64, x: f64, length: f64) -> Result<f64, BasisError> {
    if !(0.0..=length).contains(&x) {
        return Err(BasisError::OutsideBar { x, length });
    }
    Ok((lambda * x / length).sin())
}

/// sin(z)/z with the removable singularity filled in.
fn sinc(z: f64) -> f64 {
    if z.abs() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// ∫₀ᴸ sin(λₐx/L) sin(λ_b x/L) dx.
pub fn mode_mass_integral(lambda_a: f64, lambda_b: f64, length: f64) -> f64 {
    debug_assert!(lambda_a > 0.0 && lambda_b > 0.0);
    if (lambda_a - lambda_b).abs() < COINCIDENCE {
        0.5 * length * (1.0 - sinc(2.0 * lambda_a))
    } else {
        0.5 * length * (sinc(lambda_a - lambda_b) - sinc(lambda_a + lambda_b))
    }
}

/// ∫₀ᴸ φₐ′ φ_b′ dx for φ(x) = sin(λx/L).
pub fn mode_stiffness_integral(lambda_a: f64, lambda_b: f64, length: f64) -> f64 {
    debug_assert!(lambda_a > 0.0 && lambda_b > 0.0);
    if (lambda_a - lambda_b).abs() < COINCIDENCE {
        lambda_a * lambda_a / (2.0 * length) * (1.0 + sinc(2.0 * lambda_a))
    } else {
        lambda_a * lambda_b / (2.0 * length) * (sinc(lambda_a - lambda_b) + sinc(lambda_a + lambda_b))
    }
}

/// ∫₀ᴸ x sin(λx/L) dx.
pub fn ramp_mode_integral(lambda: f64, length: f64) -> f64 {
    debug_assert!(lambda > 0.0);
    length * length * (lambda.sin() / (lambda * lambda) - lambda.cos() / lambda)
}
