//! Maximum-entropy law of the elastic modulus.
//!
//! Given a positive support, a known mean μ and E[ln E] < ∞, the entropy
//! maximizer is the gamma density with shape 1/δ² and scale δ²μ:
//!
//! ```text
//! p(ξ) = 𝟙(ξ > 0) (1/μ) (1/δ²)^(1/δ²) / Γ(1/δ²) (ξ/μ)^(1/δ² − 1) exp(−ξ/(δ²μ))
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum GammaError {
    #[error("mean must be positive, got {0}")]
    Mean(f64),
    #[error("dispersion must lie in (0, 1), got {0}")]
    Dispersion(f64),
}

/// Gamma law parameterized by mean and dispersion factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GammaSpec {
    pub mu: f64,
    pub delta: f64,
}

impl GammaSpec {
    pub fn new(mu: f64, delta: f64) -> Result<Self, GammaError> {
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(GammaError::Mean(mu));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(GammaError::Dispersion(delta));
        }
        Ok(GammaSpec { mu, delta })
    }

    /// 1/δ²
    pub fn shape(&self) -> f64 {
        1.0 / (self.delta * self.delta)
    }

    /// δ²μ
    pub fn scale(&self) -> f64 {
        self.delta * self.delta * self.mu
    }

    pub fn variance(&self) -> f64 {
        (self.delta * self.mu).powi(2)
    }
}

/// Density of the modulus at `xi`, zero off the positive half-line.
pub fn gamma_pdf(xi: f64, spec: &GammaSpec) -> f64 {
    if !(xi > 0.0) {
        return 0.0;
    }
    let k = spec.shape();
    let log_p = -spec.mu.ln() + k * k.ln() - ln_gamma(k) + (k - 1.0) * (xi / spec.mu).ln()
        - xi / spec.scale();
    log_p.exp()
}

/// One modulus draw by the Marsaglia-Tsang squeeze method (shape ≥ 1).
pub fn sample_modulus<R: Rng + ?Sized>(rng: &mut R, spec: &GammaSpec) -> f64 {
    let k = spec.shape();
    debug_assert!(k >= 1.0);
    let d = k - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = rng.sample(StandardNormal);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = rng.random();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v * spec.scale();
        }
    }
}
