//! Monte Carlo driver.
//!
//! Realization `i` samples its modulus from [`realization_stream`]`(seed, i)`,
//! solves its own modal basis and integrates the reduced model. The load and
//! initial state are built once on the nominal basis (E = μ_E). Rows are
//! collected by index, so the result is identical for any worker count.

use crate::config::ModelConfig;
use crate::integrate::{integrate, IntegrationError};
use crate::modal::{solve_basis, BasisError, ModalBasis};
use crate::rom::{assemble_system, AssemblyError, NOMINAL_MODES};
use crate::uncertainty::gamma::{sample_modulus, GammaError, GammaSpec};
use crate::uncertainty::rng::realization_stream;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum RealizationError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid modulus law: {0}")]
    Law(#[from] GammaError),
    #[error("nominal basis: {0}")]
    Nominal(BasisError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
    #[error("{failed} of {requested} realizations failed (more than 1%)")]
    TooManyFailures {
        failed: usize,
        requested: usize,
        result: Box<EnsembleResult>,
    },
}

/// A realization that could not be computed.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizationFailure {
    pub index: usize,
    pub e_modulus: f64,
    pub error: RealizationError,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EnsembleOptions {
    /// Worker threads; `None` uses one per core
    pub workers: Option<usize>,
    /// Drop the time series and keep only u(L, T) of each realization
    pub end_values_only: bool,
}

/// One computed realization.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization {
    pub index: usize,
    pub e_modulus: f64,
    pub times: Vec<f64>,
    pub u_end: Vec<f64>,
    pub v_end: Vec<f64>,
}

impl Realization {
    /// u(L, T)
    pub fn end_value(&self) -> f64 {
        *self.u_end.last().expect("trajectory holds at least the initial point")
    }
}

/// Successful realizations in index order; failed ones are listed apart.
#[derive(Clone, Debug, PartialEq)]
pub struct EnsembleResult {
    pub times: Vec<f64>,
    pub indices: Vec<usize>,
    /// Pa
    pub moduli: Vec<f64>,
    /// u(L, t) per realization (m); empty rows when only end values are kept
    pub u_end: Vec<Vec<f64>>,
    /// u̇(L, t) per realization (m/s)
    pub v_end: Vec<Vec<f64>>,
    /// u(L, T) per realization (m)
    pub end_values: Vec<f64>,
    pub master_seed: u64,
    pub n_requested: usize,
    pub failures: Vec<RealizationFailure>,
}

impl EnsembleResult {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Nominal basis with enough modes for the load and initial state.
pub fn nominal_basis(config: &ModelConfig) -> Result<ModalBasis, BasisError> {
    solve_basis(
        &config.physical,
        config.stochastic.e_mean,
        config.numerics.n_modes.max(NOMINAL_MODES),
    )
}

/// Computes realization `index` from its own stream.
pub fn run_realization(
    index: usize,
    config: &ModelConfig,
    nominal: &ModalBasis,
) -> Result<Realization, RealizationFailure> {
    let law = GammaSpec {
        mu: config.stochastic.e_mean,
        delta: config.stochastic.e_dispersion,
    };
    let mut rng = realization_stream(config.stochastic.master_seed, index as u64);
    let e_modulus = sample_modulus(&mut rng, &law);
    let fail = |error: RealizationError| RealizationFailure {
        index,
        e_modulus,
        error,
    };
    let basis = solve_basis(&config.physical, e_modulus, config.numerics.n_modes)
        .map_err(|e| fail(e.into()))?;
    let sys = assemble_system(&basis, nominal, &config.physical).map_err(|e| fail(e.into()))?;
    let traj = integrate(&sys, &config.numerics, config.physical.t_final)
        .map_err(|e| fail(e.into()))?;
    Ok(Realization {
        index,
        e_modulus,
        times: traj.times,
        u_end: traj.u_end,
        v_end: traj.v_end,
    })
}

/// Runs `config.stochastic.n_samples` realizations.
pub fn run_ensemble(
    config: &ModelConfig,
    options: EnsembleOptions,
) -> Result<EnsembleResult, EnsembleError> {
    GammaSpec::new(config.stochastic.e_mean, config.stochastic.e_dispersion)?;
    let nominal = nominal_basis(config).map_err(EnsembleError::Nominal)?;
    let n = config.stochastic.n_samples;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers.unwrap_or(0))
        .build()
        .map_err(|e| EnsembleError::Pool(e.to_string()))?;
    let rows: Vec<Result<Realization, RealizationFailure>> = pool.install(|| {
        (0..n)
            .into_par_iter()
            .map(|i| {
                run_realization(i, config, &nominal).map(|mut r| {
                    if options.end_values_only {
                        let last = r.end_value();
                        r.u_end = vec![last];
                        r.v_end.clear();
                        r.times.clear();
                    }
                    r
                })
            })
            .collect()
    });

    let mut result = EnsembleResult {
        times: Vec::new(),
        indices: Vec::with_capacity(n),
        moduli: Vec::with_capacity(n),
        u_end: Vec::with_capacity(n),
        v_end: Vec::with_capacity(n),
        end_values: Vec::with_capacity(n),
        master_seed: config.stochastic.master_seed,
        n_requested: n,
        failures: Vec::new(),
    };
    for row in rows {
        match row {
            Ok(r) => {
                if result.times.is_empty() {
                    result.times = r.times.clone();
                }
                result.end_values.push(r.end_value());
                result.indices.push(r.index);
                result.moduli.push(r.e_modulus);
                if options.end_values_only {
                    result.u_end.push(Vec::new());
                    result.v_end.push(Vec::new());
                } else {
                    result.u_end.push(r.u_end);
                    result.v_end.push(r.v_end);
                }
            }
            Err(f) => result.failures.push(f),
        }
    }
    let failed = result.failures.len();
    if failed * 100 > n {
        return Err(EnsembleError::TooManyFailures {
            failed,
            requested: n,
            result: Box::new(result),
        });
    }
    Ok(result)
}
