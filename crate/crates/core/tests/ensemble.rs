//! Mean phase orbit of the baseline ensembles.

use stochbar::uncertainty::ensemble::{run_ensemble, EnsembleOptions};
use stochbar::uncertainty::stats::{phase_mean, radial_extent};
use stochbar::{solve_basis, ModelConfig};

/// Extent of the mean orbit (u, v/ν₁) over the last millisecond relative to
/// the first.
fn extent_ratio(mass: f64) -> f64 {
    let mut c = ModelConfig::baseline();
    c.physical.lumped_mass = mass;
    let ens = run_ensemble(&c, EnsembleOptions::default()).unwrap();
    assert!(ens.failures.is_empty());
    let phase = phase_mean(&ens).unwrap();
    let omega = solve_basis(&c.physical, c.stochastic.e_mean, 1).unwrap().frequencies[0];
    let t = c.physical.t_final;
    radial_extent(&phase, omega, t - 1e-3, t) / radial_extent(&phase, omega, 0.0, 1e-3)
}

#[test]
fn heavy_end_mass_orbit_persists() {
    // 0.749 for the baseline seed
    let r = extent_ratio(75.0);
    assert!((0.7..=1.25).contains(&r), "{r}");
}

#[test]
fn light_end_mass_orbit_collapses() {
    // 0.005 for the baseline seed
    let r = extent_ratio(1.5);
    assert!(r < 0.05, "{r}");
}
