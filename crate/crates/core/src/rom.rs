//! Galerkin reduced-order model on the bar's mode shapes.
//!
//! With u(x, t) ≈ Σₙ qₙ(t) φₙ(x) the weak form becomes
//!
//! ```text
//! M q̈ + C q̇ + K q = g sin(ν_f t) − k_NL (sᵀq)³ s
//! ```
//!
//! where s = (φₙ(L)) is the end footprint and
//!
//! ```text
//! M_ab = ρA ∫φₐφ_b + m sₐs_b        C_ab = c ∫φₐφ_b
//! K_ab = EA ∫φₐ′φ_b′ + k sₐs_b      gₐ = σ ∫φ₁*φₐ
//! ```
//!
//! The load σφ₁*(x) sin(ν₁* t) and the initial displacement
//! α₁φ₃*(x) + α₂x are built once from the nominal basis (E = μ_E) and
//! projected onto each realization's own basis.

use crate::config::PhysicalConfig;
use crate::modal::{mode_mass_integral, mode_stiffness_integral, ramp_mode_integral, ModalBasis};
use crate::quadrature::GaussLegendre;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use thiserror::Error;

/// Nominal modes needed to build the load (mode 1) and the initial state (mode 3).
pub const NOMINAL_MODES: usize = 3;

#[derive(Clone, Debug, PartialEq, Error)]
pub enum AssemblyError {
    #[error("nominal basis holds {0} modes, at least {NOMINAL_MODES} are required")]
    NominalTooSmall(usize),
    #[error("basis length {basis} differs from nominal length {nominal}")]
    LengthMismatch { basis: f64, nominal: f64 },
    #[error("mass matrix is not positive definite")]
    SingularMass,
}

/// Matrices, load and initial state of the N-mode model.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    /// kg
    pub mass: DMatrix<f64>,
    /// N·s/m
    pub damping: DMatrix<f64>,
    /// N/m
    pub stiffness: DMatrix<f64>,
    /// Modal load amplitudes g (N)
    pub force_shape: DVector<f64>,
    /// Load frequency ν_f (rad/s)
    pub force_freq: f64,
    /// sₐ = sin λₐ
    pub end_footprint: DVector<f64>,
    /// N/m³
    pub k_cub: f64,
    pub q0: DVector<f64>,
    pub v0: DVector<f64>,
    pub basis: ModalBasis,
}

impl ReducedSystem {
    pub fn dim(&self) -> usize {
        self.end_footprint.len()
    }

    /// u(L) = sᵀq.
    pub fn end_displacement(&self, q: &DVector<f64>) -> f64 {
        self.end_footprint.dot(q)
    }

    /// u^N(x) for the modal coordinates `q`.
    pub fn displacement_at(&self, q: &DVector<f64>, x: f64) -> f64 {
        let l = self.basis.length;
        self.basis
            .lambdas
            .iter()
            .zip(q.iter())
            .map(|(lam, qa)| qa * (lam * x / l).sin())
            .sum()
    }

    /// Writes g sin(ν_f t) into `out`.
    pub fn external_force_into(&self, t: f64, out: &mut DVector<f64>) {
        let s = (self.force_freq * t).sin();
        out.copy_from(&self.force_shape);
        *out *= s;
    }

    /// Adds −k_NL (sᵀq)³ s to `out` and returns u(L).
    pub fn add_nonlinear_force(&self, q: &DVector<f64>, out: &mut DVector<f64>) -> f64 {
        let u = self.end_displacement(q);
        out.axpy(-self.k_cub * u * u * u, &self.end_footprint, 1.0);
        u
    }

    /// Stiffness added by the cubic spring at end displacement `u_end`:
    /// the tangent of the nonlinear force is −τ s sᵀ with τ = 3k_NL u².
    pub fn cubic_tangent_coefficient(&self, u_end: f64) -> f64 {
        3.0 * self.k_cub * u_end * u_end
    }
}

/// Builds the reduced system for `basis` (one modulus) with load and initial
/// state defined on `nominal`.
pub fn assemble_system(
    basis: &ModalBasis,
    nominal: &ModalBasis,
    physical: &PhysicalConfig,
) -> Result<ReducedSystem, AssemblyError> {
    check_nominal(basis, nominal)?;
    let n = basis.len();
    let l = physical.length;
    let rho_a = physical.rho * physical.area;
    let ea = basis.e_modulus * physical.area;
    let lam = &basis.lambdas;
    let s = DVector::from_vec(basis.end_values());

    let plain = DMatrix::from_fn(n, n, |a, b| mode_mass_integral(lam[a], lam[b], l));
    let mass = DMatrix::from_fn(n, n, |a, b| {
        rho_a * plain[(a, b)] + physical.lumped_mass * s[a] * s[b]
    });
    let damping = &plain * physical.damping;
    let stiffness = DMatrix::from_fn(n, n, |a, b| {
        ea * mode_stiffness_integral(lam[a], lam[b], l) + physical.k_lin * s[a] * s[b]
    });
    let load_mode = nominal.lambdas[0];
    let force_shape =
        DVector::from_fn(n, |a, _| physical.sigma * mode_mass_integral(load_mode, lam[a], l));

    let (q0, v0) = project_with_mass(&mass, &s, basis, nominal, physical)?;

    Ok(ReducedSystem {
        mass,
        damping,
        stiffness,
        force_shape,
        force_freq: nominal.frequencies[0],
        end_footprint: s,
        k_cub: physical.k_cub,
        q0,
        v0,
        basis: basis.clone(),
    })
}

fn check_nominal(basis: &ModalBasis, nominal: &ModalBasis) -> Result<(), AssemblyError> {
    if nominal.len() < NOMINAL_MODES {
        return Err(AssemblyError::NominalTooSmall(nominal.len()));
    }
    if basis.length != nominal.length {
        return Err(AssemblyError::LengthMismatch {
            basis: basis.length,
            nominal: nominal.length,
        });
    }
    Ok(())
}

/// g sin(ν_f t).
pub fn external_force(t: f64, sys: &ReducedSystem) -> DVector<f64> {
    let mut out = DVector::zeros(sys.dim());
    sys.external_force_into(t, &mut out);
    out
}

/// −k_NL (sᵀq)³ s.
pub fn nonlinear_force(q: &DVector<f64>, sys: &ReducedSystem) -> DVector<f64> {
    let mut out = DVector::zeros(sys.dim());
    sys.add_nonlinear_force(q, &mut out);
    out
}

/// ∂f_NL/∂q = −3k_NL (sᵀq)² s sᵀ.
pub fn nonlinear_tangent(q: &DVector<f64>, sys: &ReducedSystem) -> DMatrix<f64> {
    let tau = sys.cubic_tangent_coefficient(sys.end_displacement(q));
    &sys.end_footprint * sys.end_footprint.transpose() * (-tau)
}

/// Initial displacement α₁φ₃*(x) + α₂x.
pub fn initial_displacement(x: f64, nominal: &ModalBasis, physical: &PhysicalConfig) -> f64 {
    let shape = (nominal.lambdas[2] * x / physical.length).sin();
    physical.alpha1 * shape + physical.alpha2 * x
}

/// Modal initial state: M q0 = M̃(u₀, φₐ) with M̃ = M, and v0 = 0.
pub fn project_initial_conditions(
    basis: &ModalBasis,
    nominal: &ModalBasis,
    physical: &PhysicalConfig,
) -> Result<(DVector<f64>, DVector<f64>), AssemblyError> {
    check_nominal(basis, nominal)?;
    let n = basis.len();
    let l = physical.length;
    let lam = &basis.lambdas;
    let s = DVector::from_vec(basis.end_values());
    let rho_a = physical.rho * physical.area;
    let mass = DMatrix::from_fn(n, n, |a, b| {
        rho_a * mode_mass_integral(lam[a], lam[b], l) + physical.lumped_mass * s[a] * s[b]
    });
    project_with_mass(&mass, &s, basis, nominal, physical)
}

fn project_with_mass(
    mass: &DMatrix<f64>,
    s: &DVector<f64>,
    basis: &ModalBasis,
    nominal: &ModalBasis,
    physical: &PhysicalConfig,
) -> Result<(DVector<f64>, DVector<f64>), AssemblyError> {
    let n = basis.len();
    let l = physical.length;
    let rho_a = physical.rho * physical.area;
    let third = nominal.lambdas[2];
    let u0_end = initial_displacement(l, nominal, physical);
    let rhs = DVector::from_fn(n, |a, _| {
        let lam = basis.lambdas[a];
        rho_a
            * (physical.alpha1 * mode_mass_integral(third, lam, l)
                + physical.alpha2 * ramp_mode_integral(lam, l))
            + physical.lumped_mass * u0_end * s[a]
    });
    let chol: Cholesky<f64, Dyn> =
        Cholesky::new(mass.clone()).ok_or(AssemblyError::SingularMass)?;
    Ok((chol.solve(&rhs), DVector::zeros(n)))
}

/// (u(L), u̇(L)) from modal displacement and velocity.
pub fn reconstruct_end(q: &DVector<f64>, v: &DVector<f64>, sys: &ReducedSystem) -> (f64, f64) {
    (sys.end_footprint.dot(q), sys.end_footprint.dot(v))
}

/// Relative L² error ‖u^N(·, 0) − u₀‖ / ‖u₀‖ of the projected initial
/// displacement, by Gauss-Legendre quadrature of the given order.
pub fn initial_condition_error(
    sys: &ReducedSystem,
    nominal: &ModalBasis,
    physical: &PhysicalConfig,
    quadrature_order: usize,
) -> f64 {
    let rule = GaussLegendre::new(quadrature_order);
    let l = physical.length;
    let panels = 4;
    let err = rule.integrate_composite(0.0, l, panels, |x| {
        let d = sys.displacement_at(&sys.q0, x) - initial_displacement(x, nominal, physical);
        d * d
    });
    let norm = rule.integrate_composite(0.0, l, panels, |x| {
        initial_displacement(x, nominal, physical).powi(2)
    });
    (err / norm).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modal::solve_basis;
    use std::f64::consts::PI;

    const E_MEAN: f64 = 203e9;

    fn build(physical: &PhysicalConfig, e: f64, n: usize) -> (ReducedSystem, ModalBasis) {
        let nominal = solve_basis(physical, E_MEAN, n.max(NOMINAL_MODES)).unwrap();
        let basis = solve_basis(physical, e, n).unwrap();
        (assemble_system(&basis, &nominal, physical).unwrap(), nominal)
    }

    fn max_normalized_offdiag(m: &DMatrix<f64>) -> f64 {
        let n = m.nrows();
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    worst = worst.max(m[(a, b)].abs() / (m[(a, a)] * m[(b, b)]).sqrt());
                }
            }
        }
        worst
    }

    fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
        let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        (m - m.transpose()).iter().fold(0.0f64, |acc, x| acc.max(x.abs())) / scale
    }

    #[test]
    fn fixed_free_single_mode() {
        let mut p = PhysicalConfig::baseline();
        p.k_lin = 0.0;
        p.lumped_mass = 0.0;
        let (sys, _) = build(&p, E_MEAN, 1);
        let ra = p.rho * p.area;
        assert!((sys.mass[(0, 0)] - ra * p.length / 2.0).abs() < 1e-15 * ra);
        let lam = PI / 2.0;
        let want = E_MEAN * p.area * lam * lam / (2.0 * p.length);
        assert!((sys.stiffness[(0, 0)] - want).abs() < 1e-12 * want);
    }

    #[test]
    fn orthogonality_all_masses() {
        for m in [1.5, 7.5, 15.0, 75.0] {
            let p = PhysicalConfig::baseline().with_lumped_mass(m);
            for n in [10, 20] {
                let (sys, _) = build(&p, E_MEAN, n);
                assert!(max_normalized_offdiag(&sys.mass) < 1e-10, "M, m={m}, n={n}");
                assert!(max_normalized_offdiag(&sys.stiffness) < 1e-10, "K, m={m}, n={n}");
                assert!(max_asymmetry(&sys.mass) < 1e-12);
                assert!(max_asymmetry(&sys.damping) < 1e-12);
                assert!(max_asymmetry(&sys.stiffness) < 1e-12);
            }
        }
    }

    #[test]
    fn damping_is_not_diagonal_with_end_mass() {
        let (sys, _) = build(&PhysicalConfig::baseline(), E_MEAN, 10);
        assert!(max_normalized_offdiag(&sys.damping) > 1e-3);
    }

    #[test]
    fn matrices_positive_definite() {
        for m in [0.0, 1.5, 75.0] {
            let (sys, _) = build(&PhysicalConfig::baseline().with_lumped_mass(m), 180e9, 10);
            assert!(sys.mass.clone().cholesky().is_some());
            assert!(sys.stiffness.clone().cholesky().is_some());
            let eig = sys.damping.clone().symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e >= -1e-9 * eig.max()));
        }
    }

    #[test]
    fn force_vector_matches_quadrature() {
        let p = PhysicalConfig::baseline();
        let (sys, nominal) = build(&p, 190e9, 10);
        let rule = GaussLegendre::new(64);
        for a in 0..10 {
            let la = sys.basis.lambdas[a];
            let l1 = nominal.lambdas[0];
            let want = p.sigma * rule.integrate(0.0, p.length, |x| (l1 * x).sin() * (la * x).sin());
            assert!((sys.force_shape[a] - want).abs() < 1e-13, "mode {a}");
        }
        assert!(external_force(0.0, &sys).iter().all(|&x| x == 0.0));
        let peak = external_force(PI / (2.0 * sys.force_freq), &sys);
        assert_eq!(peak, sys.force_shape);
        assert_eq!(sys.force_freq, nominal.frequencies[0]);
    }

    #[test]
    fn nonlinear_force_cases() {
        let p = PhysicalConfig::baseline();
        let (sys, _) = build(&p, E_MEAN, 10);
        let zero = DVector::zeros(10);
        assert!(nonlinear_force(&zero, &sys).iter().all(|&x| x == 0.0));
        assert!(nonlinear_tangent(&zero, &sys).iter().all(|&x| x == 0.0));

        let q = DVector::from_fn(10, |i, _| 1e-5 * (i as f64 + 1.0).sin());
        let f1 = nonlinear_force(&q, &sys);
        let f2 = nonlinear_force(&(&q * 2.0), &sys);
        for (a, b) in f1.iter().zip(f2.iter()) {
            assert!((b - 8.0 * a).abs() <= 1e-14 * b.abs());
        }

        // q = α₁e₃ against pointwise evaluation of the field at x = L
        let mut q = DVector::zeros(10);
        q[2] = p.alpha1;
        let f = nonlinear_force(&q, &sys);
        let u_l = sys.displacement_at(&q, p.length);
        assert!((u_l - p.alpha1 * sys.basis.lambdas[2].sin()).abs() < 1e-20);
        for a in 0..10 {
            let phi = sys.basis.shape(a, p.length).unwrap();
            let want = -p.k_cub * u_l.powi(3) * phi;
            assert!((f[a] - want).abs() <= 1e-13 * want.abs().max(1e-300));
        }
    }

    #[test]
    fn tangent_matches_finite_differences() {
        let p = PhysicalConfig::baseline();
        let (sys, _) = build(&p, E_MEAN, 10);
        let mut seed = 0x9e37_79b9_7f4a_7c15u64;
        let mut next = || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..10 {
            let q = DVector::from_fn(10, |_, _| 1e-4 * next());
            let jac = nonlinear_tangent(&q, &sys);
            let h = 1e-9;
            let mut fd = DMatrix::zeros(10, 10);
            for j in 0..10 {
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[j] += h;
                qm[j] -= h;
                let col = (nonlinear_force(&qp, &sys) - nonlinear_force(&qm, &sys)) / (2.0 * h);
                fd.set_column(j, &col);
            }
            let err = (&jac - &fd).norm() / jac.norm();
            assert!(err < 1e-6, "relative error {err}");
            assert!((&jac - jac.transpose()).norm() == 0.0);
            let sv = jac.clone().singular_values();
            assert!(sv[1] <= 1e-12 * sv[0], "rank > 1: {sv}");
        }
    }

    #[test]
    fn initial_state_on_nominal_basis() {
        let mut p = PhysicalConfig::baseline();
        p.alpha2 = 0.0;
        let (sys, _) = build(&p, E_MEAN, 10);
        for a in 0..10 {
            let want = if a == 2 { p.alpha1 } else { 0.0 };
            assert!((sys.q0[a] - want).abs() < 1e-15, "mode {a}: {}", sys.q0[a]);
        }
        assert!(sys.v0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn initial_end_displacement_converges() {
        // the ramp α₂x is not in the span of finitely many modes, so u^N(L, 0)
        // approaches u₀(L) only as N grows
        for m in [1.5, 75.0] {
            let p = PhysicalConfig::baseline().with_lumped_mass(m);
            let mut prev = f64::INFINITY;
            for n in [3, 5, 10, 20, 40] {
                let (sys, nominal) = build(&p, E_MEAN, n);
                let (u, v) = reconstruct_end(&sys.q0, &sys.v0, &sys);
                let want = p.alpha1 * nominal.lambdas[2].sin() + p.alpha2 * p.length;
                let err = (u - want).abs() / want;
                assert!(err < prev, "m={m}, n={n}: {err}");
                if n >= 10 {
                    assert!(err < 1e-3, "m={m}, n={n}: {err}");
                }
                prev = err;
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn initial_end_displacement_exact_without_ramp() {
        let mut p = PhysicalConfig::baseline();
        p.alpha2 = 0.0;
        let (sys, nominal) = build(&p, E_MEAN, 10);
        let u = sys.end_displacement(&sys.q0);
        let want = p.alpha1 * nominal.lambdas[2].sin();
        assert!((u - want).abs() < 1e-12 * want.abs());
    }

    #[test]
    fn reconstruct_end_cases() {
        let (sys, _) = build(&PhysicalConfig::baseline(), E_MEAN, 4);
        let e1 = DVector::from_fn(4, |i, _| if i == 0 { 1.0 } else { 0.0 });
        let zero = DVector::zeros(4);
        assert_eq!(reconstruct_end(&e1, &zero, &sys), (sys.basis.lambdas[0].sin(), 0.0));
        assert_eq!(reconstruct_end(&zero, &zero, &sys), (0.0, 0.0));
    }

    #[test]
    fn projection_error_decreases_with_modes() {
        for m in [1.5, 75.0] {
            let p = PhysicalConfig::baseline().with_lumped_mass(m);
            let errs: Vec<f64> = [2, 4, 8, 16]
                .iter()
                .map(|&n| {
                    let (sys, nominal) = build(&p, 210e9, n);
                    initial_condition_error(&sys, &nominal, &p, 64)
                })
                .collect();
            assert!(errs.windows(2).all(|w| w[1] < w[0]), "m={m}: {errs:?}");
        }
    }

    #[test]
    fn nominal_needs_three_modes() {
        let p = PhysicalConfig::baseline();
        let nominal = solve_basis(&p, E_MEAN, 2).unwrap();
        let basis = solve_basis(&p, E_MEAN, 2).unwrap();
        assert_eq!(
            assemble_system(&basis, &nominal, &p).unwrap_err(),
            AssemblyError::NominalTooSmall(2)
        );
    }
}
