//! Exponent bookkeeping, admissibility checks, and the weighted-norm ratio
//! used to probe the degenerate-weight embedding.
//!
//! The growth exponent `p`, integrability exponent `r`, and ambient dimension
//! `N` are parameters of the estimates, independent of the two-dimensional
//! computational grid. From `(N, p)` a chain of derived exponents follows:
//!
//! ```text
//! s  = (p+1)/p                     dual Lebesgue exponent
//! L  = p/(p+1) − 4/N               positive inside the admissible window
//! α  = N(1 − L(p+1)) / (N + 1 − NLp)
//! t  = p + 1/(1−α)
//! τ  = (α/(1−α)) / t
//! 1/θ = (p(1−α) + 1) · p/(p+1)
//! θ' = θ/(θ−1)
//! ```
//!
//! The admissible window is `max(1, 4/(N−4)) < p < (N+1)/(N−3)` with `N > 5`
//! and `r > N/3`. At the lower endpoint `L` vanishes; at the upper endpoint
//! `θ` collapses to 1.

use crate::eigen::smallest_eigenpairs;
use crate::error::{CoreError, Result};
use crate::grid::{
    biharmonic_matrix, check_same_grid, integrate, laplacian_matrix, lp_norm, Field, Grid2D,
};
use crate::sparse::SparseOperator;

/// Result of checking the standing assumptions for a parameter triple.
#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub n_dim: u32,
    pub p: f64,
    pub r: f64,
    /// Open admissibility interval for `p`: `(max(1, 4/(N−4)), (N+1)/(N−3))`.
    pub p_window: (f64, f64),
    /// Strict lower bound for `r`, namely `N/3`.
    pub r_floor: f64,
    /// True when every assumption holds.
    pub ok: bool,
    /// Human-readable description of each violated assumption.
    pub failures: Vec<String>,
}

/// The full set of derived exponents for an admissible `(N, p, r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentBundle {
    pub n_dim: u32,
    pub p: f64,
    pub r: f64,
    /// Dual exponent `(p+1)/p`.
    pub s: f64,
    /// The window margin `p/(p+1) − 4/N`.
    pub ell: f64,
    /// Interpolation weight in `(0, 1)`.
    pub alpha: f64,
    /// Singular-weight strength in `(0, 1)` inside the window.
    pub tau: f64,
    /// Weighted-norm integrability exponent, `t > p`.
    pub t: f64,
    /// Bootstrap gain factor, `θ > 1` inside the window.
    pub theta: f64,
    /// Conjugate exponent `θ/(θ−1)`.
    pub theta_prime: f64,
}

/// Check the standing assumptions for `(N, p, r)` without failing.
pub fn check_hypotheses(n_dim: u32, p: f64, r: f64) -> HypothesisReport {
    let n = n_dim as f64;
    let lower = if n_dim > 4 { (4.0 / (n - 4.0)).max(1.0) } else { f64::INFINITY };
    let upper = if n_dim > 3 { (n + 1.0) / (n - 3.0) } else { f64::NEG_INFINITY };
    let r_floor = n / 3.0;
    let mut failures = Vec::new();
    if n_dim <= 5 {
        failures.push(format!("dimension must exceed 5, got N = {n_dim}"));
    }
    if !p.is_finite() {
        failures.push(format!("growth exponent must be finite, got p = {p}"));
    } else if n_dim > 5 {
        if p <= lower {
            failures.push(format!(
                "growth exponent must exceed max(1, 4/(N-4)) = {lower}, got p = {p}"
            ));
        }
        if p >= upper {
            failures.push(format!(
                "growth exponent must stay below (N+1)/(N-3) = {upper}, got p = {p}"
            ));
        }
    }
    if !r.is_finite() || r <= r_floor {
        failures.push(format!(
            "integrability exponent must exceed N/3 = {r_floor}, got r = {r}"
        ));
    }
    HypothesisReport {
        n_dim,
        p,
        r,
        p_window: (lower, upper),
        r_floor,
        ok: failures.is_empty(),
        failures,
    }
}

impl ExponentBundle {
    /// Compute the derived exponents without admissibility checks. Outside
    /// the window some entries lose their meaning (`θ` may drop below 1,
    /// `τ` may leave `[0, 1]`); useful for probing edge cases.
    pub fn raw(n_dim: u32, p: f64, r: f64) -> ExponentBundle {
        let n = n_dim as f64;
        let s = (p + 1.0) / p;
        let ell = p / (p + 1.0) - 4.0 / n;
        let beta = (n + 1.0 - n * ell * p) / (n * ell + 1.0);
        let alpha = 1.0 - 1.0 / beta;
        let t = p + beta;
        let tau = (beta - 1.0) / t;
        let inv_theta = (p * (1.0 - alpha) + 1.0) * p / (p + 1.0);
        let theta = 1.0 / inv_theta;
        let theta_prime = theta / (theta - 1.0);
        ExponentBundle {
            n_dim,
            p,
            r,
            s,
            ell,
            alpha,
            tau,
            t,
            theta,
            theta_prime,
        }
    }
}

/// Compute the exponent bundle for `(N, p, r)`, failing with
/// [`CoreError::HypothesisViolation`] when the standing assumptions do not
/// hold.
pub fn exponent_bundle(n_dim: u32, p: f64, r: f64) -> Result<ExponentBundle> {
    let report = check_hypotheses(n_dim, p, r);
    if !report.ok {
        return Err(CoreError::HypothesisViolation(report.failures.join("; ")));
    }
    Ok(ExponentBundle::raw(n_dim, p, r))
}

/// Splitting of a field along the ground state: `u = coefficient·φ₁ + w`
/// with `w` orthogonal to `φ₁` in the quadrature inner product.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Component along the (unit-norm) ground state.
    pub coefficient: f64,
    /// The orthogonal remainder.
    pub remainder: Field,
}

/// Decompose `u` along a unit-L²-norm ground state `phi1`.
pub fn decompose(u: &Field, phi1: &Field) -> Result<Decomposition> {
    let coefficient = integrate(u, phi1)?;
    let remainder = u.add_scaled(-coefficient, phi1)?;
    Ok(Decomposition {
        coefficient,
        remainder,
    })
}

/// The pairing `∫ f φ₁` whose strict negativity the solvability theory
/// requires.
pub fn sign_condition(f: &Field, phi1: &Field) -> Result<f64> {
    integrate(f, phi1)
}

/// `|∫ (u₊)^p φ₁ + ∫ f φ₁|`: how badly a candidate solution violates the
/// resonance identity obtained by pairing the equation with the ground state.
pub fn resonance_identity_residual(u: &Field, f: &Field, phi1: &Field, p: f64) -> Result<f64> {
    if !(p > 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "growth exponent must exceed 1, got {p}"
        )));
    }
    let up = u.pos_part_pow(p);
    Ok((integrate(&up, phi1)? + integrate(f, phi1)?).abs())
}

/// Radius of the ball around the ground-state ray on which the linearized
/// operator stays invertible: `((λ₂² − λ₁²)/p)^{1/(p−1)}`.
pub fn nondegeneracy_radius(lambda1_sq: f64, lambda2_sq: f64, p: f64) -> Result<f64> {
    if !(lambda2_sq > lambda1_sq) || !(lambda1_sq > 0.0) {
        return Err(CoreError::InvalidArgument(format!(
            "need 0 < λ₁² < λ₂², got {lambda1_sq} and {lambda2_sq}"
        )));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "growth exponent must exceed 1, got {p}"
        )));
    }
    Ok(((lambda2_sq - lambda1_sq) / p).powf(1.0 / (p - 1.0)))
}

/// Ratio `‖u/φ₁^τ‖_t / (‖u‖_s + ‖Lu‖_s + ‖Bu‖_s)` probing the weighted
/// embedding. `phi1` must be strictly positive on the interior and `u`
/// nonzero.
pub fn hardy_sobolev_ratio(u: &Field, phi1: &Field, bundle: &ExponentBundle) -> Result<f64> {
    check_same_grid(u, phi1)?;
    if phi1.values().iter().any(|&v| v <= 0.0) {
        return Err(CoreError::InvalidArgument(
            "ground-state weight must be strictly positive on the interior".into(),
        ));
    }
    let grid = u.grid();
    let tau = bundle.tau;
    let weighted = u.zip_map(phi1, |a, b| a / b.powf(tau))?;
    let numerator = lp_norm(&weighted, bundle.t)?;

    let l = laplacian_matrix(grid);
    let b = biharmonic_matrix(grid);
    let lu = Field::from_values(grid, l.apply(u.values()))?;
    let bu = Field::from_values(grid, b.apply(u.values()))?;
    let denominator = lp_norm(u, bundle.s)? + lp_norm(&lu, bundle.s)? + lp_norm(&bu, bundle.s)?;
    if denominator == 0.0 {
        return Err(CoreError::InvalidArgument(
            "weighted-norm ratio is undefined for the zero field".into(),
        ));
    }
    Ok(numerator / denominator)
}

/// A fully assembled discrete problem: grid, operators, spectral data, the
/// forcing term, and the exponent bundle.
///
/// The first two eigenpairs are taken from the fourth-order operator itself,
/// so `lambda1_sq`/`lambda2_sq` are its exact smallest Rayleigh quotients and
/// `phi1` minimizes the fourth-order residual — the natural normalization for
/// everything downstream.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub n_dim: u32,
    pub p: f64,
    pub r: f64,
    pub bundle: ExponentBundle,
    pub grid: Grid2D,
    /// Forcing term; satisfies `∫ f φ₁ < 0`.
    pub f: Field,
    /// Smallest eigenvalue of the fourth-order operator.
    pub lambda1_sq: f64,
    /// Second-smallest eigenvalue.
    pub lambda2_sq: f64,
    /// Positive ground state, unit quadrature-L² norm.
    pub phi1: Field,
    pub laplacian: SparseOperator,
    pub biharmonic: SparseOperator,
    /// Relative eigenresidual tolerance the spectral data was computed to;
    /// reused as the default for certificate eigensolves.
    pub eig_tol: f64,
}

impl ProblemSpec {
    /// Assemble operators and spectral data on the forcing's grid, then
    /// validate the hypotheses and the sign condition `∫ f φ₁ < 0`.
    pub fn assemble(n_dim: u32, p: f64, r: f64, f: &Field, eig_tol: f64) -> Result<ProblemSpec> {
        Self::assemble_with(n_dim, p, r, f.grid(), eig_tol, |_| Ok(f.clone()))
    }

    /// Like [`ProblemSpec::assemble`], but the forcing may be built from the
    /// computed ground state (e.g. `f = −c·φ₁^p`), avoiding a second
    /// eigensolve.
    pub fn assemble_with(
        n_dim: u32,
        p: f64,
        r: f64,
        grid: Grid2D,
        eig_tol: f64,
        make_f: impl FnOnce(&Field) -> Result<Field>,
    ) -> Result<ProblemSpec> {
        let bundle = exponent_bundle(n_dim, p, r)?;
        let laplacian = laplacian_matrix(grid);
        let biharmonic = biharmonic_matrix(grid);
        let pairs = smallest_eigenpairs(&biharmonic, grid, 2, eig_tol)?;
        let lambda1_sq = pairs[0].value;
        let lambda2_sq = pairs[1].value;
        let phi1 = pairs[0].vector.clone();
        let f = make_f(&phi1)?;
        check_same_grid(&f, &phi1)?;
        let pairing = sign_condition(&f, &phi1)?;
        if !(pairing < 0.0) {
            return Err(CoreError::HypothesisViolation(format!(
                "forcing must pair strictly negatively with the ground state, got ∫fφ₁ = {pairing}"
            )));
        }
        Ok(ProblemSpec {
            n_dim,
            p,
            r,
            bundle,
            grid,
            f,
            lambda1_sq,
            lambda2_sq,
            phi1,
            laplacian,
            biharmonic,
            eig_tol,
        })
    }

    /// Same problem with a different forcing; reuses the spectral data and
    /// operators, re-checking only the sign condition.
    pub fn with_forcing(&self, f: Field) -> Result<ProblemSpec> {
        check_same_grid(&f, &self.phi1)?;
        let pairing = sign_condition(&f, &self.phi1)?;
        if !(pairing < 0.0) {
            return Err(CoreError::HypothesisViolation(format!(
                "forcing must pair strictly negatively with the ground state, got ∫fφ₁ = {pairing}"
            )));
        }
        Ok(ProblemSpec {
            n_dim: self.n_dim,
            p: self.p,
            r: self.r,
            bundle: self.bundle,
            grid: self.grid,
            f,
            lambda1_sq: self.lambda1_sq,
            lambda2_sq: self.lambda2_sq,
            phi1: self.phi1.clone(),
            laplacian: self.laplacian.clone(),
            biharmonic: self.biharmonic.clone(),
            eig_tol: self.eig_tol,
        })
    }

    /// The nondegeneracy radius for this problem's spectral gap.
    pub fn nondegeneracy_radius(&self) -> Result<f64> {
        nondegeneracy_radius(self.lambda1_sq, self.lambda2_sq, self.p)
    }

    /// Resonance-identity defect of a candidate solution against this
    /// problem's forcing and ground state.
    pub fn resonance_residual(&self, u: &Field) -> Result<f64> {
        resonance_identity_residual(u, &self.f, &self.phi1, self.p)
    }
}
