//! Nonlinear solves: the fourth-order residual, the fixed-point companion
//! map, a damped semismooth Newton iteration, and a forcing homotopy that
//! continues the exact reference solution down to a target forcing.
//!
//! The equation solved on the interior nodes is
//!
//! ```text
//! B u = λ₁² u + (u₊)^p + f,        B = L·L,
//! ```
//!
//! whose one-sided nonlinearity is only semismooth at `u = 0`; the Newton
//! linearization uses the generalized derivative `p·(u₊)^{p−1}` (zero on
//! `u ≤ 0`). Residual norms are quadrature-L² throughout.

use crate::eigen::{minres, solve_linear, weighted_eigenvalues};
use crate::error::{CoreError, Result};
use crate::estimates::{decompose, Decomposition, ProblemSpec};
use crate::grid::{check_same_grid, lp_norm, Field};
use crate::sparse::SparseOperator;

/// A solved problem instance.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Field,
    /// Quadrature-L² norm of the final residual.
    pub residual_norm: f64,
    /// Split of `u` along the ground state.
    pub decomposition: Decomposition,
    /// Present when a nondegeneracy certificate was computed.
    pub index_certificate: Option<IndexCertificate>,
    /// Newton iterations actually taken (0 when the start already solved it).
    pub newton_iterations: usize,
}

/// Spectral certificate for the linearization at a solution: the two smallest
/// eigenvalues of `B v = μ (λ₁² + p·(u₊)^{p−1}) v`.
#[derive(Debug, Clone, Copy)]
pub struct IndexCertificate {
    pub mu1: f64,
    pub mu2: f64,
    /// Both eigenvalues keep a safe distance from 1.
    pub nondegenerate: bool,
    /// Number of weighted eigenvalues below 1 — the Morse index of the
    /// linearized operator within the leading modes.
    pub index: usize,
}

/// One accepted continuation step.
#[derive(Debug, Clone, Copy)]
pub struct TraceRecord {
    /// Homotopy parameter after the step (1 = reference, 0 = target).
    pub tau: f64,
    /// Accepted-step counter, starting at 0 for the reference state.
    pub step: usize,
    /// Newton iterations the step needed.
    pub newton_iters: usize,
    /// Quadrature-L² residual at the accepted state.
    pub residual_norm: f64,
    /// Sup norm of the accepted state.
    pub sup_norm: f64,
    /// Ground-state component of the accepted state.
    pub phi1_component: f64,
}

/// Record of a continuation run, complete or partial.
#[derive(Debug, Clone)]
pub struct ContinuationTrace {
    pub records: Vec<TraceRecord>,
    /// True when the path reached the target forcing.
    pub completed: bool,
}

impl ContinuationTrace {
    /// CSV with one row per accepted step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tau,step,newton_iters,residual,sup_norm,t_component\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.tau, r.step, r.newton_iters, r.residual_norm, r.sup_norm, r.phi1_component
            ));
        }
        out
    }
}

/// Newton iteration budget per continuation step.
const MAX_NEWTON: usize = 30;
/// Smallest continuation step before giving up.
const MIN_DTAU: f64 = 1e-6;
/// Inner (MINRES) relative tolerance requested for Newton steps. The solver
/// stops at its rounding floor when this is unreachable; anything at or below
/// `ACCEPTABLE_STEP_RESIDUAL` still yields a usable step.
const NEWTON_INNER_TOL: f64 = 1e-10;
/// Worst inner relative residual that still counts as a Newton step.
const ACCEPTABLE_STEP_RESIDUAL: f64 = 1e-4;

fn pos_pow_values(u: &Field, p: f64) -> Vec<f64> {
    u.values()
        .iter()
        .map(|&v| if v > 0.0 { v.powf(p) } else { 0.0 })
        .collect()
}

fn residual_with(u: &Field, spec: &ProblemSpec, forcing: &Field) -> Result<Field> {
    check_same_grid(u, forcing)?;
    check_same_grid(u, &spec.phi1)?;
    // Apply B as two second-order sweeps with compensated accumulation: the
    // 13-point row sums cancel catastrophically (coefficients reach 20/h⁴
    // while the result is O(λ₁²·u)), and splitting keeps the evaluation
    // noise well below the residual scales asserted downstream.
    let lu = spec.laplacian.apply_compensated(u.values());
    let blu = spec.laplacian.apply_compensated(&lu);
    let up = pos_pow_values(u, spec.p);
    let mut vals = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        vals.push(blu[i] - spec.lambda1_sq * u.values()[i] - up[i] - forcing.values()[i]);
    }
    Field::from_values(u.grid(), vals)
}

/// Residual field `B u − λ₁² u − (u₊)^p − f` of a candidate solution.
pub fn residual(u: &Field, spec: &ProblemSpec) -> Result<Field> {
    residual_with(u, spec, &spec.f)
}

/// The companion fixed-point map `T(u) = B⁻¹(λ₁² u + (u₊)^p + f)`, evaluated
/// by a conjugate-gradient solve at relative tolerance `tol`. Discrete
/// solutions are exactly its fixed points.
pub fn fixed_point_map(u: &Field, spec: &ProblemSpec, tol: f64) -> Result<Field> {
    check_same_grid(u, &spec.f)?;
    let up = pos_pow_values(u, spec.p);
    let mut vals = Vec::with_capacity(u.len());
    for i in 0..u.len() {
        vals.push(spec.lambda1_sq * u.values()[i] + up[i] + spec.f.values()[i]);
    }
    let rhs = Field::from_values(u.grid(), vals)?;
    solve_linear(&spec.biharmonic, &rhs, tol)
}

/// Generalized-derivative weight of the linearization at `u`:
/// `g = λ₁² + p·(u₊)^{p−1}`, strictly positive.
fn linearization_weight(u: &Field, spec: &ProblemSpec) -> Field {
    u.map(|v| {
        if v > 0.0 {
            spec.lambda1_sq + spec.p * v.powf(spec.p - 1.0)
        } else {
            spec.lambda1_sq
        }
    })
}

/// Newton linearization `J = B − diag(λ₁² + p·(u₊)^{p−1})` at `u`.
pub fn linearization(u: &Field, spec: &ProblemSpec) -> Result<SparseOperator> {
    check_same_grid(u, &spec.phi1)?;
    let g = linearization_weight(u, spec);
    let neg: Vec<f64> = g.values().iter().map(|&w| -w).collect();
    spec.biharmonic.add_diagonal(&neg)
}

/// The reference forcing `f = −(t·φ₁)^p`, for which `u = t·φ₁` solves the
/// problem exactly in exact arithmetic. `t = 0` gives the zero forcing.
pub fn reference_forcing(t: f64, phi1: &Field, p: f64) -> Result<Field> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "reference amplitude must be a finite nonnegative number, got {t}"
        )));
    }
    if !(p > 1.0) || !p.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "growth exponent must exceed 1, got {p}"
        )));
    }
    Ok(phi1.scaled(t).pos_part_pow(p).scaled(-1.0))
}

fn build_solution(
    u: Field,
    residual_norm: f64,
    spec: &ProblemSpec,
    newton_iterations: usize,
) -> Result<Solution> {
    let decomposition = decompose(&u, &spec.phi1)?;
    Ok(Solution {
        u,
        residual_norm,
        decomposition,
        index_certificate: None,
        newton_iterations,
    })
}

fn newton_solve_with(
    u_start: &Field,
    spec: &ProblemSpec,
    forcing: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<Solution> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "Newton tolerance must be positive and finite, got {tol}"
        )));
    }
    if max_iter == 0 {
        return Err(CoreError::InvalidArgument(
            "Newton iteration budget must be at least 1".into(),
        ));
    }
    let mut u = u_start.clone();
    let mut r = residual_with(&u, spec, forcing)?;
    let mut rnorm = lp_norm(&r, 2.0)?;

    for iter in 0..=max_iter {
        if rnorm <= tol {
            return build_solution(u, rnorm, spec, iter);
        }
        if iter == max_iter {
            break;
        }

        let j = linearization(&u, spec)?;
        let neg_r: Vec<f64> = r.values().iter().map(|v| -v).collect();
        let out = minres(&j, &neg_r, NEWTON_INNER_TOL, 30 * j.dim());
        if !out.converged && out.rel_residual > ACCEPTABLE_STEP_RESIDUAL {
            return Err(CoreError::DegenerateLinearization(format!(
                "inner solve stagnated at relative residual {:.3e}; the linearization at the \
                 current iterate is effectively singular",
                out.rel_residual
            )));
        }
        let delta = Field::from_values(u.grid(), out.x)?;

        // Armijo backtracking on the residual norm.
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = u.add_scaled(s, &delta)?;
            let trial_r = residual_with(&trial, spec, forcing)?;
            let trial_norm = lp_norm(&trial_r, 2.0)?;
            if trial_norm <= (1.0 - 1e-4 * s) * rnorm || trial_norm <= tol {
                u = trial;
                r = trial_r;
                rnorm = trial_norm;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            return Err(CoreError::DegenerateLinearization(format!(
                "line search collapsed at residual {rnorm:.3e}; no descent along the Newton \
                 direction"
            )));
        }
    }
    Err(CoreError::NoConvergence {
        what: "semismooth Newton iteration",
        residual: rnorm,
        iterations: max_iter,
    })
}

/// Damped semismooth Newton iteration from `u_start`, stopping when the
/// quadrature-L² residual norm drops to `tol`.
///
/// Returns immediately (zero iterations) when the start already satisfies the
/// tolerance. A stagnating inner solve or a collapsed line search is reported
/// as [`CoreError::DegenerateLinearization`]; an exhausted budget as
/// [`CoreError::NoConvergence`].
pub fn newton_solve(
    u_start: &Field,
    spec: &ProblemSpec,
    tol: f64,
    max_iter: usize,
) -> Result<Solution> {
    newton_solve_with(u_start, spec, &spec.f, tol, max_iter)
}

/// Nondegeneracy certificate at a candidate solution: solves the weighted
/// eigenproblem with the linearization weight `λ₁² + p·(u₊)^{p−1}` and checks
/// how its two smallest eigenvalues sit relative to 1.
pub fn linearization_index(u: &Field, spec: &ProblemSpec) -> Result<IndexCertificate> {
    check_same_grid(u, &spec.phi1)?;
    let g = linearization_weight(u, spec);
    // The certificate only needs the two leading Ritz values to a margin of
    // 1e-8, and their error is quadratic in the residual tolerance; never
    // chase a tolerance deeper than 1e-9 even when the spec was assembled
    // with a much tighter eigenfunction solve.
    let tol = spec.eig_tol.max(1e-9);
    let spectrum = weighted_eigenvalues(&spec.biharmonic, &g, 2, tol)?;
    let mu1 = spectrum.values[0];
    let mu2 = spectrum.values[1];
    let margin = 1e-8;
    let nondegenerate = (mu1 - 1.0).abs() > margin && (mu2 - 1.0).abs() > margin;
    let index = spectrum.values.iter().filter(|&&m| m < 1.0).count();
    Ok(IndexCertificate {
        mu1,
        mu2,
        nondegenerate,
        index,
    })
}

/// Continue the exact reference solution `u = t_ref·φ₁` (for the forcing
/// `−(t_ref·φ₁)^p`) along the straight-line homotopy
///
/// ```text
/// f_τ = (1−τ)·f_target + τ·f_reference,        τ: 1 → 0,
/// ```
///
/// solving with Newton at each step. The step size starts at `1/steps`,
/// halves on a failed step, and recovers after consecutive easy successes.
/// Reaching `τ = 0` attaches an [`IndexCertificate`] to the solution. A step
/// size collapsing below `1e-6` aborts with
/// [`CoreError::ContinuationFailed`], carrying the partial trace.
pub fn homotopy_path(
    spec: &ProblemSpec,
    t_ref: f64,
    steps: usize,
    tol: f64,
) -> Result<(Solution, ContinuationTrace)> {
    if steps == 0 {
        return Err(CoreError::InvalidArgument(
            "continuation needs at least one step".into(),
        ));
    }
    if !(t_ref > 0.0) || !t_ref.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "reference amplitude must be positive and finite, got {t_ref}"
        )));
    }
    let f_ref = reference_forcing(t_ref, &spec.phi1, spec.p)?;
    let mut u = spec.phi1.scaled(t_ref);

    let r0 = residual_with(&u, spec, &f_ref)?;
    let d0 = decompose(&u, &spec.phi1)?;
    let mut trace = ContinuationTrace {
        records: vec![TraceRecord {
            tau: 1.0,
            step: 0,
            newton_iters: 0,
            residual_norm: lp_norm(&r0, 2.0)?,
            sup_norm: u.sup_norm(),
            phi1_component: d0.coefficient,
        }],
        completed: false,
    };

    let dtau0 = 1.0 / steps as f64;
    let mut dtau = dtau0;
    let mut tau = 1.0;
    let mut step = 0usize;
    let mut easy_streak = 0usize;
    let mut last: Option<Solution> = None;

    while tau > 0.0 {
        let tau_next = (tau - dtau).max(0.0);
        // f_τ = (1−τ)·f + τ·f_ref.
        let f_tau = spec.f.scaled(1.0 - tau_next).add_scaled(tau_next, &f_ref)?;
        match newton_solve_with(&u, spec, &f_tau, tol, MAX_NEWTON) {
            Ok(sol) => {
                step += 1;
                tau = tau_next;
                u = sol.u.clone();
                trace.records.push(TraceRecord {
                    tau,
                    step,
                    newton_iters: sol.newton_iterations,
                    residual_norm: sol.residual_norm,
                    sup_norm: sol.u.sup_norm(),
                    phi1_component: sol.decomposition.coefficient,
                });
                if sol.newton_iterations <= 3 {
                    easy_streak += 1;
                    if easy_streak >= 2 {
                        dtau = (2.0 * dtau).min(dtau0);
                        easy_streak = 0;
                    }
                } else {
                    easy_streak = 0;
                }
                last = Some(sol);
            }
            Err(err) => {
                easy_streak = 0;
                dtau *= 0.5;
                if dtau < MIN_DTAU {
                    return Err(CoreError::ContinuationFailed {
                        reason: format!(
                            "step size collapsed below {MIN_DTAU:.0e} at τ = {tau}: {err}"
                        ),
                        trace: Box::new(trace),
                    });
                }
            }
        }
    }

    let mut sol = last.expect("the τ = 0 step produced a solution");
    trace.completed = true;
    sol.index_certificate = Some(linearization_index(&sol.u, spec)?);
    Ok((sol, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, normalize_l2, sine_mode_field, Grid2D};

    const PI: f64 = std::f64::consts::PI;

    fn unit_mode(grid: Grid2D) -> Field {
        normalize_l2(&sine_mode_field(grid, 1, 1).unwrap()).unwrap()
    }

    /// Assembled problem with the standard exponents and forcing `−c·φ₁^p`.
    fn spec_on(n: usize, c: f64, eig_tol: f64) -> ProblemSpec {
        let grid = build_grid(1.0, 1.0, n, n).unwrap();
        ProblemSpec::assemble_with(6, 2.1, 2.5, grid, eig_tol, |phi| {
            Ok(phi.pos_part_pow(2.1).scaled(-c))
        })
        .unwrap()
    }

    #[test]
    fn residual_at_zero_is_negated_forcing() {
        let spec = spec_on(9, 0.05, 1e-9);
        let r = residual(&Field::zeros(spec.grid), &spec).unwrap();
        for (ri, fi) in r.values().iter().zip(spec.f.values()) {
            assert_eq!(*ri, -fi);
        }
    }

    #[test]
    fn residual_vanishes_at_reference_solution() {
        // u = t·φ₁ with f = −(t·φ₁)^p solves the discrete problem exactly.
        // With the closed-form eigenpair of the discrete operator (the sine
        // mode and its eigenvalue are known in closed form), what is left is
        // pure floating-point floor.
        let mut spec = spec_on(31, 0.05, 1e-10);
        let h = spec.grid.hx();
        let lam1 = (8.0 / (h * h)) * (PI * h / 2.0).sin().powi(2);
        spec.phi1 = unit_mode(spec.grid);
        spec.lambda1_sq = lam1 * lam1;
        let t = 0.3;
        let u = spec.phi1.scaled(t);
        let f = reference_forcing(t, &spec.phi1, spec.p).unwrap();
        let r = residual_with(&u, &spec, &f).unwrap();
        assert!(
            r.sup_norm() < 1e-8,
            "reference residual sup {}",
            r.sup_norm()
        );
        assert!(lp_norm(&r, 2.0).unwrap() < 2e-9);
    }

    #[test]
    fn fixed_point_map_fixes_the_reference_solution() {
        let grid = build_grid(1.0, 1.0, 31, 31).unwrap();
        let t = 0.3;
        let spec = ProblemSpec::assemble_with(6, 2.1, 2.5, grid, 1e-10, |phi| {
            reference_forcing(t, phi, 2.1)
        })
        .unwrap();
        let u = spec.phi1.scaled(t);
        let tu = fixed_point_map(&u, &spec, 1e-10).unwrap();
        let mut err: f64 = 0.0;
        for (a, b) in tu.values().iter().zip(u.values()) {
            err = err.max((a - b).abs());
        }
        assert!(
            err <= 1e-8 * u.sup_norm(),
            "fixed-point defect {err} vs scale {}",
            u.sup_norm()
        );
    }

    #[test]
    fn linearization_matches_weight_definition() {
        let spec = spec_on(9, 0.05, 1e-9);
        // A field with both signs exercises both branches of the generalized
        // derivative.
        let u = Field::from_fn(spec.grid, |x, y| (2.0 * PI * x).sin() * (PI * y).sin());
        let j = linearization(&u, &spec).unwrap();
        assert!(j.is_symmetric_exact());
        let jd = j.diagonal();
        let bd = spec.biharmonic.diagonal();
        for i in 0..u.len() {
            let v = u.values()[i];
            let want = if v > 0.0 {
                bd[i] - spec.lambda1_sq - spec.p * v.powf(spec.p - 1.0)
            } else {
                bd[i] - spec.lambda1_sq
            };
            assert!(
                (jd[i] - want).abs() <= 1e-12 * want.abs(),
                "diagonal entry {i}: {} vs {want}",
                jd[i]
            );
        }
    }

    #[test]
    fn linearization_agrees_with_finite_differences() {
        let spec = spec_on(17, 0.05, 1e-9);
        let u = Field::from_fn(spec.grid, |x, y| {
            0.4 * (PI * x).sin() * (PI * y).sin() - 0.1 * (2.0 * PI * x).sin() * (PI * y).sin()
        });
        let v = Field::from_fn(spec.grid, |x, y| (PI * x).sin() * (2.0 * PI * y).sin());
        let j = linearization(&u, &spec).unwrap();
        let jv = j.apply(v.values());
        let eps = 1e-5;
        let rp = residual(&u.add_scaled(eps, &v).unwrap(), &spec).unwrap();
        let rm = residual(&u.add_scaled(-eps, &v).unwrap(), &spec).unwrap();
        let scale = jv.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        for i in 0..u.len() {
            // The kink of the one-sided nonlinearity breaks finite
            // differences where u crosses zero; compare away from it.
            if u.values()[i].abs() < 1e-3 {
                continue;
            }
            let fd = (rp.values()[i] - rm.values()[i]) / (2.0 * eps);
            assert!(
                (fd - jv[i]).abs() < 1e-3 * scale,
                "entry {i}: fd {fd} vs analytic {}",
                jv[i]
            );
        }
    }

    #[test]
    fn newton_converges_from_perturbed_start() {
        let c = 0.05;
        let spec = spec_on(17, c, 1e-10);
        let t_exact = c.powf(1.0 / spec.p);
        let start = spec.phi1.scaled(0.9 * t_exact);
        let sol = newton_solve(&start, &spec, 1e-9, 10).unwrap();
        assert!(sol.newton_iterations <= 10);
        assert!(sol.residual_norm <= 1e-9);
        assert!(
            (sol.decomposition.coefficient - t_exact).abs() < 1e-6,
            "ground-state component {} vs {t_exact}",
            sol.decomposition.coefficient
        );
        let rem = lp_norm(&sol.decomposition.remainder, 2.0).unwrap();
        assert!(rem < 1e-6, "remainder {rem} should be tiny");
    }

    #[test]
    fn newton_returns_immediately_at_a_solution() {
        let c = 0.05;
        let spec = spec_on(17, c, 1e-10);
        let first = newton_solve(&spec.phi1.scaled(0.9 * c.powf(1.0 / spec.p)), &spec, 1e-9, 10)
            .unwrap();
        let again = newton_solve(&first.u, &spec, 1e-9, 10).unwrap();
        assert_eq!(again.newton_iterations, 0);
        assert_eq!(again.u.values(), first.u.values());
    }

    #[test]
    fn newton_validates_arguments() {
        let spec = spec_on(9, 0.05, 1e-9);
        let u = Field::zeros(spec.grid);
        assert!(newton_solve(&u, &spec, 0.0, 5).is_err());
        assert!(newton_solve(&u, &spec, 1e-9, 0).is_err());
    }

    #[test]
    fn singular_linearization_is_reported_as_degenerate() {
        // Tune the linear coefficient onto the second eigenvalue: the
        // linearization at u = 0 becomes B − λ₂²·I, which is singular, and
        // the forcing is chosen with a large second-mode component so the
        // Newton system is genuinely unsolvable there.
        let grid = build_grid(1.0, 1.0, 17, 17).unwrap();
        let mut spec = ProblemSpec::assemble_with(6, 2.1, 2.5, grid, 1e-10, |_| {
            Ok(Field::from_fn(grid, |x, y| {
                -((PI * x).sin() + 0.5 * (2.0 * PI * x).sin()) * (PI * y).sin()
            }))
        })
        .unwrap();
        spec.lambda1_sq = spec.lambda2_sq;
        let u = Field::zeros(grid);
        match newton_solve(&u, &spec, 1e-9, 5) {
            Err(CoreError::DegenerateLinearization(_)) => {}
            other => panic!("expected DegenerateLinearization, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_weight_controls_sit_at_one() {
        // The two control weights reproduce μ = 1 exactly: they are the
        // problem's own eigenvalues.
        let spec = spec_on(17, 0.05, 1e-10);
        let w1 = Field::constant(spec.grid, spec.lambda1_sq);
        let s1 = weighted_eigenvalues(&spec.biharmonic, &w1, 2, 1e-10).unwrap();
        assert!(
            (s1.values[0] - 1.0).abs() < 1e-8,
            "μ₁(λ₁²) = {}",
            s1.values[0]
        );
        assert!(s1.values[1] > 1.0 + 1e-3);
        let w2 = Field::constant(spec.grid, spec.lambda2_sq);
        let s2 = weighted_eigenvalues(&spec.biharmonic, &w2, 2, 1e-10).unwrap();
        assert!(
            (s2.values[1] - 1.0).abs() < 1e-8,
            "μ₂(λ₂²) = {}",
            s2.values[1]
        );
        assert!(s2.values[0] < 1.0 - 1e-3);
    }

    #[test]
    fn reference_forcing_matches_definition() {
        let grid = build_grid(1.0, 1.0, 15, 15).unwrap();
        let phi = unit_mode(grid);
        let f = reference_forcing(0.4, &phi, 2.1).unwrap();
        for (fi, pi) in f.values().iter().zip(phi.values()) {
            let want = -(0.4 * pi).powf(2.1);
            assert!((fi - want).abs() <= 1e-15 * want.abs());
        }
        let zero = reference_forcing(0.0, &phi, 2.1).unwrap();
        assert!(zero.values().iter().all(|&v| v == 0.0));
        assert!(reference_forcing(-0.1, &phi, 2.1).is_err());
        assert!(reference_forcing(0.1, &phi, 1.0).is_err());
        assert!(reference_forcing(f64::NAN, &phi, 2.1).is_err());
    }

    #[test]
    fn constant_homotopy_keeps_the_reference_solution() {
        // Target forcing equal to the reference forcing: every step converges
        // with zero Newton iterations and the state never moves.
        let grid = build_grid(1.0, 1.0, 17, 17).unwrap();
        let t = 0.3;
        let spec = ProblemSpec::assemble_with(6, 2.1, 2.5, grid, 1e-10, |phi| {
            reference_forcing(t, phi, 2.1)
        })
        .unwrap();
        let (sol, trace) = homotopy_path(&spec, t, 4, 1e-8).unwrap();
        assert!(trace.completed);
        assert_eq!(trace.records.len(), 5);
        assert!(trace.records.iter().all(|r| r.newton_iters == 0));
        let exact = spec.phi1.scaled(t);
        assert_eq!(sol.u.values(), exact.values());
        let cert = sol.index_certificate.expect("certificate at τ = 0");
        assert!(cert.mu1 < 1.0 && cert.mu2 > 1.0, "{cert:?}");
        assert!(cert.nondegenerate);
        assert_eq!(cert.index, 1);
    }

    #[test]
    fn homotopy_reaches_target_forcing() {
        let c = 0.05;
        let spec = spec_on(17, c, 1e-10);
        let (sol, trace) = homotopy_path(&spec, 0.3, 4, 1e-9).unwrap();
        assert!(trace.completed);
        assert!(sol.residual_norm <= 1e-9);
        // τ descends from 1 to 0.
        assert_eq!(trace.records[0].tau, 1.0);
        assert_eq!(trace.records.last().unwrap().tau, 0.0);
        for w in trace.records.windows(2) {
            assert!(w[1].tau < w[0].tau);
        }
        // The target has the exact solution u = c^{1/p}·φ₁.
        let t_exact = c.powf(1.0 / spec.p);
        assert!(
            (sol.decomposition.coefficient - t_exact).abs() < 1e-6,
            "component {} vs {t_exact}",
            sol.decomposition.coefficient
        );
        let cert = sol.index_certificate.unwrap();
        assert!(cert.nondegenerate && cert.index == 1);
        // Pairing the equation with the ground state is the resonance
        // identity; a converged solution satisfies it to the solve tolerance.
        let defect = spec.resonance_residual(&sol.u).unwrap();
        assert!(defect < 1e-8, "resonance defect {defect}");
    }

    #[test]
    fn homotopy_validates_arguments() {
        let spec = spec_on(9, 0.05, 1e-9);
        assert!(matches!(
            homotopy_path(&spec, 0.3, 0, 1e-8),
            Err(CoreError::InvalidArgument(_))
        ));
        assert!(homotopy_path(&spec, 0.0, 4, 1e-8).is_err());
        assert!(homotopy_path(&spec, f64::NAN, 4, 1e-8).is_err());
    }

    #[test]
    fn impossible_tolerance_fails_with_partial_trace() {
        let spec = spec_on(9, 0.05, 1e-9);
        // A tolerance below the floating-point floor: no Newton step can ever
        // succeed, the step size collapses, and the partial trace (just the
        // reference record) comes back with the error.
        match homotopy_path(&spec, 0.3, 2, 1e-16) {
            Err(CoreError::ContinuationFailed { reason, trace }) => {
                assert!(!trace.completed);
                assert_eq!(trace.records.len(), 1);
                assert_eq!(trace.records[0].tau, 1.0);
                assert!(reason.contains("step size"), "reason: {reason}");
            }
            other => panic!("expected ContinuationFailed, got {other:?}"),
        }
    }

    #[test]
    fn trace_csv_round_trips_through_parsing() {
        let spec = spec_on(17, 0.05, 1e-10);
        let (_, trace) = homotopy_path(&spec, 0.3, 4, 1e-9).unwrap();
        let csv = trace.to_csv();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "tau,step,newton_iters,residual,sup_norm,t_component"
        );
        let mut parsed = 0;
        for (line, rec) in lines.zip(&trace.records) {
            let cols: Vec<&str> = line.split(',').collect();
            assert_eq!(cols.len(), 6);
            assert_eq!(cols[0].parse::<f64>().unwrap(), rec.tau);
            assert_eq!(cols[1].parse::<usize>().unwrap(), rec.step);
            assert_eq!(cols[2].parse::<usize>().unwrap(), rec.newton_iters);
            assert_eq!(cols[3].parse::<f64>().unwrap(), rec.residual_norm);
            assert_eq!(cols[4].parse::<f64>().unwrap(), rec.sup_norm);
            assert_eq!(cols[5].parse::<f64>().unwrap(), rec.phi1_component);
            parsed += 1;
        }
        assert_eq!(parsed, trace.records.len());
    }

    #[test]
    fn certified_solution_lies_inside_nondegeneracy_radius() {
        let spec = spec_on(17, 0.05, 1e-10);
        let (sol, _) = homotopy_path(&spec, 0.3, 4, 1e-9).unwrap();
        let radius = spec.nondegeneracy_radius().unwrap();
        assert!(
            sol.u.sup_norm() < radius,
            "sup {} should sit inside the radius {radius}",
            sol.u.sup_norm()
        );
        let cert = linearization_index(&sol.u, &spec).unwrap();
        assert!(cert.mu1 < 1.0 && 1.0 < cert.mu2);
    }
}
