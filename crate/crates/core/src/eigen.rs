//! Iterative linear algebra for the interior-node operators: conjugate
//! gradients, MINRES, deflated inverse power iteration for the smallest
//! eigenpairs, and the weighted eigenproblem behind the nondegeneracy
//! certificate.
//!
//! All routines work on the raw interior-node vectors; the public entry
//! points wrap them back into [`Field`]s. Eigenvectors are normalized in the
//! quadrature L² norm and sign-fixed so the entry of largest magnitude is
//! positive, which makes runs reproducible bit for bit.
//!
//! Convergence of an eigenpair `(λ, v)` means
//!
//! ```text
//! ‖A v − λ v‖₂  ≤  tol · max(|λ|, 1) · ‖v‖₂
//! ```
//!
//! measured with compensated matrix application, so the check is not limited
//! by evaluation noise. Tolerances requested below the rounding floor of the
//! underlying solves are reported as `NoConvergence` with the best residual
//! reached rather than silently accepted.

use crate::accum;
use crate::error::{CoreError, Result};
use crate::grid::{Field, Grid2D};
use crate::sparse::SparseOperator;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Eigenvalue/eigenvector pair of a symmetric operator.
#[derive(Debug, Clone)]
pub struct EigenPair {
    /// Rayleigh quotient of the stored vector.
    pub value: f64,
    /// Eigenvector with unit quadrature-L² norm, largest entry positive.
    pub vector: Field,
    /// `‖A v − λ v‖₂` of the stored (normalized) vector.
    pub residual: f64,
}

/// Smallest eigenvalues of `B v = μ m v` for a strictly positive weight `m`.
#[derive(Debug, Clone)]
pub struct WeightedSpectrum {
    /// The weight the spectrum was computed against.
    pub weight: Field,
    /// Ascending generalized eigenvalues `μ₁ ≤ … ≤ μ_k`.
    pub values: Vec<f64>,
    /// Eigenvectors, orthonormal in the `m`-weighted quadrature inner product.
    pub vectors: Vec<Field>,
    /// `‖B v − μ (m ∘ v)‖₂` for each stored pair.
    pub residuals: Vec<f64>,
}

/// Comparison of weighted spectra for two ordered weights.
#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    /// Eigenvalues for the smaller weight.
    pub mu_lighter: Vec<f64>,
    /// Eigenvalues for the larger weight.
    pub mu_heavier: Vec<f64>,
    /// `mu_lighter[j] - mu_heavier[j]`; positive when the eigenvalue drops.
    pub gaps: Vec<f64>,
    /// Whether each gap clears the significance threshold for the solve
    /// tolerance used.
    pub strict: Vec<bool>,
    /// True when every compared eigenvalue strictly decreases.
    pub all_strict: bool,
}

// ---------------------------------------------------------------------------
// dense vector helpers
// ---------------------------------------------------------------------------

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Outcome of an iterative linear solve. `x` is the best iterate seen, even
/// when the requested tolerance was not reached.
pub(crate) struct SolveOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub rel_residual: f64,
    pub converged: bool,
    /// The operator revealed itself as not positive definite (CG only).
    pub breakdown: bool,
}

fn true_rel_residual(a: &SparseOperator, x: &[f64], rhs: &[f64], bnorm: f64) -> f64 {
    let ax = a.apply(x);
    let mut s = 0.0;
    for i in 0..x.len() {
        let d = rhs[i] - ax[i];
        s += d * d;
    }
    s.sqrt() / bnorm
}

// ---------------------------------------------------------------------------
// conjugate gradients
// ---------------------------------------------------------------------------

/// Plain conjugate gradients for symmetric positive definite systems, with an
/// optional warm start. Claimed convergence is verified against the true
/// residual (the recurrence drifts near the rounding floor); persistent
/// stagnation stops the iteration and returns the best iterate.
pub(crate) fn conjugate_gradient(
    a: &SparseOperator,
    rhs: &[f64],
    x0: Option<&[f64]>,
    rel_tol: f64,
    max_iter: usize,
) -> SolveOutcome {
    let n = a.dim();
    assert_eq!(rhs.len(), n, "right-hand side length mismatch");
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        return SolveOutcome {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
            breakdown: false,
        };
    }

    let mut x = match x0 {
        Some(v) => {
            assert_eq!(v.len(), n, "warm start length mismatch");
            v.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut r: Vec<f64> = if x0.is_some() {
        let ax = a.apply(&x);
        rhs.iter().zip(&ax).map(|(b, y)| b - y).collect()
    } else {
        rhs.to_vec()
    };
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let mut ap = vec![0.0; n];

    let mut best_x = x.clone();
    let mut best_rel = rs.sqrt() / bnorm;
    let mut since_best = 0usize;
    let mut restarts = 0usize;
    let mut iters = 0usize;
    let mut breakdown = false;

    while iters < max_iter {
        let rel = rs.sqrt() / bnorm;
        if !rel.is_finite() {
            breakdown = true;
            break;
        }
        if rel < best_rel {
            best_rel = rel;
            best_x.copy_from_slice(&x);
            since_best = 0;
        } else {
            since_best += 1;
        }
        if rel <= rel_tol {
            // The recurrence says we are done; trust but verify.
            let tr = true_rel_residual(a, &x, rhs, bnorm);
            if tr <= rel_tol || restarts >= 3 {
                return SolveOutcome {
                    x,
                    iterations: iters,
                    rel_residual: tr,
                    converged: tr <= rel_tol,
                    breakdown: false,
                };
            }
            // Restart from the true residual and keep going.
            let ax = a.apply(&x);
            for i in 0..n {
                r[i] = rhs[i] - ax[i];
            }
            rs = dot(&r, &r);
            p.copy_from_slice(&r);
            restarts += 1;
            continue;
        }
        // A conjugate-gradient residual can plateau for O(√κ) iterations
        // before the superlinear phase; the window has to scale with the
        // problem, or large grids get cut off mid-plateau.
        if since_best > 200.max(n / 2) {
            break; // rounding floor reached
        }

        a.apply_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            breakdown = true;
            break;
        }
        let alpha = rs / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
        iters += 1;
    }

    let rel = true_rel_residual(a, &best_x, rhs, bnorm);
    SolveOutcome {
        x: best_x,
        iterations: iters,
        rel_residual: rel,
        converged: rel <= rel_tol,
        breakdown,
    }
}

// ---------------------------------------------------------------------------
// MINRES
// ---------------------------------------------------------------------------

/// MINRES for symmetric (possibly indefinite or singular) systems. The
/// Paige–Saunders residual estimate drifts away from the true residual once
/// rounding dominates — on badly conditioned systems long before the
/// attainable accuracy — so a single pass cannot be trusted to the floor.
/// This driver runs verified refinement passes: each pass solves for a
/// correction against the freshly recomputed residual, and the loop stops
/// paying once a pass no longer improves anything. On near-singular systems
/// the iteration stagnates instead of converging; the caller sees
/// `converged == false` with the best residual reached.
pub(crate) fn minres(
    a: &SparseOperator,
    rhs: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> SolveOutcome {
    let n = a.dim();
    assert_eq!(rhs.len(), n, "right-hand side length mismatch");
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        return SolveOutcome {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
            breakdown: false,
        };
    }

    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut rel = 1.0;
    let mut best_x = x.clone();
    let mut best_rel = rel;
    let mut iters = 0usize;

    for _pass in 0..6 {
        if rel <= rel_tol || iters >= max_iter {
            break;
        }
        // The correction must shrink the current residual by rel_tol/rel for
        // the combined iterate to meet the caller's tolerance.
        let seg_tol = (rel_tol / rel).clamp(1e-14, 0.5);
        let out = minres_pass(a, &r, seg_tol, max_iter - iters);
        iters += out.iterations;
        axpy(&mut x, 1.0, &out.x);
        let ax = a.apply(&x);
        for i in 0..n {
            r[i] = rhs[i] - ax[i];
        }
        let rel_new = norm2(&r) / bnorm;
        if rel_new < best_rel {
            best_rel = rel_new;
            best_x.copy_from_slice(&x);
        }
        // A pass that cannot even halve the residual has hit the rounding
        // floor or a genuinely singular operator; more passes would spin.
        let stalled = rel_new > 0.5 * rel;
        rel = rel_new;
        if out.iterations == 0 || stalled {
            break;
        }
    }

    SolveOutcome {
        x: best_x,
        iterations: iters,
        rel_residual: best_rel,
        converged: best_rel <= rel_tol,
        breakdown: false,
    }
}

/// One uninterrupted Paige–Saunders sweep for `minres`, solving from a zero
/// start and trusting its own recurrence only up to the point where it
/// disagrees with the true residual.
fn minres_pass(a: &SparseOperator, rhs: &[f64], rel_tol: f64, max_iter: usize) -> SolveOutcome {
    let n = a.dim();
    let bnorm = norm2(rhs);
    if bnorm == 0.0 {
        return SolveOutcome {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
            converged: true,
            breakdown: false,
        };
    }

    let mut x = vec![0.0; n];
    // Lanczos state: v is the current unit vector, v_prev the previous one.
    let beta1 = bnorm;
    let mut v: Vec<f64> = rhs.iter().map(|b| b / beta1).collect();
    let mut v_prev = vec![0.0; n];
    let mut beta = beta1;

    // QR state for the tridiagonal least-squares problem.
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut phibar = beta1;

    // Solution update directions w_{k-1}, w_{k-2}.
    let mut w_old = vec![0.0; n];
    let mut w_older = vec![0.0; n];

    let mut best_x = x.clone();
    let mut best_rel = 1.0;
    let mut since_best = 0usize;
    let mut iters = 0usize;

    while iters < max_iter {
        iters += 1;

        // Lanczos step: p = A v - alfa v - beta v_prev, beta_next = ‖p‖.
        let mut p = a.apply(&v);
        let alfa = dot(&v, &p);
        axpy(&mut p, -alfa, &v);
        if iters >= 2 {
            axpy(&mut p, -beta, &v_prev);
        }
        let beta_next = norm2(&p);

        // Previous rotation applied to the new column of the tridiagonal.
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta_next;
        dbar = -cs * beta_next;

        // Next rotation.
        let gamma = (gbar * gbar + beta_next * beta_next)
            .sqrt()
            .max(f64::MIN_POSITIVE);
        cs = gbar / gamma;
        sn = beta_next / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        // Solution update.
        for i in 0..n {
            let wi = (v[i] - oldeps * w_older[i] - delta * w_old[i]) / gamma;
            x[i] += phi * wi;
            w_older[i] = w_old[i];
            w_old[i] = wi;
        }

        let rel_est = phibar / bnorm;
        if rel_est < best_rel * 0.9995 {
            best_rel = rel_est;
            best_x.copy_from_slice(&x);
            since_best = 0;
        } else {
            since_best += 1;
        }

        if rel_est <= rel_tol || beta_next < f64::MIN_POSITIVE.sqrt() {
            let tr = true_rel_residual(a, &x, rhs, bnorm);
            if tr <= rel_tol {
                return SolveOutcome {
                    x,
                    iterations: iters,
                    rel_residual: tr,
                    converged: true,
                    breakdown: false,
                };
            }
            if beta_next < f64::MIN_POSITIVE.sqrt() {
                // Krylov space exhausted; nothing more to gain.
                break;
            }
            // The estimate drifted from the true residual: we are at the
            // rounding floor. Remember the iterate and stop.
            if tr < best_rel {
                best_x.copy_from_slice(&x);
            }
            break;
        }
        // Stagnation guard for singular or near-singular systems. On an
        // indefinite system with one small outlying eigenvalue the residual
        // can sit nearly flat for thousands of iterations while the Krylov
        // polynomial deals with the outlier, so the window has to be much
        // longer than any such plateau before giving up.
        if since_best > 2000.max(4 * n) {
            break;
        }

        // Advance Lanczos.
        std::mem::swap(&mut v_prev, &mut v);
        for i in 0..n {
            v[i] = p[i] / beta_next;
        }
        beta = beta_next;
    }

    let rel = true_rel_residual(a, &best_x, rhs, bnorm);
    SolveOutcome {
        x: best_x,
        iterations: iters,
        rel_residual: rel,
        converged: rel <= rel_tol,
        breakdown: false,
    }
}

// ---------------------------------------------------------------------------
// public linear solve
// ---------------------------------------------------------------------------

fn iteration_cap(n: usize) -> usize {
    (30 * n).max(400)
}

/// Solve `A x = rhs` for a symmetric positive definite operator by conjugate
/// gradients, to relative residual `tol`.
///
/// A zero right-hand side returns the zero field immediately. Tolerances that
/// sit below the rounding floor of the iteration surface as
/// [`CoreError::NoConvergence`] carrying the best residual reached.
pub fn solve_linear(a: &SparseOperator, rhs: &Field, tol: f64) -> Result<Field> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "solve tolerance must be positive and finite, got {tol}"
        )));
    }
    if a.dim() != rhs.len() {
        return Err(CoreError::InvalidArgument(format!(
            "operator dimension {} does not match field length {}",
            a.dim(),
            rhs.len()
        )));
    }
    let out = conjugate_gradient(a, rhs.values(), None, tol, iteration_cap(a.dim()));
    if out.breakdown {
        return Err(CoreError::InvalidArgument(
            "operator is not positive definite".into(),
        ));
    }
    if !out.converged {
        return Err(CoreError::NoConvergence {
            what: "conjugate gradient solve",
            residual: out.rel_residual,
            iterations: out.iterations,
        });
    }
    Field::from_values(rhs.grid(), out.x)
}

// ---------------------------------------------------------------------------
// inverse power iteration
// ---------------------------------------------------------------------------

fn l2_area(v: &[f64], area: f64) -> f64 {
    (area * dot(v, v)).sqrt()
}

/// Orthonormalize a block of columns in the quadrature inner product with
/// twice-applied modified Gram–Schmidt. A column that collapses into the span
/// of the previous ones is replaced by a fresh random vector.
fn orthonormalize_block(cols: &mut [Vec<f64>], area: f64, rng: &mut ChaCha8Rng) -> Result<()> {
    let n = cols[0].len();
    for j in 0..cols.len() {
        let mut attempt = 0;
        loop {
            {
                let (head, tail) = cols.split_at_mut(j);
                let v = &mut tail[0];
                for _ in 0..2 {
                    for b in head.iter() {
                        let c = area * dot(v, b);
                        axpy(v, -c, b);
                    }
                }
            }
            let nrm = l2_area(&cols[j], area);
            if nrm.is_finite() && nrm > 1e-8 {
                for x in cols[j].iter_mut() {
                    *x /= nrm;
                }
                break;
            }
            attempt += 1;
            if attempt > 16 {
                return Err(CoreError::InvalidArgument(
                    "could not build a basis outside the converged subspace".into(),
                ));
            }
            cols[j] = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        }
    }
    Ok(())
}

/// Eigendecomposition of a small dense symmetric matrix by cyclic Jacobi
/// rotations: returns the eigenvalues (unordered) and the orthogonal matrix
/// whose columns are the eigenvectors.
fn jacobi_small(mut g: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let m = g.len();
    let mut v = vec![vec![0.0; m]; m];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..60 {
        let mut off = 0.0_f64;
        let mut scale = f64::MIN_POSITIVE;
        for p in 0..m {
            scale = scale.max(g[p][p].abs());
            for q in (p + 1)..m {
                off = off.max(g[p][q].abs());
            }
        }
        if off <= 1e-15 * scale {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                if g[p][q].abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let angle = 0.5 * (2.0 * g[p][q]).atan2(g[q][q] - g[p][p]);
                let (s, c) = angle.sin_cos();
                for i in 0..m {
                    let gip = g[i][p];
                    let giq = g[i][q];
                    g[i][p] = c * gip - s * giq;
                    g[i][q] = s * gip + c * giq;
                }
                for i in 0..m {
                    let gpi = g[p][i];
                    let gqi = g[q][i];
                    g[p][i] = c * gpi - s * gqi;
                    g[q][i] = s * gpi + c * gqi;
                }
                for row in v.iter_mut() {
                    let vip = row[p];
                    let viq = row[q];
                    row[p] = c * vip - s * viq;
                    row[q] = s * vip + c * viq;
                }
            }
        }
    }
    ((0..m).map(|i| g[i][i]).collect(), v)
}

fn sign_normalize(v: &mut [f64]) {
    let mut idx = 0;
    let mut mag = 0.0;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > mag {
            mag = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

/// Block inverse subspace iteration with Rayleigh–Ritz extraction for the
/// `k` smallest eigenpairs of a symmetric positive definite operator.
///
/// The block is kept two vectors wider than requested so clustered or
/// degenerate eigenvalues converge together: the subspace converges at the
/// rate `μ_k/μ_{m+1}`, and the small dense Ritz problem resolves any
/// rotation inside a cluster exactly -- which a deflated single-vector
/// iteration cannot do at any useful rate. Inner solves are warm-started from
/// the scaled Ritz vectors and run at a tolerance tied to the current
/// residual, which keeps the total conjugate-gradient work low.
fn subspace_iteration(
    a: &SparseOperator,
    area: f64,
    k: usize,
    tol: f64,
) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    const MAX_OUTER: usize = 300;
    let n = a.dim();
    let m = (k + 2).min(n);
    let inner_cap = iteration_cap(n);
    let vnorm2 = 1.0 / area.sqrt(); // plain 2-norm of a unit quadrature-norm vector
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);

    // First column all ones (good overlap with a positive ground state), the
    // rest random.
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(m);
    cols.push(vec![1.0; n]);
    for _ in 1..m {
        cols.push((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect());
    }
    orthonormalize_block(&mut cols, area, &mut rng)?;

    let mut best_worst = f64::INFINITY;
    let mut stagnant = 0usize;
    let mut outers = 0usize;

    for _outer in 0..MAX_OUTER {
        outers += 1;
        // Rayleigh–Ritz on the current block, with compensated accumulation
        // so the projected matrix is limited by the block itself.
        let ax: Vec<Vec<f64>> = cols.iter().map(|c| a.apply_compensated(c)).collect();
        let mut g = vec![vec![0.0; m]; m];
        for i in 0..m {
            for j in i..m {
                let v = area * accum::dot(&cols[i], &ax[j]);
                g[i][j] = v;
                g[j][i] = v;
            }
        }
        let (theta, s) = jacobi_small(g);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&p, &q| theta[p].total_cmp(&theta[q]));

        // Ritz vectors and their images under the operator.
        let mut lams = Vec::with_capacity(m);
        let mut ys: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut ays: Vec<Vec<f64>> = Vec::with_capacity(m);
        for &col in &order {
            let mut y = vec![0.0; n];
            let mut ay = vec![0.0; n];
            for i in 0..m {
                let w = s[i][col];
                if w != 0.0 {
                    axpy(&mut y, w, &cols[i]);
                    axpy(&mut ay, w, &ax[i]);
                }
            }
            lams.push(theta[col]);
            ys.push(y);
            ays.push(ay);
        }

        // Residuals of the k requested pairs; the buffer pairs are only
        // along to speed convergence and need not settle.
        let mut raws = Vec::with_capacity(k);
        let mut worst = 0.0_f64;
        for j in 0..k {
            let mut res2 = 0.0;
            for i in 0..n {
                let d = ays[j][i] - lams[j] * ys[j][i];
                res2 += d * d;
            }
            let raw = res2.sqrt();
            worst = worst.max(raw / (lams[j].abs().max(f64::MIN_POSITIVE) * vnorm2));
            raws.push(raw);
        }

        if worst <= tol {
            let mut out: Vec<(f64, Vec<f64>, f64)> = (0..k)
                .map(|j| (lams[j], std::mem::take(&mut ys[j]), raws[j]))
                .collect();
            for pair in out.iter_mut() {
                sign_normalize(&mut pair.1);
            }
            return Ok(out);
        }
        if worst < best_worst * 0.995 {
            best_worst = worst;
            stagnant = 0;
        } else {
            stagnant += 1;
            if stagnant >= 20 {
                break; // rounding floor of the inner solves
            }
        }

        // Inverse step A w = y on every Ritz vector.
        let inner_tol = (0.1 * worst).clamp(1e-14, 1e-3);
        let mut next: Vec<Vec<f64>> = Vec::with_capacity(m);
        for j in 0..m {
            let lam = lams[j].abs().max(f64::MIN_POSITIVE);
            let x0: Vec<f64> = ys[j].iter().map(|x| x / lam).collect();
            let out = conjugate_gradient(a, &ys[j], Some(&x0), inner_tol, inner_cap);
            if out.breakdown {
                return Err(CoreError::InvalidArgument(
                    "operator is not positive definite".into(),
                ));
            }
            next.push(out.x);
        }
        // Normalize before Gram–Schmidt so collapse detection is scale-free.
        for col in next.iter_mut() {
            let nrm = l2_area(col, area);
            if nrm > 0.0 && nrm.is_finite() {
                for x in col.iter_mut() {
                    *x /= nrm;
                }
            } else {
                *col = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            }
        }
        cols = next;
        orthonormalize_block(&mut cols, area, &mut rng)?;
    }

    Err(CoreError::NoConvergence {
        what: "subspace inverse iteration",
        residual: best_worst,
        iterations: outers,
    })
}

fn smallest_pairs_raw(
    a: &SparseOperator,
    area: f64,
    k: usize,
    tol: f64,
) -> Result<Vec<(f64, Vec<f64>, f64)>> {
    subspace_iteration(a, area, k, tol)
}

fn check_spd_inputs(a: &SparseOperator, grid: Grid2D, k: usize, tol: f64) -> Result<()> {
    if a.dim() != grid.node_count() {
        return Err(CoreError::InvalidArgument(format!(
            "operator dimension {} does not match grid with {} interior nodes",
            a.dim(),
            grid.node_count()
        )));
    }
    if !a.is_symmetric() {
        return Err(CoreError::InvalidArgument(
            "eigenvalue routines require a symmetric operator".into(),
        ));
    }
    if k == 0 || k > a.dim() {
        return Err(CoreError::InvalidArgument(format!(
            "requested {k} eigenpairs from an operator of dimension {}",
            a.dim()
        )));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(CoreError::InvalidArgument(format!(
            "eigenvalue tolerance must be positive and finite, got {tol}"
        )));
    }
    Ok(())
}

/// Compute the `k` smallest eigenpairs of a symmetric positive definite
/// operator on `grid` by deflated inverse power iteration.
///
/// Returned pairs are sorted ascending by eigenvalue; eigenvectors have unit
/// quadrature-L² norm, are pairwise orthogonal in that inner product, and the
/// entry of largest magnitude is positive.
pub fn smallest_eigenpairs(
    a: &SparseOperator,
    grid: Grid2D,
    k: usize,
    tol: f64,
) -> Result<Vec<EigenPair>> {
    check_spd_inputs(a, grid, k, tol)?;
    let pairs = smallest_pairs_raw(a, grid.cell_area(), k, tol)?;
    pairs
        .into_iter()
        .map(|(lam, v, res)| {
            Ok(EigenPair {
                value: lam,
                vector: Field::from_values(grid, v)?,
                residual: res,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// weighted eigenproblem
// ---------------------------------------------------------------------------

/// Solve the generalized problem `B v = μ (m ∘ v)` for the `k` smallest `μ`,
/// with a strictly positive weight field `m`.
///
/// The problem is reduced to an ordinary symmetric one for
/// `C = D^{-1/2} B D^{-1/2}` with `D = diag(m)` and transformed back, so the
/// returned vectors are orthonormal in the `m`-weighted quadrature inner
/// product. Residuals are reported for the original generalized problem.
pub fn weighted_eigenvalues(
    b: &SparseOperator,
    m: &Field,
    k: usize,
    tol: f64,
) -> Result<WeightedSpectrum> {
    let grid = m.grid();
    check_spd_inputs(b, grid, k, tol)?;
    let mut d = Vec::with_capacity(m.len());
    for (idx, &w) in m.values().iter().enumerate() {
        if !(w > 0.0) || !w.is_finite() {
            return Err(CoreError::InvalidArgument(format!(
                "weight field must be strictly positive, entry {idx} is {w}"
            )));
        }
        d.push(1.0 / w.sqrt());
    }
    let c = b.scale_symmetric(&d)?;
    let pairs = smallest_pairs_raw(&c, grid.cell_area(), k, tol)?;

    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for (mu, y, _) in pairs {
        // Back-transform: v = D^{-1/2} y is automatically m-orthonormal.
        let v: Vec<f64> = y.iter().zip(&d).map(|(yi, di)| yi * di).collect();
        let bv = b.apply_compensated(&v);
        let mut res2 = 0.0;
        for i in 0..v.len() {
            let r = bv[i] - mu * m.values()[i] * v[i];
            res2 += r * r;
        }
        values.push(mu);
        vectors.push(Field::from_values(grid, v)?);
        residuals.push(res2.sqrt());
    }
    Ok(WeightedSpectrum {
        weight: m.clone(),
        values,
        vectors,
        residuals,
    })
}

/// Compare the weighted spectra of two ordered weights `m ≤ m_tilde` (with
/// strict inequality somewhere) and report whether each of the first `k`
/// eigenvalues strictly decreases when the weight grows.
pub fn check_weight_monotonicity(
    b: &SparseOperator,
    m: &Field,
    m_tilde: &Field,
    k: usize,
    tol: f64,
) -> Result<MonotonicityReport> {
    crate::grid::check_same_grid(m, m_tilde)?;
    let mut strictly_larger = 0usize;
    for (idx, (&lo, &hi)) in m.values().iter().zip(m_tilde.values()).enumerate() {
        if hi < lo {
            return Err(CoreError::InvalidArgument(format!(
                "weights are not ordered: entry {idx} has {hi} < {lo}"
            )));
        }
        if hi > lo {
            strictly_larger += 1;
        }
    }
    if strictly_larger == 0 {
        return Err(CoreError::InvalidArgument(
            "weights are identical; monotonicity comparison needs m ≤ m̃ with strict inequality somewhere".into(),
        ));
    }
    let lighter = weighted_eigenvalues(b, m, k, tol)?;
    let heavier = weighted_eigenvalues(b, m_tilde, k, tol)?;
    let mut gaps = Vec::with_capacity(k);
    let mut strict = Vec::with_capacity(k);
    for j in 0..k {
        let gap = lighter.values[j] - heavier.values[j];
        // Significant only when it clears the eigenvalue accuracy of the two
        // solves by a comfortable margin.
        let threshold = 100.0 * tol * lighter.values[j].abs().max(1.0);
        gaps.push(gap);
        strict.push(gap > threshold);
    }
    let all_strict = strict.iter().all(|&s| s);
    Ok(MonotonicityReport {
        mu_lighter: lighter.values,
        mu_heavier: heavier.values,
        gaps,
        strict,
        all_strict,
    })
}

/// Fraction of interior nodes where `|v|` is at most `eps_rel · sup|v|`.
///
/// A discrete stand-in for the measure of the zero set: genuine eigenvectors
/// of the operators here vanish only near nodal lines, so the fraction stays
/// small, while a field that is zero on a chunk of the domain scores high.
/// The zero field scores 1.0 by convention.
pub fn zero_set_fraction(v: &Field, eps_rel: f64) -> f64 {
    debug_assert!(eps_rel >= 0.0, "eps_rel must be nonnegative");
    let eps = eps_rel.max(0.0);
    let sup = v.sup_norm();
    if sup == 0.0 {
        return 1.0;
    }
    let count = v.values().iter().filter(|x| x.abs() <= eps * sup).count();
    count as f64 / v.len() as f64
}
