//! Subcommand implementations.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use biharm_core::eigen::{smallest_eigenpairs, EigenPair};
use biharm_core::estimates::{
    check_hypotheses, exponent_bundle, ExponentBundle, ProblemSpec,
};
use biharm_core::solver::{homotopy_path, linearization_index, newton_solve, ContinuationTrace, Solution};
use biharm_core::{
    biharmonic_matrix, build_grid, laplacian_matrix, lp_norm, normalize_l2, sine_mode_field,
    CoreError, Field, Grid2D,
};

use crate::config::{Forcing, RunConfig};
use crate::output;
use crate::CliError;

/// Compute the three smallest eigenpairs of the Laplacian and biharmonic
/// operators, write both spectra and the ground state, and print the
/// resonance data `λ₁ʰ, λ₂ʰ, (λ₁ʰ)²`.
pub fn eig(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = build_grid(cfg.a, cfg.b, cfg.nx, cfg.ny)?;
    output::ensure_out_dir(cfg)?;
    let l = laplacian_matrix(grid);
    let b = biharmonic_matrix(grid);
    let l_pairs = smallest_eigenpairs(&l, grid, 3, cfg.linear_tol)?;
    let b_pairs = smallest_eigenpairs(&b, grid, 3, cfg.linear_tol)?;

    let lambda1 = l_pairs[0].value;
    println!("lambda1_h         = {:.6}", lambda1);
    println!("lambda2_h         = {:.6}", l_pairs[1].value);
    println!("lambda1_h_squared = {:.6}", lambda1 * lambda1);
    println!("mu1_h (biharmonic) = {:.6}", b_pairs[0].value);

    output::write_file(
        &output::out_path(cfg, "laplacian_spectrum.csv"),
        &spectrum_csv(cfg, &l_pairs),
    )?;
    output::write_file(
        &output::out_path(cfg, "biharmonic_spectrum.csv"),
        &spectrum_csv(cfg, &b_pairs),
    )?;
    output::write_field(
        &output::out_path(cfg, "phi1.csv"),
        cfg,
        "eig",
        &b_pairs[0].vector,
    )?;
    Ok(())
}

fn spectrum_csv(cfg: &RunConfig, pairs: &[EigenPair]) -> String {
    let mut text = output::header(cfg, "eig");
    text.push_str("index,value,residual\n");
    for (k, pair) in pairs.iter().enumerate() {
        text.push_str(&format!("{},{},{}\n", k + 1, pair.value, pair.residual));
    }
    text
}

/// Tabulate the exponent bundle over the configured `p` grid. Rows keep the
/// user's order; the `pass` flag records admissibility, and exponents of
/// failing rows are still reported (from the raw formulas) for inspection.
pub fn hypotheses(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.p_values.is_empty() {
        return Err(CliError::Config(
            "p_values must contain at least one exponent".into(),
        ));
    }
    output::ensure_out_dir(cfg)?;
    let mut text = output::header(cfg, "hypotheses");
    text.push_str("N,p,r,s,L,alpha,tau,t,theta,pass\n");
    let mut passes = 0usize;
    for &p in &cfg.p_values {
        let report = check_hypotheses(cfg.n_dim, p, cfg.r);
        let bundle = ExponentBundle::raw(cfg.n_dim, p, cfg.r);
        passes += report.ok as usize;
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            cfg.n_dim,
            p,
            cfg.r,
            bundle.s,
            bundle.ell,
            bundle.alpha,
            bundle.tau,
            bundle.t,
            bundle.theta,
            u8::from(report.ok)
        ));
    }
    let path = output::out_path(cfg, "hypotheses.csv");
    output::write_file(&path, &text)?;
    println!(
        "wrote {} ({passes} of {} exponents admissible)",
        path.display(),
        cfg.p_values.len()
    );
    Ok(())
}

fn build_spec(cfg: &RunConfig, grid: Grid2D) -> Result<ProblemSpec, CliError> {
    let spec = match &cfg.forcing {
        Forcing::Eigpow(c) => {
            let (p, c) = (cfg.p, *c);
            ProblemSpec::assemble_with(cfg.n_dim, cfg.p, cfg.r, grid, cfg.linear_tol, move |phi| {
                Ok(phi.pos_part_pow(p).scaled(-c))
            })?
        }
        Forcing::File(path) => {
            let f = output::read_field(path, grid)?;
            ProblemSpec::assemble(cfg.n_dim, cfg.p, cfg.r, &f, cfg.linear_tol)?
        }
    };
    Ok(spec)
}

/// Transport the reference state `t_ref·φ₁` to the target forcing by homotopy
/// continuation. On success writes the solution field, the accepted-step
/// trace, and a key/value summary; on a continuation failure the partial
/// trace is still written, with the failure reason as a trailing comment.
pub fn continuation(cfg: &RunConfig) -> Result<(), CliError> {
    let grid = build_grid(cfg.a, cfg.b, cfg.nx, cfg.ny)?;
    output::ensure_out_dir(cfg)?;
    let spec = build_spec(cfg, grid)?;
    match homotopy_path(&spec, cfg.t_ref, cfg.continuation_steps, cfg.newton_tol) {
        Ok((solution, trace)) => {
            write_trace(cfg, &trace, None)?;
            output::write_field(
                &output::out_path(cfg, "solution.csv"),
                cfg,
                "continue",
                &solution.u,
            )?;
            write_meta(cfg, &solution, &trace)?;
            println!(
                "continuation complete: residual = {:.3e}, sup = {:.6}, t-component = {:.6}",
                solution.residual_norm,
                solution.u.sup_norm(),
                solution.decomposition.coefficient
            );
            Ok(())
        }
        Err(CoreError::ContinuationFailed { reason, trace }) => {
            write_trace(cfg, &trace, Some(&reason))?;
            Err(CliError::Solver(format!("continuation failed: {reason}")))
        }
        Err(e) => Err(e.into()),
    }
}

fn write_trace(
    cfg: &RunConfig,
    trace: &ContinuationTrace,
    failure: Option<&str>,
) -> Result<(), CliError> {
    let mut text = output::header(cfg, "continue");
    text.push_str(&trace.to_csv());
    if let Some(reason) = failure {
        text.push_str(&format!("# failure: {reason}\n"));
    }
    output::write_file(&output::out_path(cfg, "trace.csv"), &text)
}

fn write_meta(
    cfg: &RunConfig,
    solution: &Solution,
    trace: &ContinuationTrace,
) -> Result<(), CliError> {
    let mut text = output::header(cfg, "continue");
    text.push_str("key,value\n");
    text.push_str(&format!("residual,{}\n", solution.residual_norm));
    text.push_str(&format!("sup_norm,{}\n", solution.u.sup_norm()));
    text.push_str(&format!(
        "t_component,{}\n",
        solution.decomposition.coefficient
    ));
    text.push_str(&format!(
        "remainder_sup,{}\n",
        solution.decomposition.remainder.sup_norm()
    ));
    text.push_str(&format!(
        "newton_iterations,{}\n",
        solution.newton_iterations
    ));
    text.push_str(&format!("records,{}\n", trace.records.len()));
    text.push_str(&format!("completed,{}\n", trace.completed));
    if let Some(cert) = &solution.index_certificate {
        text.push_str(&format!("mu1,{}\n", cert.mu1));
        text.push_str(&format!("mu2,{}\n", cert.mu2));
        text.push_str(&format!("index,{}\n", cert.index));
        text.push_str(&format!("nondegenerate,{}\n", cert.nondegenerate));
    }
    output::write_file(&output::out_path(cfg, "meta.csv"), &text)
}

struct SweepRow {
    forcing_norm: f64,
    sup_norm: f64,
    c1_norm: f64,
    t: f64,
    index: usize,
}

/// Solve `(−Δ)²u = λ₁²u + u₊^p − c·(φ₁)₊^p` for each requested coefficient
/// and record the envelope data (forcing norm, sup norm, C¹ proxy, ground
/// state component, Morse index). Coefficients are deduplicated and sorted;
/// a row that fails keeps its failure reason in the `status` column rather
/// than aborting the sweep. Exit is successful when at least one row solved.
pub fn sweep(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.c_values.is_empty() {
        return Err(CliError::Config(
            "c_values must contain at least one coefficient".into(),
        ));
    }
    let grid = build_grid(cfg.a, cfg.b, cfg.nx, cfg.ny)?;
    output::ensure_out_dir(cfg)?;
    let mut cs = cfg.c_values.clone();
    cs.sort_by(f64::total_cmp);
    cs.dedup();

    // One spectral assembly serves the whole sweep; only the forcing varies.
    let p = cfg.p;
    let base = ProblemSpec::assemble_with(cfg.n_dim, cfg.p, cfg.r, grid, cfg.linear_tol, |phi| {
        Ok(phi.pos_part_pow(p).scaled(-1.0))
    })?;

    let mut text = output::header(cfg, "sweep");
    text.push_str("c,forcing_norm,sup_norm,c1_norm,t,index,status\n");
    let mut ok_rows = 0usize;
    let mut solver_failed = false;
    for &c in &cs {
        match sweep_row(&base, c, cfg) {
            Ok(row) => {
                ok_rows += 1;
                text.push_str(&format!(
                    "{},{},{},{},{},{},ok\n",
                    c, row.forcing_norm, row.sup_norm, row.c1_norm, row.t, row.index
                ));
            }
            Err(e) => {
                solver_failed |= matches!(
                    e,
                    CoreError::NoConvergence { .. }
                        | CoreError::DegenerateLinearization(_)
                        | CoreError::ContinuationFailed { .. }
                );
                let msg = e.to_string().replace(',', ";").replace('\n', " ");
                text.push_str(&format!("{c},,,,,,{msg}\n"));
            }
        }
    }
    let path = output::out_path(cfg, "sweep.csv");
    output::write_file(&path, &text)?;
    println!(
        "wrote {} ({ok_rows} of {} coefficients solved)",
        path.display(),
        cs.len()
    );
    if ok_rows == 0 {
        return Err(if solver_failed {
            CliError::Solver("every sweep coefficient failed".into())
        } else {
            CliError::Hypothesis("every sweep coefficient was rejected before solving".into())
        });
    }
    Ok(())
}

fn sweep_row(base: &ProblemSpec, c: f64, cfg: &RunConfig) -> Result<SweepRow, CoreError> {
    let f = base.phi1.pos_part_pow(base.p).scaled(-c);
    // The sign condition rejects c ≤ 0 here (zero or positively paired forcing).
    let spec = base.with_forcing(f)?;
    // The family −c·(φ₁)₊^p has the exact solution c^{1/p}·φ₁; start Newton
    // inside that basin.
    let start = spec.phi1.scaled(0.8 * c.powf(1.0 / spec.p));
    let solution = newton_solve(&start, &spec, cfg.newton_tol, cfg.max_newton)?;
    let cert = linearization_index(&solution.u, &spec)?;
    Ok(SweepRow {
        forcing_norm: lp_norm(&spec.f, spec.r)?,
        sup_norm: solution.u.sup_norm(),
        c1_norm: c1_proxy(&solution.u),
        t: solution.decomposition.coefficient,
        index: cert.index,
    })
}

/// C¹ proxy: the larger of the sup norm and the largest central-difference
/// gradient magnitude (boundary values are identically zero).
fn c1_proxy(u: &Field) -> f64 {
    let g = u.grid();
    let (nx, ny) = (g.nx() as isize, g.ny() as isize);
    let at = |i: isize, j: isize| -> f64 {
        if i < 1 || j < 1 || i > nx || j > ny {
            0.0
        } else {
            u.value(i as usize, j as usize)
        }
    };
    let mut best = u.sup_norm();
    for j in 1..=ny {
        for i in 1..=nx {
            let gx = (at(i + 1, j) - at(i - 1, j)) / (2.0 * g.hx());
            let gy = (at(i, j + 1) - at(i, j - 1)) / (2.0 * g.hy());
            best = best.max(gx.hypot(gy));
        }
    }
    best
}

/// Sample the weighted embedding quotient on seeded random smooth fields at
/// the configured resolution and its dyadic refinement (`2n+1` interior nodes
/// keeps the coarse nodes a subset of the fine ones). Both resolutions see
/// the same continuum fields because the coefficient draws are identical.
pub fn hardy_sobolev(cfg: &RunConfig) -> Result<(), CliError> {
    if cfg.samples == 0 {
        return Err(CliError::Config("samples must be positive".into()));
    }
    output::ensure_out_dir(cfg)?;
    let bundle = exponent_bundle(cfg.n_dim, cfg.p, cfg.r)?;
    let coarse = build_grid(cfg.a, cfg.b, cfg.nx, cfg.ny)?;
    let fine = build_grid(cfg.a, cfg.b, 2 * cfg.nx + 1, 2 * cfg.ny + 1)?;
    let coarse_ratios = embedding_ratios(coarse, &bundle, cfg.samples, cfg.seed)?;
    let fine_ratios = embedding_ratios(fine, &bundle, cfg.samples, cfg.seed)?;

    let mut text = output::header(cfg, "hardy-sobolev");
    text.push_str("sample,ratio_coarse,ratio_fine\n");
    for s in 0..cfg.samples {
        text.push_str(&format!("{},{},{}\n", s, coarse_ratios[s], fine_ratios[s]));
    }
    let max_coarse = coarse_ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let max_fine = fine_ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let factor = max_fine / max_coarse;
    text.push_str(&format!("# max_ratio_coarse={max_coarse}\n"));
    text.push_str(&format!("# max_ratio_fine={max_fine}\n"));
    text.push_str(&format!("# refinement_factor={factor}\n"));
    let path = output::out_path(cfg, "hardy_sobolev.csv");
    output::write_file(&path, &text)?;
    println!(
        "max ratio {max_coarse:.6e} (coarse) vs {max_fine:.6e} (fine): refinement factor {factor:.4}"
    );
    Ok(())
}

/// Quotient samples for seeded random fields: fixed low-mode sine expansions
/// whose coefficients come from a generator reseeded per resolution, so the
/// run is reproducible and both grids sample the same functions.
fn embedding_ratios(
    grid: Grid2D,
    bundle: &ExponentBundle,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>, CliError> {
    const MODES: usize = 10;
    let phi1 = normalize_l2(&sine_mode_field(grid, 1, 1)?)?;
    let mut modes = Vec::with_capacity(MODES * MODES);
    for k in 1..=MODES {
        for l in 1..=MODES {
            modes.push(sine_mode_field(grid, k, l)?);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ratios = Vec::with_capacity(samples);
    for s in 0..samples {
        let mut u = Field::zeros(grid);
        for mode in &modes {
            let amp: f64 = rng.gen_range(-1.0..1.0);
            u = u.add_scaled(amp, mode)?;
        }
        let ratio = biharm_core::estimates::hardy_sobolev_ratio(&u, &phi1, bundle)?;
        if !ratio.is_finite() {
            return Err(CliError::Solver(format!(
                "embedding quotient diverged on sample {s}: {ratio}"
            )));
        }
        ratios.push(ratio);
    }
    Ok(ratios)
}
