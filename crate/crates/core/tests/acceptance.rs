//! Acceptance gate: nine end-to-end checks of the discrete laboratory, one
//! test per criterion, each printing a single PASS/FAIL verdict line.
//!
//! Every tolerance is pinned as a named constant next to the criteria that
//! use it. The shared 31² fixture (assembled problem, continuation run, and
//! direct solve) is built once and reused where several criteria inspect the
//! same solution.

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use biharm_core::eigen::{check_weight_monotonicity, smallest_eigenpairs, weighted_eigenvalues};
use biharm_core::estimates::{
    check_hypotheses, exponent_bundle, resonance_identity_residual, ProblemSpec,
};
use biharm_core::solver::{
    homotopy_path, linearization, newton_solve, reference_forcing, residual, ContinuationTrace,
    Solution,
};
use biharm_core::{
    biharmonic_matrix, build_grid, laplacian_matrix, lp_norm, normalize_l2, sine_mode_field,
    Field, Grid2D,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// Problem family shared by the solution-based checks.
const N_DIM: u32 = 6;
const P_EXPONENT: f64 = 2.1;
const R_EXPONENT: f64 = 2.5;
const TARGET_C: f64 = 0.05;

// Fixture solves on the 31² grid.
const FIXTURE_EIG_TOL: f64 = 1e-11;
const NEWTON_TOL: f64 = 2e-9;
const T_REF: f64 = 0.3;
const HOMOTOPY_STEPS: usize = 8;

// Criterion 1: spectral squaring.
const LAPLACE_EIG_TOL: f64 = 1e-10;
const BIHARMONIC_EIG_TOL: f64 = 5e-9;
const SQUARING_REL_TOL: f64 = 1e-9;
const STENCIL_REL_TOL: f64 = 1e-8;
const RATIO_LO: f64 = 3.2;
const RATIO_HI: f64 = 4.8;

// Criterion 2: exponent bundle.
const IDENTITY_ABS_TOL: f64 = 1e-12;
const SPOT_REL_TOL: f64 = 1e-5;
const SPOT_ALPHA: f64 = 0.844923;
const SPOT_TAU: f64 = 0.637363;
const SPOT_T: f64 = 8.548496;

// Criterion 3: resonance identity.
const RESONANCE_FACTOR: f64 = 10.0;
const MANUFACTURED_TOL: f64 = 1e-8;

// Criterion 4: known-solution homotopy.
const REFERENCE_RESIDUAL_BOUND: f64 = 1e-8;
const ENDPOINT_RESIDUAL_BOUND: f64 = 1e-8;
const ENDPOINT_AGREEMENT_SUP: f64 = 1e-10;

// Criterion 5: index certificate.
const DEGENERATE_MU_TOL: f64 = 1e-8;
const CONTROL_EIG_TOL: f64 = 1e-9;

// Criterion 6: weight monotonicity.
const MONOTONICITY_EIG_TOL: f64 = 1e-10;
const HALVING_REL_TOL: f64 = 1e-10;
const WEIGHT_SEED: u64 = 0x77ab_01;

// Criterion 7: a-priori envelope.
const SWEEP_C: [f64; 4] = [0.001, 0.01, 0.05, 0.1];
const ENVELOPE_FACTOR: f64 = 10.0;

// Criterion 8: weighted embedding bound.
const SAMPLE_COUNT: usize = 50;
const MODE_CUTOFF: usize = 10;
const REFINEMENT_FACTOR: f64 = 2.0;
const FIELD_SEED: u64 = 0x88ab_02;

// Criterion 9: Jacobian check.
const FD_EPS: f64 = 1e-5;
const MASK_THRESHOLD: f64 = 1e-3;
const JACOBIAN_REL_TOL: f64 = 1e-3;
const JACOBIAN_SEED: u64 = 0x99ab_03;

struct Fixture {
    spec: ProblemSpec,
    endpoint: Solution,
    trace: ContinuationTrace,
    direct: Solution,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(|| {
        let grid = build_grid(1.0, 1.0, 31, 31).expect("31² grid");
        let spec =
            ProblemSpec::assemble_with(N_DIM, P_EXPONENT, R_EXPONENT, grid, FIXTURE_EIG_TOL, |phi| {
                Ok(phi.pos_part_pow(P_EXPONENT).scaled(-TARGET_C))
            })
            .expect("assemble the 31² problem");
        let (endpoint, trace) =
            homotopy_path(&spec, T_REF, HOMOTOPY_STEPS, NEWTON_TOL).expect("continuation run");
        let start = spec.phi1.scaled(T_REF);
        let direct = newton_solve(&start, &spec, NEWTON_TOL, 30).expect("direct solve");
        Fixture {
            spec,
            endpoint,
            trace,
            direct,
        }
    })
}

fn verdict(number: usize, name: &str, pass: bool, elapsed: Duration, detail: &str) {
    let word = if pass { "PASS" } else { "FAIL" };
    println!("ACCEPTANCE {number} {name}: {word} [{elapsed:.1?}] {detail}");
    assert!(pass, "ACCEPTANCE {number} {name}: FAIL {detail}");
}

fn sup_difference(a: &Field, b: &Field) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Strictly positive random weight: a constant base plus a few low sine
/// modes whose total amplitude stays well below the base.
fn random_positive_weight(grid: Grid2D, rng: &mut ChaCha8Rng) -> Field {
    let base: f64 = rng.gen_range(200.0..400.0);
    let mut m = Field::constant(grid, base);
    for _ in 0..3 {
        let k = rng.gen_range(1..4usize);
        let l = rng.gen_range(1..4usize);
        let amp = rng.gen_range(-0.2..0.2) * base;
        let mode = sine_mode_field(grid, k, l).expect("sine mode");
        m = m.add_scaled(amp, &mode).expect("same grid");
    }
    m
}

/// Random smooth field: a handful of low sine modes, mixed signs.
fn random_smooth_field(grid: Grid2D, rng: &mut ChaCha8Rng, amplitude: f64) -> Field {
    let mut u = Field::zeros(grid);
    for _ in 0..4 {
        let k = rng.gen_range(1..5usize);
        let l = rng.gen_range(1..5usize);
        let amp = rng.gen_range(-amplitude..amplitude);
        let mode = sine_mode_field(grid, k, l).expect("sine mode");
        u = u.add_scaled(amp, &mode).expect("same grid");
    }
    u
}

#[test]
fn acceptance_1_spectral_squaring() {
    let t0 = Instant::now();
    let mut pass = true;
    let mut worst_square_rel = 0.0_f64;
    let mut worst_stencil_rel = 0.0_f64;
    let mut lambda1_errors = Vec::new();

    for n in [15usize, 31, 63] {
        let grid = build_grid(1.0, 1.0, n, n).unwrap();
        let h = grid.hx();
        let l = laplacian_matrix(grid);
        let laplace = smallest_eigenpairs(&l, grid, 3, LAPLACE_EIG_TOL).unwrap();
        lambda1_errors.push((2.0 * PI * PI - laplace[0].value).abs());
        if n == 15 {
            continue; // only part of the mesh-doubling sequence
        }

        let closed_form = (8.0 / (h * h)) * (PI * h / 2.0).sin().powi(2);
        let stencil_rel = (laplace[0].value - closed_form).abs() / closed_form;
        worst_stencil_rel = worst_stencil_rel.max(stencil_rel);
        pass &= stencil_rel < STENCIL_REL_TOL;

        let b = biharmonic_matrix(grid);
        let biharm = smallest_eigenpairs(&b, grid, 3, BIHARMONIC_EIG_TOL).unwrap();
        for j in 0..3 {
            let square = laplace[j].value * laplace[j].value;
            let rel = (biharm[j].value - square).abs() / square;
            worst_square_rel = worst_square_rel.max(rel);
            pass &= rel < SQUARING_REL_TOL;
        }
    }

    let ratio_a = lambda1_errors[0] / lambda1_errors[1];
    let ratio_b = lambda1_errors[1] / lambda1_errors[2];
    pass &= (RATIO_LO..=RATIO_HI).contains(&ratio_a);
    pass &= (RATIO_LO..=RATIO_HI).contains(&ratio_b);
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(30);

    verdict(
        1,
        "spectral squaring",
        pass,
        elapsed,
        &format!(
            "worst squaring rel {worst_square_rel:.2e}, worst stencil rel {worst_stencil_rel:.2e}, \
             doubling ratios {ratio_a:.3}/{ratio_b:.3}"
        ),
    );
}

#[test]
fn acceptance_2_exponent_bundle() {
    let t0 = Instant::now();
    let mut pass = true;
    let mut worst_identity = 0.0_f64;

    for n_dim in 6u32..=12 {
        let window = check_hypotheses(n_dim, 2.0, n_dim as f64).p_window;
        let r = n_dim as f64 / 2.0;
        for i in 0..20 {
            let p = window.0 + (i as f64 + 0.5) / 20.0 * (window.1 - window.0);
            let b = exponent_bundle(n_dim, p, r).unwrap();
            pass &= b.alpha > 0.0 && b.alpha < 1.0;
            pass &= (0.0..=1.0).contains(&b.tau);
            pass &= b.theta > 1.0;
            let id_t = (1.0 / b.t - (1.0 / b.s - (4.0 - b.tau) / n_dim as f64)).abs();
            let id_tau = (b.tau * b.t - b.alpha / (1.0 - b.alpha)).abs();
            worst_identity = worst_identity.max(id_t).max(id_tau);
        }
    }
    pass &= worst_identity < IDENTITY_ABS_TOL;

    let spot = exponent_bundle(6, 2.1, 2.5).unwrap();
    let mut worst_spot = 0.0_f64;
    for (computed, quoted) in [(spot.alpha, SPOT_ALPHA), (spot.tau, SPOT_TAU), (spot.t, SPOT_T)] {
        worst_spot = worst_spot.max(((computed - quoted) / quoted).abs());
    }
    pass &= worst_spot < SPOT_REL_TOL;
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(1);

    verdict(
        2,
        "exponent bundle",
        pass,
        elapsed,
        &format!("worst identity defect {worst_identity:.2e}, worst spot rel {worst_spot:.2e}"),
    );
}

#[test]
fn acceptance_3_resonance_identity() {
    let t0 = Instant::now();
    let fx = fixture();
    let mut pass = true;

    let bound = RESONANCE_FACTOR * NEWTON_TOL;
    let endpoint_defect = fx.spec.resonance_residual(&fx.endpoint.u).unwrap();
    let direct_defect = fx.spec.resonance_residual(&fx.direct.u).unwrap();
    pass &= endpoint_defect < bound && direct_defect < bound;

    // Manufactured pair on the 63² grid: u is the closed-form ground state,
    // f cancels the nonlinearity exactly, so the pairing must vanish.
    let grid = build_grid(1.0, 1.0, 63, 63).unwrap();
    let phi = normalize_l2(&sine_mode_field(grid, 1, 1).unwrap()).unwrap();
    let f = phi.pos_part_pow(P_EXPONENT).scaled(-1.0);
    let manufactured = resonance_identity_residual(&phi, &f, &phi, P_EXPONENT).unwrap();
    pass &= manufactured < MANUFACTURED_TOL;
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(60);

    verdict(
        3,
        "resonance identity",
        pass,
        elapsed,
        &format!(
            "solution defects {endpoint_defect:.2e}/{direct_defect:.2e} (bound {bound:.1e}), \
             manufactured {manufactured:.2e}"
        ),
    );
}

#[test]
fn acceptance_4_known_solution_homotopy() {
    let t0 = Instant::now();
    let fx = fixture();
    let mut pass = true;

    let f_ref = reference_forcing(T_REF, &fx.spec.phi1, fx.spec.p).unwrap();
    let spec_ref = fx.spec.with_forcing(f_ref).unwrap();
    let u_ref = fx.spec.phi1.scaled(T_REF);
    let reference_residual = lp_norm(&residual(&u_ref, &spec_ref).unwrap(), 2.0).unwrap();
    pass &= reference_residual < REFERENCE_RESIDUAL_BOUND;

    let reached = fx.trace.completed && fx.trace.records.last().unwrap().tau == 0.0;
    pass &= reached;
    pass &= fx.endpoint.residual_norm < ENDPOINT_RESIDUAL_BOUND;

    let agreement = sup_difference(&fx.endpoint.u, &fx.direct.u);
    pass &= agreement < ENDPOINT_AGREEMENT_SUP;
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(300);

    verdict(
        4,
        "known-solution homotopy",
        pass,
        elapsed,
        &format!(
            "reference residual {reference_residual:.2e}, endpoint residual {:.2e}, \
             τ reached 0: {reached}, endpoint sup agreement {agreement:.2e}",
            fx.endpoint.residual_norm
        ),
    );
}

#[test]
fn acceptance_5_index_certificate() {
    let t0 = Instant::now();
    let fx = fixture();
    let mut pass = true;

    let cert = fx
        .endpoint
        .index_certificate
        .as_ref()
        .expect("certificate attached at the end of continuation");
    let radius = fx.spec.nondegeneracy_radius().unwrap();
    let sup = fx.endpoint.u.sup_norm();
    pass &= sup < radius;
    pass &= cert.mu1 < 1.0 - DEGENERATE_MU_TOL;
    pass &= cert.mu2 > 1.0 + DEGENERATE_MU_TOL;
    pass &= cert.nondegenerate && cert.index == 1;

    let grid = fx.spec.grid;
    let b = &fx.spec.biharmonic;
    let low = weighted_eigenvalues(b, &Field::constant(grid, fx.spec.lambda1_sq), 1, CONTROL_EIG_TOL)
        .unwrap();
    let high =
        weighted_eigenvalues(b, &Field::constant(grid, fx.spec.lambda2_sq), 2, CONTROL_EIG_TOL)
            .unwrap();
    let low_defect = (low.values[0] - 1.0).abs();
    let high_defect = (high.values[1] - 1.0).abs();
    pass &= low_defect < DEGENERATE_MU_TOL && high_defect < DEGENERATE_MU_TOL;
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(120);

    verdict(
        5,
        "index certificate",
        pass,
        elapsed,
        &format!(
            "μ₁ {:.6}, μ₂ {:.6}, sup {sup:.3} < radius {radius:.1}, \
             degenerate controls off by {low_defect:.1e}/{high_defect:.1e}",
            cert.mu1, cert.mu2
        ),
    );
}

#[test]
fn acceptance_6_weight_monotonicity() {
    let t0 = Instant::now();
    let grid = build_grid(1.0, 1.0, 17, 17).unwrap();
    let b = biharmonic_matrix(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(WEIGHT_SEED);
    let mut pass = true;
    let mut smallest_gap = f64::INFINITY;

    for _ in 0..10 {
        let m = random_positive_weight(grid, &mut rng);
        let bump = random_positive_weight(grid, &mut rng);
        let m_tilde = m.add_scaled(0.1, &bump).unwrap();
        let report = check_weight_monotonicity(&b, &m, &m_tilde, 3, MONOTONICITY_EIG_TOL).unwrap();
        pass &= report.all_strict;
        for gap in report.gaps {
            smallest_gap = smallest_gap.min(gap);
        }
    }

    let m = random_positive_weight(grid, &mut rng);
    let doubled = m.scaled(2.0);
    let single = weighted_eigenvalues(&b, &m, 3, MONOTONICITY_EIG_TOL).unwrap();
    let halved = weighted_eigenvalues(&b, &doubled, 3, MONOTONICITY_EIG_TOL).unwrap();
    let mut worst_halving = 0.0_f64;
    for j in 0..3 {
        let rel = ((2.0 * halved.values[j] - single.values[j]) / single.values[j]).abs();
        worst_halving = worst_halving.max(rel);
    }
    pass &= worst_halving < HALVING_REL_TOL;
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(120);

    verdict(
        6,
        "weight monotonicity",
        pass,
        elapsed,
        &format!("smallest strict gap {smallest_gap:.3e}, worst halving rel {worst_halving:.2e}"),
    );
}

#[test]
fn acceptance_7_apriori_envelope() {
    let t0 = Instant::now();
    let fx = fixture();
    let mut pass = true;

    let mut rows = Vec::new();
    for &c in &SWEEP_C {
        let f = fx.spec.phi1.pos_part_pow(fx.spec.p).scaled(-c);
        let spec_c = fx.spec.with_forcing(f).unwrap();
        let t_exact = c.powf(1.0 / fx.spec.p);
        let start = fx.spec.phi1.scaled(0.8 * t_exact);
        let sol = newton_solve(&start, &spec_c, NEWTON_TOL, 30).unwrap();
        let forcing_norm = lp_norm(&spec_c.f, spec_c.r).unwrap();
        rows.push((forcing_norm, sol.u.sup_norm(), t_exact));
    }

    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let nondecreasing = rows.windows(2).all(|w| w[1].1 >= w[0].1);
    pass &= nondecreasing;

    let (smallest_f, smallest_sup, smallest_t) = rows[0];
    let predicted = smallest_t * fx.spec.phi1.sup_norm();
    pass &= smallest_sup < ENVELOPE_FACTOR * predicted;
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(600);

    verdict(
        7,
        "a-priori envelope",
        pass,
        elapsed,
        &format!(
            "sup norms {:?} nondecreasing: {nondecreasing}, smallest row ‖f‖ {smallest_f:.3e} → \
             sup {smallest_sup:.3e} vs predicted {predicted:.3e}",
            rows.iter().map(|r| r.1).collect::<Vec<_>>()
        ),
    );
}

#[test]
fn acceptance_8_weighted_embedding_bound() {
    let t0 = Instant::now();
    let bundle = exponent_bundle(N_DIM, P_EXPONENT, R_EXPONENT).unwrap();
    let mut pass = true;
    let mut maxima = Vec::new();

    for n in [31usize, 63] {
        let grid = build_grid(1.0, 1.0, n, n).unwrap();
        let phi = normalize_l2(&sine_mode_field(grid, 1, 1).unwrap()).unwrap();
        let mut modes = Vec::with_capacity(MODE_CUTOFF * MODE_CUTOFF);
        for k in 1..=MODE_CUTOFF {
            for l in 1..=MODE_CUTOFF {
                modes.push(sine_mode_field(grid, k, l).unwrap());
            }
        }
        // Identical coefficient draws on both grids: the samples are the
        // same continuum fields evaluated at two resolutions.
        let mut rng = ChaCha8Rng::seed_from_u64(FIELD_SEED);
        let mut max_ratio = 0.0_f64;
        for _ in 0..SAMPLE_COUNT {
            let mut u = Field::zeros(grid);
            for mode in &modes {
                u = u.add_scaled(rng.gen_range(-1.0..1.0), mode).unwrap();
            }
            let ratio = biharm_core::estimates::hardy_sobolev_ratio(&u, &phi, &bundle).unwrap();
            pass &= ratio.is_finite() && ratio > 0.0;
            max_ratio = max_ratio.max(ratio);
        }
        maxima.push(max_ratio);
    }

    let factor = maxima[1] / maxima[0];
    pass &= factor < REFINEMENT_FACTOR && factor > 1.0 / REFINEMENT_FACTOR;
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(300);

    verdict(
        8,
        "weighted embedding bound",
        pass,
        elapsed,
        &format!(
            "max ratios {:.3e}/{:.3e}, refinement factor {factor:.4}",
            maxima[0], maxima[1]
        ),
    );
}

#[test]
fn acceptance_9_jacobian_check() {
    let t0 = Instant::now();
    let grid = build_grid(1.0, 1.0, 17, 17).unwrap();
    let spec = ProblemSpec::assemble_with(N_DIM, P_EXPONENT, R_EXPONENT, grid, 1e-9, |phi| {
        Ok(phi.pos_part_pow(P_EXPONENT).scaled(-TARGET_C))
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(JACOBIAN_SEED);
    let mut pass = true;
    let mut worst_rel = 0.0_f64;

    for _ in 0..10 {
        let u = random_smooth_field(grid, &mut rng, 0.5);
        let w = random_smooth_field(grid, &mut rng, 1.0);
        let j = linearization(&u, &spec).unwrap();
        let jw = j.apply(w.values());

        let plus = residual(&u.add_scaled(FD_EPS, &w).unwrap(), &spec).unwrap();
        let minus = residual(&u.add_scaled(-FD_EPS, &w).unwrap(), &spec).unwrap();

        // Scale for the comparison: the largest derivative value over the
        // masked nodes, so the relative error is meaningful where the
        // derivative itself is not vanishing.
        let mask: Vec<usize> = u
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v.abs() > MASK_THRESHOLD)
            .map(|(i, _)| i)
            .collect();
        assert!(!mask.is_empty(), "degenerate sample: empty mask");
        let scale = mask
            .iter()
            .map(|&i| jw[i].abs())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        for &i in &mask {
            let fd = (plus.values()[i] - minus.values()[i]) / (2.0 * FD_EPS);
            worst_rel = worst_rel.max((fd - jw[i]).abs() / scale);
        }
    }
    pass &= worst_rel < JACOBIAN_REL_TOL;
    let elapsed = t0.elapsed();
    pass &= elapsed < Duration::from_secs(60);

    verdict(
        9,
        "jacobian check",
        pass,
        elapsed,
        &format!("worst masked relative error {worst_rel:.2e} over 10 samples"),
    );
}
