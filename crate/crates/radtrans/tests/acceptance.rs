//! End-to-end acceptance suite.
//!
//! Each test covers one numbered acceptance criterion, prints exactly one
//! `acceptance NN <name>: PASS|FAIL (measured vs pinned tolerance)` line,
//! and then asserts. Tolerances are pinned here, not read from anywhere
//! else, so a regression always changes this file's output.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;
use std::time::Instant;

use radtrans::diagnostics::{
    dual_route_intensity, l2_relative_over, moment_quadrature, reference_problem,
};
use radtrans::diffusion::solve_diffusion;
use radtrans::output::write_csv;
use radtrans::solver::{solve, solve_bracketed};
use radtrans::spectral::{moment_coefficient, sigma};
use radtrans::transport::{mean_intensity_direct, ExitSurface};
use radtrans::{
    AnnulusDomain, BoundaryIllumination, CartesianGrid, DiffusionConfig, PolarField, PolarGrid,
    RayQuadrature, ScalarField, SolveMode, SpectralModel,
};

fn verdict(name: &str, pass: bool, detail: &str) -> bool {
    println!(
        "acceptance {name}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn rel(measured: f64, expected: f64) -> f64 {
    (measured - expected).abs() / expected.abs()
}

/// Criterion 01 — the four spectral moment coefficients agree with their
/// five-figure closed forms within 0.05%, and midpoint frequency quadrature
/// reproduces each within 0.1% at two temperatures.
#[test]
fn moments_match_closed_forms() {
    let clock = Instant::now();
    const CLOSED: [f64; 4] = [24.886, 122.081, 726.012, 5060.55];
    let mut worst_closed = 0.0_f64;
    for k in 1..=4_usize {
        worst_closed = worst_closed.max(rel(moment_coefficient(k).unwrap(), CLOSED[k - 1]));
    }
    let mut worst_quad = 0.0_f64;
    for &t in &[0.5_f64, 1.0] {
        for k in 1..=4_u32 {
            let q = moment_quadrature(k, t);
            worst_quad = worst_quad.max(rel(q, moment_coefficient(k as usize).unwrap()));
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    let pass = worst_closed <= 5e-4 && worst_quad <= 1e-3 && secs < 1.0;
    assert!(verdict(
        "01 spectral moment closed forms",
        pass,
        &format!(
            "closed-form rel {worst_closed:.2e} <= 5e-4, quadrature rel {worst_quad:.2e} <= 1e-3, \
             {secs:.2} s < 1 s"
        ),
    ));
}

/// Criterion 02 — frequency quadrature of the Planck function at T = 1
/// recovers the Stefan constant pi^4/15 within 1e-3 relative.
#[test]
fn stefan_boltzmann_recovered_by_quadrature() {
    let clock = Instant::now();
    let measured = moment_quadrature(0, 1.0);
    let expected = PI.powi(4) / 15.0;
    let r = rel(measured, expected);
    let secs = clock.elapsed().as_secs_f64();
    let pass = r <= 1e-3 && secs < 1.0;
    assert!(verdict(
        "02 Stefan-Boltzmann constant",
        pass,
        &format!("{measured:.6} vs {expected:.6}, rel {r:.2e} <= 1e-3, {secs:.2} s < 1 s"),
    ));
}

/// Criterion 03 — a constant source with matched boundary radiance is a
/// fixed point of the transport operator: the ray-quadrature mean intensity
/// returns the constant to 1e-10 at every annulus node of a 16x16 grid.
#[test]
fn constant_source_is_a_fixed_point_of_transport() {
    let clock = Instant::now();
    let grid = CartesianGrid::new(16, 1.0).unwrap();
    let domain = AnnulusDomain::new(0.4, 0.3).unwrap();
    let c = 0.7321_f64;
    let source = ScalarField::constant(grid, c);
    let quad = RayQuadrature::new(240, 0.005).unwrap();
    let boundary = |_p: [f64; 2], _s: ExitSurface| c;
    let j = mean_intensity_direct(&source, &domain, 0.5, &quad, &boundary).unwrap();
    let mut worst = 0.0_f64;
    let mut nodes = 0_usize;
    for ix in 0..grid.n() {
        for iy in 0..grid.n() {
            if domain.contains(grid.node(ix, iy)) {
                worst = worst.max((j.get(ix, iy) - c).abs());
                nodes += 1;
            }
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    let pass = nodes > 0 && worst <= 1e-10 && secs < 5.0;
    assert!(verdict(
        "03 constant-source ceiling",
        pass,
        &format!("worst |J - c| {worst:.2e} <= 1e-10 over {nodes} nodes, {secs:.2} s < 5 s"),
    ));
}

/// Criterion 04 — the padded-FFT convolution route and the direct ray
/// quadrature agree on the converged grey mean intensity within 5% relative
/// L2 over the annulus on a 32x32 reference run.
#[test]
fn fourier_and_ray_routes_agree() {
    let clock = Instant::now();
    let cfg = reference_problem(32, 1e-6).unwrap();
    let (j_conv, j_oracle) = dual_route_intensity(&cfg).unwrap();
    let l2 = l2_relative_over(&cfg.domain, &j_conv, &j_oracle);
    let secs = clock.elapsed().as_secs_f64();
    let pass = l2 <= 0.05 && secs < 60.0;
    assert!(verdict(
        "04 convolution vs ray-quadrature oracle",
        pass,
        &format!("relative L2 {l2:.4} <= 0.05, {secs:.1} s < 60 s"),
    ));
}

/// Criterion 05 — starting the grey iteration from T = 0 every sweep moves
/// nodes up, starting from T = T_max every sweep moves them down, and the
/// two ends finish within 10x the residual tolerance of each other.
#[test]
fn bracketing_is_monotone_and_tight() {
    let clock = Instant::now();
    let mut cfg = reference_problem(32, 1e-4).unwrap();
    cfg.max_iters = 150;
    let bracket = solve_bracketed(&cfg, SolveMode::Grey).unwrap();
    let up_ok = bracket.lower.report.stats.iter().all(|s| s.monotone_up);
    let down_ok = bracket.upper.report.stats.iter().all(|s| s.monotone_down);
    let converged = bracket.lower.report.converged && bracket.upper.report.converged;
    let gap_ok = bracket.max_gap <= 10.0 * cfg.tol;
    let secs = clock.elapsed().as_secs_f64();
    let pass = up_ok && down_ok && converged && gap_ok && secs < 120.0;
    assert!(verdict(
        "05 monotone bracketing",
        pass,
        &format!(
            "up {}/{} sweeps, down {}/{} sweeps, gap {:.2e} <= {:.0e}, {secs:.1} s < 120 s",
            bracket
                .lower
                .report
                .stats
                .iter()
                .filter(|s| s.monotone_up)
                .count(),
            bracket.lower.report.iterations(),
            bracket
                .upper
                .report
                .stats
                .iter()
                .filter(|s| s.monotone_down)
                .count(),
            bracket.upper.report.iterations(),
            bracket.max_gap,
            10.0 * cfg.tol,
        ),
    ));
}

/// Criterion 06 — every iterate of the bracketing runs keeps temperatures
/// inside [0, T_s] and mean intensities nonnegative, within 1e-9 slack.
#[test]
fn iterates_respect_the_maximum_principle() {
    let clock = Instant::now();
    let mut cfg = reference_problem(32, 1e-4).unwrap();
    cfg.max_iters = 150;
    let t_s = cfg.illumination.t_source().value();
    let bracket = solve_bracketed(&cfg, SolveMode::Grey).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let mut j_min_ok = true;
    for out in [&bracket.lower, &bracket.upper] {
        for s in &out.report.stats {
            worst = worst.max(-s.t_min).max(s.t_max - t_s).max(s.max_clamp_violation);
            j_min_ok &= s.j_max >= 0.0;
        }
    }
    let secs = clock.elapsed().as_secs_f64();
    let pass = worst <= 1e-9 && j_min_ok && secs < 120.0;
    assert!(verdict(
        "06 maximum principle",
        pass,
        &format!("worst bound violation {worst:.2e} <= 1e-9, J >= 0 {j_min_ok}, {secs:.1} s"),
    ));
}

/// Criterion 07 — doubling the illumination factor produces a converged
/// temperature field that dominates the original nodewise (within 1e-12).
#[test]
fn stronger_illumination_keeps_ordering() {
    let clock = Instant::now();
    let base = reference_problem(32, 1e-6).unwrap();
    let mut doubled = base.clone();
    doubled.illumination = BoundaryIllumination::new(
        2.0 * base.illumination.q0(),
        base.illumination.t_source(),
    )
    .unwrap();
    let a = solve(&base, SolveMode::Grey, None).unwrap();
    let b = solve(&doubled, SolveMode::Grey, None).unwrap();
    let mut worst = f64::NEG_INFINITY;
    let n = base.grid.n();
    for ix in 0..n {
        for iy in 0..n {
            worst = worst.max(a.temperature.get(ix, iy) - b.temperature.get(ix, iy));
        }
    }
    let converged = a.report.converged && b.report.converged;
    let secs = clock.elapsed().as_secs_f64();
    let pass = worst <= 1e-12 && converged && secs < 120.0;
    assert!(verdict(
        "07 comparison monotonicity",
        pass,
        &format!("worst T - T' {worst:.2e} <= 1e-12, converged {converged}, {secs:.1} s < 120 s"),
    ));
}

/// Criterion 08 — the 64x64 grey reference run converges to residual 1e-4
/// within ten sweeps, none of which takes longer than ten seconds.
#[test]
fn reference_run_converges_quickly() {
    let clock = Instant::now();
    let cfg = reference_problem(64, 1e-4).unwrap();
    let out = solve(&cfg, SolveMode::Grey, None).unwrap();
    let iters = out.report.iterations();
    let worst_ms = out
        .report
        .stats
        .iter()
        .map(|s| s.wall_ms)
        .fold(0.0_f64, f64::max);
    let secs = clock.elapsed().as_secs_f64();
    let pass = out.report.converged && iters <= 10 && worst_ms <= 10_000.0;
    assert!(verdict(
        "08 convergence speed",
        pass,
        &format!(
            "converged {} in {iters} sweeps (<= 10), slowest sweep {worst_ms:.0} ms <= 10000 ms, \
             total {secs:.1} s",
            out.report.converged,
        ),
    ));
}

/// Manufactured heat solution used by criterion 09; see the module tests in
/// `diffusion.rs` for the amplitude rationale (forcing positivity and the
/// contraction range of the lagged linearization).
fn mms_temperature(r: f64, theta: f64) -> f64 {
    let (t_e, a, rr, h) = (0.06, 1.0e-5, 0.4, 0.3);
    let k = PI / h;
    t_e + 0.5 * a * (1.0 - (k * (r - rr)).cos()) * (1.0 + 0.3 * theta.cos())
}

fn mms_forcing(r: f64, theta: f64, kappa_t: f64) -> f64 {
    let (a, rr, h) = (1.0e-5, 0.4, 0.3);
    let k = PI / h;
    let g = 1.0 + 0.3 * theta.cos();
    let rho = r - rr;
    let radial = 0.5 * a * g * (k * k * (k * rho).cos() + k / r * (k * rho).sin());
    let angular = -(0.3 * theta.cos()) * 0.5 * a * (1.0 - (k * rho).cos()) / (r * r);
    let t = mms_temperature(r, theta);
    -kappa_t * (radial + angular) + sigma() * t.powi(4)
}

/// Criterion 09 — the heat solver reproduces a constant solution to 1e-10,
/// converges at second order under mesh halving on a smooth manufactured
/// solution, and reduces to the algebraic quarter-power balance as the
/// conductivity vanishes.
#[test]
fn heat_solver_is_second_order_accurate() {
    let clock = Instant::now();
    let kappa_t = 0.01 * sigma();
    let t_e = 0.06_f64;

    let grid = PolarGrid::new(33, 96, 0.4, 0.7).unwrap();
    let config = DiffusionConfig::new(kappa_t, t_e).unwrap();
    let j_const = PolarField::constant(grid, sigma() * t_e.powi(4));
    let (t_const, _) = solve_diffusion(&grid, &config, &j_const, None).unwrap();
    let exact_const = PolarField::constant(grid, t_e);
    let const_err = t_const.max_abs_diff(&exact_const);

    let mut errors = Vec::new();
    for (n_r, n_th) in [(17, 48), (33, 96), (65, 192)] {
        let grid = PolarGrid::new(n_r, n_th, 0.4, 0.7).unwrap();
        let config = DiffusionConfig::new(kappa_t, t_e)
            .unwrap()
            .with_picard_tol(1e-12)
            .unwrap();
        let j = PolarField::from_fn(grid, |r, th| mms_forcing(r, th, kappa_t));
        let (t, _) = solve_diffusion(&grid, &config, &j, None).unwrap();
        let exact = PolarField::from_fn(grid, mms_temperature);
        errors.push(t.max_abs_diff(&exact));
    }
    let ratios: Vec<f64> = errors.windows(2).map(|p| p[0] / p[1]).collect();
    let order_ok = ratios.iter().all(|r| (2.5..6.0).contains(r));

    let config0 = DiffusionConfig::new(0.0, t_e).unwrap();
    let j_any = PolarField::from_fn(grid, |r, th| 0.3 + 0.2 * (r * th.cos()).abs());
    let (t0, _) = solve_diffusion(&grid, &config0, &j_any, None).unwrap();
    let mut limit_err = 0.0_f64;
    for i in 0..grid.n_r() {
        for j in 0..grid.n_theta() {
            let want = (j_any.get(i, j) / sigma()).powf(0.25);
            limit_err = limit_err.max((t0.get(i, j) - want).abs());
        }
    }

    let secs = clock.elapsed().as_secs_f64();
    let pass = const_err <= 1e-10 && order_ok && limit_err <= 1e-6 && secs < 60.0;
    assert!(verdict(
        "09 diffusion correctness",
        pass,
        &format!(
            "constant err {const_err:.2e} <= 1e-10, halving ratios {ratios:?} in (2.5, 6.0), \
             zero-conductivity err {limit_err:.2e} <= 1e-6, {secs:.1} s < 60 s"
        ),
    ));
}

/// Criterion 10 — qualitative field structure: the grey run is hotter on
/// the illuminated (+x) side than opposite it, the two sloped-absorption
/// runs produce distinct temperature fields, and all three fields are
/// archived as CSV for regression comparison.
#[test]
fn figure_analogues_and_archival() {
    let clock = Instant::now();
    let cfg = reference_problem(32, 1e-4).unwrap();
    let grey = solve(&cfg, SolveMode::Grey, None).unwrap();
    let day = grey.temperature.interp_bilinear([0.55, 0.0]);
    let night = grey.temperature.interp_bilinear([-0.55, 0.0]);

    let mut plus_cfg = reference_problem(16, 1e-4).unwrap();
    plus_cfg.model = SpectralModel::new(&[0.5, 0.03], 0.0, 0.01, 15.0, 100).unwrap();
    let mut minus_cfg = plus_cfg.clone();
    minus_cfg.model = SpectralModel::new(&[0.5, -0.03], 0.0, 0.01, 15.0, 100).unwrap();
    let plus = solve(&plus_cfg, SolveMode::Spectral, None).unwrap();
    let minus = solve(&minus_cfg, SolveMode::Spectral, None).unwrap();
    let distinct = plus.temperature.max_abs_diff(&minus.temperature);

    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance_fields");
    fs::create_dir_all(&dir).unwrap();
    write_csv(&grey.temperature, dir.join("grey_temperature.csv")).unwrap();
    write_csv(&plus.temperature, dir.join("rising_absorption_temperature.csv")).unwrap();
    write_csv(&minus.temperature, dir.join("falling_absorption_temperature.csv")).unwrap();

    let converged = grey.report.converged && plus.report.converged && minus.report.converged;
    let secs = clock.elapsed().as_secs_f64();
    let pass = day > night * (1.0 + 1e-3) && distinct > 1e-6 && converged && secs < 120.0;
    assert!(verdict(
        "10 figure analogues",
        pass,
        &format!(
            "day {day:.4} > night {night:.4}, slope split {distinct:.2e} > 1e-6, converged \
             {converged}, fields archived to {}, {secs:.1} s",
            dir.display(),
        ),
    ));
}
