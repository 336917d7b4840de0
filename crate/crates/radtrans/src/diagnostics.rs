//! Self-check suite and the convolution-vs-ray-quadrature benchmark backing
//! the `check` and `bench` subcommands.

use crate::field::{CartesianGrid, FieldError, ScalarField};
use crate::geometry::{
    boundary_source_grey_field, AnnulusDomain, BoundaryIllumination,
};
use crate::kernel::{
    direct_convolve, kernel_node_value, ConvolutionMode, Convolver, KernelDim, KernelError,
    KernelSpec,
};
use crate::solver::{solve, solve_bracketed, ProblemConfig, SolveMode, SolverError};
use crate::spectral::{
    moment_coefficient, planck_raw, sigma, RescaledTemperature, SpectralError, SpectralModel,
};
use crate::transport::{
    mean_intensity_direct, planet_emission_boundary, RayQuadrature, TransportError,
};
use std::time::Instant;
use thiserror::Error;

/// Internal failures while running diagnostics (a failing *check* is not an
/// error; it comes back as `pass = false`).
#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// One invariant check: a measured quantity against its expectation.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub measured: f64,
    pub expected: f64,
    pub pass: bool,
}

fn fmt_quantity(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else if v.abs() >= 1e-3 && v.abs() < 1e4 {
        format!("{v:.5}")
    } else {
        format!("{v:.3e}")
    }
}

impl CheckResult {
    /// `name: measured vs expected OK|FAIL`.
    pub fn line(&self) -> String {
        format!(
            "{}: {} vs {} {}",
            self.name,
            fmt_quantity(self.measured),
            fmt_quantity(self.expected),
            if self.pass { "OK" } else { "FAIL" }
        )
    }
}

fn relative_check(name: &'static str, measured: f64, expected: f64, rel_tol: f64) -> CheckResult {
    let pass = (measured - expected).abs() <= rel_tol * expected.abs();
    CheckResult {
        name,
        measured,
        expected,
        pass,
    }
}

fn bound_check(name: &'static str, measured: f64, bound: f64) -> CheckResult {
    CheckResult {
        name,
        measured,
        expected: bound,
        pass: measured <= bound,
    }
}

/// Midpoint frequency quadrature of `nu^k B_nu(t) / t^(k+4)` over a window
/// wide enough to capture the whole spectrum at temperature `t`.
pub fn moment_quadrature(k: u32, t: f64) -> f64 {
    let n_nu = 2000;
    let nu_min = 1e-4;
    let nu_max = 80.0 * t;
    let d_nu = (nu_max - nu_min) / n_nu as f64;
    let mut acc = 0.0;
    for i in 0..n_nu {
        let nu = nu_min + (i as f64 + 0.5) * d_nu;
        acc += nu.powi(k as i32) * planck_raw(nu, t);
    }
    acc * d_nu / t.powi(k as i32 + 4)
}

/// Relative L² distance between two fields over the annulus nodes.
pub fn l2_relative_over(domain: &AnnulusDomain, a: &ScalarField, b: &ScalarField) -> f64 {
    let grid = a.grid();
    let n = grid.n();
    let mut num = 0.0;
    let mut den = 0.0;
    for ix in 0..n {
        for iy in 0..n {
            if domain.contains(grid.node(ix, iy)) {
                let d = a.get(ix, iy) - b.get(ix, iy);
                num += d * d;
                let r = b.get(ix, iy);
                den += r * r;
            }
        }
    }
    if den == 0.0 {
        if num == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (num / den).sqrt()
    }
}

/// The Earth-like reference configuration used by the diagnostics and the
/// acceptance suite: annulus `R = 0.4`, `H = 0.3`, grey absorption
/// `kappa = 0.5`, solar surface `T_s = 1.209` with visibility `Q0 = 5.74e-5`.
pub fn reference_problem(n: usize, tol: f64) -> Result<ProblemConfig, DiagnosticsError> {
    let grid = CartesianGrid::new(n, 1.0)?;
    let domain = AnnulusDomain::new(0.4, 0.3).expect("reference annulus is valid");
    let illumination =
        BoundaryIllumination::new(5.74e-5, RescaledTemperature::new(1.209).unwrap()).unwrap();
    let model = SpectralModel::grey(0.5)?;
    let mut cfg = ProblemConfig::new(grid, domain, illumination, model);
    cfg.tol = tol;
    Ok(cfg)
}

/// Computes the converged grey mean intensity twice — through the padded-FFT
/// convolution and through direct ray quadrature — and returns both fields.
pub fn dual_route_intensity(
    cfg: &ProblemConfig,
) -> Result<(ScalarField, ScalarField), DiagnosticsError> {
    let out = solve(cfg, SolveMode::Grey, None)?;
    let kappa = cfg.model.kappa(0.0);
    let s = sigma();
    let source = out.temperature.map(|tv| s * tv * tv * tv * tv);

    let se = boundary_source_grey_field(
        cfg.grid,
        &cfg.domain,
        &cfg.illumination,
        kappa,
        cfg.n_theta,
    );
    let spec = KernelSpec::new(kappa, KernelDim::Two, cfg.r_cut)?;
    let convolver = Convolver::new(cfg.grid, &spec, ConvolutionMode::Padded)?;
    let convolved = convolver.apply(&source)?;
    let domain = cfg.domain;
    let j_conv = ScalarField::par_from_fn(cfg.grid, |ix, iy, p| {
        if domain.contains(p) {
            (convolved.get(ix, iy) + se.get(ix, iy)).max(0.0)
        } else {
            0.0
        }
    });

    let quad = RayQuadrature::new(240, 0.005)?;
    let boundary = planet_emission_boundary(cfg.illumination);
    let j_oracle = mean_intensity_direct(&source, &cfg.domain, kappa, &quad, &boundary)?;
    Ok((j_conv, j_oracle))
}

/// Runs the invariant suite: spectral moments, the Stefan constant, kernel
/// mass stability, the kernel delta identity, agreement of the two
/// convolution routes, oracle equivalence on a 16×16 grid, the monotone
/// bracket, and the maximum principle.
pub fn run_checks() -> Result<Vec<CheckResult>, DiagnosticsError> {
    let mut results = Vec::new();

    // Spectral moments against the closed-form coefficients, at two
    // temperatures to exercise the scaling.
    for (k, name) in [
        (1_u32, "moment c1"),
        (2, "moment c2"),
        (3, "moment c3"),
        (4, "moment c4"),
    ] {
        let expected = moment_coefficient(k as usize)?;
        let measured = moment_quadrature(k, 1.0);
        let at_half = moment_quadrature(k, 0.5);
        let mut check = relative_check(name, measured, expected, 1e-3);
        check.pass = check.pass && (at_half - expected).abs() <= 1e-3 * expected;
        results.push(check);
    }

    // Stefan constant from the bundled default frequency window.
    let model = SpectralModel::grey(1.0)?;
    let quad_sigma: f64 = model
        .nu_nodes()
        .map(|nu| planck_raw(nu, 1.0))
        .sum::<f64>()
        * model.d_nu();
    results.push(relative_check(
        "sigma quadrature",
        quad_sigma,
        sigma(),
        1e-3,
    ));

    // Kernel mass at the reference resolution, frozen once and asserted
    // stable across runs and platforms.
    let grid64 = CartesianGrid::new(64, 1.0)?;
    let spec = KernelSpec::new(0.5, KernelDim::Two, 0.1)?;
    let convolver = Convolver::new(grid64, &spec, ConvolutionMode::Padded)?;
    results.push(relative_check(
        "kernel mass n=64",
        convolver.discrete_mass(),
        6.309_560_979_352_401e-1,
        1e-9,
    ));

    // Delta identity: convolving a unit impulse reproduces the sampled
    // kernel tableau.
    let grid16 = CartesianGrid::new(16, 1.0)?;
    let h = grid16.spacing();
    let mut delta = ScalarField::zeros(grid16);
    delta.set(8, 8, 1.0 / (h * h));
    let spec16 = KernelSpec::new(0.5, KernelDim::Two, 0.05)?;
    let conv16 = Convolver::new(grid16, &spec16, ConvolutionMode::Padded)?;
    let image = conv16.apply(&delta)?;
    let mut worst = 0.0_f64;
    for ix in 0..16 {
        for iy in 0..16 {
            let expected = kernel_node_value(ix as i64 - 8, iy as i64 - 8, &spec16, h);
            worst = worst.max((image.get(ix, iy) - expected).abs());
        }
    }
    let scale = kernel_node_value(1, 0, &spec16, h);
    results.push(bound_check("kernel delta identity", worst / scale, 1e-12));

    // FFT route against the O(n^4) direct sum on a smooth source.
    let source = ScalarField::from_fn(grid16, |[x, y]| {
        (1.0 - x * x).max(0.0) * (1.0 - y * y).max(0.0) * (1.0 + 0.5 * (3.0 * x + y).sin())
    });
    let via_fft = conv16.apply(&source)?;
    let via_direct = direct_convolve(&source, &spec16)?;
    let scale = via_direct.max_norm().max(f64::MIN_POSITIVE);
    results.push(bound_check(
        "fft vs direct",
        via_fft.max_abs_diff(&via_direct) / scale,
        1e-10,
    ));

    // Oracle equivalence: converged grey intensity through the convolution
    // and through direct ray quadrature, relative L² over the annulus.
    let cfg = reference_problem(16, 1e-5)?;
    let (j_conv, j_oracle) = dual_route_intensity(&cfg)?;
    results.push(bound_check(
        "oracle vs convolution L2",
        l2_relative_over(&cfg.domain, &j_conv, &j_oracle),
        0.05,
    ));

    // Monotone bracket and the maximum principle on the same pair of runs.
    let bracket = solve_bracketed(&cfg, SolveMode::Grey)?;
    let monotone_ok = bracket.lower.report.converged
        && bracket.upper.report.converged
        && bracket.lower.report.stats.iter().all(|s| s.monotone_up)
        && bracket.upper.report.stats.iter().all(|s| s.monotone_down);
    results.push(CheckResult {
        name: "bracket monotone+gap",
        measured: bracket.max_gap,
        expected: 10.0 * cfg.tol,
        pass: monotone_ok && bracket.max_gap <= 10.0 * cfg.tol,
    });

    let se_norm = bracket.lower.boundary_source.max_norm();
    let j_bound = sigma() * cfg.t_max.powi(4) + se_norm;
    let mut worst = 0.0_f64;
    for run in [&bracket.lower, &bracket.upper] {
        for s in &run.report.stats {
            worst = worst.max(-s.t_min);
            worst = worst.max(s.t_max - cfg.t_max);
            worst = worst.max(s.j_max - j_bound);
        }
    }
    results.push(bound_check("maximum principle", worst.max(0.0), 1e-9));

    Ok(results)
}

/// One row of the benchmark table.
#[derive(Debug, Clone, Copy)]
pub struct BenchRow {
    pub n: usize,
    /// One grey sweep through the cached-FFT convolution, milliseconds.
    pub conv_ms: f64,
    /// One grey sweep through direct ray quadrature, milliseconds.
    pub oracle_ms: f64,
    /// Relative L² distance between the two intensities.
    pub l2_rel_diff: f64,
}

impl BenchRow {
    pub fn speedup(&self) -> f64 {
        self.oracle_ms / self.conv_ms.max(1e-9)
    }
}

/// Times `f` averaged over enough repetitions to dominate timer noise.
fn time_ms(mut f: impl FnMut()) -> f64 {
    f(); // warm caches and FFT plans
    let probe = Instant::now();
    f();
    let once = probe.elapsed().as_secs_f64();
    let reps = (0.05 / once.max(1e-9)).ceil().clamp(1.0, 200.0) as usize;
    let clock = Instant::now();
    for _ in 0..reps {
        f();
    }
    clock.elapsed().as_secs_f64() * 1e3 / reps as f64
}

/// Times one grey sweep per grid size through both evaluation routes.
pub fn run_bench(sizes: &[usize]) -> Result<Vec<BenchRow>, DiagnosticsError> {
    let mut rows = Vec::new();
    for &n in sizes {
        let cfg = reference_problem(n, 1e-4)?;
        let kappa = cfg.model.kappa(0.0);
        let s = sigma();
        let domain = cfg.domain;
        let temperature =
            ScalarField::from_fn_where(cfg.grid, |p| domain.contains(p), |_| 0.5);
        let se = boundary_source_grey_field(
            cfg.grid,
            &cfg.domain,
            &cfg.illumination,
            kappa,
            cfg.n_theta,
        );
        let spec = KernelSpec::new(kappa, KernelDim::Two, cfg.r_cut)?;
        let convolver = Convolver::new(cfg.grid, &spec, ConvolutionMode::Padded)?;
        let quad = RayQuadrature::new(cfg.n_theta, cfg.grid.spacing() / 2.0)?;
        let boundary = planet_emission_boundary(cfg.illumination);

        let mut j_conv = ScalarField::zeros(cfg.grid);
        let conv_ms = time_ms(|| {
            let source = temperature.map(|tv| s * tv * tv * tv * tv);
            let convolved = convolver.apply(&source).expect("convolution failed");
            j_conv = ScalarField::par_from_fn(cfg.grid, |ix, iy, p| {
                if domain.contains(p) {
                    (convolved.get(ix, iy) + se.get(ix, iy)).max(0.0)
                } else {
                    0.0
                }
            });
            let _update = j_conv.map(|jv| (jv / s).powf(0.25));
        });

        let mut j_oracle = ScalarField::zeros(cfg.grid);
        let oracle_ms = time_ms(|| {
            let source = temperature.map(|tv| s * tv * tv * tv * tv);
            j_oracle = mean_intensity_direct(&source, &domain, kappa, &quad, &boundary)
                .expect("ray quadrature failed");
            let _update = j_oracle.map(|jv| (jv / s).powf(0.25));
        });

        rows.push(BenchRow {
            n,
            conv_ms,
            oracle_ms,
            l2_rel_diff: l2_relative_over(&domain, &j_conv, &j_oracle),
        });
    }
    Ok(rows)
}

/// Least-squares slope of `log(conv_ms)` against `log(n)`. `None` when
/// fewer than two distinct sizes were measured.
pub fn fit_exponent(rows: &[BenchRow]) -> Option<f64> {
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.conv_ms > 0.0)
        .map(|r| ((r.n as f64).ln(), r.conv_ms.ln()))
        .collect();
    if points.len() < 2 || points.windows(2).all(|w| w[0].0 == w[1].0) {
        return None;
    }
    let count = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / count;
    let num: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let den: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    Some(num / den)
}

/// Scaling verdict for the FFT route: near O(n² log n) shows up as a
/// log-log slope in this window.
pub const FIT_EXPONENT_RANGE: (f64, f64) = (1.8, 2.6);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_suite_passes() {
        let results = run_checks().unwrap();
        assert!(results.len() >= 9);
        for r in &results {
            assert!(r.pass, "check failed: {}", r.line());
        }
    }

    #[test]
    fn check_lines_are_printable() {
        let r = CheckResult {
            name: "moment c1",
            measured: 24.886_266,
            expected: 24.886_266_123_440_878,
            pass: true,
        };
        let line = r.line();
        assert!(line.starts_with("moment c1: 24.88627 vs 24.88627 OK"), "{line}");
        let r = CheckResult {
            name: "fft vs direct",
            measured: 3.2e-13,
            expected: 1e-10,
            pass: true,
        };
        assert_eq!(r.line(), "fft vs direct: 3.200e-13 vs 1.000e-10 OK");
    }

    #[test]
    fn bench_rows_and_fit() {
        let rows = run_bench(&[16, 24]).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert!(row.conv_ms > 0.0);
            assert!(row.oracle_ms > 0.0);
            assert!(row.l2_rel_diff.is_finite());
            assert!(row.l2_rel_diff < 0.2, "routes far apart: {}", row.l2_rel_diff);
        }
        assert!(fit_exponent(&rows).is_some());
        assert!(fit_exponent(&rows[..1]).is_none());
        assert!(fit_exponent(&[]).is_none());
    }

    #[test]
    fn moment_quadrature_is_temperature_invariant() {
        for k in 1..=4 {
            let a = moment_quadrature(k, 1.0);
            let b = moment_quadrature(k, 0.5);
            assert!((a - b).abs() <= 1e-6 * a, "k={k}: {a} vs {b}");
        }
    }
}
