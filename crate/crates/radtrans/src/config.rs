//! Flat `key = value` run configuration.
//!
//! The format is deliberately minimal: one assignment per line, `#` starts a
//! comment, keys are case-sensitive, unknown or repeated keys are rejected
//! with the offending key and line named. [`RunConfig::build`] turns the
//! parsed document into a validated [`ProblemConfig`] plus the optional
//! diffusion coupling.

use crate::diffusion::{DiffusionConfig, HeatVariant, PolarGrid};
use crate::field::CartesianGrid;
use crate::geometry::{AnnulusDomain, BoundaryIllumination};
use crate::solver::{DiffusionCoupling, ProblemConfig, SolveMode};
use crate::spectral::{sigma, RescaledTemperature, SpectralModel, MAX_KAPPA_COEFFS};
use std::collections::HashSet;
use std::fmt::Display;
use std::path::Path;
use thiserror::Error;

/// Errors from parsing or building a run configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: expected 'key = value', got '{text}'")]
    Syntax { line: usize, text: String },
    #[error("config line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("config line {line}: duplicate key '{key}'")]
    DuplicateKey { line: usize, key: String },
    #[error("config line {line}: key '{key}' expects {expected}, got '{value}'")]
    BadValue {
        line: usize,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

fn parameter(e: impl Display) -> ConfigError {
    ConfigError::Parameter(e.to_string())
}

/// Parsed run document. Every field has a default matching the reference
/// grey atmosphere, so an empty document is a valid run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: SolveMode,
    /// Output directory for `run` artifacts (overridable on the command
    /// line).
    pub out_dir: String,
    pub n: usize,
    pub half_width: f64,
    pub planet_radius: f64,
    pub thickness: f64,
    pub q0: f64,
    pub t_source: f64,
    pub albedo: f64,
    /// Polynomial absorption coefficients `kappa(nu) = sum_k kappa_k nu^k`.
    pub kappa: [f64; MAX_KAPPA_COEFFS],
    pub nu_min: f64,
    pub nu_max: f64,
    pub n_nu: usize,
    pub t_init: f64,
    /// Temperature ceiling; defaults to the source temperature.
    pub t_max: Option<f64>,
    pub tol: f64,
    pub max_iters: usize,
    pub n_theta: usize,
    /// Kernel cutoff radius; defaults to a quarter of the planet radius, or
    /// to zero when the cell-average origin treatment is selected (the
    /// average already regularises the singularity).
    pub r_cut: Option<f64>,
    pub cell_average_origin: bool,
    pub circular_fft: bool,
    pub lagged_inversion: bool,
    pub diffusion: bool,
    pub kappa_t: f64,
    pub t_surface: f64,
    pub polar_n_r: usize,
    pub polar_n_theta: usize,
    pub full_dirichlet: bool,
    pub code_heat_variant: bool,
    pub picard_tol: f64,
    pub max_picard: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            mode: SolveMode::Grey,
            out_dir: "out".to_string(),
            n: 64,
            half_width: 1.0,
            planet_radius: 0.4,
            thickness: 0.3,
            q0: 5.74e-5,
            t_source: 1.209,
            albedo: 0.0,
            kappa: [0.5, 0.0, 0.0, 0.0, 0.0],
            nu_min: 0.01,
            nu_max: 15.0,
            n_nu: 100,
            t_init: 0.0,
            t_max: None,
            tol: 1e-4,
            max_iters: 50,
            n_theta: 60,
            r_cut: None,
            cell_average_origin: false,
            circular_fft: false,
            lagged_inversion: false,
            diffusion: false,
            kappa_t: 0.01 * sigma(),
            t_surface: 0.06,
            polar_n_r: 36,
            polar_n_theta: 120,
            full_dirichlet: false,
            code_heat_variant: false,
            picard_tol: 1e-8,
            max_picard: 50,
        }
    }
}

/// Everything `run` needs, assembled from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct BuiltProblem {
    pub problem: ProblemConfig,
    pub mode: SolveMode,
    pub diffusion: Option<DiffusionCoupling>,
    pub out_dir: String,
}

fn parse_f64(key: &str, value: &str, line: usize) -> Result<f64, ConfigError> {
    value.parse::<f64>().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
        expected: "a real number",
    })
}

fn parse_usize(key: &str, value: &str, line: usize) -> Result<usize, ConfigError> {
    value.parse::<usize>().map_err(|_| ConfigError::BadValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
        expected: "a non-negative integer",
    })
}

fn parse_bool(key: &str, value: &str, line: usize) -> Result<bool, ConfigError> {
    match value {
        "on" | "true" | "yes" => Ok(true),
        "off" | "false" | "no" => Ok(false),
        _ => Err(ConfigError::BadValue {
            line,
            key: key.to_string(),
            value: value.to_string(),
            expected: "on/off (or true/false)",
        }),
    }
}

impl RunConfig {
    /// Parses a configuration document.
    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen: HashSet<String> = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some(eq) = content.find('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: content.to_string(),
                });
            };
            let key = content[..eq].trim();
            let value = content[eq + 1..].trim();
            if key.is_empty() || value.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    text: content.to_string(),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            cfg.apply(key, value, line)?;
        }
        Ok(cfg)
    }

    /// Reads and parses a configuration file.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    fn apply(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        match key {
            "mode" => {
                self.mode = match value {
                    "grey" => SolveMode::Grey,
                    "spectral" => SolveMode::Spectral,
                    _ => {
                        return Err(ConfigError::BadValue {
                            line,
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "grey or spectral",
                        })
                    }
                };
            }
            "out" => self.out_dir = value.to_string(),
            "n" => self.n = parse_usize(key, value, line)?,
            "half_width" => self.half_width = parse_f64(key, value, line)?,
            "planet_radius" => self.planet_radius = parse_f64(key, value, line)?,
            "thickness" => self.thickness = parse_f64(key, value, line)?,
            "q0" => self.q0 = parse_f64(key, value, line)?,
            "t_source" => self.t_source = parse_f64(key, value, line)?,
            "albedo" => self.albedo = parse_f64(key, value, line)?,
            "kappa0" => self.kappa[0] = parse_f64(key, value, line)?,
            "kappa1" => self.kappa[1] = parse_f64(key, value, line)?,
            "kappa2" => self.kappa[2] = parse_f64(key, value, line)?,
            "kappa3" => self.kappa[3] = parse_f64(key, value, line)?,
            "kappa4" => self.kappa[4] = parse_f64(key, value, line)?,
            "nu_min" => self.nu_min = parse_f64(key, value, line)?,
            "nu_max" => self.nu_max = parse_f64(key, value, line)?,
            "n_nu" => self.n_nu = parse_usize(key, value, line)?,
            "T0" => self.t_init = parse_f64(key, value, line)?,
            "T_max" => self.t_max = Some(parse_f64(key, value, line)?),
            "tol" => self.tol = parse_f64(key, value, line)?,
            "max_iters" => self.max_iters = parse_usize(key, value, line)?,
            "n_theta" => self.n_theta = parse_usize(key, value, line)?,
            "r_cut" => self.r_cut = Some(parse_f64(key, value, line)?),
            "kernel_origin" => {
                self.cell_average_origin = match value {
                    "zero" => false,
                    "cell-average" => true,
                    _ => {
                        return Err(ConfigError::BadValue {
                            line,
                            key: key.to_string(),
                            value: value.to_string(),
                            expected: "zero or cell-average",
                        })
                    }
                };
            }
            "circular-fft" => self.circular_fft = parse_bool(key, value, line)?,
            "lagged-inversion" => self.lagged_inversion = parse_bool(key, value, line)?,
            "diffusion" => self.diffusion = parse_bool(key, value, line)?,
            "kappa_T" => self.kappa_t = parse_f64(key, value, line)?,
            "T_E" => self.t_surface = parse_f64(key, value, line)?,
            "n_r" => self.polar_n_r = parse_usize(key, value, line)?,
            "n_theta_polar" => self.polar_n_theta = parse_usize(key, value, line)?,
            "full_dirichlet" => self.full_dirichlet = parse_bool(key, value, line)?,
            "code-heat-variant" => self.code_heat_variant = parse_bool(key, value, line)?,
            "picard_tol" => self.picard_tol = parse_f64(key, value, line)?,
            "max_picard" => self.max_picard = parse_usize(key, value, line)?,
            _ => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Validates the parameters and assembles the solvable problem.
    pub fn build(&self) -> Result<BuiltProblem, ConfigError> {
        let grid = CartesianGrid::new(self.n, self.half_width).map_err(parameter)?;
        let domain =
            AnnulusDomain::new(self.planet_radius, self.thickness).map_err(parameter)?;
        let t_source = RescaledTemperature::new(self.t_source).map_err(parameter)?;
        let illumination = BoundaryIllumination::new(self.q0, t_source).map_err(parameter)?;
        // Trailing zero coefficients are dropped so a pure kappa0 document
        // builds a genuinely constant-absorption model.
        let last = self
            .kappa
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0);
        let model = SpectralModel::new(
            &self.kappa[..=last],
            self.albedo,
            self.nu_min,
            self.nu_max,
            self.n_nu,
        )
        .map_err(parameter)?;

        let mut problem = ProblemConfig::new(grid, domain, illumination, model);
        problem.t_init = self.t_init;
        if let Some(t_max) = self.t_max {
            problem.t_max = t_max;
        }
        problem.tol = self.tol;
        problem.max_iters = self.max_iters;
        problem.n_theta = self.n_theta;
        problem.r_cut = match self.r_cut {
            Some(r_cut) => r_cut,
            None if self.cell_average_origin => 0.0,
            None => domain.inner_radius() / 4.0,
        };
        problem.cell_average_origin = self.cell_average_origin;
        problem.circular_fft = self.circular_fft;
        problem.lagged_inversion = self.lagged_inversion;
        problem.validate(self.mode).map_err(parameter)?;

        let diffusion = if self.diffusion {
            if self.mode != SolveMode::Grey {
                return Err(ConfigError::Parameter(
                    "thermal diffusion coupling requires mode = grey".to_string(),
                ));
            }
            let variant = if self.code_heat_variant {
                HeatVariant::CodeRelaxation
            } else {
                HeatVariant::PlanckLinearized
            };
            let config = DiffusionConfig::new(self.kappa_t, self.t_surface)
                .map_err(parameter)?
                .with_picard_tol(self.picard_tol)
                .map_err(parameter)?
                .with_max_picard(self.max_picard)
                .map_err(parameter)?
                .with_full_dirichlet(self.full_dirichlet)
                .with_variant(variant);
            let polar = PolarGrid::new(
                self.polar_n_r,
                self.polar_n_theta,
                domain.inner_radius(),
                domain.outer_radius(),
            )
            .map_err(parameter)?;
            Some(DiffusionCoupling { config, polar })
        } else {
            None
        };

        Ok(BuiltProblem {
            problem,
            mode: self.mode,
            diffusion,
            out_dir: self.out_dir.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn empty_document_builds_the_reference_problem() {
        let cfg = RunConfig::parse_str("").unwrap();
        let built = cfg.build().unwrap();
        assert_eq!(built.mode, SolveMode::Grey);
        assert!(built.diffusion.is_none());
        assert_eq!(built.out_dir, "out");
        let p = &built.problem;
        assert_eq!(p.grid.n(), 64);
        assert_relative_eq!(p.domain.inner_radius(), 0.4);
        assert_relative_eq!(p.domain.thickness(), 0.3);
        assert_relative_eq!(p.illumination.q0(), 5.74e-5);
        assert_relative_eq!(p.t_max, 1.209);
        assert_relative_eq!(p.r_cut, 0.1);
        assert_eq!(p.max_iters, 50);
        assert!(p.model.is_constant_kappa());
    }

    #[test]
    fn comments_blanks_and_all_keys_parse() {
        let text = "\
# reference atmosphere, tweaked
mode = spectral
out = results
n = 32            # grid nodes per side
half_width = 1.0
planet_radius = 0.4
thickness = 0.3
q0 = 1.0e-4
t_source = 1.2
albedo = 0.0
kappa0 = 0.5
kappa1 = 0.03
nu_min = 0.02
nu_max = 12.0
n_nu = 80
T0 = 0.01
T_max = 1.3
tol = 1e-5
max_iters = 40
n_theta = 90
r_cut = 0.05
kernel_origin = zero
circular-fft = off
lagged-inversion = on
";
        let cfg = RunConfig::parse_str(text).unwrap();
        assert_eq!(cfg.mode, SolveMode::Spectral);
        assert_eq!(cfg.out_dir, "results");
        assert_eq!(cfg.n, 32);
        assert_relative_eq!(cfg.kappa[1], 0.03);
        assert_relative_eq!(cfg.t_init, 0.01);
        assert_eq!(cfg.t_max, Some(1.3));
        assert!(cfg.lagged_inversion);
        let built = cfg.build().unwrap();
        assert_eq!(built.mode, SolveMode::Spectral);
        assert_relative_eq!(built.problem.t_max, 1.3);
        assert_relative_eq!(built.problem.r_cut, 0.05);
        assert!(!built.problem.model.is_constant_kappa());
    }

    #[test]
    fn unknown_key_is_rejected_by_name() {
        let err = RunConfig::parse_str("gamma = 3\n").unwrap_err();
        match err {
            ConfigError::UnknownKey { line, key } => {
                assert_eq!(line, 1);
                assert_eq!(key, "gamma");
            }
            other => panic!("expected UnknownKey, got {other:?}"),
        }
        assert!(format!("{}", RunConfig::parse_str("gamma = 3\n").unwrap_err())
            .contains("gamma"));
    }

    #[test]
    fn duplicate_and_malformed_lines_are_rejected() {
        let err = RunConfig::parse_str("n = 32\nn = 64\n").unwrap_err();
        assert!(matches!(err, ConfigError::DuplicateKey { line: 2, .. }));
        let err = RunConfig::parse_str("just some words\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 1, .. }));
        let err = RunConfig::parse_str("n =\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { .. }));
        let err = RunConfig::parse_str("n = sixty\n").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { .. }));
        let err = RunConfig::parse_str("mode = purple\n").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { .. }));
        let err = RunConfig::parse_str("diffusion = maybe\n").unwrap_err();
        assert!(matches!(err, ConfigError::BadValue { .. }));
    }

    #[test]
    fn negative_albedo_is_named_in_the_error() {
        let cfg = RunConfig::parse_str("albedo = -0.1\n").unwrap();
        let err = cfg.build().unwrap_err();
        let message = format!("{err}");
        assert!(message.contains("albedo"), "message was: {message}");
    }

    #[test]
    fn cell_average_origin_defaults_the_cutoff_to_zero() {
        let cfg = RunConfig::parse_str("kernel_origin = cell-average\n").unwrap();
        let built = cfg.build().unwrap();
        assert_eq!(built.problem.r_cut, 0.0);
        assert!(built.problem.cell_average_origin);
        // An explicit cutoff still wins.
        let cfg =
            RunConfig::parse_str("kernel_origin = cell-average\nr_cut = 0.02\n").unwrap();
        assert_relative_eq!(cfg.build().unwrap().problem.r_cut, 0.02);
    }

    #[test]
    fn diffusion_block_builds_the_coupling() {
        let text = "\
diffusion = on
kappa_T = 0.0649393940226683
T_E = 0.06
n_r = 36
n_theta_polar = 120
code-heat-variant = off
";
        let built = RunConfig::parse_str(text).unwrap().build().unwrap();
        let coupling = built.diffusion.expect("coupling missing");
        assert_eq!(coupling.polar.n_r(), 36);
        assert_eq!(coupling.polar.n_theta(), 120);
        assert_relative_eq!(coupling.polar.r_inner(), 0.4);
        assert_relative_eq!(coupling.polar.r_outer(), 0.7);
        assert_relative_eq!(coupling.config.kappa_t(), 0.01 * sigma(), max_relative = 1e-12);
        assert_eq!(coupling.config.variant(), HeatVariant::PlanckLinearized);

        let err = RunConfig::parse_str("mode = spectral\ndiffusion = on\n")
            .unwrap()
            .build()
            .unwrap_err();
        assert!(matches!(err, ConfigError::Parameter(_)));
    }

    #[test]
    fn build_surfaces_solver_validation() {
        // Too-small box for the annulus.
        let err = RunConfig::parse_str("half_width = 0.5\n")
            .unwrap()
            .build()
            .unwrap_err();
        assert!(matches!(err, ConfigError::Parameter(_)));
        // Varying absorption cannot run grey.
        let err = RunConfig::parse_str("kappa1 = 0.03\n")
            .unwrap()
            .build()
            .unwrap_err();
        let message = format!("{err}");
        assert!(message.contains("frequency-independent"), "got: {message}");
    }
}
