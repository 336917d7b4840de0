//! Stationary radiative equilibrium of an absorbing atmosphere occupying the
//! annulus between a heated inner disc ("the planet", radius `R`) and an outer
//! circle at radius `R + H`, in two dimensions.
//!
//! The unknowns are the rescaled temperature field `T(x)` and the mean
//! radiation intensity. The intensity seen at a point is the sum of surface
//! light attenuated along each incoming ray and of the radiation re-emitted by
//! the medium itself; at equilibrium the temperature satisfies a fixed-point
//! relation between emitted power and absorbed intensity. Zero-extending the
//! source outside the annulus turns the ray-integral operator into a
//! convolution with the radially symmetric kernel
//! `Y_kappa(x) = kappa * exp(-kappa*|x|) / (2*pi*|x|)`, which is what makes an
//! FFT evaluation possible; a slow method-of-characteristics evaluator is kept
//! as an independent cross-check.
//!
//! Module map:
//! * [`spectral`] — rescaled Planck law, spectral moments, emitted-power
//!   inversion.
//! * [`field`] — Cartesian grid and node-centred scalar fields.
//! * [`geometry`] — annulus, ray exit times, and the illuminated-surface
//!   source term.
//! * [`kernel`] — exponential transport kernel and its FFT/direct convolution.
//! * [`transport`] — direct ray-marching oracle for the mean intensity.
//! * [`solver`] — the monotone fixed-point iteration (grey and spectral).
//! * [`diffusion`] — optional thermal diffusion on a polar mesh.
//! * [`config`] — flat `key = value` run configuration.
//! * [`output`] — CSV / PGM / convergence-log writers.
//! * [`diagnostics`] — self-check suite and convolution benchmark.

pub mod config;
pub mod diagnostics;
pub mod diffusion;
pub mod field;
pub mod geometry;
pub mod kernel;
pub mod output;
pub mod solver;
pub mod spectral;
pub mod transport;

pub use config::{ConfigError, RunConfig};
pub use diffusion::{DiffusionConfig, DiffusionError, PolarField, PolarGrid};
pub use field::{CartesianGrid, FieldError, ScalarField};
pub use geometry::{AnnulusDomain, BoundaryIllumination, GeometryError};
pub use kernel::{Convolver, KernelDim, KernelError, KernelSpec};
pub use solver::{IterationReport, ProblemConfig, SolveMode, SolveOutput, SolverError};
pub use spectral::{RescaledTemperature, SpectralError, SpectralModel};
pub use transport::{RayQuadrature, TransportError};
