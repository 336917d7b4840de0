//! Direct ray-marched transport: the slow, independently-built evaluation of
//! the mean intensity used to cross-check the convolution route.
//!
//! For a point `x` in the annulus and direction `omega`, the backward ray
//! `s -> x - s omega` leaves the domain either through the inner circle (the
//! lit surface) or the outer circle (empty space). Intensity along the ray is
//!
//! ```text
//! I(x, omega) = I_b e^{-kappa tau} + int_0^tau kappa S(x - s omega) e^{-kappa s} ds
//! ```
//!
//! with `I_b` the boundary radiance at the exit point and `S` the source
//! function. The path integral uses exact exponential weights per segment
//! (`e^{-kappa s0} - e^{-kappa s1}`) against the source at the segment
//! midpoint, so constant sources are reproduced to round-off regardless of
//! the step. The mean intensity is the plain average over a midpoint angular
//! grid, matching the `1/(2 pi)` normalisation of the angular integral.

use crate::field::ScalarField;
use crate::geometry::{exit_time_unit, theta_nodes, AnnulusDomain, BoundaryIllumination};
use thiserror::Error;

/// Errors from ray-quadrature configuration.
#[derive(Debug, Error)]
pub enum TransportError {
    #[error("angular quadrature needs at least 4 directions, got {n_theta}")]
    QuadratureTooCoarse { n_theta: usize },
    #[error("ray step must be positive and finite, got {h_ray}")]
    InvalidRayStep { h_ray: f64 },
    #[error("ray step {h_ray} does not resolve the atmosphere thickness {thickness}")]
    StepExceedsThickness { h_ray: f64, thickness: f64 },
}

/// Angular and path resolution of the direct transport sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayQuadrature {
    n_theta: usize,
    h_ray: f64,
}

impl RayQuadrature {
    pub fn new(n_theta: usize, h_ray: f64) -> Result<Self, TransportError> {
        if n_theta < 4 {
            return Err(TransportError::QuadratureTooCoarse { n_theta });
        }
        if !h_ray.is_finite() || h_ray <= 0.0 {
            return Err(TransportError::InvalidRayStep { h_ray });
        }
        Ok(Self { n_theta, h_ray })
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn h_ray(&self) -> f64 {
        self.h_ray
    }
}

/// Which boundary the backward ray leaves through.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitSurface {
    /// The inner circle: the emitting surface of the lit body.
    Planet,
    /// The outer circle: empty space, no incoming radiation.
    Outer,
}

/// Distance to the domain boundary along the backward ray and the surface it
/// crosses. `omega` must be a unit vector; `x` is expected inside the closed
/// annulus, for which an outer crossing always exists.
pub fn domain_exit(x: [f64; 2], omega: [f64; 2], domain: &AnnulusDomain) -> (f64, ExitSurface) {
    debug_assert!(
        (omega[0] * omega[0] + omega[1] * omega[1] - 1.0).abs() < 1e-9,
        "direction must be unit length"
    );
    if let Some(s) = exit_time_unit(x, omega, domain.inner_radius()) {
        return (s, ExitSurface::Planet);
    }
    let p = x[0] * omega[0] + x[1] * omega[1];
    let ro = domain.outer_radius();
    let d = p * p - (x[0] * x[0] + x[1] * x[1]) + ro * ro;
    // Points inside the annulus keep the discriminant positive; clamp guards
    // round-off for points sitting exactly on the outer circle.
    let s = p + d.max(0.0).sqrt();
    (s.max(0.0), ExitSurface::Outer)
}

/// Intensity at `x` looking into `omega`, integrating the source field along
/// the backward ray with exact exponential segment weights.
///
/// `boundary` maps the exit point and surface to the incoming radiance.
/// Source values between nodes come from bilinear interpolation.
pub fn intensity_along_ray<F>(
    x: [f64; 2],
    omega: [f64; 2],
    source: &ScalarField,
    domain: &AnnulusDomain,
    kappa: f64,
    h_ray: f64,
    boundary: &F,
) -> f64
where
    F: Fn([f64; 2], ExitSurface) -> f64,
{
    let (tau, surface) = domain_exit(x, omega, domain);
    let exit_point = [x[0] - tau * omega[0], x[1] - tau * omega[1]];
    let incoming = boundary(exit_point, surface) * (-kappa * tau).exp();

    let n_seg = ((tau / h_ray).ceil() as usize).max(1);
    let ds = tau / n_seg as f64;
    let mut acc = 0.0;
    let mut att_lo = 1.0; // e^{-kappa s} at the segment start
    for k in 0..n_seg {
        let s_hi = (k + 1) as f64 * ds;
        let att_hi = (-kappa * s_hi).exp();
        let s_mid = (k as f64 + 0.5) * ds;
        let p = [x[0] - s_mid * omega[0], x[1] - s_mid * omega[1]];
        acc += (att_lo - att_hi) * source.interp_bilinear(p);
        att_lo = att_hi;
    }
    incoming + acc
}

/// Mean intensity over directions, `J(x) = (1/n) sum_j I(x, omega_j)` on
/// midpoint angles, evaluated at every grid node inside the closed annulus
/// (zero outside). Parallel over nodes with a fixed reduction order.
pub fn mean_intensity_direct<F>(
    source: &ScalarField,
    domain: &AnnulusDomain,
    kappa: f64,
    quad: &RayQuadrature,
    boundary: &F,
) -> Result<ScalarField, TransportError>
where
    F: Fn([f64; 2], ExitSurface) -> f64 + Sync,
{
    if quad.h_ray() >= domain.thickness() {
        return Err(TransportError::StepExceedsThickness {
            h_ray: quad.h_ray(),
            thickness: domain.thickness(),
        });
    }
    let n_theta = quad.n_theta();
    let h_ray = quad.h_ray();
    Ok(ScalarField::par_from_fn(source.grid(), |_, _, p| {
        if !domain.contains(p) {
            return 0.0;
        }
        let mut acc = 0.0;
        for theta in theta_nodes(n_theta) {
            let (sin_t, cos_t) = theta.sin_cos();
            acc += intensity_along_ray(p, [cos_t, sin_t], source, domain, kappa, h_ray, boundary);
        }
        acc / n_theta as f64
    }))
}

/// Boundary radiance of the lit body under frequency-integrated transport:
/// the surface re-emits `Q0 sigma T_s^4` weighted by the positive part of
/// the exit point's x-coordinate; the outer boundary is dark.
pub fn planet_emission_boundary(
    illum: BoundaryIllumination,
) -> impl Fn([f64; 2], ExitSurface) -> f64 + Sync {
    let scale = illum.grey_radiance();
    move |exit_point, surface| match surface {
        ExitSurface::Planet => scale * exit_point[0].max(0.0),
        ExitSurface::Outer => 0.0,
    }
}
