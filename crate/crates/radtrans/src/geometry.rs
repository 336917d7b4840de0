//! Annular atmosphere geometry: ray exit times through the inner circle and
//! the surface-illumination source term.
//!
//! The inner disc of radius `R` is the lit body; the atmosphere occupies
//! `R < |x| < R + H`. Sunlight arrives along `-e_x`, so the re-emitting
//! surface temperature is weighted by the positive part of the surface
//! point's x-coordinate (its cosine of solar incidence, up to the disc
//! radius factor kept inside the illumination scale).

use crate::field::{CartesianGrid, ScalarField};
use crate::spectral::{planck_raw, sigma, RescaledTemperature, SpectralModel};
use std::f64::consts::PI;
use thiserror::Error;

/// Errors from geometric queries and construction.
#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("annulus needs positive finite radius and thickness, got R = {inner_radius}, H = {thickness}")]
    InvalidAnnulus { inner_radius: f64, thickness: f64 },
    #[error("direction must be a unit vector, got |omega| = {norm}")]
    NonUnitDirection { norm: f64 },
    #[error("illumination needs Q0 >= 0 (finite), got {q0}")]
    InvalidIllumination { q0: f64 },
    #[error("source temperature must be positive, got {t_source}")]
    InvalidSourceTemperature { t_source: f64 },
}

/// The annulus `R <= |x| <= R + H` (closed; membership on the bounding
/// circles counts as inside for grid masking purposes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnulusDomain {
    inner_radius: f64,
    thickness: f64,
}

impl AnnulusDomain {
    /// Builds an annulus with inner radius `R > 0` and thickness `H > 0`.
    pub fn new(inner_radius: f64, thickness: f64) -> Result<Self, GeometryError> {
        if !inner_radius.is_finite()
            || !thickness.is_finite()
            || inner_radius <= 0.0
            || thickness <= 0.0
        {
            return Err(GeometryError::InvalidAnnulus {
                inner_radius,
                thickness,
            });
        }
        Ok(Self {
            inner_radius,
            thickness,
        })
    }

    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    pub fn thickness(&self) -> f64 {
        self.thickness
    }

    pub fn outer_radius(&self) -> f64 {
        self.inner_radius + self.thickness
    }

    /// Closed-annulus membership test.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let r2 = p[0] * p[0] + p[1] * p[1];
        r2 >= self.inner_radius * self.inner_radius
            && r2 <= self.outer_radius() * self.outer_radius()
    }
}

/// Strength of the surface illumination: the lit body re-emits like a black
/// body at `t_source`, scaled by the dimensionless factor `q0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryIllumination {
    q0: f64,
    t_source: RescaledTemperature,
}

impl BoundaryIllumination {
    pub fn new(q0: f64, t_source: RescaledTemperature) -> Result<Self, GeometryError> {
        if !q0.is_finite() || q0 < 0.0 {
            return Err(GeometryError::InvalidIllumination { q0 });
        }
        if t_source.value() <= 0.0 {
            return Err(GeometryError::InvalidSourceTemperature {
                t_source: t_source.value(),
            });
        }
        Ok(Self { q0, t_source })
    }

    pub fn q0(&self) -> f64 {
        self.q0
    }

    pub fn t_source(&self) -> RescaledTemperature {
        self.t_source
    }

    /// Frequency-integrated surface radiance scale `Q0 * sigma * T_s^4`.
    pub fn grey_radiance(&self) -> f64 {
        let ts = self.t_source.value();
        self.q0 * sigma() * ts * ts * ts * ts
    }
}

#[inline]
fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Distance travelled by the backward ray `s -> x - s * omega` before it
/// crosses the circle `|y| = planet_radius`, if it ever does.
///
/// Returns `Ok(None)` when the ray misses the circle (discriminant < 0, or
/// the crossing lies at negative `s`). `omega` must be a unit vector; `x` is
/// expected on or outside the circle.
pub fn exit_time(
    x: [f64; 2],
    omega: [f64; 2],
    planet_radius: f64,
) -> Result<Option<f64>, GeometryError> {
    let norm = dot(omega, omega).sqrt();
    if (norm - 1.0).abs() > 1e-12 {
        return Err(GeometryError::NonUnitDirection { norm });
    }
    Ok(exit_time_unit(x, omega, planet_radius))
}

/// [`exit_time`] without the unit-norm check, for quadrature loops that build
/// directions from angles.
#[inline]
pub(crate) fn exit_time_unit(x: [f64; 2], omega: [f64; 2], planet_radius: f64) -> Option<f64> {
    let p = dot(x, omega);
    let d = p * p - dot(x, x) + planet_radius * planet_radius;
    if d < 0.0 {
        return None;
    }
    // Smallest root when the ray points sunward of the tangent (p > 0); the
    // other root is the right candidate for p <= 0 but is then non-positive
    // for points outside the circle, i.e. a miss.
    let s = if p > 0.0 {
        p - d.sqrt()
    } else {
        p + d.sqrt()
    };
    (s >= 0.0).then_some(s)
}

/// Midpoint angular quadrature nodes `theta_j = (j + 1/2) * 2 pi / n`.
#[inline]
pub(crate) fn theta_nodes(n_theta: usize) -> impl Iterator<Item = f64> {
    let d = 2.0 * PI / n_theta as f64;
    (0..n_theta).map(move |j| (j as f64 + 0.5) * d)
}

/// Frequency-integrated surface source at `x`:
///
/// `SE(x) = (Q0 sigma T_s^4 / 2 pi) * integral (x_E . e_x)^+ e^{-kappa tau} dtheta`
///
/// where `x_E = x - tau * omega(theta)` is the surface point seen along the
/// backward ray and the integral runs over directions that reach the surface.
/// Midpoint rule with `n_theta` angles; zero outside the closed annulus.
pub fn boundary_source_grey(
    x: [f64; 2],
    domain: &AnnulusDomain,
    illum: &BoundaryIllumination,
    kappa: f64,
    n_theta: usize,
) -> f64 {
    debug_assert!(n_theta >= 4, "angular quadrature too coarse");
    if !domain.contains(x) {
        return 0.0;
    }
    let r = domain.inner_radius();
    let d_theta = 2.0 * PI / n_theta as f64;
    let mut acc = 0.0;
    for theta in theta_nodes(n_theta) {
        let (sin_t, cos_t) = theta.sin_cos();
        if let Some(tau) = exit_time_unit(x, [cos_t, sin_t], r) {
            let xe = x[0] - tau * cos_t;
            if xe > 0.0 {
                acc += xe * (-kappa * tau).exp();
            }
        }
    }
    illum.grey_radiance() * acc * d_theta / (2.0 * PI)
}

/// Frequency-resolved surface source, integrated over the model's frequency
/// window:
///
/// `SE(x) = (Q0 / 2 pi) * integral (x_E . e_x)^+ [ sum_nu B_nu(T_s) kappa_nu e^{-kappa_nu tau} dnu ] dtheta`.
///
/// This is the absorption-weighted source entering the frequency-resolved
/// temperature balance; with constant `kappa` it reduces to
/// `kappa * boundary_source_grey` up to the frequency-window truncation.
pub fn boundary_source_spectral(
    x: [f64; 2],
    domain: &AnnulusDomain,
    illum: &BoundaryIllumination,
    model: &SpectralModel,
    n_theta: usize,
) -> f64 {
    let weights = spectral_surface_weights(illum, model);
    boundary_source_spectral_with(x, domain, illum, model, n_theta, &weights)
}

/// Per-frequency surface emission weights `B_nu(T_s) * kappa_nu * dnu`,
/// precomputed once per field assembly.
pub(crate) fn spectral_surface_weights(
    illum: &BoundaryIllumination,
    model: &SpectralModel,
) -> Vec<(f64, f64)> {
    let ts = illum.t_source().value();
    let d_nu = model.d_nu();
    model
        .nu_nodes()
        .map(|nu| {
            let kappa = model.kappa(nu);
            (kappa, planck_raw(nu, ts) * kappa * d_nu)
        })
        .collect()
}

pub(crate) fn boundary_source_spectral_with(
    x: [f64; 2],
    domain: &AnnulusDomain,
    illum: &BoundaryIllumination,
    _model: &SpectralModel,
    n_theta: usize,
    weights: &[(f64, f64)],
) -> f64 {
    debug_assert!(n_theta >= 4, "angular quadrature too coarse");
    if !domain.contains(x) {
        return 0.0;
    }
    let r = domain.inner_radius();
    let d_theta = 2.0 * PI / n_theta as f64;
    let mut acc = 0.0;
    for theta in theta_nodes(n_theta) {
        let (sin_t, cos_t) = theta.sin_cos();
        if let Some(tau) = exit_time_unit(x, [cos_t, sin_t], r) {
            let xe = x[0] - tau * cos_t;
            if xe > 0.0 {
                let inner: f64 = weights
                    .iter()
                    .map(|&(kappa, w)| w * (-kappa * tau).exp())
                    .sum();
                acc += xe * inner;
            }
        }
    }
    illum.q0() * acc * d_theta / (2.0 * PI)
}

/// [`boundary_source_grey`] sampled over a grid (parallel, node order fixed).
pub fn boundary_source_grey_field(
    grid: CartesianGrid,
    domain: &AnnulusDomain,
    illum: &BoundaryIllumination,
    kappa: f64,
    n_theta: usize,
) -> ScalarField {
    ScalarField::par_from_fn(grid, |_, _, p| {
        boundary_source_grey(p, domain, illum, kappa, n_theta)
    })
}

/// [`boundary_source_spectral`] sampled over a grid (parallel, node order
/// fixed; per-frequency weights computed once).
pub fn boundary_source_spectral_field(
    grid: CartesianGrid,
    domain: &AnnulusDomain,
    illum: &BoundaryIllumination,
    model: &SpectralModel,
    n_theta: usize,
) -> ScalarField {
    let weights = spectral_surface_weights(illum, model);
    ScalarField::par_from_fn(grid, |_, _, p| {
        boundary_source_spectral_with(p, domain, illum, model, n_theta, &weights)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn reference_domain() -> AnnulusDomain {
        AnnulusDomain::new(0.4, 0.3).unwrap()
    }

    fn reference_illumination() -> BoundaryIllumination {
        BoundaryIllumination::new(5.74e-5, RescaledTemperature::new(1.209).unwrap()).unwrap()
    }

    #[test]
    fn annulus_validates_and_classifies_points() {
        assert!(AnnulusDomain::new(0.0, 0.3).is_err());
        assert!(AnnulusDomain::new(0.4, -0.1).is_err());
        let d = reference_domain();
        assert_relative_eq!(d.outer_radius(), 0.7);
        assert!(d.contains([0.55, 0.0]));
        assert!(d.contains([0.4, 0.0])); // closed at the surface
        assert!(d.contains([0.0, 0.7]));
        assert!(!d.contains([0.2, 0.0]));
        assert!(!d.contains([0.71, 0.0]));
    }

    #[test]
    fn exit_time_hits_the_surface_head_on() {
        let s = exit_time([0.7, 0.0], [1.0, 0.0], 0.4).unwrap();
        assert_abs_diff_eq!(s.unwrap(), 0.3, epsilon = 1e-14);
    }

    #[test]
    fn exit_time_misses_when_the_ray_clears_the_disc() {
        // Discriminant 0.25 - 0.5 + 0.16 < 0: no crossing.
        assert_eq!(exit_time([0.5, 0.5], [0.0, 1.0], 0.4).unwrap(), None);
        // Crossing would lie behind the start point (p <= 0).
        assert_eq!(exit_time([0.7, 0.0], [-1.0, 0.0], 0.4).unwrap(), None);
    }

    #[test]
    fn exit_time_is_zero_on_the_surface_itself() {
        let s = exit_time([0.4, 0.0], [1.0, 0.0], 0.4).unwrap();
        assert_eq!(s, Some(0.0));
    }

    #[test]
    fn exit_time_rejects_non_unit_directions() {
        assert!(matches!(
            exit_time([0.7, 0.0], [1.0, 1.0], 0.4),
            Err(GeometryError::NonUnitDirection { .. })
        ));
    }

    #[test]
    fn exit_points_land_on_the_circle() {
        // |x - tau*omega| must equal the disc radius whenever a hit is
        // reported, for rays from assorted positions and angles.
        let r = 0.4;
        for k in 0..48 {
            let phi = 0.13 + k as f64 * 0.261;
            let x = [0.55 * phi.cos(), 0.55 * phi.sin()];
            for j in 0..48 {
                let theta = (j as f64 + 0.31) * (2.0 * PI / 48.0);
                let omega = [theta.cos(), theta.sin()];
                if let Some(tau) = exit_time(x, omega, r).unwrap() {
                    let e = [x[0] - tau * omega[0], x[1] - tau * omega[1]];
                    let dist = (e[0] * e[0] + e[1] * e[1]).sqrt();
                    assert_abs_diff_eq!(dist, r, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn grey_source_matches_frozen_quadrature_values() {
        let d = reference_domain();
        let illum = reference_illumination();
        assert_relative_eq!(
            boundary_source_grey([0.55, 0.0], &d, &illum, 0.5, 60),
            7.456136709284125e-5,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            boundary_source_grey([0.5, 0.3], &d, &illum, 0.5, 60),
            5.488865387387526e-5,
            max_relative = 1e-9
        );
    }

    #[test]
    fn grey_source_is_dark_on_the_night_side_and_off_domain() {
        let d = reference_domain();
        let illum = reference_illumination();
        // Every visible surface point from the antisolar axis has x_E < 0.
        assert_eq!(boundary_source_grey([-0.55, 0.0], &d, &illum, 0.5, 60), 0.0);
        // Outside the closed annulus the source vanishes by definition.
        assert_eq!(boundary_source_grey([0.2, 0.0], &d, &illum, 0.5, 60), 0.0);
        assert_eq!(boundary_source_grey([0.9, 0.0], &d, &illum, 0.5, 60), 0.0);
    }

    #[test]
    fn grey_source_day_night_asymmetry_and_positivity() {
        let d = reference_domain();
        let illum = reference_illumination();
        let day = boundary_source_grey([0.55, 0.0], &d, &illum, 0.5, 60);
        let dusk = boundary_source_grey([0.0, 0.55], &d, &illum, 0.5, 60);
        assert!(day > 0.0);
        assert!(day > dusk, "sub-solar point must outshine the terminator");
    }

    #[test]
    fn grey_source_is_stable_under_angular_refinement() {
        let d = reference_domain();
        let illum = reference_illumination();
        let coarse = boundary_source_grey([0.55, 0.0], &d, &illum, 0.5, 60);
        let fine = boundary_source_grey([0.55, 0.0], &d, &illum, 0.5, 120);
        assert_relative_eq!(coarse, fine, max_relative = 1e-2);
    }

    #[test]
    fn spectral_source_matches_frozen_value_and_grey_reduction() {
        let d = reference_domain();
        let illum = reference_illumination();
        let model = SpectralModel::new(&[0.5, 0.03], 0.0, 0.01, 15.0, 100).unwrap();
        assert_relative_eq!(
            boundary_source_spectral([0.55, 0.0], &d, &illum, &model, 60),
            4.625022171884859e-5,
            max_relative = 1e-9
        );
        // Constant absorption: the spectral source collapses onto
        // kappa0 * grey source, up to the frequency-window truncation.
        let grey_model = SpectralModel::grey(0.5).unwrap();
        let spectral = boundary_source_spectral([0.55, 0.0], &d, &illum, &grey_model, 60);
        let grey = 0.5 * boundary_source_grey([0.55, 0.0], &d, &illum, 0.5, 60);
        assert_relative_eq!(spectral, grey, max_relative = 5e-3);
    }

    #[test]
    fn source_fields_match_the_pointwise_evaluations() {
        let d = reference_domain();
        let illum = reference_illumination();
        let grid = CartesianGrid::new(16, 1.0).unwrap();
        let field = boundary_source_grey_field(grid, &d, &illum, 0.5, 20);
        for ix in 0..16 {
            for iy in 0..16 {
                let p = grid.node(ix, iy);
                assert_eq!(
                    field.get(ix, iy),
                    boundary_source_grey(p, &d, &illum, 0.5, 20),
                    "node ({ix}, {iy})"
                );
            }
        }
        let model = SpectralModel::new(&[0.5, 0.03], 0.0, 0.01, 15.0, 40).unwrap();
        let sf = boundary_source_spectral_field(grid, &d, &illum, &model, 20);
        let p = grid.node(12, 8);
        assert_relative_eq!(
            sf.get(12, 8),
            boundary_source_spectral(p, &d, &illum, &model, 20),
            max_relative = 1e-14
        );
    }
}
