//! Rescaled Planck law, spectral moments of the blackbody spectrum, and the
//! emitted-power inversion used by the temperature update.
//!
//! Temperatures are dimensionless: one unit equals 4780 K. In these units the
//! Planck law takes the parameter-free form `B_nu(T) = nu^3 / (e^{nu/T} - 1)`
//! and its frequency integral is `sigma * T^4` with `sigma = pi^4 / 15`.

use std::f64::consts::PI;
use thiserror::Error;

/// Kelvin represented by one rescaled temperature unit.
pub const KELVIN_PER_UNIT: f64 = 4780.0;

/// Offset between the Kelvin and Celsius scales.
const CELSIUS_OFFSET: f64 = 273.0;

/// Highest supported power of frequency in the absorption polynomial (and in
/// the tabulated spectral moments): `kappa(nu) = sum_k kappa_k nu^k`, k <= 4.
pub const MAX_KAPPA_COEFFS: usize = 5;

/// Stefan–Boltzmann constant of the rescaled Planck law:
/// `integral_0^inf B_nu(T) dnu = sigma * T^4` with `sigma = pi^4 / 15`.
pub fn sigma() -> f64 {
    PI.powi(4) / 15.0
}

/// Moment coefficients `c_k` in `integral nu^k B_nu(T) dnu = c_k T^{k+4}`,
/// k = 1..=4, rounded to the five significant figures used throughout the
/// temperature-extraction algebra. `c_0` is [`sigma`] itself (kept exact).
const MOMENT_COEFFS_ROUNDED: [f64; 4] = [24.886, 122.081, 726.012, 5060.55];

/// The same moments evaluated exactly as `Gamma(k+4) * zeta(k+4)`.
const MOMENT_COEFFS_EXACT: [f64; 4] = [
    24.886266123440878, // 24 * zeta(5)
    122.08116743813390, // 120 * zeta(6) = 120 * pi^6 / 945
    726.01147971498444, // 720 * zeta(7)
    5060.5498752376395, // 5040 * zeta(8) = 5040 * pi^8 / 9450
];

/// Errors from spectral evaluations and model construction.
#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("frequency must be positive and finite, got {nu}")]
    FrequencyDomain { nu: f64 },
    #[error("rescaled temperature must be finite and non-negative, got {value}")]
    TemperatureDomain { value: f64 },
    #[error("spectral moment order {k} is not tabulated (supported orders: 0..=4)")]
    MomentOrder { k: usize },
    #[error("absorption polynomial takes 1..={MAX_KAPPA_COEFFS} coefficients, got {count}")]
    CoefficientCount { count: usize },
    #[error("albedo must lie in [0, 1), got {albedo}")]
    AlbedoRange { albedo: f64 },
    #[error("frequency window must satisfy 0 < nu_min < nu_max (finite), got [{nu_min}, {nu_max}]")]
    FrequencyWindow { nu_min: f64, nu_max: f64 },
    #[error("frequency quadrature needs at least 2 nodes, got {n_nu}")]
    QuadratureSize { n_nu: usize },
    #[error("absorption coefficient is negative at nu = {nu}: kappa(nu) = {kappa}")]
    NegativeAbsorption { nu: f64, kappa: f64 },
    #[error("emitted-power target must be finite and non-negative, got {rhs}")]
    PowerDomain { rhs: f64 },
    #[error(
        "emitted-power target {rhs} exceeds the ceiling {cap} at t_max = {t_max}; raise t_max"
    )]
    PowerAboveCeiling { rhs: f64, cap: f64, t_max: f64 },
    #[error("temperature ceiling must be positive and finite, got {t_max}")]
    CeilingDomain { t_max: f64 },
    #[error("emitted power is degenerate at t_max = {t_max} (all absorption coefficients zero?)")]
    DegenerateCap { t_max: f64 },
    #[error("lagged inversion denominator is non-positive ({denom}) at t_prev = {t_prev}")]
    LaggedDenominator { denom: f64, t_prev: f64 },
}

/// Non-negative temperature in rescaled units (1 unit = 4780 K).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RescaledTemperature(f64);

impl RescaledTemperature {
    /// Wraps a finite, non-negative rescaled temperature.
    pub fn new(value: f64) -> Result<Self, SpectralError> {
        if !value.is_finite() || value < 0.0 {
            return Err(SpectralError::TemperatureDomain { value });
        }
        Ok(Self(value))
    }

    /// The raw rescaled value.
    pub fn value(self) -> f64 {
        self.0
    }

    /// Converts to degrees Celsius (`T * 4780 - 273`).
    pub fn to_celsius(self) -> f64 {
        self.0 * KELVIN_PER_UNIT - CELSIUS_OFFSET
    }
}

/// Rescaled Planck law `B_nu(T) = nu^3 / (e^{nu/T} - 1)`.
///
/// Returns 0 for `T = 0` (cold medium emits nothing) and decays to 0 without
/// overflow for `nu/T` large.
pub fn planck(nu: f64, temperature: RescaledTemperature) -> Result<f64, SpectralError> {
    if !nu.is_finite() || nu <= 0.0 {
        return Err(SpectralError::FrequencyDomain { nu });
    }
    Ok(planck_raw(nu, temperature.value()))
}

/// [`planck`] on pre-validated inputs (`nu > 0`, `t >= 0`); the form used by
/// the node-wise loops.
pub(crate) fn planck_raw(nu: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    // exp_m1 keeps full precision in the Rayleigh–Jeans limit nu/T -> 0;
    // for nu/T large exp_m1 overflows to +inf and the quotient is a clean 0.
    nu * nu * nu / (nu / t).exp_m1()
}

/// Moment coefficient `c_k` of `integral nu^k B_nu(T) dnu = c_k T^{k+4}`, in
/// the five-significant-figure convention used by the temperature extraction
/// (`c_0` = [`sigma`], exact).
pub fn moment_coefficient(k: usize) -> Result<f64, SpectralError> {
    match k {
        0 => Ok(sigma()),
        1..=4 => Ok(MOMENT_COEFFS_ROUNDED[k - 1]),
        _ => Err(SpectralError::MomentOrder { k }),
    }
}

/// Moment coefficient `c_k = Gamma(k+4) * zeta(k+4)` at full double precision.
pub fn moment_coefficient_exact(k: usize) -> Result<f64, SpectralError> {
    match k {
        0 => Ok(sigma()),
        1..=4 => Ok(MOMENT_COEFFS_EXACT[k - 1]),
        _ => Err(SpectralError::MomentOrder { k }),
    }
}

/// Frequency-dependent absorption `kappa(nu) = sum_k kappa_k nu^k` together
/// with the scattering albedo and the frequency quadrature window.
///
/// The frequency integral is a uniform midpoint rule with `n_nu` nodes on
/// `[nu_min, nu_max]`; `kappa` is validated to be non-negative at every
/// quadrature node and at both window ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    kappa_coeffs: Vec<f64>,
    albedo: f64,
    nu_min: f64,
    nu_max: f64,
    n_nu: usize,
    exact_moments: bool,
}

impl SpectralModel {
    /// Builds and validates a spectral model.
    pub fn new(
        kappa_coeffs: &[f64],
        albedo: f64,
        nu_min: f64,
        nu_max: f64,
        n_nu: usize,
    ) -> Result<Self, SpectralError> {
        if kappa_coeffs.is_empty() || kappa_coeffs.len() > MAX_KAPPA_COEFFS {
            return Err(SpectralError::CoefficientCount {
                count: kappa_coeffs.len(),
            });
        }
        if !albedo.is_finite() || !(0.0..1.0).contains(&albedo) {
            return Err(SpectralError::AlbedoRange { albedo });
        }
        if !nu_min.is_finite() || !nu_max.is_finite() || nu_min <= 0.0 || nu_max <= nu_min {
            return Err(SpectralError::FrequencyWindow { nu_min, nu_max });
        }
        if n_nu < 2 {
            return Err(SpectralError::QuadratureSize { n_nu });
        }
        if kappa_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(SpectralError::NegativeAbsorption {
                nu: f64::NAN,
                kappa: f64::NAN,
            });
        }
        let model = Self {
            kappa_coeffs: kappa_coeffs.to_vec(),
            albedo,
            nu_min,
            nu_max,
            n_nu,
            exact_moments: false,
        };
        for nu in model
            .nu_nodes()
            .chain([model.nu_min, model.nu_max])
            .collect::<Vec<_>>()
        {
            let kappa = model.kappa(nu);
            if kappa < 0.0 {
                return Err(SpectralError::NegativeAbsorption { nu, kappa });
            }
        }
        Ok(model)
    }

    /// A frequency-independent absorber `kappa(nu) = kappa0` with no
    /// scattering, over the default frequency window.
    pub fn grey(kappa0: f64) -> Result<Self, SpectralError> {
        Self::new(&[kappa0], 0.0, 0.01, 15.0, 100)
    }

    /// Switches the moment coefficients between the five-significant-figure
    /// convention (default) and exact `Gamma * zeta` values.
    pub fn with_exact_moments(mut self, exact: bool) -> Self {
        self.exact_moments = exact;
        self
    }

    pub fn kappa_coeffs(&self) -> &[f64] {
        &self.kappa_coeffs
    }

    pub fn albedo(&self) -> f64 {
        self.albedo
    }

    pub fn nu_min(&self) -> f64 {
        self.nu_min
    }

    pub fn nu_max(&self) -> f64 {
        self.nu_max
    }

    pub fn n_nu(&self) -> usize {
        self.n_nu
    }

    /// Width of one frequency quadrature cell.
    pub fn d_nu(&self) -> f64 {
        (self.nu_max - self.nu_min) / self.n_nu as f64
    }

    /// Midpoint quadrature nodes covering `[nu_min, nu_max]`.
    pub fn nu_nodes(&self) -> impl Iterator<Item = f64> + '_ {
        let d = self.d_nu();
        (0..self.n_nu).map(move |i| self.nu_min + (i as f64 + 0.5) * d)
    }

    /// Absorption coefficient at frequency `nu` (Horner evaluation).
    pub fn kappa(&self, nu: f64) -> f64 {
        self.kappa_coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, &c| acc * nu + c)
    }

    /// True when the absorption has no frequency dependence
    /// (`kappa1..kappa4 = 0`), i.e. the model is usable in grey mode.
    pub fn is_constant_kappa(&self) -> bool {
        self.kappa_coeffs.iter().skip(1).all(|&c| c == 0.0)
    }

    fn moment(&self, k: usize) -> f64 {
        if self.exact_moments {
            moment_coefficient_exact(k).expect("k bounded by MAX_KAPPA_COEFFS")
        } else {
            moment_coefficient(k).expect("k bounded by MAX_KAPPA_COEFFS")
        }
    }

    /// Total power radiated per unit volume at temperature `t`, divided by the
    /// absorption: `(1 - albedo) * sum_k kappa_k c_k t^{k+4}`.
    ///
    /// Strictly increasing in `t` whenever some `kappa_k > 0`.
    pub fn emitted_power(&self, t: f64) -> f64 {
        let t4 = t * t * t * t;
        let mut power = 0.0;
        let mut tk = 1.0; // t^k
        for (k, &kappa_k) in self.kappa_coeffs.iter().enumerate() {
            power += kappa_k * self.moment(k) * t4 * tk;
            tk *= t;
        }
        (1.0 - self.albedo) * power
    }

    /// Derivative of [`emitted_power`] with respect to `t`.
    fn emitted_power_derivative(&self, t: f64) -> f64 {
        let t3 = t * t * t;
        let mut d = 0.0;
        let mut tk = 1.0;
        for (k, &kappa_k) in self.kappa_coeffs.iter().enumerate() {
            d += kappa_k * self.moment(k) * (k as f64 + 4.0) * t3 * tk;
            tk *= t;
        }
        (1.0 - self.albedo) * d
    }

    /// Solves `emitted_power(t) = rhs` for the unique `t` in `[0, t_max]`, to
    /// an absolute tolerance of 1e-12 (Newton steps guarded by bisection).
    ///
    /// `rhs` above `emitted_power(t_max)` is reported as
    /// [`SpectralError::PowerAboveCeiling`] rather than extrapolated.
    pub fn invert_emitted_power(&self, rhs: f64, t_max: f64) -> Result<f64, SpectralError> {
        const TOL: f64 = 1e-12;
        if !rhs.is_finite() || rhs < 0.0 {
            return Err(SpectralError::PowerDomain { rhs });
        }
        if !t_max.is_finite() || t_max <= 0.0 {
            return Err(SpectralError::CeilingDomain { t_max });
        }
        if rhs == 0.0 {
            return Ok(0.0);
        }
        let cap = self.emitted_power(t_max);
        if cap <= 0.0 {
            return Err(SpectralError::DegenerateCap { t_max });
        }
        if rhs > cap {
            return Err(SpectralError::PowerAboveCeiling { rhs, cap, t_max });
        }
        if rhs == cap {
            return Ok(t_max);
        }
        let (mut lo, mut hi) = (0.0_f64, t_max);
        // The quartic term dominates near the bottom of the bracket, so the
        // pure-T^4 inverse makes a good first guess.
        let mut t = t_max * (rhs / cap).powf(0.25);
        for _ in 0..200 {
            let f = self.emitted_power(t) - rhs;
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let df = self.emitted_power_derivative(t);
            let mut next = if df > 0.0 { t - f / df } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= TOL {
                return Ok(next.clamp(0.0, t_max));
            }
            t = next;
            if hi - lo <= TOL {
                return Ok(t.clamp(0.0, t_max));
            }
        }
        Ok((0.5 * (lo + hi)).clamp(0.0, t_max))
    }

    /// One lagged inversion step: `t = (rhs / D(t_prev))^{1/4}` with
    /// `D(t) = (1 - albedo) * sum_k kappa_k c_k t^k`.
    ///
    /// Freezing the super-quartic factors at the previous iterate turns the
    /// quintic-and-higher balance into a single fourth root; iterating the
    /// outer fixed point drives `t_prev` to consistency. This reproduces the
    /// reference implementation's update and is exposed behind the
    /// `lagged_inversion` compatibility flag.
    pub fn invert_emitted_power_lagged(
        &self,
        rhs: f64,
        t_prev: f64,
    ) -> Result<f64, SpectralError> {
        if !rhs.is_finite() || rhs < 0.0 {
            return Err(SpectralError::PowerDomain { rhs });
        }
        let mut denom = 0.0;
        let mut tk = 1.0;
        for (k, &kappa_k) in self.kappa_coeffs.iter().enumerate() {
            denom += kappa_k * self.moment(k) * tk;
            tk *= t_prev;
        }
        denom *= 1.0 - self.albedo;
        if denom <= 0.0 {
            return Err(SpectralError::LaggedDenominator { denom, t_prev });
        }
        Ok((rhs / denom).powf(0.25))
    }
}
