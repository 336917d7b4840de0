//! Thermal diffusion in the atmosphere on a polar mesh.
//!
//! When heat conduction is switched on, the temperature no longer follows
//! algebraically from the mean intensity; instead it solves
//!
//! ```text
//! -kappa_T * Laplacian(T) + sigma T^4 = J_bar      in the annulus,
//! T = T_E                                          on the inner circle,
//! dT/dr = 0                                        on the outer circle,
//! ```
//!
//! with `J_bar` the frequency-integrated mean intensity. The quartic
//! reaction term is handled by Picard linearisation (`sigma T_m^3 T_{m+1}`),
//! each step solving one linear system on the `(r, theta)` mesh: a standard
//! five-point polar Laplacian, periodic in `theta`, Dirichlet on the inner
//! ring and a mirrored-ghost Neumann closure on the outer ring (optionally
//! full Dirichlet). The linear systems are banded with half-bandwidth equal
//! to the angular node count and are solved by an LU factorisation without
//! pivoting, which is safe here because the discretisation is an M-matrix
//! whenever `dr < 2 r_inner`.
//!
//! A second variant reproduces a simpler relaxation used by an earlier
//! implementation: a single linear solve of
//! `-kappa_T * Laplacian(T) + T = (J_bar / sigma)^{1/4}`.

use crate::field::{CartesianGrid, ScalarField};
use crate::geometry::AnnulusDomain;
use crate::spectral::sigma;
use ndarray::Array2;
use std::f64::consts::PI;
use thiserror::Error;

/// Errors from the diffusion solver.
#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("polar grid needs n_r >= 4, n_theta >= 8 and 0 < r_inner < r_outer, got n_r = {n_r}, n_theta = {n_theta}, r in [{r_inner}, {r_outer}]")]
    InvalidGrid {
        n_r: usize,
        n_theta: usize,
        r_inner: f64,
        r_outer: f64,
    },
    #[error("conductivity must be non-negative and finite, got kappa_T = {kappa_t}")]
    InvalidConductivity { kappa_t: f64 },
    #[error("surface temperature must be non-negative and finite, got {t_surface}")]
    InvalidSurfaceTemperature { t_surface: f64 },
    #[error("Picard tolerance must be positive and finite, got {tol}")]
    InvalidPicardTolerance { tol: f64 },
    #[error("at least one Picard iteration is required")]
    NoPicardIterations,
    #[error("radial spacing {dr} is too coarse for the inner radius {r_inner} (needs dr < 2 r_inner for an M-matrix)")]
    RadialResolution { dr: f64, r_inner: f64 },
    #[error("fields live on different polar grids")]
    GridMismatch,
    #[error("zero pivot in row {row}: the linear system is singular")]
    SingularPivot { row: usize },
    #[error("Picard iteration stalled after {iters} steps (last update {residual:.3e})")]
    PicardStall { iters: usize, residual: f64 },
}

/// Uniform mesh on the annulus: `n_r` radial rings from `r_inner` to
/// `r_outer` inclusive, `n_theta` equally spaced angles (periodic).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarGrid {
    n_r: usize,
    n_theta: usize,
    r_inner: f64,
    r_outer: f64,
}

impl PolarGrid {
    pub fn new(
        n_r: usize,
        n_theta: usize,
        r_inner: f64,
        r_outer: f64,
    ) -> Result<Self, DiffusionError> {
        if n_r < 4
            || n_theta < 8
            || !r_inner.is_finite()
            || !r_outer.is_finite()
            || r_inner <= 0.0
            || r_outer <= r_inner
        {
            return Err(DiffusionError::InvalidGrid {
                n_r,
                n_theta,
                r_inner,
                r_outer,
            });
        }
        Ok(Self {
            n_r,
            n_theta,
            r_inner,
            r_outer,
        })
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn r_inner(&self) -> f64 {
        self.r_inner
    }

    pub fn r_outer(&self) -> f64 {
        self.r_outer
    }

    pub fn dr(&self) -> f64 {
        (self.r_outer - self.r_inner) / (self.n_r - 1) as f64
    }

    pub fn d_theta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }

    pub fn radius(&self, i: usize) -> f64 {
        self.r_inner + i as f64 * self.dr()
    }

    pub fn angle(&self, j: usize) -> f64 {
        j as f64 * self.d_theta()
    }
}

/// Scalar samples on a [`PolarGrid`], indexed `[[i_r, j_theta]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarField {
    grid: PolarGrid,
    values: Array2<f64>,
}

impl PolarField {
    pub fn zeros(grid: PolarGrid) -> Self {
        Self {
            grid,
            values: Array2::zeros((grid.n_r(), grid.n_theta())),
        }
    }

    pub fn constant(grid: PolarGrid, value: f64) -> Self {
        Self {
            grid,
            values: Array2::from_elem((grid.n_r(), grid.n_theta()), value),
        }
    }

    /// Field sampled from `f(r, theta)` at every node.
    pub fn from_fn(grid: PolarGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid,
            values: Array2::from_shape_fn((grid.n_r(), grid.n_theta()), |(i, j)| {
                f(grid.radius(i), grid.angle(j))
            }),
        }
    }

    pub fn grid(&self) -> PolarGrid {
        self.grid
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.values[[i, j]] = value;
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// Largest absolute node-wise difference. Panics if the grids differ.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        self.values
            .iter()
            .zip(other.values.iter())
            .fold(0.0, |m, (&a, &b)| m.max((a - b).abs()))
    }
}

/// Which heat equation the module solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatVariant {
    /// `-kappa_T Lap(T) + sigma T^4 = J_bar`, Picard-linearised in the
    /// reaction term. The physically consistent balance.
    PlanckLinearized,
    /// One linear solve of `-kappa_T Lap(T) + T = (J_bar / sigma)^{1/4}`,
    /// reproducing an earlier implementation's relaxation step.
    CodeRelaxation,
}

/// Parameters of the diffusion solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionConfig {
    kappa_t: f64,
    t_surface: f64,
    picard_tol: f64,
    max_picard: usize,
    full_dirichlet: bool,
    variant: HeatVariant,
}

impl DiffusionConfig {
    /// Conductivity `kappa_T >= 0` and inner-surface temperature `T_E >= 0`;
    /// Picard tolerance defaults to 1e-8 with at most 50 iterations, the
    /// outer boundary defaults to the zero-flux closure and the variant to
    /// [`HeatVariant::PlanckLinearized`].
    pub fn new(kappa_t: f64, t_surface: f64) -> Result<Self, DiffusionError> {
        if !kappa_t.is_finite() || kappa_t < 0.0 {
            return Err(DiffusionError::InvalidConductivity { kappa_t });
        }
        if !t_surface.is_finite() || t_surface < 0.0 {
            return Err(DiffusionError::InvalidSurfaceTemperature { t_surface });
        }
        Ok(Self {
            kappa_t,
            t_surface,
            picard_tol: 1e-8,
            max_picard: 50,
            full_dirichlet: false,
            variant: HeatVariant::PlanckLinearized,
        })
    }

    pub fn with_picard_tol(mut self, tol: f64) -> Result<Self, DiffusionError> {
        if !tol.is_finite() || tol <= 0.0 {
            return Err(DiffusionError::InvalidPicardTolerance { tol });
        }
        self.picard_tol = tol;
        Ok(self)
    }

    pub fn with_max_picard(mut self, max_picard: usize) -> Result<Self, DiffusionError> {
        if max_picard == 0 {
            return Err(DiffusionError::NoPicardIterations);
        }
        self.max_picard = max_picard;
        Ok(self)
    }

    pub fn with_full_dirichlet(mut self, on: bool) -> Self {
        self.full_dirichlet = on;
        self
    }

    pub fn with_variant(mut self, variant: HeatVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn kappa_t(&self) -> f64 {
        self.kappa_t
    }

    pub fn t_surface(&self) -> f64 {
        self.t_surface
    }

    pub fn picard_tol(&self) -> f64 {
        self.picard_tol
    }

    pub fn max_picard(&self) -> usize {
        self.max_picard
    }

    pub fn full_dirichlet(&self) -> bool {
        self.full_dirichlet
    }

    pub fn variant(&self) -> HeatVariant {
        self.variant
    }
}

/// Square banded matrix stored by rows, `data[i][b + (j - i)] = A[i, j]` for
/// `|i - j| <= b`, with an in-place LU solve without pivoting.
pub(crate) struct BandedMatrix {
    n: usize,
    b: usize,
    data: Vec<f64>,
}

impl BandedMatrix {
    pub(crate) fn new(n: usize, b: usize) -> Self {
        assert!(b < n, "bandwidth must be below the matrix size");
        Self {
            n,
            b,
            data: vec![0.0; n * (2 * b + 1)],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(j + self.b >= i && j <= i + self.b, "entry outside band");
        i * (2 * self.b + 1) + (j + self.b - i)
    }

    pub(crate) fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    #[cfg(test)]
    fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.b < i || j > i + self.b {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
    }

    /// Solves `A x = rhs` by banded LU without pivoting, consuming the
    /// matrix. Fill-in stays inside the band, so the factorisation is done
    /// in place.
    pub(crate) fn solve(mut self, mut rhs: Vec<f64>) -> Result<Vec<f64>, DiffusionError> {
        let (n, b, w) = (self.n, self.b, 2 * self.b + 1);
        assert_eq!(rhs.len(), n, "right-hand side length mismatch");
        for i in 0..n {
            let pivot = self.data[i * w + b];
            if !pivot.is_finite() || pivot.abs() < 1e-300 {
                return Err(DiffusionError::SingularPivot { row: i });
            }
            let hi = (i + b).min(n - 1);
            for r in (i + 1)..=hi {
                // Column i sits at offset (i + b - r) in row r.
                let factor = self.data[r * w + (i + b - r)] / pivot;
                if factor != 0.0 {
                    // Row r, columns i..=min(i + b, n - 1).
                    let ci = (i + b).min(n - 1);
                    for c in i..=ci {
                        let v = self.data[i * w + (c + b - i)];
                        self.data[r * w + (c + b - r)] -= factor * v;
                    }
                    rhs[r] -= factor * rhs[i];
                }
            }
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut acc = rhs[i];
            let ci = (i + b).min(n - 1);
            for c in (i + 1)..=ci {
                acc -= self.data[i * w + (c + b - i)] * x[c];
            }
            x[i] = acc / self.data[i * w + b];
        }
        Ok(x)
    }
}

/// Assembles the banded system for `-kappa_T Lap(T) + react * T = rhs` with
/// the module's boundary closures; `react` holds the per-node reaction
/// coefficients of the current linearisation.
fn assemble(
    grid: &PolarGrid,
    config: &DiffusionConfig,
    react: &PolarField,
    rhs_field: &PolarField,
) -> (BandedMatrix, Vec<f64>) {
    let (n_r, n_th) = (grid.n_r(), grid.n_theta());
    let n = n_r * n_th;
    let dr = grid.dr();
    let d_theta = grid.d_theta();
    let kappa_t = config.kappa_t();
    let mut mat = BandedMatrix::new(n, n_th);
    let mut rhs = vec![0.0; n];
    let idx = |i: usize, j: usize| i * n_th + j;
    for i in 0..n_r {
        let r = grid.radius(i);
        let inv_dr2 = 1.0 / (dr * dr);
        let inv_r_dr = 1.0 / (2.0 * r * dr);
        let inv_th = 1.0 / (r * r * d_theta * d_theta);
        for j in 0..n_th {
            let row = idx(i, j);
            if i == 0 || (config.full_dirichlet() && i == n_r - 1) {
                mat.add(row, row, 1.0);
                rhs[row] = config.t_surface();
                continue;
            }
            let jm = (j + n_th - 1) % n_th;
            let jp = (j + 1) % n_th;
            mat.add(row, idx(i, jm), -kappa_t * inv_th);
            mat.add(row, idx(i, jp), -kappa_t * inv_th);
            if i == n_r - 1 {
                // Mirrored ghost: T(n_r) := T(n_r - 2), so the radial second
                // difference doubles the inner neighbour and the centred
                // first derivative vanishes.
                mat.add(row, idx(i - 1, j), -2.0 * kappa_t * inv_dr2);
            } else {
                mat.add(row, idx(i + 1, j), -kappa_t * (inv_dr2 + inv_r_dr));
                mat.add(row, idx(i - 1, j), -kappa_t * (inv_dr2 - inv_r_dr));
            }
            mat.add(
                row,
                row,
                kappa_t * (2.0 * inv_dr2 + 2.0 * inv_th) + react.get(i, j),
            );
            rhs[row] = rhs_field.get(i, j);
        }
    }
    (mat, rhs)
}

fn field_from_vec(grid: PolarGrid, v: Vec<f64>) -> PolarField {
    let mut out = PolarField::zeros(grid);
    let n_th = grid.n_theta();
    for i in 0..grid.n_r() {
        for j in 0..n_th {
            out.set(i, j, v[i * n_th + j]);
        }
    }
    out
}

/// Solves the heat balance for `T` given the intensity `j_bar` (clamped to
/// be non-negative). Returns the temperature and the number of linear solves
/// performed. `warm_start` seeds the Picard iteration; without it the seed
/// is the constant surface temperature.
pub fn solve_diffusion(
    grid: &PolarGrid,
    config: &DiffusionConfig,
    j_bar: &PolarField,
    warm_start: Option<&PolarField>,
) -> Result<(PolarField, usize), DiffusionError> {
    if j_bar.grid() != *grid {
        return Err(DiffusionError::GridMismatch);
    }
    if let Some(w) = warm_start {
        if w.grid() != *grid {
            return Err(DiffusionError::GridMismatch);
        }
    }
    let s = sigma();

    // Without conduction the balance is purely algebraic node by node; the
    // boundary conditions have no meaning at kappa_T = 0.
    if config.kappa_t() == 0.0 {
        let mut out = PolarField::zeros(*grid);
        for i in 0..grid.n_r() {
            for j in 0..grid.n_theta() {
                out.set(i, j, (j_bar.get(i, j).max(0.0) / s).powf(0.25));
            }
        }
        return Ok((out, 0));
    }

    let dr = grid.dr();
    if dr >= 2.0 * grid.r_inner() {
        return Err(DiffusionError::RadialResolution {
            dr,
            r_inner: grid.r_inner(),
        });
    }

    match config.variant() {
        HeatVariant::CodeRelaxation => {
            let mut rhs = PolarField::zeros(*grid);
            for i in 0..grid.n_r() {
                for j in 0..grid.n_theta() {
                    rhs.set(i, j, (j_bar.get(i, j).max(0.0) / s).powf(0.25));
                }
            }
            let react = PolarField::constant(*grid, 1.0);
            let (mat, b) = assemble(grid, config, &react, &rhs);
            let x = mat.solve(b)?;
            Ok((field_from_vec(*grid, x), 1))
        }
        HeatVariant::PlanckLinearized => {
            let mut rhs = PolarField::zeros(*grid);
            for i in 0..grid.n_r() {
                for j in 0..grid.n_theta() {
                    rhs.set(i, j, j_bar.get(i, j).max(0.0));
                }
            }
            let mut t = match warm_start {
                Some(w) => w.clone(),
                None => PolarField::constant(*grid, config.t_surface()),
            };
            let mut residual = f64::INFINITY;
            for m in 0..config.max_picard() {
                let mut react = PolarField::zeros(*grid);
                for i in 0..grid.n_r() {
                    for j in 0..grid.n_theta() {
                        let v = t.get(i, j).max(0.0);
                        react.set(i, j, s * v * v * v);
                    }
                }
                let (mat, b) = assemble(grid, config, &react, &rhs);
                let x = mat.solve(b)?;
                let next = field_from_vec(*grid, x);
                residual = next.max_abs_diff(&t);
                t = next;
                if residual <= config.picard_tol() {
                    return Ok((t, m + 1));
                }
            }
            Err(DiffusionError::PicardStall {
                iters: config.max_picard(),
                residual,
            })
        }
    }
}

/// Samples a Cartesian field at the polar nodes by bilinear interpolation.
pub fn cartesian_to_polar(field: &ScalarField, grid: &PolarGrid) -> PolarField {
    PolarField::from_fn(*grid, |r, theta| {
        field.interp_bilinear([r * theta.cos(), r * theta.sin()])
    })
}

/// Samples a polar field back onto Cartesian nodes inside the closed
/// annulus (zero outside): bilinear in `(r, theta)` with the angle wrapped
/// periodically and the radius clamped to the mesh.
pub fn polar_to_cartesian(
    field: &PolarField,
    grid: CartesianGrid,
    domain: &AnnulusDomain,
) -> ScalarField {
    let pg = field.grid();
    let (n_r, n_th) = (pg.n_r(), pg.n_theta());
    ScalarField::par_from_fn(grid, |_, _, p| {
        if !domain.contains(p) {
            return 0.0;
        }
        let r = (p[0] * p[0] + p[1] * p[1]).sqrt();
        let mut theta = p[1].atan2(p[0]);
        if theta < 0.0 {
            theta += 2.0 * PI;
        }
        let tr = ((r - pg.r_inner()) / pg.dr()).clamp(0.0, (n_r - 1) as f64);
        let i = (tr.floor() as usize).min(n_r - 2);
        let fr = (tr - i as f64).clamp(0.0, 1.0);
        let tt = theta / pg.d_theta();
        let j = (tt.floor() as usize).min(n_th - 1);
        let ft = (tt - j as f64).clamp(0.0, 1.0);
        let jp = (j + 1) % n_th;
        (1.0 - fr) * ((1.0 - ft) * field.get(i, j) + ft * field.get(i, jp))
            + fr * ((1.0 - ft) * field.get(i + 1, j) + ft * field.get(i + 1, jp))
    })
}
