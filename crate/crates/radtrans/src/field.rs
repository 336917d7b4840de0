//! Square Cartesian grid covering the simulation box and node-centred scalar
//! fields on it.

use ndarray::Array2;
use rayon::prelude::*;
use thiserror::Error;

/// Errors from grid construction.
#[derive(Debug, Error)]
pub enum FieldError {
    #[error("grid needs an even number of nodes >= 8 per side, got {n}")]
    GridSize { n: usize },
    #[error("grid half-width must be positive and finite, got {half_width}")]
    GridExtent { half_width: f64 },
}

/// Vertex-centred `n x n` grid on the square `[-L, L]^2` with spacing
/// `h = 2L / (n - 1)`.
///
/// `n` is even, so no node falls exactly on the origin where the transport
/// kernel is singular.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CartesianGrid {
    n: usize,
    half_width: f64,
}

impl CartesianGrid {
    /// Builds a grid with `n >= 8` (even) nodes per side on `[-L, L]^2`.
    pub fn new(n: usize, half_width: f64) -> Result<Self, FieldError> {
        if n < 8 || n % 2 != 0 {
            return Err(FieldError::GridSize { n });
        }
        if !half_width.is_finite() || half_width <= 0.0 {
            return Err(FieldError::GridExtent { half_width });
        }
        Ok(Self { n, half_width })
    }

    /// Nodes per side.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Half-width `L` of the square.
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    /// Node spacing `h = 2L / (n - 1)`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    /// Coordinate of node `i` along either axis; endpoints land exactly on
    /// `-L` and `+L`.
    pub fn coord(&self, i: usize) -> f64 {
        self.half_width * (2.0 * i as f64 / (self.n - 1) as f64 - 1.0)
    }

    /// Position of node `(ix, iy)`.
    pub fn node(&self, ix: usize, iy: usize) -> [f64; 2] {
        [self.coord(ix), self.coord(iy)]
    }
}

/// Scalar samples on the nodes of a [`CartesianGrid`], indexed `[[ix, iy]]`.
///
/// Fields produced by the transport pipeline are zero outside the annulus;
/// the container itself does not force that (kernel tableaus, for one, are
/// not annulus-supported).
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: CartesianGrid,
    values: Array2<f64>,
}

impl ScalarField {
    /// All-zero field.
    pub fn zeros(grid: CartesianGrid) -> Self {
        Self {
            grid,
            values: Array2::zeros((grid.n(), grid.n())),
        }
    }

    /// Constant field over the whole grid.
    pub fn constant(grid: CartesianGrid, value: f64) -> Self {
        Self {
            grid,
            values: Array2::from_elem((grid.n(), grid.n()), value),
        }
    }

    /// Field sampled from `f` at every node.
    pub fn from_fn(grid: CartesianGrid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let n = grid.n();
        Self {
            grid,
            values: Array2::from_shape_fn((n, n), |(ix, iy)| f(grid.node(ix, iy))),
        }
    }

    /// Field sampled from `f` where `keep` holds and zero elsewhere — the
    /// constructor behind every annulus-supported field.
    pub fn from_fn_where(
        grid: CartesianGrid,
        keep: impl Fn([f64; 2]) -> bool,
        f: impl Fn([f64; 2]) -> f64,
    ) -> Self {
        Self::from_fn(grid, |p| if keep(p) { f(p) } else { 0.0 })
    }

    /// Parallel node-wise builder: `f(ix, iy, position)` for every node, rows
    /// split across threads (each node independent, so the result does not
    /// depend on the schedule).
    pub(crate) fn par_from_fn(
        grid: CartesianGrid,
        f: impl Fn(usize, usize, [f64; 2]) -> f64 + Sync,
    ) -> Self {
        let n = grid.n();
        let mut raw = vec![0.0; n * n];
        raw.par_chunks_mut(n).enumerate().for_each(|(ix, row)| {
            let x = grid.coord(ix);
            for (iy, slot) in row.iter_mut().enumerate() {
                *slot = f(ix, iy, [x, grid.coord(iy)]);
            }
        });
        Self {
            grid,
            values: Array2::from_shape_vec((n, n), raw).expect("row-major layout"),
        }
    }

    pub fn grid(&self) -> CartesianGrid {
        self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[[ix, iy]]
    }

    pub fn set(&mut self, ix: usize, iy: usize, value: f64) {
        self.values[[ix, iy]] = value;
    }

    /// New field with `f` applied to every value.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.mapv(|v| f(v)),
        }
    }

    /// New field combining two fields node-wise. Panics if the grids differ
    /// (programmer error, not runtime input).
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.grid, other.grid, "fields live on different grids");
        let mut values = self.values.clone();
        values.zip_mut_with(&other.values, |a, &b| *a = f(*a, b));
        Self {
            grid: self.grid,
            values,
        }
    }

    /// Largest absolute value.
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

    /// Bilinear interpolation at `p`; zero outside the grid square.
    pub fn interp_bilinear(&self, p: [f64; 2]) -> f64 {
        let l = self.grid.half_width();
        let [x, y] = p;
        if !(x >= -l && x <= l && y >= -l && y <= l) {
            return 0.0;
        }
        let n = self.grid.n();
        let h = self.grid.spacing();
        let cell = |c: f64| -> (usize, f64) {
            let t = (c + l) / h;
            let i = (t.floor() as usize).min(n - 2);
            ((i), (t - i as f64).clamp(0.0, 1.0))
        };
        let (ix, fx) = cell(x);
        let (iy, fy) = cell(y);
        let v00 = self.values[[ix, iy]];
        let v10 = self.values[[ix + 1, iy]];
        let v01 = self.values[[ix, iy + 1]];
        let v11 = self.values[[ix + 1, iy + 1]];
        (1.0 - fx) * ((1.0 - fy) * v00 + fy * v01) + fx * ((1.0 - fy) * v10 + fy * v11)
    }
}
