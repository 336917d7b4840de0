//! Run artifacts: CSV field dumps, 8-bit PGM heatmaps, and the plain-text
//! iteration log.
//!
//! All writers are deterministic byte-for-byte for identical inputs: fixed
//! iteration order, fixed formatting, no timestamps.

use crate::field::ScalarField;
use crate::solver::IterationReport;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

/// Writes a field as CSV with header `x,y,value`, row-major over grid nodes
/// (outer loop over x, inner over y), 17 significant digits per value.
pub fn write_csv(field: &ScalarField, path: impl AsRef<Path>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "x,y,value")?;
    let grid = field.grid();
    let n = grid.n();
    for ix in 0..n {
        for iy in 0..n {
            let [x, y] = grid.node(ix, iy);
            writeln!(w, "{:.16e},{:.16e},{:.16e}", x, y, field.get(ix, iy))?;
        }
    }
    w.flush()
}

/// Writes a field as a binary 8-bit grayscale PGM (`P5`), mapping
/// `[min, max]` linearly to `[0, 255]` (a constant field maps to 0). Rows
/// run top-to-bottom in image convention, i.e. decreasing y; columns run in
/// increasing x. The min/max used for the mapping go to a `<path>.txt`
/// sidecar so the grey levels stay interpretable.
pub fn write_pgm(field: &ScalarField, path: impl AsRef<Path>) -> io::Result<()> {
    let path = path.as_ref();
    let grid = field.grid();
    let n = grid.n();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for ix in 0..n {
        for iy in 0..n {
            let v = field.get(ix, iy);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let span = hi - lo;

    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", n, n)?;
    let mut row = vec![0u8; n];
    for iy in (0..n).rev() {
        for (ix, byte) in row.iter_mut().enumerate() {
            *byte = if span > 0.0 {
                (((field.get(ix, iy) - lo) / span * 255.0).round()).clamp(0.0, 255.0) as u8
            } else {
                0
            };
        }
        w.write_all(&row)?;
    }
    w.flush()?;

    let sidecar = format!("{}.txt", path.display());
    let mut s = BufWriter::new(File::create(sidecar)?);
    writeln!(s, "min = {:.16e}", lo)?;
    writeln!(s, "max = {:.16e}", hi)?;
    s.flush()
}

/// Writes the convergence log: one line per iteration,
/// `iter residual tmin tmax monotone wall_ms`, where `monotone` is 1 when
/// the sweep moved every node in one direction (up or down) and 0 otherwise.
pub fn write_iteration_log(report: &IterationReport, path: impl AsRef<Path>) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for s in &report.stats {
        let monotone = if s.monotone_up || s.monotone_down {
            1
        } else {
            0
        };
        writeln!(
            w,
            "{} {:.6e} {:.6e} {:.6e} {} {:.3}",
            s.iter, s.residual, s.t_min, s.t_max, monotone, s.wall_ms
        )?;
    }
    w.flush()
}
