//! Finite-difference terrain derivatives.
//!
//! Gradients are rise over run: central differences over two cells in the
//! interior, one-sided differences over one cell on the first and last
//! column/row. Slope is the gradient magnitude and aspect is
//! `atan2(-de/dy, de/dx)`, i.e. measured clockwise from east in `(-pi, pi]`.

use rayon::prelude::*;
use thiserror::Error;

use crate::raster::{ensure_congruent, resample_block_mean, Grid, GridError, GridGeometry};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerrainError {
    #[error("terrain derivatives need at least a 2x2 grid, got {nrows}x{ncols}")]
    TooSmall { nrows: usize, ncols: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TerrainDerivatives {
    pub grad_x: Grid,
    pub grad_y: Grid,
    pub slope: Grid,
    pub aspect: Grid,
}

/// Two-point derivative along one axis of a line of samples.
///
/// `at(i)` returns sample `i` or `None` for nodata. The cell itself must be
/// valid as well as every sample in its stencil.
fn line_derivative(at: impl Fn(usize) -> Option<f64>, i: usize, n: usize, step: f64) -> Option<f64> {
    at(i)?;
    if i == 0 {
        Some((at(1)? - at(0)?) / step)
    } else if i == n - 1 {
        Some((at(n - 1)? - at(n - 2)?) / step)
    } else {
        Some((at(i + 1)? - at(i - 1)?) / (2.0 * step))
    }
}

/// Gradient components of a DEM along the easting (`grad_x`) and northing
/// (`grad_y`) axes.
pub fn gradient(dem: &Grid) -> Result<(Grid, Grid), TerrainError> {
    let g = *dem.geometry();
    if g.ncols < 2 || g.nrows < 2 {
        return Err(TerrainError::TooSmall {
            nrows: g.nrows,
            ncols: g.ncols,
        });
    }
    let step = g.cell_size;
    let nodata = dem.nodata();
    let mut gx = vec![nodata; g.len()];
    let mut gy = vec![nodata; g.len()];
    gx.par_chunks_mut(g.ncols)
        .zip(gy.par_chunks_mut(g.ncols))
        .enumerate()
        .for_each(|(row, (gx_row, gy_row))| {
            for col in 0..g.ncols {
                if let Some(d) = line_derivative(|c| dem.get(row, c), col, g.ncols, step) {
                    gx_row[col] = d;
                }
                if let Some(d) = line_derivative(|r| dem.get(r, col), row, g.nrows, step) {
                    gy_row[col] = d;
                }
            }
        });
    Ok((Grid::new(g, nodata, gx)?, Grid::new(g, nodata, gy)?))
}

fn zip_map(
    a: &Grid,
    b: &Grid,
    f: impl Fn(f64, f64) -> Option<f64> + Sync,
) -> Result<Grid, TerrainError> {
    ensure_congruent(a.geometry(), b.geometry())?;
    let nodata = a.nodata();
    let values: Vec<f64> = a
        .values()
        .par_iter()
        .zip(b.values().par_iter())
        .map(|(&x, &y)| {
            if a.is_nodata(x) || b.is_nodata(y) {
                return nodata;
            }
            f(x, y).unwrap_or(nodata)
        })
        .collect();
    Ok(Grid::new(*a.geometry(), nodata, values)?)
}

/// Per-cell `sqrt(gx^2 + gy^2)`.
pub fn slope_magnitude(grad_x: &Grid, grad_y: &Grid) -> Result<Grid, TerrainError> {
    zip_map(grad_x, grad_y, |x, y| Some((x * x + y * y).sqrt()))
}

/// Per-cell `atan2(-gy, gx)`; flat cells have no aspect.
pub fn aspect(grad_x: &Grid, grad_y: &Grid) -> Result<Grid, TerrainError> {
    zip_map(grad_x, grad_y, |x, y| {
        if x == 0.0 && y == 0.0 {
            None
        } else {
            let theta = (-y).atan2(x);
            // atan2 returns -pi for (-0, negative); fold it onto +pi
            Some(if theta == -std::f64::consts::PI {
                std::f64::consts::PI
            } else {
                theta
            })
        }
    })
}

pub fn derive_all(dem: &Grid) -> Result<TerrainDerivatives, TerrainError> {
    let (grad_x, grad_y) = gradient(dem)?;
    let slope = slope_magnitude(&grad_x, &grad_y)?;
    let aspect = aspect(&grad_x, &grad_y)?;
    Ok(TerrainDerivatives {
        grad_x,
        grad_y,
        slope,
        aspect,
    })
}

/// Aggregates the DEM by `factor` and recomputes derivatives on the coarse
/// grid. Derivative grids are never averaged themselves.
pub fn derive_at_resolution(
    dem: &Grid,
    factor: usize,
) -> Result<(Grid, TerrainDerivatives), TerrainError> {
    let coarse = resample_block_mean(dem, factor)?;
    let deriv = derive_all(&coarse)?;
    Ok((coarse, deriv))
}

impl TerrainDerivatives {
    pub fn geometry(&self) -> &GridGeometry {
        self.slope.geometry()
    }
}
