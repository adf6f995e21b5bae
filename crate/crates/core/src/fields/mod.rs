//! Uniform-grid fields: node-based scalars and displacements, cell-based
//! symmetric strains, mollification and line slicing.

mod grid;
pub mod io;
mod mollifier;
mod slice;
mod strain;

pub use grid::Grid;
pub use mollifier::{mollify_scalar, mollify_vector, Mollifier};
pub use slice::{slice_field, Slice};
pub use strain::{cell_gradient, sym_gradient, SymTensorField};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("sample count {found} does not match grid (expected {expected})")]
    SizeMismatch { expected: usize, found: usize },
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("mollifier stencil at node {node} reaches outside the grid")]
    SupportViolation { node: usize },
    #[error("slice direction must be a unit vector")]
    NotUnit,
    #[error("slice line misses the grid")]
    EmptySlice,
    #[error("fields live on different grids")]
    GridMismatch,
}

fn check_finite(values: &[f64]) -> Result<(), FieldError> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(FieldError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Node-based scalar samples.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self, FieldError> {
        if values.len() != grid.num_nodes() {
            return Err(FieldError::SizeMismatch {
                expected: grid.num_nodes(),
                found: values.len(),
            });
        }
        check_finite(&values)?;
        Ok(ScalarField { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        ScalarField {
            grid,
            values: vec![c; grid.num_nodes()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = (0..grid.num_nodes()).map(|n| f(grid.node_coord(n))).collect();
        ScalarField { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, n: usize) -> f64 {
        self.values[n]
    }

    /// Cell averages of the corner values.
    pub fn cell_means(&self) -> Vec<f64> {
        let g = &self.grid;
        let m = g.corners_per_cell();
        (0..g.num_cells())
            .map(|c| {
                let cs = g.cell_corners(c);
                cs[..m].iter().map(|&n| self.values[n]).sum::<f64>() / m as f64
            })
            .collect()
    }
}

/// Node-based vector samples with `dim` components per node, interleaved.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    grid: Grid,
    data: Vec<f64>,
}

impl VectorField {
    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self, FieldError> {
        let expected = grid.num_nodes() * grid.dim();
        if data.len() != expected {
            return Err(FieldError::SizeMismatch {
                expected,
                found: data.len(),
            });
        }
        check_finite(&data)?;
        Ok(VectorField { grid, data })
    }

    pub fn zeros(grid: Grid) -> Self {
        VectorField {
            grid,
            data: vec![0.0; grid.num_nodes() * grid.dim()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let d = grid.dim();
        let mut data = Vec::with_capacity(grid.num_nodes() * d);
        for n in 0..grid.num_nodes() {
            let v = f(grid.node_coord(n));
            data.extend_from_slice(&v[..d]);
        }
        VectorField { grid, data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, n: usize) -> [f64; 2] {
        let d = self.dim();
        if d == 1 {
            [self.data[n], 0.0]
        } else {
            [self.data[2 * n], self.data[2 * n + 1]]
        }
    }

    pub fn set(&mut self, n: usize, v: [f64; 2]) {
        let d = self.dim();
        self.data[d * n..d * n + d].copy_from_slice(&v[..d]);
    }

    pub fn norm_at(&self, n: usize) -> f64 {
        let v = self.get(n);
        (v[0] * v[0] + v[1] * v[1]).sqrt()
    }

    /// Bilinear (linear in 1D) interpolation; `None` outside the closed grid box.
    pub fn interpolate(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let g = &self.grid;
        if !g.contains(p) {
            return None;
        }
        let o = g.origin();
        let h = g.h();
        let c = g.counts();
        let locate = |a: usize| -> (usize, f64) {
            let s = ((p[a] - o[a]) / h).clamp(0.0, c[a] as f64);
            let i = (s.floor() as usize).min(c[a] - 1);
            (i, s - i as f64)
        };
        let (i, tx) = locate(0);
        if g.dim() == 1 {
            let a = self.data[i];
            let b = self.data[i + 1];
            return Some([a + tx * (b - a), 0.0]);
        }
        let (j, ty) = locate(1);
        let v00 = self.get(g.node_index(i, j));
        let v10 = self.get(g.node_index(i + 1, j));
        let v01 = self.get(g.node_index(i, j + 1));
        let v11 = self.get(g.node_index(i + 1, j + 1));
        let mut out = [0.0; 2];
        for k in 0..2 {
            out[k] = (1.0 - tx) * (1.0 - ty) * v00[k]
                + tx * (1.0 - ty) * v10[k]
                + (1.0 - tx) * ty * v01[k]
                + tx * ty * v11[k];
        }
        Some(out)
    }

    /// Pointwise difference `self - other`.
    pub fn sub(&self, other: &VectorField) -> Result<VectorField, FieldError> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(VectorField {
            grid: self.grid,
            data,
        })
    }

    pub fn component(&self, k: usize) -> ScalarField {
        let d = self.dim();
        ScalarField {
            grid: self.grid,
            values: (0..self.grid.num_nodes()).map(|n| self.data[d * n + k]).collect(),
        }
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.grid.num_nodes()).map(|n| self.norm_at(n)).fold(0.0, f64::max)
    }
}
