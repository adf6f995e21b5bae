use super::{FieldError, Grid, ScalarField, VectorField};

/// Cell-based symmetric tensor samples. Components are `[xx]` in 1D and
/// `[xx, yy, xy]` in 2D, so symmetry holds by storage.
#[derive(Clone, Debug, PartialEq)]
pub struct SymTensorField {
    grid: Grid,
    data: Vec<f64>,
}

impl SymTensorField {
    pub fn components(dim: usize) -> usize {
        dim * (dim + 1) / 2
    }

    pub fn new(grid: Grid, data: Vec<f64>) -> Result<Self, FieldError> {
        let expected = grid.num_cells() * Self::components(grid.dim());
        if data.len() != expected {
            return Err(FieldError::SizeMismatch {
                expected,
                found: data.len(),
            });
        }
        super::check_finite(&data)?;
        Ok(SymTensorField { grid, data })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// `[xx, yy, xy]` (zeros for absent components in 1D).
    pub fn get(&self, c: usize) -> [f64; 3] {
        if self.grid.dim() == 1 {
            [self.data[c], 0.0, 0.0]
        } else {
            [self.data[3 * c], self.data[3 * c + 1], self.data[3 * c + 2]]
        }
    }

    /// Frobenius norm of the tensor in cell `c`.
    pub fn norm_at(&self, c: usize) -> f64 {
        frobenius(self.get(c))
    }

    /// `e ξ · ξ` in cell `c`.
    pub fn contract(&self, c: usize, xi: [f64; 2]) -> f64 {
        let e = self.get(c);
        e[0] * xi[0] * xi[0] + e[1] * xi[1] * xi[1] + 2.0 * e[2] * xi[0] * xi[1]
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.grid.num_cells()).map(|c| self.norm_at(c)).fold(0.0, f64::max)
    }
}

pub(crate) fn frobenius(e: [f64; 3]) -> f64 {
    (e[0] * e[0] + e[1] * e[1] + 2.0 * e[2] * e[2]).sqrt()
}

/// Cell-centred gradient of interleaved node data with `ncomp` components,
/// component `k`. Exact for affine data.
pub(crate) fn cell_grad_raw(grid: &Grid, data: &[f64], ncomp: usize, k: usize, c: usize) -> [f64; 2] {
    let n = grid.cell_corners(c);
    let h = grid.h();
    let v = |i: usize| data[ncomp * n[i] + k];
    if grid.dim() == 1 {
        [(v(1) - v(0)) / h, 0.0]
    } else {
        let dx = ((v(1) - v(0)) + (v(3) - v(2))) / (2.0 * h);
        let dy = ((v(2) - v(0)) + (v(3) - v(1))) / (2.0 * h);
        [dx, dy]
    }
}

/// Cell strain `[xx, yy, xy]` from interleaved displacement data.
pub(crate) fn cell_strain_raw(grid: &Grid, data: &[f64], c: usize) -> [f64; 3] {
    if grid.dim() == 1 {
        let g = cell_grad_raw(grid, data, 1, 0, c);
        [g[0], 0.0, 0.0]
    } else {
        let g1 = cell_grad_raw(grid, data, 2, 0, c);
        let g2 = cell_grad_raw(grid, data, 2, 1, c);
        [g1[0], g2[1], 0.5 * (g1[1] + g2[0])]
    }
}

/// Symmetric gradient `e(u) = (∇u + ∇uᵀ)/2`, one value per cell from the
/// `2^dim` surrounding nodes.
pub fn sym_gradient(u: &VectorField) -> SymTensorField {
    let g = *u.grid();
    let nc = SymTensorField::components(g.dim());
    let mut data = Vec::with_capacity(g.num_cells() * nc);
    for c in 0..g.num_cells() {
        let e = cell_strain_raw(&g, u.data(), c);
        data.extend_from_slice(&e[..nc]);
    }
    SymTensorField { grid: g, data }
}

/// Cell-centred gradient of a scalar field.
pub fn cell_gradient(f: &ScalarField) -> Vec<[f64; 2]> {
    let g = f.grid();
    (0..g.num_cells())
        .map(|c| cell_grad_raw(g, f.values(), 1, 0, c))
        .collect()
}
