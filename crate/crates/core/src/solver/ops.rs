//! Cell stencils shared by the two half-steps.

use crate::fields::Grid;

/// Coefficients of the cell-centred derivatives: `∂_x f = Σ gx[k] f(corner k)`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Stencil {
    pub gx: [f64; 4],
    pub gy: [f64; 4],
    pub corners: usize,
}

impl Stencil {
    pub fn of(g: &Grid) -> Self {
        let h = g.h();
        if g.dim() == 1 {
            Stencil { gx: [-1.0 / h, 1.0 / h, 0.0, 0.0], gy: [0.0; 4], corners: 2 }
        } else {
            let s = 0.5 / h;
            Stencil { gx: [-s, s, -s, s], gy: [-s, -s, s, s], corners: 4 }
        }
    }

    /// Rows of the map from local displacement dofs (node-major, `dim`
    /// components) to `[xx, yy, xy]`.
    pub fn strain_rows(&self, dim: usize) -> Vec<[f64; 8]> {
        let mut b = vec![[0.0; 8]; if dim == 1 { 1 } else { 3 }];
        for k in 0..self.corners {
            if dim == 1 {
                b[0][k] = self.gx[k];
            } else {
                b[0][2 * k] = self.gx[k];
                b[1][2 * k + 1] = self.gy[k];
                b[2][2 * k] = 0.5 * self.gy[k];
                b[2][2 * k + 1] = 0.5 * self.gx[k];
            }
        }
        b
    }
}

/// Cells touching node `n`, with the corner slot the node takes in each.
pub(crate) fn node_cells(g: &Grid, n: usize) -> Vec<(usize, usize)> {
    let (i, j) = g.node_ij(n);
    let [cx, cy] = g.cell_counts();
    let mut out = Vec::with_capacity(4);
    if g.dim() == 1 {
        if i > 0 {
            out.push((i - 1, 1));
        }
        if i < cx {
            out.push((i, 0));
        }
        return out;
    }
    for (di, dj, k) in [(1usize, 1usize, 3usize), (0, 1, 2), (1, 0, 1), (0, 0, 0)] {
        if i >= di && j >= dj && i - di < cx && j - dj < cy {
            out.push((g.cell_index(i - di, j - dj), k));
        }
    }
    out
}
