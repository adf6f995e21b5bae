use super::FieldError;

/// Uniform rectangular lattice in one or two dimensions.
///
/// Nodes sit at `origin + h * (i, j)` for `0 <= i <= counts[0]` (and `j` likewise
/// in 2D). Cells are the squares between four neighbouring nodes. Nodes and cells
/// are numbered row-major with the first axis varying fastest.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    origin: [f64; 2],
    h: f64,
    counts: [usize; 2],
}

impl Grid {
    pub fn new(dim: usize, origin: [f64; 2], h: f64, counts: [usize; 2]) -> Result<Self, FieldError> {
        if dim != 1 && dim != 2 {
            return Err(FieldError::InvalidGrid(format!("dimension {dim} not supported")));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(FieldError::InvalidGrid(format!("spacing must be positive, got {h}")));
        }
        for a in 0..dim {
            if counts[a] < 2 {
                return Err(FieldError::InvalidGrid(format!(
                    "need at least 2 cells per axis, axis {a} has {}",
                    counts[a]
                )));
            }
            if !origin[a].is_finite() {
                return Err(FieldError::InvalidGrid("origin must be finite".into()));
            }
        }
        let (origin, counts) = if dim == 1 {
            ([origin[0], 0.0], [counts[0], 0])
        } else {
            (origin, counts)
        };
        Ok(Grid { dim, origin, h, counts })
    }

    pub fn line(x0: f64, h: f64, cells: usize) -> Result<Self, FieldError> {
        Self::new(1, [x0, 0.0], h, [cells, 0])
    }

    pub fn rect(origin: [f64; 2], h: f64, nx: usize, ny: usize) -> Result<Self, FieldError> {
        Self::new(2, origin, h, [nx, ny])
    }

    /// Grid covering `[lo, hi]` (per axis) with spacing `h`; the extent must be a
    /// whole number of cells.
    pub fn covering(dim: usize, lo: [f64; 2], hi: [f64; 2], h: f64) -> Result<Self, FieldError> {
        let mut counts = [0usize; 2];
        for a in 0..dim {
            let n = (hi[a] - lo[a]) / h;
            let r = n.round();
            if (n - r).abs() > 1e-9 * n.max(1.0) {
                return Err(FieldError::InvalidGrid(format!(
                    "extent {} on axis {a} is not a multiple of h = {h}",
                    hi[a] - lo[a]
                )));
            }
            counts[a] = r as usize;
        }
        Self::new(dim, lo, h, counts)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn origin(&self) -> [f64; 2] {
        self.origin
    }

    /// Cells per axis (the second entry is 0 in 1D).
    pub fn counts(&self) -> [usize; 2] {
        self.counts
    }

    /// Nodes per axis (the second entry is 1 in 1D).
    pub fn node_counts(&self) -> [usize; 2] {
        if self.dim == 1 {
            [self.counts[0] + 1, 1]
        } else {
            [self.counts[0] + 1, self.counts[1] + 1]
        }
    }

    pub fn cell_counts(&self) -> [usize; 2] {
        if self.dim == 1 {
            [self.counts[0], 1]
        } else {
            self.counts
        }
    }

    pub fn num_nodes(&self) -> usize {
        let n = self.node_counts();
        n[0] * n[1]
    }

    pub fn num_cells(&self) -> usize {
        let c = self.cell_counts();
        c[0] * c[1]
    }

    /// Upper corner of the grid box.
    pub fn upper(&self) -> [f64; 2] {
        [
            self.origin[0] + self.h * self.counts[0] as f64,
            self.origin[1] + self.h * self.counts[1] as f64,
        ]
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim as i32)
    }

    /// Lebesgue measure of the grid box.
    pub fn measure(&self) -> f64 {
        self.cell_volume() * self.num_cells() as f64
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + self.node_counts()[0] * j
    }

    pub fn node_ij(&self, n: usize) -> (usize, usize) {
        let nx = self.node_counts()[0];
        (n % nx, n / nx)
    }

    pub fn node_coord(&self, n: usize) -> [f64; 2] {
        let (i, j) = self.node_ij(n);
        let x = self.origin[0] + self.h * i as f64;
        if self.dim == 1 {
            [x, 0.0]
        } else {
            [x, self.origin[1] + self.h * j as f64]
        }
    }

    pub fn cell_index(&self, i: usize, j: usize) -> usize {
        i + self.cell_counts()[0] * j
    }

    pub fn cell_ij(&self, c: usize) -> (usize, usize) {
        let cx = self.cell_counts()[0];
        (c % cx, c / cx)
    }

    pub fn cell_center(&self, c: usize) -> [f64; 2] {
        let (i, j) = self.cell_ij(c);
        let x = self.origin[0] + self.h * (i as f64 + 0.5);
        if self.dim == 1 {
            [x, 0.0]
        } else {
            [x, self.origin[1] + self.h * (j as f64 + 0.5)]
        }
    }

    /// Corner nodes of a cell: `(i,j), (i+1,j), (i,j+1), (i+1,j+1)`; only the first
    /// two are meaningful in 1D.
    pub fn cell_corners(&self, c: usize) -> [usize; 4] {
        let (i, j) = self.cell_ij(c);
        if self.dim == 1 {
            [i, i + 1, i, i + 1]
        } else {
            [
                self.node_index(i, j),
                self.node_index(i + 1, j),
                self.node_index(i, j + 1),
                self.node_index(i + 1, j + 1),
            ]
        }
    }

    pub fn corners_per_cell(&self) -> usize {
        1 << self.dim
    }

    /// Lumped quadrature weight of a node (its share of the adjacent cells).
    pub fn node_weight(&self, n: usize) -> f64 {
        let (i, j) = self.node_ij(n);
        let mut w = self.cell_volume();
        if i == 0 || i == self.counts[0] {
            w *= 0.5;
        }
        if self.dim == 2 && (j == 0 || j == self.counts[1]) {
            w *= 0.5;
        }
        w
    }

    pub fn is_boundary_node(&self, n: usize) -> bool {
        let (i, j) = self.node_ij(n);
        i == 0 || i == self.counts[0] || (self.dim == 2 && (j == 0 || j == self.counts[1]))
    }

    /// Nearest node to a point, if the point lies in the closed grid box.
    pub fn nearest_node(&self, p: [f64; 2]) -> Option<usize> {
        let mut ij = [0usize; 2];
        for a in 0..self.dim {
            let s = (p[a] - self.origin[a]) / self.h;
            if s < -1e-9 || s > self.counts[a] as f64 + 1e-9 {
                return None;
            }
            ij[a] = (s.round().max(0.0) as usize).min(self.counts[a]);
        }
        Some(self.node_index(ij[0], ij[1]))
    }

    /// Whether a point lies in the closed grid box (with a tiny tolerance).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let tol = 1e-12 * self.h;
        let up = self.upper();
        (0..self.dim).all(|a| p[a] >= self.origin[a] - tol && p[a] <= up[a] + tol)
    }

    /// Node offsets (in index units) as an integer pair for a node.
    pub fn node_ij_signed(&self, n: usize) -> [i64; 2] {
        let (i, j) = self.node_ij(n);
        [i as i64, j as i64]
    }

    /// Index of the node at integer position `(i, j)` if inside the grid.
    pub fn node_at(&self, i: i64, j: i64) -> Option<usize> {
        let nc = self.node_counts();
        if i < 0 || j < 0 || i as usize >= nc[0] || j as usize >= nc[1] {
            None
        } else {
            Some(self.node_index(i as usize, j as usize))
        }
    }

    /// Nodes in the closed box `[lo, hi]` (tolerance `1e-9 h`), row-major.
    pub fn nodes_in(&self, lo: [f64; 2], hi: [f64; 2]) -> Vec<usize> {
        let nc = self.node_counts();
        let tol = 1e-9;
        let range = |a: usize| -> Option<(usize, usize)> {
            if a >= self.dim {
                return Some((0, 0));
            }
            let s0 = ((lo[a] - self.origin[a]) / self.h - tol).ceil().max(0.0);
            let s1 = ((hi[a] - self.origin[a]) / self.h + tol).floor();
            if s1 < s0 || s1 < 0.0 {
                return None;
            }
            Some((s0 as usize, (s1 as usize).min(nc[a] - 1)))
        };
        let (Some((i0, i1)), Some((j0, j1))) = (range(0), range(1)) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                out.push(self.node_index(i, j));
            }
        }
        out
    }

    /// Cells whose centre lies in the open box `(lo, hi)`, row-major.
    pub fn cells_in(&self, lo: [f64; 2], hi: [f64; 2]) -> Vec<usize> {
        let cc = self.cell_counts();
        let range = |a: usize| -> Option<(usize, usize)> {
            if a >= self.dim {
                return Some((0, 0));
            }
            // centre index s satisfies lo < origin + (s + 1/2) h < hi
            let s0 = ((lo[a] - self.origin[a]) / self.h - 0.5).floor() + 1.0;
            let s1 = ((hi[a] - self.origin[a]) / self.h - 0.5).ceil() - 1.0;
            let s0 = s0.max(0.0);
            if s1 < s0 {
                return None;
            }
            Some((s0 as usize, (s1 as usize).min(cc[a] - 1)))
        };
        let (Some((i0, i1)), Some((j0, j1))) = (range(0), range(1)) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        for j in j0..=j1 {
            for i in i0..=i1 {
                out.push(self.cell_index(i, j));
            }
        }
        out
    }

    /// Structural compatibility (same lattice) with another grid.
    pub fn same_as(&self, other: &Grid) -> bool {
        self == other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(Grid::line(0.0, 0.0, 4).is_err());
        assert!(Grid::line(0.0, 0.1, 1).is_err());
        assert!(Grid::rect([0.0, 0.0], 0.1, 4, 1).is_err());
        assert!(Grid::new(3, [0.0; 2], 0.1, [4, 4]).is_err());
    }

    #[test]
    fn measure_and_indexing() {
        let g = Grid::rect([0.0, 0.0], 0.25, 4, 2).unwrap();
        assert_eq!(g.num_nodes(), 15);
        assert_eq!(g.num_cells(), 8);
        assert!((g.measure() - 0.5).abs() < 1e-15);
        let n = g.node_index(3, 2);
        assert_eq!(g.node_coord(n), [0.75, 0.5]);
        assert_eq!(g.cell_corners(g.cell_index(1, 1)), [6, 7, 11, 12]);
        let total: f64 = (0..g.num_nodes()).map(|n| g.node_weight(n)).sum();
        assert!((total - g.measure()).abs() < 1e-14);
    }

    #[test]
    fn covering_requires_whole_cells() {
        assert!(Grid::covering(2, [0.0, 0.0], [1.0, 0.5], 0.125).is_ok());
        assert!(Grid::covering(2, [0.0, 0.0], [1.0, 0.3], 0.125).is_err());
    }
}
