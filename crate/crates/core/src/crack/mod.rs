//! Discrete jump sets, the dyadic cube lattice and good/bad node classification.

mod geometry;
pub mod io;
mod lattice;

pub use geometry::{clip_segment_box, clip_segment_polygon, AxisBox, ConvexPolygon, Region};
pub use lattice::{bad_region_inflation_check, classify_nodes, CubeKind, CubeLattice, NodeClassification};

use crate::fields::{Grid, VectorField};
use geometry::{norm, sub};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CrackError {
    #[error("lattice spacing 2/{k} is not a whole multiple of the grid spacing {h}")]
    ScaleMismatch { k: u32, h: f64 },
    #[error("scale k must be at least 4, got {0}")]
    InvalidScale(u32),
    #[error("threshold must lie in (0, 1), got {0}")]
    InvalidTheta(f64),
    #[error("facet {0} has zero length")]
    ZeroLength(usize),
    #[error("facet {0} does not lie on a dual grid line")]
    NotAligned(usize),
    #[error("facet dimension {found} does not match {expected}")]
    DimMismatch { expected: usize, found: usize },
}

/// A segment in 2D or a point in 1D (then `b == a` and only `a[0]` matters).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Facet {
    pub a: [f64; 2],
    pub b: [f64; 2],
    pub amplitude: Option<f64>,
}

impl Facet {
    pub fn segment(a: [f64; 2], b: [f64; 2]) -> Self {
        Facet { a, b, amplitude: None }
    }

    pub fn point(x: f64) -> Self {
        Facet {
            a: [x, 0.0],
            b: [x, 0.0],
            amplitude: None,
        }
    }

    pub fn with_amplitude(mut self, amp: f64) -> Self {
        self.amplitude = Some(amp);
        self
    }

    pub fn length(&self) -> f64 {
        norm(sub(self.b, self.a))
    }

    /// Unit normal: the tangent rotated a quarter turn counter-clockwise.
    pub fn normal(&self) -> [f64; 2] {
        let t = sub(self.b, self.a);
        let l = norm(t);
        if l == 0.0 {
            return [1.0, 0.0];
        }
        [-t[1] / l, t[0] / l]
    }

    pub fn is_horizontal(&self) -> bool {
        self.a[1] == self.b[1]
    }

    pub fn is_vertical(&self) -> bool {
        self.a[0] == self.b[0]
    }
}

/// Jump set: segments in 2D, points in 1D. Lengths are `H^{n-1}` measures, so a
/// 1D point weighs one.
#[derive(Clone, Debug, PartialEq)]
pub struct FacetSet {
    dim: usize,
    facets: Vec<Facet>,
}

impl FacetSet {
    pub fn empty(dim: usize) -> Self {
        FacetSet { dim, facets: Vec::new() }
    }

    pub fn new(dim: usize, facets: Vec<Facet>) -> Result<Self, CrackError> {
        if dim == 2 {
            if let Some(i) = facets.iter().position(|f| !(f.length() > 0.0)) {
                return Err(CrackError::ZeroLength(i));
            }
        }
        Ok(FacetSet { dim, facets })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn len(&self) -> usize {
        self.facets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facets.is_empty()
    }

    pub fn push(&mut self, f: Facet) {
        self.facets.push(f);
    }

    pub fn extend(&mut self, other: &FacetSet) {
        self.facets.extend_from_slice(&other.facets);
    }

    pub fn total_measure(&self) -> f64 {
        if self.dim == 1 {
            self.facets.len() as f64
        } else {
            self.facets.iter().map(|f| f.length()).sum()
        }
    }

    pub fn measure_in_box(&self, bx: &AxisBox) -> f64 {
        if self.dim == 1 {
            self.facets
                .iter()
                .filter(|f| f.a[0] >= bx.lo[0] && f.a[0] < bx.hi[0])
                .count() as f64
        } else {
            self.facets
                .iter()
                .map(|f| clip_segment_box(f.a, f.b, bx))
                .sum()
        }
    }

    /// Checks every facet sits on a dual line of `grid` (coordinate at a half-integer
    /// node offset) and is axis-aligned.
    pub fn check_aligned(&self, grid: &Grid) -> Result<(), CrackError> {
        let h = grid.h();
        let o = grid.origin();
        let dual = |x: f64, a: usize| {
            let s = (x - o[a]) / h - 0.5;
            (s - s.round()).abs() < 1e-9
        };
        for (i, f) in self.facets.iter().enumerate() {
            let ok = if self.dim == 1 {
                dual(f.a[0], 0)
            } else if f.is_horizontal() {
                dual(f.a[1], 1)
            } else if f.is_vertical() {
                dual(f.a[0], 0)
            } else {
                false
            };
            if !ok {
                return Err(CrackError::NotAligned(i));
            }
        }
        Ok(())
    }
}

/// Clipped facet length inside a box or polygon; additive over disjoint regions.
pub fn facet_measure(f: &FacetSet, region: &Region) -> f64 {
    match region {
        Region::Everywhere => f.total_measure(),
        Region::Box(b) => f.measure_in_box(b),
        Region::Polygon(p) => {
            if f.dim == 1 {
                f.facets
                    .iter()
                    .filter(|x| clip_segment_polygon([x.a[0], 0.0], [x.a[0], 0.0], p) > 0.0)
                    .count() as f64
            } else {
                f.facets
                    .iter()
                    .map(|x| clip_segment_polygon(x.a, x.b, p))
                    .sum()
            }
        }
    }
}

/// A grid edge whose endpoint values differ by more than the tolerance. The dual
/// facet crossing the edge has length `h` (clipped to the grid box).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JumpEdge {
    pub minus: usize,
    pub plus: usize,
    pub axis: usize,
    pub length: f64,
}

/// Edges of `grid` crossed by facets on dual lines, with the crossed length.
/// Node `minus` lies on the side opposite the axis direction.
pub fn crossed_edges(grid: &Grid, facets: &FacetSet) -> Vec<JumpEdge> {
    let h = grid.h();
    let o = grid.origin();
    let [nx, ny] = grid.node_counts();
    let mut out = Vec::new();
    if grid.dim() == 1 {
        for f in facets.facets() {
            let s = ((f.a[0] - o[0]) / h - 0.5).round();
            if s >= 0.0 && (s as usize) + 1 < nx {
                let i = s as usize;
                out.push(JumpEdge { minus: i, plus: i + 1, axis: 0, length: 1.0 });
            }
        }
        return out;
    }
    for f in facets.facets() {
        // axis across the facet, and the range of the facet along it
        let (across, along) = if f.is_horizontal() { (1, 0) } else { (0, 1) };
        let s = ((f.a[across] - o[across]) / h - 0.5).round();
        let n_across = if across == 0 { nx } else { ny };
        if s < 0.0 || (s as usize) + 1 >= n_across {
            continue;
        }
        let i_minus = s as usize;
        let (lo, hi) = if f.a[along] <= f.b[along] {
            (f.a[along], f.b[along])
        } else {
            (f.b[along], f.a[along])
        };
        let n_along = if along == 0 { nx } else { ny };
        let first = (((lo - o[along]) / h) - 0.5).ceil().max(0.0) as usize;
        for m in first..n_along {
            let c = o[along] + m as f64 * h;
            let cell_lo = (c - 0.5 * h).max(o[along]);
            let cell_hi = (c + 0.5 * h).min(o[along] + (n_along - 1) as f64 * h);
            if cell_lo >= hi {
                break;
            }
            let len = hi.min(cell_hi) - lo.max(cell_lo);
            if len <= 1e-12 * h {
                continue;
            }
            let (minus, plus) = if across == 0 {
                (grid.node_index(i_minus, m), grid.node_index(i_minus + 1, m))
            } else {
                (grid.node_index(m, i_minus), grid.node_index(m, i_minus + 1))
            };
            out.push(JumpEdge { minus, plus, axis: across, length: len });
        }
    }
    out
}

/// Dual facets of all grid edges `(p, q)` for which `jump(p, q)` returns an
/// amplitude. Facets are clipped to the grid box.
pub fn dual_facets(grid: &Grid, jump: impl Fn(usize, usize) -> Option<f64>) -> FacetSet {
    let h = grid.h();
    let [nx, ny] = grid.node_counts();
    let mut facets = Vec::new();
    if grid.dim() == 1 {
        for i in 0..nx - 1 {
            if let Some(d) = jump(i, i + 1) {
                let x = grid.node_coord(i)[0] + 0.5 * h;
                facets.push(Facet::point(x).with_amplitude(d));
            }
        }
        return FacetSet { dim: 1, facets };
    }
    let lo = grid.origin();
    let up = grid.upper();
    for j in 0..ny {
        for i in 0..nx {
            let p = grid.node_index(i, j);
            let c = grid.node_coord(p);
            if i + 1 < nx {
                if let Some(d) = jump(p, grid.node_index(i + 1, j)) {
                    let x = c[0] + 0.5 * h;
                    let y0 = (c[1] - 0.5 * h).max(lo[1]);
                    let y1 = (c[1] + 0.5 * h).min(up[1]);
                    facets.push(Facet::segment([x, y0], [x, y1]).with_amplitude(d));
                }
            }
            if j + 1 < ny {
                if let Some(d) = jump(p, grid.node_index(i, j + 1)) {
                    let y = c[1] + 0.5 * h;
                    let x0 = (c[0] - 0.5 * h).max(lo[0]);
                    let x1 = (c[0] + 0.5 * h).min(up[0]);
                    facets.push(Facet::segment([x0, y], [x1, y]).with_amplitude(d));
                }
            }
        }
    }
    FacetSet { dim: 2, facets }
}

/// Detected jump set of a nodal field: every grid edge whose end values differ by
/// more than `tol` contributes its dual facet.
pub fn detect_jumps(u: &VectorField, tol: f64) -> FacetSet {
    dual_facets(u.grid(), |p, q| {
        let a = u.get(p);
        let b = u.get(q);
        let d = norm([a[0] - b[0], a[1] - b[1]]);
        (d > tol).then_some(d)
    })
}

/// Cells whose interior a facet crosses. Bulk integrals skip these so that the
/// strain of a jump is not counted as elastic energy.
pub fn cracked_cells(grid: &Grid, facets: &FacetSet) -> Vec<bool> {
    let mut out = vec![false; grid.num_cells()];
    for e in crossed_edges(grid, facets) {
        let (i, j) = grid.node_ij(e.minus);
        if grid.dim() == 1 {
            out[i] = true;
            continue;
        }
        let [cx, cy] = grid.cell_counts();
        // the edge minus→plus is shared by the two cells on either side of it
        let a = if e.axis == 0 { j } else { i };
        for off in [0usize, 1] {
            if a + off == 0 {
                continue;
            }
            let s = a + off - 1;
            let (ci, cj) = if e.axis == 0 { (i, s) } else { (s, j) };
            if ci < cx && cj < cy {
                out[grid.cell_index(ci, cj)] = true;
            }
        }
    }
    out
}
