//! Lattice of nested cubes at scale `k` and the good/bad node split.

use rayon::prelude::*;

use super::{AxisBox, CrackError, FacetSet};
use crate::fields::Grid;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CubeKind {
    /// side 2/k
    Small,
    /// side 4/k
    SmallTilde,
    /// side 8/k
    Large,
    /// side 16/k
    LargeTilde,
}

impl CubeKind {
    pub fn half_side(self, k: u32) -> f64 {
        let r = 1.0 / k as f64;
        match self {
            CubeKind::Small => r,
            CubeKind::SmallTilde => 2.0 * r,
            CubeKind::Large => 4.0 * r,
            CubeKind::LargeTilde => 8.0 * r,
        }
    }
}

/// Nodes `z ∈ (2/k)Z^n` with `z ∈ Ω + [-1/k, 1/k]^n`, stored row-major
/// (second axis outer).
#[derive(Clone, Debug, PartialEq)]
pub struct CubeLattice {
    dim: usize,
    k: u32,
    domain: AxisBox,
    m_lo: [i64; 2],
    m_hi: [i64; 2],
}

fn snap(t: f64) -> f64 {
    if (t - t.round()).abs() < 1e-9 {
        t.round()
    } else {
        t
    }
}

impl CubeLattice {
    pub fn new(dim: usize, domain: AxisBox, k: u32) -> Result<Self, CrackError> {
        if k < 4 {
            return Err(CrackError::InvalidScale(k));
        }
        let kf = k as f64;
        let mut m_lo = [0i64; 2];
        let mut m_hi = [0i64; 2];
        for a in 0..dim {
            m_lo[a] = snap((kf * domain.lo[a] - 1.0) / 2.0).floor() as i64 + 1;
            m_hi[a] = snap((kf * domain.hi[a] + 1.0) / 2.0).ceil() as i64 - 1;
        }
        Ok(CubeLattice { dim, k, domain, m_lo, m_hi })
    }

    /// Lattice for a domain resolved by `grid`; lattice lines must be grid lines.
    pub fn for_grid(grid: &Grid, domain: AxisBox, k: u32) -> Result<Self, CrackError> {
        let lat = Self::new(grid.dim(), domain, k)?;
        lat.check_alignment(grid)?;
        Ok(lat)
    }

    pub fn check_alignment(&self, grid: &Grid) -> Result<(), CrackError> {
        let h = grid.h();
        let ratio = self.spacing() / h;
        let mut ok = ratio >= 1.0 - 1e-9 && (ratio - ratio.round()).abs() < 1e-9;
        for a in 0..self.dim {
            let o = grid.origin()[a] / h;
            ok &= (o - o.round()).abs() < 1e-9;
        }
        if ok {
            Ok(())
        } else {
            Err(CrackError::ScaleMismatch { k: self.k, h })
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn domain(&self) -> &AxisBox {
        &self.domain
    }

    pub fn spacing(&self) -> f64 {
        2.0 / self.k as f64
    }

    fn extent(&self, a: usize) -> usize {
        (self.m_hi[a] - self.m_lo[a] + 1).max(0) as usize
    }

    pub fn len(&self) -> usize {
        if self.dim == 1 {
            self.extent(0)
        } else {
            self.extent(0) * self.extent(1)
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node_m(&self, idx: usize) -> [i64; 2] {
        let nx = self.extent(0);
        [self.m_lo[0] + (idx % nx) as i64, self.m_lo[1] + (idx / nx) as i64]
    }

    pub fn node(&self, idx: usize) -> [f64; 2] {
        let m = self.node_m(idx);
        let s = self.spacing();
        if self.dim == 1 {
            [m[0] as f64 * s, 0.0]
        } else {
            [m[0] as f64 * s, m[1] as f64 * s]
        }
    }

    pub fn index_of(&self, m: [i64; 2]) -> Option<usize> {
        for a in 0..self.dim {
            if m[a] < self.m_lo[a] || m[a] > self.m_hi[a] {
                return None;
            }
        }
        let nx = self.extent(0);
        Some((m[1] - self.m_lo[1]) as usize * nx + (m[0] - self.m_lo[0]) as usize)
    }

    pub fn cube(&self, idx: usize, kind: CubeKind) -> AxisBox {
        let mut b = AxisBox::cube(self.node(idx), kind.half_side(self.k));
        if self.dim == 1 {
            b.lo[1] = -1.0;
            b.hi[1] = 1.0;
        }
        b
    }

    /// Lattice offsets at ℓ∞-distance one step.
    fn neighbour_offsets(&self) -> Vec<[i64; 2]> {
        if self.dim == 1 {
            vec![[-1, 0], [1, 0]]
        } else {
            let mut v = Vec::with_capacity(8);
            for dj in -1..=1 {
                for di in -1..=1 {
                    if di != 0 || dj != 0 {
                        v.push([di, dj]);
                    }
                }
            }
            v
        }
    }

    /// Neighbours at ℓ∞-distance `2/k`; `None` marks a position outside the lattice.
    pub fn neighbours(&self, idx: usize) -> Vec<Option<usize>> {
        let m = self.node_m(idx);
        self.neighbour_offsets()
            .into_iter()
            .map(|o| self.index_of([m[0] + o[0], m[1] + o[1]]))
            .collect()
    }

    /// Nodes whose cube of the given kind contains `p` (open cube).
    pub fn nodes_near(&self, p: [f64; 2], kind: CubeKind) -> Vec<usize> {
        let r = kind.half_side(self.k);
        let s = self.spacing();
        let mut out = Vec::new();
        let lo = |a: usize| ((p[a] - r) / s).floor() as i64;
        let hi = |a: usize| ((p[a] + r) / s).ceil() as i64;
        let (j0, j1) = if self.dim == 1 { (0, 0) } else { (lo(1), hi(1)) };
        for mj in j0..=j1 {
            for mi in lo(0)..=hi(0) {
                if let Some(idx) = self.index_of([mi, mj]) {
                    let z = self.node(idx);
                    if (0..self.dim).all(|a| (p[a] - z[a]).abs() < r) {
                        out.push(idx);
                    }
                }
            }
        }
        out
    }
}

/// Good/bad labels for every lattice node plus the refined sets used in the
/// rough approximation.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeClassification {
    pub lattice: CubeLattice,
    pub theta: f64,
    /// Jump measure inside `Q_z`.
    pub measure: Vec<f64>,
    pub good: Vec<bool>,
    pub g1: Vec<bool>,
    pub g1_tilde: Vec<bool>,
    pub g2_tilde: Vec<bool>,
}

fn le_tol(m: f64, thr: f64) -> bool {
    m <= thr * (1.0 + 1e-12)
}

/// Labels node `z` good iff the jump measure in `Q_z` is at most `θ k^{-(n-1)}`.
pub fn classify_nodes(
    facets: &FacetSet,
    lattice: &CubeLattice,
    theta: f64,
) -> Result<NodeClassification, CrackError> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(CrackError::InvalidTheta(theta));
    }
    if facets.dim() != lattice.dim() {
        return Err(CrackError::DimMismatch {
            expected: lattice.dim(),
            found: facets.dim(),
        });
    }
    let measure: Vec<f64> = (0..lattice.len())
        .into_par_iter()
        .map(|i| facets.measure_in_box(&lattice.cube(i, CubeKind::Large)))
        .collect();
    Ok(label(lattice.clone(), theta, measure))
}

fn thresholds(lattice: &CubeLattice, theta: f64) -> (f64, f64) {
    let k = lattice.k() as f64;
    let n = lattice.dim() as f64;
    (theta * k.powf(-(n - 1.0)), k.powf(-(n - 0.5)))
}

fn label(lattice: CubeLattice, theta: f64, measure: Vec<f64>) -> NodeClassification {
    let (thr, thr1) = thresholds(&lattice, theta);
    let good: Vec<bool> = measure.iter().map(|&m| le_tol(m, thr)).collect();
    let g1: Vec<bool> = measure
        .iter()
        .zip(&good)
        .map(|(&m, &g)| g && le_tol(m, thr1))
        .collect();
    let (g1_tilde, g2_tilde) = derived_sets(&lattice, &good, &g1);
    NodeClassification {
        lattice,
        theta,
        measure,
        good,
        g1,
        g1_tilde,
        g2_tilde,
    }
}

fn derived_sets(lattice: &CubeLattice, good: &[bool], g1: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let mut t1 = vec![false; good.len()];
    let mut t2 = vec![false; good.len()];
    for i in 0..good.len() {
        if !good[i] {
            continue;
        }
        let nb = lattice.neighbours(i);
        t1[i] = nb.iter().all(|n| n.map_or(false, |j| g1[j]));
        t2[i] = nb.iter().any(|n| n.map_or(false, |j| good[j] && !g1[j]));
    }
    (t1, t2)
}

impl NodeClassification {
    pub fn k(&self) -> u32 {
        self.lattice.k()
    }

    pub fn dim(&self) -> usize {
        self.lattice.dim()
    }

    pub fn bad_nodes(&self) -> Vec<usize> {
        (0..self.good.len()).filter(|&i| !self.good[i]).collect()
    }

    pub fn good_nodes(&self) -> Vec<usize> {
        (0..self.good.len()).filter(|&i| self.good[i]).collect()
    }

    pub fn num_bad(&self) -> usize {
        self.good.iter().filter(|&&g| !g).count()
    }

    /// `p` lies in the bad region (union of open `Q_z` over bad `z`).
    pub fn in_bad_region(&self, p: [f64; 2]) -> bool {
        self.lattice
            .nodes_near(p, CubeKind::Large)
            .into_iter()
            .any(|i| !self.good[i])
    }

    /// `p` lies in the good region (union of open `q_z` over good `z`).
    pub fn in_good_region(&self, p: [f64; 2]) -> bool {
        self.lattice
            .nodes_near(p, CubeKind::Small)
            .into_iter()
            .any(|i| self.good[i])
    }

    /// Volume of the bad region, optionally intersected with a box. The region is
    /// a union of lattice cells of side `2/k`, so this is exact.
    pub fn bad_region_volume(&self, within: Option<&AxisBox>) -> f64 {
        let dim = self.dim();
        let s = self.lattice.spacing();
        let mut cells = std::collections::BTreeSet::new();
        for i in self.bad_nodes() {
            let m = self.lattice.node_m(i);
            let jr = if dim == 1 { 0..=0 } else { m[1] - 2..=m[1] + 1 };
            for cj in jr {
                for ci in m[0] - 2..=m[0] + 1 {
                    cells.insert((cj, ci));
                }
            }
        }
        cells
            .into_iter()
            .map(|(cj, ci)| {
                let mut b = AxisBox::new(
                    [ci as f64 * s, cj as f64 * s],
                    [(ci + 1) as f64 * s, (cj + 1) as f64 * s],
                );
                if dim == 1 {
                    b.lo[1] = -1.0;
                    b.hi[1] = 1.0;
                }
                match within {
                    None => b.volume(dim),
                    Some(w) => b.intersection(w, dim).map_or(0.0, |x| x.volume(dim)),
                }
            })
            .sum()
    }

    /// Grid nodes inside the bad region.
    pub fn bad_node_mask(&self, grid: &Grid) -> Vec<bool> {
        (0..grid.num_nodes())
            .into_par_iter()
            .map(|n| self.in_bad_region(grid.node_coord(n)))
            .collect()
    }

    /// Labels agree with the stored measures and thresholds.
    pub fn is_consistent(&self) -> bool {
        let (thr, thr1) = thresholds(&self.lattice, self.theta);
        let n = self.lattice.len();
        if [self.measure.len(), self.good.len(), self.g1.len(), self.g1_tilde.len(), self.g2_tilde.len()]
            .iter()
            .any(|&l| l != n)
        {
            return false;
        }
        for i in 0..n {
            if self.good[i] != le_tol(self.measure[i], thr) {
                return false;
            }
            if self.g1[i] != (self.good[i] && le_tol(self.measure[i], thr1)) {
                return false;
            }
        }
        let (t1, t2) = derived_sets(&self.lattice, &self.good, &self.g1);
        t1 == self.g1_tilde && t2 == self.g2_tilde
    }
}

/// Checks `(Ω̄ ∖ Ω_g) + B(0, 1/k) ⊂ Ω̃_b` on a sample lattice of spacing `1/(4k)`,
/// after confirming the labels match the stored measurements.
pub fn bad_region_inflation_check(c: &NodeClassification) -> bool {
    if !c.is_consistent() {
        return false;
    }
    let dim = c.dim();
    let k = c.k() as f64;
    let r = 1.0 / k;
    let s = r / 4.0;
    let dom = c.lattice.domain();
    let count = |a: usize| ((dom.hi[a] - dom.lo[a]) / s).ceil().max(1.0) as usize;
    let nx = count(0);
    let ny = if dim == 1 { 1 } else { count(1) };
    let coord = |a: usize, i: usize| (dom.lo[a] + (i as f64 + 0.5) * s).min(dom.hi[a]);
    let offsets: Vec<[f64; 2]> = {
        let steps = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let mut v = Vec::new();
        for &dy in if dim == 1 { &steps[2..3] } else { &steps[..] } {
            for &dx in &steps {
                // stay strictly inside the closed ball's bounding box
                v.push([dx * r * (1.0 - 1e-9), dy * r * (1.0 - 1e-9)]);
            }
        }
        v
    };
    (0..nx * ny).into_par_iter().all(|idx| {
        let p = [coord(0, idx % nx), if dim == 1 { 0.0 } else { coord(1, idx / nx) }];
        if c.in_good_region(p) {
            return true;
        }
        offsets
            .iter()
            .all(|o| c.in_bad_region([p[0] + o[0], p[1] + o[1]]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crack::Facet;

    fn unit() -> AxisBox {
        AxisBox::new([0.0, 0.0], [1.0, 1.0])
    }

    fn straight_crack() -> FacetSet {
        FacetSet::new(2, vec![Facet::segment([0.25, 0.5 + 1.0 / 512.0], [0.75, 0.5 + 1.0 / 512.0])]).unwrap()
    }

    #[test]
    fn lattice_nodes_cover_domain() {
        let l = CubeLattice::new(2, unit(), 8).unwrap();
        assert_eq!(l.len(), 25);
        assert_eq!(l.node(0), [0.0, 0.0]);
        assert_eq!(l.node(24), [1.0, 1.0]);
        let l = CubeLattice::new(1, AxisBox::new([0.0, 0.0], [1.0, 0.0]), 16).unwrap();
        assert_eq!(l.len(), 9);
        assert_eq!(CubeLattice::new(2, unit(), 3), Err(CrackError::InvalidScale(3)));
    }

    #[test]
    fn nested_cubes() {
        let l = CubeLattice::new(2, unit(), 16).unwrap();
        for i in 0..l.len() {
            let q = l.cube(i, CubeKind::Small);
            let qt = l.cube(i, CubeKind::SmallTilde);
            let big = l.cube(i, CubeKind::Large);
            let bt = l.cube(i, CubeKind::LargeTilde);
            assert!(qt.contains_box(&q, 2) && big.contains_box(&qt, 2) && bt.contains_box(&big, 2));
            assert!((q.hi[0] - q.lo[0] - 2.0 / 16.0).abs() < 1e-15);
        }
    }

    #[test]
    fn alignment() {
        let g = Grid::rect([0.0, 0.0], 1.0 / 64.0, 64, 64).unwrap();
        assert!(CubeLattice::for_grid(&g, unit(), 16).is_ok());
        let g = Grid::rect([0.0, 0.0], 0.1, 10, 10).unwrap();
        assert!(matches!(
            CubeLattice::for_grid(&g, unit(), 16),
            Err(CrackError::ScaleMismatch { .. })
        ));
    }

    #[test]
    fn empty_crack() {
        let l = CubeLattice::new(2, unit(), 8).unwrap();
        let c = classify_nodes(&FacetSet::empty(2), &l, 0.1).unwrap();
        assert_eq!(c.num_bad(), 0);
        assert_eq!(c.bad_region_volume(None), 0.0);
        assert!(bad_region_inflation_check(&c));
        assert!(c.g1_tilde[12]);
    }

    #[test]
    fn straight_crack_bounds() {
        let f = straight_crack();
        let len = f.total_measure();
        for &k in &[8u32, 16, 32] {
            let kf = k as f64;
            let l = CubeLattice::new(2, unit(), k).unwrap();
            let c = classify_nodes(&f, &l, 0.1).unwrap();
            assert!(c.num_bad() as f64 <= len * kf / 0.1);
            assert!(c.bad_region_volume(None) <= 256.0 * len / (kf * 0.1));
            for &theta in &[0.05, 0.2, 0.4] {
                let c = classify_nodes(&f, &l, theta).unwrap();
                assert!(c.num_bad() as f64 * theta / kf <= 64.0 * len);
                assert!(bad_region_inflation_check(&c));
            }
        }
    }

    #[test]
    fn relabelled_node_fails_check() {
        let l = CubeLattice::new(2, unit(), 16).unwrap();
        let mut c = classify_nodes(&straight_crack(), &l, 0.1).unwrap();
        assert!(bad_region_inflation_check(&c));
        let b = c.bad_nodes()[0];
        c.good[b] = true;
        assert!(!bad_region_inflation_check(&c));
    }

    #[test]
    fn bad_theta() {
        let l = CubeLattice::new(2, unit(), 8).unwrap();
        assert!(classify_nodes(&FacetSet::empty(2), &l, 1.0).is_err());
        assert!(classify_nodes(&FacetSet::empty(2), &l, 0.0).is_err());
    }
}
