//! Rigid-affine fitting with an exceptional set, and the measured constants of the
//! Korn–Poincaré inequality and of the overlap estimate between neighbouring fits.

use crate::crack::{AxisBox, ConvexPolygon};
use crate::fields::{sym_gradient, Grid, VectorField};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KornError {
    #[error("cube holds {found} nodes, at least {needed} needed for a rigid fit")]
    DegenerateCube { found: usize, needed: usize },
    #[error("strain vanishes on the cube but the residual does not")]
    ZeroStrain,
    #[error("cubes do not intersect")]
    EmptyIntersection,
}

/// `x ↦ b + A x` with `A = [[0, -w], [w, 0]]` (so `A` is skew and `e(a) = 0`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidAffineMap {
    pub dim: usize,
    pub b: [f64; 2],
    pub w: f64,
}

impl RigidAffineMap {
    pub fn zero(dim: usize) -> Self {
        RigidAffineMap { dim, b: [0.0; 2], w: 0.0 }
    }

    pub fn translation(dim: usize, b: [f64; 2]) -> Self {
        RigidAffineMap { dim, b, w: 0.0 }
    }

    pub fn new(dim: usize, b: [f64; 2], w: f64) -> Self {
        if dim == 1 {
            RigidAffineMap { dim, b: [b[0], 0.0], w: 0.0 }
        } else {
            RigidAffineMap { dim, b, w }
        }
    }

    pub fn skew(&self) -> [[f64; 2]; 2] {
        [[0.0, -self.w], [self.w, 0.0]]
    }

    pub fn eval(&self, x: [f64; 2]) -> [f64; 2] {
        if self.dim == 1 {
            [self.b[0], 0.0]
        } else {
            [self.b[0] - self.w * x[1], self.b[1] + self.w * x[0]]
        }
    }

    pub fn add(&self, o: &RigidAffineMap) -> RigidAffineMap {
        RigidAffineMap::new(self.dim, [self.b[0] + o.b[0], self.b[1] + o.b[1]], self.w + o.w)
    }

    pub fn sub(&self, o: &RigidAffineMap) -> RigidAffineMap {
        RigidAffineMap::new(self.dim, [self.b[0] - o.b[0], self.b[1] - o.b[1]], self.w - o.w)
    }

    /// Field sampled from the map.
    pub fn to_field(&self, grid: Grid) -> VectorField {
        let m = *self;
        VectorField::from_fn(grid, move |x| m.eval(x))
    }
}

fn needed_nodes(dim: usize) -> usize {
    dim * (dim + 1) / 2 + dim
}

/// Least-squares rigid map over the given nodes.
pub fn fit_nodes(u: &VectorField, nodes: &[usize]) -> Result<RigidAffineMap, KornError> {
    let g = u.grid();
    let dim = g.dim();
    let needed = needed_nodes(dim);
    if nodes.len() < needed {
        return Err(KornError::DegenerateCube { found: nodes.len(), needed });
    }
    let n = nodes.len() as f64;
    let mut xc = [0.0; 2];
    let mut uc = [0.0; 2];
    for &i in nodes {
        let x = g.node_coord(i);
        let v = u.get(i);
        for a in 0..2 {
            xc[a] += x[a];
            uc[a] += v[a];
        }
    }
    for a in 0..2 {
        xc[a] /= n;
        uc[a] /= n;
    }
    if dim == 1 {
        return Ok(RigidAffineMap::translation(1, [uc[0], 0.0]));
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &i in nodes {
        let x = g.node_coord(i);
        let v = u.get(i);
        let (dx, dy) = (x[0] - xc[0], x[1] - xc[1]);
        let (du, dv) = (v[0] - uc[0], v[1] - uc[1]);
        num += dv * dx - du * dy;
        den += dx * dx + dy * dy;
    }
    let spread = g.h() * g.h() * 1e-12;
    if den <= spread {
        return Err(KornError::DegenerateCube { found: nodes.len(), needed });
    }
    let w = num / den;
    Ok(RigidAffineMap::new(2, [uc[0] + w * xc[1], uc[1] - w * xc[0]], w))
}

/// Least-squares rigid map over the nodes of the closed cube `q`.
pub fn fit_rigid_affine(u: &VectorField, q: &AxisBox) -> Result<RigidAffineMap, KornError> {
    fit_nodes(u, &u.grid().nodes_in(q.lo, q.hi))
}

fn deviation(u: &VectorField, a: &RigidAffineMap, n: usize) -> f64 {
    let x = u.grid().node_coord(n);
    let v = u.get(n);
    let m = a.eval(x);
    ((v[0] - m[0]).powi(2) + (v[1] - m[1]).powi(2)).sqrt()
}

fn cell_mean(u: &VectorField, c: usize, f: impl Fn(usize) -> f64) -> f64 {
    let g = u.grid();
    let k = g.corners_per_cell();
    g.cell_corners(c)[..k].iter().map(|&n| f(n)).sum::<f64>() / k as f64
}

/// Exceptional cells of a cube.
#[derive(Clone, Debug, PartialEq)]
pub struct ExceptionalSet {
    pub cells: Vec<usize>,
    pub volume: f64,
    /// The budget swallowed the whole cube.
    pub vacuous: bool,
}

/// Greedy selection: cells of `qp` ordered by decreasing cell-averaged `|u - a|`
/// (ties by index) are taken until the next one would exceed the budget. Cells
/// where `u = a` up to rounding are never taken.
pub fn exceptional_set(u: &VectorField, a: &RigidAffineMap, qp: &AxisBox, budget: f64) -> ExceptionalSet {
    let g = u.grid();
    let cells = g.cells_in(qp.lo, qp.hi);
    let vol = g.cell_volume();
    // deviations at rounding level count as exact agreement
    let zero = 1e-12 * u.max_norm().max(1.0);
    let mut dev: Vec<(f64, usize)> = cells
        .iter()
        .map(|&c| (cell_mean(u, c, |n| deviation(u, a, n)), c))
        .filter(|&(d, _)| d > zero)
        .collect();
    if dev.is_empty() {
        return ExceptionalSet { cells: Vec::new(), volume: 0.0, vacuous: false };
    }
    let total = vol * cells.len() as f64;
    if budget >= total * (1.0 - 1e-12) {
        return ExceptionalSet { cells, volume: total, vacuous: true };
    }
    dev.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut out = Vec::new();
    let mut used = 0.0;
    for (_, c) in dev {
        if used + vol > budget * (1.0 + 1e-12) {
            break;
        }
        used += vol;
        out.push(c);
    }
    out.sort_unstable();
    ExceptionalSet { cells: out, volume: used, vacuous: false }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub map: RigidAffineMap,
    pub omega: ExceptionalSet,
    /// `(∫_{Q'∖ω} |u-a|^p)^{1/p}`
    pub residual_lp: f64,
    /// `∫_{Q'∖ω} (|u-a|^p)^{1*}` with `1* = n/(n-1)`; in 1D the sup of `|u-a|^p`.
    pub residual_1star: f64,
    pub budget_used: f64,
    pub rounds: usize,
}

/// Residual integrals of `u - a` over the cells of `qp` outside `omega`.
pub fn residuals(u: &VectorField, a: &RigidAffineMap, qp: &AxisBox, omega: &[usize], p: f64) -> (f64, f64) {
    let g = u.grid();
    let vol = g.cell_volume();
    let star = if g.dim() == 1 { f64::INFINITY } else { g.dim() as f64 / (g.dim() as f64 - 1.0) };
    let (mut lp, mut ls) = (0.0, 0.0f64);
    for c in g.cells_in(qp.lo, qp.hi) {
        if omega.binary_search(&c).is_ok() {
            continue;
        }
        lp += vol * cell_mean(u, c, |n| deviation(u, a, n).powf(p));
        if star.is_infinite() {
            ls = ls.max(cell_mean(u, c, |n| deviation(u, a, n).powf(p)));
        } else {
            ls += vol * cell_mean(u, c, |n| deviation(u, a, n).powf(p * star));
        }
    }
    (lp.powf(1.0 / p), ls)
}

/// Rigid fit on `q` with exceptional set in `qp`.
///
/// The plain least-squares fit is refined by trimming: cells of `q` selected by the
/// greedy rule (with the budget scaled by `|q|/|qp|`) are dropped and the fit is
/// repeated until the trimmed set stops changing. A crack cutting off a minority
/// region therefore does not bias the map fitted to the majority.
pub fn fit_with_exceptional(
    u: &VectorField,
    q: &AxisBox,
    qp: &AxisBox,
    budget: f64,
    p: f64,
) -> Result<FitResult, KornError> {
    let g = u.grid();
    let dim = g.dim();
    let q_nodes = g.nodes_in(q.lo, q.hi);
    let mut map = fit_nodes(u, &q_nodes)?;
    let scale = q.volume(dim) / qp.volume(dim).max(f64::MIN_POSITIVE);
    let mut trimmed: Vec<usize> = Vec::new();
    let mut rounds = 0;
    while budget > 0.0 && rounds < 20 {
        rounds += 1;
        let t = exceptional_set(u, &map, q, budget * scale);
        if t.vacuous || t.cells == trimmed {
            break;
        }
        let mut drop = vec![false; g.num_nodes()];
        for &c in &t.cells {
            for &n in &g.cell_corners(c)[..g.corners_per_cell()] {
                drop[n] = true;
            }
        }
        let kept: Vec<usize> = q_nodes.iter().copied().filter(|&n| !drop[n]).collect();
        match fit_nodes(u, &kept) {
            Ok(m) => map = m,
            Err(_) => break,
        }
        trimmed = t.cells;
    }
    let omega = exceptional_set(u, &map, qp, budget);
    let (residual_lp, residual_1star) = residuals(u, &map, qp, &omega.cells, p);
    Ok(FitResult {
        map,
        budget_used: omega.volume,
        omega,
        residual_lp,
        residual_1star,
        rounds,
    })
}

/// Measured constants of the Korn–Poincaré inequality on one cube.
#[derive(Clone, Debug, PartialEq)]
pub struct KornReport {
    /// Both sides vanish (rigid data).
    pub exact: bool,
    /// `∫_{Q'∖ω}|u-a|^p / (r^p ∫_Q |e(u)|^p)`
    pub c1: f64,
    /// `∫_{Q'∖ω}(|u-a|^p)^{1*} / (r^{(p-1)1*} (∫_Q |e(u)|^p)^{1*})`
    pub c1_star: f64,
    pub strain_integral: f64,
}

/// `∫_Q |e(u)|^p` over cells of `q`, skipping cells flagged in `skip`.
pub fn strain_integral(u: &VectorField, q: &AxisBox, p: f64, skip: Option<&[bool]>) -> f64 {
    let g = u.grid();
    let e = sym_gradient(u);
    g.cells_in(q.lo, q.hi)
        .into_iter()
        .filter(|&c| skip.map_or(true, |s| !s[c]))
        .map(|c| e.norm_at(c).powf(p) * g.cell_volume())
        .sum()
}

pub fn korn_poincare_check(
    u: &VectorField,
    fit: &FitResult,
    q: &AxisBox,
    p: f64,
    skip: Option<&[bool]>,
) -> Result<KornReport, KornError> {
    let g = u.grid();
    let dim = g.dim();
    let r = 0.5 * (q.hi[0] - q.lo[0]);
    let es = strain_integral(u, q, p, skip);
    let res = fit.residual_lp.powf(p);
    let scale = u.max_norm().max(1.0).powf(p) * q.volume(dim);
    let tiny = 1e-24 * scale;
    let strain_zero = es * r.powf(p) <= tiny;
    if strain_zero {
        if res <= tiny {
            return Ok(KornReport { exact: true, c1: 0.0, c1_star: 0.0, strain_integral: es });
        }
        return Err(KornError::ZeroStrain);
    }
    let c1 = res / (r.powf(p) * es);
    let c1_star = if dim == 1 {
        fit.residual_1star / (r.powf(p - 1.0) * es)
    } else {
        let star = dim as f64 / (dim as f64 - 1.0);
        fit.residual_1star / (r.powf((p - 1.0) * star) * es.powf(star))
    };
    Ok(KornReport { exact: false, c1, c1_star, strain_integral: es })
}

/// Sup of `|a0 - ai|` over the intersection of two cubes.
#[derive(Clone, Debug, PartialEq)]
pub struct OverlapGap {
    pub sup: f64,
    pub intersection: AxisBox,
}

impl OverlapGap {
    /// `C` in `sup^p ≤ C r^{-(n-p)} ∫|e(u)|^p`, or `None` when the strain vanishes.
    pub fn measured_constant(&self, strain_integral: f64, r: f64, p: f64, dim: usize) -> Option<f64> {
        if strain_integral <= 0.0 {
            return None;
        }
        Some(self.sup.powf(p) * r.powf(dim as f64 - p) / strain_integral)
    }
}

fn map_gap(d: &RigidAffineMap, x: [f64; 2]) -> f64 {
    let v = d.eval(x);
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// The difference of two rigid maps is affine, so its norm peaks at a vertex.
pub fn affine_overlap_gap(
    a0: &RigidAffineMap,
    ai: &RigidAffineMap,
    q0: &AxisBox,
    qi: &AxisBox,
) -> Result<OverlapGap, KornError> {
    let dim = a0.dim;
    let inter = q0.intersection(qi, dim).ok_or(KornError::EmptyIntersection)?;
    let d = a0.sub(ai);
    let sup = if dim == 1 {
        map_gap(&d, inter.lo)
    } else {
        inter.corners().iter().map(|&c| map_gap(&d, c)).fold(0.0, f64::max)
    };
    Ok(OverlapGap { sup, intersection: inter })
}

/// Sup of `|a(x)|` over a convex polygon (vertex maximum).
pub fn sup_over_polygon(a: &RigidAffineMap, poly: &ConvexPolygon) -> f64 {
    poly.vertices().iter().map(|&v| map_gap(a, v)).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid {
        let h = 2.0 / n as f64;
        Grid::rect([-1.0, -1.0], h, n, n).unwrap()
    }

    fn unit_cube() -> AxisBox {
        AxisBox::cube([0.0, 0.0], 1.0)
    }

    #[test]
    fn recovers_rigid_map() {
        let g = grid(16);
        let m = RigidAffineMap::new(2, [0.3, -1.2], 0.7);
        let f = fit_rigid_affine(&m.to_field(g), &unit_cube()).unwrap();
        assert!((f.b[0] - 0.3).abs() < 1e-13 && (f.b[1] + 1.2).abs() < 1e-13);
        assert!((f.w - 0.7).abs() < 1e-13);
        let s = f.skew();
        assert_eq!(s[0][1], -s[1][0]);
    }

    #[test]
    fn stretch_on_three_by_three() {
        // nodes {-1,0,1}^2 shifted by c; u = x so A = 0 and b = mean = c
        let g = Grid::rect([1.0, 2.0], 1.0, 2, 2).unwrap();
        let u = VectorField::from_fn(g, |x| x);
        let f = fit_rigid_affine(&u, &AxisBox::new([1.0, 2.0], [3.0, 4.0])).unwrap();
        assert!(f.w.abs() < 1e-15);
        assert!((f.b[0] - 2.0).abs() < 1e-15 && (f.b[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn outlier_sensitivity() {
        let g = grid(8);
        let m = RigidAffineMap::new(2, [0.1, 0.2], -0.3);
        let mut u = m.to_field(g);
        let n = g.node_index(4, 4);
        let v = u.get(n);
        u.set(n, [v[0] + 1.0, v[1]]);
        let f = fit_rigid_affine(&u, &unit_cube()).unwrap();
        // the outlier sits at the centroid: it shifts only the mean, by 1/N
        assert!((f.b[0] - 0.1 - 1.0 / 81.0).abs() < 1e-13);
        assert!((f.w + 0.3).abs() < 1e-13);
    }

    #[test]
    fn degenerate_cube() {
        let g = grid(8);
        let u = VectorField::zeros(g);
        let tiny = AxisBox::new([0.0, 0.0], [0.25, 0.0]);
        assert!(matches!(fit_rigid_affine(&u, &tiny), Err(KornError::DegenerateCube { .. })));
    }

    #[test]
    fn exact_field_has_empty_omega() {
        let g = grid(16);
        let m = RigidAffineMap::new(2, [1.0, 0.0], 0.2);
        let u = m.to_field(g);
        for budget in [0.0, 0.1, 100.0] {
            let f = fit_with_exceptional(&u, &unit_cube(), &AxisBox::cube([0.0; 2], 0.5), budget, 2.0).unwrap();
            assert!(f.omega.cells.is_empty());
            let rep = korn_poincare_check(&u, &f, &unit_cube(), 2.0, None).unwrap();
            assert!(rep.exact);
        }
    }

    #[test]
    fn vacuous_budget() {
        let g = grid(16);
        let u = VectorField::from_fn(g, |x| [x[0] * x[0], 0.0]);
        let a = RigidAffineMap::zero(2);
        let qp = AxisBox::cube([0.0; 2], 0.5);
        let s = exceptional_set(&u, &a, &qp, 10.0);
        assert!(s.vacuous);
        assert_eq!(s.cells.len(), 64);
        assert!(exceptional_set(&u, &a, &qp, 0.0).cells.is_empty());
    }

    #[test]
    fn overlap_examples() {
        let q0 = AxisBox::new([0.0, 0.0], [2.0, 2.0]);
        let qi = AxisBox::new([1.0, 1.0], [3.0, 3.0]);
        let a = RigidAffineMap::new(2, [0.5, 0.1], 0.3);
        assert_eq!(affine_overlap_gap(&a, &a, &q0, &qi).unwrap().sup, 0.0);
        let t = RigidAffineMap::translation(2, [1.0, 0.0]);
        let gap = affine_overlap_gap(&RigidAffineMap::zero(2), &t, &q0, &qi).unwrap();
        assert_eq!(gap.sup, 1.0);
        let far = AxisBox::new([5.0, 5.0], [6.0, 6.0]);
        assert_eq!(affine_overlap_gap(&a, &t, &q0, &far), Err(KornError::EmptyIntersection));
    }

    #[test]
    fn neighbour_fits_agree_on_rigid_field() {
        let g = grid(32);
        let m = RigidAffineMap::new(2, [0.4, -0.1], 1.3);
        let u = m.to_field(g);
        let q0 = AxisBox::new([-1.0, -1.0], [0.5, 0.5]);
        let qi = AxisBox::new([-0.5, -0.5], [1.0, 1.0]);
        let a0 = fit_rigid_affine(&u, &q0).unwrap();
        let ai = fit_rigid_affine(&u, &qi).unwrap();
        assert!(affine_overlap_gap(&a0, &ai, &q0, &qi).unwrap().sup < 1e-13);
    }

    #[test]
    fn one_d_fit() {
        let g = Grid::line(0.0, 0.125, 8).unwrap();
        let u = VectorField::from_fn(g, |x| [2.0 + 0.0 * x[0], 0.0]);
        let f = fit_rigid_affine(&u, &AxisBox::new([0.0, 0.0], [1.0, 0.0])).unwrap();
        assert!((f.b[0] - 2.0).abs() < 1e-15 && f.w == 0.0);
    }
}
