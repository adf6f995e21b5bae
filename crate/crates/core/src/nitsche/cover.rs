//! Disjoint square covers of polygonal jump sets.
//!
//! Facets are merged into maximal straight segments and split where segments
//! meet. Along each segment squares are laid edge to edge; next to a junction
//! the squares shrink geometrically so that half-side stays below the distance
//! to the junction, which keeps squares of different segments apart.

use crate::crack::{FacetSet};
use crate::fields::Grid;

use super::NitscheError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverParams {
    /// Largest half-side.
    pub rho: f64,
    /// Squares below this half-side (in grid cells) are not placed.
    pub min_rho_cells: f64,
    /// Half-side never exceeds `growth` times the distance to a junction.
    pub growth: f64,
}

impl Default for CoverParams {
    fn default() -> Self {
        CoverParams { rho: 0.25, min_rho_cells: 2.0, growth: 0.9 }
    }
}

/// Closed square `Q(center, rho)` with one face normal to the jump.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverSquare {
    pub center: [f64; 2],
    pub rho: f64,
    /// Unit direction of the segment through the square.
    pub tangent: [f64; 2],
    pub segment: usize,
    /// Strip half-width `eps rho`, snapped to the grid.
    pub strip: f64,
}

impl CoverSquare {
    pub fn normal(&self) -> [f64; 2] {
        [-self.tangent[1], self.tangent[0]]
    }

    /// `(along, across)` coordinates relative to the centre.
    pub fn local(&self, p: [f64; 2]) -> [f64; 2] {
        let d = [p[0] - self.center[0], p[1] - self.center[1]];
        let n = self.normal();
        [d[0] * self.tangent[0] + d[1] * self.tangent[1], d[0] * n[0] + d[1] * n[1]]
    }

    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        let l = self.local(p);
        l[0].abs() <= self.rho + tol && l[1].abs() <= self.rho + tol
    }

    /// `Γ_j`: the chord of the segment through the square.
    pub fn gamma(&self) -> ([f64; 2], [f64; 2]) {
        let (c, t, r) = (self.center, self.tangent, self.rho);
        ([c[0] - r * t[0], c[1] - r * t[1]], [c[0] + r * t[0], c[1] + r * t[1]])
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.tangent[0].abs() < 1e-12 || self.tangent[1].abs() < 1e-12
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JumpCover {
    pub squares: Vec<CoverSquare>,
    /// Maximal straight pieces after splitting at junctions.
    pub segments: Vec<([f64; 2], [f64; 2])>,
    pub eps: f64,
    /// Margin of the fattened squares.
    pub t: f64,
    pub length: f64,
    /// `H^1(F ∖ ∪ Q_j)`.
    pub defect: f64,
}

impl JumpCover {
    pub fn is_empty(&self) -> bool {
        self.squares.is_empty()
    }

    /// `p` is in the leftover region `B_0` (outside every closed square).
    pub fn in_b0(&self, p: [f64; 2]) -> bool {
        !self.squares.iter().any(|s| s.contains(p, 0.0))
    }

    /// Squares pairwise have disjoint interiors, each chord lies on the centre
    /// line of its strip, and the defect is within `eps H^1(F)`.
    pub fn check(&self) -> bool {
        let disjoint = (0..self.squares.len()).all(|i| {
            (i + 1..self.squares.len()).all(|j| !interiors_overlap(&self.squares[i], &self.squares[j]))
        });
        let chords = self.squares.iter().all(|s| {
            let (a, b) = s.gamma();
            s.local(a)[1].abs() < s.strip && s.local(b)[1].abs() < s.strip
        });
        disjoint && chords && self.defect <= self.eps * self.length + 1e-12
    }

    /// `L^2(R̃)`: the two strips of each square, inside the square.
    pub fn strip_volume(&self) -> f64 {
        self.squares
            .iter()
            .map(|s| {
                let w = s.strip;
                let depth = (3.0 * w + self.t).min(s.rho) - w;
                2.0 * depth.max(0.0) * 2.0 * s.rho
            })
            .sum()
    }
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    dot(sub(a, b), sub(a, b)).sqrt()
}

/// Separating-axis test on the open squares.
fn interiors_overlap(a: &CoverSquare, b: &CoverSquare) -> bool {
    let axes = [a.tangent, a.normal(), b.tangent, b.normal()];
    let tol = 1e-12 * (1.0 + a.rho + b.rho);
    for ax in axes {
        let ca = dot(a.center, ax);
        let cb = dot(b.center, ax);
        let ra = a.rho * (dot(a.tangent, ax).abs() + dot(a.normal(), ax).abs());
        let rb = b.rho * (dot(b.tangent, ax).abs() + dot(b.normal(), ax).abs());
        if (ca - cb).abs() >= ra + rb - tol {
            return false;
        }
    }
    true
}

/// Merges collinear touching facets into maximal segments.
fn merge_facets(f: &FacetSet) -> Vec<([f64; 2], [f64; 2])> {
    let tol = 1e-9;
    let mut lines: Vec<([f64; 2], f64, Vec<(f64, f64)>)> = Vec::new();
    for fc in f.facets() {
        let len = dist(fc.a, fc.b);
        if len <= tol {
            continue;
        }
        let mut d = [(fc.b[0] - fc.a[0]) / len, (fc.b[1] - fc.a[1]) / len];
        if d[0] < -tol || (d[0].abs() <= tol && d[1] < 0.0) {
            d = [-d[0], -d[1]];
        }
        let off = cross(d, fc.a);
        let (s0, s1) = {
            let (x, y) = (dot(d, fc.a), dot(d, fc.b));
            (x.min(y), x.max(y))
        };
        match lines
            .iter_mut()
            .find(|(dd, o, _)| (dd[0] - d[0]).abs() < tol && (dd[1] - d[1]).abs() < tol && (o - off).abs() < tol)
        {
            Some(l) => l.2.push((s0, s1)),
            None => lines.push((d, off, vec![(s0, s1)])),
        }
    }
    let mut out = Vec::new();
    for (d, off, mut iv) in lines {
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = [-d[1], d[0]];
        let point = |s: f64| [s * d[0] + off * n[0], s * d[1] + off * n[1]];
        let mut cur = iv[0];
        for &(a, b) in &iv[1..] {
            if a <= cur.1 + tol {
                cur.1 = cur.1.max(b);
            } else {
                out.push((point(cur.0), point(cur.1)));
                cur = (a, b);
            }
        }
        out.push((point(cur.0), point(cur.1)));
    }
    out
}

/// Parameter in `[0, 1]` of the intersection of two segments, for the first.
fn intersect(a: ([f64; 2], [f64; 2]), b: ([f64; 2], [f64; 2]), tol: f64) -> Option<(f64, f64)> {
    let r = sub(a.1, a.0);
    let s = sub(b.1, b.0);
    let den = cross(r, s);
    if den.abs() < 1e-15 {
        return None;
    }
    let w = sub(b.0, a.0);
    let t = cross(w, s) / den;
    let u = cross(w, r) / den;
    let (lt, lu) = (tol / dot(r, r).sqrt(), tol / dot(s, s).sqrt());
    if t < -lt || t > 1.0 + lt || u < -lu || u > 1.0 + lu {
        return None;
    }
    Some((t.clamp(0.0, 1.0), u.clamp(0.0, 1.0)))
}

/// Splits segments at all mutual intersections; returns pieces and whether
/// each end is a junction.
fn split_segments(segs: &[([f64; 2], [f64; 2])]) -> Vec<(([f64; 2], [f64; 2]), [bool; 2])> {
    let tol = 1e-9;
    let mut cuts: Vec<Vec<f64>> = vec![vec![0.0, 1.0]; segs.len()];
    let mut hits: Vec<Vec<f64>> = vec![Vec::new(); segs.len()];
    for i in 0..segs.len() {
        for j in 0..segs.len() {
            if i == j {
                continue;
            }
            if let Some((t, _)) = intersect(segs[i], segs[j], tol) {
                cuts[i].push(t);
                hits[i].push(t);
            }
        }
    }
    let mut out = Vec::new();
    for (i, s) in segs.iter().enumerate() {
        let len = dist(s.0, s.1);
        let mut c = cuts[i].clone();
        c.sort_by(f64::total_cmp);
        c.dedup_by(|a, b| (*a - *b).abs() * len < tol);
        let at = |t: f64| [s.0[0] + t * (s.1[0] - s.0[0]), s.0[1] + t * (s.1[1] - s.0[1])];
        let junction = |t: f64| hits[i].iter().any(|&h| (h - t).abs() * len < tol);
        for w in c.windows(2) {
            if (w[1] - w[0]) * len < tol {
                continue;
            }
            out.push(((at(w[0]), at(w[1])), [junction(w[0]), junction(w[1])]));
        }
    }
    out
}

fn snap(x: f64, h: f64) -> f64 {
    ((x / h).round() * h).max(h)
}

/// Half-sides along `[0, len]`, edge to edge. Ends flagged as junctions keep a
/// margin `delta` and a geometric progression of sizes toward the junction.
fn lay_squares(len: f64, junction: [bool; 2], p: &CoverParams, delta: f64, min_rho: f64) -> Vec<(f64, f64)> {
    let s0 = if junction[0] { delta } else { 0.0 };
    let s1 = if junction[1] { len - delta } else { len };
    if s1 - s0 < 2.0 * min_rho {
        return Vec::new();
    }
    let mid = 0.5 * (s0 + s1);
    let mut left = Vec::new();
    let mut pl = s0;
    if junction[0] {
        loop {
            let r = p.rho.min(p.growth * pl);
            if pl + 2.0 * r > mid || r >= p.rho {
                break;
            }
            left.push((pl, r));
            pl += 2.0 * r;
        }
    }
    let mut right = Vec::new();
    let mut pr = s1;
    if junction[1] {
        loop {
            let r = p.rho.min(p.growth * (len - pr));
            if pr - 2.0 * r < mid || r >= p.rho {
                break;
            }
            right.push((pr - 2.0 * r, r));
            pr -= 2.0 * r;
        }
    }
    let mut cap = p.rho;
    if junction[0] {
        cap = cap.min(p.growth * pl);
    }
    if junction[1] {
        cap = cap.min(p.growth * (len - pr));
    }
    let m = pr - pl;
    let mut middle = Vec::new();
    if m > 1e-12 {
        let n = (m / (2.0 * cap) - 1e-9).ceil().max(1.0) as usize;
        let r = m / (2.0 * n as f64);
        if r >= min_rho {
            for i in 0..n {
                middle.push((pl + 2.0 * r * i as f64, r));
            }
        }
    }
    let mut all: Vec<(f64, f64)> = left.into_iter().filter(|s| s.1 >= min_rho).collect();
    all.extend(middle);
    all.extend(right.into_iter().rev().filter(|s| s.1 >= min_rho));
    all
}

/// Covered length of a segment by a square (clip in the square frame).
fn covered_interval(seg: ([f64; 2], [f64; 2]), sq: &CoverSquare) -> Option<(f64, f64)> {
    let a = sq.local(seg.0);
    let b = sq.local(seg.1);
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for ax in 0..2 {
        let d = b[ax] - a[ax];
        let lo = -sq.rho - a[ax];
        let hi = sq.rho - a[ax];
        if d.abs() < 1e-15 {
            if lo > 0.0 || hi < 0.0 {
                return None;
            }
            continue;
        }
        let (x, y) = ((lo / d).min(hi / d), (lo / d).max(hi / d));
        t0 = t0.max(x);
        t1 = t1.min(y);
    }
    (t1 > t0).then_some((t0, t1))
}

pub fn cover_jump_with_squares(f: &FacetSet, eps: f64, grid: &Grid) -> Result<JumpCover, NitscheError> {
    cover_with_params(f, eps, grid, &CoverParams::default())
}

pub fn cover_with_params(f: &FacetSet, eps: f64, grid: &Grid, p: &CoverParams) -> Result<JumpCover, NitscheError> {
    if !(eps > 0.0 && eps < 0.25) {
        return Err(NitscheError::InvalidEpsilon(eps));
    }
    if f.dim() != 2 {
        return Err(NitscheError::Unsupported("square covers need a 2D jump set".into()));
    }
    let h = grid.h();
    let min_rho = p.min_rho_cells * h;
    let delta = (eps * p.rho).max(min_rho / p.growth);
    let pieces = split_segments(&merge_facets(f));
    let mut squares: Vec<CoverSquare> = Vec::new();
    for (idx, (seg, junction)) in pieces.iter().enumerate() {
        let len = dist(seg.0, seg.1);
        let tangent = [(seg.1[0] - seg.0[0]) / len, (seg.1[1] - seg.0[1]) / len];
        for (pos, r) in lay_squares(len, *junction, p, delta, min_rho) {
            let c = pos + r;
            let sq = CoverSquare {
                center: [seg.0[0] + c * tangent[0], seg.0[1] + c * tangent[1]],
                rho: r,
                tangent,
                segment: idx,
                strip: snap(eps * r, h),
            };
            // a square that would touch a square of another segment is dropped
            // and its chord counts toward the defect
            if squares.iter().all(|o| o.segment == idx || !interiors_overlap(o, &sq)) {
                squares.push(sq);
            }
        }
    }
    let segments: Vec<_> = pieces.iter().map(|(s, _)| *s).collect();
    let length: f64 = segments.iter().map(|s| dist(s.0, s.1)).sum();
    let mut covered = 0.0;
    for s in &segments {
        let mut iv: Vec<(f64, f64)> = squares.iter().filter_map(|q| covered_interval(*s, q)).collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut end = 0.0f64;
        let mut c = 0.0;
        for (a, b) in iv {
            let a = a.max(end);
            if b > a {
                c += b - a;
                end = b;
            }
        }
        covered += c * dist(s.0, s.1);
    }
    let defect = (length - covered).max(0.0);
    let allowed = eps * length;
    if defect > allowed + 1e-12 {
        return Err(NitscheError::CoverageFailure { defect, allowed });
    }
    let min_r = squares.iter().map(|s| s.rho).fold(f64::INFINITY, f64::min);
    let t = if squares.is_empty() { snap(eps * eps, h) } else { snap((eps * eps).min(min_r / 8.0), h) };
    Ok(JumpCover { squares, segments, eps, t, length, defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crack::Facet;

    fn grid() -> Grid {
        Grid::rect([0.0, 0.0], 1.0 / 256.0, 256, 256).unwrap()
    }

    #[test]
    fn straight_segment_exact() {
        let f = FacetSet::new(2, vec![Facet::segment([0.1, 0.5], [0.9, 0.5])]).unwrap();
        let c = cover_jump_with_squares(&f, 0.1, &grid()).unwrap();
        assert_eq!(c.squares.len(), (0.8f64 / 0.5).ceil() as usize);
        assert!(c.defect < 1e-12);
        assert!(c.check());
    }

    #[test]
    fn pieces_are_merged() {
        let f = FacetSet::new(
            2,
            vec![
                Facet::segment([0.5, 0.5], [0.9, 0.5]),
                Facet::segment([0.1, 0.5], [0.5, 0.5]),
            ],
        )
        .unwrap();
        assert_eq!(merge_facets(&f).len(), 1);
    }

    #[test]
    fn right_angle() {
        let f = FacetSet::new(
            2,
            vec![Facet::segment([0.1, 0.2], [0.8, 0.2]), Facet::segment([0.8, 0.2], [0.8, 0.9])],
        )
        .unwrap();
        let eps = 0.1;
        let c = cover_jump_with_squares(&f, eps, &grid()).unwrap();
        let delta = eps * CoverParams::default().rho;
        assert!(c.defect <= 2.0 * delta + 1e-12, "{}", c.defect);
        assert!(c.defect < eps * c.length);
        assert!(c.check());
        // nothing is covered inside the corner exclusion
        assert!(c.in_b0([0.8 - 0.5 * delta, 0.2]));
    }

    #[test]
    fn t_junction_splits() {
        let f = FacetSet::new(
            2,
            vec![Facet::segment([0.0, 0.5], [1.0, 0.5]), Facet::segment([0.5, 0.5], [0.5, 1.0])],
        )
        .unwrap();
        let c = cover_jump_with_squares(&f, 0.2, &grid()).unwrap();
        assert_eq!(c.segments.len(), 3);
        assert!(c.check());
    }

    #[test]
    fn empty_cover() {
        let c = cover_jump_with_squares(&FacetSet::empty(2), 0.1, &grid()).unwrap();
        assert!(c.is_empty());
        assert_eq!(c.defect, 0.0);
        assert!(c.in_b0([0.5, 0.5]));
        assert!(matches!(
            cover_jump_with_squares(&FacetSet::empty(2), 0.3, &grid()),
            Err(NitscheError::InvalidEpsilon(_))
        ));
    }

    #[test]
    fn tight_zigzag_fails() {
        // short kinked pieces: the corner margins eat more than eps of the length
        let mut v = Vec::new();
        for i in 0..8 {
            let x = 0.1 + 0.05 * i as f64;
            let (y0, y1) = if i % 2 == 0 { (0.5, 0.55) } else { (0.55, 0.5) };
            v.push(Facet::segment([x, y0], [x + 0.05, y1]));
        }
        let f = FacetSet::new(2, v).unwrap();
        assert!(matches!(
            cover_jump_with_squares(&f, 0.05, &grid()),
            Err(NitscheError::CoverageFailure { .. })
        ));
    }
}
