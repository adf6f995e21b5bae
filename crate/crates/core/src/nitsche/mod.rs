//! Nitsche reflection across rectangle faces, square covers of polygonal jump
//! sets, and the density pipeline that glues rough approximations of the
//! reflected half-square fields.

mod cover;
mod densify;
mod trace;

pub use cover::{cover_jump_with_squares, cover_with_params, CoverParams, CoverSquare, JumpCover};
pub use densify::{densify, DensifyConfig, DensifyMetrics, Densified, InterfaceCheck};
pub use trace::{trace_distance, validate_tau};

use crate::crack::{AxisBox, CrackError};
use crate::fields::{sym_gradient, FieldError, Grid, VectorField};
use crate::rough::RoughError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NitscheError {
    #[error("reflection needs 0 < mu < nu < 1, got mu = {mu}, nu = {nu}")]
    BadConfig { mu: f64, nu: f64 },
    #[error("cover leaves {defect} of the jump set uncovered, allowed {allowed}")]
    CoverageFailure { defect: f64, allowed: f64 },
    #[error("invalid tau: {0}")]
    InvalidTau(String),
    #[error("eps must lie in (0, 1/4), got {0}")]
    InvalidEpsilon(f64),
    #[error("unsupported input: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Rough(#[from] RoughError),
    #[error(transparent)]
    Crack(#[from] CrackError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Reflection weights: `v' = q v_{A_mu} + (1 - q) v_{A_nu}`, `q = (1+nu)/(nu-mu)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReflectionConfig {
    mu: f64,
    nu: f64,
}

impl Default for ReflectionConfig {
    fn default() -> Self {
        ReflectionConfig { mu: 0.25, nu: 0.5 }
    }
}

impl ReflectionConfig {
    pub fn new(mu: f64, nu: f64) -> Result<Self, NitscheError> {
        if !(mu > 0.0 && mu < nu && nu < 1.0) {
            return Err(NitscheError::BadConfig { mu, nu });
        }
        let c = ReflectionConfig { mu, nu };
        // normal components of the two pullbacks must recombine to the identity
        if c.identity_residual() > 1e-14 * c.q().abs().max(1.0) {
            return Err(NitscheError::BadConfig { mu, nu });
        }
        Ok(c)
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn q(&self) -> f64 {
        (1.0 + self.nu) / (self.nu - self.mu)
    }

    /// `|−mu q − nu (1 − q) − 1|`.
    pub fn identity_residual(&self) -> f64 {
        let q = self.q();
        (-self.mu * q - self.nu * (1.0 - q) - 1.0).abs()
    }
}

/// Face of an axis-aligned rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Face {
    XLo,
    XHi,
    YLo,
    YHi,
}

impl Face {
    /// Axis normal to the face.
    pub fn axis(self) -> usize {
        match self {
            Face::XLo | Face::XHi => 0,
            Face::YLo | Face::YHi => 1,
        }
    }

    /// `+1` when the reflected copy lies on the positive side of the face.
    pub fn sign(self) -> f64 {
        match self {
            Face::XHi | Face::YHi => 1.0,
            Face::XLo | Face::YLo => -1.0,
        }
    }
}

/// A reflection band: nodes at signed distance `s in (0, depth]` beyond the face
/// at `x_axis = at`, with tangential coordinate in `along`. Values are built from
/// samples on the other side of the face only.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Band {
    pub axis: usize,
    pub sign: f64,
    pub at: f64,
    pub along: [f64; 2],
    pub depth: f64,
}

impl Band {
    fn offset(&self, p: [f64; 2]) -> f64 {
        self.sign * (p[self.axis] - self.at)
    }

    pub fn contains(&self, g: &Grid, p: [f64; 2]) -> bool {
        let tol = 1e-9 * g.h();
        let s = self.offset(p);
        let t = p[1 - self.axis];
        s > tol && s <= self.depth + tol && t >= self.along[0] - tol && t <= self.along[1] + tol
    }
}

/// Bilinear sample of `v` at `p` using only node rows on the source side of the
/// band face; beyond the last such row the two nearest rows are extrapolated,
/// which keeps affine data exact.
fn sample_source(v: &VectorField, band: &Band, p: [f64; 2]) -> [f64; 2] {
    let g = v.grid();
    let o = g.origin();
    let h = g.h();
    let c = g.counts();
    let a = band.axis;
    let b = 1 - a;
    let fa = (p[a] - o[a]) / h;
    let face = (band.at - o[a]) / h;
    let mut i = fa.floor() as i64;
    if band.sign > 0.0 {
        // source rows have index <= floor(face)
        let last = (face + 1e-9).floor() as i64;
        i = i.min(last - 1);
    } else {
        let first = (face - 1e-9).ceil() as i64;
        i = i.max(first);
    }
    let i = i.clamp(0, c[a] as i64 - 1);
    let ta = fa - i as f64;
    let fb = ((p[b] - o[b]) / h).clamp(0.0, c[b] as f64);
    let j = (fb.floor() as i64).clamp(0, c[b] as i64 - 1);
    let tb = fb - j as f64;
    let node = |ia: i64, jb: i64| {
        let (ii, jj) = if a == 0 { (ia, jb) } else { (jb, ia) };
        v.get(g.node_index(ii as usize, jj as usize))
    };
    let v00 = node(i, j);
    let v10 = node(i + 1, j);
    let v01 = node(i, j + 1);
    let v11 = node(i + 1, j + 1);
    let mut out = [0.0; 2];
    for k in 0..2 {
        out[k] = (1.0 - ta) * (1.0 - tb) * v00[k]
            + ta * (1.0 - tb) * v10[k]
            + (1.0 - ta) * tb * v01[k]
            + ta * tb * v11[k];
    }
    out
}

/// Replaces `v` on the band by the Nitsche reflection of the data behind the
/// face. Returns the new field and the mask of replaced nodes.
pub(crate) fn reflect_band(v: &VectorField, band: &Band, cfg: &ReflectionConfig) -> (VectorField, Vec<bool>) {
    let g = *v.grid();
    let q = cfg.q();
    let (mu, nu) = (cfg.mu, cfg.nu);
    let a = band.axis;
    let mut out = v.clone();
    let mut mask = vec![false; g.num_nodes()];
    for n in 0..g.num_nodes() {
        let x = g.node_coord(n);
        if !band.contains(&g, x) {
            continue;
        }
        let s = band.offset(x);
        let mut xm = x;
        let mut xn = x;
        xm[a] = band.at - band.sign * mu * s;
        xn[a] = band.at - band.sign * nu * s;
        let vm = sample_source(v, band, xm);
        let vn = sample_source(v, band, xn);
        let mut r = [0.0; 2];
        r[a] = -mu * q * vm[a] - nu * (1.0 - q) * vn[a];
        r[1 - a] = q * vm[1 - a] + (1.0 - q) * vn[1 - a];
        out.set(n, r);
        mask[n] = true;
    }
    (out, mask)
}

/// `v̂` on `R̂ = R ∪ R'` together with the geometry it came from.
#[derive(Clone, Debug)]
pub struct Extension {
    /// `v` on `R` (and everywhere off `R'`), `v'` on `R'`.
    pub field: VectorField,
    pub rect: AxisBox,
    pub face: Face,
    pub extended: AxisBox,
    /// Nodes of `R'` (strictly beyond the face).
    pub reflected: Vec<bool>,
}

impl Extension {
    pub(crate) fn band(&self) -> Band {
        let a = self.face.axis();
        let b = 1 - a;
        let at = if self.face.sign() > 0.0 { self.rect.hi[a] } else { self.rect.lo[a] };
        Band {
            axis: a,
            sign: self.face.sign(),
            at,
            along: [self.rect.lo[b], self.rect.hi[b]],
            depth: self.rect.hi[a] - self.rect.lo[a],
        }
    }
}

/// Extends `v` from the rectangle `r` across `face` by reflection. Sample points
/// `A_mu x`, `A_nu x` stay inside `r` since both weights are below one.
pub fn nitsche_extend(v: &VectorField, r: &AxisBox, face: Face, cfg: &ReflectionConfig) -> Result<Extension, NitscheError> {
    let g = v.grid();
    if g.dim() != 2 {
        return Err(NitscheError::Unsupported("reflection is implemented in 2D".into()));
    }
    if r.volume(2) <= 0.0 {
        return Err(NitscheError::Unsupported("empty rectangle".into()));
    }
    let a = face.axis();
    let depth = r.hi[a] - r.lo[a];
    let mut extended = *r;
    if face.sign() > 0.0 {
        extended.hi[a] += depth;
    } else {
        extended.lo[a] -= depth;
    }
    let mut ext = Extension {
        field: v.clone(),
        rect: *r,
        face,
        extended,
        reflected: Vec::new(),
    };
    let (field, mask) = reflect_band(v, &ext.band(), cfg);
    ext.field = field;
    ext.reflected = mask;
    Ok(ext)
}

/// Largest mismatch of one-sided traces along a band face. Each trace is the
/// linear extrapolation to the face of the two nearest node layers strictly on
/// that side.
pub(crate) fn face_mismatch(v: &VectorField, band: &Band) -> f64 {
    let g = v.grid();
    let o = g.origin();
    let h = g.h();
    let nc = g.node_counts();
    let a = band.axis;
    let b = 1 - a;
    let face = (band.at - o[a]) / h;
    let fl = (face - 1e-9).floor() as i64;
    let cl = (face + 1e-9).ceil() as i64;
    let (below, above) = (fl.min(cl - 1), cl.max(fl + 1));
    // layers of each side (closest first)
    let (src, dst) = if band.sign > 0.0 {
        ([below, below - 1], [above, above + 1])
    } else {
        ([above, above + 1], [below, below - 1])
    };
    let inside = |i: i64| i >= 0 && (i as usize) < nc[a];
    if !src.iter().chain(dst.iter()).all(|&i| inside(i)) {
        return 0.0;
    }
    let s = |i: i64| (i as f64 - face) * h;
    let extrap = |rows: [i64; 2], jb: usize| -> [f64; 2] {
        let node = |ia: i64| {
            let (ii, jj) = if a == 0 { (ia as usize, jb) } else { (jb, ia as usize) };
            v.get(g.node_index(ii, jj))
        };
        let (s1, s2) = (s(rows[0]), s(rows[1]));
        let (v1, v2) = (node(rows[0]), node(rows[1]));
        let w = s1 / (s1 - s2);
        [v1[0] + w * (v2[0] - v1[0]), v1[1] + w * (v2[1] - v1[1])]
    };
    let tol = 1e-9;
    let mut worst: f64 = 0.0;
    for jb in 0..nc[b] {
        let t = o[b] + jb as f64 * h;
        if t < band.along[0] - tol * h || t > band.along[1] + tol * h {
            continue;
        }
        let x = extrap(src, jb);
        let y = extrap(dst, jb);
        worst = worst.max(((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt());
    }
    worst
}

/// Sup over the face of `|upper trace - lower trace|` of `v̂`.
pub fn interface_jump(ext: &Extension) -> f64 {
    face_mismatch(&ext.field, &ext.band())
}

/// `∫_{R̂} |e(v̂)|^p / ∫_R |e(v)|^p` over cells with centre in each box.
pub fn reflection_energy_ratio(v: &VectorField, ext: &Extension, p: f64) -> f64 {
    let g = v.grid();
    let ev = sym_gradient(v);
    let ex = sym_gradient(&ext.field);
    let sum = |e: &crate::fields::SymTensorField, b: &AxisBox| -> f64 {
        g.cells_in(b.lo, b.hi).into_iter().map(|c| e.norm_at(c).powf(p)).sum()
    };
    sum(&ex, &ext.extended) / sum(&ev, &ext.rect)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::korn::RigidAffineMap;

    fn grid() -> Grid {
        Grid::rect([0.0, 0.0], 1.0 / 64.0, 64, 64).unwrap()
    }

    fn rect() -> AxisBox {
        AxisBox::new([0.25, 0.125], [0.75, 0.5])
    }

    #[test]
    fn config_bounds() {
        let c = ReflectionConfig::default();
        assert_eq!(c.q(), 6.0);
        assert!(c.identity_residual() < 1e-14);
        assert!(ReflectionConfig::new(0.5, 0.25).is_err());
        assert!(ReflectionConfig::new(0.0, 0.5).is_err());
        assert!(ReflectionConfig::new(0.3, 1.0).is_err());
        assert!(ReflectionConfig::new(0.1, 0.9).is_ok());
    }

    #[test]
    fn rigid_extends_rigidly() {
        let g = grid();
        let v = RigidAffineMap::new(2, [0.3, -0.2], 0.7).to_field(g);
        for face in [Face::XLo, Face::XHi, Face::YLo, Face::YHi] {
            let ext = nitsche_extend(&v, &rect(), face, &ReflectionConfig::default()).unwrap();
            let e = sym_gradient(&ext.field);
            for c in g.cells_in(ext.extended.lo, ext.extended.hi) {
                assert!(e.norm_at(c) < 1e-12, "{face:?}");
            }
            assert!(ext.reflected.iter().any(|&r| r));
        }
    }

    #[test]
    fn affine_is_continuous_across_the_face() {
        let g = grid();
        let v = VectorField::from_fn(g, |x| [0.3 * x[0] + 2.0 * x[1], -x[0] + 0.5 * x[1] + 1.0]);
        for face in [Face::XLo, Face::XHi, Face::YLo, Face::YHi] {
            let ext = nitsche_extend(&v, &rect(), face, &ReflectionConfig::default()).unwrap();
            assert!(interface_jump(&ext) < 1e-10, "{face:?}");
        }
    }

    #[test]
    fn face_on_dual_line_keeps_affine_exact() {
        let g = grid();
        let h = g.h();
        let v = VectorField::from_fn(g, |x| [x[1], 2.0 * x[0] - x[1]]);
        let band = Band { axis: 1, sign: 1.0, at: 0.5 + 0.5 * h, along: [0.2, 0.8], depth: 0.2 };
        let (w, mask) = reflect_band(&v, &band, &ReflectionConfig::default());
        assert!(face_mismatch(&w, &band) < 1e-12);
        // the node row just below the face is untouched
        let below = g.nearest_node([0.5, 0.5]).unwrap();
        assert!(!mask[below]);
        assert_eq!(w.get(below), v.get(below));
    }

    #[test]
    fn jump_at_face_is_reported() {
        let g = grid();
        let r = rect();
        // jump on the dual line just inside the top face
        let v = VectorField::from_fn(g, |x| if x[1] > 0.5 - 1.0 / 128.0 { [1.0, 0.0] } else { [0.0, 0.0] });
        let ext = nitsche_extend(&v, &r, Face::YHi, &ReflectionConfig::default()).unwrap();
        let m = interface_jump(&ext);
        assert!((m - 1.0).abs() < 1e-12, "{m}");
    }
}
