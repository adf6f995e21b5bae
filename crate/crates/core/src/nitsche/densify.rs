//! Density pipeline: cover the jump set (and, through the zero extension, the
//! domain boundary) by squares, reflect each half-square field across its
//! strip, run the rough approximation per piece and assemble.

use std::borrow::Cow;
use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;

use crate::crack::{cracked_cells, crossed_edges, dual_facets, AxisBox, Facet, FacetSet};
use crate::fields::{sym_gradient, Grid, VectorField};
use crate::rough::{rough_approximate, RoughConfig};

use super::cover::{cover_with_params, CoverParams, CoverSquare, JumpCover};
use super::trace::{trace_distance, validate_tau};
use super::{reflect_band, Band, NitscheError, ReflectionConfig};

fn sqrt_psi(s: f64) -> f64 {
    s.sqrt()
}

fn half_tanh(s: f64) -> f64 {
    0.5 * s.tanh()
}

#[derive(Clone, Copy, Debug)]
pub struct DensifyConfig {
    pub eps: f64,
    pub theta: f64,
    pub k: u32,
    pub p: f64,
    pub cover: CoverParams,
    pub reflection: ReflectionConfig,
    pub omega_constant: f64,
    /// Treat `∂Ω` as part of the jump set of the zero extension and cover it.
    pub boundary: bool,
    pub psi: fn(f64) -> f64,
    pub tau: fn(f64) -> f64,
}

impl DensifyConfig {
    pub fn new(eps: f64, theta: f64, k: u32) -> Self {
        DensifyConfig {
            eps,
            theta,
            k,
            p: 2.0,
            cover: CoverParams::default(),
            reflection: ReflectionConfig::default(),
            omega_constant: 1.0,
            boundary: true,
            psi: sqrt_psi,
            tau: half_tanh,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensifyMetrics {
    pub eps: f64,
    pub theta: f64,
    pub k: u32,
    /// `H^1(J_{u_k} △ J_u)` inside `Ω`.
    pub jump_symdiff: f64,
    /// `‖e(u_k) - e(u)‖_p / ‖e(u)‖_p`, cracked cells of either field excluded;
    /// not normalised when `e(u) = 0`.
    pub strain_lp_gap: f64,
    pub vol_ek: f64,
    pub trace_tau: f64,
    pub psi_gap: f64,
    pub strip_volume: f64,
    pub cover_defect: f64,
}

impl DensifyMetrics {
    pub const CSV_HEADER: &'static str = "eps,theta,k,jump_symdiff,strain_lp_gap,vol_Ek,trace_tau,psi_gap";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
            self.eps,
            self.theta,
            self.k,
            self.jump_symdiff,
            self.strain_lp_gap,
            self.vol_ek,
            self.trace_tau,
            self.psi_gap
        )
    }
}

/// Bitwise agreement of neighbouring pieces on square faces away from the
/// strip bands.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct InterfaceCheck {
    pub checked: usize,
    pub mismatched: usize,
}

#[derive(Clone, Debug)]
pub struct Densified {
    /// Assembled approximant on `Ω̄`, zero elsewhere.
    pub u_k: VectorField,
    pub e_cells: Vec<bool>,
    /// `J_{u_k}` clipped to `Ω`.
    pub jump: FacetSet,
    pub cover: JumpCover,
    pub pieces: usize,
    pub metrics: DensifyMetrics,
    pub interface: InterfaceCheck,
}

/// Squares of one segment with equal size laid edge to edge share a strip and
/// hence a reflected field.
#[derive(Clone, Debug)]
struct Run {
    axis: usize,
    gamma: f64,
    along: [f64; 2],
    rho: f64,
    strip: f64,
    inner: Option<f64>,
}

enum PieceKind {
    Half { run: usize, side: f64 },
    Rest,
}

struct Piece {
    kind: PieceKind,
    own: Vec<bool>,
    support: Vec<bool>,
}

/// Values of one rough approximation on its (dilated) region.
struct PieceResult {
    nodes: Vec<usize>,
    vals: Vec<[f64; 2]>,
    bad: Vec<bool>,
    e_cells: Vec<usize>,
}

impl PieceResult {
    fn at(&self, n: usize) -> Option<([f64; 2], bool)> {
        self.nodes.binary_search(&n).ok().map(|i| (self.vals[i], self.bad[i]))
    }

    fn structural(&self, p: usize, q: usize, zero: f64) -> bool {
        match (self.at(p), self.at(q)) {
            (Some((a, ba)), Some((b, bb))) => ba != bb && norm2(a, b) > zero,
            _ => false,
        }
    }
}

fn norm2(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn on_face(g: &Grid, b: &Band, p: usize, q: usize) -> bool {
    let (x, y) = (g.node_coord(p), g.node_coord(q));
    let h = g.h();
    let o = 1 - b.axis;
    (x[o] - y[o]).abs() < 0.25 * h && (0.5 * (x[b.axis] + y[b.axis]) - b.at).abs() < 0.25 * h
}

fn on_multiple(x: f64, o: f64, h: f64) -> bool {
    let s = (x - o) / h;
    (s - s.round()).abs() < 1e-9
}

/// Facets of `∂Ω` for the zero extension: the dual lines just outside `Ω`.
fn boundary_facets(domain: &AxisBox, h: f64) -> Vec<Facet> {
    let lo = [domain.lo[0] - 0.5 * h, domain.lo[1] - 0.5 * h];
    let hi = [domain.hi[0] + 0.5 * h, domain.hi[1] + 0.5 * h];
    vec![
        Facet::segment([lo[0], lo[1]], [hi[0], lo[1]]),
        Facet::segment([hi[0], lo[1]], [hi[0], hi[1]]),
        Facet::segment([lo[0], hi[1]], [hi[0], hi[1]]),
        Facet::segment([lo[0], lo[1]], [lo[0], hi[1]]),
    ]
}

/// Axis-aligned facets clipped to the closed box.
fn clip_facets(f: &FacetSet, b: &AxisBox) -> FacetSet {
    let mut out = FacetSet::empty(2);
    for fc in f.facets() {
        let (c, l) = if fc.is_horizontal() { (1, 0) } else { (0, 1) };
        if fc.a[c] < b.lo[c] || fc.a[c] > b.hi[c] {
            continue;
        }
        let s0 = fc.a[l].min(fc.b[l]).max(b.lo[l]);
        let s1 = fc.a[l].max(fc.b[l]).min(b.hi[l]);
        if s1 - s0 <= 1e-12 {
            continue;
        }
        let mut a = fc.a;
        let mut e = fc.b;
        a[l] = s0;
        e[l] = s1;
        let mut nf = Facet::segment(a, e);
        nf.amplitude = fc.amplitude;
        out.push(nf);
    }
    out
}

fn build_runs(cover: &JumpCover, domain: &AxisBox, h: f64) -> Result<Vec<(Run, Vec<usize>)>, NitscheError> {
    let mut order: Vec<usize> = (0..cover.squares.len()).collect();
    let along_of = |s: &CoverSquare| if s.tangent[0].abs() > 0.5 { s.center[0] } else { s.center[1] };
    order.sort_by(|&i, &j| {
        let (a, b) = (&cover.squares[i], &cover.squares[j]);
        a.segment.cmp(&b.segment).then(along_of(a).total_cmp(&along_of(b)))
    });
    let mut runs: Vec<(Run, Vec<usize>)> = Vec::new();
    for &i in &order {
        let s = &cover.squares[i];
        if !s.is_axis_aligned() {
            return Err(NitscheError::Unsupported("the pipeline needs axis-aligned jump segments".into()));
        }
        let axis = if s.tangent[0].abs() > 0.5 { 1 } else { 0 };
        let b = 1 - axis;
        let lo = s.center[b] - s.rho;
        let hi = s.center[b] + s.rho;
        if let Some((r, members)) = runs.last_mut() {
            let last = &cover.squares[*members.last().unwrap()];
            if last.segment == s.segment && last.rho == s.rho && (r.along[1] - lo).abs() < 1e-9 * h {
                r.along[1] = hi;
                members.push(i);
                continue;
            }
        }
        let gamma = s.center[axis];
        let tol = 1e-9 * h;
        let inner = if (gamma - (domain.lo[axis] - 0.5 * h)).abs() < tol {
            Some(1.0)
        } else if (gamma - (domain.hi[axis] + 0.5 * h)).abs() < tol {
            Some(-1.0)
        } else {
            None
        };
        runs.push((Run { axis, gamma, along: [lo, hi], rho: s.rho, strip: s.strip, inner }, vec![i]));
    }
    Ok(runs)
}

fn dilate(g: &Grid, m: &[bool], within: &[bool], r: i64) -> Vec<bool> {
    let mut out = m.to_vec();
    for n in 0..g.num_nodes() {
        if !m[n] {
            continue;
        }
        let [i, j] = g.node_ij_signed(n);
        for dj in -r..=r {
            for di in -r..=r {
                if let Some(q) = g.node_at(i + di, j + dj) {
                    if within[q] {
                        out[q] = true;
                    }
                }
            }
        }
    }
    out
}

fn bbox(g: &Grid, m: &[bool]) -> Option<AxisBox> {
    let mut b = AxisBox::new([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    let mut any = false;
    for (n, _) in m.iter().enumerate().filter(|(_, &x)| x) {
        let x = g.node_coord(n);
        any = true;
        for a in 0..2 {
            b.lo[a] = b.lo[a].min(x[a]);
            b.hi[a] = b.hi[a].max(x[a]);
        }
    }
    any.then_some(b)
}

/// Grid edges `(p, q)` (`q` the `+axis` neighbour of `p`) with both ends in `m`.
fn edges_within(g: &Grid, m: &[bool]) -> Vec<(usize, usize, usize)> {
    let [nx, ny] = g.node_counts();
    let mut out = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            let p = g.node_index(i, j);
            if !m[p] {
                continue;
            }
            if i + 1 < nx && m[g.node_index(i + 1, j)] {
                out.push((p, g.node_index(i + 1, j), 0));
            }
            if j + 1 < ny && m[g.node_index(i, j + 1)] {
                out.push((p, g.node_index(i, j + 1), 1));
            }
        }
    }
    out
}

/// Length of the dual facet of an edge across `axis`, clipped to the box.
fn dual_length(g: &Grid, p: usize, axis: usize, b: &AxisBox) -> f64 {
    let o = 1 - axis;
    let c = g.node_coord(p)[o];
    let h = g.h();
    ((c + 0.5 * h).min(b.hi[o]) - (c - 0.5 * h).max(b.lo[o])).max(0.0)
}

fn seg_dist(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let l2 = d[0] * d[0] + d[1] * d[1];
    let t = if l2 > 0.0 { (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
    norm2(p, [a[0] + t * d[0], a[1] + t * d[1]])
}

/// The pieces of `∂Q_j ∩ R̃_j`: side faces at strip heights.
fn band_segments(s: &CoverSquare, t: f64) -> Vec<([f64; 2], [f64; 2])> {
    let tg = s.tangent;
    let n = s.normal();
    let pt = |a: f64, c: f64| [s.center[0] + a * tg[0] + c * n[0], s.center[1] + a * tg[1] + c * n[1]];
    let (w0, w1) = (s.strip, 3.0 * s.strip + t);
    let mut out = Vec::new();
    for a in [-s.rho, s.rho] {
        for sg in [-1.0, 1.0] {
            out.push((pt(a, sg * w0), pt(a, sg * w1)));
        }
    }
    out
}

/// Approximates `u` on the rectangle `domain` (node-aligned) with jump facets `f`
/// on dual lines. The grid must extend beyond `domain` by the halo scale `k`
/// requires; `u` may hold anything there since the pipeline reads its zero
/// extension when `cfg.boundary` is set.
pub fn densify(u: &VectorField, f: &FacetSet, domain: AxisBox, cfg: &DensifyConfig) -> Result<Densified, NitscheError> {
    let g = *u.grid();
    if g.dim() != 2 {
        return Err(NitscheError::Unsupported("the pipeline is implemented in 2D".into()));
    }
    if !(cfg.eps > 0.0 && cfg.eps < 0.25) {
        return Err(NitscheError::InvalidEpsilon(cfg.eps));
    }
    validate_tau(&cfg.tau)?;
    let h = g.h();
    let o = g.origin();
    if !(0..2).all(|a| on_multiple(domain.lo[a], o[a], h) && on_multiple(domain.hi[a], o[a], h)) {
        return Err(NitscheError::Unsupported("domain corners must be grid nodes".into()));
    }
    f.check_aligned(&g)?;

    let mut in_dom = vec![false; g.num_nodes()];
    for n in g.nodes_in(domain.lo, domain.hi) {
        in_dom[n] = true;
    }
    let use_boundary = cfg.boundary && !f.is_empty();
    let ext: VectorField = if use_boundary {
        let mut e = VectorField::zeros(g);
        for n in 0..g.num_nodes() {
            if in_dom[n] {
                e.set(n, u.get(n));
            }
        }
        e
    } else {
        u.clone()
    };
    let mut all = f.clone();
    if use_boundary {
        for bf in boundary_facets(&domain, h) {
            all.push(bf);
        }
    }
    let cover = cover_with_params(&all, cfg.eps, &g, &cfg.cover)?;
    let runs = build_runs(&cover, &domain, h)?;
    let t = cover.t;

    // pieces: halves of runs first, the rest of Ω last
    let tol = 1e-9 * h;
    let mut assigned = vec![false; g.num_nodes()];
    let mut pieces: Vec<Piece> = Vec::new();
    for (ri, (run, _)) in runs.iter().enumerate() {
        let sides: Vec<f64> = match run.inner {
            Some(s) => vec![s],
            None => vec![-1.0, 1.0],
        };
        for side in sides {
            let mut own = vec![false; g.num_nodes()];
            for n in 0..g.num_nodes() {
                if !in_dom[n] || assigned[n] {
                    continue;
                }
                let x = g.node_coord(n);
                let off = side * (x[run.axis] - run.gamma);
                let t_ = x[1 - run.axis];
                if off > 0.0 && off <= run.rho + tol && t_ >= run.along[0] - tol && t_ <= run.along[1] + tol {
                    own[n] = true;
                    assigned[n] = true;
                }
            }
            if own.iter().any(|&x| x) {
                pieces.push(Piece { kind: PieceKind::Half { run: ri, side }, own, support: Vec::new() });
            }
        }
    }
    let rest: Vec<bool> = (0..g.num_nodes()).map(|n| in_dom[n] && !assigned[n]).collect();
    if rest.iter().any(|&x| x) {
        pieces.push(Piece { kind: PieceKind::Rest, own: rest, support: Vec::new() });
    }
    let mut piece_of: Vec<Option<usize>> = vec![None; g.num_nodes()];
    for (i, pc) in pieces.iter_mut().enumerate() {
        for n in 0..g.num_nodes() {
            if pc.own[n] {
                piece_of[n] = Some(i);
            }
        }
        pc.support = dilate(&g, &pc.own, &in_dom, 1);
    }

    let crossed_all: HashSet<(usize, usize)> = crossed_edges(&g, &all).into_iter().map(|e| (e.minus, e.plus)).collect();
    let scale = u.max_norm().max(1.0);
    let zero = 1e-12 * scale;
    let rcfg = RoughConfig { theta: cfg.theta, k: cfg.k, p: cfg.p, omega_constant: cfg.omega_constant };
    let halo = 12.0 / cfg.k as f64;

    // A piece only sees the jumps of its field inside its own region grown by
    // t; the edge of a reflected zone is where that field stops, not a crack.
    let reach = ((t / g.h()).round() as i64).max(1);
    let slack = t.max(2.0 / cfg.k as f64 + g.h());
    let everywhere = vec![true; g.num_nodes()];

    let results: Vec<PieceResult> = pieces
        .par_iter()
        .map(|pc| -> Result<PieceResult, NitscheError> {
            let near = dilate(&g, &pc.own, &everywhere, reach);
            let (field, jumps): (Cow<VectorField>, Cow<FacetSet>) = match pc.kind {
                PieceKind::Rest => (
                    Cow::Borrowed(&ext),
                    Cow::Owned(dual_facets(&g, |p, q| {
                        (crossed_all.contains(&(p, q)) && (near[p] && near[q])).then(|| norm2(ext.get(p), ext.get(q)))
                    })),
                ),
                PieceKind::Half { run, side } => {
                    let r = &runs[run].0;
                    let w = r.strip;
                    let band = Band {
                        axis: r.axis,
                        sign: -side,
                        at: r.gamma + side * w,
                        along: [r.along[0] - slack, r.along[1] + slack],
                        depth: 2.0 * w + t + halo,
                    };
                    let (uf, zone) = reflect_band(&ext, &band, &cfg.reflection);
                    let js = dual_facets(&g, |p, q| {
                        let d = norm2(uf.get(p), uf.get(q));
                        match (zone[p], zone[q]) {
                            (true, true) => None,
                            _ if !(near[p] && near[q]) => None,
                            (false, false) => crossed_all.contains(&(p, q)).then_some(d),
                            // the reflection face itself: continuous by construction
                            _ if on_face(&g, &band, p, q) => None,
                            _ => (d > zero).then_some(d),
                        }
                    });
                    (Cow::Owned(uf), Cow::Owned(js))
                }
            };
            let dom = bbox(&g, &pc.support).expect("pieces are nonempty");
            let a = rough_approximate(&field, &jumps, &rcfg, dom, Some(&pc.support))?;
            let nodes: Vec<usize> = (0..g.num_nodes()).filter(|&n| pc.support[n]).collect();
            let vals = nodes.iter().map(|&n| a.u_k.get(n)).collect();
            let bad = nodes.iter().map(|&n| a.bad_nodes[n]).collect();
            let corners = g.corners_per_cell();
            let e_cells = (0..g.num_cells())
                .filter(|&c| a.e_cells[c] && g.cell_corners(c)[..corners].iter().any(|&n| pc.own[n]))
                .collect();
            Ok(PieceResult { nodes, vals, bad, e_cells })
        })
        .collect::<Result<_, _>>()?;

    // assembly
    let mut u_k = VectorField::zeros(g);
    for n in 0..g.num_nodes() {
        if let Some(i) = piece_of[n] {
            u_k.set(n, results[i].at(n).expect("own node in support").0);
        }
    }

    let bands: Vec<([f64; 2], [f64; 2])> = cover.squares.iter().flat_map(|s| band_segments(s, t)).collect();
    let band_r = 10.0 * 2f64.sqrt() / cfg.k as f64;
    let same_run = |a: usize, b: usize| match (&pieces[a].kind, &pieces[b].kind) {
        (PieceKind::Half { run: ra, .. }, PieceKind::Half { run: rb, .. }) => ra == rb,
        _ => false,
    };
    let mut interface = InterfaceCheck::default();
    let mut jump_edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (p, q, axis) in edges_within(&g, &in_dom) {
        let (a, b) = (piece_of[p].unwrap(), piece_of[q].unwrap());
        let jump = if a == b {
            results[a].structural(p, q, zero)
        } else {
            let (ra, rb) = (&results[a], &results[b]);
            let differ = |n: usize| match (ra.at(n), rb.at(n)) {
                (Some(x), Some(y)) => norm2(x.0, y.0) > zero,
                _ => true,
            };
            if !same_run(a, b) {
                let mid = {
                    let (x, y) = (g.node_coord(p), g.node_coord(q));
                    [0.5 * (x[0] + y[0]), 0.5 * (x[1] + y[1])]
                };
                if !bands.iter().any(|&(s0, s1)| seg_dist(mid, s0, s1) < band_r) {
                    interface.checked += 1;
                    let exact = |n: usize| matches!((ra.at(n), rb.at(n)), (Some(x), Some(y)) if x.0 == y.0);
                    if !(exact(p) && exact(q)) {
                        interface.mismatched += 1;
                    }
                }
            }
            ra.structural(p, q, zero) || rb.structural(p, q, zero) || differ(p) || differ(q)
        };
        if jump {
            jump_edges.insert((p, q), dual_length(&g, p, axis, &domain));
        }
    }

    let jump = clip_facets(
        &dual_facets(&g, |p, q| jump_edges.contains_key(&(p, q)).then(|| norm2(u_k.get(p), u_k.get(q)))),
        &domain,
    );
    let ju = clip_facets(f, &domain);
    let mut u_edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in crossed_edges(&g, &ju) {
        if in_dom[e.minus] && in_dom[e.plus] {
            *u_edges.entry((e.minus, e.plus)).or_insert(0.0) += e.length;
        }
    }
    let mut symdiff = 0.0;
    for (e, &l) in &jump_edges {
        symdiff += (l - u_edges.get(e).copied().unwrap_or(0.0)).abs();
    }
    for (e, &l) in &u_edges {
        if !jump_edges.contains_key(e) {
            symdiff += l;
        }
    }

    // E_k: sub-approximation exceptional cells plus the strips
    let mut e_cells = vec![false; g.num_cells()];
    for r in &results {
        for &c in &r.e_cells {
            e_cells[c] = true;
        }
    }
    let dom_cells = g.cells_in(domain.lo, domain.hi);
    for &c in &dom_cells {
        let x = g.cell_center(c);
        if cover.squares.iter().any(|s| {
            let l = s.local(x);
            let d = l[1].abs();
            l[0].abs() < s.rho && d > s.strip && d < (3.0 * s.strip + t).min(s.rho)
        }) {
            e_cells[c] = true;
        }
    }

    let vol = g.cell_volume();
    let corners = g.corners_per_cell();
    let cracked_u = cracked_cells(&g, &ju);
    let cracked_k = cracked_cells(&g, &jump);
    let eu = sym_gradient(&ext);
    let ek = sym_gradient(&u_k);
    let (mut num, mut den, mut vol_ek, mut psi_gap) = (0.0, 0.0, 0.0, 0.0);
    for &c in &dom_cells {
        if e_cells[c] {
            vol_ek += vol;
        }
        let avg: f64 = g.cell_corners(c)[..corners]
            .iter()
            .map(|&n| (cfg.psi)(norm2(u_k.get(n), ext.get(n))))
            .sum::<f64>()
            / corners as f64;
        psi_gap += vol * avg;
        if cracked_u[c] || cracked_k[c] {
            continue;
        }
        let a = ek.get(c);
        let b = eu.get(c);
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + 2.0 * (a[2] - b[2]).powi(2)).sqrt();
        num += vol * d.powf(cfg.p);
        den += vol * eu.norm_at(c).powf(cfg.p);
    }
    // relative gap, or the plain one when e(u) vanishes
    let strain_lp_gap = if den > 0.0 { (num / den).powf(1.0 / cfg.p) } else { num.powf(1.0 / cfg.p) };
    let mut both = ju.clone();
    both.extend(&jump);
    let boundary = use_boundary.then_some(&domain);
    let trace_tau = trace_distance(&u_k, &ext, &both, boundary, &cfg.tau)?;

    let metrics = DensifyMetrics {
        eps: cfg.eps,
        theta: cfg.theta,
        k: cfg.k,
        jump_symdiff: symdiff,
        strain_lp_gap,
        vol_ek,
        trace_tau,
        psi_gap,
        strip_volume: cover.strip_volume(),
        cover_defect: cover.defect,
    };
    Ok(Densified { u_k, e_cells, jump, cover, pieces: pieces.len(), metrics, interface })
}
