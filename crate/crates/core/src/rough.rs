//! Rough approximation at scale `k`: rigid fits on good cubes patched into `u`,
//! mollified, and cut off on the bad region.

use rayon::prelude::*;

use crate::crack::{
    classify_nodes, cracked_cells, dual_facets, AxisBox, CrackError, CubeKind, CubeLattice, FacetSet,
    NodeClassification,
};
use crate::fields::{mollify_vector, sym_gradient, FieldError, Grid, Mollifier, VectorField};
use crate::korn::{fit_with_exceptional, FitResult, KornError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RoughError {
    #[error("halo {halo} too small for k = {k}: need k >= {needed}")]
    HaloTooSmall { k: u32, needed: u32, halo: f64 },
    #[error("no fit for good lattice node {0}")]
    MissingFit(usize),
    #[error(transparent)]
    Crack(#[from] CrackError),
    #[error(transparent)]
    Korn(#[from] KornError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

impl RoughError {
    pub fn scale_mismatch(&self) -> bool {
        matches!(self, RoughError::Crack(CrackError::ScaleMismatch { .. }))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoughConfig {
    pub theta: f64,
    pub k: u32,
    pub p: f64,
    /// `c` in the exceptional-set budget `c r H^{n-1}(J_u ∩ Q_z)`, `r = 4/k`.
    pub omega_constant: f64,
}

impl RoughConfig {
    pub fn new(theta: f64, k: u32) -> Self {
        RoughConfig { theta, k, p: 2.0, omega_constant: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct RoughApproximant {
    pub u_k: VectorField,
    pub tilde_u: VectorField,
    pub classification: NodeClassification,
    /// Fit per lattice node (good nodes only).
    pub fits: Vec<Option<FitResult>>,
    /// Lattice node whose fit replaced `u` at a grid node.
    pub owner: Vec<Option<usize>>,
    pub omega_cells: Vec<bool>,
    pub e_cells: Vec<bool>,
    pub bad_nodes: Vec<bool>,
    pub region_nodes: Vec<bool>,
    pub domain: AxisBox,
    /// Discontinuities of `u_k`, all on the boundary of the bad region.
    pub jump: FacetSet,
}

/// Distance from the domain to the edge of the grid box.
pub fn halo_width(grid: &Grid, domain: &AxisBox) -> f64 {
    let lo = grid.origin();
    let hi = grid.upper();
    (0..grid.dim())
        .map(|a| (domain.lo[a] - lo[a]).min(hi[a] - domain.hi[a]))
        .fold(f64::INFINITY, f64::min)
}

pub fn check_halo(grid: &Grid, domain: &AxisBox, k: u32) -> Result<(), RoughError> {
    let halo = halo_width(grid, domain);
    let needed = if halo > 0.0 {
        (12.0 * (grid.dim() as f64).sqrt() / halo - 1e-9).ceil() as u32
    } else {
        u32::MAX
    };
    if k < needed {
        return Err(RoughError::HaloTooSmall { k, needed, halo });
    }
    Ok(())
}

/// `ũ`: `u` off `ω^k`; on `ω_j ∖ ∪_{i<j} ω_i` the fit `a_{z_j}`, with good nodes
/// ordered row-major. Returns the field and the owner of each replaced node.
pub fn build_tilde_u(
    u: &VectorField,
    classification: &NodeClassification,
    fits: &[Option<FitResult>],
) -> Result<(VectorField, Vec<Option<usize>>), RoughError> {
    let g = *u.grid();
    let mut out = u.clone();
    let mut owner: Vec<Option<usize>> = vec![None; g.num_nodes()];
    let corners = g.corners_per_cell();
    for (j, &good) in classification.good.iter().enumerate() {
        if !good {
            continue;
        }
        let fit = fits
            .get(j)
            .and_then(|f| f.as_ref())
            .ok_or(RoughError::MissingFit(j))?;
        for &c in &fit.omega.cells {
            for &n in &g.cell_corners(c)[..corners] {
                if owner[n].is_none() {
                    owner[n] = Some(j);
                    out.set(n, fit.map.eval(g.node_coord(n)));
                }
            }
        }
    }
    Ok((out, owner))
}

/// Rough approximation on `domain` (nodes of the closed box, optionally restricted
/// further by `region`). The grid must extend beyond the domain by the halo the
/// scale requires.
pub fn rough_approximate(
    u: &VectorField,
    facets: &FacetSet,
    cfg: &RoughConfig,
    domain: AxisBox,
    region: Option<&[bool]>,
) -> Result<RoughApproximant, RoughError> {
    let g = *u.grid();
    check_halo(&g, &domain, cfg.k)?;
    let lattice = CubeLattice::for_grid(&g, domain, cfg.k)?;
    let classification = classify_nodes(facets, &lattice, cfg.theta)?;
    let r = 4.0 / cfg.k as f64;

    let fits: Vec<Option<FitResult>> = (0..lattice.len())
        .into_par_iter()
        .map(|i| -> Result<Option<FitResult>, RoughError> {
            if !classification.good[i] {
                return Ok(None);
            }
            let q = lattice.cube(i, CubeKind::Large);
            let qp = lattice.cube(i, CubeKind::SmallTilde);
            let budget = cfg.omega_constant * r * classification.measure[i];
            Ok(Some(fit_with_exceptional(u, &q, &qp, budget, cfg.p)?))
        })
        .collect::<Result<_, _>>()?;

    let (tilde_u, owner) = build_tilde_u(u, &classification, &fits)?;

    let mut region_nodes = vec![false; g.num_nodes()];
    for n in g.nodes_in(domain.lo, domain.hi) {
        region_nodes[n] = region.map_or(true, |m| m[n]);
    }
    // only region nodes are ever read, so skip the rest of the grid
    let bad_nodes: Vec<bool> = (0..g.num_nodes())
        .into_par_iter()
        .map(|n| region_nodes[n] && classification.in_bad_region(g.node_coord(n)))
        .collect();
    let live: Vec<bool> = (0..g.num_nodes()).map(|n| region_nodes[n] && !bad_nodes[n]).collect();
    let moll = Mollifier::bump(&g, cfg.k as f64);
    let mut u_k = mollify_vector(&tilde_u, &moll, Some(&live))?;
    for n in 0..g.num_nodes() {
        if !live[n] {
            u_k.set(n, [0.0, 0.0]);
        }
    }

    let mut omega_cells = vec![false; g.num_cells()];
    for f in fits.iter().flatten() {
        for &c in &f.omega.cells {
            omega_cells[c] = true;
        }
    }
    let mut e_cells = vec![false; g.num_cells()];
    for c in domain_cells(&g, &domain, &region_nodes) {
        e_cells[c] = omega_cells[c] || classification.in_bad_region(g.cell_center(c));
    }

    let zero = 1e-12 * u.max_norm().max(1.0);
    let jump = dual_facets(&g, |p, q| {
        if !(region_nodes[p] && region_nodes[q]) || bad_nodes[p] == bad_nodes[q] {
            return None;
        }
        let a = u_k.get(p);
        let b = u_k.get(q);
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        (d > zero).then_some(d)
    });

    Ok(RoughApproximant {
        u_k,
        tilde_u,
        classification,
        fits,
        owner,
        omega_cells,
        e_cells,
        bad_nodes,
        region_nodes,
        domain,
        jump,
    })
}

/// Cells with centre in the domain box and all corners in the region.
pub fn domain_cells(g: &Grid, domain: &AxisBox, region_nodes: &[bool]) -> Vec<usize> {
    let k = g.corners_per_cell();
    g.cells_in(domain.lo, domain.hi)
        .into_iter()
        .filter(|&c| g.cell_corners(c)[..k].iter().all(|&n| region_nodes[n]))
        .collect()
}

/// Measured quantities of the rough approximation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoughReport {
    pub vol_ek: f64,
    /// `‖u_k - u‖_{L^p(Ω∖E_k)}`
    pub lp_gap: f64,
    /// `∫|e(u_k)|^p / ∫|e(u)|^p`, jump cells excluded on both sides.
    pub bulk_ratio: f64,
    /// `H^{n-1}(J_{u_k}) / H^{n-1}(J_u)`
    pub jump_ratio: f64,
    /// `∫_Ω ψ(|u_k - u|)`
    pub psi_gap: f64,
}

fn cell_avg(g: &Grid, c: usize, f: impl Fn(usize) -> f64) -> f64 {
    let k = g.corners_per_cell();
    g.cell_corners(c)[..k].iter().map(|&n| f(n)).sum::<f64>() / k as f64
}

pub fn verify_rough_bounds(
    u: &VectorField,
    facets: &FacetSet,
    approx: &RoughApproximant,
    p: f64,
    psi: &dyn Fn(f64) -> f64,
) -> RoughReport {
    let g = *u.grid();
    let vol = g.cell_volume();
    let cells = domain_cells(&g, &approx.domain, &approx.region_nodes);
    let diff = |n: usize| {
        let a = approx.u_k.get(n);
        let b = u.get(n);
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    };
    let mut vol_ek = 0.0;
    let mut lp = 0.0;
    let mut psi_gap = 0.0;
    for &c in &cells {
        psi_gap += vol * cell_avg(&g, c, |n| psi(diff(n)));
        if approx.e_cells[c] {
            vol_ek += vol;
        } else {
            lp += vol * cell_avg(&g, c, |n| diff(n).powf(p));
        }
    }
    let cracked_u = cracked_cells(&g, facets);
    let cracked_k = cracked_cells(&g, &approx.jump);
    let eu = sym_gradient(u);
    let ek = sym_gradient(&approx.u_k);
    let (mut bu, mut bk) = (0.0, 0.0);
    for &c in &cells {
        if !cracked_u[c] {
            bu += vol * eu.norm_at(c).powf(p);
        }
        if !cracked_k[c] {
            bk += vol * ek.norm_at(c).powf(p);
        }
    }
    let in_domain = AxisBox::new(
        approx.domain.lo,
        [approx.domain.hi[0] + 1e-9 * g.h(), approx.domain.hi[1] + 1e-9 * g.h()],
    );
    let ju = facets.measure_in_box(&in_domain);
    let jk = approx.jump.measure_in_box(&in_domain);
    RoughReport {
        vol_ek,
        lp_gap: lp.powf(1.0 / p),
        bulk_ratio: if bu > 0.0 { bk / bu } else { f64::NAN },
        jump_ratio: if ju > 0.0 { jk / ju } else { f64::NAN },
        psi_gap,
    }
}
