use rayon::prelude::*;

use crate::fields::{sym_gradient, ScalarField, VectorField};
use crate::phasefield::{fidelity_term, ordered_sum, Bulk, Psi, Variant};

use super::ops::{node_cells, Stencil};
use super::sparse::{cg, dot, Csr};
use super::{SolveProblem, SolverError};

/// `u` with the Dirichlet rows set to `u0`.
pub(crate) fn with_boundary(p: &SolveProblem, mut u: VectorField) -> VectorField {
    if let (Some(d), Variant::Dirichlet) = (&p.model.dirichlet, p.variant) {
        for &n in &d.nodes {
            u.set(n, d.u0.get(n));
        }
    }
    u
}

fn free_dofs(p: &SolveProblem) -> Vec<bool> {
    let dim = p.grid.dim();
    let mut free = vec![true; dim * p.grid.num_nodes()];
    for &n in p.dirichlet_nodes() {
        for k in 0..dim {
            free[dim * n + k] = false;
        }
    }
    free
}

/// `W(1, e) = eᵀ D e` for the quadratic densities, `e = [xx, yy, xy]`.
fn strain_form(bulk: &Bulk, dim: usize) -> Vec<[f64; 3]> {
    let (lambda, mu) = match bulk {
        Bulk::Lame { lambda, mu } => (*lambda, *mu),
        _ => (0.0, 0.5),
    };
    if dim == 1 {
        return vec![[lambda + 2.0 * mu, 0.0, 0.0]];
    }
    vec![
        [lambda + 2.0 * mu, lambda, 0.0],
        [lambda, lambda + 2.0 * mu, 0.0],
        [0.0, 0.0, 4.0 * mu],
    ]
}

fn quadratic_psi(p: &SolveProblem) -> bool {
    p.variant != Variant::Fidelity || matches!(p.model.psi, Psi::Power(r) if r == 2.0)
}

/// Minimises the energy in `u` with `v` frozen, from `start`. Returns the new
/// field and the inner iteration count.
pub fn elastic_step(p: &SolveProblem, v: &ScalarField, start: VectorField) -> Result<(VectorField, usize), SolverError> {
    solve(p, v, start)
}

pub(crate) fn solve(p: &SolveProblem, v: &ScalarField, start: VectorField) -> Result<(VectorField, usize), SolverError> {
    let start = with_boundary(p, start);
    if p.model.bulk.is_quadratic(p.model.p) && quadratic_psi(p) {
        quadratic(p, v, start)
    } else {
        descent(p, v, start)
    }
}

/// Stiffness `K` and load `b` with `E(u) = ½ uᵀKu - bᵀu + const`.
pub(crate) fn assemble(p: &SolveProblem, v: &ScalarField) -> (Csr, Vec<f64>) {
    let g = p.grid;
    let dim = g.dim();
    let st = Stencil::of(&g);
    let b = st.strain_rows(dim);
    let d = strain_form(&p.model.bulk, dim);
    let nloc = dim * st.corners;
    // local BᵀDB, the same in every cell up to the weight
    let mut local = vec![vec![0.0; nloc]; nloc];
    for (a, la) in local.iter_mut().enumerate() {
        for (c, lac) in la.iter_mut().enumerate() {
            let mut s = 0.0;
            for (i, bi) in b.iter().enumerate() {
                for (j, bj) in b.iter().enumerate() {
                    s += bi[a] * d[i][j] * bj[c];
                }
            }
            *lac = s;
        }
    }
    let vbar = v.cell_means();
    let vol = g.cell_volume();
    let dof = |c: usize, a: usize| dim * g.cell_corners(c)[a / dim] + a % dim;
    let mut t: Vec<(usize, usize, f64)> = (0..g.num_cells())
        .into_par_iter()
        .flat_map_iter(|c| {
            let w = 2.0 * vol * vbar[c];
            let local = &local;
            (0..nloc).flat_map(move |a| (0..nloc).map(move |e| (dof(c, a), dof(c, e), w * local[a][e])))
        })
        .collect();
    let mut rhs = vec![0.0; dim * g.num_nodes()];
    if p.variant == Variant::Fidelity {
        let datum = p.model.fidelity.as_ref().expect("validated");
        for n in 0..g.num_nodes() {
            let w = 2.0 * g.node_weight(n);
            let gn = datum.get(n);
            for k in 0..dim {
                t.push((dim * n + k, dim * n + k, w));
                rhs[dim * n + k] = w * gn[k];
            }
        }
    }
    (Csr::from_triplets(dim * g.num_nodes(), t), rhs)
}

fn quadratic(p: &SolveProblem, v: &ScalarField, start: VectorField) -> Result<(VectorField, usize), SolverError> {
    let (k, rhs) = assemble(p, v);
    let free = free_dofs(p);
    let g = p.grid;
    let mut x = start.into_data();
    let rep = cg(&k, &rhs, &mut x, &free, p.inner.tol, p.inner.max_iter);
    if !rep.converged {
        return Err(SolverError::NoConvergence { stage: "elastic CG", iterations: rep.iterations });
    }
    Ok((VectorField::new(g, x)?, rep.iterations))
}

/// The `u`-dependent part of the energy.
fn energy_u(p: &SolveProblem, vbar: &[f64], u: &VectorField) -> f64 {
    let g = p.grid;
    let e = sym_gradient(u);
    let vol = g.cell_volume();
    let m = &p.model;
    let bulk = ordered_sum(g.num_cells(), |c| vol * m.bulk.eval(vbar[c], e.get(c), m.p));
    let extra = match p.variant {
        Variant::Fidelity => fidelity_term(u, m.fidelity.as_ref().expect("validated"), m),
        _ => 0.0,
    };
    bulk + extra
}

fn psi_deriv(psi: &Psi, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    match psi {
        Psi::Power(r) => r * s.powf(r - 1.0),
        Psi::Custom { f, .. } => {
            let d = 1e-7 * s.max(1e-3);
            (f(s + d) - f((s - d).max(0.0))) / (s + d - (s - d).max(0.0))
        }
    }
}

fn gradient_u(p: &SolveProblem, vbar: &[f64], u: &VectorField, free: &[bool]) -> Vec<f64> {
    let g = p.grid;
    let dim = g.dim();
    let st = Stencil::of(&g);
    let e = sym_gradient(u);
    let vol = g.cell_volume();
    let m = &p.model;
    let sig: Vec<[f64; 3]> = (0..g.num_cells()).into_par_iter().map(|c| m.bulk.stress(vbar[c], e.get(c), m.p)).collect();
    let datum = (p.variant == Variant::Fidelity).then(|| m.fidelity.as_ref().expect("validated"));
    let mut out: Vec<f64> = (0..g.num_nodes())
        .into_par_iter()
        .flat_map_iter(|n| {
            let mut gr = [0.0; 2];
            for (c, k) in node_cells(&g, n) {
                let s = sig[c];
                if dim == 1 {
                    gr[0] += vol * s[0] * st.gx[k];
                } else {
                    // pairing weight 2 on xy against ∂e_xy/∂u = ½ g
                    gr[0] += vol * (s[0] * st.gx[k] + s[2] * st.gy[k]);
                    gr[1] += vol * (s[1] * st.gy[k] + s[2] * st.gx[k]);
                }
            }
            if let Some(d) = datum {
                let (a, b) = (u.get(n), d.get(n));
                let diff = [a[0] - b[0], a[1] - b[1]];
                let s = (diff[0] * diff[0] + diff[1] * diff[1]).sqrt();
                if s > 0.0 {
                    let c = g.node_weight(n) * psi_deriv(&m.psi, s) / s;
                    gr[0] += c * diff[0];
                    gr[1] += c * diff[1];
                }
            }
            gr.into_iter().take(dim)
        })
        .collect();
    for (o, &f) in out.iter_mut().zip(free) {
        if !f {
            *o = 0.0;
        }
    }
    out
}

/// Limited-memory BFGS with Armijo backtracking.
pub(crate) fn descent(p: &SolveProblem, v: &ScalarField, start: VectorField) -> Result<(VectorField, usize), SolverError> {
    const MEMORY: usize = 10;
    let g = p.grid;
    let vbar = v.cell_means();
    let free = free_dofs(p);
    let mut u = start;
    let mut e = energy_u(p, &vbar, &u);
    let mut gr = gradient_u(p, &vbar, &u, &free);
    let g0 = dot(&gr, &gr).sqrt();
    if g0 == 0.0 {
        return Ok((u, 0));
    }
    let mut stalls = 0;
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = std::collections::VecDeque::new();
    for it in 1..=p.inner.max_iter {
        // two-loop recursion
        let mut q = gr.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = match hist.back() {
            Some((s, y, _)) => dot(s, y) / dot(y, y),
            None => 1.0 / g0.max(1.0),
        };
        q.iter_mut().for_each(|x| *x *= gamma);
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|x| -x).collect();
        let mut slope = dot(&gr, &d);
        if slope >= 0.0 {
            hist.clear();
            d = gr.iter().map(|x| -x / g0.max(1.0)).collect();
            slope = dot(&gr, &d);
        }
        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-20 {
            let mut trial = u.data().to_vec();
            trial.iter_mut().zip(&d).for_each(|(x, di)| *x += t * di);
            let cand = VectorField::new(g, trial)?;
            let ec = energy_u(p, &vbar, &cand);
            if ec <= e + 1e-4 * t * slope {
                accepted = Some((cand, ec));
                break;
            }
            t *= 0.5;
        }
        // no decrease left at machine precision: stationary
        let Some((cand, ec)) = accepted else { return Ok((u, it)) };
        let gn = gradient_u(p, &vbar, &cand, &free);
        let s: Vec<f64> = cand.data().iter().zip(u.data()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&gr).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if hist.len() == MEMORY {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        stalls = if e - ec <= 4.0 * f64::EPSILON * e.abs() { stalls + 1 } else { 0 };
        u = cand;
        e = ec;
        gr = gn;
        // the second test catches tolerances below what rounding lets the energy resolve
        if dot(&gr, &gr).sqrt() <= p.inner.tol * g0 || stalls >= 5 {
            return Ok((u, it));
        }
    }
    Err(SolverError::NoConvergence { stage: "elastic descent", iterations: p.inner.max_iter })
}

#[cfg(test)]
pub(crate) fn test_gradient(p: &SolveProblem, v: &ScalarField, u: &VectorField) -> (f64, Vec<f64>) {
    let vbar = v.cell_means();
    let free = vec![true; p.grid.dim() * p.grid.num_nodes()];
    (energy_u(p, &vbar, u), gradient_u(p, &vbar, u, &free))
}
