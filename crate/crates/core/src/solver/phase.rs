use rayon::prelude::*;

use crate::fields::{cell_gradient, sym_gradient, ScalarField, VectorField};
use crate::phasefield::{ordered_sum, Degradation};

use super::ops::{node_cells, Stencil};
use super::sparse::{box_qp, dot, Csr};
use super::{SolveProblem, SolverError};

fn free_nodes(p: &SolveProblem) -> Vec<bool> {
    let mut free = vec![true; p.grid.num_nodes()];
    for &n in &p.v_one {
        free[n] = false;
    }
    free
}

/// Minimises the energy in `v ∈ [η, 1]` with `u` frozen, from `start`.
pub fn phase_step(p: &SolveProblem, u: &VectorField, start: ScalarField) -> Result<(ScalarField, usize), SolverError> {
    solve(p, u, start)
}

pub(crate) fn solve(p: &SolveProblem, u: &VectorField, start: ScalarField) -> Result<(ScalarField, usize), SolverError> {
    let m = &p.model;
    let mut start = start;
    for &n in &p.v_one {
        start.values_mut()[n] = 1.0;
    }
    if m.degradation == Degradation::At2 && m.q == 2.0 && m.bulk.is_linear_in_s() {
        let (h, b) = assemble(p, u);
        let mut x = start.values().to_vec();
        let free = free_nodes(p);
        let rep = box_qp(&h, &b, &mut x, &free, p.level.eta, 1.0, p.inner.tol, p.inner.max_iter);
        if rep.converged {
            return Ok((ScalarField::new(p.grid, x)?, rep.cg_iterations));
        }
        // active sets cycling: the projected method below always applies
        let (v, its) = projected(p, u, start)?;
        return Ok((v, its + rep.cg_iterations));
    }
    projected(p, u, start)
}

/// `W(1, e(u))` per cell.
fn cell_strain_energy(p: &SolveProblem, u: &VectorField) -> Vec<f64> {
    let e = sym_gradient(u);
    let m = &p.model;
    (0..p.grid.num_cells()).into_par_iter().map(|c| m.bulk.eval(1.0, e.get(c), m.p)).collect()
}

/// Hessian and load of the AT2 `v`-problem, `E(v) = ½ vᵀHv - bᵀv + const`.
pub(crate) fn assemble(p: &SolveProblem, u: &VectorField) -> (Csr, Vec<f64>) {
    let g = p.grid;
    let st = Stencil::of(&g);
    let nc = st.corners;
    let vol = g.cell_volume();
    let eps = p.level.eps;
    let w1 = cell_strain_energy(p, u);
    let gw = 2.0 * vol * p.model.a * eps;
    let mut t: Vec<(usize, usize, f64)> = (0..g.num_cells())
        .into_par_iter()
        .flat_map_iter(|c| {
            let cs = g.cell_corners(c);
            (0..nc).flat_map(move |a| (0..nc).map(move |b| (cs[a], cs[b], gw * (st.gx[a] * st.gx[b] + st.gy[a] * st.gy[b]))))
        })
        .collect();
    let mut rhs = vec![0.0; g.num_nodes()];
    for (n, r) in rhs.iter_mut().enumerate() {
        let w = g.node_weight(n);
        // (1 - v)^2 / (4ε) = w/(4ε) (1 - 2v + v²)
        t.push((n, n, w / (2.0 * eps)));
        let bulk: f64 = node_cells(&g, n).iter().map(|&(c, _)| vol * w1[c] / nc as f64).sum();
        *r = w / (2.0 * eps) - bulk;
    }
    (Csr::from_triplets(g.num_nodes(), t), rhs)
}

struct VProblem<'a> {
    p: &'a SolveProblem,
    e: crate::fields::SymTensorField,
}

impl VProblem<'_> {
    fn energy(&self, v: &ScalarField) -> f64 {
        let p = self.p;
        let g = p.grid;
        let m = &p.model;
        let vol = g.cell_volume();
        let vbar = v.cell_means();
        let grad = cell_gradient(v);
        let gw = m.a * p.level.eps.powf(m.q - 1.0);
        let cells = ordered_sum(g.num_cells(), |c| {
            let t = grad[c];
            vol * (m.bulk.eval(vbar[c], self.e.get(c), m.p) + gw * (t[0] * t[0] + t[1] * t[1]).sqrt().powf(m.q))
        });
        let nodes = ordered_sum(g.num_nodes(), |n| g.node_weight(n) * m.degradation.eval(v.get(n)) / p.level.eps);
        cells + nodes
    }

    fn gradient(&self, v: &ScalarField, free: &[bool]) -> Vec<f64> {
        let p = self.p;
        let g = p.grid;
        let m = &p.model;
        let st = Stencil::of(&g);
        let vol = g.cell_volume();
        let vbar = v.cell_means();
        let grad = cell_gradient(v);
        let gw = m.a * p.level.eps.powf(m.q - 1.0);
        let per_cell: Vec<(f64, [f64; 2])> = (0..g.num_cells())
            .into_par_iter()
            .map(|c| {
                let e = self.e.get(c);
                let ds = if m.bulk.is_linear_in_s() {
                    m.bulk.eval(1.0, e, m.p)
                } else {
                    let d = 1e-6;
                    let (a, b) = ((vbar[c] + d).min(1.0), (vbar[c] - d).max(0.0));
                    (m.bulk.eval(a, e, m.p) - m.bulk.eval(b, e, m.p)) / (a - b)
                };
                let t = grad[c];
                let n = (t[0] * t[0] + t[1] * t[1]).sqrt();
                let f = if n > 0.0 { gw * m.q * n.powf(m.q - 2.0) } else { 0.0 };
                (vol * ds / st.corners as f64, [vol * f * t[0], vol * f * t[1]])
            })
            .collect();
        (0..g.num_nodes())
            .into_par_iter()
            .map(|n| {
                if !free[n] {
                    return 0.0;
                }
                let mut s = g.node_weight(n) * m.degradation.deriv(v.get(n)) / p.level.eps;
                for (c, k) in node_cells(&g, n) {
                    let (b, t) = per_cell[c];
                    s += b + t[0] * st.gx[k] + t[1] * st.gy[k];
                }
                s
            })
            .collect()
    }
}

/// Spectral projected gradient: Barzilai-Borwein steps with a nonmonotone
/// Armijo test against the last few energies. The best iterate is returned.
pub(crate) fn projected(p: &SolveProblem, u: &VectorField, start: ScalarField) -> Result<(ScalarField, usize), SolverError> {
    const WINDOW: usize = 10;
    let g = p.grid;
    let eta = p.level.eta;
    let free = free_nodes(p);
    let vp = VProblem { p, e: sym_gradient(u) };
    let w = g.cell_volume();
    let project = |x: &[f64], gr: &[f64], t: f64| -> Vec<f64> {
        x.iter().zip(gr).zip(&free).map(|((xi, gi), &f)| if f { (xi - t * gi).clamp(eta, 1.0) } else { *xi }).collect()
    };
    let stat = |x: &[f64], gr: &[f64]| -> f64 {
        let r: Vec<f64> = project(x, gr, 1.0 / w).iter().zip(x).map(|(a, b)| a - b).collect();
        dot(&r, &r).sqrt()
    };
    let mut x = start.values().to_vec();
    let mut e = vp.energy(&start);
    let mut gr = vp.gradient(&start, &free);
    let s0 = stat(&x, &gr);
    if s0 == 0.0 {
        return Ok((start, 0));
    }
    let mut best = (e, x.clone());
    let mut stalls = 0;
    let mut recent = std::collections::VecDeque::from([e]);
    let mut t = 1.0 / w;
    for it in 1..=p.inner.max_iter {
        let d: Vec<f64> = project(&x, &gr, t).iter().zip(&x).map(|(a, b)| a - b).collect();
        let slope = dot(&gr, &d);
        let fref = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut lam = 1.0;
        let mut accepted = None;
        while lam > 1e-20 {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(a, b)| (a + lam * b).clamp(eta, 1.0)).collect();
            let ec = vp.energy(&ScalarField::new(g, cand.clone())?);
            if ec <= fref + 1e-4 * lam * slope {
                accepted = Some((cand, ec));
                break;
            }
            lam *= 0.5;
        }
        let Some((cand, ec)) = accepted else { break };
        let vc = ScalarField::new(g, cand.clone())?;
        let gn = vp.gradient(&vc, &free);
        let s: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&gr).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        t = if sy > 0.0 { (dot(&s, &s) / sy).clamp(1e-30, 1e30) } else { 1e3 * t.min(1e27) };
        stalls = if best.0 - ec <= 4.0 * f64::EPSILON * ec.abs() { stalls + 1 } else { 0 };
        x = cand;
        e = ec;
        gr = gn;
        if e < best.0 {
            best = (e, x.clone());
        }
        if recent.len() == WINDOW {
            recent.pop_front();
        }
        recent.push_back(e);
        if stat(&x, &gr) <= p.inner.tol * s0 || stalls >= 4 * WINDOW {
            return Ok((ScalarField::new(g, best.1)?, it));
        }
        if it == p.inner.max_iter {
            return Err(SolverError::NoConvergence { stage: "phase projected gradient", iterations: it });
        }
    }
    // stalled at machine precision
    Ok((ScalarField::new(g, best.1)?, p.inner.max_iter))
}

#[cfg(test)]
pub(crate) fn test_energy(p: &SolveProblem, u: &VectorField, v: &ScalarField) -> (f64, Vec<f64>) {
    let vp = VProblem { p, e: sym_gradient(u) };
    (vp.energy(v), vp.gradient(v, &vec![true; p.grid.num_nodes()]))
}
