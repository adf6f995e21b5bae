//! Truncated trace distance between two fields along jump facets and `∂Ω`.

use std::collections::BTreeMap;

use crate::crack::{crossed_edges, AxisBox, FacetSet};
use crate::fields::VectorField;

use super::NitscheError;

/// Samples `tau` on `[-10, 10]`: values in `[-1/2, 1/2]` and a central
/// difference slope in `[0, 1]`.
pub fn validate_tau(tau: &dyn Fn(f64) -> f64) -> Result<(), NitscheError> {
    let n = 2000;
    let d = 1e-5;
    for i in 0..=n {
        let s = -10.0 + 20.0 * i as f64 / n as f64;
        let v = tau(s);
        if !v.is_finite() || v.abs() > 0.5 + 1e-12 {
            return Err(NitscheError::InvalidTau(format!("tau({s}) = {v} outside [-1/2, 1/2]")));
        }
        let slope = (tau(s + d) - tau(s - d)) / (2.0 * d);
        if !(slope >= -1e-6 && slope <= 1.0 + 1e-6) {
            return Err(NitscheError::InvalidTau(format!("tau'({s}) ~ {slope} outside [0, 1]")));
        }
    }
    Ok(())
}

fn gap(a: &VectorField, b: &VectorField, n: usize) -> f64 {
    let x = a.get(n);
    let y = b.get(n);
    ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt()
}

/// `Σ_facets len [τ(|Δ^-|) + τ(|Δ^+|)]` with `Δ = u_k - u` read at the node on
/// each side of the facet, each crossed edge counted once; plus, when `boundary`
/// is given, `∫_{∂Ω} τ(|u_k - u|)` by the trapezoid rule on the boundary nodes.
pub fn trace_distance(
    u_k: &VectorField,
    u: &VectorField,
    facets: &FacetSet,
    boundary: Option<&AxisBox>,
    tau: &dyn Fn(f64) -> f64,
) -> Result<f64, NitscheError> {
    validate_tau(tau)?;
    let g = *u.grid();
    if *u_k.grid() != g {
        return Err(crate::fields::FieldError::GridMismatch.into());
    }
    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for e in crossed_edges(&g, facets) {
        let l = edges.entry((e.minus, e.plus)).or_insert(0.0);
        *l = l.max(e.length);
    }
    let mut total = 0.0;
    for (&(m, p), &len) in &edges {
        total += len * (tau(gap(u_k, u, m)) + tau(gap(u_k, u, p)));
    }
    if let Some(b) = boundary {
        let h = g.h();
        let nodes = g.nodes_in(b.lo, b.hi);
        for n in nodes {
            let x = g.node_coord(n);
            let tol = 1e-9 * h;
            let mut w = 0.0;
            for a in 0..2 {
                // on a face normal to axis a, weight by the share of that face
                if (x[a] - b.lo[a]).abs() < tol || (x[a] - b.hi[a]).abs() < tol {
                    let o = 1 - a;
                    let end = (x[o] - b.lo[o]).abs() < tol || (x[o] - b.hi[o]).abs() < tol;
                    w += if end { 0.5 * h } else { h };
                }
            }
            if w > 0.0 {
                total += w * tau(gap(u_k, u, n));
            }
        }
    }
    Ok(total)
}
