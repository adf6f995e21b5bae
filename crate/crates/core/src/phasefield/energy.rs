use rayon::prelude::*;

use crate::crack::{cracked_cells, AxisBox, FacetSet};
use crate::fields::{cell_gradient, sym_gradient, FieldError, Grid, ScalarField, VectorField};

use super::{EnergyModel, Level, PhaseFieldError, Variant};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GriffithEnergy {
    pub bulk: f64,
    pub surface: f64,
    pub total: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AtEnergy {
    pub bulk: f64,
    pub regularization: f64,
    pub extra: f64,
    pub total: f64,
}

/// Sum of `f(0..n)` in fixed chunks, so the result does not depend on the
/// number of threads.
pub(crate) fn ordered_sum(n: usize, f: impl Fn(usize) -> f64 + Sync) -> f64 {
    const CHUNK: usize = 2048;
    let parts: Vec<f64> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| (c * CHUNK..((c + 1) * CHUNK).min(n)).map(&f).sum())
        .collect();
    parts.iter().sum()
}

fn grid_box(g: &Grid) -> AxisBox {
    AxisBox::new(g.origin(), g.upper())
}

/// `∫ W(1, e(u))` over cells not crossed by `F`, plus `α H^{n-1}(F)`.
pub fn griffith_energy(u: &VectorField, f: &FacetSet, model: &EnergyModel) -> Result<GriffithEnergy, PhaseFieldError> {
    let g = *u.grid();
    let e = sym_gradient(u);
    let cracked = cracked_cells(&g, f);
    let vol = g.cell_volume();
    let bulk = ordered_sum(g.num_cells(), |c| if cracked[c] { 0.0 } else { vol * model.bulk.eval(1.0, e.get(c), model.p) });
    let surface = if f.is_empty() { 0.0 } else { model.alpha()? * f.measure_in_box(&grid_box(&g)) };
    Ok(GriffithEnergy { bulk, surface, total: bulk + surface })
}

fn check_same(u: &VectorField, v: &ScalarField) -> Result<(), PhaseFieldError> {
    if *u.grid() != *v.grid() {
        return Err(FieldError::GridMismatch.into());
    }
    Ok(())
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

pub(crate) fn fidelity_term(u: &VectorField, g: &VectorField, model: &EnergyModel) -> f64 {
    let grid = *u.grid();
    ordered_sum(grid.num_nodes(), |n| grid.node_weight(n) * model.psi.eval(dist(u.get(n), g.get(n))))
}

/// The discrete phase-field functional: cell quadrature of `W(v̄, e(u))` and
/// `a ε^{q-1} |∇v|^q` (cell means and cell-centred differences), lumped nodal
/// quadrature of `d(v)/ε` and of the fidelity term.
pub fn at_energy(
    u: &VectorField,
    v: &ScalarField,
    level: Level,
    model: &EnergyModel,
    variant: Variant,
) -> Result<AtEnergy, PhaseFieldError> {
    check_same(u, v)?;
    let g = *u.grid();
    let slack = 1e-14;
    for (n, &x) in v.values().iter().enumerate() {
        if !(x >= level.eta - slack && x <= 1.0 + slack) {
            return Err(PhaseFieldError::ConstraintViolation {
                node: n,
                what: format!("v = {x} outside [{}, 1]", level.eta),
            });
        }
    }
    let extra = match variant {
        Variant::Plain => 0.0,
        Variant::Fidelity => {
            let datum = model.fidelity.as_ref().ok_or_else(|| PhaseFieldError::InvalidModel("fidelity variant needs a datum g".into()))?;
            if *datum.grid() != g {
                return Err(FieldError::GridMismatch.into());
            }
            fidelity_term(u, datum, model)
        }
        Variant::Dirichlet => {
            let d = model.dirichlet.as_ref().ok_or_else(|| PhaseFieldError::InvalidModel("Dirichlet variant needs u0".into()))?;
            let tol = 1e-12 * d.u0.max_norm().max(1.0);
            for &n in &d.nodes {
                if dist(u.get(n), d.u0.get(n)) > tol {
                    return Err(PhaseFieldError::ConstraintViolation { node: n, what: "u != u0 on the Dirichlet boundary".into() });
                }
                if v.get(n) != 1.0 {
                    return Err(PhaseFieldError::ConstraintViolation { node: n, what: "v != 1 on the Dirichlet boundary".into() });
                }
            }
            0.0
        }
    };
    let e = sym_gradient(u);
    let vbar = v.cell_means();
    let grad = cell_gradient(v);
    let vol = g.cell_volume();
    let bulk = ordered_sum(g.num_cells(), |c| vol * model.bulk.eval(vbar[c], e.get(c), model.p));
    let grad_w = model.a * level.eps.powf(model.q - 1.0);
    let reg_cells = ordered_sum(g.num_cells(), |c| {
        let t = grad[c];
        vol * grad_w * (t[0] * t[0] + t[1] * t[1]).sqrt().powf(model.q)
    });
    let reg_nodes = ordered_sum(g.num_nodes(), |n| g.node_weight(n) * model.degradation.eval(v.get(n)) / level.eps);
    let regularization = reg_nodes + reg_cells;
    Ok(AtEnergy { bulk, regularization, extra, total: bulk + regularization + extra })
}

/// `α` times the Dirichlet boundary where the trace misses `u0`: listed nodes
/// in 1D, boundary edges between two listed nodes in 2D. An edge counts whole
/// when `|u - u0|` exceeds the trace tolerance at either end.
fn dirichlet_surcharge(u: &VectorField, model: &EnergyModel, alpha: f64) -> Result<f64, PhaseFieldError> {
    let d = model.dirichlet.as_ref().ok_or_else(|| PhaseFieldError::InvalidModel("Dirichlet variant needs u0".into()))?;
    let g = *u.grid();
    let tol = model.trace_tol();
    let off = |n: usize| dist(u.get(n), d.u0.get(n)) > tol;
    if g.dim() == 1 {
        return Ok(alpha * d.nodes.iter().filter(|&&n| off(n)).count() as f64);
    }
    let mut listed = vec![false; g.num_nodes()];
    for &n in &d.nodes {
        listed[n] = true;
    }
    let [nx, ny] = g.node_counts();
    let mut len = 0.0;
    let mut edge = |a: usize, b: usize| {
        if listed[a] && listed[b] && (off(a) || off(b)) {
            len += g.h();
        }
    };
    for i in 0..nx - 1 {
        edge(g.node_index(i, 0), g.node_index(i + 1, 0));
        edge(g.node_index(i, ny - 1), g.node_index(i + 1, ny - 1));
    }
    for j in 0..ny - 1 {
        edge(g.node_index(0, j), g.node_index(0, j + 1));
        edge(g.node_index(nx - 1, j), g.node_index(nx - 1, j + 1));
    }
    Ok(alpha * len)
}

/// Sharp-interface limit: the Griffith energy with `W(1, ·)` and `α`, plus the
/// fidelity integral or the Dirichlet mismatch surcharge.
pub fn limit_energy(u: &VectorField, f: &FacetSet, model: &EnergyModel, variant: Variant) -> Result<f64, PhaseFieldError> {
    let base = griffith_energy(u, f, model)?;
    let extra = match variant {
        Variant::Plain => 0.0,
        Variant::Fidelity => {
            let datum = model.fidelity.as_ref().ok_or_else(|| PhaseFieldError::InvalidModel("fidelity variant needs a datum g".into()))?;
            fidelity_term(u, datum, model)
        }
        Variant::Dirichlet => dirichlet_surcharge(u, model, model.alpha()?)?,
    };
    Ok(base.total + extra)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crack::Facet;
    use crate::phasefield::{Dirichlet, Psi};
    use proptest::prelude::*;

    fn bar(n: usize) -> Grid {
        Grid::line(0.0, 1.0 / n as f64, n).unwrap()
    }

    fn lvl(eps: f64, eta: f64) -> Level {
        Level { eps, eta }
    }

    #[test]
    fn griffith_by_hand() {
        let g = bar(64);
        let m = EnergyModel::at2();
        let z = griffith_energy(&VectorField::zeros(g), &FacetSet::empty(1), &m).unwrap();
        assert_eq!(z.total, 0.0);
        let u = VectorField::from_fn(g, |x| [2.0 * x[0], 0.0]);
        let e = griffith_energy(&u, &FacetSet::empty(1), &m).unwrap();
        assert!((e.total - 4.0).abs() < 1e-12);
        let c = 0.5 + 0.5 / 64.0;
        let step = VectorField::from_fn(g, |x| [if x[0] > c { 1.0 } else { 0.0 }, 0.0]);
        let e = griffith_energy(&step, &FacetSet::new(1, vec![Facet::point(c)]).unwrap(), &m).unwrap();
        assert_eq!(e.bulk, 0.0);
        assert!((e.surface - 1.0).abs() < 1e-10);
    }

    #[test]
    fn constant_fields() {
        let g = bar(32);
        let m = EnergyModel::at2();
        let eta = 0.01;
        let v = ScalarField::constant(g, eta);
        let e = at_energy(&VectorField::zeros(g), &v, lvl(0.1, eta), &m, Variant::Plain).unwrap();
        let expect = m.degradation.eval(eta) / 0.1;
        assert!((e.total - expect).abs() < 1e-12);
        assert!(matches!(
            at_energy(&VectorField::zeros(g), &ScalarField::constant(g, 0.005), lvl(0.1, eta), &m, Variant::Plain),
            Err(PhaseFieldError::ConstraintViolation { node: 0, .. })
        ));
    }

    #[test]
    fn optimal_profile_costs_alpha() {
        let eps: f64 = 1.0 / 64.0;
        let h = eps / 8.0;
        let n = (1.0 / h).round() as usize;
        let g = bar(n);
        let x0 = 0.5;
        let v = ScalarField::from_fn(g, |x| 1.0 - (-(x[0] - x0).abs() / (2.0 * eps)).exp());
        let u = VectorField::from_fn(g, |x| [((x[0] - x0) / h + 0.5).clamp(0.0, 1.0), 0.0]);
        let e = at_energy(&u, &v, lvl(eps, 0.0), &EnergyModel::at2(), Variant::Plain).unwrap();
        assert!((e.regularization - 1.0).abs() < 0.1, "{}", e.regularization);
    }

    #[test]
    fn dirichlet_surcharge_counts_the_mismatch() {
        let g = bar(16);
        let mut m = EnergyModel::at2();
        let u0 = VectorField::zeros(g);
        m.dirichlet = Some(Dirichlet { nodes: vec![0, 16], u0: u0.clone() });
        let f = FacetSet::empty(1);
        assert_eq!(limit_energy(&u0, &f, &m, Variant::Dirichlet).unwrap(), 0.0);
        let mut u = VectorField::zeros(g);
        u.set(0, [1.0, 0.0]);
        // u jumps at the boundary node: one point of mismatch, bulk from the first cell
        let bulk = griffith_energy(&u, &f, &m).unwrap().bulk;
        let d = limit_energy(&u, &f, &m, Variant::Dirichlet).unwrap();
        assert!((d - bulk - 1.0).abs() < 1e-10);
        // at_energy enforces the boundary rows
        let v = ScalarField::constant(g, 1.0);
        assert!(at_energy(&u, &v, lvl(0.1, 0.01), &m, Variant::Dirichlet).is_err());
    }

    #[test]
    fn fidelity_vanishes_on_the_datum() {
        let g = Grid::rect([0.0, 0.0], 0.125, 8, 8).unwrap();
        let mut m = EnergyModel::at2();
        m.psi = Psi::Power(0.5);
        let u = VectorField::from_fn(g, |x| [x[0], x[1] * x[1]]);
        m.fidelity = Some(u.clone());
        let f = FacetSet::empty(2);
        let l = limit_energy(&u, &f, &m, Variant::Fidelity).unwrap();
        assert!((l - griffith_energy(&u, &f, &m).unwrap().total).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn v_equal_one_is_griffith(seed in 0u64..1000) {
            let g = Grid::rect([0.0, 0.0], 0.125, 8, 8).unwrap();
            let s = seed as f64;
            let u = VectorField::from_fn(g, |x| [(s + 3.0 * x[0]).sin() * x[1], (s * 0.3 + x[0] * x[1]).cos()]);
            let m = EnergyModel::at2();
            let a = at_energy(&u, &ScalarField::constant(g, 1.0), lvl(0.1, 0.01), &m, Variant::Plain).unwrap();
            let b = griffith_energy(&u, &FacetSet::empty(2), &m).unwrap();
            prop_assert_eq!(a.regularization, 0.0);
            prop_assert!((a.total - b.bulk).abs() <= 1e-12 * b.bulk.max(1.0));
        }

        #[test]
        fn bulk_is_monotone_in_v(vals in prop::collection::vec((0.01f64..1.0, 0.0f64..1.0), 81)) {
            let g = Grid::rect([0.0, 0.0], 0.125, 8, 8).unwrap();
            let u = VectorField::from_fn(g, |x| [x[0] * x[1], (2.0 * x[0]).sin()]);
            let v1: Vec<f64> = vals.iter().map(|p| p.0).collect();
            let v2: Vec<f64> = vals.iter().map(|p| p.0 + p.1 * (1.0 - p.0)).collect();
            let m = EnergyModel::at2();
            let e1 = at_energy(&u, &ScalarField::new(g, v1).unwrap(), lvl(0.1, 0.01), &m, Variant::Plain).unwrap();
            let e2 = at_energy(&u, &ScalarField::new(g, v2).unwrap(), lvl(0.1, 0.01), &m, Variant::Plain).unwrap();
            prop_assert!(e1.bulk <= e2.bulk + 1e-15);
        }
    }
}
