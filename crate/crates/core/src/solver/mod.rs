//! Staggered minimisation of the discrete phase-field functionals: `u` with `v`
//! frozen, then `v` with `u` frozen, until the energy stops decreasing.

use crate::fields::{FieldError, Grid, ScalarField, VectorField};
use crate::phasefield::{at_energy, AtEnergy, EnergyModel, Level, PhaseFieldError, Variant};

mod blowup;
mod elastic;
mod ops;
mod phase;
pub mod sparse;

pub use blowup::{detect_blowup, BlowupReport};
pub use elastic::elastic_step;
pub use phase::phase_step;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("{stage} did not converge in {iterations} iterations")]
    NoConvergence { stage: &'static str, iterations: usize },
    #[error("{stage} raised the energy from {before} to {after}")]
    EnergyIncrease { stage: &'static str, before: f64, after: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error(transparent)]
    PhaseField(#[from] PhaseFieldError),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerSettings {
    pub max_iter: usize,
    /// Relative residual for CG, relative gradient norm for descent.
    pub tol: f64,
}

impl Default for InnerSettings {
    fn default() -> Self {
        InnerSettings { max_iter: 20_000, tol: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct SolveProblem {
    pub grid: Grid,
    /// `model.dirichlet` holds the `u = u0` nodes when the variant is Dirichlet.
    pub model: EnergyModel,
    pub variant: Variant,
    /// Nodes where `v = 1` is imposed.
    pub v_one: Vec<usize>,
    pub level: Level,
    pub u_init: Option<VectorField>,
    pub v_init: Option<ScalarField>,
    pub tol_e: f64,
    pub max_outer: usize,
    pub inner: InnerSettings,
}

impl SolveProblem {
    /// Defaults: `tol_E = 1e-8`, 200 outer iterations; `v = 1` on the Dirichlet
    /// nodes for that variant.
    pub fn new(grid: Grid, model: EnergyModel, variant: Variant, level: Level) -> Self {
        let v_one = match (&model.dirichlet, variant) {
            (Some(d), Variant::Dirichlet) => d.nodes.clone(),
            _ => Vec::new(),
        };
        SolveProblem { grid, model, variant, v_one, level, u_init: None, v_init: None, tol_e: 1e-8, max_outer: 200, inner: InnerSettings::default() }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |m: String| Err(SolverError::InvalidProblem(m));
        if !(self.level.eta > 0.0 && self.level.eta < 1.0) {
            return bad(format!("eta = {} not in (0, 1)", self.level.eta));
        }
        if !(self.level.eps > 0.0) {
            return bad(format!("eps = {} must be positive", self.level.eps));
        }
        if !(self.tol_e > 0.0) {
            return bad("tol_E must be positive".into());
        }
        self.model.validate(self.grid.dim())?;
        if self.variant == Variant::Dirichlet {
            let d = self.model.dirichlet.as_ref().ok_or_else(|| SolverError::InvalidProblem("Dirichlet variant without u0".into()))?;
            if *d.u0.grid() != self.grid {
                return Err(FieldError::GridMismatch.into());
            }
            if let Some(&n) = d.nodes.iter().find(|&&n| n >= self.grid.num_nodes() || !self.grid.is_boundary_node(n)) {
                return bad(format!("Dirichlet node {n} is not a boundary node"));
            }
        }
        if self.variant == Variant::Fidelity {
            match &self.model.fidelity {
                Some(g) if *g.grid() == self.grid => {}
                Some(_) => return Err(FieldError::GridMismatch.into()),
                None => return bad("fidelity variant without a datum".into()),
            }
        }
        if self.v_one.iter().any(|&n| n >= self.grid.num_nodes()) {
            return bad("v = 1 node out of range".into());
        }
        Ok(())
    }

    pub(crate) fn dirichlet_nodes(&self) -> &[usize] {
        match (&self.model.dirichlet, self.variant) {
            (Some(d), Variant::Dirichlet) => &d.nodes,
            _ => &[],
        }
    }

    pub fn energy(&self, u: &VectorField, v: &ScalarField) -> Result<AtEnergy, SolverError> {
        Ok(at_energy(u, v, self.level, &self.model, self.variant)?)
    }

    /// Rejects a half-step that raised the energy by more than `1e-12` relative.
    pub(crate) fn check_decrease(&self, stage: &'static str, before: f64, after: f64) -> Result<(), SolverError> {
        if after > before + 1e-12 * before.abs().max(1e-300) + 1e-300 {
            return Err(SolverError::EnergyIncrease { stage, before, after });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub bulk: f64,
    pub regularization: f64,
    pub extra: f64,
    pub total: f64,
    pub min_v: f64,
    pub max_u: f64,
    pub inner_iterations: usize,
}

impl TraceRow {
    fn new(e: AtEnergy, u: &VectorField, v: &ScalarField, inner: usize) -> Self {
        TraceRow {
            bulk: e.bulk,
            regularization: e.regularization,
            extra: e.extra,
            total: e.total,
            min_v: v.values().iter().cloned().fold(f64::INFINITY, f64::min),
            max_u: u.max_norm(),
            inner_iterations: inner,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveTrace {
    /// The starting pair `(u⁰, v⁰)`.
    pub initial: TraceRow,
    /// One row per outer iteration.
    pub rows: Vec<TraceRow>,
    pub converged: bool,
}

impl SolveTrace {
    pub fn outer_iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn last(&self) -> &TraceRow {
        self.rows.last().unwrap_or(&self.initial)
    }

    pub fn is_monotone(&self) -> bool {
        let mut prev = self.initial.total;
        self.rows.iter().all(|r| {
            let ok = r.total <= prev + 1e-12 * prev.abs().max(1e-300);
            prev = r.total;
            ok
        })
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub u: VectorField,
    pub v: ScalarField,
    pub energy: AtEnergy,
    pub trace: SolveTrace,
}

/// Starting phase field: `v_init` or 1, brought into `[η, 1]` with the `v = 1`
/// rows imposed.
fn initial_v(p: &SolveProblem) -> Result<ScalarField, SolverError> {
    let mut v = match &p.v_init {
        Some(v) if *v.grid() != p.grid => return Err(FieldError::GridMismatch.into()),
        Some(v) => v.clone(),
        None => ScalarField::constant(p.grid, 1.0),
    };
    let eta = p.level.eta;
    for x in v.values_mut() {
        *x = x.clamp(eta, 1.0);
    }
    for &n in &p.v_one {
        v.values_mut()[n] = 1.0;
    }
    Ok(v)
}

/// Alternates elastic and phase steps from `v⁰` (default 1) and `u⁰` (default
/// the elastic solve at `v⁰`) until the relative decrease drops below `tol_E`
/// or `max_outer` rounds are spent.
pub fn alternate_minimize(p: &SolveProblem) -> Result<Solution, SolverError> {
    p.validate()?;
    let mut v = initial_v(p)?;
    let (mut u, init_its) = match &p.u_init {
        Some(u) if *u.grid() != p.grid => return Err(FieldError::GridMismatch.into()),
        Some(u) => (elastic::with_boundary(p, u.clone()), 0),
        None => {
            let r = elastic::solve(p, &v, elastic::with_boundary(p, VectorField::zeros(p.grid)))?;
            (r.0, r.1)
        }
    };
    let mut e = p.energy(&u, &v)?;
    let initial = TraceRow::new(e, &u, &v, init_its);
    let mut rows = Vec::new();
    let mut converged = false;
    for _ in 0..p.max_outer {
        let before = e.total;
        let (u1, its_u) = elastic::solve(p, &v, u)?;
        let mid = p.energy(&u1, &v)?;
        p.check_decrease("elastic step", before, mid.total)?;
        let (v1, its_v) = phase::solve(p, &u1, v)?;
        e = p.energy(&u1, &v1)?;
        p.check_decrease("phase step", mid.total, e.total)?;
        u = u1;
        v = v1;
        rows.push(TraceRow::new(e, &u, &v, its_u + its_v));
        if before - e.total <= p.tol_e * before.abs().max(1e-300) {
            converged = true;
            break;
        }
    }
    Ok(Solution { u, v, energy: e, trace: SolveTrace { initial, rows, converged } })
}

#[cfg(test)]
mod tests;
