use std::path::PathBuf;

use rayon::prelude::*;

use crate::fields::{ScalarField, VectorField};
use crate::phasefield::{EnergyModel, Level, Schedule, Variant};
use crate::solver::{alternate_minimize, Solution, SolverError};

use super::problems::{build_problem, reference_energy, seeded_phase, ProblemId};
use super::{fmt_num, HarnessError};

pub const SWEEP_CSV_HEADER: &str = "eps,eta,outer,bulk,reg,extra,total,limit_ref,ref_kind,gap,min_v,l1_v,branch,error";

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub problem: ProblemId,
    pub load: f64,
    pub schedule: Schedule,
    pub model: EnergyModel,
    pub variant: Variant,
    /// Grid spacing is `ε / refine`.
    pub refine: usize,
    pub tol_e: f64,
    pub max_outer: usize,
    /// Also start from a seeded crack and keep the lower energy.
    pub multi_start: bool,
    pub output: Option<PathBuf>,
}

impl SweepSpec {
    pub fn new(problem: ProblemId, load: f64, schedule: Schedule) -> Self {
        SweepSpec {
            problem,
            load,
            schedule,
            model: EnergyModel::at2(),
            variant: Variant::Dirichlet,
            refine: 8,
            tol_e: 1e-8,
            max_outer: 200,
            multi_start: true,
            output: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceKind {
    Analytic,
    /// Linear-in-`ε` extrapolation from the two finest levels.
    Richardson,
}

impl ReferenceKind {
    pub fn name(self) -> &'static str {
        match self {
            ReferenceKind::Analytic => "analytic",
            ReferenceKind::Richardson => "richardson",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub level: Level,
    pub outer: usize,
    pub bulk: f64,
    pub regularization: f64,
    pub extra: f64,
    pub total: f64,
    pub limit_ref: f64,
    pub gap: f64,
    pub min_v: f64,
    pub l1_v: f64,
    /// `elastic` or `seeded`: which start won.
    pub branch: &'static str,
    pub error: Option<String>,
}

impl SweepRow {
    fn failed(level: Level, e: String) -> Self {
        SweepRow {
            level,
            outer: 0,
            bulk: f64::NAN,
            regularization: f64::NAN,
            extra: f64::NAN,
            total: f64::NAN,
            limit_ref: f64::NAN,
            gap: f64::NAN,
            min_v: f64::NAN,
            l1_v: f64::NAN,
            branch: "none",
            error: Some(e),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub reference: ReferenceKind,
    /// Final `(u, v)` per level, `None` where the level failed.
    pub fields: Vec<Option<(VectorField, ScalarField)>>,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SWEEP_CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let cols = [
                fmt_num(r.level.eps),
                fmt_num(r.level.eta),
                r.outer.to_string(),
                fmt_num(r.bulk),
                fmt_num(r.regularization),
                fmt_num(r.extra),
                fmt_num(r.total),
                fmt_num(r.limit_ref),
                self.reference.name().to_string(),
                fmt_num(r.gap),
                fmt_num(r.min_v),
                fmt_num(r.l1_v),
                r.branch.to_string(),
                r.error.as_deref().map(csv_safe).unwrap_or_default(),
            ];
            s.push_str(&cols.join(","));
            s.push('\n');
        }
        s
    }
}

fn csv_safe(s: &str) -> String {
    s.chars().map(|c| if c == ',' || c == '\n' || c == '\r' { ';' } else { c }).collect()
}

fn solve_level(spec: &SweepSpec, level: Level) -> Result<(Solution, &'static str), SolverError> {
    let mut p = build_problem(spec.problem, spec.load, &spec.model, spec.variant, level, spec.refine)
        .map_err(|e| SolverError::InvalidProblem(e.to_string()))?;
    p.tol_e = spec.tol_e;
    p.max_outer = spec.max_outer;
    let plain = alternate_minimize(&p);
    if !spec.multi_start {
        return plain.map(|s| (s, "elastic"));
    }
    p.v_init = Some(seeded_phase(spec.problem, p.grid, level));
    let seeded = alternate_minimize(&p);
    match (plain, seeded) {
        (Ok(a), Ok(b)) => Ok(if b.energy.total < a.energy.total { (b, "seeded") } else { (a, "elastic") }),
        (Ok(a), Err(_)) => Ok((a, "elastic")),
        (Err(_), Ok(b)) => Ok((b, "seeded")),
        (Err(e), Err(_)) => Err(e),
    }
}

/// One solve per level, in parallel; rows keep the schedule order.
pub fn gamma_sweep(spec: &SweepSpec) -> Result<SweepTable, HarnessError> {
    if spec.variant == Variant::Plain {
        return Err(HarnessError::Usage("model problems need the dirichlet or fidelity variant".into()));
    }
    let levels = spec.schedule.levels();
    let solved: Vec<Result<(Solution, &'static str), SolverError>> = levels.par_iter().map(|&l| solve_level(spec, l)).collect();
    let mut rows: Vec<SweepRow> = Vec::with_capacity(levels.len());
    let mut fields = Vec::with_capacity(levels.len());
    for (&level, r) in levels.iter().zip(solved) {
        match r {
            Ok((s, branch)) => {
                let g = s.v.grid();
                let l1_v = (0..g.num_nodes()).map(|n| g.node_weight(n) * (1.0 - s.v.get(n)).abs()).sum();
                rows.push(SweepRow {
                    level,
                    outer: s.trace.outer_iterations(),
                    bulk: s.energy.bulk,
                    regularization: s.energy.regularization,
                    extra: s.energy.extra,
                    total: s.energy.total,
                    limit_ref: f64::NAN,
                    gap: f64::NAN,
                    min_v: s.trace.last().min_v,
                    l1_v,
                    branch,
                    error: (!s.trace.converged).then(|| format!("no convergence in {} outer iterations", spec.max_outer)),
                });
                fields.push(Some((s.u, s.v)));
            }
            Err(e) => {
                rows.push(SweepRow::failed(level, e.to_string()));
                fields.push(None);
            }
        }
    }
    let (reference, value) = match reference_energy(spec.problem, spec.load, &spec.model, spec.variant) {
        Some(x) => (ReferenceKind::Analytic, x),
        None => (ReferenceKind::Richardson, richardson(&rows)),
    };
    for r in &mut rows {
        r.limit_ref = value;
        r.gap = r.total - value;
    }
    Ok(SweepTable { rows, reference, fields })
}

/// `E(ε) ≈ E₀ + Cε` through the two finest levels; the finest total alone
/// for a single level.
fn richardson(rows: &[SweepRow]) -> f64 {
    match rows {
        [] => f64::NAN,
        [r] => r.total,
        [.., a, b] => (a.level.eps * b.total - b.level.eps * a.total) / (a.level.eps - b.level.eps),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bar_spec(load: f64, eps: &[f64]) -> SweepSpec {
        SweepSpec::new(ProblemId::Bar1d, load, Schedule::eta_squared(eps, 2.0).unwrap())
    }

    #[test]
    fn single_level_gives_one_row() {
        let t = gamma_sweep(&bar_spec(0.5, &[0.125])).unwrap();
        assert_eq!(t.rows.len(), 1);
        let r = &t.rows[0];
        assert!(r.error.is_none(), "{r:?}");
        assert_eq!(r.gap, r.total - r.limit_ref);
        assert_eq!(t.reference, ReferenceKind::Analytic);
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 2);
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), SWEEP_CSV_HEADER.split(',').count());
    }

    #[test]
    fn richardson_is_exact_on_linear_data() {
        let row = |eps: f64, total: f64| SweepRow { level: Level { eps, eta: eps * eps }, total, ..SweepRow::failed(Level { eps, eta: 0.1 }, String::new()) };
        let rows = [row(0.2, 9.0), row(0.1, 1.0 + 0.1 * 4.0), row(0.05, 1.0 + 0.05 * 4.0)];
        assert!((richardson(&rows) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn solver_failures_stay_in_rows() {
        let mut s = bar_spec(0.5, &[0.25, 0.125]);
        s.max_outer = 1;
        s.tol_e = 1e-300;
        s.model.p = 3.0;
        s.refine = 4;
        let t = gamma_sweep(&s).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert!(t.rows.iter().all(|r| r.error.is_some()));
        assert!(t.to_csv().lines().skip(1).all(|l| l.ends_with("outer iterations")));
    }

    #[test]
    fn antiplane_uses_extrapolation() {
        let mut s = SweepSpec::new(ProblemId::Antiplane2d, 0.4, Schedule::eta_squared(&[0.25, 0.125], 2.0).unwrap());
        s.refine = 2;
        let t = gamma_sweep(&s).unwrap();
        assert_eq!(t.reference, ReferenceKind::Richardson);
        assert!(t.rows.iter().all(|r| r.error.is_none() && r.total.is_finite()));
    }
}
