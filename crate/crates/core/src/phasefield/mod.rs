//! Phase-field energy models: bulk densities `W(s, ξ)`, degradations `d`, the
//! surface constant `α`, and the discrete functionals with their sharp limits.

use std::fmt;
use std::sync::Arc;

use crate::fields::{FieldError, VectorField};

mod energy;
mod quadrature;

pub use energy::{at_energy, griffith_energy, limit_energy, AtEnergy, GriffithEnergy};
pub(crate) use energy::{fidelity_term, ordered_sum};
pub use quadrature::{adaptive_simpson, alpha_constant, alpha_riemann};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PhaseFieldError {
    #[error("adaptive Simpson missed tolerance {tol:e} on [{a}, {b}]")]
    QuadratureFailure { a: f64, b: f64, tol: f64 },
    #[error("constraint violated at node {node}: {what}")]
    ConstraintViolation { node: usize, what: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `|ξ|` for `ξ = [xx, yy, xy]`.
pub fn frob(e: [f64; 3]) -> f64 {
    (e[0] * e[0] + e[1] * e[1] + 2.0 * e[2] * e[2]).sqrt()
}

pub type CustomDensity = Arc<dyn Fn(f64, [f64; 3]) -> f64 + Send + Sync>;
pub type CustomPsi = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Bulk energy density `W(s, ξ)`, `ξ = [xx, yy, xy]` symmetric.
#[derive(Clone)]
pub enum Bulk {
    /// `s |ξ|^p`.
    Power,
    /// `s (λ (tr ξ)^2 + 2μ |ξ|^2)`, quadratic (`p = 2`).
    Lame { lambda: f64, mu: f64 },
    /// User density with its growth constants `[c1, c2, c3, c4]`.
    Custom { w: CustomDensity, growth: [f64; 4] },
}

impl fmt::Debug for Bulk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bulk::Power => write!(f, "Power"),
            Bulk::Lame { lambda, mu } => write!(f, "Lame {{ lambda: {lambda}, mu: {mu} }}"),
            Bulk::Custom { growth, .. } => write!(f, "Custom {{ growth: {growth:?} }}"),
        }
    }
}

impl Bulk {
    pub fn eval(&self, s: f64, e: [f64; 3], p: f64) -> f64 {
        match self {
            Bulk::Power => s * frob(e).powf(p),
            Bulk::Lame { lambda, mu } => {
                let tr = e[0] + e[1];
                let n2 = e[0] * e[0] + e[1] * e[1] + 2.0 * e[2] * e[2];
                s * (lambda * tr * tr + 2.0 * mu * n2)
            }
            Bulk::Custom { w, .. } => w(s, e),
        }
    }

    /// `∂W/∂ξ` in the pairing `σ:η = σxx ηxx + σyy ηyy + 2 σxy ηxy`.
    pub fn stress(&self, s: f64, e: [f64; 3], p: f64) -> [f64; 3] {
        match self {
            Bulk::Power => {
                let n = frob(e);
                if n == 0.0 {
                    return [0.0; 3];
                }
                let c = s * p * n.powf(p - 2.0);
                [c * e[0], c * e[1], c * e[2]]
            }
            Bulk::Lame { lambda, mu } => {
                let tr = e[0] + e[1];
                [
                    s * (2.0 * lambda * tr + 4.0 * mu * e[0]),
                    s * (2.0 * lambda * tr + 4.0 * mu * e[1]),
                    s * 4.0 * mu * e[2],
                ]
            }
            Bulk::Custom { w, .. } => {
                let mut out = [0.0; 3];
                for (i, o) in out.iter_mut().enumerate() {
                    let d = 1e-6 * (1.0 + e[i].abs());
                    let (mut a, mut b) = (e, e);
                    a[i] += d;
                    b[i] -= d;
                    let g = (w(s, a) - w(s, b)) / (2.0 * d);
                    // the xy slot carries weight 2 in the pairing
                    *o = if i == 2 { 0.5 * g } else { g };
                }
                out
            }
        }
    }

    /// `W(s, ξ) = s W(1, ξ)` holds exactly.
    pub fn is_linear_in_s(&self) -> bool {
        !matches!(self, Bulk::Custom { .. })
    }

    /// `W(1, ·)` is a quadratic form.
    pub fn is_quadratic(&self, p: f64) -> bool {
        match self {
            Bulk::Power => p == 2.0,
            Bulk::Lame { .. } => true,
            Bulk::Custom { .. } => false,
        }
    }

    /// `[c1, c2, c3, c4]` with `s(c1|ξ|^p - c2) <= W(s, ξ) <= s(c3|ξ|^p + c4)`.
    pub fn growth(&self, dim: usize) -> [f64; 4] {
        match self {
            Bulk::Power => [1.0, 0.0, 1.0, 0.0],
            Bulk::Lame { lambda, mu } => {
                // eigenvalues of the form: 2μ on deviatoric, 2μ + nλ on spherical parts
                let n = dim as f64;
                let a = 2.0 * mu;
                let b = 2.0 * mu + n * lambda;
                [a.min(b), 0.0, a.max(b), 0.0]
            }
            Bulk::Custom { growth, .. } => *growth,
        }
    }
}

/// Degradation `d: [0, 1] -> [0, ∞)`, continuous, decreasing, `d(1) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Degradation {
    /// `(1 - s)^2 / 4`.
    At2,
    /// `(1 - s) / 2`.
    At1,
    /// Piecewise linear through the values at `i/(n-1)`.
    Table(Vec<f64>),
}

impl Degradation {
    pub fn eval(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self {
            Degradation::At2 => 0.25 * (1.0 - s) * (1.0 - s),
            Degradation::At1 => 0.5 * (1.0 - s),
            Degradation::Table(t) => {
                let m = (t.len() - 1) as f64;
                let x = s * m;
                let i = (x.floor() as usize).min(t.len() - 2);
                let w = x - i as f64;
                t[i] + w * (t[i + 1] - t[i])
            }
        }
    }

    /// One-sided derivative from the left at `s` (from the right at 0).
    pub fn deriv(&self, s: f64) -> f64 {
        let s = s.clamp(0.0, 1.0);
        match self {
            Degradation::At2 => -0.5 * (1.0 - s),
            Degradation::At1 => -0.5,
            Degradation::Table(t) => {
                let m = (t.len() - 1) as f64;
                let x = s * m;
                let i = if x <= 0.0 { 0 } else { ((x.ceil() as usize).max(1) - 1).min(t.len() - 2) };
                (t[i + 1] - t[i]) * m
            }
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, Degradation::At2)
    }

    pub fn validate(&self) -> Result<(), PhaseFieldError> {
        if let Degradation::Table(t) = self {
            if t.len() < 2 {
                return Err(PhaseFieldError::InvalidModel("degradation table needs two values".into()));
            }
            if t.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(PhaseFieldError::InvalidModel("degradation table must be finite and nonnegative".into()));
            }
        }
        if self.eval(1.0) != 0.0 {
            return Err(PhaseFieldError::InvalidModel("d(1) must be 0".into()));
        }
        let n = 1000;
        for i in 0..n {
            let (a, b) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
            if self.eval(b) > self.eval(a) + 1e-15 {
                return Err(PhaseFieldError::InvalidModel(format!("d increases on [{a}, {b}]")));
            }
        }
        Ok(())
    }
}

/// Fidelity density `ψ` on `[0, ∞)`.
#[derive(Clone)]
pub enum Psi {
    /// `s^r`.
    Power(f64),
    Custom { f: CustomPsi, c_psi: f64 },
}

impl fmt::Debug for Psi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psi::Power(r) => write!(f, "Power({r})"),
            Psi::Custom { c_psi, .. } => write!(f, "Custom {{ c_psi: {c_psi} }}"),
        }
    }
}

impl Psi {
    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Psi::Power(r) => s.abs().powf(*r),
            Psi::Custom { f, .. } => f(s.abs()),
        }
    }

    pub fn c_psi(&self) -> f64 {
        match self {
            Psi::Power(r) => 2f64.powf((r - 1.0).max(0.0)).max(1.0),
            Psi::Custom { c_psi, .. } => *c_psi,
        }
    }

    /// Spot checks of the hypotheses on `ψ`: `ψ(0) = 0`, monotone, quasi
    /// subadditive with `C_ψ`, at most `C_ψ (1 + s^p)` and unbounded.
    pub fn validate(&self, p: f64) -> Result<(), PhaseFieldError> {
        let c = self.c_psi();
        let bad = |m: String| Err(PhaseFieldError::InvalidModel(format!("psi: {m}")));
        if self.eval(0.0) != 0.0 {
            return bad("psi(0) != 0".into());
        }
        let pts: Vec<f64> = (0..200).map(|i| 1e-3 * 1.07f64.powi(i)).collect();
        for w in pts.windows(2) {
            if self.eval(w[1]) < self.eval(w[0]) {
                return bad(format!("decreasing near {}", w[0]));
            }
        }
        for (i, &s) in pts.iter().enumerate().step_by(7) {
            for &t in pts.iter().skip(i % 5).step_by(11) {
                let lhs = self.eval(s + t);
                if lhs > c * (self.eval(s) + self.eval(t)) * (1.0 + 1e-12) {
                    return bad(format!("psi({s}+{t}) > C_psi (psi({s}) + psi({t}))"));
                }
            }
            if self.eval(s) > c * (1.0 + s.powf(p)) * (1.0 + 1e-12) {
                return bad(format!("psi({s}) above C_psi (1 + s^p)"));
            }
        }
        if self.eval(1e8) <= self.eval(1e4) {
            return bad("psi looks bounded".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Plain,
    Fidelity,
    Dirichlet,
}

/// `u = u0` and `v = 1` on the listed boundary nodes.
#[derive(Clone, Debug)]
pub struct Dirichlet {
    pub nodes: Vec<usize>,
    pub u0: VectorField,
}

#[derive(Clone, Debug)]
pub struct EnergyModel {
    pub p: f64,
    pub q: f64,
    pub a: f64,
    pub bulk: Bulk,
    pub degradation: Degradation,
    pub psi: Psi,
    /// Datum `g` of the fidelity term.
    pub fidelity: Option<VectorField>,
    pub dirichlet: Option<Dirichlet>,
    /// Trace tolerance for the Dirichlet surcharge; default `1e-6 max(1, |u0|)`.
    pub trace_tol: Option<f64>,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel::at2()
    }
}

impl EnergyModel {
    /// `W = s|ξ|^2`, `d = (1-v)^2/4`, `q = 2`, `a = 1`, so `α = 1`.
    pub fn at2() -> Self {
        EnergyModel {
            p: 2.0,
            q: 2.0,
            a: 1.0,
            bulk: Bulk::Power,
            degradation: Degradation::At2,
            psi: Psi::Power(1.0),
            fidelity: None,
            dirichlet: None,
            trace_tol: None,
        }
    }

    pub fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self.psi = Psi::Power((p / 2.0).min(1.0));
        self
    }

    pub fn q_conj(&self) -> f64 {
        self.q / (self.q - 1.0)
    }

    pub fn alpha(&self) -> Result<f64, PhaseFieldError> {
        alpha_constant(self)
    }

    pub fn trace_tol(&self) -> f64 {
        self.trace_tol.unwrap_or_else(|| 1e-6 * self.dirichlet.as_ref().map_or(1.0, |d| d.u0.max_norm().max(1.0)))
    }

    /// True when the `u` and `v` subproblems are both quadratic.
    pub fn is_quadratic(&self) -> bool {
        self.bulk.is_quadratic(self.p) && self.degradation.is_quadratic() && self.q == 2.0
    }

    pub fn validate(&self, dim: usize) -> Result<(), PhaseFieldError> {
        if !(self.p > 1.0 && self.q > 1.0 && self.a > 0.0) {
            return Err(PhaseFieldError::InvalidModel(format!(
                "need p > 1, q > 1, a > 0 (p = {}, q = {}, a = {})",
                self.p, self.q, self.a
            )));
        }
        if matches!(self.bulk, Bulk::Lame { .. }) && self.p != 2.0 {
            return Err(PhaseFieldError::InvalidModel("the Lame density needs p = 2".into()));
        }
        self.degradation.validate()?;
        self.psi.validate(self.p)?;
        check_growth(&self.bulk, self.p, dim)
    }
}

/// Samples `W` over `s ∈ [0, 1]` and a fan of strains.
fn check_growth(w: &Bulk, p: f64, dim: usize) -> Result<(), PhaseFieldError> {
    let [c1, c2, c3, c4] = w.growth(dim);
    if c1 <= 0.0 {
        return Err(PhaseFieldError::InvalidModel(format!("growth constant c1 = {c1} must be positive")));
    }
    for i in 0..=10 {
        let s = i as f64 / 10.0;
        if w.eval(s, [0.0; 3], p).abs() > 1e-14 {
            return Err(PhaseFieldError::InvalidModel(format!("W({s}, 0) != 0")));
        }
        for j in 0..48 {
            let t = j as f64 * 0.37;
            let mag = 10f64.powf(-2.0 + 4.0 * (j % 7) as f64 / 6.0);
            let mut e = [mag * t.cos(), mag * (1.7 * t).sin(), mag * 0.5 * (2.3 * t).cos()];
            if dim == 1 {
                e = [e[0], 0.0, 0.0];
            }
            let n = frob(e).powf(p);
            let val = w.eval(s, e, p);
            let tol = 1e-12 * (1.0 + val.abs());
            if val < s * (c1 * n - c2) - tol || val > s * (c3 * n + c4) + tol {
                return Err(PhaseFieldError::InvalidModel(format!("W({s}, {e:?}) = {val} outside the growth envelope")));
            }
        }
    }
    Ok(())
}

/// One level of a schedule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Level {
    pub eps: f64,
    pub eta: f64,
}

/// Levels `(ε_k, η_k)` with `ε` strictly decreasing and `η/ε^{p-1}` decreasing.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    levels: Vec<Level>,
}

impl Schedule {
    pub fn new(levels: Vec<Level>, p: f64) -> Result<Self, PhaseFieldError> {
        if levels.is_empty() {
            return Err(PhaseFieldError::InvalidSchedule("no levels".into()));
        }
        for l in &levels {
            if !(l.eps > 0.0 && l.eta > 0.0 && l.eta < 1.0) {
                return Err(PhaseFieldError::InvalidSchedule(format!("need eps > 0, 0 < eta < 1 (got {l:?})")));
            }
        }
        for w in levels.windows(2) {
            if w[1].eps >= w[0].eps {
                return Err(PhaseFieldError::InvalidSchedule("eps must be strictly decreasing".into()));
            }
            let r = |l: &Level| l.eta / l.eps.powf(p - 1.0);
            if r(&w[1]) >= r(&w[0]) {
                return Err(PhaseFieldError::InvalidSchedule(format!(
                    "eta/eps^(p-1) must decrease: {} then {}",
                    r(&w[0]),
                    r(&w[1])
                )));
            }
        }
        Ok(Schedule { levels })
    }

    /// `ε` from the list with `η = ε^2`.
    pub fn eta_squared(eps: &[f64], p: f64) -> Result<Self, PhaseFieldError> {
        Schedule::new(eps.iter().map(|&e| Level { eps: e, eta: e * e }).collect(), p)
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `η_k/ε_k → 0` along the list, the extra condition of the quadratic case.
    pub fn eta_over_eps_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].eta / w[1].eps < w[0].eta / w[0].eps)
    }
}
