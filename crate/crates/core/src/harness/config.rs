use std::collections::BTreeMap;

use crate::phasefield::{Bulk, Degradation, EnergyModel, Level, Psi, Schedule, Variant};
use crate::IoError;

use super::problems::ProblemId;
use super::sweep::SweepSpec;

const KEYS: &[&str] = &[
    "problem",
    "load",
    "schedule",
    "eta",
    "refine",
    "p",
    "q",
    "a",
    "degradation",
    "degradation_table",
    "lame_lambda",
    "lame_mu",
    "psi_r",
    "variant",
    "tol_e",
    "max_outer",
    "multi_start",
    "output",
];

/// Line-oriented `key = value` settings; `#` starts a comment. Entries
/// remember their line so later errors can point at it (line 0 is the
/// command line).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, (usize, String)>,
}

pub fn parse_config(text: &str) -> Result<Config, IoError> {
    let mut c = Config::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| IoError::parse(line, format!("expected key = value, got `{body}`")))?;
        c.insert(line, k.trim(), v.trim())?;
    }
    Ok(c)
}

fn number(line: usize, key: &str, s: &str) -> Result<f64, IoError> {
    let bad = || IoError::parse(line, format!("{key}: `{s}` is not a number"));
    let x = match s.split_once('/') {
        Some((a, b)) => a.trim().parse::<f64>().map_err(|_| bad())? / b.trim().parse::<f64>().map_err(|_| bad())?,
        None => s.parse::<f64>().map_err(|_| bad())?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(bad())
    }
}

fn list(line: usize, key: &str, s: &str) -> Result<Vec<f64>, IoError> {
    s.split(',').map(|t| number(line, key, t.trim())).collect()
}

impl Config {
    fn insert(&mut self, line: usize, key: &str, value: &str) -> Result<(), IoError> {
        if !KEYS.contains(&key) {
            return Err(IoError::parse(line, format!("unknown key `{key}`")));
        }
        if value.is_empty() {
            return Err(IoError::parse(line, format!("`{key}` has no value")));
        }
        self.entries.insert(key.to_string(), (line, value.to_string()));
        Ok(())
    }

    /// Override from the command line.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), IoError> {
        self.insert(0, key, value)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn num(&self, key: &str) -> Result<Option<f64>, IoError> {
        self.entries.get(key).map(|(l, v)| number(*l, key, v)).transpose()
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.0)
    }

    pub fn model(&self) -> Result<EnergyModel, IoError> {
        let p = self.num("p")?.unwrap_or(2.0);
        let mut m = EnergyModel::at2().with_p(p);
        if let Some(q) = self.num("q")? {
            m.q = q;
        }
        if let Some(a) = self.num("a")? {
            m.a = a;
        }
        m.degradation = match self.get("degradation").unwrap_or("at2") {
            "at2" => Degradation::At2,
            "at1" => Degradation::At1,
            "custom-table" => {
                let (l, v) = self
                    .entries
                    .get("degradation_table")
                    .ok_or_else(|| IoError::parse(self.line("degradation"), "custom-table needs degradation_table"))?;
                let t = list(*l, "degradation_table", v)?;
                let d = Degradation::Table(t);
                d.validate().map_err(|e| IoError::parse(*l, e.to_string()))?;
                d
            }
            other => return Err(IoError::parse(self.line("degradation"), format!("degradation `{other}` (at2, at1, custom-table)"))),
        };
        match (self.num("lame_lambda")?, self.num("lame_mu")?) {
            (Some(lambda), Some(mu)) => m.bulk = Bulk::Lame { lambda, mu },
            (None, None) => {}
            _ => return Err(IoError::parse(self.line("lame_lambda").max(self.line("lame_mu")), "give both lame_lambda and lame_mu")),
        }
        if let Some(r) = self.num("psi_r")? {
            m.psi = Psi::Power(r);
        }
        let dim = 2;
        m.validate(dim).map_err(|e| IoError::parse(0, e.to_string()))?;
        Ok(m)
    }

    pub fn variant(&self) -> Result<Variant, IoError> {
        Ok(match self.get("variant").unwrap_or("dirichlet") {
            "dirichlet" => Variant::Dirichlet,
            "fidelity" => Variant::Fidelity,
            "plain" => Variant::Plain,
            other => return Err(IoError::parse(self.line("variant"), format!("variant `{other}` (dirichlet, fidelity, plain)"))),
        })
    }

    pub fn problem(&self) -> Result<ProblemId, IoError> {
        let s = self.get("problem").unwrap_or("1d-bar");
        ProblemId::parse(s).ok_or_else(|| IoError::parse(self.line("problem"), format!("problem `{s}` (1d-bar, 2d-antiplane, 2d-mode1)")))
    }

    /// `η = ε²` unless `eta` lists one value per level.
    pub fn schedule(&self, p: f64) -> Result<Schedule, IoError> {
        let l = self.line("schedule");
        let eps = match self.entries.get("schedule") {
            Some((l, v)) => list(*l, "schedule", v)?,
            None => vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
        };
        let levels: Vec<Level> = match self.get("eta") {
            None | Some("eps^2") => eps.iter().map(|&e| Level { eps: e, eta: e * e }).collect(),
            Some(v) => {
                let etas = list(self.line("eta"), "eta", v)?;
                if etas.len() != eps.len() {
                    return Err(IoError::parse(self.line("eta"), format!("{} eta values for {} levels", etas.len(), eps.len())));
                }
                eps.iter().zip(etas).map(|(&eps, eta)| Level { eps, eta }).collect()
            }
        };
        Schedule::new(levels, p).map_err(|e| IoError::parse(l, e.to_string()))
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, IoError> {
        let model = self.model()?;
        let schedule = self.schedule(model.p)?;
        let refine = self.num("refine")?.unwrap_or(8.0);
        if refine < 1.0 || refine.fract() != 0.0 {
            return Err(IoError::parse(self.line("refine"), "refine must be a positive integer"));
        }
        let max_outer = self.num("max_outer")?.unwrap_or(200.0);
        if max_outer < 1.0 || max_outer.fract() != 0.0 {
            return Err(IoError::parse(self.line("max_outer"), "max_outer must be a positive integer"));
        }
        let multi_start = match self.get("multi_start").unwrap_or("true") {
            "true" => true,
            "false" => false,
            other => return Err(IoError::parse(self.line("multi_start"), format!("multi_start `{other}` (true, false)"))),
        };
        Ok(SweepSpec {
            problem: self.problem()?,
            load: self.num("load")?.unwrap_or(2.0),
            schedule,
            model,
            variant: self.variant()?,
            refine: refine as usize,
            tol_e: self.num("tol_e")?.unwrap_or(1e-8),
            max_outer: max_outer as usize,
            multi_start,
            output: self.get("output").map(std::path::PathBuf::from),
        })
    }
}
