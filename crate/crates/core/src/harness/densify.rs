use rayon::prelude::*;

use crate::crack::{AxisBox, FacetSet};
use crate::fields::VectorField;
use crate::nitsche::{densify, DensifyConfig, DensifyMetrics};
use crate::rough::{rough_approximate, verify_rough_bounds, RoughConfig, RoughReport};

use super::fmt_num;

pub const ROUGH_CSV_HEADER: &str = "theta,k,vol_Ek,lp_gap,bulk_ratio,jump_ratio,psi_gap,error";

/// Cross product of `eps × theta × k` around a template configuration.
#[derive(Clone, Debug)]
pub struct DensifySpec {
    pub u: VectorField,
    pub facets: FacetSet,
    pub domain: AxisBox,
    pub eps: Vec<f64>,
    pub theta: Vec<f64>,
    pub k: Vec<u32>,
    pub base: DensifyConfig,
}

impl DensifySpec {
    pub fn new(u: VectorField, facets: FacetSet, domain: AxisBox) -> Self {
        DensifySpec { u, facets, domain, eps: vec![0.2, 0.1, 0.05], theta: vec![0.1], k: vec![32], base: DensifyConfig::new(0.2, 0.1, 32) }
    }

    fn cells(&self) -> Vec<(f64, f64, u32)> {
        let mut out = Vec::new();
        for &e in &self.eps {
            for &t in &self.theta {
                for &k in &self.k {
                    out.push((e, t, k));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensifyRow {
    pub eps: f64,
    pub theta: f64,
    pub k: u32,
    pub metrics: Option<DensifyMetrics>,
    pub error: Option<String>,
}

impl DensifyRow {
    pub const CSV_HEADER: &'static str = "eps,theta,k,jump_symdiff,strain_lp_gap,vol_Ek,trace_tau,psi_gap,error";

    pub fn csv_row(&self) -> String {
        match (&self.metrics, &self.error) {
            (Some(m), _) => format!("{},", m.csv_row()),
            (None, e) => format!("{},{},{},nan,nan,nan,nan,nan,{}", self.eps, self.theta, self.k, csv_safe(e.as_deref().unwrap_or(""))),
        }
    }

    pub fn to_csv(rows: &[DensifyRow]) -> String {
        let mut s = format!("{}\n", Self::CSV_HEADER);
        for r in rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

fn csv_safe(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// One pipeline run per cell; failures stay in their row.
pub fn densify_sweep(spec: &DensifySpec) -> Vec<DensifyRow> {
    spec.cells()
        .into_par_iter()
        .map(|(eps, theta, k)| {
            let cfg = DensifyConfig { eps, theta, k, ..spec.base };
            match densify(&spec.u, &spec.facets, spec.domain, &cfg) {
                Ok(d) => DensifyRow { eps, theta, k, metrics: Some(d.metrics), error: None },
                Err(e) => DensifyRow { eps, theta, k, metrics: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoughRow {
    pub theta: f64,
    pub k: u32,
    pub report: Option<RoughReport>,
    pub error: Option<String>,
}

impl RoughRow {
    pub fn csv_row(&self) -> String {
        match &self.report {
            Some(r) => format!(
                "{},{},{},{},{},{},{},",
                fmt_num(self.theta),
                self.k,
                fmt_num(r.vol_ek),
                fmt_num(r.lp_gap),
                fmt_num(r.bulk_ratio),
                fmt_num(r.jump_ratio),
                fmt_num(r.psi_gap)
            ),
            None => format!("{},{},nan,nan,nan,nan,nan,{}", fmt_num(self.theta), self.k, csv_safe(self.error.as_deref().unwrap_or(""))),
        }
    }
}

/// Rough approximation alone over `theta × k`, with `ψ = √s`.
pub fn rough_sweep(u: &VectorField, facets: &FacetSet, domain: AxisBox, thetas: &[f64], ks: &[u32], p: f64) -> Vec<RoughRow> {
    let cells: Vec<(f64, u32)> = thetas.iter().flat_map(|&t| ks.iter().map(move |&k| (t, k))).collect();
    cells
        .into_par_iter()
        .map(|(theta, k)| {
            let cfg = RoughConfig { p, ..RoughConfig::new(theta, k) };
            match rough_approximate(u, facets, &cfg, domain, None) {
                Ok(a) => RoughRow { theta, k, report: Some(verify_rough_bounds(u, facets, &a, p, &|s: f64| s.sqrt())), error: None },
                Err(e) => RoughRow { theta, k, report: None, error: Some(e.to_string()) },
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::Grid;

    #[test]
    fn empty_crack_has_no_jump_columns() {
        let g = Grid::covering(2, [-1.0, -1.0], [2.0, 2.0], 1.0 / 64.0).unwrap();
        let u = VectorField::from_fn(g, |p| [p[0] * p[1], 0.1 * p[0]]);
        let mut s = DensifySpec::new(u, FacetSet::empty(2), AxisBox::new([0.0, 0.0], [1.0, 1.0]));
        s.eps = vec![0.2];
        let rows = densify_sweep(&s);
        assert_eq!(rows.len(), 1);
        let m = rows[0].metrics.expect("runs");
        assert_eq!(m.jump_symdiff, 0.0);
        assert_eq!(m.vol_ek, 0.0);
        let csv = DensifyRow::to_csv(&rows);
        assert_eq!(csv.lines().nth(1).unwrap().split(',').count(), DensifyRow::CSV_HEADER.split(',').count());
    }

    #[test]
    fn failing_cells_are_kept() {
        // no halo around the domain: every cell is rejected
        let g = Grid::covering(2, [0.0, 0.0], [1.0, 1.0], 1.0 / 16.0).unwrap();
        let u = VectorField::zeros(g);
        let dom = AxisBox::new([0.0, 0.0], [1.0, 1.0]);
        let rows = rough_sweep(&u, &FacetSet::empty(2), dom, &[0.1, 0.2], &[8], 2.0);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.error.is_some()));
        assert_eq!(rows[1].theta, 0.2);
        assert!(rows[0].csv_row().split(',').count() == ROUGH_CSV_HEADER.split(',').count());
    }
}
