//! Experiment drivers behind the `gsbd` binary: configuration, model problems,
//! Γ-sweeps, density sweeps, invariant checks and image output.

mod check;
mod config;
mod densify;
mod ppm;
mod problems;
mod sweep;

pub use check::{run_checks, CheckOutcome};
pub use config::{parse_config, Config};
pub use densify::{densify_sweep, rough_sweep, DensifyRow, DensifySpec, RoughRow, ROUGH_CSV_HEADER};
pub use ppm::{ppm_bytes, write_ppm};
pub use problems::{build_problem, reference_energy, seeded_phase, ProblemId};
pub use sweep::{gamma_sweep, ReferenceKind, SweepRow, SweepSpec, SweepTable, SWEEP_CSV_HEADER};

use crate::IoError;

pub(crate) use fmt_csv_num as fmt_num;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl HarnessError {
    /// 1 usage, 2 unreadable input, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) => 1,
            HarnessError::Io(_) => 2,
            HarnessError::Numerical(_) => 3,
        }
    }
}

/// Runs `f` on a pool capped by `GSBD_WORKERS` (all cores when unset).
pub fn with_workers<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T, HarnessError> {
    let n = match std::env::var("GSBD_WORKERS") {
        Ok(s) => s.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| HarnessError::Usage(format!("GSBD_WORKERS = `{s}` is not a positive integer")))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| HarnessError::Numerical(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Shortest round-trip decimal, so equal numbers print equal bytes.
pub fn fmt_csv_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:?}")
    }
}
