use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use gsbd::crack::io::load_crack;
use gsbd::crack::{AxisBox, FacetSet};
use gsbd::fields::io::{load_field, save_field, FieldData};
use gsbd::harness::{
    build_problem, densify_sweep, fmt_csv_num, gamma_sweep, parse_config, rough_sweep, run_checks, seeded_phase, with_workers, write_ppm, Config, DensifyRow,
    DensifySpec, HarnessError, ROUGH_CSV_HEADER,
};
use gsbd::nitsche::DensifyConfig;
use gsbd::phasefield::{alpha_constant, alpha_riemann};
use gsbd::solver::alternate_minimize;

#[derive(Parser)]
#[command(name = "gsbd", version, about = "Phase-field fracture sweeps and GSBD density experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Settings {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// One alternating minimization at one schedule level.
    Solve {
        #[command(flatten)]
        settings: Settings,
        /// Index into the schedule.
        #[arg(long, default_value_t = 0)]
        level: usize,
        /// Start from a seeded crack instead of v = 1.
        #[arg(long)]
        seed: bool,
        /// Trace CSV (stdout when absent).
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        u_out: Option<PathBuf>,
        #[arg(long)]
        v_out: Option<PathBuf>,
        #[arg(long)]
        ppm: Option<PathBuf>,
    },
    /// Energy table over the whole schedule.
    Sweep {
        #[command(flatten)]
        settings: Settings,
        /// CSV path; overrides the `output` key, stdout when neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Heatmap of v at the finest level.
        #[arg(long)]
        ppm: Option<PathBuf>,
    },
    /// Density pipeline (or the rough step alone) over parameter grids.
    Densify {
        /// Displacement field file.
        #[arg(long)]
        field: PathBuf,
        /// Crack file; no jumps when absent.
        #[arg(long)]
        crack: Option<PathBuf>,
        /// `x0,y0,x1,y1`.
        #[arg(long, default_value = "0,0,1,1")]
        domain: String,
        #[arg(long, default_value = "0.2,0.1,0.05")]
        eps: String,
        #[arg(long, default_value = "0.1")]
        theta: String,
        #[arg(long, default_value = "32")]
        k: String,
        /// Largest cover half-side.
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Run only the rough approximation.
        #[arg(long)]
        rough: bool,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Invariant suites.
    Check,
    /// Surface constant of the configured model.
    Alpha {
        #[command(flatten)]
        settings: Settings,
        /// Also print a midpoint Riemann sum with this many points.
        #[arg(long)]
        riemann: Option<usize>,
    },
}

fn usage(m: impl Into<String>) -> HarnessError {
    HarnessError::Usage(m.into())
}

fn load_settings(s: &Settings) -> Result<Config, HarnessError> {
    let mut c = match &s.config {
        Some(p) => parse_config(&std::fs::read_to_string(p).map_err(gsbd::IoError::from)?)?,
        None => Config::default(),
    };
    for kv in &s.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| usage(format!("--set expects KEY=VALUE, got `{kv}`")))?;
        c.set(k.trim(), v.trim()).map_err(|e| usage(e.to_string()))?;
    }
    Ok(c)
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), HarnessError> {
    match output {
        Some(p) => std::fs::write(p, text).map_err(|e| HarnessError::Io(e.into())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn list<T: std::str::FromStr>(what: &str, s: &str) -> Result<Vec<T>, HarnessError> {
    s.split(',').map(|t| t.trim().parse::<T>().map_err(|_| usage(format!("--{what}: cannot parse `{t}`")))).collect()
}

fn solve(settings: &Settings, level: usize, seed: bool, output: Option<&Path>, u_out: Option<&Path>, v_out: Option<&Path>, ppm: Option<&Path>) -> Result<(), HarnessError> {
    let spec = load_settings(settings)?.sweep_spec()?;
    let l = *spec.schedule.levels().get(level).ok_or_else(|| usage(format!("level {level} outside a schedule of {}", spec.schedule.len())))?;
    let mut p = build_problem(spec.problem, spec.load, &spec.model, spec.variant, l, spec.refine)?;
    p.tol_e = spec.tol_e;
    p.max_outer = spec.max_outer;
    if seed {
        p.v_init = Some(seeded_phase(spec.problem, p.grid, l));
    }
    let s = with_workers(|| alternate_minimize(&p))?.map_err(|e| HarnessError::Numerical(e.to_string()))?;
    let mut csv = String::from("iteration,bulk,reg,extra,total,min_v,max_u,inner\n");
    for (i, r) in std::iter::once(&s.trace.initial).chain(&s.trace.rows).enumerate() {
        let cols = [fmt_csv_num(r.bulk), fmt_csv_num(r.regularization), fmt_csv_num(r.extra), fmt_csv_num(r.total), fmt_csv_num(r.min_v), fmt_csv_num(r.max_u)];
        csv.push_str(&format!("{i},{},{}\n", cols.join(","), r.inner_iterations));
    }
    emit(output, &csv)?;
    if let Some(path) = u_out {
        save_field(path, &FieldData::from(&s.u))?;
    }
    if let Some(path) = v_out {
        save_field(path, &FieldData::from(&s.v))?;
    }
    if let Some(path) = ppm {
        write_ppm(path, &s.v)?;
    }
    if !s.trace.converged {
        return Err(HarnessError::Numerical(format!("no convergence in {} outer iterations", p.max_outer)));
    }
    Ok(())
}

fn sweep(settings: &Settings, output: Option<&Path>, ppm: Option<&Path>) -> Result<(), HarnessError> {
    let spec = load_settings(settings)?.sweep_spec()?;
    let table = with_workers(|| gamma_sweep(&spec))??;
    let out = output.map(Path::to_path_buf).or_else(|| spec.output.clone());
    emit(out.as_deref(), &table.to_csv())?;
    for r in table.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("eps = {}: {}", r.level.eps, r.error.as_deref().unwrap_or(""));
    }
    if let Some(path) = ppm {
        match table.fields.last() {
            Some(Some((_, v))) => write_ppm(path, v)?,
            _ => return Err(HarnessError::Numerical("finest level failed, no heatmap".into())),
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn densify_cmd(field: &Path, crack: Option<&Path>, domain: &str, eps: &str, theta: &str, k: &str, rho: Option<f64>, p: f64, rough: bool, output: Option<&Path>) -> Result<(), HarnessError> {
    let u = load_field(field)?.into_vector()?;
    let dim = u.grid().dim();
    let facets = match crack {
        Some(c) => load_crack(c)?,
        None => FacetSet::empty(dim),
    };
    let d: Vec<f64> = list("domain", domain)?;
    let [x0, y0, x1, y1] = d[..] else { return Err(usage("--domain expects x0,y0,x1,y1")) };
    let domain = AxisBox::new([x0, y0], [x1, y1]);
    let thetas: Vec<f64> = list("theta", theta)?;
    let ks: Vec<u32> = list("k", k)?;
    let csv = if rough {
        let rows = with_workers(|| rough_sweep(&u, &facets, domain, &thetas, &ks, p))?;
        let mut s = format!("{ROUGH_CSV_HEADER}\n");
        for r in &rows {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    } else {
        let mut spec = DensifySpec::new(u, facets, domain);
        spec.eps = list("eps", eps)?;
        spec.theta = thetas;
        spec.k = ks;
        spec.base = DensifyConfig { p, ..DensifyConfig::new(0.1, 0.1, 32) };
        if let Some(r) = rho {
            spec.base.cover.rho = r;
        }
        DensifyRow::to_csv(&with_workers(|| densify_sweep(&spec))?)
    };
    emit(output, &csv)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match &cli.cmd {
        Cmd::Solve { settings, level, seed, output, u_out, v_out, ppm } => solve(settings, *level, *seed, output.as_deref(), u_out.as_deref(), v_out.as_deref(), ppm.as_deref()),
        Cmd::Sweep { settings, output, ppm } => sweep(settings, output.as_deref(), ppm.as_deref()),
        Cmd::Densify { field, crack, domain, eps, theta, k, rho, p, rough, output } => densify_cmd(field, crack.as_deref(), domain, eps, theta, k, *rho, *p, *rough, output.as_deref()),
        Cmd::Check => {
            let out = with_workers(run_checks)?;
            for c in &out {
                println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            match out.iter().filter(|c| !c.pass).count() {
                0 => Ok(()),
                n => Err(HarnessError::Numerical(format!("{n} check(s) failed"))),
            }
        }
        Cmd::Alpha { settings, riemann } => {
            let m = load_settings(settings)?.model()?;
            let a = alpha_constant(&m).map_err(|e| HarnessError::Numerical(e.to_string()))?;
            println!("alpha = {}", fmt_csv_num(a));
            if let Some(n) = riemann {
                if *n == 0 {
                    return Err(usage("--riemann needs a positive count"));
                }
                println!("riemann({n}) = {}", fmt_csv_num(alpha_riemann(&m, *n)));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gsbd: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
