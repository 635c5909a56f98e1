//! Command dispatch and file output for the `fractel` binary.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{parse_config, RunConfig, Tolerances};
use crate::error::{Error, Result};
use crate::laplace_oracle::{laplace_symbol, talbot_invert};
use crate::mlf::MlQuery;
use crate::scalar_cauchy::ModeSolution;
use crate::spectral::{assemble_solution, residual, DataSpec, ProblemSpec, SolutionField};
use crate::verify::{
    convergence_study, holder_decay, initial_conditions, mode_bound_excess, partial_sum_growth,
    stability_sweep, SweepSetup,
};

/// Version of the JSON report layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Point at which `oracle` compares the field; not a zero of any `sin kx`.
pub const ORACLE_X: f64 = 1.0;

#[derive(Debug, Parser)]
#[command(name = "fractel", version, about = "Time-fractional telegraph equation solver")]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, global = true, env = "FRACTEL_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true, env = "FRACTEL_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "FRACTEL_THREADS")]
    threads: Option<usize>,
    /// Multiplies every tolerance.
    #[arg(long, global = true, env = "FRACTEL_TOLERANCE_SCALE")]
    tolerance_scale: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate E^γ_{ρ,μ}(z) and print `re,im,err_estimate`.
    Ml(MlArgs),
    /// Assemble the field and write `solution.csv` and `solution.json`.
    Solve,
    /// Compare the field with Laplace inversion, writing `oracle.csv`.
    Oracle,
    /// Run all checks and write `verify.json`.
    Verify {
        /// Perturb one mode of the assembled field before checking.
        #[arg(long)]
        corrupt: bool,
    },
    /// Refine K and N_t, writing `converge.csv` and `converge.json`.
    Converge,
}

#[derive(Debug, Args)]
struct MlArgs {
    #[arg(long, allow_negative_numbers = true)]
    rho: f64,
    #[arg(long, allow_negative_numbers = true)]
    mu: f64,
    #[arg(long, default_value_t = 1)]
    gamma: u8,
    #[arg(long, allow_negative_numbers = true)]
    re: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    im: f64,
}

/// Formats a number with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// One verdict in a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: f64,
    pub tolerance: f64,
    /// `"max"`: pass when `measured ≤ tolerance`.
    pub kind: &'static str,
}

impl Check {
    fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            passed: measured <= tolerance,
            measured,
            tolerance,
            kind: "max",
        }
    }
}

/// Loaded configuration plus command-line overrides.
struct Context {
    cfg: RunConfig,
    tol: Tolerances,
    out: PathBuf,
}

impl Context {
    fn spec(&self) -> ProblemSpec {
        self.cfg.problem()
    }

    fn write(&self, name: &str, body: &str) -> Result<()> {
        fs::create_dir_all(&self.out)?;
        fs::write(self.out.join(name), body)?;
        Ok(())
    }

    fn write_json(&self, name: &str, v: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
        s.push('\n');
        self.write(name, &s)
    }

    fn echo_config(&self) -> Result<()> {
        self.write("config.toml", &self.cfg.to_toml()?)
    }

    fn header(&self, command: &str, passed: bool) -> serde_json::Map<String, Value> {
        let mut m = serde_json::Map::new();
        m.insert("schema_version".into(), json!(SCHEMA_VERSION));
        m.insert("command".into(), json!(command));
        m.insert("passed".into(), json!(passed));
        m.insert("config".into(), serde_json::to_value(&self.cfg).unwrap_or(Value::Null));
        m
    }
}

fn load(cli: &Cli) -> Result<Context> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("this command needs --config".into()))?;
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("cannot read {}: {e}", path.display())))?;
    let cfg = parse_config(&text)?;
    let scale = cli.tolerance_scale.unwrap_or(1.0);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance scale must be positive, got {scale}")));
    }
    let out = cli
        .out
        .clone()
        .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fractel-out"));
    Ok(Context {
        tol: cfg.tolerances.scaled(scale),
        cfg,
        out,
    })
}

/// Runs the command line `args` (including the program name) and returns
/// the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        // the global pool can be set once per process; later calls keep it
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::debug!("thread pool already initialised");
        }
    }
    match dispatch(&cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_CHECK_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::InvalidInput(_) | Error::InvalidArgument(_) => {
                    EXIT_USAGE
                }
                _ => EXIT_CHECK_FAILED,
            }
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.command {
        Command::Ml(a) => cmd_ml(a),
        Command::Solve => cmd_solve(&load(cli)?),
        Command::Oracle => cmd_oracle(&load(cli)?),
        Command::Verify { corrupt } => cmd_verify(&load(cli)?, *corrupt),
        Command::Converge => cmd_converge(&load(cli)?),
    }
}

fn cmd_ml(a: &MlArgs) -> Result<bool> {
    let v = MlQuery::new(a.rho, a.mu, a.gamma, Complex64::new(a.re, a.im)).evaluate()?;
    println!("{},{},{}", num(v.value.re), num(v.value.im), num(v.err_estimate));
    Ok(true)
}

/// CSV of the field: `x,t,w,u,dxx,drho,drho2,residual`, x varying fastest.
pub fn solution_csv(spec: &ProblemSpec, field: &SolutionField) -> Result<String> {
    let d = field
        .derived
        .as_ref()
        .ok_or_else(|| Error::State("derived fields have not been evaluated".into()))?;
    let r = residual(spec, field)?;
    let mut s = String::with_capacity(field.x.len() * field.t.len() * 200);
    s.push_str("x,t,w,u,dxx,drho,drho2,residual\n");
    for (j, &t) in field.t.iter().enumerate() {
        for (i, &x) in field.x.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                num(x),
                num(t),
                num(field.w[(i, j)]),
                num(field.u(i, j)),
                num(d.dxx[(i, j)]),
                num(d.drho[(i, j)]),
                num(d.drho2[(i, j)]),
                num(r.field[(i, j)]),
            );
        }
    }
    Ok(s)
}

fn cmd_solve(ctx: &Context) -> Result<bool> {
    let spec = ctx.spec();
    let field = assemble_solution(&spec)?.with_derivatives(&spec)?;
    let r = residual(&spec, &field)?;
    let d = field.derived.as_ref().expect("derivatives were evaluated");
    let sup = |m: &nalgebra::DMatrix<f64>| m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let checks = vec![
        Check::at_most("residual", r.sup, ctx.tol.residual),
        Check::at_most("realness", field.imag_residue, ctx.tol.realness),
    ];
    let passed = checks.iter().all(|c| c.passed);
    ctx.write("solution.csv", &solution_csv(&spec, &field)?)?;
    let mut m = ctx.header("solve", passed);
    m.insert("checks".into(), json!(checks));
    m.insert(
        "norms".into(),
        json!({
            "w_sup": field.sup_w(),
            "drho_sup": sup(&d.drho),
            "drho2_sup": sup(&d.drho2),
            "dxx_sup": sup(&d.dxx),
            "residual_sup": r.sup,
            "residual_l2": r.l2,
            "imag_residue": field.imag_residue,
        }),
    );
    m.insert("tail".into(), json!(field.tail));
    m.insert("degenerate_modes".into(), json!(field.degenerate_modes));
    m.insert("warnings".into(), json!(field.warnings));
    ctx.write_json("solution.json", &Value::Object(m))?;
    ctx.echo_config()?;
    Ok(passed)
}

/// One row of the oracle comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleRow {
    pub t: f64,
    pub y_solver: f64,
    pub y_oracle: f64,
    pub relerr: f64,
}

fn active_solutions(spec: &ProblemSpec) -> Result<Vec<(usize, ModeSolution)>> {
    spec.mode_params(spec.modes)?
        .into_iter()
        .enumerate()
        .filter(|(_, p)| !(p.phi0 == 0.0 && p.phi1 == 0.0 && p.source.is_zero()))
        .map(|(k, p)| Ok((k + 1, ModeSolution::new(p)?)))
        .collect()
}

/// `u(x, t)` from the closed forms and from Laplace inversion, on the time
/// grid points in `[0.1 T, T]`. `relerr` is relative to the sup of the
/// inverted values.
pub fn oracle_rows(spec: &ProblemSpec, x: f64) -> Result<Vec<OracleRow>> {
    spec.validate()?;
    let sols = active_solutions(spec)?;
    let symbols = sols
        .iter()
        .map(|(_, s)| laplace_symbol(&s.params))
        .collect::<Result<Vec<_>>>()?;
    let times: Vec<f64> = spec
        .t_grid()
        .into_iter()
        .filter(|&t| t >= 0.1 * spec.horizon)
        .collect();
    let pairs = times
        .par_iter()
        .map(|&t| {
            let mut a = 0.0;
            let mut b = 0.0;
            for ((k, s), f) in sols.iter().zip(&symbols) {
                let sk = (*k as f64 * x).sin();
                a += s.y(t)?.re * sk;
                b += talbot_invert(f, t)?.re * sk;
            }
            Ok((a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = pairs.iter().fold(0.0f64, |m, p| m.max(p.1.abs()));
    Ok(times
        .iter()
        .zip(&pairs)
        .map(|(&t, &(a, b))| OracleRow {
            t,
            y_solver: a,
            y_oracle: b,
            relerr: if scale > 0.0 { (a - b).abs() / scale } else { (a - b).abs() },
        })
        .collect())
}

/// Worst per-mode sup-relative disagreement between the closed forms and
/// Laplace inversion on `[0.1 T, T]`.
pub fn oracle_mode_error(spec: &ProblemSpec) -> Result<f64> {
    let sols = active_solutions(spec)?;
    let times: Vec<f64> = spec
        .t_grid()
        .into_iter()
        .filter(|&t| t >= 0.1 * spec.horizon)
        .collect();
    let errs = sols
        .par_iter()
        .map(|(_, s)| {
            let f = laplace_symbol(&s.params)?;
            let mut diff: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for &t in &times {
                let o = talbot_invert(&f, t)?.re;
                diff = diff.max((s.y(t)?.re - o).abs());
                scale = scale.max(o.abs());
            }
            Ok(if scale > 0.0 { diff / scale } else { diff })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

fn cmd_oracle(ctx: &Context) -> Result<bool> {
    let spec = ctx.spec();
    let rows = oracle_rows(&spec, ORACLE_X)?;
    let mut s = String::from("t,y_solver,y_oracle,relerr\n");
    for r in &rows {
        let _ = writeln!(s, "{},{},{},{}", num(r.t), num(r.y_solver), num(r.y_oracle), num(r.relerr));
    }
    ctx.write("oracle.csv", &s)?;
    let worst = rows.iter().fold(0.0f64, |m, r| m.max(r.relerr));
    let check = Check::at_most("oracle", worst, ctx.tol.oracle);
    let mut m = ctx.header("oracle", check.passed);
    m.insert("x".into(), json!(ORACLE_X));
    m.insert("checks".into(), json!([check]));
    ctx.write_json("oracle.json", &Value::Object(m))?;
    Ok(check.passed)
}

/// Problem with coefficients `k^{-5}` up to mode `4K` in both data
/// functions and in the source, used for the partial-sum growth checks.
pub fn smooth_proxy(rho: f64, alpha: f64, modes: usize, n_t: usize, m_x: usize) -> ProblemSpec {
    let values: Vec<f64> = (1..=4 * modes).map(|k| (k as f64).powi(-5)).collect();
    ProblemSpec {
        source: values
            .iter()
            .enumerate()
            .map(|(k, v)| crate::spectral::SourceSpec {
                mode: k + 1,
                coeffs: vec![*v, 0.5 * v],
            })
            .collect(),
        modes,
        n_t,
        m_x,
        ..ProblemSpec::new(
            rho,
            alpha,
            DataSpec::Coefficients {
                values: values.iter().map(|v| 0.5 * v).collect(),
            },
            DataSpec::Coefficients { values },
        )
    }
}

/// Result of the `verify` command.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    pub fitted: Value,
    pub corrupted_mode: Option<usize>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Runs every check on the configured problem.
pub fn verify_config(cfg: &RunConfig, tol: &Tolerances, corrupt: bool) -> Result<VerifyReport> {
    let spec = cfg.problem();
    let mut field = assemble_solution(&spec)?.with_derivatives(&spec)?;
    let mut corrupted_mode = None;
    if corrupt {
        let k = field
            .modes
            .iter()
            .position(|m| m.max_abs() > 0.0)
            .map_or(1, |i| i + 1);
        field.corrupt_mode(k, 1.1)?;
        corrupted_mode = Some(k);
    }
    let mut checks = Vec::new();
    let r = residual(&spec, &field)?;
    checks.push(Check::at_most("residual", r.sup, tol.residual));

    let stride = (spec.m_x / 20).max(1);
    let ic = initial_conditions(&spec, &field, stride)?;
    checks.push(Check::at_most("initial_condition_phi1", ic.phi1_error, tol.initial_condition));
    checks.push(Check::at_most("initial_condition_phi0", ic.phi0_error, tol.initial_condition));
    checks.push(Check::at_most("realness", field.imag_residue, tol.realness));

    let zero = ProblemSpec {
        phi0: DataSpec::Zero,
        phi1: DataSpec::Zero,
        source: Vec::new(),
        ..spec.clone()
    };
    let zf = assemble_solution(&zero)?.with_derivatives(&zero)?;
    let zd = zf.derived.as_ref().expect("derivatives were evaluated");
    let zsup = [&zf.w, &zd.drho, &zd.drho2, &zd.dxx]
        .iter()
        .flat_map(|m| m.iter())
        .fold(0.0f64, |a, v| a.max(v.abs()));
    checks.push(Check::at_most("uniqueness", zsup, tol.uniqueness));

    checks.push(Check::at_most("oracle", oracle_mode_error(&spec)?, tol.oracle));
    let excess = mode_bound_excess(&spec, &field);
    checks.push(Check::at_most("mode_bound", excess, 1.0));

    let setup = SweepSetup {
        holder_exponent: cfg.sweep.holder_exponent,
        ..SweepSetup::of(&spec)
    };
    let sweep = stability_sweep(&setup, cfg.seed, cfg.sweep.count)?;
    let fine = stability_sweep(&setup.refined(), cfg.seed, cfg.sweep.count)?;
    let spread = if sweep.max_ratio > 0.0 {
        (fine.max_ratio - sweep.max_ratio).abs() / sweep.max_ratio
    } else {
        0.0
    };
    checks.push(Check::at_most("stability_violations", sweep.violations as f64, 0.0));
    checks.push(Check::at_most("stability_refinement", spread, tol.stability_spread));
    let outlier = if sweep.median_ratio > 0.0 {
        sweep.max_ratio / sweep.median_ratio
    } else {
        0.0
    };
    checks.push(Check::at_most("stability_outlier", outlier, tol.stability_median_factor));

    let proxy = smooth_proxy(spec.rho, spec.alpha, spec.modes.min(32), spec.n_t, spec.m_x);
    let growth = partial_sum_growth(&proxy)?;
    for g in &growth {
        checks.push(Check::at_most(
            &format!("partial_sums:{}", g.name),
            g.relative_increase,
            tol.partial_sum_growth,
        ));
    }

    let decay = |d: &DataSpec| -> Result<Value> {
        let c = d.coefficients(spec.modes)?;
        let h = holder_decay(&c, 2.0 + cfg.sweep.holder_exponent)?;
        Ok(json!({"block_ratio": h.block_ratio, "bounded": h.bounded}))
    };
    let fitted = json!({
        "sector_constant": field.tail.fitted_m,
        "tail_bound": field.tail.bound,
        "stability_max_ratio": sweep.max_ratio,
        "stability_median_ratio": sweep.median_ratio,
        "stability_max_ratio_refined": fine.max_ratio,
        "initial_condition_points": ic.points,
        "residual_l2": r.l2,
        "phi0_decay": decay(&spec.phi0)?,
        "phi1_decay": decay(&spec.phi1)?,
        "degenerate_modes": field.degenerate_modes,
    });
    Ok(VerifyReport {
        checks,
        fitted,
        corrupted_mode,
    })
}

fn cmd_verify(ctx: &Context, corrupt: bool) -> Result<bool> {
    let report = verify_config(&ctx.cfg, &ctx.tol, corrupt)?;
    let passed = report.passed();
    let mut m = ctx.header("verify", passed);
    m.insert("corrupted_mode".into(), json!(report.corrupted_mode));
    m.insert("checks".into(), json!(report.checks));
    m.insert(
        "failed".into(),
        json!(report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect::<Vec<_>>()),
    );
    m.insert("fitted".into(), report.fitted);
    ctx.write_json("verify.json", &Value::Object(m))?;
    ctx.echo_config()?;
    for c in &report.checks {
        println!(
            "{} {} measured={} tolerance={}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            num(c.measured),
            num(c.tolerance)
        );
    }
    Ok(passed)
}

fn converge_lists(cfg: &RunConfig) -> (Vec<usize>, Vec<usize>) {
    let modes = if cfg.converge.modes.is_empty() {
        vec![(cfg.modes / 4).max(1), (cfg.modes / 2).max(1), cfg.modes]
    } else {
        cfg.converge.modes.clone()
    };
    let grids = if cfg.converge.grids.is_empty() {
        vec![(cfg.n_t / 2).max(8), cfg.n_t]
    } else {
        cfg.converge.grids.clone()
    };
    (modes, grids)
}

fn cmd_converge(ctx: &Context) -> Result<bool> {
    let (modes, grids) = converge_lists(&ctx.cfg);
    let table = convergence_study(&ctx.spec(), &modes, &grids)?;
    let mut s =
        String::from("modes,n_t,w_sup,residual_sup,residual_l2,tail_bound,data_residual\n");
    for r in &table.rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.modes,
            r.n_t,
            num(r.w_sup),
            num(r.residual_sup),
            num(r.residual_l2),
            num(r.tail_bound),
            num(r.data_residual)
        );
    }
    ctx.write("converge.csv", &s)?;
    // data residual must not grow with K at a fixed grid
    let mut monotone = true;
    for &n in &grids {
        let col: Vec<f64> = table
            .rows
            .iter()
            .filter(|r| r.n_t == n)
            .map(|r| r.data_residual)
            .collect();
        monotone &= col.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
    }
    let worst_residual = table.rows.iter().fold(0.0f64, |m, r| m.max(r.residual_sup));
    let checks = vec![
        Check::at_most("data_residual_monotone", if monotone { 0.0 } else { 1.0 }, 0.0),
        Check::at_most("residual", worst_residual, ctx.tol.residual),
    ];
    let passed = checks.iter().all(|c| c.passed);
    let mut m = ctx.header("converge", passed);
    m.insert("rows".into(), json!(table.rows));
    m.insert("observed_decay".into(), json!(table.observed_decay));
    m.insert("checks".into(), json!(checks));
    ctx.write_json("converge.json", &Value::Object(m))?;
    Ok(passed)
}

/// Reads a file written by a command, for tests and tooling.
pub fn read_output(dir: &Path, name: &str) -> Result<String> {
    Ok(fs::read_to_string(dir.join(name))?)
}
