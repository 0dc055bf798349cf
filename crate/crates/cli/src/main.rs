//! `edr`: kernel EDR estimation, synthetic experiments and kernel checks.
//!
//! Exit codes: 0 success, 1 other failure (I/O, a failed kernel check),
//! 2 malformed input or odd kernel order, 3 bandwidth-schedule violation,
//! 4 singular predictor covariance, 5 too many failed replicates.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edr_core::simlab::{
    generate, run_convergence, ExperimentPlan, Link, SyntheticModel, MIN_ORACLE_N,
};
use edr_core::{
    build_order_r_kernel, edr_basis, empirical_covariance, estimate_lambda, kernel_moment,
    EstimatorConfig, Sample,
};
use serde::Serialize;

mod output;

use output::{write_atomic, EstimateOutput};

const SCHEMA_VERSION: u32 = 1;
const MOMENT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(
    name = "edr",
    version,
    about = "Kernel estimation of Cov(E[X|Y]) and EDR directions"
)]
struct Cli {
    /// Worker threads for parallel sections (defaults to all cores).
    #[arg(long, global = true, env = "EDR_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate Λ̂ₙ and the EDR directions from a `y,x1,...,xd` CSV file.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo convergence experiment on a synthetic model.
    Convergence(ConvergenceArgs),
    /// Draw a synthetic sample and write it as CSV.
    Simulate(SimulateArgs),
    /// Print the moments of an order-r kernel and check them.
    KernelCheck(KernelCheckArgs),
}

/// Bandwidth schedule h = s·n^(-c1), b = min(a, n^(-c2)).
///
/// The exponents must satisfy c1 > 0, 0 < c2 < 1/10 and
/// 1/8 + c2/4 < c1 < 1/4 - c2. The defaults (c1 = 0.13, c2 = 0.01) are
/// the loosest valid choice maximizing the fluctuation rate
/// 1/2 - 2(c1 + c2) = 0.22.
#[derive(Debug, Clone, Args, Serialize)]
struct EstimatorFlags {
    /// Bandwidth exponent c1.
    #[arg(long, default_value_t = edr_core::estimator::DEFAULT_C1)]
    c1: f64,
    /// Truncation exponent c2.
    #[arg(long, default_value_t = edr_core::estimator::DEFAULT_C2)]
    c2: f64,
    /// Truncation cap a.
    #[arg(long, default_value_t = edr_core::estimator::DEFAULT_A_CAP)]
    a_cap: f64,
    /// Even kernel order r (moments 1..=r vanish).
    #[arg(long, default_value_t = edr_core::estimator::DEFAULT_KERNEL_ORDER)]
    kernel_order: i64,
    /// Multiplier s in h = s·n^(-c1).
    #[arg(long, default_value_t = 1.0)]
    bandwidth_scale: f64,
}

impl EstimatorFlags {
    fn build(&self) -> Result<EstimatorConfig, CliError> {
        let kernel = build_order_r_kernel(self.kernel_order)?;
        Ok(EstimatorConfig::new(self.c1, self.c2, self.a_cap, kernel)?
            .with_bandwidth_scale(self.bandwidth_scale)?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
struct ModelFlags {
    /// Link: m1 (single index), m2 (double index), m3 (quadratic), noise.
    #[arg(long)]
    model: String,
    /// Predictor dimension.
    #[arg(long, default_value_t = 4)]
    d: usize,
    /// Standard deviation of the Gaussian noise.
    #[arg(long, default_value_t = 0.2)]
    noise_sd: f64,
}

impl ModelFlags {
    fn build(&self) -> Result<SyntheticModel, CliError> {
        let link: Link = self.model.parse()?;
        Ok(SyntheticModel::preset(link, self.d, self.noise_sd)?)
    }
}

#[derive(Debug, Args)]
struct EstimateArgs {
    /// Input CSV with header y,x1,...,xd.
    csv: PathBuf,
    #[command(flatten)]
    estimator: EstimatorFlags,
    /// Number of EDR directions to extract.
    #[arg(long, default_value_t = 1)]
    n_directions: usize,
    /// Output JSON path (stdout when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvergenceArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[command(flatten)]
    estimator: EstimatorFlags,
    /// Comma-separated, strictly increasing sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000,4000")]
    grid: Vec<usize>,
    /// Replicates per grid point (at least 20).
    #[arg(long, default_value_t = 50)]
    replicates: usize,
    /// Master seed.
    #[arg(long)]
    seed: u64,
    /// Draws used by the binning oracle for Λ.
    #[arg(long, default_value_t = 1_000_000)]
    oracle_n: usize,
    /// Oracle bin count (default ⌈oracle_n^(1/3)⌉, within 50..=500).
    #[arg(long)]
    oracle_bins: Option<usize>,
    /// Per-replicate CSV output.
    #[arg(long)]
    csv: PathBuf,
    /// JSON report output.
    #[arg(long)]
    json: PathBuf,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Sample size.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: u64,
    /// Output CSV path (stdout when omitted).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct KernelCheckArgs {
    /// Even kernel order.
    #[arg(long)]
    order: i64,
}

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<edr_core::Error> for CliError {
    fn from(err: edr_core::Error) -> Self {
        use edr_core::Error as E;
        let code = match &err {
            E::Csv { .. } | E::InvalidSample(_) | E::InvalidKernelOrder(_) => 2,
            E::InvalidConfig { .. } => 3,
            E::Singular { .. } => 4,
            E::TooManyFailures { .. } => 5,
            _ => 1,
        };
        Self::new(code, err.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        Self::new(1, err.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: cannot configure {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let result = match &cli.command {
        Command::Estimate(args) => cmd_estimate(args),
        Command::Convergence(args) => cmd_convergence(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::KernelCheck(args) => cmd_kernel_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, bytes).map_err(CliError::from),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(bytes).and_then(|()| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut bytes =
        serde_json::to_vec_pretty(value).map_err(|e| CliError::new(1, e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn cmd_estimate(args: &EstimateArgs) -> Result<(), CliError> {
    let config = args.estimator.build()?;
    let sample = Sample::read_csv_path(&args.csv).map_err(|e| match e {
        edr_core::Error::Io(msg) => CliError::new(2, format!("{}: {msg}", args.csv.display())),
        other => other.into(),
    })?;
    let lambda = estimate_lambda(&sample, &config);
    let cov = empirical_covariance(&sample);
    let basis = edr_basis(&lambda, &cov, args.n_directions)?;
    for w in &basis.eigengap_warnings {
        eprintln!(
            "warning: eigengap λ{} - λ{} = {:e} is below 1e-6·λ1; directions {} and {} are not separable",
            w.index + 1,
            w.index + 2,
            w.gap,
            w.index + 1,
            w.index + 2
        );
    }
    let out = EstimateOutput::new(
        SCHEMA_VERSION,
        &args.csv,
        &args.estimator,
        args.n_directions,
        &sample,
        &lambda,
        &cov,
        &basis,
    );
    emit(args.output.as_deref(), &to_json(&out)?)
}

fn cmd_convergence(args: &ConvergenceArgs) -> Result<(), CliError> {
    let model = args.model.build()?;
    let config = args.estimator.build()?;
    if args.oracle_n < MIN_ORACLE_N {
        return Err(CliError::new(
            1,
            format!("--oracle-n must be at least {MIN_ORACLE_N}"),
        ));
    }
    let mut plan =
        ExperimentPlan::new(args.grid.clone(), args.replicates, args.seed, args.oracle_n);
    plan.oracle_bins = args.oracle_bins;
    let report = run_convergence(&model, &config, &plan)?;

    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let json = to_json(&report)?;
    write_atomic(&args.csv, &csv)?;
    write_atomic(&args.json, &json)?;

    let verdict = |b: bool| if b { "yes" } else { "no" };
    let trend = match &report.trend {
        Some(t) => format!(
            "slope {:.4} ± {:.4} (t = {:.2}, reference ν = {:.4})",
            t.slope, t.std_error, t.t_statistic, t.reference_exponent
        ),
        None if report.oracle.degenerate => "degenerate Λ≈0, no trend fit".to_string(),
        None => "no trend fit (fewer than 3 grid points)".to_string(),
    };
    let summary = format!(
        "{}: {}; median error decreasing: {} (last/first {:.3}); subspace decreasing: {}",
        report.model.link,
        trend,
        verdict(report.verdicts.error_strictly_decreasing),
        report.verdicts.error_ratio_last_first,
        verdict(report.verdicts.subspace_strictly_decreasing),
    );
    emit(None, format!("{summary}\n").as_bytes())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let model = args.model.build()?;
    if args.n == 0 {
        return Err(CliError::new(2, "--n must be at least 1"));
    }
    let sample = generate(&model, args.seed, args.n)?;
    let mut buf = Vec::new();
    sample.write_csv(&mut buf)?;
    emit(args.output.as_deref(), &buf)
}

fn cmd_kernel_check(args: &KernelCheckArgs) -> Result<(), CliError> {
    use std::fmt::Write as _;
    let kernel = build_order_r_kernel(args.order)?;
    let order = kernel.order();
    let mut table = String::new();
    let _ = writeln!(
        table,
        "kernel order {order}, sup|K| = {:.6}",
        kernel.sup_bound()
    );
    let _ = writeln!(
        table,
        "{:>3}  {:>24}  {:>8}  status",
        "k", "moment", "target"
    );
    let mut all_pass = true;
    for k in 0..=order + 2 {
        let m = kernel_moment(&kernel, k);
        let (target, status) = if k <= order {
            let target = if k == 0 { 1.0 } else { 0.0 };
            let ok = (m - target).abs() < MOMENT_TOLERANCE;
            all_pass &= ok;
            (format!("{target}"), if ok { "pass" } else { "FAIL" })
        } else {
            ("-".to_string(), "info")
        };
        let _ = writeln!(table, "{k:>3}  {m:>24.16e}  {target:>8}  {status}");
    }
    if all_pass {
        let _ = writeln!(table, "all moments within {MOMENT_TOLERANCE:e}");
    }
    emit(None, table.as_bytes())?;
    if all_pass {
        Ok(())
    } else {
        Err(CliError::new(1, "moment check failed"))
    }
}
