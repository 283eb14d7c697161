//! `sparsevb` command-line tool: fit, simulate and diagnose.
//!
//! Every command echoes its fully-resolved configuration in its output and
//! exits with status 0 exactly when no error occurred.

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sparsevb::diagnostics::{diagnose, DesignDiagnostics};
use sparsevb::io::{self as sio, DiagnoseRunConfig, FitRunConfig, SimulateRunConfig, SCHEMA_VERSION};
use sparsevb::sim::{run_experiment, ExperimentReport};
use sparsevb::{fit, FitConfig, Slab, Summary, UpdateOrder};

#[derive(Parser)]
#[command(
    name = "sparsevb",
    version,
    about = "Spike-and-slab variational Bayes for sparse logistic regression"
)]
struct Cli {
    /// Cap on worker threads (default: all available cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the variational posterior to a design matrix and binary labels.
    Fit(FitArgs),
    /// Run a replicated simulation study and write metric tables.
    Simulate(SimulateArgs),
    /// Compute design-matrix constants and the sufficient design condition.
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum SlabArg {
    Laplace,
    #[value(alias = "gaussian")]
    Gauss,
}

#[derive(Clone, Copy, ValueEnum)]
enum OrderArg {
    Sequential,
    ParallelSnapshot,
}

/// Flags that override fields of a fit configuration.
#[derive(Args)]
struct FitFlags {
    /// Slab family; switching family resets its parameters to defaults.
    #[arg(long, value_enum)]
    slab: Option<SlabArg>,
    /// Laplace slab rate.
    #[arg(long)]
    lambda: Option<f64>,
    /// Laplace slab location.
    #[arg(long)]
    nu: Option<f64>,
    /// Gaussian slab standard deviation.
    #[arg(long)]
    sigma0: Option<f64>,
    /// Beta prior shape on the inclusion weight (prior mean a0 / (a0 + b0)).
    #[arg(long)]
    a0: Option<f64>,
    /// Second Beta shape; b0 = p gives prior inclusion odds of about 1 : p.
    #[arg(long)]
    b0: Option<f64>,
    /// Convergence tolerance on max |delta gamma| and the relative objective change.
    #[arg(long)]
    tol: Option<f64>,
    /// Maximum number of coordinate sweeps.
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long, value_enum)]
    update_order: Option<OrderArg>,
}

impl FitFlags {
    fn apply(&self, fit: &mut FitConfig) -> Result<(), String> {
        let prior = &mut fit.prior;
        match self.slab {
            Some(SlabArg::Laplace) if !matches!(prior.slab, Slab::Laplace { .. }) => prior.slab = Slab::laplace(1.0),
            Some(SlabArg::Gauss) if !matches!(prior.slab, Slab::Gaussian { .. }) => prior.slab = Slab::gaussian(1.0),
            _ => {}
        }
        match &mut prior.slab {
            Slab::Laplace { nu, lambda } => {
                if self.sigma0.is_some() {
                    return Err("--sigma0 applies to the gauss slab".into());
                }
                if let Some(v) = self.lambda {
                    *lambda = v;
                }
                if let Some(v) = self.nu {
                    *nu = v;
                }
            }
            Slab::Gaussian { sigma0 } => {
                if self.lambda.is_some() || self.nu.is_some() {
                    return Err("--lambda and --nu apply to the laplace slab".into());
                }
                if let Some(v) = self.sigma0 {
                    *sigma0 = v;
                }
            }
        }
        if let Some(v) = self.a0 {
            prior.a0 = v;
        }
        if let Some(v) = self.b0 {
            prior.b0 = v;
        }
        if let Some(v) = self.tol {
            fit.tol = v;
        }
        if let Some(v) = self.max_iter {
            fit.max_iter = v;
        }
        if let Some(o) = self.update_order {
            fit.update_order = match o {
                OrderArg::Sequential => UpdateOrder::Sequential,
                OrderArg::ParallelSnapshot => UpdateOrder::ParallelSnapshot,
            };
        }
        Ok(())
    }
}

#[derive(Args)]
struct FitArgs {
    /// Design matrix, one observation per row.
    x: PathBuf,
    /// Labels in {0, 1}, one per row.
    y: PathBuf,
    /// JSON run configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: FitFlags,
    /// Seed for coordinate shuffling.
    #[arg(long)]
    seed: Option<u64>,
    /// Inclusion threshold for the selected set.
    #[arg(long)]
    threshold: Option<f64>,
    /// Level of the marginal credible intervals.
    #[arg(long)]
    ci_level: Option<f64>,
    /// Skip one header line in each CSV.
    #[arg(long)]
    header: bool,
    /// Output file (default: standard output).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON simulation configuration (design and variants).
    config: PathBuf,
    /// Output directory for table.csv, table.json and coverage.csv.
    #[arg(long, short)]
    out: PathBuf,
    /// Overrides applied to every variant.
    #[command(flatten)]
    flags: FitFlags,
    /// Number of replicates.
    #[arg(long)]
    reps: Option<usize>,
    /// Design seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Inclusion threshold for the selected set.
    #[arg(long)]
    threshold: Option<f64>,
    /// Also compute interval coverage at this level.
    #[arg(long)]
    ci_level: Option<f64>,
    /// Write zero run times so that repeated runs give identical files.
    #[arg(long)]
    omit_timing: bool,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// Design matrix, one observation per row.
    x: PathBuf,
    /// Reference coefficients for W (default: all zero).
    #[arg(long)]
    theta0: Option<PathBuf>,
    /// JSON diagnose options; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Largest subset size for the restricted constants.
    #[arg(long)]
    s_max: Option<usize>,
    /// Sparsity level used by the design condition and the cone support.
    #[arg(long)]
    s0: Option<usize>,
    /// Comma-separated cone support (0-based).
    #[arg(long, value_delimiter = ',')]
    support: Option<Vec<usize>>,
    /// Multiplier in front of the design condition bound.
    #[arg(long)]
    alpha: Option<f64>,
    /// L in the design condition.
    #[arg(long = "l")]
    l: Option<f64>,
    /// Random cone points before the local descent.
    #[arg(long)]
    cone_samples: Option<usize>,
    /// Subset enumeration budget before falling back to sampling.
    #[arg(long)]
    budget: Option<u64>,
    /// Fail instead of sampling subsets above the budget.
    #[arg(long)]
    no_sampling: bool,
    /// Seed for subset sampling and cone points.
    #[arg(long)]
    seed: Option<u64>,
    /// Skip one header line in each CSV.
    #[arg(long)]
    header: bool,
    /// Output file (default: standard output).
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct Inputs<'a> {
    x: &'a Path,
    #[serde(skip_serializing_if = "Option::is_none")]
    y: Option<&'a Path>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta0: Option<&'a Path>,
    header: bool,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    schema_version: u32,
    command: &'static str,
    config_echo: &'a FitRunConfig,
    inputs: Inputs<'a>,
    n: usize,
    p: usize,
    gamma: &'a [f64],
    mu: &'a [f64],
    sigma: &'a [f64],
    posterior_mean: &'a [f64],
    selected: &'a [usize],
    intervals: Vec<[f64; 2]>,
    objective_trace: &'a [f64],
    iterations: usize,
    converged: bool,
    optimizer_warnings: usize,
    wall_time_seconds: f64,
}

#[derive(Serialize)]
struct SimulateOutput<'a> {
    schema_version: u32,
    command: &'static str,
    config_echo: &'a SimulateRunConfig,
    #[serde(flatten)]
    report: &'a ExperimentReport,
}

#[derive(Serialize)]
struct DiagnoseOutput<'a> {
    schema_version: u32,
    command: &'static str,
    config_echo: &'a DiagnoseRunConfig,
    inputs: Inputs<'a>,
    #[serde(flatten)]
    diagnostics: &'a DesignDiagnostics,
}

type CmdResult = Result<(), String>;

fn open(path: &Path) -> Result<BufReader<File>, String> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String, String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn in_file<T>(path: &Path, r: sparsevb::Result<T>) -> Result<T, String> {
    r.map_err(|e| format!("{}: {e}", path.display()))
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| e.to_string())?;
    text.push('\n');
    match out {
        Some(p) => fs::write(p, text).map_err(|e| format!("{}: {e}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn run_fit(a: FitArgs) -> CmdResult {
    let mut cfg = match &a.config {
        Some(p) => in_file(p, sio::parse_fit_config(&read_text(p)?))?,
        None => FitRunConfig::default(),
    };
    a.flags.apply(&mut cfg.fit)?;
    if let Some(v) = a.seed {
        cfg.fit.seed = v;
    }
    if let Some(v) = a.threshold {
        cfg.threshold = v;
    }
    if let Some(v) = a.ci_level {
        cfg.ci_level = v;
    }
    cfg.validate().map_err(|e| e.to_string())?;

    let x = in_file(&a.x, sio::read_matrix(open(&a.x)?, a.header))?;
    let y = in_file(&a.y, sio::read_labels(open(&a.y)?, a.header))?;
    let data = sio::dataset(&x, y).map_err(|e| e.to_string())?;
    let res = fit(&data, &cfg.fit).map_err(|e| e.to_string())?;
    let summary = Summary::new(&res.state, cfg.threshold, cfg.ci_level).map_err(|e| e.to_string())?;
    let out = FitOutput {
        schema_version: SCHEMA_VERSION,
        command: "fit",
        config_echo: &cfg,
        inputs: Inputs {
            x: &a.x,
            y: Some(&a.y),
            theta0: None,
            header: a.header,
        },
        n: data.n(),
        p: data.p(),
        gamma: &res.state.gamma,
        mu: &res.state.mu,
        sigma: &res.state.sigma,
        posterior_mean: &summary.posterior_mean,
        selected: &summary.selected,
        intervals: summary.intervals.iter().map(|i| [i.lo, i.hi]).collect(),
        objective_trace: &res.objective_trace,
        iterations: res.iterations,
        converged: res.converged,
        optimizer_warnings: res.optimizer_warnings,
        wall_time_seconds: res.wall_time_seconds,
    };
    if !res.converged {
        eprintln!("warning: no convergence after {} sweeps", res.iterations);
    }
    emit(&out, a.out.as_deref())
}

fn run_simulate(a: SimulateArgs) -> CmdResult {
    let mut cfg: SimulateRunConfig = in_file(
        &a.config,
        serde_json::from_str(&read_text(&a.config)?).map_err(sparsevb::Error::from),
    )?;
    for v in &mut cfg.variants {
        a.flags
            .apply(&mut v.fit)
            .map_err(|e| format!("variant {}: {e}", v.label))?;
    }
    if let Some(v) = a.reps {
        cfg.design.n_reps = v;
    }
    if let Some(v) = a.seed {
        cfg.design.seed = v;
    }
    if let Some(v) = a.threshold {
        cfg.threshold = v;
    }
    if a.ci_level.is_some() {
        cfg.ci_level = a.ci_level;
    }
    in_file(&a.config, cfg.validate())?;

    let mut report =
        run_experiment(&cfg.design, &cfg.variants, cfg.threshold, cfg.ci_level).map_err(|e| e.to_string())?;
    if a.omit_timing {
        report = report.without_timing();
    }
    fs::create_dir_all(&a.out).map_err(|e| format!("{}: {e}", a.out.display()))?;
    let write = |name: &str, text: String| {
        let p = a.out.join(name);
        fs::write(&p, text).map_err(|e| format!("{}: {e}", p.display()))
    };
    write("table.csv", report.metrics_csv())?;
    if cfg.ci_level.is_some() {
        write("coverage.csv", report.coverage_csv())?;
    }
    emit(
        &SimulateOutput {
            schema_version: SCHEMA_VERSION,
            command: "simulate",
            config_echo: &cfg,
            report: &report,
        },
        Some(&a.out.join("table.json")),
    )?;
    print!("{}", report.metrics_csv());
    for f in &report.failures {
        eprintln!("replicate {} of {} failed: {}", f.rep, f.method, f.message);
    }
    Ok(())
}

fn run_diagnose(a: DiagnoseArgs) -> CmdResult {
    let mut cfg = match &a.config {
        Some(p) => in_file(p, sio::parse_diagnose_config(&read_text(p)?))?,
        None => DiagnoseRunConfig::default(),
    };
    let o = &mut cfg.options;
    if let Some(v) = a.s_max {
        o.s_max = v;
    }
    if let Some(v) = a.s0 {
        o.s0 = v;
    }
    if a.support.is_some() {
        o.support = a.support.clone();
    }
    if let Some(v) = a.alpha {
        o.alpha = v;
    }
    if let Some(v) = a.l {
        o.l = v;
    }
    if let Some(v) = a.cone_samples {
        o.cone_samples = v;
    }
    if let Some(v) = a.budget {
        o.search.budget = v;
    }
    if a.no_sampling {
        o.search.allow_sampling = false;
    }
    if let Some(v) = a.seed {
        o.seed = v;
        o.search.seed = v;
    }
    cfg.validate().map_err(|e| e.to_string())?;

    let x = in_file(&a.x, sio::read_matrix(open(&a.x)?, a.header))?;
    let theta0 = match &a.theta0 {
        Some(p) => Some(in_file(p, sio::read_vector(open(p)?, a.header))?),
        None => None,
    };
    let d = diagnose(&x, theta0.as_deref(), &cfg.options).map_err(|e| e.to_string())?;
    emit(
        &DiagnoseOutput {
            schema_version: SCHEMA_VERSION,
            command: "diagnose",
            config_echo: &cfg,
            inputs: Inputs {
                x: &a.x,
                y: None,
                theta0: a.theta0.as_deref(),
                header: a.header,
            },
            diagnostics: &d,
        },
        a.out.as_deref(),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::FAILURE;
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::Fit(a) => run_fit(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Diagnose(a) => run_diagnose(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
