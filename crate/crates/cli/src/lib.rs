//! Batch front end for `shl-core`.
//!
//! Each subcommand reads parameters from flags and an optional
//! `--config` file of `key=value` lines (flags win), runs its checks, writes
//! a JSON report plus CSV artifacts into `--out`, and exits with
//!
//! * `0` when every check passes,
//! * `1` when a check fails (failing instances go to `<command>_failures.json`),
//! * `2` on invalid configuration.
//!
//! Comma-separated values sweep a parameter grid. `SHL_THREADS` caps the
//! number of worker threads.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

pub mod commands;
pub mod expr;
pub mod params;
pub mod report;

use params::Params;
use report::{to_json, Report};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
        }
    }
}

impl From<shl_core::Error> for CliError {
    fn from(e: shl_core::Error) -> Self {
        use shl_core::Error as E;
        match e {
            E::MassDrift { .. }
            | E::DomainTooSmall { .. }
            | E::NegativeDensity { .. }
            | E::QuadratureNotConverged { .. }
            | E::InfeasibleTransport(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

macro_rules! param_args {
    ($name:ident { $($field:ident : $flag:literal => $help:literal),* $(,)? }) => {
        #[derive(Args, Debug, Default, Clone)]
        pub struct $name {
            $(
                #[arg(long = $flag, help = $help, allow_hyphen_values = true)]
                pub $field: Option<String>,
            )*
        }

        impl $name {
            pub const KEYS: &'static [&'static str] = &[$($flag),*];

            fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
                vec![$(($flag, self.$field.clone())),*]
            }
        }
    };
}

param_args!(TightnessArgs {
    lipschitz: "L" => "drift Lipschitz constants (list)",
    h: "h" => "step sizes (list)",
    steps: "N" => "numbers of steps (list)",
    q: "q" => "Renyi orders (list)",
    v: "v" => "shift norms (list)",
    lambda: "lambda" => "ellipticity used in the bound (default 2, the OU value)",
    tolerance: "tolerance" => "relative tolerance for equality (default 1e-10)",
});

param_args!(ScheduleArgs {
    c1: "c1" => "one-step drift constant",
    c2: "c2" => "one-step noise constant",
    steps: "N" => "number of steps",
    candidate: "candidate" => "schedule to test against the optimum (list a_0..a_N)",
    lipschitz: "L" => "continuous mode: Lipschitz constant",
    horizon: "T" => "continuous mode: horizon",
    samples: "samples" => "continuous mode: CSV sample count (default 101)",
});

param_args!(BoundsTableArgs {
    kind: "kind" => "bound kinds (list of SRT_q, SRT_1, SH_p, SH_log, LGE)",
    beta: "beta" => "smoothness constants (list)",
    t: "t" => "times, `inf` allowed (list)",
    order: "order" => "q for SRT_q and p for SH_p (list)",
    v: "v" => "shift norms (list)",
});

param_args!(FpverifyArgs {
    potential: "potential" => "potential V(x) as an expression",
    beta: "beta" => "declared bound on |V''| (sampled when omitted)",
    x0: "x0" => "starting point",
    t: "t" => "time",
    v: "v" => "shift",
    q: "q" => "Renyi order for SRT_q",
    mode: "mode" => "srt, lge, shp, shlog or all (list)",
    p: "p" => "Harnack exponent for SH_p",
    f: "f" => "positive test function f(x) for lge/shp/shlog",
    points: "points" => "grid points (default 4096)",
});

param_args!(ScoreArgs {
    potential: "potential" => "1D potential expression (Gaussian target when omitted)",
    beta: "beta" => "smoothness constant",
    d: "d" => "dimension (Gaussian target)",
    n: "n" => "number of samples",
    method: "method" => "exact, inverse_cdf or langevin",
    step: "step" => "Langevin step size",
    burn_in: "burn_in" => "Langevin burn-in steps",
    thin: "thin" => "Langevin thinning",
    lambdas: "lambdas" => "MGF parameters (list)",
    deltas: "deltas" => "tail levels (list)",
    samples_csv: "samples_csv" => "also write samples.csv (true/false)",
});

param_args!(CouplingArgs {
    states: "states" => "state-space size for the composition rule (<= 6)",
    instances: "instances" => "random composition instances",
    q: "q" => "Renyi orders (list)",
    identical: "identical" => "use mu = nu (true/false)",
    convexity: "convexity" => "random convexity-principle instances",
});

param_args!(DualsdArgs {
    gap: "gap" => "mean gap between mu and nu",
    var: "var" => "shared variance of mu and nu",
    noise: "noise" => "variance of the smoothing noise xi",
    z: "z" => "signed shifts, negative = dual (list)",
    a: "a" => "sensitivity radii (list)",
    q: "q" => "Renyi orders (list)",
    d: "d" => "dimension",
    random: "random" => "number of random instances instead of the grid",
});

#[derive(Subcommand, Debug, Clone)]
pub enum Command {
    /// Exact OU divergence against the discrete-time bound.
    Tightness(TightnessArgs),
    /// Optimal shift schedule (discrete or continuous) and its cost.
    Schedule(ScheduleArgs),
    /// Table of regularity constants.
    #[command(name = "bounds-table")]
    BoundsTable(BoundsTableArgs),
    /// Fokker-Planck verification of SRT, SH_p, SH_log and LGE.
    Fpverify(FpverifyArgs),
    /// Score concentration checks on samples from exp(-V).
    Score(ScoreArgs),
    /// Shifted composition rule and convexity principle on finite instances.
    Coupling(CouplingArgs),
    /// Generalized convolution lemma for shifted divergences.
    Dualsd(DualsdArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Tightness(_) => "tightness",
            Command::Schedule(_) => "schedule",
            Command::BoundsTable(_) => "bounds-table",
            Command::Fpverify(_) => "fpverify",
            Command::Score(_) => "score",
            Command::Coupling(_) => "coupling",
            Command::Dualsd(_) => "dualsd",
        }
    }

    fn keys(&self) -> &'static [&'static str] {
        match self {
            Command::Tightness(_) => TightnessArgs::KEYS,
            Command::Schedule(_) => ScheduleArgs::KEYS,
            Command::BoundsTable(_) => BoundsTableArgs::KEYS,
            Command::Fpverify(_) => FpverifyArgs::KEYS,
            Command::Score(_) => ScoreArgs::KEYS,
            Command::Coupling(_) => CouplingArgs::KEYS,
            Command::Dualsd(_) => DualsdArgs::KEYS,
        }
    }

    fn pairs(&self) -> Vec<(&'static str, Option<String>)> {
        match self {
            Command::Tightness(a) => a.pairs(),
            Command::Schedule(a) => a.pairs(),
            Command::BoundsTable(a) => a.pairs(),
            Command::Fpverify(a) => a.pairs(),
            Command::Score(a) => a.pairs(),
            Command::Coupling(a) => a.pairs(),
            Command::Dualsd(a) => a.pairs(),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "shl", version, about = "Sharp forward-regularity bounds: checks and tables")]
pub struct Cli {
    /// File of key=value lines; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory for the report and CSV files.
    #[arg(long, global = true)]
    pub out: Option<String>,
    /// RNG seed.
    #[arg(long, global = true)]
    pub seed: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

/// Everything a command produces before it is written out.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<report::Check>,
    /// Serialized failing instances.
    pub failures: Vec<serde_json::Value>,
    /// `(file name, contents)` pairs.
    pub artifacts: Vec<(String, String)>,
}

/// Result of a full run.
#[derive(Debug)]
pub struct RunResult {
    pub exit_code: i32,
    pub report: Option<Report>,
    pub report_json: Option<String>,
    pub out_dir: Option<PathBuf>,
}

fn merged_params(cli: &Cli) -> Result<(Params, u64, PathBuf), CliError> {
    let mut params = Params::default();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        for (k, v) in Params::parse_file_contents(&text, path)? {
            params.insert(&k, v);
        }
    }
    for (k, v) in cli.command.pairs() {
        if let Some(v) = v {
            params.insert(k, v);
        }
    }
    if let Some(seed) = &cli.seed {
        params.insert("seed", seed.clone());
    }
    if let Some(out) = &cli.out {
        params.insert("out", out.clone());
    }
    let seed = match params.take("seed") {
        Some(s) => s
            .trim()
            .parse::<u64>()
            .map_err(|_| CliError::Config(format!("invalid value for `seed`: `{s}`")))?,
        None => 0,
    };
    let out = PathBuf::from(params.take("out").unwrap_or_else(|| ".".into()));
    let allowed = cli.command.keys();
    if let Some(unknown) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(CliError::Config(format!(
            "unknown parameter `{unknown}` for `{}` (allowed: {})",
            cli.command.name(),
            allowed.join(", ")
        )));
    }
    Ok((params, seed, out))
}

fn dispatch(command: &Command, params: &Params, seed: u64) -> Result<Outcome, CliError> {
    match command {
        Command::Tightness(_) => commands::tightness(params),
        Command::Schedule(_) => commands::schedule(params),
        Command::BoundsTable(_) => commands::bounds_table(params),
        Command::Fpverify(_) => commands::fpverify(params),
        Command::Score(_) => commands::score(params, seed),
        Command::Coupling(_) => commands::coupling(params, seed),
        Command::Dualsd(_) => commands::dualsd(params, seed),
    }
}

fn thread_pool() -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("SHL_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("SHL_THREADS must be a positive integer, got `{v}`")))?;
        if n == 0 {
            return Err(CliError::Config("SHL_THREADS must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder.build().map_err(|e| CliError::Config(e.to_string()))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    fs::write(dir.join(name), contents).map_err(|e| CliError::Io(format!("{}: {e}", dir.join(name).display())))
}

/// Runs a parsed command line and writes its outputs.
pub fn run(cli: &Cli) -> Result<RunResult, CliError> {
    let (params, seed, out) = merged_params(cli)?;
    let pool = thread_pool()?;
    let outcome = pool.install(|| dispatch(&cli.command, &params, seed))?;
    let name = cli.command.name();
    let report = Report {
        command: name.to_string(),
        params: params.resolved(),
        checks: outcome.checks,
        seed,
        version: VERSION.to_string(),
    };
    let json = to_json(&report);
    fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    write_file(&out, &format!("{name}_report.json"), &json)?;
    for (file, contents) in &outcome.artifacts {
        write_file(&out, file, contents)?;
    }
    let exit_code = if report.passed() {
        0
    } else {
        write_file(&out, &format!("{name}_failures.json"), &to_json(&outcome.failures))?;
        1
    };
    Ok(RunResult {
        exit_code,
        report: Some(report),
        report_json: Some(json),
        out_dir: Some(out),
    })
}

/// Parses `args` (including the program name), runs, prints, and returns
/// the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match run(&cli) {
        Ok(result) => {
            if let Some(json) = &result.report_json {
                print!("{json}");
            }
            if result.exit_code == 1 {
                if let (Some(report), Some(dir)) = (&result.report, &result.out_dir) {
                    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
                    eprintln!(
                        "verification failed: {} (instances in {})",
                        failed.join("; "),
                        dir.join(format!("{}_failures.json", report.command)).display()
                    );
                }
            }
            result.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
