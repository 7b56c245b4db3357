//! `latent-probe` command line.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error,
//! 3 query budget exhausted, 4 transport error.

use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use latent_probe::enhancement::{AblationMode, GradientMode};
use latent_probe::harness::{
    emit_plot_data, run_attack_batch, run_sensitivity, write_fixtures, CodecKind, CodecSpec, ExperimentConfig,
    FailureKind, FixtureSpec, OracleSpec, RunRecord, SeededCodec, SweepKey, RECORD_JSON, SENSITIVITY_JSON,
};
use latent_probe::noise::DirectionMode;
use latent_probe::oracle::serve_toy_oracle;
use latent_probe::Error;

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

const SEED_ENV: &str = "LATENT_PROBE_SEED";

#[derive(Parser)]
#[command(
    name = "latent-probe",
    version,
    about = "Latent-space black-box attacks on pose-and-shape estimators"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the attack over every input in the experiment.
    Attack(ExperimentArgs),
    /// Composed-Jacobian sensitivity analysis of every input.
    Sensitivity(ExperimentArgs),
    /// Serve a toy oracle over HTTP until interrupted.
    Serve(ServeArgs),
    /// Collect (sweep value, mean growth %) rows from run records.
    PlotData(PlotArgs),
    /// Write synthetic images, ground truth and an experiment config.
    MakeFixtures(FixtureArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum OracleKind {
    ToyLinear,
    ToyMlp,
    Remote,
}

#[derive(Clone, Copy, ValueEnum)]
enum GradArg {
    Analytic,
    Spsa,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Random,
    Svd,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config (JSON). Flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    oracle: Option<OracleKind>,
    /// Remote oracle base URL; implies `--oracle remote`.
    #[arg(long)]
    oracle_url: Option<String>,
    /// Seed of a toy oracle.
    #[arg(long)]
    oracle_seed: Option<u64>,
    /// Per-image query budget enforced on the attacker side.
    #[arg(long)]
    budget: Option<u64>,
    /// Codec file, or `affine` / `tanh` for a seeded codec.
    #[arg(long)]
    codec: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    eta: Option<f64>,
    /// Refinement iterations t.
    #[arg(long)]
    queries: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Pixel and latent step size.
    #[arg(long, allow_negative_numbers = true)]
    step: Option<f64>,
    /// Attack seed; falls back to the config, then LATENT_PROBE_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// UBA, A, B or C (or the long labels).
    #[arg(long)]
    mode: Option<String>,
    #[arg(long, value_enum)]
    grad: Option<GradArg>,
    #[arg(long, value_enum)]
    direction: Option<DirectionArg>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Input images (raw-float or PNG); replaces the config's list.
    #[arg(long, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    ground_truth: Option<PathBuf>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, value_enum, default_value = "toy-linear")]
    oracle: OracleKind,
    #[arg(long)]
    seed: Option<u64>,
    /// Estimates allowed per session token.
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    bind: SocketAddr,
    #[arg(long, default_value_t = 16)]
    width: usize,
    #[arg(long, default_value_t = 16)]
    height: usize,
    #[arg(long, default_value_t = 3)]
    channels: usize,
    /// Hidden width of the toy MLP.
    #[arg(long, default_value_t = 32)]
    hidden: usize,
}

#[derive(Args)]
struct PlotArgs {
    /// Run-record files, or directories containing run_record.json.
    #[arg(required = true)]
    records: Vec<PathBuf>,
    #[arg(long, value_parser = parse_sweep)]
    sweep: SweepKey,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    count: usize,
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(long, default_value_t = 3)]
    channels: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 0.5)]
    gt_offset: f64,
    #[arg(long, value_enum, default_value = "toy-linear")]
    oracle: OracleKind,
    #[arg(long)]
    oracle_seed: Option<u64>,
}

fn parse_sweep(s: &str) -> Result<SweepKey, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Argument(_) | Error::Json(_) | Error::Format(_) => 2,
            Error::Budget { .. } => 3,
            Error::Transport(_) => 4,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn failure_code(kind: FailureKind) -> u8 {
    match kind {
        FailureKind::Budget => 3,
        FailureKind::Transport => 4,
        FailureKind::Protocol | FailureKind::Other => 1,
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Failure {
            code: 2,
            message: format!("{SEED_ENV} must be an unsigned integer, got {v:?}"),
        }),
        Err(_) => Ok(None),
    }
}

fn config_sets_seed(path: &Path) -> Result<bool, Failure> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    Ok(v.pointer("/attack/seed").is_some())
}

fn build_config(a: &ExperimentArgs) -> Result<ExperimentConfig, Failure> {
    let (mut cfg, seed_in_file) = match &a.config {
        Some(p) => (ExperimentConfig::load(p)?, config_sets_seed(p)?),
        None => (ExperimentConfig::default(), false),
    };
    let budget = a.budget.or(cfg.oracle.budget());
    let oracle_seed = a.oracle_seed.or(match cfg.oracle {
        OracleSpec::ToyLinear { seed, .. } | OracleSpec::ToyMlp { seed, .. } => Some(seed),
        OracleSpec::Remote { .. } => None,
    });
    let kind = match (a.oracle, &a.oracle_url) {
        (Some(OracleKind::Remote), None) if !matches!(cfg.oracle, OracleSpec::Remote { .. }) => {
            return Err(Error::Config("--oracle remote needs --oracle-url".into()).into())
        }
        (Some(k), _) => Some(k),
        (None, Some(_)) => Some(OracleKind::Remote),
        (None, None) => None,
    };
    cfg.oracle = match (kind, cfg.oracle.clone()) {
        (Some(OracleKind::ToyLinear), _) => OracleSpec::ToyLinear {
            seed: oracle_seed.unwrap_or(0),
            budget,
        },
        (Some(OracleKind::ToyMlp), OracleSpec::ToyMlp { hidden, .. }) => OracleSpec::ToyMlp {
            seed: oracle_seed.unwrap_or(0),
            hidden,
            budget,
        },
        (Some(OracleKind::ToyMlp), _) => OracleSpec::ToyMlp {
            seed: oracle_seed.unwrap_or(0),
            hidden: 32,
            budget,
        },
        (
            Some(OracleKind::Remote),
            OracleSpec::Remote {
                url,
                session,
                timeout_ms,
                ..
            },
        ) => OracleSpec::Remote {
            url: a.oracle_url.clone().unwrap_or(url),
            session,
            budget,
            timeout_ms,
        },
        (Some(OracleKind::Remote), _) => OracleSpec::Remote {
            url: a.oracle_url.clone().unwrap_or_default(),
            session: "latent-probe".into(),
            budget,
            timeout_ms: 10_000,
        },
        (None, OracleSpec::ToyLinear { .. }) => OracleSpec::ToyLinear {
            seed: oracle_seed.unwrap_or(0),
            budget,
        },
        (None, OracleSpec::ToyMlp { hidden, .. }) => OracleSpec::ToyMlp {
            seed: oracle_seed.unwrap_or(0),
            hidden,
            budget,
        },
        (
            None,
            OracleSpec::Remote {
                url,
                session,
                timeout_ms,
                ..
            },
        ) => OracleSpec::Remote {
            url,
            session,
            budget,
            timeout_ms,
        },
    };
    if let Some(c) = &a.codec {
        let seeded = |kind| {
            let (seed, latent_dim, sigma0) = match &cfg.codec {
                CodecSpec::Seeded(s) => (s.seed, s.latent_dim, s.sigma0),
                CodecSpec::File { .. } => (0, 16, 0.0),
            };
            CodecSpec::Seeded(SeededCodec {
                kind,
                seed,
                latent_dim,
                sigma0,
            })
        };
        cfg.codec = match c.as_str() {
            "affine" => seeded(CodecKind::Affine),
            "tanh" => seeded(CodecKind::Tanh),
            path => CodecSpec::File {
                path: PathBuf::from(path),
            },
        };
    }
    let at = &mut cfg.attack;
    if let Some(v) = a.eta {
        at.eta = v;
    }
    if let Some(v) = a.queries {
        at.budget = v;
    }
    if let Some(v) = a.lambda {
        at.lambda = v;
    }
    if let Some(v) = a.step {
        at.step_x = v;
        at.step_z = v;
    }
    if let Some(m) = &a.mode {
        at.ablation_mode = m
            .parse::<AblationMode>()
            .map_err(|_| Error::Config(format!("unknown mode {m:?}; expected UBA, A, B or C")))?;
    }
    if let Some(g) = a.grad {
        at.gradient_mode = match g {
            GradArg::Analytic => GradientMode::Analytic,
            GradArg::Spsa => GradientMode::ZerothOrder,
        };
    }
    if let Some(d) = a.direction {
        at.direction_mode = match d {
            DirectionArg::Random => DirectionMode::Random,
            DirectionArg::Svd => DirectionMode::Svd,
        };
    }
    at.seed = match (a.seed, seed_in_file) {
        (Some(s), _) => s,
        (None, true) => at.seed,
        (None, false) => env_seed()?.unwrap_or(0),
    };
    if let Some(o) = &a.out {
        cfg.out_dir = o.clone();
    }
    if !a.inputs.is_empty() {
        cfg.inputs = a.inputs.clone();
    }
    if let Some(g) = &a.ground_truth {
        cfg.ground_truth = Some(g.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn attack(a: &ExperimentArgs) -> Result<(), Failure> {
    let cfg = build_config(a)?;
    let rec = run_attack_batch(&cfg)?;
    let agg = &rec.aggregate;
    say!(
        "mode {}  images {}  evaluated {}  skipped {}  partial {}",
        cfg.attack.ablation_mode.label(),
        rec.images.len(),
        agg.evaluated,
        agg.skipped,
        agg.partial
    );
    match agg.mean_growth_pct {
        Some(g) => say!("mean growth {g:.2}%"),
        None => say!("mean growth undefined"),
    }
    if let Some(d) = agg.mean_deviation_adv {
        say!("mean adversarial deviation {d:.6}");
    }
    say!("report {}", cfg.out_dir.join(RECORD_JSON).display());
    for r in rec.images.iter().filter(|r| r.reason.is_some()) {
        eprintln!("{}: {}", r.id, r.reason.as_deref().unwrap_or_default());
    }
    match rec.failure() {
        Some(kind) => Err(Failure {
            code: failure_code(kind),
            message: format!("{} image(s) did not complete", agg.partial),
        }),
        None => Ok(()),
    }
}

fn sensitivity(a: &ExperimentArgs) -> Result<(), Failure> {
    let cfg = build_config(a)?;
    let run = run_sensitivity(&cfg)?;
    for e in &run.entries {
        match &e.report {
            Some(r) => {
                let head: Vec<String> = r.singular_values.iter().take(5).map(|s| format!("{s:.4}")).collect();
                let eta_min = r.eta_min.map_or("unreachable".to_string(), |v| format!("{v:.6}"));
                say!(
                    "{}: eta_min {eta_min}  sigma [{}]  trace energy {:.6}",
                    e.id,
                    head.join(", "),
                    r.trace_energy
                );
            }
            None => eprintln!("{}: {}", e.id, e.reason.as_deref().unwrap_or("no report")),
        }
    }
    say!("report {}", cfg.out_dir.join(SENSITIVITY_JSON).display());
    match run.failure() {
        Some(kind) => Err(Failure {
            code: failure_code(kind),
            message: "sensitivity analysis incomplete".into(),
        }),
        None => Ok(()),
    }
}

fn serve(a: &ServeArgs) -> Result<(), Failure> {
    let n = a.width * a.height * a.channels;
    if n == 0 {
        return Err(Error::Config("image dimensions must be positive".into()).into());
    }
    let seed = match a.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(0),
    };
    let spec = match a.oracle {
        OracleKind::ToyLinear => OracleSpec::ToyLinear { seed, budget: None },
        OracleKind::ToyMlp => OracleSpec::ToyMlp {
            seed,
            hidden: a.hidden,
            budget: None,
        },
        OracleKind::Remote => return Err(Error::Config("serve needs a toy oracle".into()).into()),
    };
    let handle = serve_toy_oracle(spec.local_estimator(n)?, a.bind, a.budget, true)?;
    say!("serving {} on {}", spec_name(&spec), handle.base_url());
    std::io::stdout().flush().ok();
    handle.wait();
    Ok(())
}

fn spec_name(s: &OracleSpec) -> String {
    match s {
        OracleSpec::ToyLinear { seed, .. } => format!("toy-linear (seed {seed})"),
        OracleSpec::ToyMlp { seed, hidden, .. } => format!("toy-mlp (seed {seed}, hidden {hidden})"),
        OracleSpec::Remote { url, .. } => url.clone(),
    }
}

fn plot_data(a: &PlotArgs) -> Result<(), Failure> {
    let records = a
        .records
        .iter()
        .map(|p| {
            let p = if p.is_dir() { p.join(RECORD_JSON) } else { p.clone() };
            RunRecord::load(&p).map_err(|e| Error::Config(e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    match &a.out {
        Some(path) => {
            let f = std::fs::File::create(path).map_err(Error::from)?;
            let rows = emit_plot_data(&records, a.sweep, f)?;
            say!("{} rows -> {}", rows.len(), path.display());
        }
        None => {
            emit_plot_data(&records, a.sweep, std::io::stdout().lock())?;
        }
    }
    Ok(())
}

fn make_fixtures(a: &FixtureArgs) -> Result<(), Failure> {
    let seed = match a.seed {
        Some(s) => s,
        None => env_seed()?.unwrap_or(42),
    };
    let oracle_seed = a.oracle_seed.unwrap_or(seed);
    let oracle = match a.oracle {
        OracleKind::ToyLinear => OracleSpec::ToyLinear {
            seed: oracle_seed,
            budget: None,
        },
        OracleKind::ToyMlp => OracleSpec::ToyMlp {
            seed: oracle_seed,
            hidden: 32,
            budget: None,
        },
        OracleKind::Remote => return Err(Error::Config("fixtures need a toy oracle".into()).into()),
    };
    let spec = FixtureSpec {
        count: a.count,
        width: a.size,
        height: a.size,
        channels: a.channels,
        seed,
        gt_offset: a.gt_offset,
        ..Default::default()
    };
    write_fixtures(&a.out, &oracle, &CodecSpec::default(), &spec)?;
    say!("{} fixtures -> {}", a.count, a.out.join("experiment.json").display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Attack(a) => attack(a),
        Command::Sensitivity(a) => sensitivity(a),
        Command::Serve(a) => serve(a),
        Command::PlotData(a) => plot_data(a),
        Command::MakeFixtures(a) => make_fixtures(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
