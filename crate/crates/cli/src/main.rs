mod config;
mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdts_core::covinf::{cov_simultaneous_test, CovNull, CovTestOptions};
use hdts_core::depmeasure::{closed_form_profile_with_nu, ga_condition_check, mc_profile, DependenceProfile};
use hdts_core::experiments::{run_experiment, ExperimentConfig};
use hdts_core::gboot::simultaneous_ci;
use hdts_core::io::{read_panel, write_json, write_matrix, write_panel};
use hdts_core::longrun::{sigma_hat, sigma_tilde, BlockPlan, EstimateKind};
use hdts_core::model::simulate;
use hdts_core::{Error, Result, RngContract};

use config::{load, CliConfig, NullKind};
use manifest::{now_unix, RunManifest};

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

/// Simulation, long-run covariance estimation and simultaneous inference for
/// high-dimensional time series.
#[derive(Debug, Parser)]
#[command(name = "hdts", version)]
struct Cli {
    /// Base seed; overrides `seed` in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file, or output directory for `experiment`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the default configuration (an experiment template under `experiment`) and exit.
    #[arg(long, global = true)]
    print_defaults: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a panel from the `[model]` section; writes CSV or `.bin`.
    Simulate {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Number of observations; overrides `[simulate] n`.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Batched-mean long-run covariance estimate of a panel.
    Estimate {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Panel file (CSV or `.bin`).
        #[arg(long)]
        panel: PathBuf,
        /// Block length (default floor(n^{1/3})).
        #[arg(long = "M")]
        block_len: Option<usize>,
        /// `tilde` (mean-subtracted) or `hat` (known zero mean).
        #[arg(long)]
        kind: Option<String>,
    },
    /// Simultaneous confidence intervals for the mean vector.
    Ci {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Panel file (CSV or `.bin`).
        #[arg(long)]
        panel: PathBuf,
        /// Confidence level; overrides the config.
        #[arg(long)]
        theta: Option<f64>,
        /// Block length (default floor(n^{1/3})).
        #[arg(long = "M")]
        block_len: Option<usize>,
        /// Bootstrap draws.
        #[arg(long = "B")]
        draws: Option<usize>,
    },
    /// Simultaneous test of covariance entries.
    Covtest {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Panel file (CSV or `.bin`).
        #[arg(long)]
        panel: PathBuf,
        /// Confidence level; overrides the config.
        #[arg(long)]
        theta: Option<f64>,
        /// Block length (default floor(n^{1/3})).
        #[arg(long = "M")]
        block_len: Option<usize>,
        /// Bootstrap draws.
        #[arg(long = "B")]
        draws: Option<usize>,
        #[arg(long, value_enum)]
        null: Option<NullKind>,
        /// Null covariance matrix file (CSV or `.bin`); overrides `--null`.
        #[arg(long)]
        null_matrix: Option<PathBuf>,
    },
    /// Run a Monte Carlo experiment described by a TOML file.
    Experiment {
        /// Experiment TOML file.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Evaluate the Gaussian-approximation conditions for a profile or model.
    CheckConditions {
        #[command(flatten)]
        cfg: ConfigArg,
        /// Dependence profile JSON; otherwise the profile is computed from `[model]`.
        #[arg(long)]
        profile: Option<PathBuf>,
        /// Sample size.
        #[arg(long)]
        n: usize,
        /// Dimension.
        #[arg(long)]
        p: usize,
        /// Moment order; overrides `[depmeasure] q`.
        #[arg(long)]
        q: Option<f64>,
        /// Decay exponent; overrides `[depmeasure] alpha`.
        #[arg(long)]
        alpha: Option<f64>,
        /// Sub-exponential index.
        #[arg(long)]
        nu: Option<f64>,
        /// Require the sub-exponential quantities.
        #[arg(long)]
        sub_exponential: bool,
    },
}

struct Ctx {
    seed: Option<u64>,
    threads: Option<usize>,
    out: Option<PathBuf>,
    started: f64,
}

impl Ctx {
    fn out_or(&self, default: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(default))
    }
}

/// Config from `--config`, or the defaults. The digest covers the file bytes,
/// or the serialized defaults when there is no file.
fn cli_config(arg: &ConfigArg) -> Result<(CliConfig, Vec<u8>)> {
    match &arg.config {
        Some(path) => {
            let loaded = load::<CliConfig>(path)?;
            Ok((loaded.value, loaded.bytes))
        }
        None => Ok((CliConfig::default(), config::defaults_toml().into_bytes())),
    }
}

fn sidecar_path(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn finish(manifest: RunManifest, out: &Path) -> Result<()> {
    manifest.write(&sidecar_path(out, ".manifest.json"))
}

fn cmd_simulate(ctx: &Ctx, cfg: &ConfigArg, n: Option<usize>) -> Result<()> {
    let (c, bytes) = cli_config(cfg)?;
    c.model.validate()?;
    let seed = ctx.seed.unwrap_or(c.seed);
    let n = n.unwrap_or(c.simulate.n);
    let panel = simulate(&c.model, n, RngContract::new(seed))?;
    let out = ctx.out_or("panel.csv");
    write_panel(&panel, &out)?;
    let mut m = RunManifest::new("simulate", &bytes, seed, ctx.threads, ctx.started);
    m.add_output(&out)?;
    finish(m, &out)
}

fn parse_kind(s: &str) -> Result<EstimateKind> {
    match s {
        "tilde" => Ok(EstimateKind::Tilde),
        "hat" => Ok(EstimateKind::Hat),
        other => Err(Error::InvalidArgument(format!("estimate kind must be `tilde` or `hat`, got `{other}`"))),
    }
}

fn plan_for(n: usize, block_len: Option<usize>) -> Result<BlockPlan> {
    match block_len {
        Some(m) => BlockPlan::new(n, m),
        None => BlockPlan::default_for(n),
    }
}

fn cmd_estimate(ctx: &Ctx, cfg: &ConfigArg, panel: &Path, block_len: Option<usize>, kind: Option<&str>) -> Result<()> {
    let (c, bytes) = cli_config(cfg)?;
    let kind = match kind {
        Some(k) => parse_kind(k)?,
        None => c.estimate.kind,
    };
    let x = read_panel(panel)?;
    let plan = plan_for(x.n(), block_len.or(c.estimate.block_len))?;
    let est = match kind {
        EstimateKind::Tilde => sigma_tilde(&x, &plan)?,
        EstimateKind::Hat => sigma_hat(&x, &plan)?,
    };
    let out = ctx.out_or("sigma.csv");
    write_matrix(&est.sigma, &out)?;
    let side = sidecar_path(&out, ".json");
    write_json(&est.sidecar(), &side)?;
    let mut m = RunManifest::new("estimate", &bytes, ctx.seed.unwrap_or(c.seed), ctx.threads, ctx.started);
    m.add_output(&out)?;
    m.add_output(&side)?;
    finish(m, &out)
}

fn cmd_ci(ctx: &Ctx, cfg: &ConfigArg, panel: &Path, theta: Option<f64>, block_len: Option<usize>, draws: Option<usize>) -> Result<()> {
    let (c, bytes) = cli_config(cfg)?;
    let seed = ctx.seed.unwrap_or(c.seed);
    let x = read_panel(panel)?;
    let report = simultaneous_ci(
        &x,
        theta.unwrap_or(c.ci.theta),
        block_len.or(c.ci.block_len),
        draws.unwrap_or(c.ci.draws),
        RngContract::new(seed),
    )?;
    let out = ctx.out_or("ci.csv");
    report.write_csv(&out)?;
    let side = sidecar_path(&out, ".json");
    write_json(
        &serde_json::json!({ "sidecar": report.sidecar, "bootstrap": report.quantile.summary() }),
        &side,
    )?;
    let mut m = RunManifest::new("ci", &bytes, seed, ctx.threads, ctx.started);
    m.add_output(&out)?;
    m.add_output(&side)?;
    finish(m, &out)
}

#[allow(clippy::too_many_arguments)]
fn cmd_covtest(
    ctx: &Ctx,
    cfg: &ConfigArg,
    panel: &Path,
    theta: Option<f64>,
    block_len: Option<usize>,
    draws: Option<usize>,
    null: Option<NullKind>,
    null_matrix: Option<&Path>,
) -> Result<()> {
    let (c, bytes) = cli_config(cfg)?;
    let seed = ctx.seed.unwrap_or(c.seed);
    let x = read_panel(panel)?;
    let null = match null_matrix {
        Some(path) => {
            let g = hdts_core::io::read_matrix(path)?;
            CovNull::Matrix {
                gamma: g.rows().into_iter().map(|r| r.to_vec()).collect(),
            }
        }
        None => match null.unwrap_or(c.covtest.null) {
            NullKind::ZeroOffDiagonal => CovNull::ZeroOffDiagonal,
            NullKind::Identity => CovNull::identity(x.p()),
        },
    };
    let opts = CovTestOptions {
        block_len: block_len.or(c.covtest.block_len),
        draws: draws.unwrap_or(c.covtest.draws),
        max_columns: c.covtest.max_columns,
    };
    let report = cov_simultaneous_test(&x, theta.unwrap_or(c.covtest.theta), &null, opts, RngContract::new(seed))?;
    let out = ctx.out_or("covtest.csv");
    report.write_csv(&out)?;
    let side = sidecar_path(&out, ".json");
    write_json(
        &serde_json::json!({
            "theta": report.theta,
            "statistic": report.statistic,
            "threshold": report.threshold,
            "reject": report.reject,
            "M": report.block_len,
            "B": report.draws,
            "clipped_mass": report.clipped_mass,
            "flagged": report.flagged().count(),
        }),
        &side,
    )?;
    let mut m = RunManifest::new("covtest", &bytes, seed, ctx.threads, ctx.started);
    m.add_output(&out)?;
    m.add_output(&side)?;
    finish(m, &out)
}

fn cmd_experiment(ctx: &Ctx, config: Option<&Path>) -> Result<()> {
    let path = config.ok_or_else(|| Error::Missing("experiment needs --config <file>".into()))?;
    let loaded = load::<ExperimentConfig>(path)?;
    let mut cfg = loaded.value;
    if let Some(s) = ctx.seed {
        cfg.seed = s;
    }
    let report = run_experiment(&cfg)?;
    let dir = ctx.out_or("experiment_out");
    let files = report.write_artifacts(&dir)?;
    let timing = report.write_timing(&dir)?;
    let mut m = RunManifest::new("experiment", &loaded.bytes, cfg.seed, ctx.threads, ctx.started);
    for f in files.iter().chain([&timing]) {
        m.add_output(f)?;
    }
    m.write(&dir.join("manifest.json"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_check_conditions(
    ctx: &Ctx,
    cfg: &ConfigArg,
    profile: Option<&Path>,
    n: usize,
    p: usize,
    q: Option<f64>,
    alpha: Option<f64>,
    nu: Option<f64>,
    sub_exponential: bool,
) -> Result<()> {
    let (c, bytes) = cli_config(cfg)?;
    let seed = ctx.seed.unwrap_or(c.seed);
    let nu = nu.or(c.depmeasure.nu);
    let prof: DependenceProfile = match profile {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|_| Error::Missing(format!("profile {} not found", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?
        }
        None => {
            let q = q.unwrap_or(c.depmeasure.q);
            let alpha = alpha.unwrap_or(c.depmeasure.alpha);
            match closed_form_profile_with_nu(&c.model, q, alpha, nu) {
                Err(Error::Unsupported(_)) if !sub_exponential => {
                    mc_profile(&c.model, q, alpha, c.depmeasure.replications, RngContract::new(seed))?
                }
                other => other?,
            }
        }
    };
    let nu = nu.or(prof.nu);
    if sub_exponential && (nu.is_none() || prof.phi_base.is_none() && prof.phi_alpha.is_none()) {
        return Err(Error::Missing(
            "--sub-exponential needs Phi quantities: a profile with nu and Phi, or --nu with a Gaussian model".into(),
        ));
    }
    let report = ga_condition_check(&prof, n, p, if sub_exponential { nu } else { None })?;
    match &ctx.out {
        Some(out) => {
            write_json(&report, out)?;
            let mut m = RunManifest::new("check-conditions", &bytes, seed, ctx.threads, ctx.started);
            m.add_output(out)?;
            finish(m, out)
        }
        None => {
            emit(&format!("{}\n", serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?));
            Ok(())
        }
    }
}

fn experiment_template() -> String {
    let cfg = ExperimentConfig::from_toml(
        r#"
kind = "coverage"
seed = 0
replications = 200

[spec]
family = "iid"
p = 3

[grid]
n = [500]
theta = [0.95]
"#,
    )
    .expect("template parses");
    cfg.to_toml().expect("template serializes")
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidArgument("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    }
    if cli.print_defaults {
        match cli.command {
            Some(Command::Experiment { .. }) => emit(&experiment_template()),
            _ => emit(&config::defaults_toml()),
        }
        return Ok(());
    }
    let ctx = Ctx {
        seed: cli.seed,
        threads: cli.threads,
        out: cli.out,
        started: now_unix(),
    };
    match cli.command {
        None => Err(Error::InvalidArgument("no subcommand given; see `hdts --help`".into())),
        Some(Command::Simulate { cfg, n }) => cmd_simulate(&ctx, &cfg, n),
        Some(Command::Estimate { cfg, panel, block_len, kind }) => {
            cmd_estimate(&ctx, &cfg, &panel, block_len, kind.as_deref())
        }
        Some(Command::Ci { cfg, panel, theta, block_len, draws }) => cmd_ci(&ctx, &cfg, &panel, theta, block_len, draws),
        Some(Command::Covtest { cfg, panel, theta, block_len, draws, null, null_matrix }) => {
            cmd_covtest(&ctx, &cfg, &panel, theta, block_len, draws, null, null_matrix.as_deref())
        }
        Some(Command::Experiment { config }) => cmd_experiment(&ctx, config.as_deref()),
        Some(Command::CheckConditions { cfg, profile, n, p, q, alpha, nu, sub_exponential }) => {
            cmd_check_conditions(&ctx, &cfg, profile.as_deref(), n, p, q, alpha, nu, sub_exponential)
        }
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn error_body(kind: &str, message: &str) -> String {
    serde_json::json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            emit(&e.to_string());
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", error_body("usage", e.to_string().trim()));
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", error_body(e.kind(), &e.to_string()));
            let numerical = e.is_numerical() || matches!(e, Error::DegenerateVariance(_));
            ExitCode::from(if numerical { EXIT_NUMERICAL } else { EXIT_VALIDATION })
        }
    }
}
