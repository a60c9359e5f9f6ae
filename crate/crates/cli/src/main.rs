use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ptq_cli::commands::{self, Preset, SimulateArgs};
use ptq_cli::config::{parse_pairs, Metric, RunConfig};
use ptq_cli::CliError;

#[derive(Parser)]
#[command(
    name = "ptq",
    version,
    about = "Problem-token impact analysis for call-quality surveys"
)]
struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Repeat for more log output on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic survey with planted ground truth.
    Simulate {
        /// Generator spec (JSON).
        #[arg(long, conflicts_with = "preset")]
        spec: Option<PathBuf>,
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo draws for the ground-truth reductions.
        #[arg(long)]
        truth_mc: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Token response rates, information gain and Jaccard similarity.
    Describe(Opts),
    /// Univariate token impact on poor call rate and call duration.
    Timu(Opts),
    /// Multivariate analysis: problem groups and their impact.
    #[command(subcommand)]
    Timm(Timm),
    /// Run describe, timu and timm into one directory.
    Report(Opts),
}

#[derive(Subcommand)]
enum Timm {
    /// Tetrachoric matrix, factor count, rotated loadings and grouping.
    Factors(Opts),
    /// Logistic model on problem groups and counterfactual reductions.
    Impact {
        #[command(flatten)]
        opts: Opts,
        /// Reuse a grouping.json instead of rerunning the factor stage.
        #[arg(long)]
        grouping: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct Opts {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    metric: Option<Metric>,
    #[arg(long)]
    fix_value_pcr: Option<f64>,
    #[arg(long)]
    fix_value_acd: Option<f64>,
    /// Use var + var_fix - 2 cov for the TIMU interval.
    #[arg(long)]
    strict_delta: bool,
    /// Also report information gain on a poor/good balanced resample.
    #[arg(long)]
    balanced: bool,
    #[arg(long)]
    min_positives: Option<usize>,
    #[arg(long)]
    pa_reps: Option<usize>,
    #[arg(long)]
    pa_quantile: Option<f64>,
    #[arg(long)]
    loading_threshold: Option<f64>,
    /// Skip parallel analysis and extract this many factors.
    #[arg(long)]
    n_factors: Option<usize>,
    /// Interaction pairs by group number, e.g. `1:2,1:4`.
    #[arg(long)]
    interactions: Option<String>,
    /// Select up to this many interaction pairs by AIC.
    #[arg(long)]
    select_interactions: Option<usize>,
    /// Bootstrap resamples for the impact intervals (0 disables).
    #[arg(long)]
    bootstrap: Option<usize>,
    /// Refit the model on every bootstrap resample.
    #[arg(long)]
    bootstrap_refit: bool,
}

impl Opts {
    fn resolve(&self, threads: Option<usize>, verbosity: u8) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let flags = RunConfig {
            input: self.input.clone(),
            out: self.out.clone(),
            seed: self.seed,
            metric: self.metric,
            fix_value_pcr: self.fix_value_pcr,
            fix_value_acd: self.fix_value_acd,
            strict_delta: self.strict_delta,
            balanced: self.balanced,
            min_positives: self.min_positives,
            pa_reps: self.pa_reps,
            pa_quantile: self.pa_quantile,
            loading_threshold: self.loading_threshold,
            n_factors: self.n_factors,
            interactions: self
                .interactions
                .as_deref()
                .map(parse_pairs)
                .transpose()
                .map_err(CliError::Validation)?,
            select_interactions: self.select_interactions,
            bootstrap: self.bootstrap,
            bootstrap_refit: self.bootstrap_refit,
            threads,
            verbosity,
        };
        let cfg = base.merge(flags);
        cfg.validate()?;
        Ok(cfg)
    }
}

fn init_logging(verbosity: u8) {
    let level = match verbosity {
        0 => tracing::Level::WARN,
        1 => tracing::Level::INFO,
        2 => tracing::Level::DEBUG,
        _ => tracing::Level::TRACE,
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_max_level(level)
        .with_target(false)
        .init();
}

fn run(cli: Cli) -> Result<(), CliError> {
    let opts = match &cli.command {
        Command::Describe(o) | Command::Timu(o) | Command::Report(o) | Command::Timm(Timm::Factors(o)) => Some(o),
        Command::Timm(Timm::Impact { opts, .. }) => Some(opts),
        Command::Simulate { .. } => None,
    };
    // the flag wins over the config file
    let from_file = match opts.and_then(|o| o.config.as_deref()) {
        Some(path) => RunConfig::load(path)?.threads,
        None => None,
    };
    let threads = cli.threads.or(from_file);
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::Validation("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(e.to_string()))?;
    }
    let v = cli.verbose;
    match cli.command {
        Command::Simulate {
            spec,
            preset,
            n,
            seed,
            truth_mc,
            out,
            truth,
        } => commands::simulate(&SimulateArgs {
            spec,
            preset,
            n,
            seed,
            truth_mc,
            out,
            truth,
        }),
        Command::Describe(o) => commands::describe(&o.resolve(threads, v)?),
        Command::Timu(o) => commands::timu_cmd(&o.resolve(threads, v)?),
        Command::Timm(Timm::Factors(o)) => commands::timm_factors(&o.resolve(threads, v)?),
        Command::Timm(Timm::Impact { opts, grouping }) => {
            commands::timm_impact(&opts.resolve(threads, v)?, grouping.as_deref())
        }
        Command::Report(o) => commands::report(&o.resolve(threads, v)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
