use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polarscope::config::{parse_clip, AggregationMode, AlignmentMode, Preset, RunConfig, ScalingMode};
use polarscope::pipeline::{run_pipeline_with, Stage};
use polarscope::report::RunReport;
use polarscope::synth::{generate_to_dir, ScenarioSpec};
use polarscope::Error;

/// Polarization dynamics in retweet event streams.
#[derive(Parser)]
#[command(name = "polarscope", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse, filter and index the event file.
    Ingest(RunArgs),
    /// Per-window decompositions and the sample-space embedding.
    Embed(RunArgs),
    /// Density clustering of user vectors.
    Cluster(RunArgs),
    /// Dissimilarity and toxicity series per cluster pair.
    Series(RunArgs),
    /// Granger scans, Mann-Whitney comparisons and hashtag log-odds.
    Stats(RunArgs),
    /// The full pipeline.
    Run(RunArgs),
    /// Generate a synthetic scenario.
    Synth(SynthArgs),
    /// Print the report of a run directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sample-specific defaults, applied before the config file.
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    toxicity: Option<PathBuf>,
    #[arg(long)]
    terms: Option<PathBuf>,
    /// `csv` or `jsonl`.
    #[arg(long)]
    format: Option<String>,
    /// Run directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    malformed_tolerance: Option<f64>,
    #[arg(long)]
    start: Option<String>,
    #[arg(long)]
    end: Option<String>,
    #[arg(long)]
    min_matches: Option<u64>,
    /// Window length in days.
    #[arg(long)]
    windows: Option<u32>,
    #[arg(long)]
    kwin: Option<usize>,
    #[arg(long)]
    ksample: Option<usize>,
    #[arg(long)]
    svd_tol: Option<f64>,
    #[arg(long)]
    svd_max_iterations: Option<usize>,
    #[arg(long, value_enum)]
    alignment: Option<AlignmentMode>,
    #[arg(long, value_enum)]
    scaling: Option<ScalingMode>,
    #[arg(long, value_enum)]
    aggregation: Option<AggregationMode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, allow_negative_numbers = true)]
    tau: Option<f64>,
    #[arg(long)]
    min_cluster_size: Option<usize>,
    #[arg(long)]
    min_samples: Option<usize>,
    #[arg(long)]
    min_retweets: Option<u32>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    detrend_window: Option<usize>,
    /// Add day-of-week regressors to the rolling detrend.
    #[arg(long)]
    day_of_week: bool,
    #[arg(long)]
    max_lag: Option<usize>,
    /// Observation count or `none`.
    #[arg(long, value_parser = parse_clip)]
    clip: Option<Option<usize>>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    log_odds_smoothing: Option<f64>,
    #[arg(long)]
    top_n: Option<usize>,
    /// Suppress progress messages.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario TOML file; defaults apply when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directory or report file.
    #[arg(default_value = "polarscope-run")]
    path: PathBuf,
    /// Print the raw JSON.
    #[arg(long)]
    json: bool,
}

/// Defaults, then the preset, then the file, then flags.
fn build_config(a: &RunArgs) -> polarscope::Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(p) = a.preset {
        cfg.apply_preset(p);
    }
    if let Some(path) = &a.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: toml::Table = toml::from_str(&text).map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        let mut merged: toml::Table = toml::from_str(&cfg.to_toml()).expect("config round-trips");
        merged.extend(file);
        cfg = RunConfig::from_toml(&toml::to_string(&merged).expect("table serialises"))?;
    }
    macro_rules! set {
        ($($field:ident = $arg:expr),* $(,)?) => {
            $(if let Some(v) = $arg.clone() { cfg.$field = v.into(); })*
        };
    }
    set!(
        events = a.events.clone().map(Some),
        toxicity = a.toxicity.clone().map(Some),
        terms = a.terms.clone().map(Some),
        format = a.format.clone().map(Some),
        out_dir = a.out,
        malformed_tolerance = a.malformed_tolerance,
        sample_start = a.start.clone().map(Some),
        sample_end = a.end.clone().map(Some),
        min_matches = a.min_matches,
        window_days = a.windows,
        k_window = a.kwin,
        k_sample = a.ksample,
        svd_tol = a.svd_tol,
        svd_max_iterations = a.svd_max_iterations,
        alignment = a.alignment,
        scaling = a.scaling,
        aggregation = a.aggregation,
        seed = a.seed,
        tau = a.tau,
        min_cluster_size = a.min_cluster_size.map(Some),
        min_samples = a.min_samples,
        min_retweets = a.min_retweets,
        smoothing_sigma = a.sigma,
        detrend_window = a.detrend_window,
        max_lag = a.max_lag,
        clip = a.clip,
        alpha = a.alpha,
        log_odds_smoothing = a.log_odds_smoothing,
        top_n = a.top_n,
    );
    if a.day_of_week {
        cfg.day_of_week = true;
    }
    Ok(cfg)
}

fn run_stage(args: &RunArgs, until: Stage, name: &str) -> Result<(), Error> {
    let cfg = build_config(args)?;
    let (report, result) = run_pipeline_with(&cfg, until, name, args.quiet);
    print!("{}", report.summary());
    result.map(|_| ())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => run_stage(a, Stage::Ingest, "ingest"),
        Command::Embed(a) => run_stage(a, Stage::Embed, "embed"),
        Command::Cluster(a) => run_stage(a, Stage::Cluster, "cluster"),
        Command::Series(a) => run_stage(a, Stage::Series, "series"),
        Command::Stats(a) => run_stage(a, Stage::Stats, "stats"),
        Command::Run(a) => run_stage(a, Stage::Stats, "run"),
        Command::Synth(a) => synth(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn synth(a: &SynthArgs) -> Result<(), Error> {
    let mut spec = match &a.scenario {
        Some(p) => ScenarioSpec::load(p)?,
        None => ScenarioSpec::default(),
    };
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    let truth = generate_to_dir(&spec, &a.out)?;
    println!(
        "wrote {} events, {} scored posts, {} users in {} clusters to {}",
        truth.events,
        truth.posts,
        truth.users.len(),
        truth.clusters,
        a.out.display()
    );
    Ok(())
}

fn report(a: &ReportArgs) -> Result<(), Error> {
    let path = if a.path.is_dir() { a.path.join("report.json") } else { a.path.clone() };
    if a.json {
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        print!("{text}");
    } else {
        print!("{}", RunReport::read(&path)?.summary());
    }
    Ok(())
}
