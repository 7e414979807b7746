//! `ecogame`: command-line access to simulation, model training, evaluation,
//! explanation and generative modelling of occupant energy-game data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ecogame::features::FeatureMode;
use ecogame::pipeline::{self, PipelineOptions, RunConfig};

#[derive(Parser, Debug)]
#[command(
    name = "ecogame",
    version,
    about = "Occupant energy social-game analytics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a cohort and write its minute table with ground-truth AUCs.
    Simulate(RunArgs),
    /// Validate an input table and write it back in canonical form.
    Ingest(RunArgs),
    /// Per-resource baselines and a before/after usage t-test.
    Baseline(RunArgs),
    /// Export pooled, selected and standardized feature matrices.
    Features(RunArgs),
    /// Fit every configured learner and save the models.
    Train(RunArgs),
    /// Fit, score the held-out period and write the AUC tables.
    Evaluate(RunArgs),
    /// Dependence graphs and Granger tests for representative players.
    Explain(RunArgs),
    /// Fit the variational generator and compare its samples by DTW.
    Generate(RunArgs),
    /// Collect the tables of a run directory into a markdown report.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML run configuration; the built-in demo cohort when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Global seed; takes precedence over the environment and the config.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Restrict the feature regime.
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Run directory to summarize.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ModeArg {
    StepAhead,
    SensorFree,
}

impl From<ModeArg> for FeatureMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::StepAhead => FeatureMode::StepAhead,
            ModeArg::SensorFree => FeatureMode::SensorFree,
        }
    }
}

fn resolve(args: &RunArgs) -> ecogame::Result<(RunConfig, PathBuf)> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::demo(),
    };
    cfg.apply_env()?;
    cfg.apply_overrides(None, args.seed);
    if let Some(mode) = args.mode {
        cfg.experiment.modes = vec![mode.into()];
        cfg.explain.mode = mode.into();
    }
    let out = match (&args.out, &cfg.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => o.clone(),
        (None, None) => Path::new("runs").join(cfg.hash()?),
    };
    cfg.output_dir = Some(out.clone());
    Ok((cfg, out))
}

type Stage = fn(&RunConfig, &Path) -> ecogame::Result<()>;

fn run(command: Command) -> ecogame::Result<()> {
    let (args, stage): (RunArgs, Stage) = match command {
        Command::Report(r) => {
            pipeline::report(&r.out)?;
            println!("wrote {}", r.out.join("report.md").display());
            return Ok(());
        }
        Command::Simulate(a) => (a, |c, o| pipeline::simulate(c, o).map(drop)),
        Command::Ingest(a) => (a, |c, o| pipeline::ingest(c, o).map(drop)),
        Command::Baseline(a) => (a, |c, o| pipeline::baseline(c, o).map(drop)),
        Command::Features(a) => (a, pipeline::features),
        Command::Train(a) => (a, |c, o| {
            let options = PipelineOptions {
                evaluate: false,
                save_models: true,
            };
            pipeline::run_pipeline(c, o, options).map(drop)
        }),
        Command::Evaluate(a) => (a, |c, o| {
            pipeline::run_pipeline(c, o, PipelineOptions::default()).map(drop)
        }),
        Command::Explain(a) => (a, |c, o| pipeline::explain(c, o).map(drop)),
        Command::Generate(a) => (a, |c, o| pipeline::generate(c, o).map(drop)),
    };
    let (cfg, out) = resolve(&args)?;
    stage(&cfg, &out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests print to stdout and succeed; usage
            // errors print the usage text and exit with status 2.
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    std::panic::set_hook(Box::new(|info| {
        eprintln!("ecogame: internal error: {info}")
    }));
    match std::panic::catch_unwind(|| run(cli.command)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("ecogame: error: {e}");
            ExitCode::from(1)
        }
        Err(_) => ExitCode::from(1),
    }
}
