//! Command-line driver: `simulate`, `train`, `evaluate` and `experiment`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rumrec::experiment::{EnvSelection, EnvSpec, ExperimentConfig, Preset};
use rumrec::metrics::{compute_metrics, MetricReport};
use rumrec::slate::{build_slates, SlateSources};
use rumrec::{io, train, EnvConfig, Family, Method, Objective, Result, TrainConfig};

#[derive(Parser)]
#[command(
    name = "rumrec",
    version,
    about = "Welfare-aware recommendation workbench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON config file for the subcommand.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Environment preset: medium1, medium2 or hard.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a world and its event log (world.json, events.csv).
    Simulate(Common),
    /// Fit one model family (checkpoint.json, loss.csv).
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        world: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long, default_value = "rum-mf")]
        family: String,
    },
    /// Score oracles, BestOf and checkpoints on a world (metrics.csv, slates.csv).
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        world: PathBuf,
        /// Event log for the BestOf baseline.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Model checkpoint; may be repeated.
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        k: Vec<usize>,
    },
    /// Simulate, fit, rank and score end to end (metrics.csv, runs.csv, report.md).
    Experiment {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            ExitCode::FAILURE
        }
    }
}

fn load_or_default<T: Default + for<'de> serde::Deserialize<'de>>(
    path: &Option<PathBuf>,
) -> Result<T> {
    path.as_deref()
        .map_or_else(|| Ok(T::default()), io::read_json)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(c) => simulate(&c),
        Command::Train {
            common,
            world,
            events,
            family,
        } => train_cmd(&common, &world, &events, family.parse()?),
        Command::Evaluate {
            common,
            world,
            events,
            checkpoint,
            k,
        } => evaluate(&common, &world, events.as_deref(), &checkpoint, &k),
        Command::Experiment { common, k } => experiment(&common, k),
    }
}

fn simulate(c: &Common) -> Result<()> {
    let mut env: EnvConfig = match (&c.preset, &c.config) {
        (Some(name), _) => name.parse::<Preset>()?.env(0),
        (None, cfg) => load_or_default(cfg)?,
    };
    if let Some(seed) = c.seed {
        env.seed = seed;
    }
    let world = rumrec::generate_world(&env)?;
    let events = rumrec::simulate_sessions(&world);
    io::write_world(&c.out.join("world.json"), &world)?;
    io::write_events(&c.out.join("events.csv"), &events)?;
    log::info!("wrote {} events to {}", events.len(), c.out.display());
    Ok(())
}

fn train_cmd(c: &Common, world: &Path, events: &Path, family: Family) -> Result<()> {
    let world = io::read_world(world)?;
    let events = io::read_events(events)?;
    let mut cfg: TrainConfig = load_or_default(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    let result = train::fit(&events, &world.prices, world.nb_users(), family, &cfg)?;
    log::info!(
        "{family}: mean NLL {:.4} -> {:.4}",
        result.initial_nll,
        result.final_nll
    );
    io::write_checkpoint(&c.out.join("checkpoint.json"), &result.params)?;
    io::write_loss_trace(&c.out.join("loss.csv"), &result.trace)
}

fn evaluate(
    c: &Common,
    world: &Path,
    events: Option<&Path>,
    checkpoints: &[PathBuf],
    ks: &[usize],
) -> Result<()> {
    let world = io::read_world(world)?;
    let events = events.map(io::read_events).transpose()?.unwrap_or_default();
    let models = checkpoints
        .iter()
        .map(|p| io::read_checkpoint(p))
        .collect::<Result<Vec<_>>>()?;
    let mut methods = vec![Method::OracleWelfare, Method::OracleUtility];
    if !events.is_empty() {
        methods.push(Method::BestOf);
    }
    methods.extend(models.iter().map(|m| Method::from_family(m.family)));

    let k_max = ks.iter().copied().max().unwrap_or(1);
    let sources = SlateSources {
        world: &world,
        events: &events,
        models: &models,
    };
    let mut reports = Vec::new();
    let mut dump = Vec::new();
    for method in methods {
        for &objective in method.objectives() {
            let slates = build_slates(sources, method, objective, k_max)?;
            for &k in ks {
                let cut: Vec<_> = slates.iter().map(|s| s.truncated(k)).collect();
                let run = compute_metrics(&world, &cut)?;
                reports.push(MetricReport::from_runs(method, objective, k, &[run]));
            }
            dump.extend(slates);
        }
    }
    io::write_metrics(&c.out.join("metrics.csv"), &reports)?;
    io::write_slates(&c.out.join("slates.csv"), &dump)?;
    log::info!("wrote {} metric rows to {}", reports.len(), c.out.display());
    Ok(())
}

fn experiment(c: &Common, ks: Option<Vec<usize>>) -> Result<()> {
    let mut cfg: ExperimentConfig = load_or_default(&c.config)?;
    if let Some(name) = &c.preset {
        let presets = name
            .split(',')
            .map(str::parse::<Preset>)
            .collect::<Result<Vec<_>>>()?;
        cfg.env = if presets.len() == 1 {
            EnvSelection::One(EnvSpec::Preset(presets[0].name().into()))
        } else {
            EnvSelection::presets(&presets)
        };
    }
    if let Some(seed) = c.seed {
        cfg.base_seed = seed;
    }
    if let Some(ks) = ks {
        cfg.ks = ks;
    }
    cfg.output_dir = Some(c.out.clone());
    let out = rumrec::run_experiment(&cfg)?;
    for env in &out.envs {
        for method in [Method::RumMf, Method::MfSm, Method::MfPclick] {
            if let Some(r) = env.report(method, Objective::Welfare, out.ks[0]) {
                log::info!(
                    "{} {method} welfare Welfare@{} = {:.2}",
                    env.name,
                    r.k,
                    r.welfare
                );
            }
        }
    }
    log::info!("wrote report to {}", c.out.join("report.md").display());
    Ok(())
}
