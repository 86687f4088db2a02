//! Runs the full comparison on the medium presets and prints the markdown
//! report: per-k metric tables, Welfare@k over k and Welfare@1 across
//! environments.
//!
//! ```text
//! cargo run --release --example welfare_tables -- [n_seeds] [preset,preset,...]
//! ```

use rumrec::experiment::{EnvSelection, ExperimentConfig, Preset};
use rumrec::{experiment::markdown_report, run_experiment};

fn main() -> rumrec::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let n_seeds = args.next().map_or(Ok(3), |s| s.parse()).expect("n_seeds");
    let presets = args
        .next()
        .unwrap_or_else(|| "medium1,medium2".into())
        .split(',')
        .map(str::parse::<Preset>)
        .collect::<rumrec::Result<Vec<_>>>()?;

    let cfg = ExperimentConfig {
        env: EnvSelection::presets(&presets),
        ks: vec![1, 5, 10],
        n_seeds,
        ..ExperimentConfig::default()
    };
    let start = std::time::Instant::now();
    let out = run_experiment(&cfg)?;
    println!("{}", markdown_report(&out));
    for env in &out.envs {
        for fit in &env.fits {
            println!(
                "{} seed {} {}: nll {:.4} -> {:.4}, median kappa {:.3}",
                env.name, fit.seed, fit.family, fit.initial_nll, fit.final_nll, fit.median_kappa
            );
        }
    }
    eprintln!("elapsed {:.1?}", start.elapsed());
    Ok(())
}
