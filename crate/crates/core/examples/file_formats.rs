//! Writes every on-disk artifact for a tiny world (world, events, checkpoint,
//! loss trace, slates, metrics), reads the inputs back and prints the CSV
//! headers.
//!
//! ```text
//! cargo run --example file_formats -- [out_dir]
//! ```

use std::path::PathBuf;

use rumrec::metrics::MetricReport;
use rumrec::slate::{build_slates, SlateSources};
use rumrec::{
    compute_metrics, fit, generate_world, io, simulate_sessions, EnvConfig, Family, Method,
    Objective, TrainConfig,
};

fn main() -> rumrec::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "out/formats".into()),
    );
    let env = EnvConfig {
        nb_users: 8,
        nb_prods: 6,
        nb_sessions: 5,
        nb_items_session: 3,
        dimension: 2,
        ..EnvConfig::default()
    };
    let world = generate_world(&env)?;
    let events = simulate_sessions(&world);
    let cfg = TrainConfig {
        epochs: 10,
        dimension: 2,
        ..TrainConfig::default()
    };
    let trained = fit(
        &events,
        &world.prices,
        world.nb_users(),
        Family::RumMf,
        &cfg,
    )?;

    io::write_world(&out.join("world.json"), &world)?;
    io::write_events(&out.join("events.csv"), &events)?;
    io::write_checkpoint(&out.join("checkpoint.json"), &trained.params)?;
    io::write_loss_trace(&out.join("loss.csv"), &trained.trace)?;

    assert_eq!(io::read_world(&out.join("world.json"))?, world);
    assert_eq!(io::read_events(&out.join("events.csv"))?, events);
    let params = io::read_checkpoint(&out.join("checkpoint.json"))?;
    assert_eq!(params, trained.params);

    let models = [params];
    let sources = SlateSources {
        world: &world,
        events: &events,
        models: &models,
    };
    let slates = build_slates(sources, Method::RumMf, Objective::Welfare, 2)?;
    let run = compute_metrics(&world, &slates)?;
    io::write_slates(&out.join("slates.csv"), &slates)?;
    io::write_metrics(
        &out.join("metrics.csv"),
        &[MetricReport::from_runs(
            Method::RumMf,
            Objective::Welfare,
            2,
            &[run],
        )],
    )?;

    for name in ["events.csv", "loss.csv", "slates.csv", "metrics.csv"] {
        let text = std::fs::read_to_string(out.join(name)).expect("written above");
        println!("{name}: {}", text.lines().next().unwrap_or_default());
    }
    println!("wrote {}", out.display());
    Ok(())
}
