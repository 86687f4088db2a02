//! Scores the oracles, the best-seller baseline and the three learned models
//! at several slate sizes on one world.
//!
//! ```text
//! cargo run --release --example score_slates
//! ```

use rumrec::slate::{build_slates, SlateSources};
use rumrec::{
    compute_metrics, fit, generate_world, simulate_sessions, EnvConfig, Family, Method, TrainConfig,
};

fn main() -> rumrec::Result<()> {
    let env = EnvConfig {
        nb_users: 300,
        nb_prods: 60,
        nb_sessions: 20,
        nb_items_session: 10,
        dimension: 4,
        latent_variance: 1.0,
        ..EnvConfig::default()
    };
    let world = generate_world(&env)?;
    let events = simulate_sessions(&world);
    let cfg = TrainConfig {
        epochs: 60,
        dimension: env.dimension,
        ..TrainConfig::default()
    };
    let models = Family::ALL
        .into_iter()
        .map(|f| fit(&events, &world.prices, world.nb_users(), f, &cfg).map(|r| r.params))
        .collect::<rumrec::Result<Vec<_>>>()?;
    let sources = SlateSources {
        world: &world,
        events: &events,
        models: &models,
    };

    println!(
        "{:<15} {:<8} {:>3} {:>8} {:>8} {:>8} {:>6} {:>6}",
        "method", "objective", "k", "welfare", "utility", "revenue", "sales", "prec"
    );
    for k in [1, 5] {
        for method in Method::ALL {
            for &objective in method.objectives() {
                let m = compute_metrics(&world, &build_slates(sources, method, objective, k)?)?;
                println!(
                    "{:<15} {:<8} {k:>3} {:>8.3} {:>8.3} {:>8.3} {:>6.3} {:>6.3}",
                    method.name(),
                    objective.name(),
                    m.welfare,
                    m.utility,
                    m.revenue,
                    m.sales,
                    m.precision
                );
            }
        }
    }
    Ok(())
}
