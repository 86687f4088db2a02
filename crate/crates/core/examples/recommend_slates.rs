//! Trains RUM-MF and shows the top-5 slate one shopper gets under each
//! objective, next to what the shopper would really gain from each item.
//!
//! ```text
//! cargo run --release --example recommend_slates -- [user]
//! ```

use rumrec::slate::{model_slate, oracle_slate};
use rumrec::{
    fit, generate_world, simulate_sessions, Choice, EnvConfig, Family, Objective, TrainConfig,
};

fn main() -> rumrec::Result<()> {
    let user = std::env::args()
        .nth(1)
        .map_or(0, |s| s.parse().expect("user"));
    let env = EnvConfig {
        nb_users: 200,
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
        epochs: 80,
        dimension: env.dimension,
        ..TrainConfig::default()
    };
    let model = fit(
        &events,
        &world.prices,
        world.nb_users(),
        Family::RumMf,
        &cfg,
    )?
    .params;

    for objective in Objective::ALL {
        let slate = model_slate(&model, &world.prices, user, 5, objective)?;
        println!("{objective} objective:");
        for (item, evps) in slate.items.iter().zip(&slate.scores) {
            let surplus = world.true_utility(user, Choice::Item(*item))?;
            println!(
                "  item {item:>3}  eVPS {evps:>7.3}  price {:>6.2}  true WTP {:>6.2}  surplus {surplus:>6.2}",
                world.prices[*item],
                world.wtp(user, *item)
            );
        }
    }
    let best = oracle_slate(&world, user, 5, Objective::Welfare)?;
    println!("highest true WTP: {:?}", best.items);
    Ok(())
}
