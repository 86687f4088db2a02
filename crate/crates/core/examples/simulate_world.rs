//! Generates a preset world, simulates its shopping sessions and writes
//! `world.json` and `events.csv`.
//!
//! ```text
//! cargo run --release --example simulate_world -- [preset] [seed] [out_dir]
//! ```

use std::path::PathBuf;

use rumrec::experiment::Preset;
use rumrec::metrics::best_catalog_item;
use rumrec::{generate_world, io, simulate_sessions, Choice};

fn main() -> rumrec::Result<()> {
    let mut args = std::env::args().skip(1);
    let preset: Preset = args.next().as_deref().unwrap_or("medium2").parse()?;
    let seed = args.next().map_or(0, |s| s.parse().expect("seed"));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/simulated".into()));

    let world = generate_world(&preset.env(seed))?;
    let events = simulate_sessions(&world);

    let sales = events.iter().filter(|e| e.choice != Choice::NoBuy).count();
    let priced_out = (0..world.nb_users())
        .filter(|&u| best_catalog_item(&world, u).1 <= 0.0)
        .count();
    let mean_price = world.prices.iter().sum::<f64>() / world.nb_prods() as f64;
    println!(
        "{}: {} users, {} items, {} sessions",
        preset.name(),
        world.nb_users(),
        world.nb_prods(),
        events.len()
    );
    println!("conversion rate {:.3}", sales as f64 / events.len() as f64);
    println!("mean price {mean_price:.2}");
    println!("users with no positive-utility item: {priced_out}");

    io::write_world(&out.join("world.json"), &world)?;
    io::write_events(&out.join("events.csv"), &events)?;
    println!("wrote {}", out.display());
    Ok(())
}
