//! Fits RUM-MF, MF-SM and MF-PCLICK to one simulated event log and shows
//! how well each recovers the shoppers' willingness to pay.
//!
//! ```text
//! cargo run --release --example train_models -- [epochs]
//! ```

use rumrec::{fit, generate_world, simulate_sessions, EnvConfig, Family, TrainConfig};

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn main() -> rumrec::Result<()> {
    env_logger::init();
    let epochs = std::env::args()
        .nth(1)
        .map_or(100, |s| s.parse().expect("epochs"));
    let env = EnvConfig {
        nb_users: 200,
        nb_prods: 50,
        nb_sessions: 20,
        nb_items_session: 10,
        dimension: 4,
        latent_variance: 1.0,
        ..EnvConfig::default()
    };
    let world = generate_world(&env)?;
    let events = simulate_sessions(&world);
    let cfg = TrainConfig {
        epochs,
        dimension: env.dimension,
        ..TrainConfig::default()
    };

    let truth: Vec<f64> = (0..world.nb_users())
        .flat_map(|u| (0..world.nb_prods()).map(move |j| (u, j)))
        .map(|(u, j)| world.wtp(u, j))
        .collect();
    for family in Family::ALL {
        let result = fit(&events, &world.prices, world.nb_users(), family, &cfg)?;
        let p = &result.params;
        print!(
            "{family:>9}: mean NLL {:.4} -> {:.4}",
            result.initial_nll, result.final_nll
        );
        if family == Family::MfPclick {
            println!();
            continue;
        }
        let predicted = (0..world.nb_users())
            .flat_map(|u| (0..world.nb_prods()).map(move |j| (u, j)))
            .map(|(u, j)| p.predict_wtp(u, j, world.prices[j]))
            .collect::<rumrec::Result<Vec<_>>>()?;
        println!(", WTP correlation {:.3}", correlation(&predicted, &truth));
        if family == Family::RumMf {
            let mut kappas: Vec<f64> = (0..p.nb_users()).map(|u| p.kappa(u)).collect();
            kappas.sort_by(f64::total_cmp);
            println!(
                "           price sensitivity quartiles {:.2} / {:.2} / {:.2} (truth {})",
                kappas[kappas.len() / 4],
                kappas[kappas.len() / 2],
                kappas[3 * kappas.len() / 4],
                world.kappa_true
            );
        }
    }
    Ok(())
}
