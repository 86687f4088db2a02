//! Compares simulated Gumbel-noise choices with the softmax probabilities a
//! RUM-MF model assigns to the same decision set.
//!
//! ```text
//! cargo run --release --example choice_model
//! ```

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rumrec::sim::sample_choice;
use rumrec::{Choice, Family, Matrix, ModelParams};

fn main() -> rumrec::Result<()> {
    // One shopper, three items. Unit price sensitivity makes the model
    // scores equal to the shopper's surplus.
    let params = ModelParams {
        family: Family::RumMf,
        x: Matrix::from_rows(vec![vec![1.0, 2.0]]).expect("rows"),
        y: Matrix::from_rows(vec![vec![2.0, 0.5], vec![0.5, 1.5], vec![1.0, 1.0]]).expect("rows"),
        rho: vec![0.0],
    };
    let prices = [2.5, 2.0, 3.5];
    let decision_set = [
        Choice::Item(0),
        Choice::Item(1),
        Choice::Item(2),
        Choice::NoBuy,
    ];
    let probs = params.choice_probs(0, &decision_set, &prices)?;

    let surplus: Vec<f64> = (0..3).map(|j| params.affinity(0, j) - prices[j]).collect();
    let draws = 200_000;
    let mut counts = [0usize; 4];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..draws {
        counts[sample_choice(&surplus, 1.0, &mut rng).unwrap_or(3)] += 1;
    }

    println!(
        "{:>8} {:>8} {:>10} {:>10}",
        "option", "surplus", "softmax", "simulated"
    );
    for (i, choice) in decision_set.iter().enumerate() {
        let s = surplus.get(i).copied().unwrap_or(0.0);
        println!(
            "{:>8} {s:>8.2} {:>10.4} {:>10.4}",
            choice.to_string(),
            probs[i],
            counts[i] as f64 / draws as f64
        );
    }
    // The odds of two options depend only on their surplus difference.
    println!(
        "log-odds item0/item1: model {:.3}, surplus gap {:.3}",
        (probs[0] / probs[1]).ln(),
        surplus[0] - surplus[1]
    );
    Ok(())
}
