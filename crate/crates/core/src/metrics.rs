//! Welfare@k, Utility@k, Revenue@k, Sales@k and Precision@k.
//!
//! Users are evaluated noise-free: shown a slate, a user takes the item with
//! the largest true utility, or leaves when no item has positive utility.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{Choice, LatentWorld};
use crate::slate::{Method, Objective, SlateSpec};

/// What the user does when shown a slate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub choice: Choice,
    pub utility: f64,
    pub price: f64,
}

/// Noise-free choice among `items` plus no-buy. Ties go to no-buy, then to
/// the lowest item id.
pub fn eval_choice(world: &LatentWorld, user: usize, items: &[usize]) -> Result<Outcome> {
    let mut best = Outcome {
        choice: Choice::NoBuy,
        utility: 0.0,
        price: 0.0,
    };
    world.true_utility(user, Choice::NoBuy)?;
    for &j in items {
        let u = world.true_utility(user, Choice::Item(j))?;
        let better = match best.choice {
            Choice::NoBuy => u > best.utility,
            Choice::Item(b) => u > best.utility || (u == best.utility && j < b),
        };
        if better {
            best = Outcome {
                choice: Choice::Item(j),
                utility: u,
                price: world.prices[j],
            };
        }
    }
    Ok(best)
}

/// The user's best catalog item and its utility, ties by lowest id.
pub fn best_catalog_item(world: &LatentWorld, user: usize) -> (usize, f64) {
    let mut best = (0, world.utility(user, 0));
    for j in 1..world.nb_prods() {
        let u = world.utility(user, j);
        if u > best.1 {
            best = (j, u);
        }
    }
    best
}

/// The five metrics of a single run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub welfare: f64,
    pub utility: f64,
    pub revenue: f64,
    pub sales: f64,
    pub precision: f64,
    /// Users with no positive-utility item in the whole catalog.
    pub n_nobuy_users: usize,
}

/// Scores one slate per user against the world.
///
/// A user is a precision hit when their best catalog item is in the slate,
/// or, if no catalog item has positive utility, when they leave the slate
/// empty-handed.
pub fn compute_metrics(world: &LatentWorld, slates: &[SlateSpec]) -> Result<RunMetrics> {
    let n = world.nb_users();
    let mut by_user: Vec<Option<&SlateSpec>> = vec![None; n];
    for s in slates {
        if s.user >= n {
            return Err(Error::UnknownUser(s.user));
        }
        by_user[s.user] = Some(s);
    }
    let (mut utility, mut revenue, mut welfare) = (0.0, 0.0, 0.0);
    let (mut sales, mut hits, mut nobuy_users) = (0usize, 0usize, 0usize);
    for (user, slate) in by_user.iter().enumerate() {
        let slate = slate.ok_or(Error::MissingSlate(user))?;
        let outcome = eval_choice(world, user, &slate.items)?;
        utility += outcome.utility;
        revenue += outcome.price;
        welfare += outcome.utility + outcome.price;
        if outcome.utility > 0.0 {
            sales += 1;
        }
        let (best, best_u) = best_catalog_item(world, user);
        let hit = if best_u > 0.0 {
            slate.items.contains(&best)
        } else {
            nobuy_users += 1;
            outcome.choice == Choice::NoBuy
        };
        if hit {
            hits += 1;
        }
    }
    let n = n as f64;
    Ok(RunMetrics {
        welfare: welfare / n,
        utility: utility / n,
        revenue: revenue / n,
        sales: sales as f64 / n,
        precision: hits as f64 / n,
        n_nobuy_users: nobuy_users,
    })
}

/// Mean and standard deviation of the metrics of one method/objective/k
/// over independent runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: Method,
    pub objective: Objective,
    pub k: usize,
    pub welfare: f64,
    pub utility: f64,
    pub revenue: f64,
    pub sales: f64,
    pub precision: f64,
    pub std_welfare: f64,
    pub std_utility: f64,
    pub std_revenue: f64,
    pub std_sales: f64,
    pub std_precision: f64,
    pub n_runs: usize,
    pub n_nobuy_users: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl MetricReport {
    pub fn from_runs(method: Method, objective: Objective, k: usize, runs: &[RunMetrics]) -> Self {
        let stat = |f: fn(&RunMetrics) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
        let (welfare, std_welfare) = stat(|r| r.welfare);
        let (utility, std_utility) = stat(|r| r.utility);
        let (revenue, std_revenue) = stat(|r| r.revenue);
        let (sales, std_sales) = stat(|r| r.sales);
        let (precision, std_precision) = stat(|r| r.precision);
        let (n_nobuy_users, _) = stat(|r| r.n_nobuy_users as f64);
        MetricReport {
            method,
            objective,
            k,
            welfare,
            utility,
            revenue,
            sales,
            precision,
            std_welfare,
            std_utility,
            std_revenue,
            std_sales,
            std_precision,
            n_runs: runs.len(),
            n_nobuy_users,
        }
    }
}
