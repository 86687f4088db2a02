//! Shared test oracles: finite-difference gradients, brute-force metrics.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use rumrec::matrix::Matrix;
use rumrec::train::{event_grad, event_objective, SparseGrad};
use rumrec::{Choice, Family, ModelParams, SessionEvent};

pub const FD_STEP: f64 = 1e-5;

/// A random model, event, price vector and L2 weight.
pub struct GradCase {
    pub params: ModelParams,
    pub event: SessionEvent,
    pub prices: Vec<f64>,
    pub l2: f64,
}

pub fn random_case(family: Family, rng: &mut ChaCha8Rng) -> GradCase {
    let users = rng.random_range(1..4);
    let items = rng.random_range(2..8);
    let d = rng.random_range(1..5);
    let normal = Normal::new(0.0, 0.8).unwrap();
    let params = ModelParams {
        family,
        x: Matrix::from_fn(users, d, |_, _| normal.sample(rng)),
        y: Matrix::from_fn(items, d, |_, _| normal.sample(rng)),
        rho: (0..users).map(|_| 0.5 * normal.sample(rng)).collect(),
    };
    let prices: Vec<f64> = (0..items).map(|_| rng.random_range(0.0..3.0)).collect();
    let n_exposed = rng.random_range(1..=items);
    let exposed = rand::seq::index::sample(rng, items, n_exposed).into_vec();
    let pick = rng.random_range(0..=n_exposed);
    let choice = if pick == n_exposed {
        Choice::NoBuy
    } else {
        Choice::Item(exposed[pick])
    };
    let event = SessionEvent {
        user: rng.random_range(0..users),
        session: 0,
        exposed,
        choice,
    };
    let l2 = if rng.random_bool(0.5) {
        0.0
    } else {
        rng.random_range(0.0..0.5)
    };
    GradCase {
        params,
        event,
        prices,
        l2,
    }
}

fn objective(case: &GradCase, params: &ModelParams) -> f64 {
    event_objective(params, &case.event, &case.prices, case.l2).unwrap()
}

fn central_difference(case: &GradCase, set: impl Fn(&mut ModelParams, f64)) -> f64 {
    let mut plus = case.params.clone();
    set(&mut plus, FD_STEP);
    let mut minus = case.params.clone();
    set(&mut minus, -FD_STEP);
    (objective(case, &plus) - objective(case, &minus)) / (2.0 * FD_STEP)
}

/// `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn lookup_row(rows: &[(usize, Vec<f64>)], r: usize, c: usize) -> f64 {
    rows.iter()
        .find(|(i, _)| *i == r)
        .map_or(0.0, |(_, g)| g[c])
}

/// Largest relative error between the analytic gradient and central
/// differences over every coordinate of the model.
pub fn max_gradient_error(case: &GradCase) -> f64 {
    let grad: SparseGrad = event_grad(&case.params, &case.event, &case.prices, case.l2).unwrap();
    let p = &case.params;
    let d = p.dimension();
    let mut worst = 0.0f64;
    for r in 0..p.nb_users() {
        for c in 0..d {
            let numeric = central_difference(case, |m, h| m.x.row_mut(r)[c] += h);
            worst = worst.max(relative_error(lookup_row(&grad.x, r, c), numeric));
        }
        let numeric = central_difference(case, |m, h| m.rho[r] += h);
        let analytic = grad
            .rho
            .iter()
            .find(|(i, _)| *i == r)
            .map_or(0.0, |(_, g)| *g);
        worst = worst.max(relative_error(analytic, numeric));
    }
    for r in 0..p.nb_prods() {
        for c in 0..d {
            let numeric = central_difference(case, |m, h| m.y.row_mut(r)[c] += h);
            worst = worst.max(relative_error(lookup_row(&grad.y, r, c), numeric));
        }
    }
    worst
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two users, three items. User 0 ties between items 0 and 2 at utility 2;
/// user 1 has no positive-utility item.
pub fn hand_world() -> rumrec::LatentWorld {
    let config = rumrec::EnvConfig {
        nb_users: 2,
        nb_prods: 3,
        nb_sessions: 2,
        nb_items_session: 2,
        dimension: 2,
        ..rumrec::EnvConfig::default()
    };
    rumrec::LatentWorld {
        config,
        user_vecs: Matrix::from_rows(vec![vec![2.0, 1.0], vec![-1.0, 0.25]]).unwrap(),
        item_vecs: Matrix::from_rows(vec![vec![1.0, 1.0], vec![2.0, 0.0], vec![0.0, 3.0]]).unwrap(),
        prices: vec![1.0, 3.5, 1.0],
        kappa_true: 1.0,
    }
}

/// Hand-built models for [`hand_world`], one per family.
pub fn hand_models() -> Vec<ModelParams> {
    let x = Matrix::from_rows(vec![vec![1.0, 0.5], vec![-0.5, 0.2]]).unwrap();
    let y = Matrix::from_rows(vec![vec![1.5, 0.5], vec![2.5, -0.5], vec![0.2, 2.0]]).unwrap();
    Family::ALL
        .into_iter()
        .map(|family| ModelParams {
            family,
            x: x.clone(),
            y: y.clone(),
            rho: vec![-0.3, 0.4],
        })
        .collect()
}

/// A small log for best-seller slates on [`hand_world`].
pub fn hand_events() -> Vec<SessionEvent> {
    let e = |user, exposed: Vec<usize>, choice| SessionEvent {
        user,
        session: 0,
        exposed,
        choice,
    };
    vec![
        e(0, vec![0, 1], Choice::Item(1)),
        e(0, vec![1, 2], Choice::Item(2)),
        e(1, vec![2, 1], Choice::Item(2)),
        e(1, vec![0, 2], Choice::NoBuy),
    ]
}

/// Welfare, utility, revenue, sales and precision of one slate per user,
/// recomputed from first principles: the user takes the highest-utility
/// alternative, no-buy (utility 0) wins ties, then the lowest item id.
pub fn brute_metrics(world: &rumrec::LatentWorld, slates: &[Vec<usize>]) -> [f64; 5] {
    let n = world.nb_users();
    let mut totals = [0.0; 5];
    for (user, slate) in slates.iter().enumerate() {
        let util = |j: usize| world.wtp(user, j) - world.prices[j];
        let top = slate.iter().map(|&j| util(j)).fold(0.0, f64::max);
        let chosen = if top > 0.0 {
            slate.iter().copied().filter(|&j| util(j) == top).min()
        } else {
            None
        };
        let catalog_top = (0..world.nb_prods())
            .map(util)
            .fold(f64::NEG_INFINITY, f64::max);
        let catalog_best = (0..world.nb_prods())
            .find(|&j| util(j) == catalog_top)
            .unwrap();
        if let Some(j) = chosen {
            totals[0] += world.wtp(user, j);
            totals[1] += util(j);
            totals[2] += world.prices[j];
            totals[3] += 1.0;
        }
        let hit = if catalog_top > 0.0 {
            slate.contains(&catalog_best)
        } else {
            chosen.is_none()
        };
        if hit {
            totals[4] += 1.0;
        }
    }
    totals.map(|t| t / n as f64)
}

/// Every ordered slate of `k` distinct items out of `n`.
pub fn all_slates(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for head in all_slates(n, k - 1) {
        for j in 0..n {
            if !head.contains(&j) {
                let mut s = head.clone();
                s.push(j);
                out.push(s);
            }
        }
    }
    out
}

/// Draws `draws` noisy choices over `utilities` plus no-buy at unit noise
/// scale and compares them with the closed-form logit. Returns the largest
/// probability error and the largest log-odds error over all pairs.
/// The no-buy alternative is last.
pub fn choice_frequency_errors(utilities: &[f64], draws: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng(seed);
    let n = utilities.len() + 1;
    let mut counts = vec![0usize; n];
    for _ in 0..draws {
        match rumrec::sim::sample_choice(utilities, 1.0, &mut rng) {
            Some(a) => counts[a] += 1,
            None => counts[n - 1] += 1,
        }
    }
    let scores: Vec<f64> = utilities.iter().copied().chain([0.0]).collect();
    let z: f64 = scores.iter().map(|s| s.exp()).sum();
    let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64).collect();
    let prob_err = scores
        .iter()
        .zip(&freq)
        .map(|(s, f)| (s.exp() / z - f).abs())
        .fold(0.0, f64::max);
    let mut odds_err = 0.0f64;
    for a in 0..n {
        for b in a + 1..n {
            let empirical = (freq[a] / freq[b]).ln();
            odds_err = odds_err.max((empirical - (scores[a] - scores[b])).abs());
        }
    }
    (prob_err, odds_err)
}
