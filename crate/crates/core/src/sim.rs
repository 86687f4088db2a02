//! Synthetic shoppers with known willingness-to-pay.
//!
//! A world draws one mean vector for users and one for items, then samples
//! every user and item embedding around its mean. The ground-truth WTP of user
//! `i` for item `j` is the dot product of their vectors and the utility of a
//! purchase is WTP minus price. Each item is priced at the monopolist optimum
//! against the generated population plus uniform noise. Shoppers see a random
//! subset of the catalog per session and pick the alternative (no-buy
//! included) with the largest Gumbel-perturbed utility.

use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};

/// Offset between the world seed and the session-simulation seed.
pub const SESSION_SEED_OFFSET: u64 = 0x5E55_1000_0000_0001;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub nb_users: usize,
    pub nb_prods: usize,
    /// Sessions per user.
    pub nb_sessions: usize,
    pub nb_items_session: usize,
    pub dimension: usize,
    pub latent_variance: f64,
    pub price_noise_lo: f64,
    pub price_noise_hi: f64,
    pub kappa_true: f64,
    pub seed: u64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            nb_users: 1000,
            nb_prods: 100,
            nb_sessions: 3,
            nb_items_session: 10,
            dimension: 10,
            latent_variance: 3.0,
            price_noise_lo: 0.0,
            price_noise_hi: 5.0,
            kappa_true: 1.0,
            seed: 0,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_owned()));
        if self.dimension == 0 {
            return bad("dimension must be at least 1");
        }
        if self.nb_users == 0 || self.nb_prods == 0 {
            return bad("nb_users and nb_prods must be positive");
        }
        if self.nb_items_session > self.nb_prods {
            return bad("nb_items_session exceeds nb_prods");
        }
        if !(self.latent_variance >= 0.0 && self.latent_variance.is_finite()) {
            return bad("latent_variance must be finite and non-negative");
        }
        if !self.price_noise_lo.is_finite()
            || !self.price_noise_hi.is_finite()
            || self.price_noise_lo > self.price_noise_hi
        {
            return bad("price noise bounds must satisfy lo <= hi");
        }
        if !(self.kappa_true > 0.0 && self.kappa_true.is_finite()) {
            return bad("kappa_true must be positive");
        }
        Ok(())
    }
}

/// An alternative in a decision set: a catalog item or leaving empty-handed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Choice {
    Item(usize),
    NoBuy,
}

impl Choice {
    pub fn item(self) -> Option<usize> {
        match self {
            Choice::Item(j) => Some(j),
            Choice::NoBuy => None,
        }
    }
}

impl fmt::Display for Choice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Choice::Item(j) => write!(f, "{j}"),
            Choice::NoBuy => f.write_str("NOBUY"),
        }
    }
}

impl std::str::FromStr for Choice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "NOBUY" => Ok(Choice::NoBuy),
            other => other.parse().map(Choice::Item).map_err(|_| Error::Format {
                what: "choice",
                detail: format!("{other:?} is neither an item id nor NOBUY"),
            }),
        }
    }
}

/// One shopping session: the items shown and what the shopper did.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionEvent {
    pub user: usize,
    pub session: usize,
    pub exposed: Vec<usize>,
    pub choice: Choice,
}

impl SessionEvent {
    pub fn chose(&self, item: usize) -> bool {
        self.choice == Choice::Item(item)
    }

    /// Checks the event against its own invariants.
    pub fn validate(&self) -> Result<()> {
        let mut seen = self.exposed.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Format {
                what: "session event",
                detail: format!("duplicate exposed item for user {}", self.user),
            });
        }
        match self.choice {
            Choice::Item(j) if !self.exposed.contains(&j) => Err(Error::ChoiceNotExposed),
            _ => Ok(()),
        }
    }
}

/// The simulator's hidden state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentWorld {
    pub config: EnvConfig,
    pub user_vecs: Matrix,
    pub item_vecs: Matrix,
    pub prices: Vec<f64>,
    pub kappa_true: f64,
}

impl LatentWorld {
    pub fn nb_users(&self) -> usize {
        self.user_vecs.rows()
    }

    pub fn nb_prods(&self) -> usize {
        self.item_vecs.rows()
    }

    /// Ground-truth willingness-to-pay of `user` for `item`.
    pub fn wtp(&self, user: usize, item: usize) -> f64 {
        dot(self.user_vecs.row(user), self.item_vecs.row(item))
    }

    /// WTP minus price; the no-buy option is worth exactly zero.
    pub fn true_utility(&self, user: usize, choice: Choice) -> Result<f64> {
        if user >= self.nb_users() {
            return Err(Error::UnknownUser(user));
        }
        match choice {
            Choice::NoBuy => Ok(0.0),
            Choice::Item(j) if j < self.nb_prods() => Ok(self.wtp(user, j) - self.prices[j]),
            Choice::Item(j) => Err(Error::UnknownItem(j)),
        }
    }

    /// Unchecked utility for hot loops over valid ids.
    pub(crate) fn utility(&self, user: usize, item: usize) -> f64 {
        self.wtp(user, item) - self.prices[item]
    }

    /// Checks shapes and price sign after loading from disk.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| {
            Err(Error::Format {
                what: "world",
                detail: msg,
            })
        };
        if self.user_vecs.cols() != self.item_vecs.cols() {
            return bad("user and item dimensions differ".into());
        }
        if self.prices.len() != self.nb_prods() {
            return bad(format!(
                "{} prices for {} items",
                self.prices.len(),
                self.nb_prods()
            ));
        }
        if self.prices.iter().any(|p| p.is_nan() || *p < 0.0) {
            return bad("negative or NaN price".into());
        }
        if self.kappa_true.is_nan() || self.kappa_true <= 0.0 {
            return bad("kappa_true must be positive".into());
        }
        Ok(())
    }
}

/// Generates a world from `config`, seeded by `config.seed`.
pub fn generate_world(config: &EnvConfig) -> Result<LatentWorld> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.dimension;
    let sd = config.latent_variance.sqrt();
    let normal = Normal::new(0.0, sd).expect("finite non-negative std");

    let user_mean: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
    let item_mean: Vec<f64> = (0..d).map(|_| normal.sample(&mut rng)).collect();
    let user_vecs = Matrix::from_fn(config.nb_users, d, |_, c| {
        user_mean[c] + normal.sample(&mut rng)
    });
    let item_vecs = Matrix::from_fn(config.nb_prods, d, |_, c| {
        item_mean[c] + normal.sample(&mut rng)
    });
    let prices = set_prices(
        &user_vecs,
        &item_vecs,
        config.price_noise_lo,
        config.price_noise_hi,
        &mut rng,
    );

    Ok(LatentWorld {
        config: config.clone(),
        user_vecs,
        item_vecs,
        prices,
        kappa_true: config.kappa_true,
    })
}

/// Revenue-maximizing price for every item plus `Uniform(lo, hi)` noise.
pub fn set_prices<R: Rng + ?Sized>(
    user_vecs: &Matrix,
    item_vecs: &Matrix,
    noise_lo: f64,
    noise_hi: f64,
    rng: &mut R,
) -> Vec<f64> {
    let noise = Uniform::new_inclusive(noise_lo, noise_hi).expect("lo <= hi, both finite");
    let mut wtps = Vec::with_capacity(user_vecs.rows());
    (0..item_vecs.rows())
        .map(|j| {
            wtps.clear();
            wtps.extend((0..user_vecs.rows()).map(|i| dot(user_vecs.row(i), item_vecs.row(j))));
            let base = revenue_maximizing_price(&wtps);
            // Noise bounds may be negative; a price never is.
            (base + noise.sample(rng)).max(0.0)
        })
        .collect()
}

/// Monopolist price against a population of WTPs.
///
/// Maximizes `p * #{w >= p}` over the positive WTP values, breaking ties
/// toward the lower price. Returns 0 when no WTP is positive.
pub fn revenue_maximizing_price(wtps: &[f64]) -> f64 {
    let mut sorted: Vec<f64> = wtps.iter().copied().filter(|w| *w > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut best_price = 0.0;
    let mut best_revenue = 0.0;
    for (i, &p) in sorted.iter().enumerate() {
        if i > 0 && sorted[i - 1] == p {
            continue;
        }
        let revenue = p * (n - i) as f64;
        if revenue > best_revenue {
            best_revenue = revenue;
            best_price = p;
        }
    }
    best_price
}

/// Standard Gumbel draw by inverse CDF, with `U` kept inside `(0, 1)`.
pub fn sample_gumbel<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    let u = u.clamp(f64::EPSILON, 1.0 - f64::EPSILON);
    -(-u.ln()).ln()
}

/// Noisy argmax over `utilities` plus a zero-utility no-buy option.
///
/// Returns the index of the winning item, or `None` for no-buy. Noise is drawn
/// for the items in order, then for no-buy.
pub fn sample_choice<R: Rng + ?Sized>(utilities: &[f64], kappa: f64, rng: &mut R) -> Option<usize> {
    let mut best: Option<usize> = None;
    let mut best_value = f64::NEG_INFINITY;
    for (a, u) in utilities.iter().enumerate() {
        let v = u + kappa * sample_gumbel(rng);
        if v > best_value {
            best_value = v;
            best = Some(a);
        }
    }
    let no_buy = kappa * sample_gumbel(rng);
    if no_buy > best_value {
        best = None;
    }
    best
}

/// Simulates the event log, seeded from the world's config.
pub fn simulate_sessions(world: &LatentWorld) -> Vec<SessionEvent> {
    simulate_sessions_seeded(world, world.config.seed.wrapping_add(SESSION_SEED_OFFSET))
}

/// Simulates every user's sessions. User `i` draws from stream `i` of a
/// ChaCha generator keyed by `seed`, so users are independent of each other.
pub fn simulate_sessions_seeded(world: &LatentWorld, seed: u64) -> Vec<SessionEvent> {
    let cfg = &world.config;
    let n_items = cfg.nb_items_session.min(world.nb_prods());
    let mut events = Vec::with_capacity(world.nb_users() * cfg.nb_sessions);
    let mut utilities = Vec::with_capacity(n_items);
    for user in 0..world.nb_users() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(user as u64);
        for session in 0..cfg.nb_sessions {
            let exposed = index::sample(&mut rng, world.nb_prods(), n_items).into_vec();
            utilities.clear();
            utilities.extend(exposed.iter().map(|&j| world.utility(user, j)));
            let choice = match sample_choice(&utilities, world.kappa_true, &mut rng) {
                Some(a) => Choice::Item(exposed[a]),
                None => Choice::NoBuy,
            };
            events.push(SessionEvent {
                user,
                session,
                exposed,
                choice,
            });
        }
    }
    events
}
