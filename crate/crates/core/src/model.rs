//! The three matrix-factorization choice models.
//!
//! * RUM-MF scores an item as `X_u·Y_i − κ_u p_i` with `κ_u = exp(ρ_u)` and
//!   competes it against a zero-score no-buy option in a softmax.
//! * MF-SM is the same softmax without the price term.
//! * MF-PCLICK treats each exposed item as an independent conversion with
//!   probability `σ(X_u·Y_i)`.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::sim::Choice;

/// Learned sensitivities below this are raised to it when reporting WTP.
pub const MIN_SENSITIVITY: f64 = 0.1;

/// Standard deviation of the initial embedding entries (variance 0.01).
pub const INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "rum-mf")]
    RumMf,
    #[serde(rename = "mf-sm")]
    MfSm,
    #[serde(rename = "mf-pclick")]
    MfPclick,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::RumMf, Family::MfSm, Family::MfPclick];

    pub fn name(self) -> &'static str {
        match self {
            Family::RumMf => "rum-mf",
            Family::MfSm => "mf-sm",
            Family::MfPclick => "mf-pclick",
        }
    }

    pub fn is_categorical(self) -> bool {
        !matches!(self, Family::MfPclick)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Format {
                what: "model family",
                detail: format!("{s:?} (expected rum-mf, mf-sm or mf-pclick)"),
            })
    }
}

/// Embeddings plus per-user price-sensitivity pre-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub family: Family,
    /// User embeddings, one row per user.
    pub x: Matrix,
    /// Item embeddings, one row per item.
    pub y: Matrix,
    /// `κ_u = exp(rho[u])`. Only trained for RUM-MF.
    pub rho: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Softmax with the maximum subtracted first.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(scores.len());
    softmax_into(scores, &mut out);
    out
}

pub(crate) fn softmax_into(scores: &[f64], out: &mut Vec<f64>) {
    out.clear();
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.extend(scores.iter().map(|s| (s - max).exp()));
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
}

impl ModelParams {
    /// Embeddings i.i.d. `N(0, INIT_STD²)`, X rows first then Y rows; `ρ = 0`.
    pub fn init(
        family: Family,
        nb_users: usize,
        nb_prods: usize,
        dimension: usize,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let x = Matrix::from_fn(nb_users, dimension, |_, _| normal.sample(&mut rng));
        let y = Matrix::from_fn(nb_prods, dimension, |_, _| normal.sample(&mut rng));
        ModelParams {
            family,
            x,
            y,
            rho: vec![0.0; nb_users],
        }
    }

    pub fn nb_users(&self) -> usize {
        self.x.rows()
    }

    pub fn nb_prods(&self) -> usize {
        self.y.rows()
    }

    pub fn dimension(&self) -> usize {
        self.x.cols()
    }

    pub fn kappa(&self, user: usize) -> f64 {
        self.rho[user].exp()
    }

    pub fn affinity(&self, user: usize, item: usize) -> f64 {
        dot(self.x.row(user), self.y.row(item))
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.rho.iter().all(|r| r.is_finite())
    }

    pub(crate) fn check_ids(&self, user: usize, item: Option<usize>) -> Result<()> {
        if user >= self.nb_users() {
            return Err(Error::UnknownUser(user));
        }
        match item {
            Some(j) if j >= self.nb_prods() => Err(Error::UnknownItem(j)),
            _ => Ok(()),
        }
    }

    /// Softmax score of one alternative; no-buy scores 0.
    pub(crate) fn score(&self, user: usize, choice: Choice, prices: &[f64]) -> f64 {
        match (self.family, choice) {
            (_, Choice::NoBuy) => 0.0,
            (Family::RumMf, Choice::Item(j)) => {
                self.affinity(user, j) - self.kappa(user) * prices[j]
            }
            (_, Choice::Item(j)) => self.affinity(user, j),
        }
    }

    /// Choice distribution over `decision_set`, which must include no-buy.
    /// `prices` is indexed by item id.
    pub fn choice_probs(
        &self,
        user: usize,
        decision_set: &[Choice],
        prices: &[f64],
    ) -> Result<Vec<f64>> {
        if !self.family.is_categorical() {
            return Err(Error::NotCategorical {
                family: self.family,
            });
        }
        if !decision_set.contains(&Choice::NoBuy) {
            return Err(Error::MissingNoBuy);
        }
        self.check_ids(user, None)?;
        for c in decision_set {
            self.check_ids(user, c.item())?;
        }
        let scores: Vec<f64> = decision_set
            .iter()
            .map(|&c| self.score(user, c, prices))
            .collect();
        Ok(softmax(&scores))
    }

    /// Independent conversion probability of MF-PCLICK.
    pub fn pclick_prob(&self, user: usize, item: usize) -> Result<f64> {
        if self.family != Family::MfPclick {
            return Err(Error::WrongFamily {
                expected: Family::MfPclick,
                actual: self.family,
            });
        }
        self.check_ids(user, Some(item))?;
        Ok(sigmoid(self.affinity(user, item)))
    }

    /// Estimated willingness-to-pay in currency units.
    ///
    /// RUM-MF divides the affinity by the user's sensitivity, floored at
    /// [`MIN_SENSITIVITY`]; the price argument is ignored. MF-SM reads its
    /// affinity as a utility and adds the price back.
    pub fn predict_wtp(&self, user: usize, item: usize, price: f64) -> Result<f64> {
        self.check_ids(user, Some(item))?;
        match self.family {
            Family::RumMf => Ok(self.affinity(user, item) / self.kappa(user).max(MIN_SENSITIVITY)),
            Family::MfSm => Ok(self.affinity(user, item) + price),
            Family::MfPclick => Err(Error::NoWtp {
                family: self.family,
            }),
        }
    }

    pub fn predicted_utility(&self, user: usize, item: usize, price: f64) -> Result<f64> {
        if self.family == Family::MfSm {
            self.check_ids(user, Some(item))?;
            return Ok(self.affinity(user, item));
        }
        Ok(self.predict_wtp(user, item, price)? - price)
    }

    /// Probability of buying `item` rather than leaving when the two are the
    /// only alternatives.
    pub fn buy_probability(&self, user: usize, item: usize, price: f64) -> Result<f64> {
        self.check_ids(user, Some(item))?;
        let z = match self.family {
            Family::RumMf => self.affinity(user, item) - self.kappa(user) * price,
            Family::MfSm | Family::MfPclick => self.affinity(user, item),
        };
        Ok(sigmoid(z))
    }
}
