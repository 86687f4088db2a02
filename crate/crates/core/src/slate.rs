//! Greedy top-k slates ranked by expected value per sale (eVPS).
//!
//! `eVPS = Pr(û > 0) × value`, where `Pr(û > 0)` is the model's probability of
//! buying the item rather than leaving, and the value of a sale depends on the
//! objective: 1 for volume, predicted utility, price, or predicted WTP.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Family, ModelParams};
use crate::sim::{Choice, LatentWorld, SessionEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Number of sales; every sale is worth 1.
    #[serde(rename = "sales", alias = "volume")]
    Volume,
    Utility,
    Revenue,
    Welfare,
}

impl Objective {
    pub const ALL: [Objective; 4] = [
        Objective::Welfare,
        Objective::Utility,
        Objective::Revenue,
        Objective::Volume,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Objective::Volume => "sales",
            Objective::Utility => "utility",
            Objective::Revenue => "revenue",
            Objective::Welfare => "welfare",
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sales" | "volume" => Ok(Objective::Volume),
            "utility" => Ok(Objective::Utility),
            "revenue" => Ok(Objective::Revenue),
            "welfare" => Ok(Objective::Welfare),
            other => Err(Error::Format {
                what: "objective",
                detail: format!("{other:?} (expected sales, utility, revenue or welfare)"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "oracle-utility")]
    OracleUtility,
    #[serde(rename = "oracle-welfare")]
    OracleWelfare,
    #[serde(rename = "bestof")]
    BestOf,
    #[serde(rename = "rum-mf")]
    RumMf,
    #[serde(rename = "mf-sm")]
    MfSm,
    #[serde(rename = "mf-pclick")]
    MfPclick,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::OracleWelfare,
        Method::OracleUtility,
        Method::BestOf,
        Method::RumMf,
        Method::MfSm,
        Method::MfPclick,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::OracleUtility => "oracle-utility",
            Method::OracleWelfare => "oracle-welfare",
            Method::BestOf => "bestof",
            Method::RumMf => "rum-mf",
            Method::MfSm => "mf-sm",
            Method::MfPclick => "mf-pclick",
        }
    }

    /// The trained model family behind a learned method.
    pub fn family(self) -> Option<Family> {
        match self {
            Method::RumMf => Some(Family::RumMf),
            Method::MfSm => Some(Family::MfSm),
            Method::MfPclick => Some(Family::MfPclick),
            _ => None,
        }
    }

    pub fn from_family(family: Family) -> Self {
        match family {
            Family::RumMf => Method::RumMf,
            Family::MfSm => Method::MfSm,
            Family::MfPclick => Method::MfPclick,
        }
    }

    /// Objectives the method can rank by. Oracles and BestOf have exactly one.
    pub fn objectives(self) -> &'static [Objective] {
        match self {
            Method::OracleUtility => &[Objective::Utility],
            Method::OracleWelfare => &[Objective::Welfare],
            Method::BestOf => &[Objective::Volume],
            Method::MfPclick => &[Objective::Revenue, Objective::Volume],
            Method::RumMf | Method::MfSm => &Objective::ALL,
        }
    }

    pub fn supports(self, objective: Objective) -> bool {
        self.objectives().contains(&objective)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Format {
                what: "method",
                detail: format!("{s:?}"),
            })
    }
}

/// A ranked slate shown to one user, with the score each item was ranked by.
#[derive(Debug, Clone, PartialEq)]
pub struct SlateSpec {
    pub user: usize,
    pub k: usize,
    pub items: Vec<usize>,
    pub scores: Vec<f64>,
    pub method: Method,
    pub objective: Objective,
}

impl SlateSpec {
    /// The first `k` items of this slate.
    pub fn truncated(&self, k: usize) -> SlateSpec {
        let n = k.min(self.items.len());
        SlateSpec {
            k,
            items: self.items[..n].to_vec(),
            scores: self.scores[..n].to_vec(),
            ..self.clone()
        }
    }
}

/// Expected value per sale of `item` for `user` under a learned model.
pub fn evps(
    params: &ModelParams,
    user: usize,
    item: usize,
    price: f64,
    objective: Objective,
) -> Result<f64> {
    let unsupported = || Error::UnsupportedObjective {
        method: Method::from_family(params.family),
        objective,
    };
    if !Method::from_family(params.family).supports(objective) {
        return Err(unsupported());
    }
    let prob = params.buy_probability(user, item, price)?;
    let value = match objective {
        Objective::Volume => 1.0,
        Objective::Utility => params.predicted_utility(user, item, price)?,
        Objective::Revenue => price,
        Objective::Welfare => params.predict_wtp(user, item, price)?,
    };
    Ok(prob * value)
}

/// Item ids sorted by score descending, ties by ascending id, cut to `k`.
pub fn greedy_slate(scores: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    let by_score = |a: &usize, b: &usize| scores[*b].total_cmp(&scores[*a]).then(a.cmp(b));
    let k = k.min(order.len());
    if k < order.len() && k > 0 {
        order.select_nth_unstable_by(k - 1, by_score);
        order.truncate(k);
    }
    order.sort_unstable_by(by_score);
    order.truncate(k);
    order
}

/// Sales count per item in the log; no-buy is never counted.
pub fn sales_counts(events: &[SessionEvent], nb_prods: usize) -> Vec<usize> {
    let mut counts = vec![0; nb_prods];
    for e in events {
        if let Choice::Item(j) = e.choice {
            if j < nb_prods {
                counts[j] += 1;
            }
        }
    }
    counts
}

/// The `k` best sellers of the log, ties by ascending id.
pub fn bestof_slate(events: &[SessionEvent], nb_prods: usize, k: usize) -> Vec<usize> {
    let counts: Vec<f64> = sales_counts(events, nb_prods)
        .into_iter()
        .map(|c| c as f64)
        .collect();
    greedy_slate(&counts, k)
}

/// Ground-truth value the oracles rank by: utility or WTP.
pub fn oracle_value(
    world: &LatentWorld,
    user: usize,
    item: usize,
    objective: Objective,
) -> Result<f64> {
    match objective {
        Objective::Utility => world.true_utility(user, Choice::Item(item)),
        Objective::Welfare => {
            world.true_utility(user, Choice::Item(item))?;
            Ok(world.wtp(user, item))
        }
        other => Err(Error::UnsupportedObjective {
            method: Method::OracleUtility,
            objective: other,
        }),
    }
}

/// Best `k` items for `user` by true utility or true WTP.
pub fn oracle_slate(
    world: &LatentWorld,
    user: usize,
    k: usize,
    objective: Objective,
) -> Result<SlateSpec> {
    let method = match objective {
        Objective::Utility => Method::OracleUtility,
        Objective::Welfare => Method::OracleWelfare,
        other => {
            return Err(Error::UnsupportedObjective {
                method: Method::OracleUtility,
                objective: other,
            })
        }
    };
    let scores = (0..world.nb_prods())
        .map(|j| oracle_value(world, user, j, objective))
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(user, k, &scores, method, objective))
}

/// Greedy slate of a learned model. `prices` is indexed by item id.
pub fn model_slate(
    params: &ModelParams,
    prices: &[f64],
    user: usize,
    k: usize,
    objective: Objective,
) -> Result<SlateSpec> {
    let scores = prices
        .iter()
        .enumerate()
        .map(|(j, &p)| evps(params, user, j, p, objective))
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(
        user,
        k,
        &scores,
        Method::from_family(params.family),
        objective,
    ))
}

fn finish(
    user: usize,
    k: usize,
    scores: &[f64],
    method: Method,
    objective: Objective,
) -> SlateSpec {
    let items = greedy_slate(scores, k);
    SlateSpec {
        user,
        k,
        scores: items.iter().map(|&j| scores[j]).collect(),
        items,
        method,
        objective,
    }
}

/// What a slate builder may draw on.
#[derive(Debug, Clone, Copy)]
pub struct SlateSources<'a> {
    pub world: &'a LatentWorld,
    pub events: &'a [SessionEvent],
    pub models: &'a [ModelParams],
}

/// One slate per user for `method` under `objective`.
pub fn build_slates(
    sources: SlateSources<'_>,
    method: Method,
    objective: Objective,
    k: usize,
) -> Result<Vec<SlateSpec>> {
    if !method.supports(objective) {
        return Err(Error::UnsupportedObjective { method, objective });
    }
    let world = sources.world;
    let users = 0..world.nb_users();
    match method {
        Method::OracleUtility | Method::OracleWelfare => users
            .map(|u| oracle_slate(world, u, k, objective))
            .collect(),
        Method::BestOf => {
            let counts: Vec<f64> = sales_counts(sources.events, world.nb_prods())
                .into_iter()
                .map(|c| c as f64)
                .collect();
            let shared = finish(0, k, &counts, method, objective);
            Ok(users
                .map(|user| SlateSpec {
                    user,
                    ..shared.clone()
                })
                .collect())
        }
        Method::RumMf | Method::MfSm | Method::MfPclick => {
            let family = method.family().expect("learned method");
            let params = sources
                .models
                .iter()
                .find(|m| m.family == family)
                .ok_or_else(|| Error::InvalidConfig(format!("no trained {family} model")))?;
            users
                .map(|u| model_slate(params, &world.prices, u, k, objective))
                .collect()
        }
    }
}
