//! Maximum-likelihood fitting of the choice models.
//!
//! RUM-MF and MF-SM minimize the categorical cross-entropy of the observed
//! choice against the exposed items plus no-buy. MF-PCLICK minimizes one
//! Bernoulli cross-entropy per exposed item. Every event adds
//! `λ (‖X_u‖² + Σ ‖Y_i‖²)` over the embedding rows it touches; `ρ` is left
//! unregularized. Gradients are closed-form and applied with a sparse Adam
//! that only advances the moments of touched rows.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::norm_sq;
use crate::model::{softmax_into, Family, ModelParams};
use crate::sim::{Choice, SessionEvent};

const SHUFFLE_SEED_SALT: u64 = 0x0005_4FF1_E000_0000;

/// Relative loss increase between epochs tolerated before warning.
pub const LOSS_INCREASE_TOLERANCE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    pub l2_weight: f64,
    pub epochs: usize,
    /// Events per gradient step.
    pub batch: usize,
    /// Embedding dimension of the learned model.
    pub dimension: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            l2_weight: 1e-4,
            epochs: 200,
            batch: 256,
            dimension: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_owned()));
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return bad("learning_rate must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0) || !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return bad("beta1 and beta2 must lie in (0, 1)");
        }
        if self.eps_adam.is_nan() || self.eps_adam <= 0.0 {
            return bad("eps_adam must be positive");
        }
        if self.l2_weight.is_nan() || self.l2_weight < 0.0 {
            return bad("l2_weight must be non-negative");
        }
        if self.batch == 0 || self.dimension == 0 {
            return bad("batch and dimension must be positive");
        }
        Ok(())
    }
}

/// Gradient restricted to the rows an event (or batch) touched, rows sorted
/// by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseGrad {
    pub x: Vec<(usize, Vec<f64>)>,
    pub y: Vec<(usize, Vec<f64>)>,
    pub rho: Vec<(usize, f64)>,
}

impl SparseGrad {
    fn first_non_finite(&self) -> Option<String> {
        let bad_rows = |name: &str, rows: &[(usize, Vec<f64>)]| {
            rows.iter()
                .find(|(_, g)| g.iter().any(|v| !v.is_finite()))
                .map(|(r, _)| format!("{name} row {r}"))
        };
        bad_rows("X", &self.x)
            .or_else(|| bad_rows("Y", &self.y))
            .or_else(|| {
                self.rho
                    .iter()
                    .find(|(_, g)| !g.is_finite())
                    .map(|(r, _)| format!("rho[{r}]"))
            })
    }
}

/// Dense accumulator that remembers which rows were written.
struct GradBuffer {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
    rho: Vec<f64>,
    x_touched: Vec<bool>,
    y_touched: Vec<bool>,
    x_rows: Vec<usize>,
    y_rows: Vec<usize>,
}

impl GradBuffer {
    fn new(params: &ModelParams) -> Self {
        let dim = params.dimension();
        GradBuffer {
            dim,
            x: vec![0.0; params.nb_users() * dim],
            y: vec![0.0; params.nb_prods() * dim],
            rho: vec![0.0; params.nb_users()],
            x_touched: vec![false; params.nb_users()],
            y_touched: vec![false; params.nb_prods()],
            x_rows: Vec::new(),
            y_rows: Vec::new(),
        }
    }

    fn x_row(&mut self, r: usize) -> &mut [f64] {
        if !self.x_touched[r] {
            self.x_touched[r] = true;
            self.x_rows.push(r);
        }
        &mut self.x[r * self.dim..(r + 1) * self.dim]
    }

    fn y_row(&mut self, r: usize) -> &mut [f64] {
        if !self.y_touched[r] {
            self.y_touched[r] = true;
            self.y_rows.push(r);
        }
        &mut self.y[r * self.dim..(r + 1) * self.dim]
    }

    /// Moves the touched rows out, leaving the buffer zeroed.
    fn drain(&mut self, with_rho: bool) -> SparseGrad {
        self.x_rows.sort_unstable();
        self.y_rows.sort_unstable();
        let dim = self.dim;
        let mut out = SparseGrad::default();
        for &r in &self.x_rows {
            let row = &mut self.x[r * dim..(r + 1) * dim];
            out.x.push((r, row.to_vec()));
            row.fill(0.0);
            self.x_touched[r] = false;
            if with_rho {
                out.rho.push((r, self.rho[r]));
            }
            self.rho[r] = 0.0;
        }
        for &r in &self.y_rows {
            let row = &mut self.y[r * dim..(r + 1) * dim];
            out.y.push((r, row.to_vec()));
            row.fill(0.0);
            self.y_touched[r] = false;
        }
        self.x_rows.clear();
        self.y_rows.clear();
        out
    }
}

fn check_event(params: &ModelParams, event: &SessionEvent, prices: &[f64]) -> Result<()> {
    params.check_ids(event.user, None)?;
    for &j in &event.exposed {
        params.check_ids(event.user, Some(j))?;
        if j >= prices.len() {
            return Err(Error::UnknownItem(j));
        }
    }
    match event.choice {
        Choice::Item(j) if !event.exposed.contains(&j) => Err(Error::ChoiceNotExposed),
        _ => Ok(()),
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Data loss of one event (no regularization).
pub fn event_loss(params: &ModelParams, event: &SessionEvent, prices: &[f64]) -> Result<f64> {
    check_event(params, event, prices)?;
    Ok(loss_unchecked(params, event, prices))
}

fn loss_unchecked(params: &ModelParams, event: &SessionEvent, prices: &[f64]) -> f64 {
    let u = event.user;
    match params.family {
        Family::RumMf | Family::MfSm => {
            let mut max = 0.0f64;
            let mut chosen = 0.0;
            let scores: Vec<f64> = event
                .exposed
                .iter()
                .map(|&j| {
                    let s = params.score(u, Choice::Item(j), prices);
                    max = max.max(s);
                    if event.chose(j) {
                        chosen = s;
                    }
                    s
                })
                .collect();
            let sum: f64 = (-max).exp() + scores.iter().map(|s| (s - max).exp()).sum::<f64>();
            max + sum.ln() - chosen
        }
        Family::MfPclick => event
            .exposed
            .iter()
            .map(|&j| {
                let z = params.affinity(u, j);
                let y = if event.chose(j) { 1.0 } else { 0.0 };
                softplus(z) - y * z
            })
            .sum(),
    }
}

/// `λ (‖X_u‖² + Σ_{i exposed} ‖Y_i‖²)`.
pub fn reg_term(params: &ModelParams, event: &SessionEvent, l2_weight: f64) -> f64 {
    let rows: f64 = norm_sq(params.x.row(event.user))
        + event
            .exposed
            .iter()
            .map(|&j| norm_sq(params.y.row(j)))
            .sum::<f64>();
    l2_weight * rows
}

/// Data loss plus the event's regularization term.
pub fn event_objective(
    params: &ModelParams,
    event: &SessionEvent,
    prices: &[f64],
    l2_weight: f64,
) -> Result<f64> {
    Ok(event_loss(params, event, prices)? + reg_term(params, event, l2_weight))
}

/// Gradient of [`event_objective`] over the rows the event touches.
pub fn event_grad(
    params: &ModelParams,
    event: &SessionEvent,
    prices: &[f64],
    l2_weight: f64,
) -> Result<SparseGrad> {
    check_event(params, event, prices)?;
    let mut buf = GradBuffer::new(params);
    let mut scratch = Scratch::default();
    accumulate(
        params,
        event,
        prices,
        l2_weight,
        1.0,
        &mut buf,
        &mut scratch,
    );
    Ok(buf.drain(params.family == Family::RumMf))
}

#[derive(Default)]
struct Scratch {
    scores: Vec<f64>,
    probs: Vec<f64>,
    residuals: Vec<f64>,
    x_grad: Vec<f64>,
}

/// Adds `scale ×` the event's objective gradient into `buf`; returns the data
/// loss at the current parameters.
fn accumulate(
    params: &ModelParams,
    event: &SessionEvent,
    prices: &[f64],
    l2_weight: f64,
    scale: f64,
    buf: &mut GradBuffer,
    scratch: &mut Scratch,
) -> f64 {
    let u = event.user;
    let xu = params.x.row(u);
    let Scratch {
        scores,
        probs,
        residuals,
        x_grad,
    } = scratch;
    x_grad.clear();
    x_grad.resize(xu.len(), 0.0);
    residuals.clear();

    let loss = match params.family {
        Family::RumMf | Family::MfSm => {
            // Alternatives are the exposed items followed by no-buy.
            scores.clear();
            scores.extend(
                event
                    .exposed
                    .iter()
                    .map(|&j| params.score(u, Choice::Item(j), prices)),
            );
            scores.push(0.0);
            softmax_into(scores, probs);
            let chosen = match event.choice {
                Choice::Item(j) => event.exposed.iter().position(|&e| e == j).unwrap(),
                Choice::NoBuy => event.exposed.len(),
            };
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
            residuals.extend(
                probs
                    .iter()
                    .enumerate()
                    .map(|(a, p)| p - if a == chosen { 1.0 } else { 0.0 }),
            );
            residuals.pop();
            lse - scores[chosen]
        }
        Family::MfPclick => {
            let mut loss = 0.0;
            for &j in &event.exposed {
                let z = params.affinity(u, j);
                let y = if event.chose(j) { 1.0 } else { 0.0 };
                loss += softplus(z) - y * z;
                residuals.push(crate::model::sigmoid(z) - y);
            }
            loss
        }
    };

    let mut rho_grad = 0.0;
    let kappa = if params.family == Family::RumMf {
        params.kappa(u)
    } else {
        0.0
    };
    for (&j, &r) in event.exposed.iter().zip(residuals.iter()) {
        let yj = params.y.row(j);
        for (g, y) in x_grad.iter_mut().zip(yj) {
            *g += r * y;
        }
        let row = buf.y_row(j);
        for ((g, x), y) in row.iter_mut().zip(xu).zip(yj) {
            *g += scale * (r * x + 2.0 * l2_weight * y);
        }
        rho_grad -= r * kappa * prices[j];
    }
    let row = buf.x_row(u);
    for ((g, dx), x) in row.iter_mut().zip(x_grad.iter()).zip(xu) {
        *g += scale * (dx + 2.0 * l2_weight * x);
    }
    buf.rho[u] += scale * rho_grad;
    loss
}

/// Adam moments for every parameter, with per-row step counts used for
/// bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m_x: Vec<f64>,
    pub v_x: Vec<f64>,
    pub m_y: Vec<f64>,
    pub v_y: Vec<f64>,
    pub m_rho: Vec<f64>,
    pub v_rho: Vec<f64>,
    pub steps_x: Vec<u32>,
    pub steps_y: Vec<u32>,
    /// Number of optimizer steps taken.
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        let nx = params.x.as_slice().len();
        let ny = params.y.as_slice().len();
        let nu = params.nb_users();
        AdamState {
            m_x: vec![0.0; nx],
            v_x: vec![0.0; nx],
            m_y: vec![0.0; ny],
            v_y: vec![0.0; ny],
            m_rho: vec![0.0; nu],
            v_rho: vec![0.0; nu],
            steps_x: vec![0; nu],
            steps_y: vec![0; params.nb_prods()],
            t: 0,
        }
    }
}

struct AdamCoeffs {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    bias1: f64,
    bias2: f64,
}

impl AdamCoeffs {
    fn new(cfg: &TrainConfig, step: u32) -> Self {
        AdamCoeffs {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps_adam,
            bias1: 1.0 - cfg.beta1.powi(step as i32),
            bias2: 1.0 - cfg.beta2.powi(step as i32),
        }
    }

    fn update(&self, theta: &mut f64, m: &mut f64, v: &mut f64, g: f64) {
        *m = self.beta1 * *m + (1.0 - self.beta1) * g;
        *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
        let m_hat = *m / self.bias1;
        let v_hat = *v / self.bias2;
        *theta -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
    }
}

/// One sparse Adam step. Only rows present in `grads` move, and only their
/// moments and step counts advance. A non-finite gradient aborts before any
/// parameter is touched.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &SparseGrad,
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if let Some(what) = grads.first_non_finite() {
        return Err(Error::NonFiniteGradient {
            step: state.t + 1,
            what,
        });
    }
    let d = params.dimension();
    for (r, g) in &grads.x {
        state.steps_x[*r] += 1;
        let coeffs = AdamCoeffs::new(cfg, state.steps_x[*r]);
        let span = r * d..(r + 1) * d;
        let theta = params.x.row_mut(*r);
        for (((t, m), v), g) in theta
            .iter_mut()
            .zip(&mut state.m_x[span.clone()])
            .zip(&mut state.v_x[span])
            .zip(g)
        {
            coeffs.update(t, m, v, *g);
        }
    }
    if params.family == Family::RumMf {
        // A user's sensitivity shares the step count of its embedding row.
        for (r, g) in &grads.rho {
            let coeffs = AdamCoeffs::new(cfg, state.steps_x[*r].max(1));
            coeffs.update(
                &mut params.rho[*r],
                &mut state.m_rho[*r],
                &mut state.v_rho[*r],
                *g,
            );
        }
    }
    for (r, g) in &grads.y {
        state.steps_y[*r] += 1;
        let coeffs = AdamCoeffs::new(cfg, state.steps_y[*r]);
        let span = r * d..(r + 1) * d;
        let theta = params.y.row_mut(*r);
        for (((t, m), v), g) in theta
            .iter_mut()
            .zip(&mut state.m_y[span.clone()])
            .zip(&mut state.v_y[span])
            .zip(g)
        {
            coeffs.update(t, m, v, *g);
        }
    }
    state.t += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub mean_nll: f64,
    pub reg_term: f64,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub params: ModelParams,
    /// Mean data loss over the log before the first step.
    pub initial_nll: f64,
    /// Mean data loss after the last step.
    pub final_nll: f64,
    pub trace: Vec<EpochLoss>,
}

/// Mean data loss over `events`.
pub fn mean_nll(params: &ModelParams, events: &[SessionEvent], prices: &[f64]) -> Result<f64> {
    if events.is_empty() {
        return Err(Error::EmptyEvents);
    }
    let mut total = 0.0;
    for e in events {
        total += event_loss(params, e, prices)?;
    }
    Ok(total / events.len() as f64)
}

/// Fits a fresh model of `family` initialized from `cfg.seed`.
pub fn fit(
    events: &[SessionEvent],
    prices: &[f64],
    nb_users: usize,
    family: Family,
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    let params = ModelParams::init(family, nb_users, prices.len(), cfg.dimension, cfg.seed);
    fit_from(params, events, prices, cfg)
}

/// Runs `cfg.epochs` epochs of shuffled minibatch Adam from `params`.
///
/// Each epoch records the mean data loss and mean regularization term seen
/// by the minibatches, evaluated before each batch's update.
pub fn fit_from(
    mut params: ModelParams,
    events: &[SessionEvent],
    prices: &[f64],
    cfg: &TrainConfig,
) -> Result<FitResult> {
    cfg.validate()?;
    if events.is_empty() {
        return Err(Error::EmptyEvents);
    }
    for e in events {
        check_event(&params, e, prices)?;
    }
    let initial_nll = mean_nll(&params, events, prices)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ SHUFFLE_SEED_SALT);
    let mut order: Vec<usize> = (0..events.len()).collect();
    let mut state = AdamState::new(&params);
    let mut buf = GradBuffer::new(&params);
    let mut scratch = Scratch::default();
    let with_rho = params.family == Family::RumMf;
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut nll = 0.0;
        let mut reg = 0.0;
        for batch in order.chunks(cfg.batch) {
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                let e = &events[i];
                nll += accumulate(
                    &params,
                    e,
                    prices,
                    cfg.l2_weight,
                    scale,
                    &mut buf,
                    &mut scratch,
                );
                reg += reg_term(&params, e, cfg.l2_weight);
            }
            let grads = buf.drain(with_rho);
            adam_step(&mut params, &grads, &mut state, cfg)?;
        }
        let n = events.len() as f64;
        let record = EpochLoss {
            epoch,
            mean_nll: nll / n,
            reg_term: reg / n,
        };
        if let Some(prev) = trace.last().map(|p: &EpochLoss| p.mean_nll) {
            if record.mean_nll > prev * (1.0 + LOSS_INCREASE_TOLERANCE) {
                log::warn!(
                    "{} epoch {epoch}: mean NLL rose from {prev:.6} to {:.6}",
                    params.family,
                    record.mean_nll
                );
            }
        }
        trace.push(record);
    }

    if !params.is_finite() {
        return Err(Error::NonFiniteGradient {
            step: state.t,
            what: "parameters diverged".into(),
        });
    }
    let final_nll = mean_nll(&params, events, prices)?;
    Ok(FitResult {
        params,
        initial_nll,
        final_nll,
        trace,
    })
}
