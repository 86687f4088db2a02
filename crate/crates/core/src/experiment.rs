//! End-to-end experiments: simulate, fit, build slates, score, aggregate.
//!
//! Three environment presets reproduce the simulator settings used for the
//! welfare comparison. Each seed runs an independent pipeline; seeds run on
//! separate threads and their results are merged in seed order, so outputs
//! are byte-identical across reruns.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::metrics::{compute_metrics, MetricReport, RunMetrics};
use crate::model::{Family, ModelParams};
use crate::sim::{generate_world, simulate_sessions, EnvConfig};
use crate::slate::{build_slates, Method, Objective, SlateSources};
use crate::train::{fit, TrainConfig};

/// Offset from the world seed to the training seed, so that changing the
/// training setup keeps the worlds fixed.
pub const TRAIN_SEED_OFFSET: u64 = 0x7A1_0000_0000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Preset {
    Medium1,
    Medium2,
    Hard,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Medium1, Preset::Medium2, Preset::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Medium1 => "medium1",
            Preset::Medium2 => "medium2",
            Preset::Hard => "hard",
        }
    }

    /// `(nb_sessions, nb_items_session, nb_users, nb_prods, dimension)`.
    pub fn shape(self) -> (usize, usize, usize, usize, usize) {
        match self {
            Preset::Medium1 => (3, 10, 1000, 100, 10),
            Preset::Medium2 => (15, 2, 1000, 100, 10),
            Preset::Hard => (3, 10, 1000, 1000, 10),
        }
    }

    pub fn env(self, seed: u64) -> EnvConfig {
        let (nb_sessions, nb_items_session, nb_users, nb_prods, dimension) = self.shape();
        EnvConfig {
            nb_users,
            nb_prods,
            nb_sessions,
            nb_items_session,
            dimension,
            latent_variance: 3.0,
            price_noise_lo: 0.0,
            price_noise_hi: 5.0,
            kappa_true: 1.0,
            seed,
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::UnknownPreset(s.to_owned()))
    }
}

/// An environment given by preset name or spelled out in full.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSpec {
    Preset(String),
    Custom(EnvConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSelection {
    One(EnvSpec),
    Many(Vec<EnvSpec>),
}

impl EnvSelection {
    pub fn presets(presets: &[Preset]) -> Self {
        EnvSelection::Many(
            presets
                .iter()
                .map(|p| EnvSpec::Preset(p.name().to_owned()))
                .collect(),
        )
    }

    /// Named environments; the seed inside each config is replaced per run.
    pub fn resolve(&self) -> Result<Vec<(String, EnvConfig)>> {
        let specs = match self {
            EnvSelection::One(s) => std::slice::from_ref(s),
            EnvSelection::Many(v) => v.as_slice(),
        };
        let mut custom = 0;
        specs
            .iter()
            .map(|spec| match spec {
                EnvSpec::Preset(name) => {
                    let p: Preset = name.parse()?;
                    Ok((p.name().to_owned(), p.env(0)))
                }
                EnvSpec::Custom(cfg) => {
                    cfg.validate()?;
                    custom += 1;
                    let name = if custom == 1 {
                        "custom".to_owned()
                    } else {
                        format!("custom{custom}")
                    };
                    Ok((name, cfg.clone()))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub env: EnvSelection,
    pub train: TrainConfig,
    pub methods: Vec<Method>,
    pub objectives: Vec<Objective>,
    pub ks: Vec<usize>,
    pub n_seeds: usize,
    /// Run `r` uses world seed `base_seed + r`.
    pub base_seed: u64,
    #[serde(skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvSelection::One(EnvSpec::Preset("medium2".into())),
            train: TrainConfig::default(),
            methods: Method::ALL.to_vec(),
            objectives: Objective::ALL.to_vec(),
            ks: vec![1, 5, 10],
            n_seeds: 3,
            base_seed: 0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.env.resolve()?;
        if self.n_seeds == 0 {
            return Err(Error::InvalidConfig("n_seeds must be positive".into()));
        }
        if self.ks.is_empty() || self.ks.contains(&0) {
            return Err(Error::InvalidConfig(
                "ks must be a non-empty list of positive sizes".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidConfig("no methods selected".into()));
        }
        Ok(())
    }

    /// Method/objective pairs to evaluate, in table order. Oracles and BestOf
    /// always run with their own objective; other unsupported pairs are
    /// skipped with a warning.
    pub fn pairs(&self) -> Vec<(Method, Objective)> {
        let mut out = Vec::new();
        for &method in &self.methods {
            match method {
                Method::OracleUtility | Method::OracleWelfare | Method::BestOf => {
                    out.push((method, method.objectives()[0]));
                }
                _ => {
                    for &objective in &self.objectives {
                        if method.supports(objective) {
                            out.push((method, objective));
                        } else {
                            log::warn!(
                                "skipping {method} with the {objective} objective: not supported"
                            );
                        }
                    }
                }
            }
        }
        out.dedup();
        out
    }

    fn ks_sorted(&self) -> Vec<usize> {
        self.ks
            .iter()
            .copied()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Training diagnostics for one fitted model.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub seed: u64,
    pub family: Family,
    pub initial_nll: f64,
    pub final_nll: f64,
    pub median_kappa: f64,
}

#[derive(Debug, Clone)]
pub struct EnvResult {
    pub name: String,
    pub seeds: Vec<u64>,
    /// Aggregates over seeds, one per method/objective/k.
    pub reports: Vec<MetricReport>,
    /// Per-seed rows.
    pub runs: Vec<(u64, MetricReport)>,
    pub fits: Vec<FitSummary>,
}

impl EnvResult {
    pub fn report(&self, method: Method, objective: Objective, k: usize) -> Option<&MetricReport> {
        self.reports
            .iter()
            .find(|r| r.method == method && r.objective == objective && r.k == k)
    }

    /// The method's report with the highest mean Welfare@k.
    pub fn best_welfare(&self, method: Method, k: usize) -> Option<&MetricReport> {
        self.reports
            .iter()
            .filter(|r| r.method == method && r.k == k)
            .fold(None, |best: Option<&MetricReport>, r| match best {
                Some(b) if b.welfare >= r.welfare => Some(b),
                _ => Some(r),
            })
    }

    pub fn run(
        &self,
        seed: u64,
        method: Method,
        objective: Objective,
        k: usize,
    ) -> Option<&MetricReport> {
        self.runs
            .iter()
            .find(|(s, r)| *s == seed && r.method == method && r.objective == objective && r.k == k)
            .map(|(_, r)| r)
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub envs: Vec<EnvResult>,
    pub ks: Vec<usize>,
}

impl ExperimentOutput {
    pub fn env(&self, name: &str) -> Option<&EnvResult> {
        self.envs.iter().find(|e| e.name == name)
    }
}

struct SeedRun {
    seed: u64,
    metrics: Vec<(Method, Objective, usize, RunMetrics)>,
    fits: Vec<FitSummary>,
}

fn run_seed(
    env: &EnvConfig,
    seed: u64,
    cfg: &ExperimentConfig,
    pairs: &[(Method, Objective)],
) -> Result<SeedRun> {
    let env = EnvConfig {
        seed,
        ..env.clone()
    };
    let world = generate_world(&env)?;
    let events = simulate_sessions(&world);

    let families: BTreeSet<Family> = pairs.iter().filter_map(|(m, _)| m.family()).collect();
    let train = TrainConfig {
        seed: seed.wrapping_add(TRAIN_SEED_OFFSET),
        ..cfg.train.clone()
    };
    let mut models: Vec<ModelParams> = Vec::new();
    let mut fits = Vec::new();
    for family in families {
        let result = fit(&events, &world.prices, world.nb_users(), family, &train)?;
        let mut kappas: Vec<f64> = (0..result.params.nb_users())
            .map(|u| result.params.kappa(u))
            .collect();
        kappas.sort_by(f64::total_cmp);
        log::info!(
            "seed {seed} {family}: nll {:.4} -> {:.4}",
            result.initial_nll,
            result.final_nll
        );
        fits.push(FitSummary {
            seed,
            family,
            initial_nll: result.initial_nll,
            final_nll: result.final_nll,
            median_kappa: kappas[kappas.len() / 2],
        });
        models.push(result.params);
    }

    let ks = cfg.ks_sorted();
    let k_max = *ks.last().expect("validated non-empty");
    let sources = SlateSources {
        world: &world,
        events: &events,
        models: &models,
    };
    let mut metrics = Vec::new();
    for &(method, objective) in pairs {
        let full = build_slates(sources, method, objective, k_max)?;
        for &k in &ks {
            let slates: Vec<_> = full.iter().map(|s| s.truncated(k)).collect();
            metrics.push((method, objective, k, compute_metrics(&world, &slates)?));
        }
    }
    Ok(SeedRun {
        seed,
        metrics,
        fits,
    })
}

/// Runs every environment for `n_seeds` seeds and aggregates the metrics.
/// Writes the CSV tables and `report.md` when `output_dir` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let pairs = cfg.pairs();
    let seeds: Vec<u64> = (0..cfg.n_seeds as u64)
        .map(|r| cfg.base_seed.wrapping_add(r))
        .collect();

    let mut envs = Vec::new();
    for (name, env) in cfg.env.resolve()? {
        log::info!("environment {name}: {} seeds", seeds.len());
        let runs: Vec<Result<SeedRun>> = std::thread::scope(|scope| {
            let handles: Vec<_> = seeds
                .iter()
                .map(|&seed| {
                    let (env, pairs) = (&env, &pairs);
                    scope.spawn(move || run_seed(env, seed, cfg, pairs))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("seed worker panicked"))
                .collect()
        });
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
        envs.push(aggregate(name, &runs));
    }

    let out = ExperimentOutput {
        envs,
        ks: cfg.ks_sorted(),
    };
    if let Some(dir) = &cfg.output_dir {
        write_outputs(&out, cfg, dir)?;
    }
    Ok(out)
}

fn aggregate(name: String, runs: &[SeedRun]) -> EnvResult {
    let keys: Vec<(Method, Objective, usize)> = runs[0]
        .metrics
        .iter()
        .map(|(m, o, k, _)| (*m, *o, *k))
        .collect();
    let reports = keys
        .iter()
        .enumerate()
        .map(|(i, &(m, o, k))| {
            let per_seed: Vec<RunMetrics> = runs.iter().map(|r| r.metrics[i].3).collect();
            MetricReport::from_runs(m, o, k, &per_seed)
        })
        .collect();
    let per_seed = runs
        .iter()
        .flat_map(|r| {
            r.metrics
                .iter()
                .map(move |(m, o, k, rm)| (r.seed, MetricReport::from_runs(*m, *o, *k, &[*rm])))
        })
        .collect();
    EnvResult {
        name,
        seeds: runs.iter().map(|r| r.seed).collect(),
        reports,
        runs: per_seed,
        fits: runs.iter().flat_map(|r| r.fits.iter().cloned()).collect(),
    }
}

/// `<dir>/<env>/metrics.csv`, `<dir>/<env>/runs.csv`, `<dir>/config.json`
/// and `<dir>/report.md`.
pub fn write_outputs(out: &ExperimentOutput, cfg: &ExperimentConfig, dir: &Path) -> Result<()> {
    for env in &out.envs {
        let env_dir = dir.join(&env.name);
        io::write_metrics(&env_dir.join("metrics.csv"), &env.reports)?;
        io::write_runs(&env_dir.join("runs.csv"), &env.runs)?;
    }
    io::write_json(&dir.join("config.json"), cfg)?;
    io::write_text(&dir.join("report.md"), &markdown_report(out))
}

fn pm(mean: f64, std: f64) -> String {
    format!("{mean:.2}+/-{std:.2}")
}

/// Markdown summary: per-k metric tables,
/// Welfare@k over k, and Welfare at the smallest k across environments.
pub fn markdown_report(out: &ExperimentOutput) -> String {
    let mut s = String::from("# Welfare experiment report\n");
    for env in &out.envs {
        let _ = writeln!(s, "\n## {}\n", env.name);
        let _ = writeln!(s, "Seeds: {:?}\n", env.seeds);
        for &k in &out.ks {
            let _ = writeln!(s, "### Top-{k} recommendation\n");
            let _ = writeln!(
                s,
                "| Algo | Objective | Welfare@{k} | Utility@{k} | Revenue@{k} | Sales@{k} | Precision@{k} |"
            );
            s.push_str("|---|---|---:|---:|---:|---:|---:|\n");
            for r in env.reports.iter().filter(|r| r.k == k) {
                let _ = writeln!(
                    s,
                    "| {} | {} | {} | {} | {} | {} | {} |",
                    r.method,
                    r.objective,
                    pm(r.welfare, r.std_welfare),
                    pm(r.utility, r.std_utility),
                    pm(r.revenue, r.std_revenue),
                    pm(r.sales, r.std_sales),
                    pm(r.precision, r.std_precision),
                );
            }
            s.push('\n');
        }

        let _ = writeln!(s, "### Welfare over k (best objective per method)\n");
        s.push_str("| Algo |");
        for k in &out.ks {
            let _ = write!(s, " Welfare@{k} |");
        }
        s.push_str("\n|---|");
        s.push_str(&"---:|".repeat(out.ks.len()));
        s.push('\n');
        for method in methods_in(env) {
            let _ = write!(s, "| {method} |");
            for &k in &out.ks {
                match env.best_welfare(method, k) {
                    Some(r) => {
                        let _ = write!(s, " {:.2} ({}) |", r.welfare, r.objective);
                    }
                    None => s.push_str(" - |"),
                }
            }
            s.push('\n');
        }
    }

    let Some(&k) = out.ks.first() else { return s };
    let _ = writeln!(s, "\n## Welfare@{k} across environments\n");
    s.push_str("| Algo |");
    for env in &out.envs {
        for seed in &env.seeds {
            let _ = write!(s, " {} seed {seed} |", env.name);
        }
        let _ = write!(s, " {} mean |", env.name);
    }
    s.push_str("\n|---|");
    let cols: usize = out.envs.iter().map(|e| e.seeds.len() + 1).sum();
    s.push_str(&"---:|".repeat(cols));
    s.push('\n');
    let methods: BTreeSet<Method> = out.envs.iter().flat_map(methods_in).collect();
    for method in methods {
        let _ = write!(s, "| {method} |");
        for env in &out.envs {
            let best = env.best_welfare(method, k);
            for &seed in &env.seeds {
                match best.and_then(|b| env.run(seed, method, b.objective, k)) {
                    Some(r) => {
                        let _ = write!(s, " {:.2} |", r.welfare);
                    }
                    None => s.push_str(" - |"),
                }
            }
            match best {
                Some(b) => {
                    let _ = write!(s, " {:.2} |", b.welfare);
                }
                None => s.push_str(" - |"),
            }
        }
        s.push('\n');
    }
    s
}

fn methods_in(env: &EnvResult) -> Vec<Method> {
    let mut seen = Vec::new();
    for r in &env.reports {
        if !seen.contains(&r.method) {
            seen.push(r.method);
        }
    }
    seen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_expand_to_table_values() {
        let m1 = Preset::Medium1.env(7);
        assert_eq!(
            (
                m1.nb_sessions,
                m1.nb_items_session,
                m1.nb_users,
                m1.nb_prods,
                m1.dimension
            ),
            (3, 10, 1000, 100, 10)
        );
        let m2 = Preset::Medium2.env(7);
        assert_eq!(
            (
                m2.nb_sessions,
                m2.nb_items_session,
                m2.nb_users,
                m2.nb_prods,
                m2.dimension
            ),
            (15, 2, 1000, 100, 10)
        );
        let hard = Preset::Hard.env(7);
        assert_eq!(
            (
                hard.nb_sessions,
                hard.nb_items_session,
                hard.nb_users,
                hard.nb_prods,
                hard.dimension
            ),
            (3, 10, 1000, 1000, 10)
        );
        for p in Preset::ALL {
            let e = p.env(7);
            assert_eq!(e.latent_variance, 3.0);
            assert_eq!((e.price_noise_lo, e.price_noise_hi), (0.0, 5.0));
            assert_eq!(e.seed, 7);
        }
    }

    #[test]
    fn unknown_preset_is_rejected() {
        let cfg = ExperimentConfig {
            env: EnvSelection::One(EnvSpec::Preset("easy".into())),
            ..ExperimentConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::UnknownPreset(_))));
    }

    #[test]
    fn config_json_accepts_names_lists_and_inline_envs() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"env": "hard"}"#).unwrap();
        assert_eq!(cfg.env.resolve().unwrap()[0].0, "hard");
        let cfg: ExperimentConfig =
            serde_json::from_str(r#"{"env": ["medium1", {"nb_users": 4, "nb_prods": 3, "nb_items_session": 2}], "ks": [1, 2]}"#)
                .unwrap();
        let envs = cfg.env.resolve().unwrap();
        assert_eq!(envs[0].0, "medium1");
        assert_eq!((envs[1].0.as_str(), envs[1].1.nb_users), ("custom", 4));
        assert_eq!(cfg.ks, vec![1, 2]);
        assert_eq!(cfg.train, TrainConfig::default());
    }

    #[test]
    fn pclick_pairs_are_limited() {
        let cfg = ExperimentConfig::default();
        let pairs = cfg.pairs();
        assert!(pairs.contains(&(Method::MfPclick, Objective::Revenue)));
        assert!(!pairs.contains(&(Method::MfPclick, Objective::Welfare)));
        assert!(pairs.contains(&(Method::OracleWelfare, Objective::Welfare)));
        assert_eq!(pairs.len(), 2 + 1 + 4 + 4 + 2);
    }
}
