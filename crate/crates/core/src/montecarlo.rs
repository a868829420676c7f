//! Monte Carlo on the truncated interval `[1, M + L]`.
//!
//! Activation spreads from site 1. Every walk visits a contiguous range that
//! contains its origin, so the activated set is always an interval `[1, f]`; a
//! trial is a single left-to-right pass that samples the walks of each activated
//! site once and pushes the frontier `f`. Walks from sites in `(M, M + L]` are
//! sampled as well.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::classifier::ProcessParams;
use crate::exact::{block_miss_prob, ExactError};
use crate::rng::Stream;

/// Upper limit on `trials * M * N * L`.
pub const DEFAULT_WORK_BUDGET: u64 = 50_000_000_000;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("horizon M = {horizon} must exceed L = {lifetime}")]
    HorizonTooSmall { horizon: u64, lifetime: u32 },
    #[error("trials must be at least 1")]
    NoTrials,
    #[error("ci_level must lie in (0, 1), got {0}")]
    BadLevel(f64),
    #[error("work trials*M*N*L = {work} exceeds the budget {budget}")]
    ResourceLimit { work: u128, budget: u64 },
    #[error("q_{index} = {value} is not a probability")]
    BadProbability { index: u64, value: f64 },
    #[error(transparent)]
    Exact(#[from] ExactError),
}

fn default_level() -> f64 {
    0.95
}

fn default_budget() -> u64 {
    DEFAULT_WORK_BUDGET
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: ProcessParams,
    #[serde(rename = "M")]
    pub horizon: u64,
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_level")]
    pub ci_level: f64,
    #[serde(default = "default_budget")]
    pub budget: u64,
}

impl SimConfig {
    pub fn new(params: ProcessParams, horizon: u64, trials: u64, seed: u64) -> Self {
        SimConfig {
            params,
            horizon,
            trials,
            seed,
            ci_level: default_level(),
            budget: DEFAULT_WORK_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let l = self.params.lifetime;
        if self.horizon <= l as u64 {
            return Err(SimError::HorizonTooSmall {
                horizon: self.horizon,
                lifetime: l,
            });
        }
        if self.trials == 0 {
            return Err(SimError::NoTrials);
        }
        if !(self.ci_level > 0.0 && self.ci_level < 1.0) {
            return Err(SimError::BadLevel(self.ci_level));
        }
        let work =
            self.trials as u128 * self.horizon as u128 * self.params.particles as u128 * l as u128;
        if work > self.budget as u128 {
            return Err(SimError::ResourceLimit {
                work,
                budget: self.budget,
            });
        }
        Ok(())
    }
}

/// Jump probabilities `q_1, ..., q_{M+L}` for a trial.
pub fn site_probabilities(params: &ProcessParams, horizon: u64) -> Result<Vec<f64>, SimError> {
    (1..=horizon + params.lifetime as u64)
        .map(|i| {
            let q = params
                .spec
                .eval(i)
                .map_err(|e| SimError::Exact(ExactError::from(e)))?;
            if (0.0..=1.0).contains(&q) {
                Ok(q)
            } else {
                Err(SimError::BadProbability { index: i, value: q })
            }
        })
        .collect()
}

/// Largest rightward displacement of one walk of `steps` steps.
fn max_displacement(stream: &mut Stream, q: f64, steps: u32) -> u64 {
    let mut pos: i64 = 0;
    let mut best: i64 = 0;
    for _ in 0..steps {
        if stream.next_f64() < q {
            pos -= 1;
        } else {
            pos += 1;
            best = best.max(pos);
        }
    }
    best as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// rightmost activated site; the activated set is `[1, frontier]`
    pub frontier: u64,
}

impl TrialOutcome {
    pub fn activated(&self) -> std::ops::RangeInclusive<u64> {
        1..=self.frontier
    }

    pub fn survives_to(&self, horizon: u64) -> bool {
        self.frontier >= horizon
    }
}

/// One trial. `q[i - 1]` is `q_i` for `i` in `[1, M + L]`.
pub fn simulate_trial(
    q: &[f64],
    particles: u32,
    lifetime: u32,
    seed: u64,
    trial: u64,
) -> TrialOutcome {
    let end = q.len() as u64;
    let mut frontier = 1u64;
    let mut site = 1u64;
    while site <= frontier && site <= end {
        let qi = q[(site - 1) as usize];
        for p in 0..particles {
            let mut stream = Stream::for_walk(seed, trial, site, p as u64);
            let reach = site + max_displacement(&mut stream, qi, lifetime);
            frontier = frontier.max(reach.min(end));
        }
        site += 1;
    }
    TrialOutcome { frontier }
}

/// Wilson score interval for `successes` out of `n` at the given level.
pub fn wilson_interval(successes: u64, n: u64, level: f64) -> (f64, f64) {
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - level) / 2.0);
    let n_f = n as f64;
    let p = successes as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let centre = (p + z2 / (2.0 * n_f)) / denom;
    let half = z / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub max_sites: Vec<u64>,
    pub survivals: u64,
    pub p_hat: f64,
    pub ci: (f64, f64),
    /// `P(E_i)` estimates for `i = 1..=M`
    pub activation: Vec<f64>,
}

impl SimResult {
    pub fn half_width(&self) -> f64 {
        (self.ci.1 - self.ci.0) / 2.0
    }
}

/// Runs every trial, in parallel, collecting results in trial order.
pub fn run_trials(cfg: &SimConfig) -> Result<Vec<TrialOutcome>, SimError> {
    cfg.validate()?;
    let q = site_probabilities(&cfg.params, cfg.horizon)?;
    let (n, l) = (cfg.params.particles, cfg.params.lifetime);
    Ok((0..cfg.trials)
        .into_par_iter()
        .map(|t| simulate_trial(&q, n, l, cfg.seed, t))
        .collect())
}

pub fn estimate_survival(cfg: &SimConfig) -> Result<SimResult, SimError> {
    let outcomes = run_trials(cfg)?;
    let m = cfg.horizon;
    let mut reached = vec![0u64; m as usize + 2];
    for o in &outcomes {
        reached[o.frontier.min(m) as usize] += 1;
    }
    // suffix sums: number of trials with frontier >= i
    for i in (1..=m as usize).rev() {
        reached[i] += reached[i + 1];
    }
    let trials = cfg.trials as f64;
    let activation = (1..=m as usize)
        .map(|i| reached[i] as f64 / trials)
        .collect();
    let survivals = reached[m as usize];
    Ok(SimResult {
        config: cfg.clone(),
        max_sites: outcomes.iter().map(|o| o.frontier).collect(),
        survivals,
        p_hat: survivals as f64 / trials,
        ci: wilson_interval(survivals, cfg.trials, cfg.ci_level),
        activation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileRow {
    pub site: u64,
    pub p_hat: f64,
    /// `P^(E_L) prod_{k=0}^{site-L-1} (1 - a_k)` for `site > L`
    pub lower_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivationProfile {
    pub result: SimResult,
    pub rows: Vec<ProfileRow>,
}

pub fn estimate_activation_profile(cfg: &SimConfig) -> Result<ActivationProfile, SimError> {
    let result = estimate_survival(cfg)?;
    let l = cfg.params.lifetime as u64;
    let blocks = cfg.horizon - l;
    let a = (0..blocks)
        .into_par_iter()
        .map(|n| {
            block_miss_prob(
                &cfg.params.spec,
                cfg.params.particles,
                cfg.params.lifetime,
                n,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let base = result.activation[(l - 1) as usize];
    let mut product = 1.0;
    let rows = result
        .activation
        .iter()
        .enumerate()
        .map(|(idx, &p_hat)| {
            let site = idx as u64 + 1;
            let lower_bound = (site > l).then(|| {
                product *= 1.0 - a[(site - l - 1) as usize];
                base * product
            });
            ProfileRow {
                site,
                p_hat,
                lower_bound,
            }
        })
        .collect();
    Ok(ActivationProfile { result, rows })
}
