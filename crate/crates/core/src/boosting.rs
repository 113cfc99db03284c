//! Adaptive boosting of low-rank component models.
//!
//! Round `t` trains a component on the current user distribution, scores it
//! per user on the training split, weights it by
//!
//! ```text
//! α_t = ½ ln( Σ_a p_a (1 + E_a) / Σ_a p_a (1 − E_a) )
//! ```
//!
//! and then moves the distribution toward the users the running ensemble
//! still ranks poorly: `p_a ∝ exp(−E_a(f_t))`.

use std::fmt;
use std::str::FromStr;

use log::{info, warn};

use crate::dataset::InteractionDataset;
use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::fm::FmParams;
use crate::metrics::{weighted_mean, Candidates, EvalSet, Measure, PerUserPerformance, DEFAULT_EVAL_NEGATIVES};
use crate::rng::RngHandle;
use crate::scorer::FmScorer;
use crate::trainers::{train_component, train_pointwise_fm, TrainConfig, Trained};

pub const DEFAULT_E_CLAMP: f64 = 1e-6;
pub const MAX_RETRIES: usize = 3;

/// Objective family of the component learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Learner {
    /// Pointwise logistic FM.
    Pointwise,
    /// Pairwise ranking FM; the negative sampler comes from the train config.
    Pairwise,
}

impl fmt::Display for Learner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Learner::Pointwise => "pointwise",
            Learner::Pairwise => "pairwise",
        })
    }
}

impl FromStr for Learner {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pointwise" => Ok(Learner::Pointwise),
            "pairwise" => Ok(Learner::Pairwise),
            other => Err(Error::Config(format!("unknown learner {other:?}"))),
        }
    }
}

pub fn train_learner(
    learner: Learner,
    ds: &InteractionDataset,
    weights: &[f64],
    cfg: &TrainConfig,
) -> Result<Trained> {
    match learner {
        Learner::Pointwise => train_pointwise_fm(ds, weights, cfg),
        Learner::Pairwise => train_component(ds, weights, cfg),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoostConfig {
    pub rounds: usize,
    pub component: TrainConfig,
    pub learner: Learner,
    pub measure: Measure,
    pub e_clamp: f64,
    pub patience: Option<usize>,
    /// Unobserved items added to each user's list when measuring E.
    pub eval_negatives: usize,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            rounds: 4,
            component: TrainConfig::default(),
            learner: Learner::Pairwise,
            measure: Measure::Auc,
            e_clamp: DEFAULT_E_CLAMP,
            patience: None,
            eval_negatives: DEFAULT_EVAL_NEGATIVES,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::Config("boosting needs at least one round".into()));
        }
        if !(self.e_clamp > 0.0 && self.e_clamp < 0.5) {
            return Err(Error::Config(format!("e_clamp={} must lie in (0, 0.5)", self.e_clamp)));
        }
        if self.patience == Some(0) {
            return Err(Error::Config("patience must be at least 1 when set".into()));
        }
        self.component.validate()
    }
}

/// Component weight from per-user performance under the current distribution.
///
/// Users with an undefined measure are left out. `weights` need not be
/// normalized.
pub fn compute_alpha(weights: &[f64], per_user_e: &[Option<f64>], e_clamp: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (&p, e) in weights.iter().zip(per_user_e) {
        if let Some(e) = e {
            let e = e.clamp(e_clamp, 1.0 - e_clamp);
            num += p * (1.0 + e);
            den += p * (1.0 - e);
        }
    }
    0.5 * (num / den).ln()
}

/// Softmax of `−E_a`; users with an undefined measure get weight 0.
pub fn update_weights(per_user_e: &[Option<f64>]) -> Result<Vec<f64>> {
    if per_user_e.iter().all(Option::is_none) {
        return Err(Error::Boosting("no user has a defined measure".into()));
    }
    let unnormalized: Vec<f64> = per_user_e
        .iter()
        .map(|e| e.map_or(0.0, |e| (-e).exp()))
        .collect();
    let total: f64 = unnormalized.iter().sum();
    Ok(unnormalized.into_iter().map(|w| w / total).collect())
}

/// One line of the round log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub alpha: f64,
    pub component_weighted_e: f64,
    pub ensemble_train_e: f64,
    pub ensemble_holdout_e: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostState {
    pub round: usize,
    pub weights: Vec<f64>,
    pub model: EnsembleModel,
    pub history: Vec<RoundRecord>,
}

impl BoostState {
    pub fn new(n_users: usize) -> Self {
        BoostState {
            round: 0,
            weights: vec![1.0 / n_users as f64; n_users],
            model: EnsembleModel::new(),
            history: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoostOutcome {
    pub model: EnsembleModel,
    pub history: Vec<RoundRecord>,
    pub final_weights: Vec<f64>,
}

impl BoostOutcome {
    /// `round,alpha,component_weighted_E,ensemble_train_E,ensemble_holdout_E`
    pub fn round_log_csv(&self) -> String {
        round_log_csv(&self.history)
    }
}

pub fn round_log_csv(history: &[RoundRecord]) -> String {
    let mut out = String::from("round,alpha,component_weighted_E,ensemble_train_E,ensemble_holdout_E\n");
    for r in history {
        let holdout = r.ensemble_holdout_e.map(|e| format!("{e:.6}")).unwrap_or_default();
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{}\n",
            r.round, r.alpha, r.component_weighted_e, r.ensemble_train_e, holdout
        ));
    }
    out
}

/// Training seed of the component fitted in `round` (1-based) on retry `attempt`.
pub fn component_seed(base: u64, round: usize, attempt: usize) -> u64 {
    RngHandle::derive(base, ((round as u64) << 8) | attempt as u64).next_u64()
}

fn add_scaled(acc: &mut [Vec<f64>], alpha: f64, scores: &[Vec<f64>]) {
    for (a, s) in acc.iter_mut().zip(scores) {
        for (x, y) in a.iter_mut().zip(s) {
            *x += alpha * y;
        }
    }
}

/// Runs the boosting loop on `train`; `holdout` (same ids) only drives early stopping.
pub fn run_adafm(
    train: &InteractionDataset,
    cfg: &BoostConfig,
    holdout: Option<&InteractionDataset>,
) -> Result<BoostOutcome> {
    cfg.validate()?;
    let n = train.n_users();
    let enc = train.feature_encoder();
    let eval_seed = RngHandle::derive(cfg.component.seed, u64::MAX).next_u64();
    let excluded: Vec<&InteractionDataset> = holdout.into_iter().collect();
    let train_eval = EvalSet::build(train, &excluded, Candidates::Sampled(cfg.eval_negatives), eval_seed);
    let holdout_eval = holdout.map(|h| {
        EvalSet::build(h, &[train], Candidates::Sampled(cfg.eval_negatives), eval_seed ^ 1)
    });

    let mut state = BoostState::new(n);
    let mut train_scores: Vec<Vec<f64>> = train_eval.users.iter().map(|c| vec![0.0; c.items.len()]).collect();
    let mut holdout_scores: Option<Vec<Vec<f64>>> = holdout_eval
        .as_ref()
        .map(|h| h.users.iter().map(|c| vec![0.0; c.items.len()]).collect());
    let mut best_holdout = f64::NEG_INFINITY;
    let mut stale = 0;

    'rounds: for round in 1..=cfg.rounds {
        let mut accepted: Option<(f64, FmParams, PerUserPerformance)> = None;
        for attempt in 0..=MAX_RETRIES {
            let mut component_cfg = cfg.component;
            component_cfg.seed = component_seed(cfg.component.seed, round, attempt);
            let trained = train_learner(cfg.learner, train, &state.weights, &component_cfg)?;
            let component_scores = train_eval.scores(&FmScorer::new(&trained.params, enc));
            let perf = train_eval.performance(&component_scores, cfg.measure)?;
            let alpha = compute_alpha(&state.weights, &perf.values, cfg.e_clamp);
            if alpha > 0.0 && alpha.is_finite() {
                accepted = Some((alpha, trained.params, perf));
                break;
            }
            warn!("round {round}: component rejected with alpha={alpha}, retrying ({attempt})");
        }
        let Some((alpha, params, perf)) = accepted else {
            warn!("round {round}: no acceptable component after {MAX_RETRIES} retries, stopping");
            break 'rounds;
        };
        let component_weighted_e = weighted_mean(&perf.values, &state.weights)?;

        let scorer = FmScorer::new(&params, enc);
        add_scaled(&mut train_scores, alpha, &train_eval.scores(&scorer));
        let ensemble_perf = train_eval.performance(&train_scores, cfg.measure)?;
        let ensemble_train_e = ensemble_perf
            .mean()
            .ok_or_else(|| Error::Boosting("no user has a defined training measure".into()))?;
        let ensemble_holdout_e = match (&holdout_eval, &mut holdout_scores) {
            (Some(eval), Some(scores)) => {
                add_scaled(scores, alpha, &eval.scores(&scorer));
                eval.performance(scores, cfg.measure)?.mean()
            }
            _ => None,
        };

        state.model.push(alpha, params)?;
        state.weights = update_weights(&ensemble_perf.values)?;
        state.round = round;
        let record = RoundRecord {
            round,
            alpha,
            component_weighted_e,
            ensemble_train_e,
            ensemble_holdout_e,
        };
        info!(
            "round={round} alpha={alpha:.6} component_E={component_weighted_e:.6} ensemble_E={ensemble_train_e:.6}"
        );
        state.history.push(record);

        if let (Some(patience), Some(e)) = (cfg.patience, ensemble_holdout_e) {
            if e > best_holdout {
                best_holdout = e;
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    info!("holdout measure flat for {patience} rounds, stopping after round {round}");
                    break;
                }
            }
        }
    }

    if state.model.is_empty() {
        return Err(Error::Boosting("no component was accepted".into()));
    }
    Ok(BoostOutcome {
        model: state.model,
        history: state.history,
        final_weights: state.weights,
    })
}
