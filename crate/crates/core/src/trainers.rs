//! User-weighted SGD for the component models.
//!
//! Every pairwise step draws a user uniformly, one of the user's top-grade
//! items as the positive and a lower-grade item through the configured
//! sampler, then descends
//!
//! ```text
//! Γ · (n·p_a) · ln(1 + exp(−Δ)) + γ/2 ‖Θ‖²,   Δ = h(x_ab) − h(x_ac)
//! ```
//!
//! on the coordinates touched by the two feature vectors. `Γ` is 1 except for
//! the rank-aware sampler. The user weight enters as `n·p_a`, so a uniform
//! distribution reproduces plain unweighted pairwise training.

use log::info;

use crate::dataset::{FeatureEncoder, InteractionDataset, NegativePool};
use crate::error::{Error, Result};
use crate::fm::{init_params, Coord, FmParams};
use crate::rng::RngHandle;
use crate::samplers::{
    gamma_exact, sample_dynamic, sample_rank_aware, trial_rank_estimate, RankWeighting, SamplerConfig,
    SamplerKind, StaticSampler,
};
use crate::scorer::FmScorer;
use crate::sparse::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub eta: f64,
    pub gamma: f64,
    pub max_iter: usize,
    pub k: usize,
    pub sampler: SamplerConfig,
    pub seed: u64,
    /// Emit a progress point every this many steps; 0 disables logging.
    pub log_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.05,
            gamma: 0.05,
            max_iter: 100_000,
            k: 2,
            sampler: SamplerConfig::default(),
            seed: 42,
            log_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta={} must be positive", self.eta)));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("gamma={} must be non-negative", self.gamma)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        self.sampler.validate()
    }
}

/// One sampled `(user, positive, negative)` triple with its step multipliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStep {
    pub iteration: usize,
    pub user: usize,
    pub pos_item: usize,
    pub neg_item: usize,
    pub delta: f64,
    pub lambda: f64,
    /// Multiplier of the loss term from the user weight.
    pub user_weight: f64,
    /// Rank-aware multiplier, 1 for the other samplers.
    pub extra_weight: f64,
}

impl PairStep {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        params: &FmParams,
        iteration: usize,
        (user, pos_item, neg_item): (usize, usize, usize),
        x_ab: &SparseVector,
        x_ac: &SparseVector,
        user_weight: f64,
        extra_weight: f64,
    ) -> Result<Self> {
        let delta = params.predict_fast(x_ab)? - params.predict_fast(x_ac)?;
        Ok(PairStep {
            iteration,
            user,
            pos_item,
            neg_item,
            delta,
            lambda: lambda_grad(delta),
            user_weight,
            extra_weight,
        })
    }
}

/// `ln(1 + exp(−Δ))` without overflow.
pub fn pairwise_logistic_loss(delta: f64) -> f64 {
    if delta > 0.0 {
        (-delta).exp().ln_1p()
    } else {
        -delta + delta.exp().ln_1p()
    }
}

/// Derivative of [`pairwise_logistic_loss`]: `−exp(−Δ)/(1 + exp(−Δ))`.
pub fn lambda_grad(delta: f64) -> f64 {
    if delta >= 0.0 {
        let e = (-delta).exp();
        -e / (1.0 + e)
    } else {
        -1.0 / (1.0 + delta.exp())
    }
}

/// `∂ ln(1 + exp(−y·f)) / ∂f`.
pub fn pointwise_grad_factor(label: f64, score: f64) -> f64 {
    label * lambda_grad(label * score)
}

fn union_features(a: &SparseVector, b: &SparseVector) -> Vec<(usize, f64, f64)> {
    let (ea, eb) = (a.entries(), b.entries());
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(ea.len() + eb.len());
    while i < ea.len() || j < eb.len() {
        match (ea.get(i), eb.get(j)) {
            (Some(&(la, va)), Some(&(lb, vb))) if la == lb => {
                out.push((la, va, vb));
                i += 1;
                j += 1;
            }
            (Some(&(la, va)), Some(&(lb, _))) if la < lb => {
                out.push((la, va, 0.0));
                i += 1;
            }
            (Some(&(la, va)), None) => {
                out.push((la, va, 0.0));
                i += 1;
            }
            (_, Some(&(lb, vb))) => {
                out.push((lb, 0.0, vb));
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

fn column_sums(params: &FmParams, x: &SparseVector) -> Vec<f64> {
    let mut sums = vec![0.0; params.rank()];
    for (l, xl) in x.iter() {
        for (s, &v) in sums.iter_mut().zip(params.v_row(l)) {
            *s += v * xl;
        }
    }
    sums
}

/// Gradient of `weight·ℓ(Δ) + γ/2‖Θ‖²` on every coordinate touched by `x_ab ∪ x_ac`.
///
/// `lambda` is `ℓ'(Δ)` evaluated at the current parameters.
pub fn pair_gradient(
    params: &FmParams,
    x_ab: &SparseVector,
    x_ac: &SparseVector,
    weight: f64,
    lambda: f64,
    gamma: f64,
) -> Result<Vec<(Coord, f64)>> {
    if x_ab.dim() != params.dim() || x_ac.dim() != params.dim() {
        return Err(Error::Shape("pair vectors do not match model dimension".into()));
    }
    let scale = weight * lambda;
    let s_ab = column_sums(params, x_ab);
    let s_ac = column_sums(params, x_ac);
    let mut grad = Vec::new();
    for (l, xab, xac) in union_features(x_ab, x_ac) {
        grad.push((Coord::Linear(l), scale * (xab - xac) + gamma * params.w()[l]));
        let row = params.v_row(l);
        for m in 0..params.rank() {
            let d_delta = s_ab[m] * xab - s_ac[m] * xac - row[m] * (xab * xab - xac * xac);
            grad.push((Coord::Factor(l, m), scale * d_delta + gamma * row[m]));
        }
    }
    Ok(grad)
}

fn apply(params: &mut FmParams, grad: &[(Coord, f64)], eta: f64, iteration: usize) -> Result<()> {
    for &(c, g) in grad {
        let updated = params.get(c) - eta * g;
        if !updated.is_finite() {
            return Err(Error::Divergence {
                step: iteration,
                detail: format!("coordinate {c:?} became {updated}"),
            });
        }
        params.set(c, updated);
    }
    Ok(())
}

/// One descent step on a sampled pair.
pub fn sgd_pair_update(
    params: &mut FmParams,
    step: &PairStep,
    x_ab: &SparseVector,
    x_ac: &SparseVector,
    cfg: &TrainConfig,
) -> Result<()> {
    if x_ab == x_ac {
        return Err(Error::Shape("positive and negative feature vectors coincide".into()));
    }
    let weight = step.extra_weight * step.user_weight;
    let grad = pair_gradient(params, x_ab, x_ac, weight, step.lambda, cfg.gamma)?;
    apply(params, &grad, cfg.eta, step.iteration)
}

/// Trained parameters plus the `(step, average loss)` progress log.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub params: FmParams,
    pub progress: Vec<(usize, f64)>,
}

impl Trained {
    /// `step=<n> avg_loss=<decimal>` lines.
    pub fn progress_log(&self) -> String {
        self.progress
            .iter()
            .map(|(s, l)| format!("step={s} avg_loss={l:.6}\n"))
            .collect()
    }
}

struct ProgressLog {
    interval: usize,
    window: f64,
    count: usize,
    points: Vec<(usize, f64)>,
}

impl ProgressLog {
    fn new(interval: usize) -> Self {
        ProgressLog {
            interval,
            window: 0.0,
            count: 0,
            points: Vec::new(),
        }
    }

    fn record(&mut self, step: usize, loss: f64) {
        if self.interval == 0 {
            return;
        }
        self.window += loss;
        self.count += 1;
        if (step + 1).is_multiple_of(self.interval) {
            let avg = self.window / self.count as f64;
            info!("step={} avg_loss={avg:.6}", step + 1);
            self.points.push((step + 1, avg));
            self.window = 0.0;
            self.count = 0;
        }
    }
}

fn check_weights(ds: &InteractionDataset, weights: &[f64]) -> Result<()> {
    if weights.len() != ds.n_users() {
        return Err(Error::Shape(format!(
            "{} user weights for {} users",
            weights.len(),
            ds.n_users()
        )));
    }
    if weights.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
        return Err(Error::Config("user weights must be finite and non-negative".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(Error::Config(format!("user weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// Users that have a positive item and at least one drawable negative.
struct Trainable {
    users: Vec<usize>,
    top_items: Vec<Vec<usize>>,
    top_grade: Vec<u32>,
}

impl Trainable {
    fn new(ds: &InteractionDataset) -> Result<Self> {
        let mut users = Vec::new();
        let mut top_items = vec![Vec::new(); ds.n_users()];
        let mut top_grade = vec![0; ds.n_users()];
        for u in 0..ds.n_users() {
            let tops = ds.top_items(u);
            if tops.is_empty() {
                continue;
            }
            let grade = ds.top_grade(u).unwrap_or(0);
            if NegativePool::new(ds, u, grade).is_empty() {
                continue;
            }
            users.push(u);
            top_items[u] = tops;
            top_grade[u] = grade;
        }
        if users.is_empty() {
            return Err(Error::EmptyDataset(
                "no user has both a positive item and a drawable negative".into(),
            ));
        }
        Ok(Trainable {
            users,
            top_items,
            top_grade,
        })
    }

    fn draw(&self, ds: &InteractionDataset, rng: &mut RngHandle) -> (usize, usize, u32) {
        let user = self.users[rng.uniform_usize(self.users.len())];
        let tops = &self.top_items[user];
        let pos = tops[rng.uniform_usize(tops.len())];
        debug_assert!(ds.grade_of(user, pos).is_some());
        (user, pos, self.top_grade[user])
    }
}

/// Pairwise component training (PRFM and the three LambdaFM samplers).
pub fn train_component(ds: &InteractionDataset, weights: &[f64], cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    check_weights(ds, weights)?;
    let enc = ds.feature_encoder();
    let trainable = Trainable::new(ds)?;
    let static_sampler = match cfg.sampler.kind {
        SamplerKind::Static => Some(StaticSampler::new(ds.popularity_rank(), cfg.sampler.rho)?),
        _ => None,
    };
    let max_trials = cfg.sampler.max_trials.unwrap_or(ds.n_items()).max(1);
    let n = ds.n_users() as f64;

    let mut rng = RngHandle::new(cfg.seed);
    let mut params = init_params(enc.dim(), cfg.k, &mut rng)?;
    let mut log = ProgressLog::new(cfg.log_interval);

    for iteration in 0..cfg.max_iter {
        let (user, pos, grade) = trainable.draw(ds, &mut rng);
        let pool = NegativePool::new(ds, user, grade);
        let (neg, extra) = match cfg.sampler.kind {
            SamplerKind::Uniform => (pool.sample(&mut rng)?, 1.0),
            SamplerKind::Static => (
                static_sampler
                    .as_ref()
                    .expect("static sampler built above")
                    .sample_from(&pool, &mut rng)?,
                1.0,
            ),
            SamplerKind::Dynamic => {
                let scorer = FmScorer::new(&params, enc);
                let item = sample_dynamic(&scorer, user, &pool, cfg.sampler.m, cfg.sampler.rho, &mut rng)?;
                (item, 1.0)
            }
            SamplerKind::RankAware => {
                let scorer = FmScorer::new(&params, enc);
                let draw =
                    sample_rank_aware(&scorer, user, pos, &pool, cfg.sampler.epsilon, max_trials, &mut rng)?;
                let weight = match cfg.sampler.rank_weighting {
                    RankWeighting::TrialEstimate => draw.gamma_weight,
                    RankWeighting::Harmonic => {
                        gamma_exact(trial_rank_estimate(ds.n_items(), draw.trials), ds.n_items())?
                    }
                };
                (draw.item, weight)
            }
        };
        let x_ab = enc.encode(user, pos)?;
        let x_ac = enc.encode(user, neg)?;
        let step = PairStep::new(
            &params,
            iteration,
            (user, pos, neg),
            &x_ab,
            &x_ac,
            n * weights[user],
            extra,
        )?;
        log.record(iteration, pairwise_logistic_loss(step.delta));
        sgd_pair_update(&mut params, &step, &x_ab, &x_ac, cfg)?;
    }
    Ok(Trained {
        params,
        progress: log.points,
    })
}

/// Gradient of `weight·ln(1 + exp(−y·f(x))) + γ/2‖Θ‖²` on the coordinates of `x`.
pub fn pointwise_gradient(
    params: &FmParams,
    x: &SparseVector,
    label: f64,
    weight: f64,
    gamma: f64,
) -> Result<(f64, Vec<(Coord, f64)>)> {
    let mut sums = vec![0.0; params.rank()];
    if x.dim() != params.dim() {
        return Err(Error::Shape("input does not match model dimension".into()));
    }
    let score = params.predict_fast_unchecked(x, &mut sums);
    let scale = weight * pointwise_grad_factor(label, score);
    let mut grad = Vec::with_capacity(x.nnz() * (1 + params.rank()));
    for (l, xl) in x.iter() {
        grad.push((Coord::Linear(l), scale * xl + gamma * params.w()[l]));
        let row = params.v_row(l);
        for m in 0..params.rank() {
            let d_score = xl * sums[m] - row[m] * xl * xl;
            grad.push((Coord::Factor(l, m), scale * d_score + gamma * row[m]));
        }
    }
    Ok((pairwise_logistic_loss(label * score), grad))
}

/// Pointwise logistic FM with per-user loss weights.
///
/// Each step takes one positive instance (label +1) and one uniformly
/// sampled unobserved item (label −1) of a uniformly drawn user.
pub fn train_pointwise_fm(ds: &InteractionDataset, weights: &[f64], cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    check_weights(ds, weights)?;
    let enc: FeatureEncoder = ds.feature_encoder();
    let trainable = Trainable::new(ds)?;
    let n = ds.n_users() as f64;

    let mut rng = RngHandle::new(cfg.seed);
    let mut params = init_params(enc.dim(), cfg.k, &mut rng)?;
    let mut log = ProgressLog::new(cfg.log_interval);

    for iteration in 0..cfg.max_iter {
        let (user, pos, grade) = trainable.draw(ds, &mut rng);
        let neg = NegativePool::new(ds, user, grade).sample(&mut rng)?;
        let weight = n * weights[user];
        let mut loss = 0.0;
        for (item, label) in [(pos, 1.0), (neg, -1.0)] {
            let x = enc.encode(user, item)?;
            let (l, grad) = pointwise_gradient(&params, &x, label, weight, cfg.gamma)?;
            loss += l;
            apply(&mut params, &grad, cfg.eta, iteration)?;
        }
        log.record(iteration, loss / 2.0);
    }
    Ok(Trained {
        params,
        progress: log.points,
    })
}
