//! Negative-item samplers for pairwise training.
//!
//! * `Uniform`: every candidate equally likely.
//! * `Static`: popularity-biased, `p_j ∝ exp[−(r_j + 1)/(|I|·ρ)]` where `r_j`
//!   is the item's global popularity rank.
//! * `Dynamic`: draw `m` candidates uniformly, rank them by the current
//!   model's score (highest first) and pick rank `r` with
//!   `p ∝ exp[−(r + 1)/(m·ρ)]`.
//! * `RankAware`: draw uniformly until the negative scores within `ε` of the
//!   positive; the number of trials `T` estimates the positive's rank and
//!   yields the pair weight `⌈(|I| − 1)/T⌉`.

use std::fmt;
use std::str::FromStr;

use log::debug;

use crate::dataset::NegativePool;
use crate::error::{Error, Result};
use crate::rng::RngHandle;
use crate::scorer::Scorer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Uniform,
    Static,
    Dynamic,
    RankAware,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::Uniform => "uniform",
            SamplerKind::Static => "static",
            SamplerKind::Dynamic => "dynamic",
            SamplerKind::RankAware => "rank-aware",
        })
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(SamplerKind::Uniform),
            "static" => Ok(SamplerKind::Static),
            "dynamic" => Ok(SamplerKind::Dynamic),
            "rank-aware" | "rankaware" => Ok(SamplerKind::RankAware),
            other => Err(Error::Config(format!("unknown sampler {other:?}"))),
        }
    }
}

/// How LFM-W turns the trial count of a rank-aware draw into a gradient multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankWeighting {
    /// `⌈(|I| − 1)/T⌉` used directly.
    TrialEstimate,
    /// The estimated rank `⌈(|I| − 1)/T⌉` fed through [`gamma_exact`].
    Harmonic,
}

impl fmt::Display for RankWeighting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankWeighting::TrialEstimate => "trials",
            RankWeighting::Harmonic => "harmonic",
        })
    }
}

impl FromStr for RankWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "trials" => Ok(RankWeighting::TrialEstimate),
            "harmonic" => Ok(RankWeighting::Harmonic),
            other => Err(Error::Config(format!("unknown rank weighting {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub rho: f64,
    pub m: usize,
    pub epsilon: f64,
    /// Trial cap for rank-aware draws; `None` means the catalog size.
    pub max_trials: Option<usize>,
    pub rank_weighting: RankWeighting,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            kind: SamplerKind::Uniform,
            rho: 0.3,
            m: 10,
            epsilon: 0.1,
            max_trials: None,
            rank_weighting: RankWeighting::Harmonic,
        }
    }
}

impl SamplerConfig {
    pub fn with_kind(kind: SamplerKind) -> Self {
        SamplerConfig {
            kind,
            ..SamplerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::Config(format!("rho={} must lie in (0, 1]", self.rho)));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be at least 1".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon={} must be non-negative", self.epsilon)));
        }
        if self.max_trials == Some(0) {
            return Err(Error::Config("max_trials must be at least 1".into()));
        }
        Ok(())
    }
}

/// Outcome of one rank-aware draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankAwareDraw {
    pub item: usize,
    pub trials: usize,
    pub gamma_weight: f64,
}

pub fn sample_uniform(candidates: &[usize], rng: &mut RngHandle) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Sampling("no candidates to draw from".into()));
    }
    Ok(candidates[rng.uniform_usize(candidates.len())])
}

/// Draws an index `r` in `[0, n)` with probability `∝ exp[−(r + 1)/scale]`.
fn draw_geometric_rank(n: usize, scale: f64, rng: &mut RngHandle) -> usize {
    // ratio between consecutive ranks is q = exp(-1/scale); invert the truncated CDF
    let q = (-1.0 / scale).exp();
    let u = rng.uniform_f64();
    if q >= 1.0 - 1e-12 {
        return ((u * n as f64) as usize).min(n - 1);
    }
    let total = 1.0 - q.powi(n as i32);
    // P(rank < r) = (1 - q^r) / total
    let r = ((1.0 - u * total).ln() / q.ln()).floor();
    if r.is_finite() && r >= 0.0 {
        (r as usize).min(n - 1)
    } else {
        0
    }
}

/// Popularity-biased sampler over the whole catalog.
#[derive(Debug, Clone)]
pub struct StaticSampler {
    rho: f64,
    item_by_rank: Vec<usize>,
}

impl StaticSampler {
    pub fn new(popularity_rank: &[usize], rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::Config(format!("rho={rho} must lie in (0, 1]")));
        }
        if popularity_rank.is_empty() {
            return Err(Error::Sampling("empty catalog".into()));
        }
        let mut item_by_rank = vec![usize::MAX; popularity_rank.len()];
        for (item, &r) in popularity_rank.iter().enumerate() {
            if r >= item_by_rank.len() || item_by_rank[r] != usize::MAX {
                return Err(Error::Shape("popularity ranks are not a permutation".into()));
            }
            item_by_rank[r] = item;
        }
        Ok(StaticSampler { rho, item_by_rank })
    }

    pub fn catalog_size(&self) -> usize {
        self.item_by_rank.len()
    }

    fn scale(&self) -> f64 {
        self.item_by_rank.len() as f64 * self.rho
    }

    /// One draw from the unrestricted catalog distribution.
    pub fn sample(&self, rng: &mut RngHandle) -> usize {
        let r = draw_geometric_rank(self.item_by_rank.len(), self.scale(), rng);
        self.item_by_rank[r]
    }

    /// Draw restricted to `pool`, renormalized over its members.
    pub fn sample_from(&self, pool: &NegativePool<'_>, rng: &mut RngHandle) -> Result<usize> {
        if pool.is_empty() {
            return Err(Error::Sampling("negative pool is empty".into()));
        }
        for _ in 0..256 {
            let item = self.sample(rng);
            if pool.contains(item) {
                return Ok(item);
            }
        }
        // rejection keeps missing: enumerate the pool by rank and draw directly
        let scale = self.scale();
        let (members, weights): (Vec<usize>, Vec<f64>) = self
            .item_by_rank
            .iter()
            .enumerate()
            .filter(|&(_, &item)| pool.contains(item))
            .map(|(r, &item)| (item, (-((r + 1) as f64) / scale).exp()))
            .unzip();
        Ok(members[draw_weighted(&weights, rng)])
    }
}

fn draw_weighted(weights: &[f64], rng: &mut RngHandle) -> usize {
    let total: f64 = weights.iter().sum();
    let mut target = rng.uniform_f64() * total;
    for (i, &w) in weights.iter().enumerate() {
        if target < w {
            return i;
        }
        target -= w;
    }
    weights.len() - 1
}

/// Convenience wrapper building a [`StaticSampler`] for a single draw.
pub fn sample_static(
    popularity_rank: &[usize],
    rho: f64,
    pool: &NegativePool<'_>,
    rng: &mut RngHandle,
) -> Result<usize> {
    StaticSampler::new(popularity_rank, rho)?.sample_from(pool, rng)
}

/// `m` distinct uniform draws from the pool (fewer when the pool is smaller).
fn distinct_candidates(pool: &NegativePool<'_>, m: usize, rng: &mut RngHandle) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(Error::Sampling("negative pool is empty".into()));
    }
    let m = if m > pool.len() {
        debug!("dynamic sampler: shrinking m from {m} to pool size {}", pool.len());
        pool.len()
    } else {
        m
    };
    if 2 * m > pool.len() {
        let mut all = pool.to_vec();
        for i in 0..m {
            let j = i + rng.uniform_usize(all.len() - i);
            all.swap(i, j);
        }
        all.truncate(m);
        return Ok(all);
    }
    let mut picked: Vec<usize> = Vec::with_capacity(m);
    while picked.len() < m {
        let item = pool.sample(rng)?;
        if !picked.contains(&item) {
            picked.push(item);
        }
    }
    Ok(picked)
}

/// Score-aware draw: the model's current favourites among `m` uniform
/// candidates are the most likely negatives.
pub fn sample_dynamic<S: Scorer + ?Sized>(
    scorer: &S,
    user: usize,
    pool: &NegativePool<'_>,
    m: usize,
    rho: f64,
    rng: &mut RngHandle,
) -> Result<usize> {
    if m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::Config(format!("rho={rho} must lie in (0, 1]")));
    }
    let candidates = distinct_candidates(pool, m, rng)?;
    let m = candidates.len();
    let mut ranked: Vec<(f64, usize)> = candidates
        .into_iter()
        .map(|item| (scorer.score(user, item), item))
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let r = draw_geometric_rank(m, m as f64 * rho, rng);
    Ok(ranked[r].1)
}

/// `⌈(|I| − 1)/T⌉`, at least 1.
pub fn trial_rank_estimate(catalog_size: usize, trials: usize) -> usize {
    catalog_size.saturating_sub(1).div_ceil(trials.max(1)).max(1)
}

/// Margin-violation search. Returns the first uniform draw whose score is at
/// least `score(positive) − epsilon`, or the last draw once `max_trials`
/// draws have failed.
pub fn sample_rank_aware<S: Scorer + ?Sized>(
    scorer: &S,
    user: usize,
    positive: usize,
    pool: &NegativePool<'_>,
    epsilon: f64,
    max_trials: usize,
    rng: &mut RngHandle,
) -> Result<RankAwareDraw> {
    if max_trials == 0 {
        return Err(Error::Config("max_trials must be at least 1".into()));
    }
    let positive_score = scorer.score(user, positive);
    let mut trials = 0;
    let item = loop {
        let item = pool.sample(rng)?;
        trials += 1;
        if positive_score - scorer.score(user, item) <= epsilon || trials >= max_trials {
            break item;
        }
    };
    Ok(RankAwareDraw {
        item,
        trials,
        gamma_weight: trial_rank_estimate(pool.catalog_size(), trials) as f64,
    })
}

/// Normalized truncated harmonic sum `H(r + 1) / H(|I| + 1)`.
pub fn gamma_exact(rank: usize, catalog_size: usize) -> Result<f64> {
    if rank > catalog_size {
        return Err(Error::Shape(format!("rank {rank} exceeds catalog size {catalog_size}")));
    }
    if let Some(exact) = harmonic_ratio_exact(rank + 1, catalog_size + 1) {
        return Ok(exact);
    }
    let partial: f64 = (0..=rank).map(|s| 1.0 / (s + 1) as f64).sum();
    let total: f64 = partial + (rank + 1..=catalog_size).map(|s| 1.0 / (s + 1) as f64).sum::<f64>();
    Ok(partial / total)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `H(a)/H(b)` over a common denominator, rounded once; `None` when the
/// integers get too large for an exact `f64` quotient.
fn harmonic_ratio_exact(a: usize, b: usize) -> Option<f64> {
    const SMALL: usize = 64;
    if b > SMALL {
        return None;
    }
    let mut lcm: u128 = 1;
    for s in 2..=b as u128 {
        lcm = lcm.checked_mul(s / gcd(lcm, s))?;
    }
    let num: u128 = (1..=a as u128).map(|s| lcm / s).sum();
    let den: u128 = (1..=b as u128).map(|s| lcm / s).sum();
    let g = gcd(num, den);
    let (num, den) = (num / g, den / g);
    const EXACT: u128 = 1 << 53;
    (num <= EXACT && den <= EXACT).then(|| num as f64 / den as f64)
}
