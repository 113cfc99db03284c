//! Per-user ranking quality (AUC, NDCG) and dataset-level aggregates.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::rng::RngHandle;
use crate::scorer::Scorer;

/// Default number of sampled unobserved items added to each user's evaluation list.
pub const DEFAULT_EVAL_NEGATIVES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    Auc,
    /// NDCG over the top `cutoff` positions, or the whole list when `None`.
    Ndcg { cutoff: Option<usize> },
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Measure::Auc => write!(f, "auc"),
            Measure::Ndcg { cutoff: None } => write!(f, "ndcg"),
            Measure::Ndcg { cutoff: Some(k) } => write!(f, "ndcg@{k}"),
        }
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        match lower.as_str() {
            "auc" => Ok(Measure::Auc),
            "ndcg" => Ok(Measure::Ndcg { cutoff: None }),
            other => match other.strip_prefix("ndcg@") {
                Some(k) => match k.parse::<usize>() {
                    Ok(k) if k > 0 => Ok(Measure::Ndcg { cutoff: Some(k) }),
                    _ => Err(Error::Config(format!("invalid NDCG cutoff in {s:?}"))),
                },
                None => Err(Error::Config(format!("unknown metric {s:?} (expected auc, ndcg or ndcg@K)"))),
            },
        }
    }
}

/// Predictions and grades for one user's evaluation items.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub items: Vec<usize>,
    pub scores: Vec<f64>,
    pub grades: Vec<u32>,
}

impl RankedList {
    /// Items are numbered by position.
    pub fn new(scores: Vec<f64>, grades: Vec<u32>) -> Result<Self> {
        let items = (0..scores.len()).collect();
        RankedList::with_items(items, scores, grades)
    }

    pub fn with_items(items: Vec<usize>, scores: Vec<f64>, grades: Vec<u32>) -> Result<Self> {
        if items.len() != scores.len() || scores.len() != grades.len() {
            return Err(Error::Shape(format!(
                "ranked list lengths differ: {} items, {} scores, {} grades",
                items.len(),
                scores.len(),
                grades.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::Shape("ranked list contains a non-finite score".into()));
        }
        Ok(RankedList {
            items,
            scores,
            grades,
        })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

/// Fraction of strictly-ordered grade pairs the scores put in the right
/// order; score ties count one half. `None` when no pair has distinct grades.
pub fn user_auc(rl: &RankedList) -> Option<f64> {
    let n = rl.len();
    let mut levels: Vec<u32> = rl.grades.clone();
    levels.sort_unstable();
    levels.dedup();
    if levels.len() < 2 {
        return None;
    }
    let level_of = |g: u32| levels.binary_search(&g).unwrap();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rl.scores[a].total_cmp(&rl.scores[b]));

    // below[g] = items with grade level g and strictly smaller score than the current group
    let mut below = vec![0u64; levels.len()];
    let mut correct = 0u64;
    let mut ties = 0u64;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && rl.scores[order[end]] == rl.scores[order[start]] {
            end += 1;
        }
        let mut group = vec![0u64; levels.len()];
        for &idx in &order[start..end] {
            group[level_of(rl.grades[idx])] += 1;
        }
        let mut below_lower = 0u64;
        let mut group_lower = 0u64;
        for lvl in 0..levels.len() {
            correct += group[lvl] * below_lower;
            ties += group[lvl] * group_lower;
            below_lower += below[lvl];
            group_lower += group[lvl];
        }
        for lvl in 0..levels.len() {
            below[lvl] += group[lvl];
        }
        start = end;
    }

    let mut pairs = 0u64;
    let mut seen = 0u64;
    let mut counts = vec![0u64; levels.len()];
    for &g in &rl.grades {
        counts[level_of(g)] += 1;
    }
    for c in counts {
        pairs += c * seen;
        seen += c;
    }
    Some((2 * correct + ties) as f64 / (2 * pairs) as f64)
}

fn dcg(gains: impl Iterator<Item = u32>) -> f64 {
    gains
        .enumerate()
        .map(|(pos, g)| (2f64.powi(g as i32) - 1.0) / ((pos + 2) as f64).log2())
        .sum()
}

/// DCG/IDCG with gain `2^grade − 1` and discount `1/log₂(position + 1)`.
///
/// Score ties are ordered by ascending item id. `None` when no item has a
/// positive grade.
pub fn user_ndcg(rl: &RankedList, cutoff: Option<usize>) -> Option<f64> {
    if rl.grades.iter().all(|&g| g == 0) {
        return None;
    }
    let k = cutoff.unwrap_or(rl.len()).min(rl.len());
    let mut order: Vec<usize> = (0..rl.len()).collect();
    order.sort_by(|&a, &b| {
        rl.scores[b]
            .total_cmp(&rl.scores[a])
            .then(rl.items[a].cmp(&rl.items[b]))
    });
    let actual = dcg(order.iter().take(k).map(|&i| rl.grades[i]));
    let mut ideal_grades = rl.grades.clone();
    ideal_grades.sort_unstable_by(|a, b| b.cmp(a));
    let ideal = dcg(ideal_grades.into_iter().take(k));
    Some(actual / ideal)
}

pub fn user_measure(rl: &RankedList, measure: Measure) -> Option<f64> {
    match measure {
        Measure::Auc => user_auc(rl),
        Measure::Ndcg { cutoff } => user_ndcg(rl, cutoff),
    }
}

/// Per-user values of one measure; `None` marks users with no valid comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct PerUserPerformance {
    pub measure: Measure,
    pub values: Vec<Option<f64>>,
}

impl PerUserPerformance {
    pub fn defined(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }

    pub fn skipped(&self) -> usize {
        self.values.len() - self.defined()
    }

    /// Unweighted mean over defined users.
    pub fn mean(&self) -> Option<f64> {
        let defined: Vec<f64> = self.values.iter().flatten().copied().collect();
        if defined.is_empty() {
            None
        } else {
            Some(defined.iter().sum::<f64>() / defined.len() as f64)
        }
    }
}

/// `Σ p_a E_a` over users with a defined measure, renormalized over those users.
pub fn weighted_auc(per_user: &PerUserPerformance, weights: &[f64]) -> Result<f64> {
    weighted_mean(&per_user.values, weights)
}

pub fn weighted_mean(values: &[Option<f64>], weights: &[f64]) -> Result<f64> {
    if values.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{} weights for {} users",
            weights.len(),
            values.len()
        )));
    }
    let mut mass = 0.0;
    let mut total = 0.0;
    for (v, &p) in values.iter().zip(weights) {
        if let Some(e) = v {
            mass += p;
            total += p * e;
        }
    }
    if mass <= 0.0 {
        return Err(Error::Shape("no weight on users with a defined measure".into()));
    }
    Ok(total / mass)
}

/// Which unobserved items join each user's evaluation list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Candidates {
    /// This many distinct unobserved items per user, drawn uniformly.
    Sampled(usize),
    /// Every unobserved item.
    All,
}

/// Fixed per-user evaluation lists: the target items with their grades
/// plus grade-0 unobserved items.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSet {
    pub users: Vec<UserCandidates>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct UserCandidates {
    pub items: Vec<usize>,
    pub grades: Vec<u32>,
}

impl EvalSet {
    /// `exclude` lists datasets (sharing ids with `target`) whose items must
    /// not be drawn as unobserved negatives, e.g. the training split.
    pub fn build(
        target: &InteractionDataset,
        exclude: &[&InteractionDataset],
        candidates: Candidates,
        seed: u64,
    ) -> EvalSet {
        let n_items = target.n_items();
        let users = (0..target.n_users())
            .map(|u| {
                let mut seen: HashSet<usize> = target.user_items(u).iter().map(|&(i, _)| i).collect();
                for other in exclude {
                    if u < other.n_users() {
                        seen.extend(other.user_items(u).iter().map(|&(i, _)| i));
                    }
                }
                let mut items: Vec<usize> = target.user_items(u).iter().map(|&(i, _)| i).collect();
                let mut grades: Vec<u32> = target.user_items(u).iter().map(|&(_, g)| g).collect();
                if items.is_empty() {
                    return UserCandidates::default();
                }
                let available = n_items - seen.len().min(n_items);
                let negatives = match candidates {
                    Candidates::All => (0..n_items).filter(|i| !seen.contains(i)).collect(),
                    Candidates::Sampled(n) if n >= available => {
                        (0..n_items).filter(|i| !seen.contains(i)).collect()
                    }
                    Candidates::Sampled(n) => {
                        let mut rng = RngHandle::derive(seed, u as u64);
                        let mut picked = Vec::with_capacity(n);
                        while picked.len() < n {
                            let i = rng.uniform_usize(n_items);
                            if seen.insert(i) {
                                picked.push(i);
                            }
                        }
                        picked
                    }
                };
                grades.extend(std::iter::repeat_n(0, negatives.len()));
                items.extend(negatives);
                UserCandidates { items, grades }
            })
            .collect();
        EvalSet { users }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn scores<S: Scorer + ?Sized>(&self, scorer: &S) -> Vec<Vec<f64>> {
        self.users
            .iter()
            .enumerate()
            .map(|(u, c)| c.items.iter().map(|&i| scorer.score(u, i)).collect())
            .collect()
    }

    /// Per-user measure from precomputed score lists aligned with `users`.
    pub fn performance(&self, scores: &[Vec<f64>], measure: Measure) -> Result<PerUserPerformance> {
        if scores.len() != self.users.len() {
            return Err(Error::Shape(format!(
                "{} score lists for {} users",
                scores.len(),
                self.users.len()
            )));
        }
        let values = self
            .users
            .iter()
            .zip(scores)
            .map(|(c, s)| {
                if c.items.is_empty() {
                    return Ok(None);
                }
                let rl = RankedList::with_items(c.items.clone(), s.clone(), c.grades.clone())?;
                Ok(user_measure(&rl, measure))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PerUserPerformance { measure, values })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub aggregate: f64,
    pub per_user: PerUserPerformance,
}

impl Evaluation {
    pub fn skipped(&self) -> usize {
        self.per_user.skipped()
    }

    /// `metric=<name> value=<decimal> users=<int> skipped=<int>`
    pub fn report_line(&self) -> String {
        format!(
            "metric={} value={:.6} users={} skipped={}",
            self.per_user.measure,
            self.aggregate,
            self.per_user.defined(),
            self.per_user.skipped()
        )
    }

    /// `user,E` rows for users with a defined measure.
    pub fn per_user_csv(&self, user_tokens: &[String]) -> String {
        let mut out = String::from("user,E\n");
        for (u, v) in self.per_user.values.iter().enumerate() {
            if let Some(e) = v {
                out.push_str(&format!("{},{e:.6}\n", user_tokens[u]));
            }
        }
        out
    }
}

/// Scores every evaluation list and aggregates with `weights` (uniform when absent).
pub fn evaluate_model<S: Scorer + ?Sized>(
    scorer: &S,
    eval: &EvalSet,
    measure: Measure,
    weights: Option<&[f64]>,
) -> Result<Evaluation> {
    let per_user = eval.performance(&eval.scores(scorer), measure)?;
    aggregate(per_user, weights)
}

pub fn aggregate(per_user: PerUserPerformance, weights: Option<&[f64]>) -> Result<Evaluation> {
    let aggregate = match weights {
        Some(w) => weighted_mean(&per_user.values, w)?,
        None => per_user
            .mean()
            .ok_or_else(|| Error::EmptyDataset("no user has a defined measure".into()))?,
    };
    Ok(Evaluation { aggregate, per_user })
}
