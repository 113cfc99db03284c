//! Weighted sums of factorization machines.
//!
//! A positive combination `Σ α_t h_t` of rank-`k` models is itself a
//! factorization machine of rank `k·T`: linear weights add up as
//! `Σ α_t w_t` and the factor blocks are stacked side by side, each scaled
//! by `√α_t`, so every pairwise weight becomes `Σ α_t <v_tl, v_tm>`.

use crate::error::{Error, Result};
use crate::fm::FmParams;
use crate::sparse::SparseVector;

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub alpha: f64,
    pub params: FmParams,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EnsembleModel {
    components: Vec<Component>,
}

impl EnsembleModel {
    pub fn new() -> Self {
        EnsembleModel::default()
    }

    /// Wraps a single model with weight 1.
    pub fn single(params: FmParams) -> Self {
        EnsembleModel {
            components: vec![Component { alpha: 1.0, params }],
        }
    }

    pub fn from_components(components: Vec<Component>) -> Result<Self> {
        let mut e = EnsembleModel::new();
        for c in components {
            e.push(c.alpha, c.params)?;
        }
        Ok(e)
    }

    pub fn push(&mut self, alpha: f64, params: FmParams) -> Result<()> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Merge(format!("component weight {alpha} must be positive and finite")));
        }
        if let Some(first) = self.components.first() {
            if first.params.dim() != params.dim() || first.params.rank() != params.rank() {
                return Err(Error::Merge(format!(
                    "component with d={} k={} does not match d={} k={}",
                    params.dim(),
                    params.rank(),
                    first.params.dim(),
                    first.params.rank()
                )));
            }
        }
        self.components.push(Component { alpha, params });
        Ok(())
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.components.first().map(|c| c.params.dim())
    }

    pub fn component_rank(&self) -> Option<usize> {
        self.components.first().map(|c| c.params.rank())
    }

    /// The first `t` components.
    pub fn prefix(&self, t: usize) -> EnsembleModel {
        EnsembleModel {
            components: self.components[..t.min(self.components.len())].to_vec(),
        }
    }

    pub fn predict(&self, x: &SparseVector) -> Result<f64> {
        ensemble_predict(self, x)
    }

    /// `Σ α_t h_t` on a user/item two-hot vector given as feature indices.
    pub fn score_pair(&self, a: usize, b: usize) -> f64 {
        self.components
            .iter()
            .map(|c| c.alpha * c.params.score_pair(a, b))
            .sum()
    }

    pub fn merge(&self) -> Result<FmParams> {
        merge_ensemble(self)
    }
}

pub fn ensemble_predict(e: &EnsembleModel, x: &SparseVector) -> Result<f64> {
    let mut total = 0.0;
    for c in &e.components {
        total += c.alpha * c.params.predict_fast(x)?;
    }
    Ok(total)
}

/// Collapses the ensemble into one model of rank `k·T`.
pub fn merge_ensemble(e: &EnsembleModel) -> Result<FmParams> {
    let first = e
        .components
        .first()
        .ok_or_else(|| Error::Merge("ensemble has no components".into()))?;
    let d = first.params.dim();
    let k = first.params.rank();
    let t = e.components.len();
    let wide = k * t;
    let mut w = vec![0.0; d];
    let mut v = vec![0.0; d * wide];
    for (block, c) in e.components.iter().enumerate() {
        if !(c.alpha > 0.0) {
            return Err(Error::Merge(format!("component {block} has weight {}", c.alpha)));
        }
        if c.params.dim() != d || c.params.rank() != k {
            return Err(Error::Merge(format!("component {block} has mismatched shape")));
        }
        let scale = c.alpha.sqrt();
        for (acc, wl) in w.iter_mut().zip(c.params.w()) {
            *acc += c.alpha * wl;
        }
        for l in 0..d {
            let dst = &mut v[l * wide + block * k..l * wide + (block + 1) * k];
            for (out, &vlm) in dst.iter_mut().zip(c.params.v_row(l)) {
                *out = scale * vlm;
            }
        }
    }
    FmParams::from_parts(d, wide, w, v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fm::init_params;
    use crate::rng::RngHandle;

    fn random_params(d: usize, k: usize, seed: u64) -> FmParams {
        let mut rng = RngHandle::new(seed);
        let mut p = init_params(d, k, &mut rng).unwrap();
        for w in p.w_mut() {
            *w = rng.gaussian(0.0, 0.5);
        }
        p
    }

    #[test]
    fn identity_merge() {
        let p = random_params(6, 2, 1);
        let merged = EnsembleModel::single(p.clone()).merge().unwrap();
        assert_eq!(merged, p);
    }

    #[test]
    fn sqrt_alpha_scaling() {
        let p = random_params(5, 3, 2);
        let mut e = EnsembleModel::new();
        e.push(4.0, p.clone()).unwrap();
        let merged = e.merge().unwrap();
        for (m, o) in merged.w().iter().zip(p.w()) {
            assert_eq!(*m, 4.0 * o);
        }
        for (m, o) in merged.v().iter().zip(p.v()) {
            assert_eq!(*m, 2.0 * o);
        }
    }

    #[test]
    fn two_components_match_weighted_sum() {
        let mut e = EnsembleModel::new();
        e.push(0.7, random_params(8, 2, 3)).unwrap();
        e.push(1.9, random_params(8, 2, 4)).unwrap();
        let merged = e.merge().unwrap();
        assert_eq!(merged.rank(), 4);
        let mut rng = RngHandle::new(5);
        for _ in 0..50 {
            let mut entries = Vec::new();
            for i in 0..8 {
                if rng.uniform_f64() < 0.5 {
                    entries.push((i, rng.gaussian(0.0, 1.0)));
                }
            }
            let x = SparseVector::new(8, entries).unwrap();
            let direct = e.components()[0].alpha * e.components()[0].params.predict_naive(&x).unwrap()
                + e.components()[1].alpha * e.components()[1].params.predict_naive(&x).unwrap();
            let via_merge = merged.predict_fast(&x).unwrap();
            assert!((direct - via_merge).abs() <= 1e-9 * (1.0 + direct.abs()));
            assert!((e.predict(&x).unwrap() - via_merge).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
    }

    #[test]
    fn zero_components_predict_zero() {
        let mut e = EnsembleModel::new();
        e.push(1.5, FmParams::zeros(4, 2).unwrap()).unwrap();
        e.push(0.5, FmParams::zeros(4, 2).unwrap()).unwrap();
        let x = SparseVector::new(4, vec![(0, 1.0), (3, 1.0)]).unwrap();
        assert_eq!(e.predict(&x).unwrap(), 0.0);
    }

    #[test]
    fn merge_errors() {
        assert!(matches!(EnsembleModel::new().merge(), Err(Error::Merge(_))));
        let mut e = EnsembleModel::new();
        assert!(e.push(0.0, FmParams::zeros(3, 1).unwrap()).is_err());
        assert!(e.push(-1.0, FmParams::zeros(3, 1).unwrap()).is_err());
        e.push(1.0, FmParams::zeros(3, 1).unwrap()).unwrap();
        assert!(e.push(1.0, FmParams::zeros(3, 2).unwrap()).is_err());
        assert!(e.push(1.0, FmParams::zeros(4, 1).unwrap()).is_err());
    }

    #[test]
    fn score_pair_matches_predict() {
        let mut e = EnsembleModel::new();
        e.push(0.3, random_params(7, 2, 8)).unwrap();
        e.push(1.2, random_params(7, 2, 9)).unwrap();
        let x = SparseVector::new(7, vec![(1, 1.0), (5, 1.0)]).unwrap();
        assert!((e.score_pair(1, 5) - e.predict(&x).unwrap()).abs() < 1e-12);
    }
}
