//! Second-order factorization machine.
//!
//! A model of rank `k` over `d` features holds linear weights `w` and a
//! `d × k` factor matrix `V`. Its score for `x` is the linear term plus
//! every pairwise interaction `x_l x_m` weighted by `<v_l, v_m>`, with
//! `l < m`. There is no global bias.

use crate::error::{Error, Result};
use crate::rng::RngHandle;
use crate::sparse::SparseVector;

/// Standard deviation of the Gaussian used for factor initialization.
pub const INIT_STD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct FmParams {
    d: usize,
    k: usize,
    w: Vec<f64>,
    // row-major d × k
    v: Vec<f64>,
}

/// A single parameter coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coord {
    Linear(usize),
    Factor(usize, usize),
}

impl FmParams {
    pub fn zeros(d: usize, k: usize) -> Result<Self> {
        check_rank(d, k)?;
        Ok(FmParams {
            d,
            k,
            w: vec![0.0; d],
            v: vec![0.0; d * k],
        })
    }

    /// `v` is the factor matrix in row-major order.
    pub fn from_parts(d: usize, k: usize, w: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if k == 0 {
            return Err(Error::Config("rank must be at least 1".into()));
        }
        if w.len() != d || v.len() != d * k {
            return Err(Error::Shape(format!(
                "expected w of length {d} and V of {d}x{k}, got {} and {}",
                w.len(),
                v.len()
            )));
        }
        if w.iter().chain(v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Shape("parameters must be finite".into()));
        }
        Ok(FmParams { d, k, w, v })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn rank(&self) -> usize {
        self.k
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    pub fn w_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn v_row(&self, l: usize) -> &[f64] {
        &self.v[l * self.k..(l + 1) * self.k]
    }

    pub fn v_row_mut(&mut self, l: usize) -> &mut [f64] {
        &mut self.v[l * self.k..(l + 1) * self.k]
    }

    pub fn get(&self, coord: Coord) -> f64 {
        match coord {
            Coord::Linear(l) => self.w[l],
            Coord::Factor(l, m) => self.v[l * self.k + m],
        }
    }

    pub fn set(&mut self, coord: Coord, value: f64) {
        match coord {
            Coord::Linear(l) => self.w[l] = value,
            Coord::Factor(l, m) => self.v[l * self.k + m] = value,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(self.v.iter()).all(|x| x.is_finite())
    }

    /// Squared norm `‖w‖² + ‖V‖²_F`.
    pub fn squared_norm(&self) -> f64 {
        self.w.iter().chain(self.v.iter()).map(|x| x * x).sum()
    }

    fn check_input(&self, x: &SparseVector) -> Result<()> {
        if x.dim() != self.d {
            return Err(Error::Shape(format!(
                "input has dimension {}, model expects {}",
                x.dim(),
                self.d
            )));
        }
        Ok(())
    }

    /// Explicit double loop over the nonzero entries of `x`.
    pub fn predict_naive(&self, x: &SparseVector) -> Result<f64> {
        self.check_input(x)?;
        let entries = x.entries();
        let mut score = 0.0;
        for &(l, xl) in entries {
            score += self.w[l] * xl;
        }
        for (a, &(l, xl)) in entries.iter().enumerate() {
            for &(m, xm) in &entries[a + 1..] {
                let dot: f64 = self
                    .v_row(l)
                    .iter()
                    .zip(self.v_row(m))
                    .map(|(p, q)| p * q)
                    .sum();
                score += dot * xl * xm;
            }
        }
        Ok(score)
    }

    /// `w·x + ½(‖Vᵀx‖² − Σ_s ‖v_s ∘ x‖²)` in `O(k · nnz(x))`.
    pub fn predict_fast(&self, x: &SparseVector) -> Result<f64> {
        self.check_input(x)?;
        Ok(self.predict_fast_unchecked(x, &mut vec![0.0; self.k]))
    }

    /// Same as [`predict_fast`](Self::predict_fast); fills `sums` with `Vᵀx`.
    pub(crate) fn predict_fast_unchecked(&self, x: &SparseVector, sums: &mut [f64]) -> f64 {
        sums.iter_mut().for_each(|s| *s = 0.0);
        let mut linear = 0.0;
        let mut squares = 0.0;
        for (l, xl) in x.iter() {
            linear += self.w[l] * xl;
            for (s, &vlm) in sums.iter_mut().zip(self.v_row(l)) {
                let t = vlm * xl;
                *s += t;
                squares += t * t;
            }
        }
        let total: f64 = sums.iter().map(|s| s * s).sum();
        linear + 0.5 * (total - squares)
    }

    /// Score of a two-hot vector with unit values at features `a != b`.
    pub fn score_pair(&self, a: usize, b: usize) -> f64 {
        let dot: f64 = self
            .v_row(a)
            .iter()
            .zip(self.v_row(b))
            .map(|(p, q)| p * q)
            .sum();
        self.w[a] + self.w[b] + dot
    }

    /// Derivative of the score with respect to one coordinate.
    pub fn partial_score(&self, x: &SparseVector, coord: Coord) -> Result<f64> {
        self.check_input(x)?;
        match coord {
            Coord::Linear(l) if l < self.d => Ok(x.get(l)),
            Coord::Factor(l, m) if l < self.d && m < self.k => {
                let xl = x.get(l);
                if xl == 0.0 {
                    return Ok(0.0);
                }
                let column: f64 = x.iter().map(|(r, xr)| self.v[r * self.k + m] * xr).sum();
                Ok(xl * column - self.v[l * self.k + m] * xl * xl)
            }
            _ => Err(Error::Shape(format!(
                "coordinate {coord:?} outside d={} k={}",
                self.d, self.k
            ))),
        }
    }
}

fn check_rank(d: usize, k: usize) -> Result<()> {
    if k == 0 || k > d {
        return Err(Error::Config(format!("rank k={k} must satisfy 1 <= k <= d={d}")));
    }
    Ok(())
}

/// Zero linear weights, factors drawn i.i.d. from N(0, 0.1²).
pub fn init_params(d: usize, k: usize, rng: &mut RngHandle) -> Result<FmParams> {
    check_rank(d, k)?;
    let v = (0..d * k).map(|_| rng.gaussian(0.0, INIT_STD)).collect();
    Ok(FmParams {
        d,
        k,
        w: vec![0.0; d],
        v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn example_params() -> FmParams {
        FmParams::from_parts(3, 1, vec![0.5, -0.2, 0.3], vec![1.0, 2.0, 3.0]).unwrap()
    }

    #[test]
    fn zero_model_scores_zero() {
        let p = FmParams::zeros(4, 2).unwrap();
        let x = SparseVector::new(4, vec![(0, 1.0), (2, 3.0), (3, -1.0)]).unwrap();
        assert_eq!(p.predict_naive(&x).unwrap(), 0.0);
        assert_eq!(p.predict_fast(&x).unwrap(), 0.0);
    }

    #[test]
    fn hand_example() {
        let p = example_params();
        let x = SparseVector::new(3, vec![(0, 1.0), (1, 1.0)]).unwrap();
        // 0.5 - 0.2 + (1*2)*1*1
        assert!((p.predict_naive(&x).unwrap() - 2.3).abs() < 1e-15);
        assert!((p.predict_fast(&x).unwrap() - 2.3).abs() < 1e-15);
        assert!((p.score_pair(0, 1) - 2.3).abs() < 1e-15);
    }

    #[test]
    fn single_entry_has_no_interaction() {
        let p = example_params();
        let x = SparseVector::new(3, vec![(2, 2.0)]).unwrap();
        assert_eq!(p.predict_naive(&x).unwrap(), 0.6);
        assert!((p.predict_fast(&x).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn identity_factors_cancel_self_interaction() {
        let d = 3;
        let mut v = vec![0.0; d * d];
        for i in 0..d {
            v[i * d + i] = 1.0;
        }
        let p = FmParams::from_parts(d, d, vec![0.7, -1.1, 2.0], v).unwrap();
        for l in 0..d {
            let x = SparseVector::new(d, vec![(l, 1.0)]).unwrap();
            assert_eq!(p.predict_fast(&x).unwrap(), p.w()[l]);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = example_params();
        let x = SparseVector::new(4, vec![(0, 1.0)]).unwrap();
        assert!(matches!(p.predict_naive(&x), Err(Error::Shape(_))));
        assert!(matches!(p.predict_fast(&x), Err(Error::Shape(_))));
        let x = SparseVector::new(3, vec![(0, 1.0)]).unwrap();
        assert!(p.partial_score(&x, Coord::Factor(0, 1)).is_err());
        assert!(p.partial_score(&x, Coord::Linear(3)).is_err());
    }

    #[test]
    fn partial_score_examples() {
        let p = FmParams::from_parts(2, 1, vec![0.0, 0.0], vec![3.0, 4.0]).unwrap();
        let x = SparseVector::new(2, vec![(0, 1.0), (1, 1.0)]).unwrap();
        assert_eq!(p.partial_score(&x, Coord::Linear(0)).unwrap(), 1.0);
        assert_eq!(p.partial_score(&x, Coord::Factor(0, 0)).unwrap(), 4.0);
        let x = SparseVector::new(2, vec![(1, 1.0)]).unwrap();
        assert_eq!(p.partial_score(&x, Coord::Factor(0, 0)).unwrap(), 0.0);
    }

    #[test]
    fn init_zero_linear_and_deterministic() {
        let a = init_params(30, 4, &mut RngHandle::new(11)).unwrap();
        let b = init_params(30, 4, &mut RngHandle::new(11)).unwrap();
        assert!(a.w().iter().all(|&w| w == 0.0));
        assert_eq!(a, b);
        assert!(init_params(3, 4, &mut RngHandle::new(1)).is_err());
        assert!(init_params(3, 0, &mut RngHandle::new(1)).is_err());
    }

    #[test]
    fn init_moments() {
        let p = init_params(10_000, 10, &mut RngHandle::new(2024)).unwrap();
        let n = p.v().len() as f64;
        let mean = p.v().iter().sum::<f64>() / n;
        let var = p.v().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(mean.abs() < 0.002, "mean {mean}");
        assert!((var.sqrt() - INIT_STD).abs() < 0.002, "std {}", var.sqrt());
    }

    fn sparse_input(d: usize) -> impl Strategy<Value = SparseVector> {
        proptest::collection::btree_map(0..d, -3.0f64..3.0, 1..=d.min(12))
            .prop_map(move |m| SparseVector::new(d, m.into_iter().collect()).unwrap())
    }

    fn params_and_input() -> impl Strategy<Value = (FmParams, SparseVector)> {
        (2usize..20, 1usize..5).prop_flat_map(|(d, k)| {
            let k = k.min(d);
            (
                proptest::collection::vec(-1.0f64..1.0, d),
                proptest::collection::vec(-1.0f64..1.0, d * k),
                sparse_input(d),
            )
                .prop_map(move |(w, v, x)| (FmParams::from_parts(d, k, w, v).unwrap(), x))
        })
    }

    proptest! {
        #[test]
        fn naive_and_fast_agree((p, x) in params_and_input()) {
            let naive = p.predict_naive(&x).unwrap();
            let fast = p.predict_fast(&x).unwrap();
            prop_assert!((naive - fast).abs() <= 1e-9 * (1.0 + naive.abs()));
        }

        #[test]
        fn partial_matches_central_difference((p, x) in params_and_input(), pick in 0usize..1000) {
            let coords: Vec<Coord> = x
                .iter()
                .flat_map(|(l, _)| {
                    std::iter::once(Coord::Linear(l)).chain((0..p.rank()).map(move |m| Coord::Factor(l, m)))
                })
                .collect();
            let coord = coords[pick % coords.len()];
            let h = 1e-5;
            let mut plus = p.clone();
            plus.set(coord, p.get(coord) + h);
            let mut minus = p.clone();
            minus.set(coord, p.get(coord) - h);
            let fd = (plus.predict_naive(&x).unwrap() - minus.predict_naive(&x).unwrap()) / (2.0 * h);
            let analytic = p.partial_score(&x, coord).unwrap();
            prop_assert!((fd - analytic).abs() <= 1e-4 * analytic.abs().max(1.0), "fd {} analytic {}", fd, analytic);
        }
    }
}
