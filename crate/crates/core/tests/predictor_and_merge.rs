use adafm::{EnsembleModel, FmParams, RngHandle, SparseVector};
use nalgebra::DMatrix;

fn random_params(rng: &mut RngHandle, d: usize, k: usize) -> FmParams {
    let w = (0..d).map(|_| rng.gaussian(0.0, 1.0)).collect();
    let v = (0..d * k).map(|_| rng.gaussian(0.0, 1.0)).collect();
    FmParams::from_parts(d, k, w, v).unwrap()
}

fn random_input(rng: &mut RngHandle, d: usize, max_nnz: usize) -> SparseVector {
    let nnz = 1 + rng.uniform_usize(max_nnz.min(d));
    let mut idx: Vec<usize> = (0..d).collect();
    rng.shuffle(&mut idx);
    let entries = idx[..nnz].iter().map(|&l| (l, rng.gaussian(0.0, 1.0))).collect();
    SparseVector::from_unsorted(d, entries).unwrap()
}

fn gram(p: &FmParams) -> DMatrix<f64> {
    let v = DMatrix::from_row_slice(p.dim(), p.rank(), p.v());
    &v * v.transpose()
}

#[test]
fn naive_and_fast_predictors_agree() {
    let mut rng = RngHandle::new(1);
    for _ in 0..1000 {
        let d = 1 + rng.uniform_usize(200);
        let k = 1 + rng.uniform_usize(16);
        let p = random_params(&mut rng, d, k);
        let x = random_input(&mut rng, d, 30);
        let naive = p.predict_naive(&x).unwrap();
        let fast = p.predict_fast(&x).unwrap();
        assert!((naive - fast).abs() <= 1e-9 * naive.abs().max(1.0), "{naive} vs {fast}");
    }
}

#[test]
fn merged_model_equals_weighted_sum() {
    let mut rng = RngHandle::new(2);
    for _ in 0..1000 {
        let d = 2 + rng.uniform_usize(40);
        let k = 1 + rng.uniform_usize(4);
        let t = 1 + rng.uniform_usize(6);
        let mut e = EnsembleModel::new();
        for _ in 0..t {
            e.push(0.05 + 2.0 * rng.uniform_f64(), random_params(&mut rng, d, k)).unwrap();
        }
        let merged = e.merge().unwrap();
        assert_eq!(merged.rank(), k * t);
        let x = random_input(&mut rng, d, 10);
        let sum: f64 = e
            .components()
            .iter()
            .map(|c| c.alpha * c.params.predict_naive(&x).unwrap())
            .sum();
        let got = merged.predict_fast(&x).unwrap();
        assert!((sum - got).abs() <= 1e-9 * (1.0 + sum.abs()));
    }
}

#[test]
fn merged_interactions_are_psd_with_bounded_rank() {
    let mut rng = RngHandle::new(3);
    for _ in 0..50 {
        let d = 12;
        let (k, t) = (2, 1 + rng.uniform_usize(4));
        let mut e = EnsembleModel::new();
        for _ in 0..t {
            e.push(0.1 + rng.uniform_f64(), random_params(&mut rng, d, k)).unwrap();
        }
        let merged = e.merge().unwrap();
        let g = gram(&merged);
        let summed = e
            .components()
            .iter()
            .fold(DMatrix::zeros(d, d), |acc, c| acc + gram(&c.params) * c.alpha);
        assert!((&g - &summed).amax() <= 1e-10 * (1.0 + summed.amax()));
        let eig = g.symmetric_eigen().eigenvalues;
        let scale = eig.amax();
        assert!(eig.iter().all(|&l| l >= -1e-9 * scale));
        let positive = eig.iter().filter(|&&l| l > 1e-9 * scale).count();
        assert!(positive <= k * t);
    }
}
