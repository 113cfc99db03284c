use adafm::dataset::{popularity_rank_from_counts, NegativePool};
use adafm::samplers::{gamma_exact, sample_dynamic, sample_rank_aware, StaticSampler};
use adafm::{InteractionDataset, RngHandle};
use proptest::prelude::*;

const DRAWS: usize = 100_000;

fn empty_user(n_items: usize) -> InteractionDataset {
    InteractionDataset::from_lists(1, n_items, vec![vec![]]).unwrap()
}

fn max_abs_dev(freq: &[f64], expected: &[f64]) -> f64 {
    freq.iter().zip(expected).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn rank_weights(n: usize, scale: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=n).map(|r| (-(r as f64) / scale).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Probability that the item at global score rank `g` (0 = best) is returned
/// when `m` of `n` candidates are drawn uniformly and ranked.
fn dynamic_probability(n: usize, m: usize, g: usize, rho: f64) -> f64 {
    let p_rank = rank_weights(m, m as f64 * rho);
    let within = binomial(n - 1, m - 1);
    let mut total = 0.0;
    for (h, p) in p_rank.iter().enumerate() {
        let ways = binomial(g, h) * binomial(n - 1 - g, m - 1 - h);
        total += ways / within * p;
    }
    total * m as f64 / n as f64
}

#[test]
fn static_matches_analytic_rank_law() {
    for n in [2usize, 10, 100] {
        for rho in [0.1, 0.3, 1.0] {
            // popularity ranks scrambled so item id and rank differ
            let counts: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % (2 * n) + 1).collect();
            let ranks = popularity_rank_from_counts(&counts);
            let sampler = StaticSampler::new(&ranks, rho).unwrap();
            let ds = empty_user(n);
            let pool = NegativePool::new(&ds, 0, 1);
            let mut rng = RngHandle::new(n as u64 * 1000 + (rho * 10.0) as u64);
            let mut counts_out = vec![0usize; n];
            for _ in 0..DRAWS {
                counts_out[sampler.sample_from(&pool, &mut rng).unwrap()] += 1;
            }
            let freq: Vec<f64> = counts_out.iter().map(|&c| c as f64 / DRAWS as f64).collect();
            let by_rank = rank_weights(n, n as f64 * rho);
            let expected: Vec<f64> = (0..n).map(|i| by_rank[ranks[i]]).collect();
            let dev = max_abs_dev(&freq, &expected);
            assert!(dev < 0.01, "n={n} rho={rho} deviation {dev}");
        }
    }
}

#[test]
fn dynamic_matches_hypergeometric_oracle() {
    for n in [2usize, 10, 100] {
        let m = n.min(10);
        let rho = 0.3;
        // scores strictly decreasing in a scrambled order
        let order: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % n).collect();
        let mut score = vec![0.0; n];
        for (g, &item) in order.iter().enumerate() {
            score[item] = -(g as f64);
        }
        if n == 2 {
            score = vec![0.0, 1.0];
        }
        let scorer = |_: usize, i: usize| score[i];
        let mut by_score: Vec<usize> = (0..n).collect();
        by_score.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
        let ds = empty_user(n);
        let pool = NegativePool::new(&ds, 0, 1);
        let mut rng = RngHandle::new(7 + n as u64);
        let mut counts = vec![0usize; n];
        for _ in 0..DRAWS {
            counts[sample_dynamic(&scorer, 0, &pool, m, rho, &mut rng).unwrap()] += 1;
        }
        let freq: Vec<f64> = counts.iter().map(|&c| c as f64 / DRAWS as f64).collect();
        let mut expected = vec![0.0; n];
        for (g, &item) in by_score.iter().enumerate() {
            expected[item] = dynamic_probability(n, m, g, rho);
        }
        assert!((expected.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let dev = max_abs_dev(&freq, &expected);
        assert!(dev < 0.01, "n={n} deviation {dev}");
    }
}

#[test]
fn gamma_exact_is_twelve_over_twenty_five() {
    // H(1)/H(4) = 1 / (25/12)
    assert_eq!(gamma_exact(0, 3).unwrap(), 12.0 / 25.0);
    assert!((gamma_exact(0, 3).unwrap() - 0.48).abs() < 1e-15);
    assert_eq!(gamma_exact(3, 3).unwrap(), 1.0);
}

#[test]
fn infinite_margin_stops_after_one_trial() {
    let ds = InteractionDataset::from_lists(1, 50, vec![vec![(4, 1), (9, 1)]]).unwrap();
    let pool = NegativePool::new(&ds, 0, 1);
    let scorer = |_: usize, i: usize| -(i as f64);
    let mut rng = RngHandle::new(3);
    for _ in 0..1000 {
        let d = sample_rank_aware(&scorer, 0, 4, &pool, f64::INFINITY, 50, &mut rng).unwrap();
        assert_eq!(d.trials, 1);
        assert_eq!(d.gamma_weight, 49.0);
    }
}

proptest! {
    #[test]
    fn rank_aware_never_returns_an_observed_positive(
        n_items in 2usize..40,
        picks in proptest::collection::vec(0usize..40, 1..10),
        eps in 0.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let mut items: Vec<usize> = picks.into_iter().map(|i| i % n_items).collect();
        items.sort_unstable();
        items.dedup();
        prop_assume!(items.len() < n_items);
        let list = items.iter().map(|&i| (i, 1)).collect();
        let ds = InteractionDataset::from_lists(1, n_items, vec![list]).unwrap();
        let pool = NegativePool::new(&ds, 0, 1);
        let scorer = |_: usize, i: usize| ((i * 31) % 17) as f64 * 0.1;
        let mut rng = RngHandle::new(seed);
        for _ in 0..50 {
            let d = sample_rank_aware(&scorer, 0, items[0], &pool, eps, n_items, &mut rng).unwrap();
            prop_assert!(ds.grade_of(0, d.item).is_none());
            prop_assert!(d.trials >= 1 && d.trials <= n_items);
        }
    }

    #[test]
    fn static_and_dynamic_stay_in_pool(
        n_items in 2usize..30,
        picks in proptest::collection::vec(0usize..30, 0..8),
        seed in any::<u64>(),
    ) {
        let mut items: Vec<usize> = picks.into_iter().map(|i| i % n_items).collect();
        items.sort_unstable();
        items.dedup();
        prop_assume!(items.len() < n_items);
        let list = items.iter().map(|&i| (i, 1)).collect();
        let ds = InteractionDataset::from_lists(1, n_items, vec![list]).unwrap();
        let pool = NegativePool::new(&ds, 0, 1);
        let ranks: Vec<usize> = (0..n_items).collect();
        let sampler = StaticSampler::new(&ranks, 0.2).unwrap();
        let scorer = |_: usize, i: usize| i as f64;
        let mut rng = RngHandle::new(seed);
        for _ in 0..50 {
            prop_assert!(ds.grade_of(0, sampler.sample_from(&pool, &mut rng).unwrap()).is_none());
            prop_assert!(ds.grade_of(0, sample_dynamic(&scorer, 0, &pool, 5, 0.3, &mut rng).unwrap()).is_none());
        }
    }
}
