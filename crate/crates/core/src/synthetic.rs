//! Seeded synthetic implicit-feedback data with a planted low-rank preference structure.

use crate::dataset::InteractionDataset;
use crate::error::{Error, Result};
use crate::rng::RngHandle;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantedConfig {
    pub n_users: usize,
    pub n_items: usize,
    /// Rank of the planted user/item affinity matrix.
    pub rank: usize,
    /// Per-user interaction counts are uniform in `[min_per_user, max_per_user]`.
    pub min_per_user: usize,
    pub max_per_user: usize,
    /// Scale of the affinity term in the choice logits.
    pub signal: f64,
    /// Standard deviation of the per-item popularity offset.
    pub popularity: f64,
    /// Latent factor `j` has scale `spectrum_decay^j`; 1 gives an isotropic spectrum.
    pub spectrum_decay: f64,
    pub seed: u64,
}

impl PlantedConfig {
    /// 500 users × 300 items with a rank-6 affinity structure.
    pub fn desk_scale(seed: u64) -> Self {
        PlantedConfig {
            n_users: 500,
            n_items: 300,
            rank: 6,
            min_per_user: 20,
            max_per_user: 60,
            signal: 2.0,
            popularity: 1.0,
            spectrum_decay: 1.0,
            seed,
        }
    }

    /// Same shape as MovieLens-100K: 943 users, 1682 items, ~100k entries,
    /// long-tailed item popularity.
    pub fn movielens_100k_shape(seed: u64) -> Self {
        PlantedConfig {
            n_users: 943,
            n_items: 1682,
            rank: 10,
            min_per_user: 20,
            max_per_user: 192,
            signal: 2.0,
            popularity: 1.5,
            spectrum_decay: 1.0,
            seed,
        }
    }
}

/// Each user picks distinct items with probability `∝ exp(signal·<u, v_i> + b_i)`
/// (Gumbel top-k), all interactions grade 1.
pub fn planted_low_rank(cfg: &PlantedConfig) -> Result<InteractionDataset> {
    if cfg.rank == 0 || cfg.n_users == 0 || cfg.n_items == 0 {
        return Err(Error::Config("synthetic data needs users, items and rank >= 1".into()));
    }
    if cfg.min_per_user == 0 || cfg.min_per_user > cfg.max_per_user || cfg.max_per_user > cfg.n_items {
        return Err(Error::Config(format!(
            "per-user counts [{}, {}] must be non-empty and at most n_items={}",
            cfg.min_per_user, cfg.max_per_user, cfg.n_items
        )));
    }
    let mut rng = RngHandle::new(cfg.seed);
    let scale = 1.0 / (cfg.rank as f64).sqrt();
    let users: Vec<Vec<f64>> = (0..cfg.n_users)
        .map(|_| {
            (0..cfg.rank)
                .map(|j| rng.gaussian(0.0, cfg.spectrum_decay.powi(j as i32)))
                .collect()
        })
        .collect();
    let items: Vec<Vec<f64>> = (0..cfg.n_items)
        .map(|_| (0..cfg.rank).map(|_| rng.gaussian(0.0, scale)).collect())
        .collect();
    let bias: Vec<f64> = (0..cfg.n_items).map(|_| rng.gaussian(0.0, cfg.popularity)).collect();

    let span = cfg.max_per_user - cfg.min_per_user + 1;
    let lists = users
        .iter()
        .map(|u| {
            let count = cfg.min_per_user + rng.uniform_usize(span);
            let mut keyed: Vec<(f64, usize)> = items
                .iter()
                .zip(&bias)
                .enumerate()
                .map(|(i, (v, b))| {
                    let affinity: f64 = u.iter().zip(v).map(|(a, c)| a * c).sum();
                    let gumbel = -(-(rng.uniform_f64().max(f64::MIN_POSITIVE)).ln()).ln();
                    (cfg.signal * affinity + b + gumbel, i)
                })
                .collect();
            keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            keyed.truncate(count);
            keyed.into_iter().map(|(_, i)| (i, 1)).collect()
        })
        .collect();
    InteractionDataset::from_lists(cfg.n_users, cfg.n_items, lists)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let cfg = PlantedConfig::desk_scale(3);
        let a = planted_low_rank(&cfg).unwrap();
        let b = planted_low_rank(&cfg).unwrap();
        assert_eq!(a.lists(), b.lists());
        assert_eq!(a.n_users(), 500);
        assert_eq!(a.n_items(), 300);
        for u in 0..a.n_users() {
            let n = a.user_items(u).len();
            assert!((20..=60).contains(&n));
        }
        assert_ne!(planted_low_rank(&PlantedConfig::desk_scale(4)).unwrap().lists(), a.lists());
    }

    #[test]
    fn movielens_shape() {
        let ds = planted_low_rank(&PlantedConfig::movielens_100k_shape(1)).unwrap();
        assert_eq!(ds.n_users(), 943);
        assert_eq!(ds.n_items(), 1682);
        assert!((90_000..=110_000).contains(&ds.n_entries()), "{}", ds.n_entries());
    }

    #[test]
    fn rejects_bad_counts() {
        let mut cfg = PlantedConfig::desk_scale(0);
        cfg.max_per_user = 400;
        assert!(planted_low_rank(&cfg).is_err());
    }
}
