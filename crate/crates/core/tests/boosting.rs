use adafm::boosting::{component_seed, run_adafm, BoostConfig, Learner};
use adafm::synthetic::{planted_low_rank, PlantedConfig};
use adafm::trainers::train_component;
use adafm::{InteractionDataset, Measure, SparseVector, TrainConfig};

fn data(seed: u64) -> InteractionDataset {
    planted_low_rank(&PlantedConfig {
        n_users: 120,
        n_items: 80,
        rank: 4,
        min_per_user: 8,
        max_per_user: 20,
        signal: 2.0,
        popularity: 1.0,
        spectrum_decay: 1.0,
        seed,
    })
    .unwrap()
}

fn config(rounds: usize, seed: u64) -> BoostConfig {
    BoostConfig {
        rounds,
        component: TrainConfig {
            max_iter: 20_000,
            seed,
            ..TrainConfig::default()
        },
        ..BoostConfig::default()
    }
}

#[test]
fn single_round_is_one_scaled_component() {
    let ds = data(1);
    let cfg = config(1, 9);
    let out = run_adafm(&ds, &cfg, None).unwrap();
    assert_eq!(out.model.len(), 1);
    let c = &out.model.components()[0];
    assert!(c.alpha > 0.0);
    let mut component = cfg.component;
    component.seed = component_seed(9, 1, 0);
    let n = ds.n_users();
    let direct = train_component(&ds, &vec![1.0 / n as f64; n], &component).unwrap();
    assert_eq!(c.params, direct.params);
    let enc = ds.feature_encoder();
    let x: SparseVector = enc.encode(3, 5).unwrap();
    let merged = out.model.merge().unwrap();
    let expect = c.alpha * direct.params.predict_fast(&x).unwrap();
    assert!((merged.predict_fast(&x).unwrap() - expect).abs() <= 1e-12 * (1.0 + expect.abs()));
}

#[test]
fn merged_rank_adds_up_and_runs_repeat() {
    let ds = data(2);
    let cfg = config(3, 4);
    let a = run_adafm(&ds, &cfg, None).unwrap();
    let b = run_adafm(&ds, &cfg, None).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.history, b.history);
    assert_eq!(a.final_weights, b.final_weights);
    let merged = a.model.merge().unwrap();
    assert_eq!(merged.rank(), cfg.component.k * a.model.len());
    assert!((a.final_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn training_measure_mostly_rises() {
    let mut rises = 0;
    let mut steps = 0;
    for seed in 1..=3 {
        let ds = planted_low_rank(&PlantedConfig::desk_scale(seed)).unwrap();
        let mut cfg = config(5, seed);
        cfg.component.max_iter = 1_000_000;
        let out = run_adafm(&ds, &cfg, None).unwrap();
        for w in out.history.windows(2) {
            steps += 1;
            if w[1].ensemble_train_e >= w[0].ensemble_train_e {
                rises += 1;
            }
        }
    }
    assert!(steps > 0);
    assert!(rises as f64 >= 0.8 * steps as f64, "{rises}/{steps}");
}

#[test]
fn pointwise_and_ndcg_variants_run() {
    let ds = data(3);
    let mut cfg = config(2, 1);
    cfg.learner = Learner::Pointwise;
    let out = run_adafm(&ds, &cfg, None).unwrap();
    assert!(out.model.components().iter().all(|c| c.alpha > 0.0));
    let mut cfg = config(2, 1);
    cfg.measure = Measure::Ndcg { cutoff: Some(10) };
    let out = run_adafm(&ds, &cfg, None).unwrap();
    assert!(out.history.iter().all(|r| (0.0..=1.0).contains(&r.ensemble_train_e)));
}

#[test]
fn holdout_drives_early_stopping() {
    let ds = data(5);
    let mut cfg = config(6, 2);
    cfg.patience = Some(1);
    let out = run_adafm(&ds, &cfg, Some(&ds.with_lists(ds.lists().to_vec()).unwrap())).unwrap();
    assert!(out.history.iter().all(|r| r.ensemble_holdout_e.is_some()));
    assert!(!out.model.is_empty() && out.model.len() <= 6);
}
