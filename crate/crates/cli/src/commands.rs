use std::fs;
use std::path::Path;

use log::{info, warn};

use adafm::boosting::{round_log_csv, run_adafm, train_learner, BoostConfig, RoundRecord};
use adafm::data_io::{k_fold, load_dataset, load_split, save_interactions, split, SplitSpec};
use adafm::metrics::{evaluate_model, Candidates, EvalSet, Evaluation};
use adafm::model_io::{load_model, save_model};
use adafm::samplers::SamplerConfig;
use adafm::scorer::{EnsembleScorer, FmScorer};
use adafm::synthetic::{planted_low_rank, PlantedConfig};
use adafm::{EnsembleModel, Error, InteractionDataset, Measure, Result, RngHandle, TrainConfig};

use crate::config::{Algorithm, Preset, RawConfig, Settings, SweepAxis};

const EVAL_STREAM: u64 = 0xE7A1;

pub fn resolve(raw: &RawConfig) -> Result<Settings> {
    let s = Settings::resolve(raw)?;
    if s.algorithm.uses_rho() && !raw.is_explicit("rho") {
        info!("rho not set for {}, using default {}", s.algorithm, s.rho);
    }
    Ok(s)
}

fn prepare_out(s: &Settings, command: &str) -> Result<()> {
    fs::create_dir_all(&s.out)?;
    fs::write(s.out.join("meta.txt"), s.to_meta(command))?;
    Ok(())
}

fn write_out(s: &Settings, name: &str, contents: &str) -> Result<()> {
    fs::write(s.out.join(name), contents)?;
    Ok(())
}

fn load_data(s: &Settings) -> Result<(InteractionDataset, InteractionDataset)> {
    load_split(s.data.join("train.tsv"), s.data.join("test.tsv"))
}

fn stats_report(ds: &[(&str, &InteractionDataset)]) -> String {
    let mut out = String::new();
    for (name, d) in ds {
        out.push_str(&format!(
            "{name}: users={} items={} entries={}\n",
            d.n_users(),
            d.n_items(),
            d.n_entries()
        ));
    }
    out
}

pub fn train_config(s: &Settings, k: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        eta: s.eta,
        gamma: s.gamma,
        max_iter: s.max_iter,
        k,
        sampler: SamplerConfig {
            kind: s.sampler,
            rho: s.rho,
            m: s.m,
            epsilon: s.epsilon,
            max_trials: s.max_trials,
            rank_weighting: s.rank_weighting,
        },
        seed,
        log_interval: s.log_interval,
    }
}

pub struct Fitted {
    pub model: EnsembleModel,
    pub history: Vec<RoundRecord>,
    pub progress: Option<String>,
}

/// Trains `s.algorithm` at rank `k` (and `rounds` components when boosted).
pub fn fit(s: &Settings, train: &InteractionDataset, k: usize, rounds: usize, seed: u64) -> Result<Fitted> {
    let component = train_config(s, k, seed);
    if s.algorithm.is_boosted() {
        let cfg = BoostConfig {
            rounds,
            component,
            learner: s.algorithm.learner(),
            measure: s.metric,
            e_clamp: s.e_clamp,
            patience: None,
            eval_negatives: s.eval_negatives,
        };
        let outcome = run_adafm(train, &cfg, None)?;
        return Ok(Fitted {
            model: outcome.model,
            history: outcome.history,
            progress: None,
        });
    }
    let n = train.n_users();
    let weights = vec![1.0 / n as f64; n];
    let trained = train_learner(s.algorithm.learner(), train, &weights, &component)?;
    let progress = (s.log_interval > 0).then(|| trained.progress_log());
    let eval = EvalSet::build(
        train,
        &[],
        Candidates::Sampled(s.eval_negatives),
        RngHandle::derive(seed, EVAL_STREAM).next_u64(),
    );
    let train_e = evaluate_model(&FmScorer::new(&trained.params, train.feature_encoder()), &eval, s.metric, None)?
        .aggregate;
    Ok(Fitted {
        model: EnsembleModel::single(trained.params),
        history: vec![RoundRecord {
            round: 1,
            alpha: 1.0,
            component_weighted_e: train_e,
            ensemble_train_e: train_e,
            ensemble_holdout_e: None,
        }],
        progress,
    })
}

pub fn test_eval_set(s: &Settings, train: &InteractionDataset, test: &InteractionDataset, seed: u64) -> EvalSet {
    EvalSet::build(
        test,
        &[train],
        Candidates::Sampled(s.eval_negatives),
        RngHandle::derive(seed, EVAL_STREAM).next_u64(),
    )
}

pub fn evaluate_on(
    model: &EnsembleModel,
    train: &InteractionDataset,
    eval: &EvalSet,
    measure: Measure,
) -> Result<Evaluation> {
    let dim = train.feature_encoder().dim();
    if model.dim() != Some(dim) {
        return Err(Error::Shape(format!(
            "model dimension {:?} does not match data dimension {dim}",
            model.dim()
        )));
    }
    evaluate_model(&EnsembleScorer::new(model, train.feature_encoder()), eval, measure, None)
}

fn model_line(model: &EnsembleModel) -> String {
    let k = model.component_rank().unwrap_or(0);
    format!("components={} k={} merged_rank={}", model.len(), k, k * model.len())
}

pub fn cmd_prepare(s: &Settings) -> Result<()> {
    prepare_out(s, "prepare")?;
    let input = s
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("prepare needs input = <interactions file>".into()))?;
    let ds = load_dataset(input)?;
    let spec = SplitSpec {
        method: s.split,
        seed: s.seed,
        min_user_interactions: s.min_user_interactions,
    };
    let parts = split(&ds, &spec)?;
    save_interactions(&parts.train, s.out.join("train.tsv"))?;
    save_interactions(&parts.test, s.out.join("test.tsv"))?;
    let mut report = stats_report(&[("input", &ds), ("train", &parts.train), ("test", &parts.test)]);
    report.push_str(&format!("flagged_users={}\n", parts.flagged.len()));
    write_out(s, "report.txt", &report)?;
    print!("{report}");
    Ok(())
}

pub fn cmd_synth(s: &Settings) -> Result<()> {
    prepare_out(s, "synth")?;
    let cfg = match s.preset {
        Preset::Desk => PlantedConfig::desk_scale(s.seed),
        Preset::MovieLens => PlantedConfig::movielens_100k_shape(s.seed),
    };
    let ds = planted_low_rank(&cfg)?;
    save_interactions(&ds, s.out.join("interactions.tsv"))?;
    let report = stats_report(&[("synthetic", &ds)]);
    write_out(s, "report.txt", &report)?;
    print!("{report}");
    Ok(())
}

pub fn cmd_train(s: &Settings) -> Result<()> {
    prepare_out(s, "train")?;
    let (train, test) = load_data(s)?;
    let fitted = fit(s, &train, s.k, s.rounds, s.seed)?;
    save_model(&fitted.model, s.out.join("model.txt"))?;
    write_out(s, "rounds.csv", &round_log_csv(&fitted.history))?;
    if let Some(progress) = &fitted.progress {
        write_out(s, "progress.txt", progress)?;
    }
    let eval = evaluate_on(&fitted.model, &train, &test_eval_set(s, &train, &test, s.seed), s.metric)?;
    let report = format!(
        "algorithm={} {}\n{}\n",
        s.algorithm,
        model_line(&fitted.model),
        eval.report_line()
    );
    write_out(s, "report.txt", &report)?;
    print!("{report}");
    Ok(())
}

pub fn cmd_evaluate(s: &Settings) -> Result<()> {
    prepare_out(s, "evaluate")?;
    let (train, test) = load_data(s)?;
    let model = load_model(&s.model)?;
    let eval = evaluate_on(&model, &train, &test_eval_set(s, &train, &test, s.seed), s.metric)?;
    let report = format!("{}\n{}\n", model_line(&model), eval.report_line());
    write_out(s, "report.txt", &report)?;
    write_out(s, "per_user.csv", &eval.per_user_csv(test.user_tokens()))?;
    print!("{report}");
    Ok(())
}

/// Items ordered by descending score, ties by ascending id.
pub fn top_n(scores: &[(usize, f64)], n: usize) -> Vec<(usize, f64)> {
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(n);
    ranked
}

pub fn cmd_predict(s: &Settings) -> Result<()> {
    prepare_out(s, "predict")?;
    let (train, _) = load_data(s)?;
    let model = load_model(&s.model)?;
    let enc = train.feature_encoder();
    if model.dim() != Some(enc.dim()) {
        return Err(Error::Shape(format!(
            "model dimension {:?} does not match data dimension {}",
            model.dim(),
            enc.dim()
        )));
    }
    let token = s
        .user
        .as_deref()
        .ok_or_else(|| Error::Config("predict needs user = <token>".into()))?;
    let user = train
        .user_id(token)
        .ok_or_else(|| Error::Lookup(format!("unknown user {token:?}")))?;
    let merged = model.merge()?;
    let scorer = FmScorer::new(&merged, enc);
    let scores: Vec<(usize, f64)> = (0..train.n_items())
        .filter(|&i| !s.exclude_seen || train.grade_of(user, i).is_none())
        .map(|i| (i, adafm::scorer::Scorer::score(&scorer, user, i)))
        .collect();
    let mut report = String::new();
    for (rank, (item, score)) in top_n(&scores, s.n).into_iter().enumerate() {
        report.push_str(&format!("{}\t{}\t{score:.6}\n", rank + 1, train.item_token(item)));
    }
    write_out(s, "report.txt", &report)?;
    print!("{report}");
    Ok(())
}

struct Cell {
    x: usize,
    value: Option<f64>,
    seed: u64,
    status: String,
}

fn failure_status(e: &Error) -> String {
    warn!("sweep cell failed: {e}");
    if e.is_numerical() {
        "diverged".into()
    } else {
        "failed".into()
    }
}

pub fn cmd_sweep(s: &Settings) -> Result<()> {
    prepare_out(s, "sweep")?;
    let (train, test) = load_data(s)?;
    if s.sweep_axis == SweepAxis::Rounds && !s.algorithm.is_boosted() {
        return Err(Error::Config(format!("a rounds sweep needs an AdaFM algorithm, not {}", s.algorithm)));
    }
    let mut cells = Vec::new();
    for &seed in &s.sweep_seeds {
        let eval = test_eval_set(s, &train, &test, seed);
        match s.sweep_axis {
            SweepAxis::Ranks => {
                for &k in &s.sweep_values {
                    let rounds = if s.algorithm.is_boosted() { s.rounds } else { 1 };
                    let x = k * rounds;
                    let cell = fit(s, &train, k, rounds, seed)
                        .and_then(|f| Ok((f.model.len(), evaluate_on(&f.model, &train, &eval, s.metric)?)));
                    cells.push(match cell {
                        Ok((len, e)) => Cell {
                            x,
                            value: Some(e.aggregate),
                            seed,
                            status: if len == rounds { "ok".into() } else { format!("stopped@{len}") },
                        },
                        Err(e) => Cell {
                            x,
                            value: None,
                            seed,
                            status: failure_status(&e),
                        },
                    });
                }
            }
            SweepAxis::Rounds => {
                let most = *s.sweep_values.iter().max().expect("non-empty sweep values");
                match fit(s, &train, s.k, most, seed) {
                    Ok(f) => {
                        for &t in &s.sweep_values {
                            let x = s.k * t;
                            if t > f.model.len() {
                                cells.push(Cell {
                                    x,
                                    value: None,
                                    seed,
                                    status: format!("stopped@{}", f.model.len()),
                                });
                                continue;
                            }
                            let e = evaluate_on(&f.model.prefix(t), &train, &eval, s.metric)?;
                            cells.push(Cell {
                                x,
                                value: Some(e.aggregate),
                                seed,
                                status: "ok".into(),
                            });
                        }
                    }
                    Err(e) => {
                        let status = failure_status(&e);
                        for &t in &s.sweep_values {
                            cells.push(Cell {
                                x: s.k * t,
                                value: None,
                                seed,
                                status: status.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    let mut csv = String::from("x,metric_value,algorithm,seed,status\n");
    for c in &cells {
        let value = c.value.map_or(String::new(), |v| format!("{v:.6}"));
        csv.push_str(&format!("{},{value},{},{},{}\n", c.x, s.algorithm, c.seed, c.status));
    }
    write_out(s, "sweep.csv", &csv)?;
    let report = format!("metric={} cells={}\n", s.metric, cells.len());
    write_out(s, "report.txt", &report)?;
    print!("{csv}");
    Ok(())
}

/// Picks η by `folds`-fold cross-validated AUC of the pointwise FM.
pub fn cmd_cv_eta(s: &Settings) -> Result<()> {
    prepare_out(s, "cv-eta")?;
    let (train, _) = load_data(s)?;
    let parts = k_fold(&train, s.folds, s.seed)?;
    let fm = Settings {
        algorithm: Algorithm::Fm,
        sampler: Algorithm::Fm.sampler(),
        ..s.clone()
    };
    let mut report = String::new();
    let mut best: Option<(f64, f64)> = None;
    for &eta in &s.eta_grid {
        let cfg = Settings { eta, ..fm.clone() };
        let mut total = 0.0;
        let mut failed = None;
        for (f, part) in parts.iter().enumerate() {
            let seed = RngHandle::derive(s.seed, f as u64).next_u64();
            let eval = EvalSet::build(
                &part.test,
                &[&part.train],
                Candidates::Sampled(s.eval_negatives),
                RngHandle::derive(seed, EVAL_STREAM).next_u64(),
            );
            match fit(&cfg, &part.train, s.k, 1, seed)
                .and_then(|fitted| evaluate_on(&fitted.model, &part.train, &eval, Measure::Auc))
            {
                Ok(e) => total += e.aggregate,
                Err(e) => {
                    failed = Some(failure_status(&e));
                    break;
                }
            }
        }
        match failed {
            None => {
                let auc = total / parts.len() as f64;
                report.push_str(&format!("eta={eta} auc={auc:.6} status=ok\n"));
                if best.is_none_or(|(_, b)| auc > b) {
                    best = Some((eta, auc));
                }
            }
            Some(status) => report.push_str(&format!("eta={eta} auc= status={status}\n")),
        }
    }
    let (eta, _) = best.ok_or_else(|| Error::Divergence {
        step: 0,
        detail: "every learning rate in the grid failed".into(),
    })?;
    report.push_str(&format!("best_eta={eta}\n"));
    write_out(s, "report.txt", &report)?;
    print!("{report}");
    Ok(())
}

pub fn run(command: &str, raw: &RawConfig) -> Result<()> {
    let s = resolve(raw)?;
    match command {
        "prepare" => cmd_prepare(&s),
        "synth" => cmd_synth(&s),
        "train" => cmd_train(&s),
        "evaluate" => cmd_evaluate(&s),
        "predict" => cmd_predict(&s),
        "sweep" => cmd_sweep(&s),
        "cv-eta" => cmd_cv_eta(&s),
        other => Err(Error::Config(format!("unknown command {other:?}"))),
    }
}

pub fn read_config(path: Option<&Path>) -> Result<RawConfig> {
    let mut raw = RawConfig::default();
    if let Some(p) = path {
        raw.merge_file(p)?;
    }
    Ok(raw)
}
