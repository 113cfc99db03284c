//! Flat `key = value` configuration shared by every subcommand.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use adafm::boosting::Learner;
use adafm::data_io::SplitMethod;
use adafm::samplers::{RankWeighting, SamplerKind};
use adafm::{Error, Measure, Result};

/// Every recognised key with its default, in the order written to `meta.txt`.
pub const KEYS: &[(&str, &str)] = &[
    ("algorithm", "PRFM"),
    ("k", "2"),
    ("rounds", "4"),
    ("eta", "0.05"),
    ("gamma", "0.05"),
    ("max_iter", "100000"),
    ("sampler", "auto"),
    ("rho", "0.3"),
    ("m", "10"),
    ("epsilon", "0.1"),
    ("max_trials", "auto"),
    ("rank_weighting", "harmonic"),
    ("metric", "auto"),
    ("eval_negatives", "100"),
    ("e_clamp", "0.000001"),
    ("seed", "42"),
    ("log_interval", "0"),
    ("data", "data"),
    ("model", "auto"),
    ("input", ""),
    ("split", "holdout:0.2"),
    ("min_user_interactions", "0"),
    ("user", ""),
    ("n", "10"),
    ("exclude_seen", "true"),
    ("sweep_axis", "ranks"),
    ("sweep_values", "1,2,4,8"),
    ("sweep_seeds", "auto"),
    ("eta_grid", "0.1,0.05,0.02,0.01"),
    ("folds", "5"),
    ("preset", "desk"),
    ("out", "out"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Fm,
    Prfm,
    LfmS,
    LfmD,
    LfmW,
    AdaO,
    AdaP,
    AdaS,
    AdaD,
    AdaW,
}

impl Algorithm {
    pub fn is_boosted(self) -> bool {
        matches!(
            self,
            Algorithm::AdaO | Algorithm::AdaP | Algorithm::AdaS | Algorithm::AdaD | Algorithm::AdaW
        )
    }

    pub fn learner(self) -> Learner {
        match self {
            Algorithm::Fm | Algorithm::AdaO => Learner::Pointwise,
            _ => Learner::Pairwise,
        }
    }

    pub fn sampler(self) -> SamplerKind {
        match self {
            Algorithm::LfmS | Algorithm::AdaS => SamplerKind::Static,
            Algorithm::LfmD | Algorithm::AdaD => SamplerKind::Dynamic,
            Algorithm::LfmW | Algorithm::AdaW => SamplerKind::RankAware,
            _ => SamplerKind::Uniform,
        }
    }

    pub fn default_metric(self) -> Measure {
        match self.sampler() {
            SamplerKind::Uniform => Measure::Auc,
            _ => Measure::Ndcg { cutoff: None },
        }
    }

    /// Whether `rho` shapes this algorithm's sampler.
    pub fn uses_rho(self) -> bool {
        matches!(self.sampler(), SamplerKind::Static | SamplerKind::Dynamic)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Fm => "FM",
            Algorithm::Prfm => "PRFM",
            Algorithm::LfmS => "LFM-S",
            Algorithm::LfmD => "LFM-D",
            Algorithm::LfmW => "LFM-W",
            Algorithm::AdaO => "AdaFM-O",
            Algorithm::AdaP => "AdaFM-P",
            Algorithm::AdaS => "AdaFM-S",
            Algorithm::AdaD => "AdaFM-D",
            Algorithm::AdaW => "AdaFM-W",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "FM" => Algorithm::Fm,
            "PRFM" => Algorithm::Prfm,
            "LFM-S" => Algorithm::LfmS,
            "LFM-D" => Algorithm::LfmD,
            "LFM-W" => Algorithm::LfmW,
            "ADAFM-O" => Algorithm::AdaO,
            "ADAFM-P" => Algorithm::AdaP,
            "ADAFM-S" => Algorithm::AdaS,
            "ADAFM-D" => Algorithm::AdaD,
            "ADAFM-W" => Algorithm::AdaW,
            _ => return Err(Error::Config(format!("unknown algorithm {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Ranks,
    Rounds,
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepAxis::Ranks => "ranks",
            SweepAxis::Rounds => "rounds",
        })
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ranks" => Ok(SweepAxis::Ranks),
            "rounds" => Ok(SweepAxis::Rounds),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    MovieLens,
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::MovieLens => "ml100k",
        })
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "desk" => Ok(Preset::Desk),
            "ml100k" => Ok(Preset::MovieLens),
            other => Err(Error::Config(format!("unknown preset {other:?} (expected desk or ml100k)"))),
        }
    }
}

/// Raw key/value pairs before typing, tracking which keys were set explicitly.
#[derive(Debug, Clone)]
pub struct RawConfig {
    values: BTreeMap<String, String>,
    explicit: BTreeSet<String>,
}

impl Default for RawConfig {
    fn default() -> Self {
        RawConfig {
            values: KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            explicit: BTreeSet::new(),
        }
    }
}

impl RawConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !self.values.contains_key(key) {
            return Err(Error::Config(format!("unknown key {key:?}")));
        }
        self.values.insert(key.to_string(), value.trim().to_string());
        self.explicit.insert(key.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        &self.values[key]
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }

    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: idx + 1,
                msg: format!("expected `key = value`, found {line:?}"),
            })?;
            self.set(key.trim(), value).map_err(|e| Error::Parse {
                line: idx + 1,
                msg: e.to_string(),
            })?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)?;
        self.merge_text(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub algorithm: Algorithm,
    pub k: usize,
    pub rounds: usize,
    pub eta: f64,
    pub gamma: f64,
    pub max_iter: usize,
    pub sampler: SamplerKind,
    pub rho: f64,
    pub m: usize,
    pub epsilon: f64,
    pub max_trials: Option<usize>,
    pub rank_weighting: RankWeighting,
    pub metric: Measure,
    pub eval_negatives: usize,
    pub e_clamp: f64,
    pub seed: u64,
    pub log_interval: usize,
    pub data: PathBuf,
    pub model: PathBuf,
    pub input: Option<PathBuf>,
    pub split: SplitMethod,
    pub min_user_interactions: usize,
    pub user: Option<String>,
    pub n: usize,
    pub exclude_seen: bool,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<usize>,
    pub sweep_seeds: Vec<u64>,
    pub eta_grid: Vec<f64>,
    pub folds: usize,
    pub preset: Preset,
    pub out: PathBuf,
}

fn parse<T: FromStr>(raw: &RawConfig, key: &str) -> Result<T> {
    let v = raw.get(key);
    v.parse()
        .map_err(|_| Error::Config(format!("{key} = {v:?} is not valid")))
}

fn parse_list<T: FromStr>(raw: &RawConfig, key: &str) -> Result<Vec<T>> {
    let v = raw.get(key);
    let items: Vec<T> = v
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| Error::Config(format!("{key}: {s:?} is not valid"))))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("{key} must list at least one value")));
    }
    Ok(items)
}

fn optional(raw: &RawConfig, key: &str) -> Option<String> {
    let v = raw.get(key);
    (!v.is_empty()).then(|| v.to_string())
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl Settings {
    pub fn resolve(raw: &RawConfig) -> Result<Settings> {
        let algorithm: Algorithm = parse(raw, "algorithm")?;
        let sampler = match raw.get("sampler") {
            "auto" => algorithm.sampler(),
            s => {
                let kind: SamplerKind = s.parse()?;
                if kind != algorithm.sampler() {
                    return Err(Error::Config(format!(
                        "sampler {kind} does not match algorithm {algorithm} (expects {})",
                        algorithm.sampler()
                    )));
                }
                kind
            }
        };
        let metric = match raw.get("metric") {
            "auto" => algorithm.default_metric(),
            s => s.parse()?,
        };
        let max_trials = match raw.get("max_trials") {
            "auto" => None,
            _ => Some(parse(raw, "max_trials")?),
        };
        let seed: u64 = parse(raw, "seed")?;
        let out = PathBuf::from(raw.get("out"));
        let model = match raw.get("model") {
            "auto" => out.join("model.txt"),
            p => PathBuf::from(p),
        };
        let sweep_seeds = match raw.get("sweep_seeds") {
            "auto" => vec![seed],
            _ => parse_list(raw, "sweep_seeds")?,
        };
        let s = Settings {
            algorithm,
            k: parse(raw, "k")?,
            rounds: parse(raw, "rounds")?,
            eta: parse(raw, "eta")?,
            gamma: parse(raw, "gamma")?,
            max_iter: parse(raw, "max_iter")?,
            sampler,
            rho: parse(raw, "rho")?,
            m: parse(raw, "m")?,
            epsilon: parse(raw, "epsilon")?,
            max_trials,
            rank_weighting: parse(raw, "rank_weighting")?,
            metric,
            eval_negatives: parse(raw, "eval_negatives")?,
            e_clamp: parse(raw, "e_clamp")?,
            seed,
            log_interval: parse(raw, "log_interval")?,
            data: PathBuf::from(raw.get("data")),
            model,
            input: optional(raw, "input").map(PathBuf::from),
            split: parse(raw, "split")?,
            min_user_interactions: parse(raw, "min_user_interactions")?,
            user: optional(raw, "user"),
            n: parse(raw, "n")?,
            exclude_seen: parse(raw, "exclude_seen")?,
            sweep_axis: parse(raw, "sweep_axis")?,
            sweep_values: parse_list(raw, "sweep_values")?,
            sweep_seeds,
            eta_grid: parse_list(raw, "eta_grid")?,
            folds: parse(raw, "folds")?,
            preset: parse(raw, "preset")?,
            out,
        };
        if s.algorithm.is_boosted() && s.rounds == 0 {
            return Err(Error::Config(format!("{} needs rounds >= 1", s.algorithm)));
        }
        if s.sweep_values.contains(&0) {
            return Err(Error::Config("sweep values must be at least 1".into()));
        }
        Ok(s)
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "algorithm" => self.algorithm.to_string(),
            "k" => self.k.to_string(),
            "rounds" => self.rounds.to_string(),
            "eta" => self.eta.to_string(),
            "gamma" => self.gamma.to_string(),
            "max_iter" => self.max_iter.to_string(),
            "sampler" => self.sampler.to_string(),
            "rho" => self.rho.to_string(),
            "m" => self.m.to_string(),
            "epsilon" => self.epsilon.to_string(),
            "max_trials" => self.max_trials.map_or("auto".into(), |t| t.to_string()),
            "rank_weighting" => self.rank_weighting.to_string(),
            "metric" => self.metric.to_string(),
            "eval_negatives" => self.eval_negatives.to_string(),
            "e_clamp" => self.e_clamp.to_string(),
            "seed" => self.seed.to_string(),
            "log_interval" => self.log_interval.to_string(),
            "data" => self.data.display().to_string(),
            "model" => self.model.display().to_string(),
            "input" => self.input.as_ref().map_or(String::new(), |p| p.display().to_string()),
            "split" => self.split.to_string(),
            "min_user_interactions" => self.min_user_interactions.to_string(),
            "user" => self.user.clone().unwrap_or_default(),
            "n" => self.n.to_string(),
            "exclude_seen" => self.exclude_seen.to_string(),
            "sweep_axis" => self.sweep_axis.to_string(),
            "sweep_values" => join(&self.sweep_values),
            "sweep_seeds" => join(&self.sweep_seeds),
            "eta_grid" => join(&self.eta_grid),
            "folds" => self.folds.to_string(),
            "preset" => self.preset.to_string(),
            "out" => self.out.display().to_string(),
            other => unreachable!("key {other} missing from KEYS"),
        }
    }

    /// The fully resolved configuration in `key = value` form.
    pub fn to_meta(&self, command: &str) -> String {
        let mut text = format!("# adafm {command}\n");
        for (key, _) in KEYS {
            text.push_str(&format!("{key} = {}\n", self.value_of(key)));
        }
        text
    }
}
