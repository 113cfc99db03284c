use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use adafm_cli::commands::{read_config, run};
use adafm_cli::exit_code;

#[derive(Parser)]
#[command(name = "adafm", version, about = "Factorization machines and AdaFM boosting for implicit feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split an interaction file into train.tsv and test.tsv.
    Prepare(Opts),
    /// Pick the learning rate by k-fold cross-validation of FM.
    CvEta(Opts),
    /// Train a model and report its test metric.
    Train(Opts),
    /// Score a saved model on the test split.
    Evaluate(Opts),
    /// Top-n items for one user.
    Predict(Opts),
    /// Metric over a list of ranks or boosting rounds, as CSV.
    Sweep(Opts),
    /// Write a synthetic planted low-rank interaction file.
    Synth(Opts),
}

impl Command {
    fn parts(&self) -> (&'static str, &Opts) {
        match self {
            Command::Prepare(o) => ("prepare", o),
            Command::CvEta(o) => ("cv-eta", o),
            Command::Train(o) => ("train", o),
            Command::Evaluate(o) => ("evaluate", o),
            Command::Predict(o) => ("predict", o),
            Command::Sweep(o) => ("sweep", o),
            Command::Synth(o) => ("synth", o),
        }
    }
}

/// Every flag overrides the config-file key of the same name (dashes become underscores).
#[derive(Args, Debug)]
struct Opts {
    /// Flat `key = value` file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// FM, PRFM, LFM-S, LFM-D, LFM-W or AdaFM-{O,P,S,D,W}.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    rounds: Option<String>,
    #[arg(long)]
    eta: Option<String>,
    #[arg(long)]
    gamma: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    /// uniform, static, dynamic or rank-aware; must match the algorithm.
    #[arg(long)]
    sampler: Option<String>,
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    max_trials: Option<String>,
    /// trials or harmonic.
    #[arg(long)]
    rank_weighting: Option<String>,
    /// auc, ndcg or ndcg@K.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    eval_negatives: Option<String>,
    #[arg(long)]
    e_clamp: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    log_interval: Option<String>,
    /// Directory holding train.tsv and test.tsv.
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Raw interaction file for `prepare`.
    #[arg(long)]
    input: Option<String>,
    /// loo or holdout:<fraction>.
    #[arg(long)]
    split: Option<String>,
    #[arg(long)]
    min_user_interactions: Option<String>,
    #[arg(long)]
    user: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    exclude_seen: Option<String>,
    /// ranks or rounds.
    #[arg(long)]
    sweep_axis: Option<String>,
    #[arg(long)]
    sweep_values: Option<String>,
    #[arg(long)]
    sweep_seeds: Option<String>,
    #[arg(long)]
    eta_grid: Option<String>,
    #[arg(long)]
    folds: Option<String>,
    /// desk or ml100k.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    out: Option<String>,
}

impl Opts {
    fn overrides(&self) -> Vec<(&'static str, &str)> {
        let pairs: [(&'static str, &Option<String>); 32] = [
            ("algorithm", &self.algorithm),
            ("k", &self.k),
            ("rounds", &self.rounds),
            ("eta", &self.eta),
            ("gamma", &self.gamma),
            ("max_iter", &self.max_iter),
            ("sampler", &self.sampler),
            ("rho", &self.rho),
            ("m", &self.m),
            ("epsilon", &self.epsilon),
            ("max_trials", &self.max_trials),
            ("rank_weighting", &self.rank_weighting),
            ("metric", &self.metric),
            ("eval_negatives", &self.eval_negatives),
            ("e_clamp", &self.e_clamp),
            ("seed", &self.seed),
            ("log_interval", &self.log_interval),
            ("data", &self.data),
            ("model", &self.model),
            ("input", &self.input),
            ("split", &self.split),
            ("min_user_interactions", &self.min_user_interactions),
            ("user", &self.user),
            ("n", &self.n),
            ("exclude_seen", &self.exclude_seen),
            ("sweep_axis", &self.sweep_axis),
            ("sweep_values", &self.sweep_values),
            ("sweep_seeds", &self.sweep_seeds),
            ("eta_grid", &self.eta_grid),
            ("folds", &self.folds),
            ("preset", &self.preset),
            ("out", &self.out),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_deref().map(|v| (k, v)))
            .collect()
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let (name, opts) = cli.command.parts();
    let result = read_config(opts.config.as_deref()).and_then(|mut raw| {
        for (key, value) in opts.overrides() {
            raw.set(key, value)?;
        }
        run(name, &raw)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
