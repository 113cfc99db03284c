//! Factorization machines for implicit-feedback ranking.
//!
//! The crate covers the second-order FM predictor, pairwise and pointwise
//! SGD trainers with uniform, popularity, score-aware and rank-aware
//! negative sampling, ranking metrics, and an adaptive-boosting loop that
//! combines low-rank component models into one higher-rank FM.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boosting;
pub mod data_io;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod fm;
pub mod metrics;
pub mod model_io;
pub mod rng;
pub mod samplers;
pub mod scorer;
pub mod sparse;
pub mod synthetic;
pub mod trainers;

pub use boosting::{run_adafm, BoostConfig, BoostOutcome, Learner};
pub use dataset::{encode_pair, FeatureEncoder, Interaction, InteractionDataset};
pub use ensemble::{ensemble_predict, merge_ensemble, EnsembleModel};
pub use error::{Error, Result};
pub use fm::{init_params, Coord, FmParams};
pub use metrics::{Measure, RankedList};
pub use rng::RngHandle;
pub use samplers::{SamplerConfig, SamplerKind};
pub use sparse::SparseVector;
pub use trainers::TrainConfig;
