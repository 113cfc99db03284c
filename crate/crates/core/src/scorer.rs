use crate::dataset::FeatureEncoder;
use crate::ensemble::EnsembleModel;
use crate::fm::FmParams;

/// Anything that can score a `(user, item)` pair.
pub trait Scorer {
    fn score(&self, user: usize, item: usize) -> f64;
}

impl<F> Scorer for F
where
    F: Fn(usize, usize) -> f64,
{
    fn score(&self, user: usize, item: usize) -> f64 {
        self(user, item)
    }
}

/// A single FM applied to one-hot user/item encodings.
#[derive(Debug, Clone, Copy)]
pub struct FmScorer<'a> {
    pub params: &'a FmParams,
    pub encoder: FeatureEncoder,
}

impl<'a> FmScorer<'a> {
    pub fn new(params: &'a FmParams, encoder: FeatureEncoder) -> Self {
        FmScorer { params, encoder }
    }
}

impl Scorer for FmScorer<'_> {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.params
            .score_pair(self.encoder.user_feature(user), self.encoder.item_feature(item))
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EnsembleScorer<'a> {
    pub model: &'a EnsembleModel,
    pub encoder: FeatureEncoder,
}

impl<'a> EnsembleScorer<'a> {
    pub fn new(model: &'a EnsembleModel, encoder: FeatureEncoder) -> Self {
        EnsembleScorer { model, encoder }
    }
}

impl Scorer for EnsembleScorer<'_> {
    fn score(&self, user: usize, item: usize) -> f64 {
        self.model
            .score_pair(self.encoder.user_feature(user), self.encoder.item_feature(item))
    }
}
