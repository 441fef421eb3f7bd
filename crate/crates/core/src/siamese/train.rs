//! Training loop: per-sample adaptive gradient descent over labelled AST
//! pairs. Updates scale each coordinate by the inverse root of its
//! accumulated squared gradients, so rarely-touched parameters (embedding
//! rows for uncommon labels) keep taking full-size steps.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{pair_grads, SiameseModel};
use crate::corpus::{AstNode, CorpusIndex, FunctionPair};
use crate::error::{Error, Result};

const ADAGRAD_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            learning_rate: 0.05,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Param("training needs at least one epoch".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::Param(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// One labelled training sample.
#[derive(Debug, Clone, Copy)]
pub struct TrainPair<'a> {
    pub a: &'a AstNode,
    pub b: &'a AstNode,
    pub homologous: bool,
}

/// Looks up the ASTs behind dataset pairs.
pub fn resolve_pairs<'c>(index: &CorpusIndex<'c>, pairs: &[FunctionPair]) -> Vec<TrainPair<'c>> {
    pairs
        .iter()
        .map(|p| TrainPair {
            a: &index.record(p.a).ast,
            b: &index.record(p.b).ast,
            homologous: p.homologous,
        })
        .collect()
}

/// Trains a fresh model on the given pairs. Returns the model and the mean
/// loss per epoch. Sample order is reshuffled each epoch from the config
/// seed, so a run is fully reproducible.
pub fn train(
    pairs: &[TrainPair<'_>],
    hidden: usize,
    embed: usize,
    vocab: usize,
    config: &TrainConfig,
) -> Result<(SiameseModel, Vec<f64>)> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(Error::Dataset("no training pairs given".into()));
    }

    let mut model = SiameseModel::seeded(hidden, embed, vocab, config.seed)?;
    let mut grads = model.zeros_like();
    let mut accum = model.zeros_like();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut trace = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (step, &sample) in order.iter().enumerate() {
            let pair = &pairs[sample];
            for g in grads.param_slices_mut() {
                g.fill(0.0);
            }
            let loss = pair_grads(&model, pair.a, pair.b, pair.homologous, &mut grads)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    sample: step,
                });
            }
            epoch_loss += loss;

            let lr = config.learning_rate;
            for ((theta, g), acc) in model
                .param_slices_mut()
                .into_iter()
                .zip(grads.param_slices())
                .zip(accum.param_slices_mut())
            {
                for k in 0..theta.len() {
                    acc[k] += g[k] * g[k];
                    theta[k] -= lr * g[k] / (acc[k].sqrt() + ADAGRAD_EPS);
                }
            }
        }
        trace.push(epoch_loss / pairs.len() as f64);
    }
    Ok((model, trace))
}
