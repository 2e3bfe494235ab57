use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::{
    kl_divergence, mse, normal_matrix, stack_rows, tile_cross_entropy, BatchInput, ReconLoss, VaeModel,
};
use crate::corpus::{CorpusSplit, Segment};
use crate::embedding::{embed_segment, EmbeddingTable};
use crate::error::{Error, Result};
use crate::seed::rng_for;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub cycle_length: usize,
    pub beta_max: f64,
    pub beta_step: f64,
    pub recon_scale: f64,
    pub game_weights: BTreeMap<String, f64>,
    pub recon_loss: ReconLoss,
    pub batch_size: usize,
    pub seed: u64,
    /// Epoch interval between checkpoint callbacks; 0 disables them.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            epochs: 4000,
            cycle_length: 200,
            beta_max: 0.01,
            beta_step: 0.0001,
            recon_scale: 4.0,
            game_weights: BTreeMap::from([("LR".to_string(), 0.57), ("LOZ".to_string(), 0.43)]),
            recon_loss: ReconLoss::Mse,
            batch_size: 32,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    /// Defaults with the reconstruction loss matching the table: categorical
    /// cross-entropy for one-hot tables, mean squared error otherwise.
    pub fn for_table(table: &EmbeddingTable) -> Self {
        Self {
            recon_loss: if table.is_one_hot() {
                ReconLoss::CrossEntropy
            } else {
                ReconLoss::Mse
            },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.cycle_length == 0 {
            return bad("cycle_length must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.beta_max >= 0.0 && self.beta_step >= 0.0 && self.recon_scale >= 0.0) {
            return bad("beta_max, beta_step and recon_scale must be non-negative");
        }
        if self.game_weights.values().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("game weights must be finite and non-negative");
        }
        Ok(())
    }

    pub fn game_weight(&self, game: &str) -> Result<f64> {
        self.game_weights
            .get(game)
            .copied()
            .ok_or_else(|| Error::UnknownGame(game.to_string()))
    }
}

/// Cyclic KL weight: zero for the whole first cycle, then in every later
/// cycle a linear ramp of `beta_step` per epoch for half a cycle followed by
/// a hold, capped at `beta_max`.
pub fn kl_weight(epoch: usize, config: &TrainConfig) -> f64 {
    if epoch < config.cycle_length {
        return 0.0;
    }
    let k = epoch % config.cycle_length;
    let ramp = (k + 1).min(config.cycle_length / 2);
    (ramp as f64 * config.beta_step).min(config.beta_max)
}

/// Loss terms of a single segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossParts {
    pub total: f64,
    pub recon: f64,
    pub kl: f64,
}

/// Weighted loss of one reconstruction. `recon_pred` holds probabilities
/// when the configured loss is cross-entropy.
#[allow(clippy::too_many_arguments)]
pub fn loss(
    recon_pred: &[f64],
    recon_target: &[f64],
    mu: &[f64],
    logvar: &[f64],
    game: &str,
    beta: f64,
    tile_dim: usize,
    config: &TrainConfig,
) -> Result<LossParts> {
    if recon_pred.len() != recon_target.len() {
        return Err(Error::ShapeMismatch {
            expected: recon_target.len(),
            found: recon_pred.len(),
        });
    }
    if mu.len() != logvar.len() {
        return Err(Error::ShapeMismatch {
            expected: mu.len(),
            found: logvar.len(),
        });
    }
    let weight = config.game_weight(game)?;
    let r = match config.recon_loss {
        ReconLoss::Mse => mse(recon_pred, recon_target),
        ReconLoss::CrossEntropy => tile_cross_entropy(recon_pred, recon_target, tile_dim),
    };
    let recon = config.recon_scale * weight * r;
    let kl = kl_divergence(mu, logvar);
    Ok(LossParts {
        total: recon + beta * kl,
        recon,
        kl,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub recon: f64,
    pub kl: f64,
    pub beta: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub records: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(r)?;
        }
        out.flush().map_err(|e| Error::io("writing history", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
        self.write_csv(file)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path.as_ref())?;
        let records = reader.deserialize().collect::<std::result::Result<_, _>>()?;
        Ok(Self { records })
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn new(model: &VaeModel) -> Self {
        Self {
            m: model.params().zeros_like(),
            v: model.params().zeros_like(),
            t: 0,
        }
    }

    fn step(&mut self, model: &mut VaeModel, grads: &[Vec<f64>], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        for (p, param) in model.params_mut().params.iter_mut().enumerate() {
            if !param.trainable {
                continue;
            }
            for (i, w) in param.data.iter_mut().enumerate() {
                let g = grads[p][i];
                let m = &mut self.m[p][i];
                let v = &mut self.v[p][i];
                *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPSILON);
            }
        }
    }
}

/// Splits shuffled indices into batches, folding a trailing singleton
/// into the previous batch so batch statistics stay defined.
fn batches(order: &[usize], size: usize) -> Vec<&[usize]> {
    let mut out: Vec<&[usize]> = order.chunks(size).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        out.pop();
        let start = (out.len() - 1) * size;
        *out.last_mut().unwrap() = &order[start..];
    }
    out
}

/// Trains on the split's training segments.
pub fn train(
    model: VaeModel,
    split: &CorpusSplit,
    table: &EmbeddingTable,
    config: &TrainConfig,
) -> Result<(VaeModel, TrainHistory)> {
    train_with_hook(model, &split.train, table, config, |_, _, _| Ok(()))
}

/// Trains on `segments`, calling `hook` after every epoch whose 1-based
/// index is a multiple of `config.checkpoint_every`, and after the last.
pub fn train_with_hook<F>(
    mut model: VaeModel,
    segments: &[Segment],
    table: &EmbeddingTable,
    config: &TrainConfig,
    mut hook: F,
) -> Result<(VaeModel, TrainHistory)>
where
    F: FnMut(usize, &VaeModel, &EpochRecord) -> Result<()>,
{
    config.validate()?;
    if segments.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    if table.dim() != model.spec().tile_dim {
        return Err(Error::DimensionMismatch {
            expected: model.spec().tile_dim,
            found: table.dim(),
        });
    }
    let mut inputs = Vec::with_capacity(segments.len());
    let mut weights = Vec::with_capacity(segments.len());
    for s in segments {
        inputs.push(embed_segment(s, table)?.values);
        weights.push(config.recon_scale * config.game_weight(&s.provenance.game)?);
    }

    let mut rng = rng_for(config.seed, "train");
    let mut adam = Adam::new(&model);
    let mut history = TrainHistory::default();
    let mut order: Vec<usize> = (0..segments.len()).collect();
    for epoch in 0..config.epochs {
        let beta = kl_weight(epoch, config);
        order.shuffle(&mut rng);
        let (mut recon, mut kl) = (0.0, 0.0);
        for batch in batches(&order, config.batch_size) {
            let rows: Vec<&[f64]> = batch.iter().map(|&i| inputs[i].as_slice()).collect();
            let x = stack_rows(&rows);
            let w: Vec<f64> = batch.iter().map(|&i| weights[i]).collect();
            let eps = normal_matrix(batch.len(), model.latent_dim(), &mut rng);
            let mut step = model.step(&BatchInput {
                x: &x,
                recon_weights: &w,
                eps: &eps,
                beta,
                recon_loss: config.recon_loss,
            })?;
            if !step.loss.total.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    recon: step.loss.recon,
                    kl: step.loss.kl,
                });
            }
            recon += step.loss.recon * batch.len() as f64;
            kl += step.loss.kl * batch.len() as f64;
            let caches = step.take_norm_caches();
            model.apply_norm_updates(caches);
            adam.step(&mut model, &step.grads, config.learning_rate);
            model.params_mut().round_to_f32();
        }
        if !model.params().all_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                recon: f64::NAN,
                kl: f64::NAN,
            });
        }
        let n = segments.len() as f64;
        let record = EpochRecord {
            epoch,
            recon: recon / n,
            kl: kl / n,
            beta,
            total: recon / n + beta * kl / n,
        };
        log::debug!(
            "epoch {epoch} recon {:.6} kl {:.6} beta {beta}",
            record.recon,
            record.kl
        );
        history.records.push(record);
        let every = config.checkpoint_every;
        if (every > 0 && (epoch + 1) % every == 0) || epoch + 1 == config.epochs {
            hook(epoch, &model, &record)?;
        }
    }
    Ok((model, history))
}
