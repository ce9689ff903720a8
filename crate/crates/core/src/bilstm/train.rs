use serde::{Deserialize, Serialize};

use super::{BiLstmNetwork, Mode};
use crate::embedding::{EmbeddingModel, SequenceEmbedding};
use crate::error::{Error, Result};
use crate::lexer::TokenStream;
use crate::numerics::{AdamConfig, AdamState, ParamSet, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub dropout_rate: f64,
    pub adam: AdamConfig,
    /// Rescale the batch gradient to at most this L2 norm. Off by default.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 128,
            dropout_rate: 0.2,
            adam: AdamConfig::default(),
            clip_norm: None,
            seed: 1,
        }
    }
}

/// An embedded sequence with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub sequence: SequenceEmbedding,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean squared error over the epoch's training batches, with dropout.
    pub train_loss: f64,
    /// Inference-mode accuracy on the training set after the epoch.
    pub train_accuracy: f64,
    pub validation_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub score: f64,
    pub label: u8,
}

/// `1` iff `score >= threshold`.
pub fn label_for(score: f64, threshold: f64) -> u8 {
    (score >= threshold) as u8
}

fn accuracy(network: &BiLstmNetwork, examples: &[Example]) -> Result<f64> {
    let mut hits = 0;
    for ex in examples {
        let score = network.score(&ex.sequence.matrix, ex.sequence.valid_len)?;
        hits += (label_for(score, 0.5) == ex.label) as usize;
    }
    Ok(hits as f64 / examples.len() as f64)
}

/// Trains for `config.epochs` epochs and returns the final network with one
/// history record per epoch.
pub fn fit(
    network: BiLstmNetwork,
    train: &[Example],
    validation: &[Example],
    config: &TrainConfig,
) -> Result<(BiLstmNetwork, Vec<EpochRecord>)> {
    fit_until(network, train, validation, config, |_| false)
}

/// Like [`fit`], but stops after the first epoch for which `stop` returns
/// true.
///
/// Each epoch shuffles the training set, then walks it in mini-batches of
/// `batch_size` (the last one may be smaller). Every sample gets fresh
/// dropout masks; the batch loss is the mean squared error and one Adam step
/// follows each batch.
pub fn fit_until(
    mut network: BiLstmNetwork,
    train: &[Example],
    validation: &[Example],
    config: &TrainConfig,
    mut stop: impl FnMut(&EpochRecord) -> bool,
) -> Result<(BiLstmNetwork, Vec<EpochRecord>)> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if config.batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be positive".into()));
    }
    if !(0.0..1.0).contains(&config.dropout_rate) {
        return Err(Error::InvalidArgument(format!(
            "dropout rate {} must lie in [0, 1)",
            config.dropout_rate
        )));
    }
    network.validate()?;
    let master = Rng::new(config.seed);
    let mut shuffle_rng = master.fork(0);
    let mut dropout_rng = master.fork(1);
    let mut adam = AdamState::new(config.adam, &network.params())?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grad = network.zeros_like();
            let mut batch_loss = 0.0;
            let n = batch.len() as f64;
            for &i in batch {
                let ex = &train[i];
                let mode = Mode::Train {
                    dropout: config.dropout_rate,
                    rng: &mut dropout_rng,
                };
                let cache = network.forward(&ex.sequence.matrix, ex.sequence.valid_len, mode)?;
                let err = cache.score - ex.label as f64;
                batch_loss += err * err / n;
                network.backward(&cache, 2.0 * err / n, &mut grad)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged { epoch, batch: b });
            }
            if let Some(max_norm) = config.clip_norm {
                let norm = grad.to_flat().iter().map(|g| g * g).sum::<f64>().sqrt();
                if norm > max_norm {
                    let scale = max_norm / norm;
                    grad.params_mut()
                        .into_iter()
                        .for_each(|m| m.as_mut_slice().iter_mut().for_each(|g| *g *= scale));
                }
            }
            adam.step(&mut network.params_mut(), &grad.params())
                .map_err(|_| Error::Diverged { epoch, batch: b })?;
            loss_sum += batch_loss * n;
        }
        let record = EpochRecord {
            epoch: epoch + 1,
            train_loss: loss_sum / train.len() as f64,
            train_accuracy: accuracy(&network, train)?,
            validation_accuracy: if validation.is_empty() {
                None
            } else {
                Some(accuracy(&network, validation)?)
            },
        };
        let done = stop(&record);
        history.push(record);
        if done {
            break;
        }
    }
    Ok((network, history))
}

/// Scores a token stream. The stream is embedded with `max_len` positions;
/// an empty stream is an error.
pub fn predict(
    network: &BiLstmNetwork,
    stream: &TokenStream,
    embedding: &EmbeddingModel,
    threshold: f64,
    max_len: usize,
) -> Result<Prediction> {
    if embedding.dim() != network.config.input_dim {
        return Err(Error::Shape(format!(
            "embedding dim {} but the network expects {}",
            embedding.dim(),
            network.config.input_dim
        )));
    }
    let seq = embedding.embed_sequence(stream, max_len);
    let score = network.score(&seq.matrix, seq.valid_len)?;
    Ok(Prediction {
        score,
        label: label_for(score, threshold),
    })
}
