//! Cross-entropy training, evaluation and the token-rate sweep.

use dyadic_tensor::{Adam, AdamConfig, Graph, Matrix};
use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fixture::{window_labels, FixtureConfig, FixtureSequence};
use crate::hidden::HiddenStates;
use crate::lm::{FrozenSpeechLm, LM_RATE};
use crate::metrics::{accuracy, group_3class, macro_prf, Prf, EMOTION_TOKENS};
use crate::mlp::{argmax_rows, Adapter, AdapterConfig};
use crate::{AdapterError, Result};

/// Which code the adapter predicts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "stream")]
pub enum CodeStream {
    Valence,
    Arousal,
    /// `vocab` gestures plus a null class with id `vocab`.
    Gesture { vocab: usize },
}

impl CodeStream {
    pub fn classes(self) -> usize {
        match self {
            Self::Valence | Self::Arousal => EMOTION_TOKENS,
            Self::Gesture { vocab } => vocab + 1,
        }
    }

    pub fn null_id(self) -> Option<usize> {
        match self {
            Self::Gesture { vocab } => Some(vocab),
            _ => None,
        }
    }

    pub fn is_emotion(self) -> bool {
        !matches!(self, Self::Gesture { .. })
    }
}

/// Hidden states of one utterance with its gold codes at the training rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainPair {
    pub hidden: HiddenStates,
    pub codes: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdapterTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Codes per second.
    pub rate: f64,
    pub width: usize,
    pub layers: usize,
    pub seed: u64,
}

impl Default for AdapterTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 64,
            lr: 1e-3,
            rate: 2.0,
            width: 512,
            layers: 2,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    /// Macro scores; the null gesture is left out.
    pub prf: Prf,
    /// Accuracy after coarsening emotion tokens to three groups.
    pub grouped_accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid: Option<Scores>,
}

#[derive(Clone, Debug)]
pub struct TrainedAdapter {
    pub adapter: Adapter,
    pub stream: CodeStream,
    pub rate: f64,
    pub history: Vec<EpochMetrics>,
}

/// Per-window predictions ready to become a categorical condition block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodePrediction {
    pub stream: CodeStream,
    pub rate: f64,
    pub ids: Vec<usize>,
    pub logits: Matrix,
}

impl CodePrediction {
    /// One id per motion frame: frame `t` takes the window its time falls in.
    pub fn to_frames(&self, frames: usize, fps: f64) -> Vec<usize> {
        (0..frames)
            .map(|t| {
                let w = (t as f64 / fps * self.rate + 1e-9) as usize;
                self.ids[w.min(self.ids.len().saturating_sub(1))]
            })
            .collect()
    }
}

impl TrainedAdapter {
    pub fn predict(&self, hidden: &HiddenStates) -> Result<CodePrediction> {
        let logits = self.adapter.logits(&hidden.at_rate(self.rate)?)?;
        Ok(CodePrediction {
            stream: self.stream,
            rate: self.rate,
            ids: argmax_rows(&logits),
            logits,
        })
    }
}

/// Stacks resampled hidden states and checks labels against the stream.
fn stack_rows(pairs: &[TrainPair], stream: CodeStream, rate: f64) -> Result<(Matrix, Vec<usize>)> {
    let mut parts = Vec::with_capacity(pairs.len());
    let mut labels = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let h = p.hidden.at_rate(rate)?;
        if h.rows() != p.codes.len() {
            return Err(AdapterError::Data(format!(
                "pair {i}: {} windows at {rate}/s but {} codes",
                h.rows(),
                p.codes.len()
            )));
        }
        if let Some(&bad) = p.codes.iter().find(|&&c| c >= stream.classes()) {
            return Err(AdapterError::Data(format!(
                "pair {i}: code {bad} outside the {} classes of {stream:?}",
                stream.classes()
            )));
        }
        parts.push(h);
        labels.extend_from_slice(&p.codes);
    }
    if parts.is_empty() {
        return Err(AdapterError::Data("no training pairs".into()));
    }
    Ok((Matrix::concat_rows(&parts.iter().collect::<Vec<_>>()), labels))
}

fn score(pred: &[usize], gold: &[usize], stream: CodeStream) -> Result<Scores> {
    let exclude: Vec<usize> = stream.null_id().into_iter().collect();
    let prf = match macro_prf(pred, gold, &exclude) {
        Ok(p) => p,
        // Every label is null: nothing to average, which scores as zero.
        Err(AdapterError::Domain(_)) => Prf {
            precision: 0.0,
            recall: 0.0,
            f1: 0.0,
        },
        Err(e) => return Err(e),
    };
    let grouped_accuracy = if stream.is_emotion() {
        let g = |ids: &[usize]| ids.iter().map(|&i| group_3class(i)).collect::<Result<Vec<_>>>();
        Some(accuracy(&g(pred)?, &g(gold)?)?)
    } else {
        None
    };
    Ok(Scores {
        accuracy: accuracy(pred, gold)?,
        prf,
        grouped_accuracy,
    })
}

/// Scores a trained adapter on pairs at its own rate.
pub fn evaluate(model: &TrainedAdapter, pairs: &[TrainPair]) -> Result<Scores> {
    let (x, gold) = stack_rows(pairs, model.stream, model.rate)?;
    score(&model.adapter.predict(&x)?, &gold, model.stream)
}

/// Minibatch Adam on cross-entropy. Only the adapter's own parameters are
/// handed to the optimiser.
pub fn train_adapter(
    train: &[TrainPair],
    valid: &[TrainPair],
    stream: CodeStream,
    cfg: &AdapterTrainConfig,
) -> Result<TrainedAdapter> {
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(AdapterError::Domain("epochs, batch size and learning rate must be positive".into()));
    }
    let (x, y) = stack_rows(train, stream, cfg.rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let acfg = AdapterConfig {
        width: cfg.width,
        layers: cfg.layers,
        ..AdapterConfig::new(x.cols(), stream.classes())
    };
    let adapter = Adapter::new(acfg, &mut rng)?;
    let mut model = TrainedAdapter {
        adapter,
        stream,
        rate: cfg.rate,
        history: Vec::with_capacity(cfg.epochs),
    };
    let mut opt = Adam::new(
        AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        },
        model.adapter.store(),
    );
    let mut order: Vec<usize> = (0..x.rows()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = Matrix::from_rows(&batch.iter().map(|&i| x.row(i).to_vec()).collect::<Vec<_>>());
            let yb: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let mut g = Graph::new();
            let input = g.constant(xb);
            let logits = model.adapter.forward(&mut g, input)?;
            let loss = g.cross_entropy(logits, yb);
            total += g.value(loss).item() * batch.len() as f64;
            let grads = g.backward(loss);
            let pg = g.param_grads(&grads, model.adapter.store());
            opt.step(model.adapter.store_mut(), &pg);
        }
        let valid_scores = if valid.is_empty() {
            None
        } else {
            Some(evaluate(&model, valid)?)
        };
        let train_loss = total / x.rows() as f64;
        if let Some(s) = &valid_scores {
            info!(
                "epoch {} loss {train_loss:.4} valid acc {:.3} macro-F1 {:.3}",
                epoch + 1,
                s.accuracy,
                s.prf.f1
            );
        }
        model.history.push(EpochMetrics {
            epoch: epoch + 1,
            train_loss,
            valid: valid_scores,
        });
    }
    Ok(model)
}

/// Scores at one code rate in the token-rate comparison.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub rate: f64,
    /// Scores against the per-position labels, each position taking the
    /// prediction of the window it falls in.
    pub scores: Scores,
}

fn fixture_pairs(lm: &FrozenSpeechLm, seqs: &[FixtureSequence], rate: f64) -> Result<Vec<TrainPair>> {
    seqs.iter()
        .map(|s| {
            let hidden = lm.hidden_states(&s.tokens)?;
            let windows = hidden.at_rate(rate)?.rows();
            let codes = window_labels(&s.labels, LM_RATE, rate, windows)?;
            Ok(TrainPair { hidden, codes })
        })
        .collect()
}

/// Trains one gesture adapter per rate on a fixture and scores each on the
/// position-level labels of held-out sequences, so every rate is judged
/// against the same ground truth.
pub fn rate_sweep(
    lm: &FrozenSpeechLm,
    fixture: &FixtureConfig,
    train: &[FixtureSequence],
    test: &[FixtureSequence],
    rates: &[f64],
    cfg: &AdapterTrainConfig,
) -> Result<Vec<RateRow>> {
    let stream = CodeStream::Gesture {
        vocab: fixture.gestures,
    };
    rates
        .iter()
        .map(|&rate| {
            let pairs = fixture_pairs(lm, train, rate)?;
            let model = train_adapter(&pairs, &[], stream, &AdapterTrainConfig { rate, ..cfg.clone() })?;
            let (mut pred, mut gold) = (Vec::new(), Vec::new());
            for s in test {
                let p = model.predict(&lm.hidden_states(&s.tokens)?)?;
                pred.extend(p.to_frames(s.labels.len(), LM_RATE));
                gold.extend_from_slice(&s.labels);
            }
            Ok(RateRow {
                rate,
                scores: score(&pred, &gold, stream)?,
            })
        })
        .collect()
}

/// Window-level pairs for a fixture at `rate`.
pub fn pairs_from_fixture(lm: &FrozenSpeechLm, seqs: &[FixtureSequence], rate: f64) -> Result<Vec<TrainPair>> {
    fixture_pairs(lm, seqs, rate)
}
