//! The three-channel filter network: homophilic (Ã), full-pass (I) and
//! heterophilic (L̃) propagation with one learnable gain per channel, summed
//! into a shared embedding and classified by a shared linear head. Per-channel
//! source/target embedding divergences form the alignment loss; the total
//! objective is `alignment + alpha·source_ce + beta·target_entropy`.

use std::rc::Rc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalized_adjacency, normalized_laplacian, Graph, SparseOperator};
use crate::mat::Mat;
use crate::nn::{leaf, Checkpoint, NnError, Tape, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("channel {0:?} is not enabled")]
    ChannelDisabled(Channel),
    #[error("graph features have width {got}, model expects {expected}")]
    FeatureDimMismatch { got: usize, expected: usize },
    #[error("config invalid: {0}")]
    BadConfig(String),
    #[error("checkpoint invalid: {0}")]
    BadCheckpoint(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Filter channel identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Channel {
    /// Homophilic (low-pass) filter, operator Ã.
    L,
    /// Full-pass filter, identity operator.
    F,
    /// Heterophilic (high-pass) filter, operator L̃.
    H,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::L, Channel::F, Channel::H];

    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::L => "L",
            Channel::F => "F",
            Channel::H => "H",
        }
    }

    pub fn parse(s: &str) -> Option<Channel> {
        match s {
            "L" => Some(Channel::L),
            "F" => Some(Channel::F),
            "H" => Some(Channel::H),
            _ => None,
        }
    }
}

fn default_hidden_dims() -> Vec<usize> {
    vec![128, 16]
}
fn default_dropout() -> f64 {
    0.5
}
fn default_channels() -> Vec<Channel> {
    Channel::ALL.to_vec()
}
fn default_true() -> bool {
    true
}
fn default_tradeoff() -> f64 {
    0.1
}
fn default_lr() -> f64 {
    5e-4
}
fn default_weight_decay() -> f64 {
    1e-4
}
fn default_epochs() -> usize {
    200
}

/// Training configuration. Every field has a default, so config files may
/// specify any subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HgdaConfig {
    #[serde(default = "default_hidden_dims")]
    pub hidden_dims: Vec<usize>,
    #[serde(default = "default_dropout")]
    pub dropout_p: f64,
    #[serde(default = "default_channels")]
    pub channels_enabled: Vec<Channel>,
    /// Include the per-channel alignment term. Disabling it with a single L
    /// channel and `beta = 0` gives the plain source-only GCN baseline.
    #[serde(default = "default_true")]
    pub align: bool,
    #[serde(default = "default_tradeoff")]
    pub alpha: f64,
    #[serde(default = "default_tradeoff")]
    pub beta: f64,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_weight_decay")]
    pub weight_decay: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for HgdaConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl HgdaConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.channels_enabled.is_empty() {
            return Err(ModelError::BadConfig("no channels enabled".into()));
        }
        for (i, c) in self.channels_enabled.iter().enumerate() {
            if self.channels_enabled[..i].contains(c) {
                return Err(ModelError::BadConfig(format!(
                    "channel {} enabled twice",
                    c.as_str()
                )));
            }
        }
        if self.hidden_dims.is_empty() || self.hidden_dims.contains(&0) {
            return Err(ModelError::BadConfig(
                "hidden_dims must be non-empty positive widths".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(ModelError::BadConfig(format!(
                "dropout_p {} outside [0, 1)",
                self.dropout_p
            )));
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(ModelError::BadConfig(
                "alpha and beta must be non-negative".into(),
            ));
        }
        if self.lr < 0.0 || self.weight_decay < 0.0 {
            return Err(ModelError::BadConfig(
                "lr and weight_decay must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// A graph with its normalized operators built once.
pub struct PreparedGraph {
    pub features: Mat,
    pub adjacency_norm: Rc<SparseOperator>,
    pub laplacian_norm: Rc<SparseOperator>,
    pub num_nodes: usize,
}

impl PreparedGraph {
    pub fn new(g: &Graph) -> Self {
        PreparedGraph {
            features: g.features().clone(),
            adjacency_norm: Rc::new(normalized_adjacency(g)),
            laplacian_norm: Rc::new(normalized_laplacian(g)),
            num_nodes: g.num_nodes(),
        }
    }
}

#[derive(Debug, Clone)]
struct ChannelNet {
    channel: Channel,
    weights: Vec<Mat>,
    gain: Mat,
}

/// Model parameters: per-channel weight stacks and gains plus the shared
/// classifier head.
#[derive(Debug, Clone)]
pub struct HgdaModel {
    channels: Vec<ChannelNet>,
    clf_w: Mat,
    clf_b: Mat,
    input_dim: usize,
    num_classes: usize,
}

fn glorot(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let mut m = Mat::zeros(rows, cols);
    for v in m.as_mut_slice() {
        *v = rng.random_range(-limit..limit);
    }
    m
}

impl HgdaModel {
    /// Glorot-uniform weights, channel gains at 1, zero classifier bias.
    pub fn init(
        cfg: &HgdaConfig,
        input_dim: usize,
        num_classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, ModelError> {
        cfg.validate()?;
        let mut widths = vec![input_dim];
        widths.extend(&cfg.hidden_dims);
        let channels = cfg
            .channels_enabled
            .iter()
            .map(|&channel| ChannelNet {
                channel,
                weights: widths
                    .windows(2)
                    .map(|w| glorot(w[0], w[1], rng))
                    .collect(),
                gain: Mat::scalar(1.0),
            })
            .collect();
        let embed_dim = *cfg.hidden_dims.last().expect("validated non-empty");
        Ok(HgdaModel {
            channels,
            clf_w: glorot(embed_dim, num_classes, rng),
            clf_b: Mat::zeros(1, num_classes),
            input_dim,
            num_classes,
        })
    }

    /// Rebuild a model from checkpoint tensors (channel-qualified names).
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, ModelError> {
        let mut channels = Vec::new();
        for channel in Channel::ALL {
            let prefix = format!("{}.W", channel.as_str());
            let mut weights = Vec::new();
            for l in 0.. {
                match ck.tensors.get(&format!("{prefix}{l}")) {
                    Some(w) => weights.push(w.clone()),
                    None => break,
                }
            }
            if weights.is_empty() {
                continue;
            }
            let gain = ck
                .tensors
                .get(&format!("alpha.{}", channel.as_str()))
                .cloned()
                .ok_or_else(|| {
                    ModelError::BadCheckpoint(format!("missing alpha.{}", channel.as_str()))
                })?;
            channels.push(ChannelNet {
                channel,
                weights,
                gain,
            });
        }
        if channels.is_empty() {
            return Err(ModelError::BadCheckpoint("no channel weights found".into()));
        }
        let clf_w = ck
            .tensors
            .get("clf.W")
            .cloned()
            .ok_or_else(|| ModelError::BadCheckpoint("missing clf.W".into()))?;
        let clf_b = ck
            .tensors
            .get("clf.b")
            .cloned()
            .ok_or_else(|| ModelError::BadCheckpoint("missing clf.b".into()))?;
        let input_dim = channels[0].weights[0].rows();
        let num_classes = clf_w.cols();
        Ok(HgdaModel {
            channels,
            clf_w,
            clf_b,
            input_dim,
            num_classes,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn enabled_channels(&self) -> Vec<Channel> {
        self.channels.iter().map(|c| c.channel).collect()
    }

    /// Parameters in registration order with their checkpoint names.
    pub fn params(&self) -> Vec<(String, &Mat)> {
        let mut out = Vec::new();
        for ch in &self.channels {
            for (l, w) in ch.weights.iter().enumerate() {
                out.push((format!("{}.W{l}", ch.channel.as_str()), w));
            }
            out.push((format!("alpha.{}", ch.channel.as_str()), &ch.gain));
        }
        out.push(("clf.W".into(), &self.clf_w));
        out.push(("clf.b".into(), &self.clf_b));
        out
    }

    pub fn param_names(&self) -> Vec<String> {
        self.params().into_iter().map(|(n, _)| n).collect()
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.params().into_iter().map(|(_, m)| m.shape()).collect()
    }

    /// Mutable parameter references in the same order as [`Self::params`].
    pub fn params_mut(&mut self) -> Vec<&mut Mat> {
        let mut out = Vec::new();
        for ch in &mut self.channels {
            for w in &mut ch.weights {
                out.push(w);
            }
            out.push(&mut ch.gain);
        }
        out.push(&mut self.clf_w);
        out.push(&mut self.clf_b);
        out
    }

    /// Create leaf tensors for every parameter on `tape`. The same binding
    /// serves both domain forwards, so one backward pass accumulates
    /// gradients from source and target paths alike. `dropout_p` applies to
    /// training forwards; eval forwards ignore it.
    pub fn bind(&self, tape: &Rc<Tape>, dropout_p: f64) -> ModelBinding {
        ModelBinding {
            tape: Rc::clone(tape),
            channels: self
                .channels
                .iter()
                .map(|ch| BoundChannel {
                    channel: ch.channel,
                    weights: ch
                        .weights
                        .iter()
                        .map(|w| leaf(tape, w.clone(), true))
                        .collect(),
                    gain: leaf(tape, ch.gain.clone(), true),
                })
                .collect(),
            clf_w: leaf(tape, self.clf_w.clone(), true),
            clf_b: leaf(tape, self.clf_b.clone(), true),
            input_dim: self.input_dim,
            dropout_p,
        }
    }

    /// Eval-mode logits without keeping a tape around.
    pub fn logits(&self, prep: &PreparedGraph) -> Result<Mat, ModelError> {
        let tape = Tape::new();
        let binding = self.bind(&tape, 0.0);
        let out = binding.forward(prep, false, None)?;
        Ok(out.logits.value())
    }
}

struct BoundChannel {
    channel: Channel,
    weights: Vec<Tensor>,
    gain: Tensor,
}

/// Model parameters materialized as tape leaves.
pub struct ModelBinding {
    tape: Rc<Tape>,
    channels: Vec<BoundChannel>,
    clf_w: Tensor,
    clf_b: Tensor,
    input_dim: usize,
    dropout_p: f64,
}

/// Embeddings and logits from one domain forward.
pub struct ForwardOutput {
    /// Final embedding of each enabled channel, in enabled order.
    pub channel_embeddings: Vec<(Channel, Tensor)>,
    /// Sum of channel embeddings.
    pub embedding: Tensor,
    pub logits: Tensor,
}

impl ModelBinding {
    /// Parameter gradients in registration order (zeros where a parameter
    /// was not reached).
    pub fn grads(&self) -> Vec<Mat> {
        let mut out = Vec::new();
        let mut take = |t: &Tensor| {
            let (r, c) = t.shape();
            out.push(t.grad().unwrap_or_else(|| Mat::zeros(r, c)));
        };
        for ch in &self.channels {
            for w in &ch.weights {
                take(w);
            }
            take(&ch.gain);
        }
        take(&self.clf_w);
        take(&self.clf_b);
        out
    }

    fn bound(&self, channel: Channel) -> Result<&BoundChannel, ModelError> {
        self.channels
            .iter()
            .find(|c| c.channel == channel)
            .ok_or(ModelError::ChannelDisabled(channel))
    }

    /// One channel's embedding: layers of `relu(gain · Op · H · W)` with
    /// dropout after each hidden activation while training.
    pub fn forward_channel(
        &self,
        channel: Channel,
        prep: &PreparedGraph,
        training: bool,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Tensor, ModelError> {
        let ch = self.bound(channel)?;
        if prep.features.cols() != self.input_dim {
            return Err(ModelError::FeatureDimMismatch {
                got: prep.features.cols(),
                expected: self.input_dim,
            });
        }
        let mut h = leaf(&self.tape, prep.features.clone(), false);
        let last = ch.weights.len() - 1;
        for (l, w) in ch.weights.iter().enumerate() {
            let filtered = match channel {
                Channel::L => h.sparse_mul(&prep.adjacency_norm)?,
                Channel::F => h, // identity operator
                Channel::H => h.sparse_mul(&prep.laplacian_norm)?,
            };
            h = filtered.matmul(w)?.scale_by(&ch.gain)?.relu();
            if training && l < last && self.dropout_p > 0.0 {
                let r = rng
                    .as_deref_mut()
                    .expect("training forward needs an rng for dropout");
                h = h.dropout(self.dropout_p, true, r)?;
            }
        }
        Ok(h)
    }

    /// Full forward: sum the enabled channel embeddings and classify.
    pub fn forward(
        &self,
        prep: &PreparedGraph,
        training: bool,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardOutput, ModelError> {
        let mut embeddings = Vec::with_capacity(self.channels.len());
        for ch in &self.channels {
            let z = self.forward_channel(ch.channel, prep, training, rng.as_deref_mut())?;
            embeddings.push((ch.channel, z));
        }
        let mut fused = embeddings[0].1.clone();
        for (_, z) in &embeddings[1..] {
            fused = fused.add(z)?;
        }
        let logits = fused.matmul(&self.clf_w)?.add_bias_row(&self.clf_b)?;
        Ok(ForwardOutput {
            channel_embeddings: embeddings,
            embedding: fused,
            logits,
        })
    }
}

/// Sum of per-channel embedding divergences between the two domains.
pub fn alignment_loss(
    source: &ForwardOutput,
    target: &ForwardOutput,
) -> Result<Tensor, ModelError> {
    let mut total: Option<Tensor> = None;
    for ((cs, zs), (ct, zt)) in source
        .channel_embeddings
        .iter()
        .zip(&target.channel_embeddings)
    {
        debug_assert_eq!(cs, ct);
        let kl = zs.gaussian_kl(zt)?;
        total = Some(match total {
            None => kl,
            Some(acc) => acc.add(&kl)?,
        });
    }
    Ok(total.expect("at least one channel"))
}

/// Scalar loss components of one training step, recorded as plain values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    pub alignment: f64,
    pub source_ce: f64,
    pub target_entropy: f64,
}

/// The assembled objective and its component record.
pub struct TotalLoss {
    pub tensor: Tensor,
    pub terms: LossTerms,
}

/// `alignment + alpha·source_ce + beta·target_entropy` over one
/// source/target forward pair. With `align` off the alignment term is
/// omitted (recorded as 0).
pub fn total_loss(
    source: &ForwardOutput,
    source_labels: &[usize],
    target: &ForwardOutput,
    cfg: &HgdaConfig,
) -> Result<TotalLoss, ModelError> {
    let l_s = source.logits.cross_entropy(source_labels)?;
    let l_t = target.logits.mean_entropy()?;
    let l_h = if cfg.align {
        Some(alignment_loss(source, target)?)
    } else {
        None
    };
    let weighted = l_s
        .scale_const(cfg.alpha)
        .add(&l_t.scale_const(cfg.beta))?;
    let tensor = match &l_h {
        Some(h) => h.add(&weighted)?,
        None => weighted,
    };
    let terms = LossTerms {
        total: tensor.scalar_value(),
        alignment: l_h.as_ref().map_or(0.0, Tensor::scalar_value),
        source_ce: l_s.scalar_value(),
        target_entropy: l_t.scalar_value(),
    };
    Ok(TotalLoss { tensor, terms })
}
