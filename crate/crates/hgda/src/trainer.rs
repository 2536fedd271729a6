//! Training loop, evaluation, subgroup accuracy analysis, and the four
//! divergence diagnostics of the adaptation bound.
//!
//! One run: forward all enabled channels on both graphs each epoch, assemble
//! `alignment + alpha·source_ce + beta·target_entropy`, backprop, Adam step;
//! repeat for a fixed epoch count (no early stopping — the target is
//! unlabeled during training), then predict target labels. Fixed seed and
//! fixed inputs give a bit-identical report.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{normalized_adjacency, normalized_laplacian, Graph, GraphError};
use crate::homophily::{
    heterophily_histogram, kl_histogram, subgroup_profile, HomophilyError, SubgroupProfile,
};
use crate::mat::Mat;
use crate::model::{
    total_loss, HgdaConfig, HgdaModel, LossTerms, ModelError, PreparedGraph,
};
use crate::nn::{gaussian_kl_value, AdamState, Tape};

const STREAM_INIT: u64 = 0;
const STREAM_DROPOUT: u64 = 1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("source must be labeled")]
    SourceUnlabeled,
    #[error("target must be labeled for evaluation")]
    TargetUnlabeled,
    #[error("graph must be labeled for evaluation")]
    GraphUnlabeled,
    #[error("feature width mismatch: source {src}, target {tgt}")]
    FeatureWidthMismatch { src: usize, tgt: usize },
    #[error("class count mismatch: source {src}, target {tgt}")]
    ClassCountMismatch { src: usize, tgt: usize },
    #[error("graphs must have at least 2 nodes for distribution diagnostics, got {0}")]
    TooFewNodes(usize),
    #[error("loss component {component} became non-finite at epoch {epoch}")]
    NonFinite { component: &'static str, epoch: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Homophily(#[from] HomophilyError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Loss components and eval-mode accuracies for one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_h: f64,
    pub loss_s: f64,
    pub loss_t: f64,
    pub src_acc: f64,
    pub tgt_acc: f64,
}

/// The four divergence terms of the adaptation bound, measured on a graph
/// pair: Gaussian moment-matching KL on the rows of ÃX, X and L̃X, plus the
/// heterophily-histogram KL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundDiagnostics {
    #[serde(rename = "kl_AX")]
    pub kl_ax: f64,
    #[serde(rename = "kl_X")]
    pub kl_x: f64,
    #[serde(rename = "kl_LX")]
    pub kl_lx: f64,
    pub kl_heterophily_hist: f64,
}

/// Serializable record of one training run. Wall-clock time is kept in
/// memory but never serialized, so reports from identical runs are
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: HgdaConfig,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    pub final_source_accuracy: f64,
    pub final_target_accuracy: f64,
    pub subgroup: SubgroupProfile,
    pub diagnostics: BoundDiagnostics,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl ExperimentReport {
    /// Per-epoch series as CSV with the standard header.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("epoch,loss_total,loss_H,loss_S,loss_T,src_acc,tgt_acc\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                e.epoch, e.loss_total, e.loss_h, e.loss_s, e.loss_t, e.src_acc, e.tgt_acc
            ));
        }
        out
    }
}

fn argmax_rows(m: &Mat) -> Vec<usize> {
    (0..m.rows())
        .map(|r| {
            let row = m.row(r);
            let mut best = 0;
            for (i, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

fn accuracy(preds: &[usize], g: &Graph) -> f64 {
    let correct = preds
        .iter()
        .enumerate()
        .filter(|&(v, &p)| g.label(v) == Some(p))
        .count();
    correct as f64 / g.num_nodes() as f64
}

fn evaluate_prepared(
    model: &HgdaModel,
    prep: &PreparedGraph,
    g: &Graph,
) -> Result<(f64, Vec<usize>), TrainError> {
    let logits = model.logits(prep)?;
    let preds = argmax_rows(&logits);
    Ok((accuracy(&preds, g), preds))
}

/// Argmax predictions and whole-graph accuracy in eval mode. Labels are
/// used only for scoring; isolated nodes count like any other node.
pub fn evaluate(model: &HgdaModel, g: &Graph) -> Result<(f64, Vec<usize>), TrainError> {
    if !g.is_fully_labeled() {
        return Err(TrainError::GraphUnlabeled);
    }
    evaluate_prepared(model, &PreparedGraph::new(g), g)
}

/// Subgroup profile of the pair using the model's target predictions.
pub fn subgroup_accuracy(
    model: &HgdaModel,
    source: &Graph,
    target: &Graph,
) -> Result<SubgroupProfile, TrainError> {
    let (_, preds) = evaluate(model, target)?;
    Ok(subgroup_profile(source, target, Some(&preds))?)
}

/// The four bound terms for a source/target pair. All are zero when called
/// with the same graph twice.
pub fn bound_diagnostics(source: &Graph, target: &Graph) -> Result<BoundDiagnostics, TrainError> {
    if source.feature_dim() != target.feature_dim() {
        return Err(TrainError::FeatureWidthMismatch {
            src: source.feature_dim(),
            tgt: target.feature_dim(),
        });
    }
    let small = source.num_nodes().min(target.num_nodes());
    if small < 2 {
        return Err(TrainError::TooFewNodes(small));
    }
    let xs = source.features();
    let xt = target.features();
    let a_s = normalized_adjacency(source);
    let a_t = normalized_adjacency(target);
    let l_s = normalized_laplacian(source);
    let l_t = normalized_laplacian(target);
    let kl_ax = gaussian_kl_value(&a_s.mul_dense(xs)?, &a_t.mul_dense(xt)?);
    let kl_x = gaussian_kl_value(xs, xt);
    let kl_lx = gaussian_kl_value(&l_s.mul_dense(xs)?, &l_t.mul_dense(xt)?);
    let hs = heterophily_histogram(source)?;
    let ht = heterophily_histogram(target)?;
    let kl_heterophily_hist = kl_histogram(&hs, &ht)?;
    Ok(BoundDiagnostics {
        kl_ax,
        kl_x,
        kl_lx,
        kl_heterophily_hist,
    })
}

/// Eval-mode loss components for a trained model on a pair (dropout off,
/// no gradients kept).
pub fn measure_losses_eval(
    model: &HgdaModel,
    source: &Graph,
    target: &Graph,
    cfg: &HgdaConfig,
) -> Result<LossTerms, TrainError> {
    let labels = source.label_vec().ok_or(TrainError::SourceUnlabeled)?;
    let prep_s = PreparedGraph::new(source);
    let prep_t = PreparedGraph::new(target);
    let tape = Tape::new();
    let binding = model.bind(&tape, 0.0);
    let out_s = binding.forward(&prep_s, false, None)?;
    let out_t = binding.forward(&prep_t, false, None)?;
    Ok(total_loss(&out_s, &labels, &out_t, cfg)?.terms)
}

fn check_finite(terms: &LossTerms, epoch: usize) -> Result<(), TrainError> {
    for (component, value) in [
        ("L_H", terms.alignment),
        ("L_S", terms.source_ce),
        ("L_T", terms.target_entropy),
        ("total", terms.total),
    ] {
        if !value.is_finite() {
            return Err(TrainError::NonFinite { component, epoch });
        }
    }
    Ok(())
}

/// Train on a labeled source and unlabeled-during-training target, then
/// evaluate, profile subgroups, and measure the bound diagnostics.
/// Deterministic for a fixed config and inputs; inputs are never mutated.
pub fn train(
    source: &Graph,
    target: &Graph,
    cfg: &HgdaConfig,
) -> Result<(HgdaModel, ExperimentReport), TrainError> {
    let started = Instant::now();
    cfg.validate()?;
    if !source.is_fully_labeled() {
        return Err(TrainError::SourceUnlabeled);
    }
    if !target.is_fully_labeled() {
        return Err(TrainError::TargetUnlabeled);
    }
    if source.feature_dim() != target.feature_dim() {
        return Err(TrainError::FeatureWidthMismatch {
            src: source.feature_dim(),
            tgt: target.feature_dim(),
        });
    }
    if source.num_classes() != target.num_classes() {
        return Err(TrainError::ClassCountMismatch {
            src: source.num_classes(),
            tgt: target.num_classes(),
        });
    }
    let labels = source.label_vec().expect("checked fully labeled");
    let prep_s = PreparedGraph::new(source);
    let prep_t = PreparedGraph::new(target);

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_rng.set_stream(STREAM_INIT);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(STREAM_DROPOUT);

    let mut model = HgdaModel::init(cfg, source.feature_dim(), source.num_classes(), &mut init_rng)?;
    let mut adam = AdamState::new(cfg.lr, cfg.weight_decay, &model.param_shapes());

    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let tape = Tape::new();
        let binding = model.bind(&tape, cfg.dropout_p);
        let out_s = binding.forward(&prep_s, true, Some(&mut dropout_rng))?;
        let out_t = binding.forward(&prep_t, true, Some(&mut dropout_rng))?;
        let loss = total_loss(&out_s, &labels, &out_t, cfg)?;
        check_finite(&loss.terms, epoch)?;
        loss.tensor.backward().map_err(ModelError::Nn)?;
        let grads = binding.grads();
        {
            let mut params = model.params_mut();
            adam.step(&mut params, &grads);
        }
        let (src_acc, _) = evaluate_prepared(&model, &prep_s, source)?;
        let (tgt_acc, _) = evaluate_prepared(&model, &prep_t, target)?;
        epochs.push(EpochRecord {
            epoch,
            loss_total: loss.terms.total,
            loss_h: loss.terms.alignment,
            loss_s: loss.terms.source_ce,
            loss_t: loss.terms.target_entropy,
            src_acc,
            tgt_acc,
        });
    }

    let (final_source_accuracy, _) = evaluate_prepared(&model, &prep_s, source)?;
    let (final_target_accuracy, preds) = evaluate_prepared(&model, &prep_t, target)?;
    let subgroup = subgroup_profile(source, target, Some(&preds))?;
    let diagnostics = bound_diagnostics(source, target)?;
    let report = ExperimentReport {
        config: cfg.clone(),
        seed: cfg.seed,
        epochs,
        final_source_accuracy,
        final_target_accuracy,
        subgroup,
        diagnostics,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    };
    Ok((model, report))
}

/// Spearman rank correlation with average ranks for ties. `None` when fewer
/// than two points or either side has zero rank variance.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return None;
    }
    Some(cov / (vx * vy).sqrt())
}

fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).expect("finite values"));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}
