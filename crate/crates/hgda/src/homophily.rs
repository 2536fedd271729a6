//! Homophily and heterophily measurement: per-node ratios, graph-level
//! histograms, divergences between histograms, and subgroup profiles.
//!
//! Histograms use 10 uniform bins on [0,1]. Interior bin edges belong to the
//! higher bin and the final bin is right-closed. Node-level values are exact
//! rationals (matching neighbors / degree), so binning is done in integer
//! arithmetic rather than on rounded floats.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;

/// Number of histogram bins.
pub const NUM_BINS: usize = 10;

/// Additive smoothing applied to both histogram arguments before KL.
pub const KL_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum HomophilyError {
    #[error("graph has no labels")]
    Unlabeled,
    #[error("node {0} has no label")]
    MissingLabel(usize),
    #[error("no labeled non-isolated nodes to bin")]
    NothingToBin,
    #[error("histograms have mismatched bin edges")]
    MismatchedBins,
    #[error("predictions length {got} does not match {expected} nodes")]
    PredictionLength { got: usize, expected: usize },
}

/// Binned empirical distribution of per-node homophily or heterophily
/// ratios. `mass` sums to 1 over the nodes counted; isolated nodes are
/// excluded and tallied in `num_excluded`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomophilyHistogram {
    pub bin_edges: Vec<f64>,
    pub mass: Vec<f64>,
    pub num_counted: usize,
    pub num_excluded: usize,
}

impl HomophilyHistogram {
    fn from_bin_counts(counts: [usize; NUM_BINS], num_excluded: usize) -> Self {
        let num_counted: usize = counts.iter().sum();
        let inv = 1.0 / num_counted as f64;
        HomophilyHistogram {
            bin_edges: default_bin_edges(),
            mass: counts.iter().map(|&c| c as f64 * inv).collect(),
            num_counted,
            num_excluded,
        }
    }

    /// Build directly from bin masses (they are normalized to sum 1).
    pub fn from_mass(mass: &[f64]) -> Self {
        assert_eq!(mass.len(), NUM_BINS, "expected {NUM_BINS} bins");
        let total: f64 = mass.iter().sum();
        HomophilyHistogram {
            bin_edges: default_bin_edges(),
            mass: mass.iter().map(|&m| m / total).collect(),
            num_counted: 0,
            num_excluded: 0,
        }
    }

    fn same_binning(&self, other: &Self) -> bool {
        self.bin_edges == other.bin_edges
    }
}

/// The standard edges 0.0, 0.1, ..., 1.0.
pub fn default_bin_edges() -> Vec<f64> {
    (0..=NUM_BINS).map(|i| i as f64 / NUM_BINS as f64).collect()
}

/// Bin index for the exact ratio `num/den`; edges go to the higher bin,
/// the last bin is right-closed.
pub fn bin_of_ratio(num: usize, den: usize) -> usize {
    debug_assert!(den > 0 && num <= den);
    ((NUM_BINS * num) / den).min(NUM_BINS - 1)
}

/// Matching-label and total neighbor counts for `v`; `None` for an isolated
/// node. Errors if `v` or any neighbor lacks a label.
pub fn neighbor_label_counts(
    g: &Graph,
    v: usize,
) -> Result<Option<(usize, usize)>, HomophilyError> {
    let nbrs = g.neighbors(v);
    if nbrs.is_empty() {
        return Ok(None);
    }
    let yv = g.label(v).ok_or(HomophilyError::MissingLabel(v))?;
    let mut same = 0;
    for &u in nbrs {
        let yu = g.label(u).ok_or(HomophilyError::MissingLabel(u))?;
        if yu == yv {
            same += 1;
        }
    }
    Ok(Some((same, nbrs.len())))
}

/// Local node homophily ratio: the fraction of one-hop neighbors sharing
/// `v`'s label. `None` for isolated nodes.
pub fn node_homophily(g: &Graph, v: usize) -> Result<Option<f64>, HomophilyError> {
    Ok(neighbor_label_counts(g, v)?.map(|(same, total)| same as f64 / total as f64))
}

/// Node heterophily `1 − node_homophily`. `None` for isolated nodes.
pub fn node_heterophily(g: &Graph, v: usize) -> Result<Option<f64>, HomophilyError> {
    Ok(neighbor_label_counts(g, v)?
        .map(|(same, total)| (total - same) as f64 / total as f64))
}

fn histogram_by(
    g: &Graph,
    count_of: impl Fn(usize, usize) -> usize,
) -> Result<HomophilyHistogram, HomophilyError> {
    if g.labels().is_none() {
        return Err(HomophilyError::Unlabeled);
    }
    let mut counts = [0usize; NUM_BINS];
    let mut excluded = 0usize;
    for v in 0..g.num_nodes() {
        match neighbor_label_counts(g, v)? {
            None => excluded += 1,
            Some((same, total)) => counts[bin_of_ratio(count_of(same, total), total)] += 1,
        }
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(HomophilyError::NothingToBin);
    }
    Ok(HomophilyHistogram::from_bin_counts(counts, excluded))
}

/// Empirical distribution of per-node heterophily values.
pub fn heterophily_histogram(g: &Graph) -> Result<HomophilyHistogram, HomophilyError> {
    histogram_by(g, |same, total| total - same)
}

/// Empirical distribution of per-node homophily values (the complementary
/// orientation, as plotted per homophily-ratio subgroup).
pub fn homophily_histogram(g: &Graph) -> Result<HomophilyHistogram, HomophilyError> {
    histogram_by(g, |same, _| same)
}

fn smoothed(mass: &[f64]) -> Vec<f64> {
    let total: f64 = mass.iter().map(|m| m + KL_EPSILON).sum();
    mass.iter().map(|m| (m + KL_EPSILON) / total).collect()
}

/// KL divergence between two histograms over the same binning. Both
/// arguments are ε-smoothed and renormalized so every bin is strictly
/// positive and the result is finite.
pub fn kl_histogram(
    p: &HomophilyHistogram,
    q: &HomophilyHistogram,
) -> Result<f64, HomophilyError> {
    if !p.same_binning(q) {
        return Err(HomophilyError::MismatchedBins);
    }
    let ps = smoothed(&p.mass);
    let qs = smoothed(&q.mass);
    Ok(ps
        .iter()
        .zip(&qs)
        .map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() } else { 0.0 })
        .sum())
}

/// 1-Wasserstein distance between two histograms over the same binning:
/// the absolute CDF difference summed over bins, times the bin width.
pub fn wasserstein1_histogram(
    p: &HomophilyHistogram,
    q: &HomophilyHistogram,
) -> Result<f64, HomophilyError> {
    if !p.same_binning(q) {
        return Err(HomophilyError::MismatchedBins);
    }
    let width = 1.0 / NUM_BINS as f64;
    let mut cdf_p = 0.0;
    let mut cdf_q = 0.0;
    let mut total = 0.0;
    for (a, b) in p.mass.iter().zip(&q.mass) {
        cdf_p += a;
        cdf_q += b;
        total += (cdf_p - cdf_q).abs() * width;
    }
    Ok(total)
}

/// Per-homophily-bin node proportions for a source/target pair, their
/// absolute differences, and (when predictions are supplied) per-bin target
/// accuracy. Bins with no target nodes have `None` accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupProfile {
    pub bin_edges: Vec<f64>,
    pub source_proportion: Vec<f64>,
    pub target_proportion: Vec<f64>,
    pub abs_difference: Vec<f64>,
    pub source_count: Vec<usize>,
    pub target_count: Vec<usize>,
    pub target_accuracy: Vec<Option<f64>>,
}

/// Bin both graphs' labeled non-isolated nodes by homophily ratio and
/// compare the per-bin proportions; optionally score `target_preds`
/// within each bin.
pub fn subgroup_profile(
    source: &Graph,
    target: &Graph,
    target_preds: Option<&[usize]>,
) -> Result<SubgroupProfile, HomophilyError> {
    if let Some(preds) = target_preds {
        if preds.len() != target.num_nodes() {
            return Err(HomophilyError::PredictionLength {
                got: preds.len(),
                expected: target.num_nodes(),
            });
        }
    }

    let bin_counts = |g: &Graph| -> Result<([usize; NUM_BINS], Vec<Option<usize>>), HomophilyError> {
        let mut counts = [0usize; NUM_BINS];
        let mut bins = vec![None; g.num_nodes()];
        for v in 0..g.num_nodes() {
            if let Some((same, total)) = neighbor_label_counts(g, v)? {
                let b = bin_of_ratio(same, total);
                counts[b] += 1;
                bins[v] = Some(b);
            }
        }
        Ok((counts, bins))
    };

    let (src_counts, _) = bin_counts(source)?;
    let (tgt_counts, tgt_bins) = bin_counts(target)?;
    let src_total: usize = src_counts.iter().sum();
    let tgt_total: usize = tgt_counts.iter().sum();
    if src_total == 0 || tgt_total == 0 {
        return Err(HomophilyError::NothingToBin);
    }

    let source_proportion: Vec<f64> = src_counts
        .iter()
        .map(|&c| c as f64 / src_total as f64)
        .collect();
    let target_proportion: Vec<f64> = tgt_counts
        .iter()
        .map(|&c| c as f64 / tgt_total as f64)
        .collect();
    let abs_difference = source_proportion
        .iter()
        .zip(&target_proportion)
        .map(|(&a, &b)| (a - b).abs())
        .collect();

    let target_accuracy = match target_preds {
        None => vec![None; NUM_BINS],
        Some(preds) => {
            let mut correct = [0usize; NUM_BINS];
            for (v, bin) in tgt_bins.iter().enumerate() {
                if let Some(b) = bin {
                    if target.label(v) == Some(preds[v]) {
                        correct[*b] += 1;
                    }
                }
            }
            (0..NUM_BINS)
                .map(|b| {
                    if tgt_counts[b] == 0 {
                        None
                    } else {
                        Some(correct[b] as f64 / tgt_counts[b] as f64)
                    }
                })
                .collect()
        }
    };

    Ok(SubgroupProfile {
        bin_edges: default_bin_edges(),
        source_proportion,
        target_proportion,
        abs_difference,
        source_count: src_counts.to_vec(),
        target_count: tgt_counts.to_vec(),
        target_accuracy,
    })
}
