//! Synthetic source/target graph pairs with controllable per-node homophily
//! distributions and Gaussian class features.
//!
//! Randomness comes from ChaCha8 keyed by the spec seed, with one stream per
//! purpose (class centers, source wiring/noise, target wiring/noise), so a
//! pair shares centers while drawing edges and noise independently, and the
//! same spec always yields byte-identical output.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Graph, GraphError};
use crate::mat::Mat;

const STREAM_CENTERS: u64 = 0;
const STREAM_SOURCE: u64 = 1;
const STREAM_TARGET: u64 = 2;

#[derive(Debug, Error)]
pub enum GenError {
    #[error("num_classes ({c}) exceeds num_nodes ({n})")]
    TooManyClasses { c: usize, n: usize },
    #[error("num_classes must be at least 1")]
    NoClasses,
    #[error("feature_dim must be at least 1")]
    NoFeatures,
    #[error("mean_degree must be at least 1, got {0}")]
    DegreeTooSmall(f64),
    #[error("feature_noise_sigma must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("homophily_mix is empty")]
    EmptyMix,
    #[error("homophily_mix weights sum to {0}, expected 1")]
    WeightsNotNormalized(f64),
    #[error("homophily_mix component {index} has non-positive shape ({a}, {b})")]
    BadBetaShape { index: usize, a: f64, b: f64 },
    #[error("homophily_mix component {0} has negative weight")]
    NegativeWeight(usize),
    #[error("pair specs disagree on {0}")]
    PairMismatch(&'static str),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// One Beta component of the per-node homophily mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub beta_a: f64,
    pub beta_b: f64,
}

impl MixtureComponent {
    pub fn new(weight: f64, beta_a: f64, beta_b: f64) -> Self {
        MixtureComponent {
            weight,
            beta_a,
            beta_b,
        }
    }

    pub fn mean(&self) -> f64 {
        self.beta_a / (self.beta_a + self.beta_b)
    }
}

/// Generator parameters. Serializes to/from JSON with these field names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub num_nodes: usize,
    pub num_classes: usize,
    pub mean_degree: f64,
    pub homophily_mix: Vec<MixtureComponent>,
    pub feature_dim: usize,
    pub class_center_scale: f64,
    pub feature_noise_sigma: f64,
    pub seed: u64,
}

fn default_name() -> String {
    "synthetic".into()
}

impl GenSpec {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.num_classes == 0 {
            return Err(GenError::NoClasses);
        }
        if self.num_classes > self.num_nodes {
            return Err(GenError::TooManyClasses {
                c: self.num_classes,
                n: self.num_nodes,
            });
        }
        if self.feature_dim == 0 {
            return Err(GenError::NoFeatures);
        }
        if self.mean_degree < 1.0 {
            return Err(GenError::DegreeTooSmall(self.mean_degree));
        }
        if !(self.feature_noise_sigma > 0.0) {
            return Err(GenError::NonPositiveSigma(self.feature_noise_sigma));
        }
        if self.homophily_mix.is_empty() {
            return Err(GenError::EmptyMix);
        }
        let mut total = 0.0;
        for (i, c) in self.homophily_mix.iter().enumerate() {
            if c.weight < 0.0 {
                return Err(GenError::NegativeWeight(i));
            }
            if !(c.beta_a > 0.0) || !(c.beta_b > 0.0) {
                return Err(GenError::BadBetaShape {
                    index: i,
                    a: c.beta_a,
                    b: c.beta_b,
                });
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(GenError::WeightsNotNormalized(total));
        }
        Ok(())
    }

    /// Expected homophily under the mixture.
    pub fn mixture_mean(&self) -> f64 {
        self.homophily_mix
            .iter()
            .map(|c| c.weight * c.mean())
            .sum()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn draw_centers(spec: &GenSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    (0..spec.num_classes)
        .map(|_| {
            (0..spec.feature_dim)
                .map(|_| spec.class_center_scale * normal.sample(rng))
                .collect()
        })
        .collect()
}

fn sample_target_homophily(spec: &GenSpec, rng: &mut ChaCha8Rng) -> f64 {
    let mut pick = rng.random::<f64>();
    let mut comp = &spec.homophily_mix[0];
    for c in &spec.homophily_mix {
        comp = c;
        if pick < c.weight {
            break;
        }
        pick -= c.weight;
    }
    Beta::new(comp.beta_a, comp.beta_b)
        .expect("validated shape")
        .sample(rng)
}

/// Wiring and feature-noise draws for one domain, with class centers fixed
/// by the caller.
fn generate_with_centers(
    spec: &GenSpec,
    centers: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
) -> Result<Graph, GenError> {
    let n = spec.num_nodes;
    let c = spec.num_classes;
    // Round-robin labels: class sizes differ by at most one.
    let labels: Vec<usize> = (0..n).map(|v| v % c).collect();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (v, &y) in labels.iter().enumerate() {
        members[y].push(v);
    }

    let stubs = spec.mean_degree.ceil() as usize;
    let mut edges = Vec::with_capacity(n * stubs);
    for v in 0..n {
        let y = labels[v];
        let h = sample_target_homophily(spec, rng);
        for _ in 0..stubs {
            let same_class = rng.random::<f64>() < h;
            let u = if same_class || c == 1 {
                // Uniform over the node's own class, excluding itself.
                let pool = &members[y];
                if pool.len() < 2 {
                    match draw_other_class(&members, y, n, pool.len(), rng) {
                        Some(u) => u,
                        None => continue, // single-node graph
                    }
                } else {
                    let mut idx = rng.random_range(0..pool.len() - 1);
                    if pool[idx] >= v {
                        idx += 1;
                    }
                    pool[idx]
                }
            } else {
                match draw_other_class(&members, y, n, members[y].len(), rng) {
                    Some(u) => u,
                    None => continue,
                }
            };
            edges.push((v, u));
        }
    }

    let normal = Normal::new(0.0, spec.feature_noise_sigma).expect("validated sigma");
    let mut features = Mat::zeros(n, spec.feature_dim);
    for v in 0..n {
        let center = &centers[labels[v]];
        let row = features.row_mut(v);
        for (x, &mu) in row.iter_mut().zip(center) {
            *x = mu + normal.sample(rng);
        }
    }

    Ok(Graph::new(
        spec.name.clone(),
        n,
        c,
        &edges,
        features,
        Some(labels.into_iter().map(Some).collect()),
    )?)
}

/// Uniform draw over nodes outside class `y`; `None` when no such node
/// exists.
fn draw_other_class(
    members: &[Vec<usize>],
    y: usize,
    n: usize,
    own_size: usize,
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    let outside = n - own_size;
    if outside == 0 {
        return None;
    }
    let mut k = rng.random_range(0..outside);
    for (cls, pool) in members.iter().enumerate() {
        if cls == y {
            continue;
        }
        if k < pool.len() {
            return Some(pool[k]);
        }
        k -= pool.len();
    }
    unreachable!("offset within non-class population")
}

/// Generate one graph. Deterministic in the spec (including the seed).
pub fn generate(spec: &GenSpec) -> Result<Graph, GenError> {
    spec.validate()?;
    let centers = draw_centers(spec, &mut stream_rng(spec.seed, STREAM_CENTERS));
    generate_with_centers(spec, &centers, &mut stream_rng(spec.seed, STREAM_SOURCE))
}

/// Generate a source/target pair sharing class feature centers (drawn from
/// the source seed) so that only structure and noise differ across domains.
pub fn generate_pair(
    source_spec: &GenSpec,
    target_spec: &GenSpec,
) -> Result<(Graph, Graph), GenError> {
    source_spec.validate()?;
    target_spec.validate()?;
    if source_spec.num_classes != target_spec.num_classes {
        return Err(GenError::PairMismatch("num_classes"));
    }
    if source_spec.feature_dim != target_spec.feature_dim {
        return Err(GenError::PairMismatch("feature_dim"));
    }
    let centers = draw_centers(
        source_spec,
        &mut stream_rng(source_spec.seed, STREAM_CENTERS),
    );
    let source = generate_with_centers(
        source_spec,
        &centers,
        &mut stream_rng(source_spec.seed, STREAM_SOURCE),
    )?;
    let target = generate_with_centers(
        target_spec,
        &centers,
        &mut stream_rng(target_spec.seed, STREAM_TARGET),
    )?;
    Ok((source, target))
}
