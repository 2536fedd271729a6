//! Finite-difference suites shared by the gradcheck target and the
//! acceptance criterion: every differentiable operation plus the full
//! three-channel composite objective, each over `trials` random small
//! instances.

use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hgda::graph::normalized_adjacency;
use hgda::mat::Mat;
use hgda::model::{total_loss, HgdaConfig, HgdaModel, PreparedGraph};
use hgda::nn::Tape;
use hgda::synth::{generate_pair, GenSpec, MixtureComponent};

use super::{check_gradients, random_graph, random_mat, random_mat_away_from_zero, FD_H, FD_TOL};

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.random_range(2..=8), rng.random_range(2..=8))
}

pub fn matmul_add(trials: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for _ in 0..trials {
        let (n, k) = dims(&mut rng);
        let m = rng.random_range(2..=8);
        let a = random_mat(n, k, -1.0, 1.0, &mut rng);
        let b = random_mat(k, m, -1.0, 1.0, &mut rng);
        let c = random_mat(n, m, -1.0, 1.0, &mut rng);
        check_gradients("matmul+add", &[a, b, c], |leaves, _| {
            leaves[0]
                .matmul(&leaves[1])
                .unwrap()
                .add(&leaves[2])
                .unwrap()
                .sum()
        });
    }
}

pub fn scale_ops(trials: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..trials {
        let (n, k) = dims(&mut rng);
        let x = random_mat(n, k, -1.0, 1.0, &mut rng);
        let s = random_mat(1, 1, 0.2, 2.0, &mut rng);
        check_gradients("scale_by/scale_const", &[x, s], |leaves, _| {
            leaves[0]
                .scale_by(&leaves[1])
                .unwrap()
                .scale_const(-0.37)
                .sum()
        });
    }
}

pub fn relu(trials: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..trials {
        let (n, k) = dims(&mut rng);
        let x = random_mat_away_from_zero(n, k, 10.0 * FD_H, &mut rng);
        let w = random_mat(k, 3, -1.0, 1.0, &mut rng);
        check_gradients("relu", &[x, w], |leaves, _| {
            leaves[0].relu().matmul(&leaves[1]).unwrap().sum()
        });
    }
}

pub fn dropout(trials: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for trial in 0..trials {
        let (n, k) = dims(&mut rng);
        let x = random_mat(n, k, -1.0, 1.0, &mut rng);
        let seed = 5000 + trial as u64;
        check_gradients("dropout", &[x], move |leaves, _| {
            // Same seed on every evaluation: the mask is a constant of the
            // check, independent of the perturbed values.
            let mut mask_rng = ChaCha8Rng::seed_from_u64(seed);
            leaves[0].dropout(0.5, true, &mut mask_rng).unwrap().sum()
        });
    }
}

pub fn softmax_rows(trials: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..trials {
        let (n, k) = dims(&mut rng);
        let x = random_mat(n, k, -2.0, 2.0, &mut rng);
        // A plain sum of softmax rows is constant (each row sums to 1), so
        // project through fixed random weights to exercise the Jacobian.
        let proj = random_mat(k, 2, -1.0, 1.0, &mut rng);
        check_gradients("softmax_rows", &[x], move |leaves, tape| {
            let weights = hgda::nn::leaf(tape, proj.clone(), false);
            leaves[0].softmax_rows().matmul(&weights).unwrap().sum()
        });
    }
}

pub fn cross_entropy(trials: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    for _ in 0..trials {
        let (n, c) = dims(&mut rng);
        let z = random_mat(n, c, -2.0, 2.0, &mut rng);
        let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..c)).collect();
        check_gradients("cross_entropy", &[z], move |leaves, _| {
            leaves[0].cross_entropy(&labels).unwrap()
        });
    }
}

pub fn mean_entropy(trials: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    for _ in 0..trials {
        let (n, c) = dims(&mut rng);
        let z = random_mat(n, c, -2.0, 2.0, &mut rng);
        check_gradients("mean_entropy", &[z], |leaves, _| {
            leaves[0].mean_entropy().unwrap()
        });
    }
}

pub fn gaussian_kl(trials: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for _ in 0..trials {
        let m = rng.random_range(1..=6);
        let ns = rng.random_range(3..=8);
        let nt = rng.random_range(3..=8);
        let zs = random_mat(ns, m, -1.5, 1.5, &mut rng);
        let zt = random_mat(nt, m, -1.5, 1.5, &mut rng);
        check_gradients("gaussian_kl", &[zs, zt], |leaves, _| {
            leaves[0].gaussian_kl(&leaves[1]).unwrap()
        });
    }
}

pub fn sparse_mul(trials: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    for trial in 0..trials {
        let n = rng.random_range(3..=8);
        let w = rng.random_range(2..=5);
        let g = random_graph(n, 2, 0.5, 9000 + trial as u64);
        let op = Rc::new(normalized_adjacency(&g));
        let x = random_mat(n, w, -1.0, 1.0, &mut rng);
        check_gradients("sparse_mul", &[x], move |leaves, _| {
            leaves[0].sparse_mul(&op).unwrap().sum()
        });
    }
}

pub fn bias_row(trials: usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(109);
    for _ in 0..trials {
        let (n, c) = dims(&mut rng);
        let x = random_mat(n, c, -1.0, 1.0, &mut rng);
        let b = random_mat(1, c, -1.0, 1.0, &mut rng);
        check_gradients("add_bias_row", &[x, b], |leaves, _| {
            leaves[0].add_bias_row(&leaves[1]).unwrap().sum()
        });
    }
}

/// The full three-channel forward on a small shifted pair, composed into
/// `alignment + alpha·source_ce + beta·target_entropy`, checked over every
/// model parameter entry.
pub fn composite(trials: usize) {
    let mk = |seed: u64, a: f64, b: f64| GenSpec {
        name: "fd".into(),
        num_nodes: 8,
        num_classes: 2,
        mean_degree: 2.0,
        homophily_mix: vec![MixtureComponent::new(1.0, a, b)],
        feature_dim: 3,
        class_center_scale: 1.0,
        feature_noise_sigma: 0.8,
        seed,
    };
    let cfg = HgdaConfig {
        hidden_dims: vec![4, 3],
        dropout_p: 0.0,
        alpha: 0.7,
        beta: 0.4,
        epochs: 0,
        ..HgdaConfig::default()
    };

    for trial in 0..trials as u64 {
        let (source, target) =
            generate_pair(&mk(40 + trial, 8.0, 2.0), &mk(90 + trial, 2.0, 8.0)).expect("valid specs");
        let labels = source.label_vec().unwrap();
        let prep_s = PreparedGraph::new(&source);
        let prep_t = PreparedGraph::new(&target);
        let mut init_rng = ChaCha8Rng::seed_from_u64(7 + trial);
        let template = HgdaModel::init(&cfg, 3, 2, &mut init_rng).unwrap();

        let eval = |params: &[Mat]| -> f64 {
            let mut model = template.clone();
            for (slot, value) in model.params_mut().into_iter().zip(params) {
                *slot = value.clone();
            }
            let tape = Tape::new();
            let binding = model.bind(&tape, 0.0);
            let out_s = binding.forward(&prep_s, false, None).unwrap();
            let out_t = binding.forward(&prep_t, false, None).unwrap();
            total_loss(&out_s, &labels, &out_t, &cfg).unwrap().terms.total
        };

        let params: Vec<Mat> = template.params().iter().map(|(_, m)| (*m).clone()).collect();
        let tape = Tape::new();
        let binding = template.bind(&tape, 0.0);
        let out_s = binding.forward(&prep_s, false, None).unwrap();
        let out_t = binding.forward(&prep_t, false, None).unwrap();
        let loss = total_loss(&out_s, &labels, &out_t, &cfg).unwrap();
        loss.tensor.backward().unwrap();
        let analytic = binding.grads();

        let mut work = params.clone();
        for which in 0..params.len() {
            let (rows, cols) = params[which].shape();
            for r in 0..rows {
                for c in 0..cols {
                    let orig = params[which].get(r, c);
                    work[which].set(r, c, orig + FD_H);
                    let plus = eval(&work);
                    work[which].set(r, c, orig - FD_H);
                    let minus = eval(&work);
                    work[which].set(r, c, orig);
                    let fd = (plus - minus) / (2.0 * FD_H);
                    let an = analytic[which].get(r, c);
                    let denom = an.abs().max(fd.abs()).max(1e-3);
                    assert!(
                        (an - fd).abs() / denom < FD_TOL,
                        "composite trial {trial}: param {which} ({r},{c}): analytic {an}, fd {fd}"
                    );
                }
            }
        }
    }
}

/// Every suite at the given trial count.
pub fn run_all(trials: usize) {
    matmul_add(trials);
    scale_ops(trials);
    relu(trials);
    dropout(trials);
    softmax_rows(trials);
    cross_entropy(trials);
    mean_entropy(trials);
    gaussian_kl(trials);
    sparse_mul(trials);
    bias_row(trials);
    composite(trials);
}
