//! Sweep the two trade-off weights over a small grid with repeated seeds
//! and print per-cell mean accuracies.
//!
//! Usage: `cargo run --release --example parameter_sweep`

use hgda::model::HgdaConfig;
use hgda::synth::{generate_pair, GenSpec, MixtureComponent};
use hgda::trainer::train;
use rayon::prelude::*;

fn main() -> anyhow::Result<()> {
    let source_spec = GenSpec {
        name: "sweep-source".into(),
        num_nodes: 600,
        num_classes: 3,
        mean_degree: 8.0,
        homophily_mix: vec![MixtureComponent::new(1.0, 8.0, 2.0)],
        feature_dim: 16,
        class_center_scale: 1.0,
        feature_noise_sigma: 1.5,
        seed: 61,
    };
    let target_spec = GenSpec {
        name: "sweep-target".into(),
        homophily_mix: vec![MixtureComponent::new(1.0, 3.0, 7.0)],
        seed: 62,
        ..source_spec.clone()
    };
    let (source, target) = generate_pair(&source_spec, &target_spec)?;

    let alphas = [0.01, 0.1, 1.0];
    let betas = [0.01, 0.1, 1.0];
    let seeds = [0u64, 1, 2];

    let mut cells = Vec::new();
    for &alpha in &alphas {
        for &beta in &betas {
            cells.push((alpha, beta));
        }
    }
    let rows: Vec<(f64, f64, f64)> = cells
        .par_iter()
        .map(|&(alpha, beta)| {
            let mean: f64 = seeds
                .iter()
                .map(|&seed| {
                    let cfg = HgdaConfig {
                        hidden_dims: vec![32, 8],
                        epochs: 120,
                        lr: 0.01,
                        alpha,
                        beta,
                        seed,
                        ..HgdaConfig::default()
                    };
                    train(&source, &target, &cfg)
                        .expect("training run")
                        .1
                        .final_target_accuracy
                })
                .sum::<f64>()
                / seeds.len() as f64;
            (alpha, beta, mean)
        })
        .collect();

    println!("alpha   beta    mean target accuracy ({} seeds)", seeds.len());
    for (alpha, beta, mean) in rows {
        println!("{alpha:<6}  {beta:<6}  {mean:.4}");
    }
    Ok(())
}
