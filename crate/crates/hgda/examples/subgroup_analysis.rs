//! Reproduce the subgroup study: bin nodes by homophily ratio, compare the
//! per-bin node proportions of the two domains, and score a source-only
//! baseline per bin. Bins where the domains disagree most tend to be the
//! bins where target accuracy drops.
//!
//! Usage: `cargo run --release --example subgroup_analysis`

use hgda::model::{Channel, HgdaConfig};
use hgda::synth::{generate_pair, GenSpec, MixtureComponent};
use hgda::trainer::{spearman, subgroup_accuracy, train};

fn main() -> anyhow::Result<()> {
    let source_spec = GenSpec {
        name: "sub-source".into(),
        num_nodes: 1000,
        num_classes: 3,
        mean_degree: 8.0,
        homophily_mix: vec![MixtureComponent::new(1.0, 8.0, 2.0)],
        feature_dim: 16,
        class_center_scale: 1.0,
        feature_noise_sigma: 1.8,
        seed: 41,
    };
    let target_spec = GenSpec {
        name: "sub-target".into(),
        homophily_mix: vec![MixtureComponent::new(1.0, 3.0, 7.0)],
        seed: 42,
        ..source_spec.clone()
    };
    let (source, target) = generate_pair(&source_spec, &target_spec)?;

    let baseline = HgdaConfig {
        hidden_dims: vec![32, 8],
        channels_enabled: vec![Channel::L],
        align: false,
        alpha: 1.0,
        beta: 0.0,
        epochs: 150,
        lr: 0.01,
        seed: 3,
        ..HgdaConfig::default()
    };
    let (model, _) = train(&source, &target, &baseline)?;
    let profile = subgroup_accuracy(&model, &source, &target)?;

    println!("homophily bin   src prop  tgt prop   |diff|   tgt nodes  baseline acc");
    let mut diffs = Vec::new();
    let mut accs = Vec::new();
    for b in 0..profile.source_proportion.len() {
        let acc_str = match profile.target_accuracy[b] {
            Some(a) => format!("{a:.4}"),
            None => "-".into(),
        };
        println!(
            "  [{:.1}, {:.1}{}    {:.3}     {:.3}     {:.3}    {:6}     {}",
            profile.bin_edges[b],
            profile.bin_edges[b + 1],
            if b + 1 == profile.source_proportion.len() { "]" } else { ")" },
            profile.source_proportion[b],
            profile.target_proportion[b],
            profile.abs_difference[b],
            profile.target_count[b],
            acc_str
        );
        if profile.target_count[b] >= 20 {
            if let Some(a) = profile.target_accuracy[b] {
                diffs.push(profile.abs_difference[b]);
                accs.push(a);
            }
        }
    }
    match spearman(&diffs, &accs) {
        Some(rho) => println!(
            "\nSpearman(|proportion difference|, accuracy) over {} bins = {rho:+.3}",
            diffs.len()
        ),
        None => println!("\ntoo few populated bins for a rank correlation"),
    }
    Ok(())
}
