//! Compare the full three-channel model against its single-channel
//! variants and the plain source-only baseline on one shifted pair.
//!
//! Usage: `cargo run --release --example ablation_variants`

use hgda::model::{Channel, HgdaConfig};
use hgda::synth::{generate_pair, GenSpec, MixtureComponent};
use hgda::trainer::train;

fn main() -> anyhow::Result<()> {
    let source_spec = GenSpec {
        name: "abl-source".into(),
        num_nodes: 800,
        num_classes: 3,
        mean_degree: 8.0,
        homophily_mix: vec![MixtureComponent::new(1.0, 8.0, 2.0)],
        feature_dim: 16,
        class_center_scale: 1.0,
        feature_noise_sigma: 1.5,
        seed: 31,
    };
    let target_spec = GenSpec {
        name: "abl-target".into(),
        homophily_mix: vec![MixtureComponent::new(1.0, 3.0, 7.0)],
        seed: 32,
        ..source_spec.clone()
    };
    let (source, target) = generate_pair(&source_spec, &target_spec)?;

    let base = HgdaConfig {
        hidden_dims: vec![32, 8],
        epochs: 150,
        lr: 0.01,
        seed: 2,
        ..HgdaConfig::default()
    };

    let run = |label: &str, cfg: HgdaConfig| -> anyhow::Result<()> {
        let (_, report) = train(&source, &target, &cfg)?;
        println!(
            "{label:22}  source {:.4}  target {:.4}",
            report.final_source_accuracy, report.final_target_accuracy
        );
        Ok(())
    };

    run("full (L+F+H, aligned)", base.clone())?;
    for ch in Channel::ALL {
        run(
            &format!("single channel {}", ch.as_str()),
            HgdaConfig {
                channels_enabled: vec![ch],
                ..base.clone()
            },
        )?;
    }
    run(
        "source-only baseline",
        HgdaConfig {
            channels_enabled: vec![Channel::L],
            align: false,
            alpha: 1.0,
            beta: 0.0,
            ..base
        },
    )?;
    Ok(())
}
