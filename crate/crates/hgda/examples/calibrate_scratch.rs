//! Scratch calibration scan (not part of the deliverable examples).

use hgda::model::{Channel, HgdaConfig};
use hgda::synth::{generate_pair, GenSpec, MixtureComponent};
use hgda::trainer::train;
use rayon::prelude::*;

fn spec(seed: u64, mix: Vec<MixtureComponent>, sigma: f64) -> GenSpec {
    GenSpec {
        name: "cal".into(),
        num_nodes: 1500,
        num_classes: 3,
        mean_degree: 10.0,
        homophily_mix: mix,
        feature_dim: 32,
        class_center_scale: 1.0,
        feature_noise_sigma: sigma,
        seed,
    }
}

fn source_mix() -> Vec<MixtureComponent> {
    vec![MixtureComponent::new(1.0, 8.0, 2.0)] // mean 0.8
}

/// Target mixtures with mean 0.3, selected by name.
fn target_mix(name: &str) -> Vec<MixtureComponent> {
    match name {
        // Unimodal at 0.3.
        "uni" => vec![MixtureComponent::new(1.0, 3.0, 7.0)],
        // Bimodal: a homophilic quarter (mean 0.8) and a heterophilic rest
        // (mean 2/15); total mean 0.25*0.8 + 0.75*(2/15) = 0.3 exactly.
        "bi" => vec![
            MixtureComponent::new(0.25, 16.0, 4.0),
            MixtureComponent::new(0.75, 2.0, 13.0),
        ],
        // Wider bimodal with more extreme tails.
        "wide" => vec![
            MixtureComponent::new(0.25, 24.0, 6.0),
            MixtureComponent::new(0.75, 1.2, 7.8), // mean 1.2/9 = 0.1333
        ],
        other => panic!("unknown mix {other}"),
    }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let sigmas: Vec<f64> = if args.len() > 1 {
        args[1].split(',').map(|s| s.parse().unwrap()).collect()
    } else {
        vec![2.0, 3.0, 4.0]
    };
    let lr: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(0.01);
    let seeds: Vec<u64> = vec![0, 1, 2];

    let tradeoff: (f64, f64) = args
        .get(3)
        .map(|s| {
            let mut it = s.split(',').map(|x| x.parse().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .unwrap_or((0.1, 0.1));

    for &sigma in &sigmas {
        let results: Vec<[f64; 5]> = seeds
            .par_iter()
            .map(|&seed| {
                let src = spec(1000 + seed, (8.0, 2.0), sigma);
                let tgt = spec(2000 + seed, (3.0, 7.0), sigma);
                let (s, t) = generate_pair(&src, &tgt).unwrap();

                let base_cfg = HgdaConfig {
                    channels_enabled: vec![Channel::L],
                    align: false,
                    alpha: 1.0,
                    beta: 0.0,
                    lr,
                    seed,
                    ..HgdaConfig::default()
                };
                let full_cfg = HgdaConfig {
                    lr,
                    alpha: tradeoff.0,
                    beta: tradeoff.1,
                    seed,
                    ..HgdaConfig::default()
                };
                let variant = |ch: Channel| HgdaConfig {
                    channels_enabled: vec![ch],
                    ..full_cfg.clone()
                };
                let acc = |cfg: &HgdaConfig| train(&s, &t, cfg).unwrap().1.final_target_accuracy;
                [
                    acc(&base_cfg),
                    acc(&full_cfg),
                    acc(&variant(Channel::L)),
                    acc(&variant(Channel::F)),
                    acc(&variant(Channel::H)),
                ]
            })
            .collect();
        let mean_of = |i: usize| results.iter().map(|r| r[i]).sum::<f64>() / results.len() as f64;
        let strictly_best = results
            .iter()
            .filter(|r| r[1] > r[2].max(r[3]).max(r[4]))
            .count();
        println!(
            "sigma {sigma:4.1} lr {lr} ab ({},{}): base {:.4} | full {:.4} L {:.4} F {:.4} H {:.4} | full strictly best {}/{}",
            tradeoff.0, tradeoff.1,
            mean_of(0), mean_of(1), mean_of(2), mean_of(3), mean_of(4),
            strictly_best, results.len()
        );
    }
}
