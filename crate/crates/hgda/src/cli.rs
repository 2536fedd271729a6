//! Command implementations for the `hgda` binary: dataset generation,
//! training, evaluation, subgroup analysis, divergence diagnostics, and
//! alpha/beta sweeps. Every command writes a run manifest with input hashes;
//! report JSON has stable key order so identical runs produce identical
//! bytes.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::Graph;
use crate::homophily::{subgroup_profile, NUM_BINS};
use crate::model::{Channel, HgdaConfig, HgdaModel};
use crate::nn::{load_checkpoint, save_checkpoint};
use crate::synth::{generate, generate_pair, GenSpec};
use crate::trainer::{bound_diagnostics, evaluate, subgroup_accuracy, train};

#[derive(Parser)]
#[command(name = "hgda", version, about = "Graph domain adaptation experiments")]
pub struct Cli {
    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (or source/target pair) from a spec.
    Gen(GenArgs),
    /// Train a model on a source/target dataset pair.
    Train(TrainArgs),
    /// Evaluate a finished run's model on a dataset.
    Eval(EvalArgs),
    /// Per-homophily-bin proportions, differences and accuracy.
    Subgroup(SubgroupArgs),
    /// The four divergence diagnostics for a dataset pair.
    Diagnose(DiagnoseArgs),
    /// Grid of (alpha, beta, seed) training cells with aggregate means.
    Sweep(SweepArgs),
}

#[derive(Args)]
pub struct GenArgs {
    /// Generator spec JSON: a single spec or {"source": ..., "target": ...}.
    #[arg(long)]
    pub spec: PathBuf,
    /// Output dataset directory (pair specs write source/ and target/).
    #[arg(long)]
    pub out: PathBuf,
    /// Override the spec seed(s).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Source dataset directory (must be labeled).
    #[arg(long)]
    pub source: PathBuf,
    /// Target dataset directory.
    #[arg(long)]
    pub target: PathBuf,
    /// Config JSON; omitted fields use defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Override config epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Override config alpha (source cross-entropy weight).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Override config beta (target entropy weight).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Override config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override config learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Override enabled channels, e.g. `L` or `L,F,H`.
    #[arg(long, value_delimiter = ',')]
    pub channels: Option<Vec<String>>,
    /// Disable the alignment loss (source-only baseline).
    #[arg(long)]
    pub no_align: bool,
}

#[derive(Args)]
pub struct EvalArgs {
    /// Run directory produced by `train`.
    #[arg(long)]
    pub run: PathBuf,
    /// Dataset to evaluate; defaults to the run's target dataset.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Args)]
pub struct SubgroupArgs {
    /// Run directory; its model supplies target predictions.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Source dataset (defaults to the run's source).
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Target dataset (defaults to the run's target).
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Number of homophily bins (fixed at 10).
    #[arg(long, default_value_t = NUM_BINS)]
    pub bins: usize,
}

#[derive(Args)]
pub struct DiagnoseArgs {
    /// Run directory (defaults datasets from its manifest).
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub source: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<PathBuf>,
}

#[derive(Args)]
pub struct SweepArgs {
    /// Grid JSON: alphas, betas, seeds, source, target, optional config.
    #[arg(long)]
    pub grid: PathBuf,
    /// Output directory for sweep.csv and sweep_agg.csv.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct ManifestInput {
    path: String,
    sha256: String,
}

/// Provenance record written next to every command's outputs.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    inputs: Vec<ManifestInput>,
    output_dir: String,
    tool_version: String,
    timestamp_unix: u64,
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes =
        fs::read(path).with_context(|| format!("reading {} for hashing", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn hash_inputs(paths: &[&Path]) -> Result<Vec<ManifestInput>> {
    let mut out = Vec::new();
    for path in paths {
        if path.is_dir() {
            for name in ["meta.json", "edges.csv", "features.csv", "labels.csv"] {
                let f = path.join(name);
                if f.exists() {
                    out.push(ManifestInput {
                        path: f.display().to_string(),
                        sha256: sha256_file(&f)?,
                    });
                }
            }
        } else {
            out.push(ManifestInput {
                path: path.display().to_string(),
                sha256: sha256_file(path)?,
            });
        }
    }
    Ok(out)
}

fn write_manifest(
    out_dir: &Path,
    command: &str,
    config: serde_json::Value,
    inputs: Vec<ManifestInput>,
) -> Result<()> {
    let manifest = RunManifest {
        command: command.to_string(),
        config,
        inputs,
        output_dir: out_dir.display().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        timestamp_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    };
    write_json(&out_dir.join("manifest.json"), &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let body = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

#[derive(Deserialize)]
struct PairSpec {
    source: GenSpec,
    target: GenSpec,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum GenInput {
    Pair(PairSpec),
    Single(GenSpec),
}

fn cmd_gen(args: &GenArgs, quiet: bool) -> Result<()> {
    let raw = fs::read_to_string(&args.spec)
        .with_context(|| format!("reading spec {}", args.spec.display()))?;
    let parsed: GenInput =
        serde_json::from_str(&raw).with_context(|| "parsing generator spec JSON")?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let config = match parsed {
        GenInput::Single(mut spec) => {
            if let Some(seed) = args.seed {
                spec.seed = seed;
            }
            let g = generate(&spec)?;
            g.save(&args.out)?;
            if !quiet {
                eprintln!(
                    "wrote {} ({} nodes, {} edges) to {}",
                    g.name(),
                    g.num_nodes(),
                    g.num_edges(),
                    args.out.display()
                );
            }
            serde_json::to_value(&spec)?
        }
        GenInput::Pair(mut pair) => {
            if let Some(seed) = args.seed {
                pair.source.seed = seed;
                pair.target.seed = seed;
            }
            let (s, t) = generate_pair(&pair.source, &pair.target)?;
            s.save(args.out.join("source"))?;
            t.save(args.out.join("target"))?;
            if !quiet {
                eprintln!(
                    "wrote pair ({} / {} nodes) to {}",
                    s.num_nodes(),
                    t.num_nodes(),
                    args.out.display()
                );
            }
            serde_json::json!({
                "source": serde_json::to_value(&pair.source)?,
                "target": serde_json::to_value(&pair.target)?,
            })
        }
    };
    write_manifest(&args.out, "gen", config, hash_inputs(&[&args.spec])?)
}

fn load_config(path: Option<&Path>) -> Result<HgdaConfig> {
    match path {
        None => Ok(HgdaConfig::default()),
        Some(p) => {
            let raw = fs::read_to_string(p)
                .with_context(|| format!("reading config {}", p.display()))?;
            serde_json::from_str(&raw).with_context(|| format!("parsing config {}", p.display()))
        }
    }
}

fn apply_overrides(cfg: &mut HgdaConfig, args: &TrainArgs) -> Result<()> {
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(b) = args.beta {
        cfg.beta = b;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(lr) = args.lr {
        cfg.lr = lr;
    }
    if let Some(chs) = &args.channels {
        let mut parsed = Vec::new();
        for c in chs {
            match Channel::parse(c.trim()) {
                Some(ch) => parsed.push(ch),
                None => bail!("unknown channel `{c}` (expected L, F or H)"),
            }
        }
        cfg.channels_enabled = parsed;
    }
    if args.no_align {
        cfg.align = false;
    }
    Ok(())
}

/// Paths recorded by `train` so downstream commands can find the run's
/// inputs and model.
#[derive(Serialize, Deserialize)]
struct RunPaths {
    source: String,
    target: String,
}

fn cmd_train(args: &TrainArgs, quiet: bool) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    apply_overrides(&mut cfg, args)?;
    let source = Graph::load(&args.source)
        .with_context(|| format!("loading source {}", args.source.display()))?;
    let target = Graph::load(&args.target)
        .with_context(|| format!("loading target {}", args.target.display()))?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;

    let (model, report) = train(&source, &target, &cfg)?;
    if !quiet {
        eprintln!(
            "trained {} epochs in {:.1}s: source acc {:.4}, target acc {:.4}",
            cfg.epochs,
            report.wall_clock_secs,
            report.final_source_accuracy,
            report.final_target_accuracy
        );
    }

    write_json(&args.out.join("report.json"), &report)?;
    fs::write(args.out.join("metrics.csv"), report.metrics_csv())
        .with_context(|| "writing metrics.csv")?;
    let named = model.params();
    save_checkpoint(
        args.out.join("checkpoint.json"),
        &named,
        None,
        cfg.epochs,
        cfg.seed,
    )?;
    write_json(
        &args.out.join("run_paths.json"),
        &RunPaths {
            source: args.source.display().to_string(),
            target: args.target.display().to_string(),
        },
    )?;
    write_manifest(
        &args.out,
        "train",
        serde_json::to_value(&cfg)?,
        hash_inputs(&[&args.source, &args.target])?,
    )
}

fn run_paths(run: &Path) -> Result<RunPaths> {
    let raw = fs::read_to_string(run.join("run_paths.json"))
        .with_context(|| format!("reading {}/run_paths.json", run.display()))?;
    Ok(serde_json::from_str(&raw)?)
}

fn load_run_model(run: &Path) -> Result<HgdaModel> {
    let ck = load_checkpoint(run.join("checkpoint.json"))?;
    Ok(HgdaModel::from_checkpoint(&ck)?)
}

#[derive(Serialize)]
struct EvalReport {
    dataset: String,
    num_nodes: usize,
    accuracy: f64,
    predictions: Vec<usize>,
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let model = load_run_model(&args.run)?;
    let data_path = match &args.data {
        Some(p) => p.clone(),
        None => PathBuf::from(run_paths(&args.run)?.target),
    };
    let g = Graph::load(&data_path)
        .with_context(|| format!("loading dataset {}", data_path.display()))?;
    let (accuracy, predictions) = evaluate(&model, &g)?;
    print_json(&EvalReport {
        dataset: data_path.display().to_string(),
        num_nodes: g.num_nodes(),
        accuracy,
        predictions,
    })
}

fn resolve_pair(
    run: Option<&Path>,
    source: Option<&Path>,
    target: Option<&Path>,
) -> Result<(PathBuf, PathBuf)> {
    match (run, source, target) {
        (Some(run), s, t) => {
            let paths = run_paths(run)?;
            Ok((
                s.map(Path::to_path_buf)
                    .unwrap_or_else(|| PathBuf::from(paths.source)),
                t.map(Path::to_path_buf)
                    .unwrap_or_else(|| PathBuf::from(paths.target)),
            ))
        }
        (None, Some(s), Some(t)) => Ok((s.to_path_buf(), t.to_path_buf())),
        _ => bail!("pass --run, or both --source and --target"),
    }
}

fn cmd_subgroup(args: &SubgroupArgs) -> Result<()> {
    if args.bins != NUM_BINS {
        bail!("subgroup binning is fixed at {NUM_BINS} bins");
    }
    let (src_path, tgt_path) = resolve_pair(
        args.run.as_deref(),
        args.source.as_deref(),
        args.target.as_deref(),
    )?;
    let source = Graph::load(&src_path)?;
    let target = Graph::load(&tgt_path)?;
    let profile = match &args.run {
        Some(run) => {
            let model = load_run_model(run)?;
            subgroup_accuracy(&model, &source, &target)?
        }
        None => subgroup_profile(&source, &target, None)?,
    };
    print_json(&profile)
}

fn cmd_diagnose(args: &DiagnoseArgs) -> Result<()> {
    let (src_path, tgt_path) = resolve_pair(
        args.run.as_deref(),
        args.source.as_deref(),
        args.target.as_deref(),
    )?;
    let source = Graph::load(&src_path)?;
    let target = Graph::load(&tgt_path)?;
    print_json(&bound_diagnostics(&source, &target)?)
}

#[derive(Deserialize)]
struct SweepGrid {
    alphas: Vec<f64>,
    betas: Vec<f64>,
    seeds: Vec<u64>,
    source: String,
    target: String,
    #[serde(default)]
    config: Option<HgdaConfig>,
}

fn cmd_sweep(args: &SweepArgs, quiet: bool) -> Result<()> {
    let raw = fs::read_to_string(&args.grid)
        .with_context(|| format!("reading grid {}", args.grid.display()))?;
    let grid: SweepGrid = serde_json::from_str(&raw)?;
    if grid.alphas.is_empty() || grid.betas.is_empty() || grid.seeds.is_empty() {
        bail!("grid needs non-empty alphas, betas and seeds");
    }
    let base = grid.config.clone().unwrap_or_default();
    let source = Graph::load(&grid.source)?;
    let target = Graph::load(&grid.target)?;
    fs::create_dir_all(&args.out)?;

    let mut cells = Vec::new();
    for &alpha in &grid.alphas {
        for &beta in &grid.betas {
            for &seed in &grid.seeds {
                cells.push((alpha, beta, seed));
            }
        }
    }
    if !quiet {
        eprintln!("sweeping {} cells", cells.len());
    }
    // Order-preserving parallel map: output rows follow grid order no
    // matter how cells are scheduled.
    let rows: Vec<String> = cells
        .par_iter()
        .map(|&(alpha, beta, seed)| {
            let cfg = HgdaConfig {
                alpha,
                beta,
                seed,
                ..base.clone()
            };
            match train(&source, &target, &cfg) {
                Ok((_, report)) => format!(
                    "{alpha},{beta},{seed},ok,{},{}",
                    report.final_source_accuracy, report.final_target_accuracy
                ),
                Err(e) => {
                    let msg = e.to_string().replace(',', ";");
                    format!("{alpha},{beta},{seed},error: {msg},,")
                }
            }
        })
        .collect();

    let mut csv = String::from("alpha,beta,seed,status,source_accuracy,target_accuracy\n");
    for row in &rows {
        csv.push_str(row);
        csv.push('\n');
    }
    fs::write(args.out.join("sweep.csv"), &csv)?;

    let mut agg = String::from("alpha,beta,num_ok,mean_source_accuracy,mean_target_accuracy\n");
    for &alpha in &grid.alphas {
        for &beta in &grid.betas {
            let cell_rows: Vec<&String> = rows
                .iter()
                .filter(|r| r.starts_with(&format!("{alpha},{beta},")))
                .collect();
            let ok: Vec<(f64, f64)> = cell_rows
                .iter()
                .filter_map(|r| {
                    let fields: Vec<&str> = r.split(',').collect();
                    if fields[3] == "ok" {
                        Some((fields[4].parse().ok()?, fields[5].parse().ok()?))
                    } else {
                        None
                    }
                })
                .collect();
            if ok.is_empty() {
                agg.push_str(&format!("{alpha},{beta},0,,\n"));
            } else {
                let n = ok.len() as f64;
                let ms = ok.iter().map(|x| x.0).sum::<f64>() / n;
                let mt = ok.iter().map(|x| x.1).sum::<f64>() / n;
                agg.push_str(&format!("{alpha},{beta},{},{ms},{mt}\n", ok.len()));
            }
        }
    }
    fs::write(args.out.join("sweep_agg.csv"), &agg)?;

    write_manifest(
        &args.out,
        "sweep",
        serde_json::to_value(serde_json::json!({
            "alphas": grid.alphas,
            "betas": grid.betas,
            "seeds": grid.seeds,
            "source": grid.source,
            "target": grid.target,
            "config": base,
        }))?,
        hash_inputs(&[args.grid.as_path(), Path::new(&grid.source), Path::new(&grid.target)])?,
    )
}

/// Entry point for the `hgda` binary.
pub fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Gen(args) => cmd_gen(args, cli.quiet),
        Command::Train(args) => cmd_train(args, cli.quiet),
        Command::Eval(args) => cmd_eval(args),
        Command::Subgroup(args) => cmd_subgroup(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Sweep(args) => cmd_sweep(args, cli.quiet),
    }
}
