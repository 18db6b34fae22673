//! The `spp` command line.
//!
//! Every flag can also come from a TOML file given by `--config`, in a table
//! named after the subcommand (`[fit]`, `[sample]`, ...) with the flag names
//! as keys. Flags on the command line win over the file. `SPP_SEED` supplies
//! the seed when neither does.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Result, SppError};
use crate::grid::ArrayShape;
use crate::io::persist::{self, NodeResolver};
use crate::io::{self as sppio, EdgeList, PosteriorSamples, RenderMode, SavedModel};
use crate::mcmc::{run_chain, ChainConfig, MoveSet, MtmAcceptance, MtmConfig, Resampling, SmcConfig};
use crate::prior::{self, HyperParams};
use crate::relmodel::{generate_synthetic, predict, RelationalState};
use crate::rng::seeded;
use crate::verify::{self, Outcome};

#[derive(Parser, Debug)]
#[command(name = "spp", version, about = "Stochastic patching process: prior sampling, checks and relational MCMC")]
pub struct Cli {
    /// TOML file with one table per subcommand.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Command {
    /// Draw a partition from the prior.
    Sample(SampleArgs),
    /// Run the built-in consistency and sampler checks.
    Check(CheckArgs),
    /// Fit the relational model to an edge list.
    Fit(FitArgs),
    /// Posterior-mean link probabilities for given pairs.
    Predict(PredictArgs),
    /// AUC of predictions against labels.
    Eval(EvalArgs),
    /// Generate a synthetic edge list from the relational model.
    Synth(SynthArgs),
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct SampleArgs {
    /// Array sizes, comma separated.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Stored with the partition for later relational use.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `direct` (nonempty patches only) or `candidate` (thinned).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub construction: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// PGM picture of a 2-D partition.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub render: Option<PathBuf>,
    /// `rate` or `outline`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct CheckArgs {
    /// `consistency`, `sampler`, `synthetic` or `all`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub suite: Option<String>,
    /// Skip every Monte-Carlo check.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact_only: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Draws for the self-consistency Monte Carlo.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draws: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// JSON report path.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct FitArgs {
    /// Edge list, `src<TAB>dst` per line.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Keep only the most active nodes.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    /// Fraction of cells held out from training.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout: Option<f64>,
    /// Seed of the hold-out split; defaults to the chain seed.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub particles: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stages: Option<usize>,
    /// `systematic` or `multinomial`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resampling: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mtm_z: Option<usize>,
    /// `balanced` or `literal`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mtm_acceptance: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_birth: Option<f64>,
    /// Poisson rate per unit budget; defaults to `γ·S_X·P(nonempty)`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity_scale: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thin: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_every: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<PathBuf>,
    /// Start from a saved model; missing permutations become identities.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resume: Option<PathBuf>,
    /// Held-out pairs, for `spp predict`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout_pairs: Option<PathBuf>,
    /// Held-out labels, for `spp eval`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout_labels: Option<PathBuf>,
    /// PGM picture of the final partition in latent order.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub render: Option<PathBuf>,
    /// Record elapsed seconds in the trace (makes it run-dependent).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wallclock: Option<bool>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct PredictArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<PathBuf>,
    /// `row<TAB>col` per line.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairs: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct EvalArgs {
    /// `row,col,score` CSV from `spp predict`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preds: Option<PathBuf>,
    /// `row<TAB>col<TAB>label` per line.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default, deny_unknown_fields)]
pub struct SynthArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Edge list output.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Latent partition and permutations as a model file.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truth: Option<PathBuf>,
    /// Keep rows and columns in latent order.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub identity: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub render: Option<PathBuf>,
}

/// Overlays the command-line values on the file's table for `command`.
fn merged<T: Serialize + DeserializeOwned>(cli: &T, config: Option<&Path>, command: &str) -> Result<T> {
    let Some(path) = config else {
        return Ok(serde_json::from_value(serde_json::to_value(cli)?)?);
    };
    let text = std::fs::read_to_string(path).map_err(|e| SppError::io(path, e))?;
    let table: toml::Table = toml::from_str(&text).map_err(|e| SppError::Config(e.to_string()))?;
    let mut base = match table.get(command) {
        Some(t) => serde_json::to_value(t)?,
        None => json!({}),
    };
    let over = serde_json::to_value(cli)?;
    if let (Value::Object(b), Value::Object(o)) = (&mut base, over) {
        b.extend(o);
    }
    serde_json::from_value(base).map_err(|e| SppError::Config(format!("[{command}]: {e}")))
}

fn resolve_seed(seed: Option<u64>) -> Result<u64> {
    if let Some(s) = seed {
        return Ok(s);
    }
    match std::env::var("SPP_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| SppError::Config(format!("SPP_SEED={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn required<T: Clone>(v: &Option<T>, flag: &str) -> Result<T> {
    v.clone()
        .ok_or_else(|| SppError::Config(format!("--{flag} is required")))
}

fn parse_dims(s: &str) -> Result<ArrayShape> {
    let dims = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| SppError::InvalidShape(format!("bad size {t:?} in {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    ArrayShape::new(dims)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| SppError::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| SppError::io(path, e))
}

fn sample(a: SampleArgs) -> Result<Value> {
    let shape = parse_dims(&required(&a.dims, "dims")?)?;
    let d = HyperParams::default();
    let hp = HyperParams::new(a.tau.unwrap_or(d.tau), a.theta.unwrap_or(d.theta), a.gamma.unwrap_or(d.gamma), d.p_birth)?;
    let mut rng = seeded(resolve_seed(a.seed)?);
    let partition = match a.construction.as_deref().unwrap_or("direct") {
        "direct" => prior::sample_partition_direct(&shape, &hp, &mut rng),
        "candidate" => prior::sample_partition_candidate(&shape, &hp, &mut rng),
        other => return Err(SppError::Config(format!("unknown construction {other:?}"))),
    };
    let summary = json!({
        "patches": partition.len(),
        "expected_patches": prior::expected_count(&shape, hp.tau, hp.theta),
        "covered_volume": partition.covered_volume(),
        "total_cost": partition.total_cost(),
    });
    if let Some(path) = &a.render {
        let mode: RenderMode = a.mode.as_deref().unwrap_or("rate").parse()?;
        sppio::render_partition(&partition, path, mode)?;
    }
    let model = SavedModel {
        partition,
        theta: hp.theta,
        gamma: hp.gamma,
        perms: None,
    };
    match &a.out {
        Some(path) => sppio::save_model(path, &model)?,
        None => print!("{}", persist::model_to_json(&model)?),
    }
    Ok(summary)
}

fn check(a: CheckArgs) -> Result<(Value, bool)> {
    let suite = a.suite.as_deref().unwrap_or("consistency");
    let exact_only = a.exact_only.unwrap_or(false);
    let workers = a.workers.unwrap_or(1);
    // without any seed each check keeps its own fixed default
    let seed = match (a.seed, std::env::var_os("SPP_SEED")) {
        (None, None) => None,
        (s, _) => Some(resolve_seed(s)?),
    };
    let (consistency, sampler, synthetic) = match suite {
        "consistency" => (true, false, false),
        "sampler" => (false, true, false),
        "synthetic" => (false, false, true),
        "all" => (true, true, true),
        other => return Err(SppError::Config(format!("unknown suite {other:?}"))),
    };
    let mut outcomes: Vec<Outcome> = Vec::new();
    if consistency {
        outcomes.push(verify::construction_equivalence()?);
        outcomes.push(verify::projection_identities()?);
        if !exact_only {
            outcomes.push(verify::volume_identity(100_000, seed.unwrap_or(2))?);
            outcomes.push(verify::self_consistency(a.draws.unwrap_or(20_000), seed.unwrap_or(4), workers)?);
        }
    }
    if sampler {
        outcomes.push(verify::sigma_values());
        outcomes.push(verify::incremental_likelihood(1_000, seed.unwrap_or(8))?);
        if !exact_only {
            let mut prior_cfg = verify::PriorRecoveryConfig::default();
            let mut csmc_cfg = verify::CsmcPosteriorConfig::default();
            if let Some(s) = seed {
                prior_cfg.seed = s;
                csmc_cfg.seed = s;
            }
            outcomes.push(verify::prior_recovery(&prior_cfg)?);
            outcomes.push(verify::csmc_posterior(&csmc_cfg)?);
        }
    }
    if synthetic && !exact_only {
        let mut cfg = verify::SyntheticConfig::default();
        cfg.chain.workers = workers;
        outcomes.push(verify::synthetic_recovery(&cfg)?);
    }
    let passed = outcomes.iter().all(|o| o.passed);
    for o in &outcomes {
        eprintln!("{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail);
    }
    let report = json!({ "suite": suite, "seed": seed, "passed": passed, "outcomes": outcomes });
    if let Some(path) = &a.report {
        write_file(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok((json!({ "suite": suite, "passed": passed, "checks": outcomes.len() }), passed))
}

fn chain_config(a: &FitArgs, seed: u64) -> Result<ChainConfig> {
    let d = HyperParams::default();
    let hp = HyperParams::new(
        a.tau.unwrap_or(d.tau),
        a.theta.unwrap_or(d.theta),
        a.gamma.unwrap_or(d.gamma),
        a.p_birth.unwrap_or(d.p_birth),
    )?;
    let resampling = match a.resampling.as_deref().unwrap_or("systematic") {
        "systematic" => Resampling::Systematic,
        "multinomial" => Resampling::Multinomial,
        other => return Err(SppError::Config(format!("unknown resampling {other:?}"))),
    };
    let acceptance = match a.mtm_acceptance.as_deref().unwrap_or("balanced") {
        "balanced" => MtmAcceptance::Balanced,
        "literal" => MtmAcceptance::Literal,
        other => return Err(SppError::Config(format!("unknown MTM acceptance {other:?}"))),
    };
    let base = ChainConfig::default();
    let cfg = ChainConfig {
        iterations: a.iters.unwrap_or(base.iterations),
        hp,
        smc: SmcConfig {
            particles: a.particles.unwrap_or(base.smc.particles),
            stages: a.stages,
            resampling,
        },
        mtm: MtmConfig {
            proposals: a.mtm_z.unwrap_or(base.mtm.proposals),
            acceptance,
        },
        intensity_scale: a.intensity_scale,
        seed,
        burn_in: a.burn_in,
        thin: a.thin.unwrap_or(base.thin),
        moves: MoveSet::default(),
        record_wallclock: a.wallclock.unwrap_or(false),
        workers: a.workers.unwrap_or(1),
        check_every: base.check_every,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn fit(a: FitArgs) -> Result<Value> {
    let seed = resolve_seed(a.seed)?;
    let cfg = chain_config(&a, seed)?;
    let data_path = required(&a.data, "data")?;
    let mut list = EdgeList::read(&data_path)?;
    if let Some(k) = a.top_k {
        list = list.top_k(k);
    }
    let data = list.to_matrix();
    let nodes = NodeResolver::new(Some(list.nodes.clone()), list.len());
    let holdout = a.holdout.unwrap_or(0.1);
    let split = sppio::make_split(&data, holdout, a.split_seed.unwrap_or(seed))?;

    if let Some(path) = &a.holdout_pairs {
        let text: String = split
            .test
            .iter()
            .map(|&(r, c)| format!("{}\t{}\n", nodes.name(r), nodes.name(c)))
            .collect();
        write_file(path, text)?;
    }
    if let Some(path) = &a.holdout_labels {
        let text: String = split
            .test
            .iter()
            .zip(&split.labels)
            .map(|(&(r, c), &l)| format!("{}\t{}\t{}\n", nodes.name(r), nodes.name(c), l as u8))
            .collect();
        write_file(path, text)?;
    }

    let state = match &a.resume {
        Some(path) => {
            let model = sppio::load_model(path)?;
            RelationalState::from_snapshot(data.clone(), split.train_mask.clone(), model.to_snapshot()?)?
        }
        None => RelationalState::new(data.clone(), split.train_mask.clone(), cfg.hp.tau, cfg.hp.gamma)?,
    };
    let checkpoint_path = a.checkpoint.clone().unwrap_or_else(|| PathBuf::from("checkpoint.json"));
    let theta = cfg.hp.theta;
    let every = a.checkpoint_every;
    let out = run_chain(state, &cfg, |sampler, row| {
        if let Some(n) = every {
            if n > 0 && row.iter % n == 0 {
                let snap = sampler.state().snapshot();
                let model = SavedModel {
                    partition: snap.partition,
                    theta,
                    gamma: snap.gamma,
                    perms: Some((snap.row_perm, snap.col_perm)),
                };
                sppio::save_model(&checkpoint_path, &model)?;
            }
        }
        Ok(())
    })?;

    persist::save_trace(a.trace.clone().unwrap_or_else(|| PathBuf::from("trace.csv")), &out.trace)?;
    let posterior = PosteriorSamples {
        hp: cfg.hp,
        shape: out.final_state.shape().clone(),
        nodes: Some(list.nodes.clone()),
        samples: out.samples,
    };
    sppio::save_samples(a.samples.clone().unwrap_or_else(|| PathBuf::from("samples.json")), &posterior)?;
    if let Some(path) = &a.render {
        sppio::render_partition(out.final_state.partition(), path, RenderMode::Rate)?;
    }

    let snapshots = posterior.snapshots();
    let holdout_auc = if split.test.is_empty() || snapshots.is_empty() {
        None
    } else {
        let scores = predict(&snapshots, &split.test)?;
        sppio::auc(&scores, &split.labels).ok()
    };
    let last = out.trace.last();
    Ok(json!({
        "nodes": list.len(),
        "edges": data.count_ones(),
        "iterations": cfg.iterations,
        "samples": snapshots.len(),
        "final_patches": out.final_state.partition().len(),
        "final_loglik_train": last.map(|r| r.loglik_train),
        "holdout_cells": split.test.len(),
        "holdout_auc": holdout_auc,
    }))
}

fn predict_cmd(a: PredictArgs) -> Result<Value> {
    let samples = sppio::load_samples(required(&a.samples, "samples")?)?;
    let nodes = NodeResolver::new(samples.nodes.clone(), samples.shape.len(0));
    let pairs_text = read_file(&required(&a.pairs, "pairs")?)?;
    let pairs = persist::parse_pairs(&pairs_text, &nodes)?;
    let scores = predict(&samples.snapshots(), &pairs)?;
    let rows: Vec<(String, String, f64)> = pairs
        .iter()
        .zip(&scores)
        .map(|(&(r, c), &s)| (nodes.name(r), nodes.name(c), s))
        .collect();
    let csv = persist::predictions_to_csv(&rows);
    match &a.out {
        Some(path) => write_file(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(json!({ "pairs": rows.len(), "samples": samples.samples.len() }))
}

fn eval(a: EvalArgs) -> Result<Value> {
    let preds = persist::parse_predictions(&read_file(&required(&a.preds, "preds")?)?)?;
    let labels = persist::parse_labels(&read_file(&required(&a.labels, "labels")?)?)?;
    let lookup: std::collections::HashMap<(&str, &str), f64> =
        preds.iter().map(|(r, c, s)| ((r.as_str(), c.as_str()), *s)).collect();
    let mut scores = Vec::with_capacity(labels.len());
    let mut truth = Vec::with_capacity(labels.len());
    for (r, c, l) in &labels {
        let s = lookup
            .get(&(r.as_str(), c.as_str()))
            .ok_or_else(|| SppError::UnknownNode(format!("no prediction for ({r}, {c})")))?;
        scores.push(*s);
        truth.push(*l);
    }
    let auc = sppio::auc(&scores, &truth)?;
    let report = json!({
        "auc": auc,
        "pairs": labels.len(),
        "positives": truth.iter().filter(|&&l| l).count(),
    });
    if let Some(path) = &a.report {
        write_file(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(report)
}

fn synth(a: SynthArgs) -> Result<Value> {
    let shape = parse_dims(&required(&a.dims, "dims")?)?;
    let d = HyperParams::default();
    let hp = HyperParams::new(a.tau.unwrap_or(d.tau), a.theta.unwrap_or(d.theta), a.gamma.unwrap_or(d.gamma), d.p_birth)?;
    let mut rng = seeded(resolve_seed(a.seed)?);
    let s = generate_synthetic(&shape, &hp, a.identity.unwrap_or(false), &mut rng)?;
    let edges = EdgeList::from_matrix(&s.data);
    let tsv = edges.to_tsv();
    match &a.out {
        Some(path) => write_file(path, tsv)?,
        None => print!("{tsv}"),
    }
    if let Some(path) = &a.truth {
        let model = SavedModel {
            partition: s.truth.partition.clone(),
            theta: hp.theta,
            gamma: hp.gamma,
            perms: Some((s.truth.row_perm.clone(), s.truth.col_perm.clone())),
        };
        sppio::save_model(path, &model)?;
    }
    if let Some(path) = &a.render {
        sppio::render_partition(&s.truth.partition, path, RenderMode::Rate)?;
    }
    Ok(json!({
        "rows": s.data.rows(),
        "cols": s.data.cols(),
        "edges": edges.edges.len(),
        "density": s.data.density(),
        "patches": s.truth.partition.len(),
    }))
}

/// Runs a parsed command line. Failed checks and errors give a nonzero code.
pub fn run(cli: Cli) -> i32 {
    let config = cli.config.as_deref();
    let result = match cli.command {
        Command::Sample(a) => merged(&a, config, "sample").and_then(sample).map(|v| (v, true)),
        Command::Check(a) => merged(&a, config, "check").and_then(check),
        Command::Fit(a) => merged(&a, config, "fit").and_then(fit).map(|v| (v, true)),
        Command::Predict(a) => merged(&a, config, "predict").and_then(predict_cmd).map(|v| (v, true)),
        Command::Eval(a) => merged(&a, config, "eval").and_then(eval).map(|v| (v, true)),
        Command::Synth(a) => merged(&a, config, "synth").and_then(synth).map(|v| (v, true)),
    };
    match result {
        Ok((summary, ok)) => {
            eprintln!("{summary}");
            if ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

/// Parses the process arguments and runs them.
pub fn main() -> i32 {
    run(Cli::parse())
}
