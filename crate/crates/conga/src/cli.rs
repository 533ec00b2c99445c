//! Command-line harness: fit, simulate, benchmark, compare, theta.
//!
//! Every command is a pure function of its input files, flags, and seed;
//! reruns produce byte-identical primary outputs (the manifest's wall-time
//! field is the one deliberate exception).

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::data::CountMatrix;
use crate::datagen::{
    generate_copula_counts, random_sparse_precision, CopulaSpec, TruthGraph,
};
use crate::error::{CongaError, Result};
use crate::oracle::evaluate_estimate;
use crate::posterior::{graph_difference, summarize_graph, GraphEstimate};
use crate::sampler::{run_chain, PosteriorSamples, PriorConfig, SamplerConfig};
use crate::theta::{covariance_discrepancy, select_theta, ThetaSearchConfig};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Parser)]
#[command(
    name = "conga",
    about = "Count-data graphical models via pseudo-likelihood MCMC",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model to a counts CSV and write a graph estimate.
    Fit(FitArgs),
    /// Generate synthetic counts with a known ground-truth graph.
    Simulate(SimulateArgs),
    /// Replicated simulate-fit-evaluate benchmark.
    Benchmark(BenchmarkArgs),
    /// Compare two fits edge by edge.
    Compare(CompareArgs),
    /// Select the transform exponent and emit the objective curve.
    Theta(ThetaArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SamplingFlags {
    /// Burn-in iterations.
    #[arg(long, default_value_t = 5000)]
    pub burn: usize,
    /// Retained iterations.
    #[arg(long, default_value_t = 5000)]
    pub keep: usize,
    /// Truncation level for conditional normalizers.
    #[arg(long = "B", default_value_t = 100)]
    pub b: usize,
    /// Fixed transform exponent; selected from the data when omitted.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Credible level for edge decisions.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Counts CSV (rows = observations, columns = nodes).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub sampling: SamplingFlags,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Probability of each off-diagonal precision entry being nonzero.
    #[arg(long, default_value_t = 0.2)]
    pub edge_prob: f64,
    /// Magnitude of nonzero precision off-diagonals.
    #[arg(long, default_value_t = 0.3)]
    pub magnitude: f64,
    /// Poisson marginal mean of the generated counts.
    #[arg(long, default_value_t = 1.0)]
    pub mean: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Problem-size preset.
    #[arg(long, value_parser = ["p10", "p30", "p50"])]
    pub preset: String,
    /// Replication count; replication r uses seed base_seed + r.
    #[arg(long, default_value_t = 10)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub sampling: SamplingFlags,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// samples.json from the first fit.
    #[arg(long)]
    pub a: PathBuf,
    /// samples.json from the second fit.
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ThetaArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub lower: f64,
    #[arg(long, default_value_t = 8.0)]
    pub upper: f64,
    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

/// Copula generation settings behind each benchmark preset, tuned to give
/// a count signal strong enough for stable recovery at the preset sizes.
#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkPreset {
    pub name: String,
    pub p: usize,
    pub n: usize,
    pub edge_prob: f64,
    pub magnitude: f64,
    pub mean: f64,
}

impl BenchmarkPreset {
    pub fn by_name(name: &str) -> Result<Self> {
        let (p, n, edge_prob) = match name {
            "p10" => (10, 100, 0.05),
            "p30" => (30, 200, 0.02),
            "p50" => (50, 300, 0.012),
            other => {
                return Err(CongaError::InvalidParameter(format!(
                    "unknown preset {other}"
                )))
            }
        };
        Ok(BenchmarkPreset {
            name: name.to_string(),
            p,
            n,
            edge_prob,
            magnitude: 1.2,
            mean: 3.0,
        })
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    version: u32,
    command: &'a str,
    library_version: &'a str,
    seed: u64,
    config: serde_json::Value,
    config_hash: String,
    theta: f64,
    theta_degenerate: bool,
    n: usize,
    p: usize,
    mean_lambda_accept: f64,
    mean_beta_accept: f64,
    /// Excluded from byte-determinism guarantees.
    wall_time_secs: f64,
}

/// FNV-1a over the canonical config JSON; a stable fingerprint, not a
/// cryptographic digest.
fn config_hash(config: &serde_json::Value) -> String {
    let bytes = serde_json::to_string(config).unwrap_or_default();
    let mut hash: u64 = 0xcbf29ce484222325;
    for b in bytes.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

fn write_pretty_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn ensure_out_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}

/// Runs one full fit on in-memory data; shared by `fit` and `benchmark`.
fn fit_data(
    data: &CountMatrix,
    seed: u64,
    sampling: &SamplingFlags,
) -> Result<(PosteriorSamples, GraphEstimate, f64, bool, f64, f64)> {
    let (theta, degenerate) = match sampling.theta {
        Some(t) => (t, false),
        None => {
            let est = select_theta(data, &ThetaSearchConfig::default())?;
            (est.theta, est.degenerate)
        }
    };
    let cfg = SamplerConfig {
        n_burn: sampling.burn,
        n_keep: sampling.keep,
        seed,
        b: sampling.b,
        ..SamplerConfig::default()
    };
    let (samples, _state) = run_chain(data, PriorConfig::default(), theta, cfg)?;
    let graph = summarize_graph(&samples, sampling.level)?;
    let mean = |get: fn(&crate::sampler::IterationDiagnostics) -> f64| {
        let vals: Vec<f64> = samples
            .diagnostics
            .iter()
            .map(get)
            .filter(|v| v.is_finite())
            .collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    let lambda_accept = mean(|d| d.lambda_accept_rate);
    let beta_accept = mean(|d| d.beta_accept_rate);
    Ok((samples, graph, theta, degenerate, lambda_accept, beta_accept))
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let started = Instant::now();
    ensure_out_dir(&args.out)?;
    let data = CountMatrix::read_csv(&args.data)?;
    let (samples, graph, theta, degenerate, lambda_accept, beta_accept) =
        fit_data(&data, args.seed, &args.sampling)?;

    write_pretty_json(&args.out.join("graph.json"), &graph)?;
    write_pretty_json(&args.out.join("samples.json"), &samples)?;

    // Plot-ready edge list.
    let mut edges_csv = String::from("j,l,s\n");
    for e in &graph.edges {
        edges_csv.push_str(&format!("{},{},{}\n", e.j, e.l, e.s));
    }
    fs::write(args.out.join("edges.csv"), edges_csv)?;

    let config = serde_json::json!({
        "data": args.data.display().to_string(),
        "seed": args.seed,
        "burn": args.sampling.burn,
        "keep": args.sampling.keep,
        "B": args.sampling.b,
        "theta_override": args.sampling.theta,
        "level": args.sampling.level,
        "priors": PriorConfig::default(),
    });
    let manifest = Manifest {
        version: MANIFEST_FORMAT_VERSION,
        command: "fit",
        library_version: env!("CARGO_PKG_VERSION"),
        seed: args.seed,
        config_hash: config_hash(&config),
        config,
        theta,
        theta_degenerate: degenerate,
        n: data.n(),
        p: data.p(),
        mean_lambda_accept: lambda_accept,
        mean_beta_accept: beta_accept,
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    write_pretty_json(&args.out.join("manifest.json"), &manifest)?;

    let selected = graph.edges.iter().filter(|e| e.selected).count();
    println!(
        "fit: {} observations x {} nodes, theta = {:.4}, {} of {} edges selected",
        data.n(),
        data.p(),
        theta,
        selected,
        graph.edges.len()
    );
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    ensure_out_dir(&args.out)?;
    let (precision, edges) =
        random_sparse_precision(args.p, args.edge_prob, args.magnitude, args.seed)?;
    let spec = CopulaSpec {
        n: args.n,
        p: args.p,
        precision,
        marginal_mean: args.mean,
        seed: args.seed,
    };
    let data = generate_copula_counts(&spec)?;
    data.write_csv(&args.out.join("data.csv"))?;
    let truth = TruthGraph {
        version: 1,
        p: args.p,
        n: args.n,
        seed: args.seed,
        marginal_mean: args.mean,
        edges,
    };
    write_pretty_json(&args.out.join("truth.json"), &truth)?;
    println!(
        "simulate: wrote {}x{} counts with {} true edges",
        args.n,
        args.p,
        truth.edges.len()
    );
    Ok(())
}

#[derive(Debug, Clone)]
struct RepOutcome {
    rep: usize,
    seed: u64,
    result: std::result::Result<(f64, f64), String>,
}

/// One benchmark replication: simulate, fit, evaluate.
pub fn run_replication(
    preset: &BenchmarkPreset,
    sampling: &SamplingFlags,
    seed: u64,
) -> Result<(f64, f64)> {
    let (precision, truth_edges) =
        random_sparse_precision(preset.p, preset.edge_prob, preset.magnitude, seed)?;
    let spec = CopulaSpec {
        n: preset.n,
        p: preset.p,
        precision,
        marginal_mean: preset.mean,
        seed,
    };
    let data = generate_copula_counts(&spec)?;
    let (_samples, graph, _theta, _deg, _la, _ba) = fit_data(&data, seed, sampling)?;
    Ok(evaluate_estimate(
        preset.p,
        &truth_edges,
        &graph.selected_edges(),
    ))
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<()> {
    if args.reps < 1 {
        return Err(CongaError::InvalidParameter("need at least one replication".into()));
    }
    ensure_out_dir(&args.out)?;
    let preset = BenchmarkPreset::by_name(&args.preset)?;

    let outcomes: Vec<RepOutcome> = (0..args.reps)
        .into_par_iter()
        .map(|rep| {
            let seed = args.seed + rep as u64;
            let result = run_replication(&preset, &args.sampling, seed)
                .map_err(|e| e.to_string());
            RepOutcome { rep, seed, result }
        })
        .collect();

    let mut table = String::from("rep,seed,p1,p2,status\n");
    let mut ok_rows: Vec<(f64, f64)> = Vec::new();
    let mut failures = 0usize;
    for o in &outcomes {
        match &o.result {
            Ok((p1, p2)) => {
                table.push_str(&format!("{},{},{},{},ok\n", o.rep, o.seed, p1, p2));
                ok_rows.push((*p1, *p2));
            }
            Err(msg) => {
                failures += 1;
                let clean = msg.replace([',', '\n'], ";");
                table.push_str(&format!("{},{},,,{}\n", o.rep, o.seed, clean));
            }
        }
    }
    let (mean_p1, mean_p2) = if ok_rows.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            ok_rows.iter().map(|r| r.0).sum::<f64>() / ok_rows.len() as f64,
            ok_rows.iter().map(|r| r.1).sum::<f64>() / ok_rows.len() as f64,
        )
    };
    table.push_str(&format!("mean,,{},{},{} ok / {} failed\n",
        mean_p1, mean_p2, ok_rows.len(), failures));
    fs::write(args.out.join("benchmark.csv"), &table)?;

    let summary = serde_json::json!({
        "preset": preset,
        "reps": args.reps,
        "base_seed": args.seed,
        "burn": args.sampling.burn,
        "keep": args.sampling.keep,
        "B": args.sampling.b,
        "level": args.sampling.level,
        "mean_p1": mean_p1,
        "mean_p2": mean_p2,
        "failed": failures,
    });
    write_pretty_json(&args.out.join("summary.json"), &summary)?;

    println!(
        "benchmark {}: R = {}, mean p1 = {:.4}, mean p2 = {:.4} ({} failed)",
        preset.name, args.reps, mean_p1, mean_p2, failures
    );
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    ensure_out_dir(&args.out)?;
    let a: PosteriorSamples = serde_json::from_str(&fs::read_to_string(&args.a)?)?;
    let b: PosteriorSamples = serde_json::from_str(&fs::read_to_string(&args.b)?)?;
    if a.beta.len() != b.beta.len() {
        eprintln!(
            "warning: retained lengths differ ({} vs {}); truncating to the shorter",
            a.beta.len(),
            b.beta.len()
        );
    }
    let cmp = graph_difference(&a, &b, args.level)?;
    write_pretty_json(&args.out.join("differences.json"), &cmp)?;
    let flagged = cmp.differences.iter().filter(|d| d.flagged).count();
    println!(
        "compare: {} of {} edges flagged, similarity {:.2}%",
        flagged,
        cmp.differences.len(),
        100.0 * cmp.similarity
    );
    Ok(())
}

fn cmd_theta(args: &ThetaArgs) -> Result<()> {
    ensure_out_dir(&args.out)?;
    let data = CountMatrix::read_csv(&args.data)?;
    let config = ThetaSearchConfig {
        lower: args.lower,
        upper: args.upper,
        grid_points: args.grid_points,
        ..ThetaSearchConfig::default()
    };
    let est = select_theta(&data, &config)?;

    let mut curve = String::from("theta,objective\n");
    for t in config.grid() {
        curve.push_str(&format!("{},{}\n", t, covariance_discrepancy(&data, t)?));
    }
    fs::write(args.out.join("curve.csv"), curve)?;

    let report = serde_json::json!({
        "theta": est.theta,
        "objective": est.objective,
        "degenerate": est.degenerate,
        "lower": config.lower,
        "upper": config.upper,
        "grid_points": config.grid_points,
    });
    write_pretty_json(&args.out.join("theta.json"), &report)?;
    println!(
        "theta: selected {:.6} (objective {:.6}{})",
        est.theta,
        est.objective,
        if est.degenerate { ", degenerate" } else { "" }
    );
    Ok(())
}

/// Dispatches a parsed command.
pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(args) => cmd_fit(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Theta(args) => cmd_theta(args),
    }
}
