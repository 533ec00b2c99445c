//! Graph recovery from retained edge-weight draws: equal-tailed credible
//! intervals, sign-stability scores, and comparison of two fitted graphs.

use serde::{Deserialize, Serialize};

use crate::error::{CongaError, Result};
use crate::math::quantile_sorted;
use crate::sampler::PosteriorSamples;

pub const GRAPH_FORMAT_VERSION: u32 = 1;

/// Per-edge posterior summary. `s` is the sign-stability score
/// |0.5 - Pr(beta > 0)| / 0.5.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeSummary {
    pub j: usize,
    pub l: usize,
    pub mean: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub s: f64,
    /// True when the credible interval excludes zero.
    pub selected: bool,
}

/// Full graph estimate at one credible level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphEstimate {
    pub version: u32,
    pub nodes: usize,
    pub level: f64,
    pub edges: Vec<EdgeSummary>,
}

impl GraphEstimate {
    pub fn selected_edges(&self) -> Vec<(usize, usize)> {
        self.edges
            .iter()
            .filter(|e| e.selected)
            .map(|e| (e.j, e.l))
            .collect()
    }
}

/// Iteration-aligned difference interval for one edge across two fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeDifference {
    pub j: usize,
    pub l: usize,
    pub mean: f64,
    pub delta_ci_lower: f64,
    pub delta_ci_upper: f64,
    /// True when the difference interval excludes zero.
    pub flagged: bool,
}

/// Comparison of two fits over the same node set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GraphComparison {
    pub version: u32,
    pub nodes: usize,
    pub level: f64,
    /// Number of iteration-aligned draws used (the shorter run's length).
    pub aligned_draws: usize,
    pub differences: Vec<EdgeDifference>,
    /// Fraction of edges whose difference interval covers zero.
    pub similarity: f64,
}

fn validate_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(CongaError::InvalidParameter(format!(
            "credible level must lie in (0, 1), got {level}"
        )));
    }
    Ok(())
}

/// Equal-tailed percentile interval at credible level `level` (e.g. 0.95),
/// plus the zero-exclusion decision.
pub fn edge_decision(draws: &[f64], level: f64) -> Result<(f64, f64, bool)> {
    validate_level(level)?;
    if draws.is_empty() {
        return Err(CongaError::EmptySamples);
    }
    let alpha = 1.0 - level;
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    let lower = quantile_sorted(&sorted, alpha / 2.0);
    let upper = quantile_sorted(&sorted, 1.0 - alpha / 2.0);
    let selected = lower > 0.0 || upper < 0.0;
    Ok((lower, upper, selected))
}

/// |0.5 - Pr(beta > 0)| / 0.5: zero for a sign-balanced posterior, one when
/// every draw shares a sign.
pub fn significance_score(draws: &[f64]) -> Result<f64> {
    if draws.is_empty() {
        return Err(CongaError::EmptySamples);
    }
    let pos = draws.iter().filter(|&&v| v > 0.0).count() as f64 / draws.len() as f64;
    Ok((0.5 - pos).abs() / 0.5)
}

/// Summarizes every edge of a fit.
pub fn summarize_graph(samples: &PosteriorSamples, level: f64) -> Result<GraphEstimate> {
    validate_level(level)?;
    if samples.beta.is_empty() {
        return Err(CongaError::EmptySamples);
    }
    let p = samples.p;
    let mut edges = Vec::with_capacity(samples.q());
    let mut idx = 0usize;
    for j in 0..p {
        for l in j + 1..p {
            let draws = samples.edge_column(idx);
            let mean = draws.iter().sum::<f64>() / draws.len() as f64;
            let (ci_lower, ci_upper, selected) = edge_decision(&draws, level)?;
            let s = significance_score(&draws)?;
            edges.push(EdgeSummary {
                j,
                l,
                mean,
                ci_lower,
                ci_upper,
                s,
                selected,
            });
            idx += 1;
        }
    }
    Ok(GraphEstimate {
        version: GRAPH_FORMAT_VERSION,
        nodes: p,
        level,
        edges,
    })
}

/// Compares two fits over the same nodes via iteration-aligned draw
/// differences. Unequal retained lengths are truncated to the shorter run.
pub fn graph_difference(
    a: &PosteriorSamples,
    b: &PosteriorSamples,
    level: f64,
) -> Result<GraphComparison> {
    validate_level(level)?;
    if a.p != b.p {
        return Err(CongaError::ShapeMismatch(format!(
            "fits cover {} and {} nodes",
            a.p, b.p
        )));
    }
    let aligned = a.beta.len().min(b.beta.len());
    if aligned == 0 {
        return Err(CongaError::EmptySamples);
    }
    let p = a.p;
    let mut differences = Vec::with_capacity(a.q());
    let mut idx = 0usize;
    for j in 0..p {
        for l in j + 1..p {
            let diffs: Vec<f64> = (0..aligned)
                .map(|t| a.beta[t][idx] - b.beta[t][idx])
                .collect();
            let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
            let (delta_ci_lower, delta_ci_upper, flagged) = edge_decision(&diffs, level)?;
            differences.push(EdgeDifference {
                j,
                l,
                mean,
                delta_ci_lower,
                delta_ci_upper,
                flagged,
            });
            idx += 1;
        }
    }
    let unflagged = differences.iter().filter(|d| !d.flagged).count();
    let similarity = unflagged as f64 / differences.len() as f64;
    Ok(GraphComparison {
        version: GRAPH_FORMAT_VERSION,
        nodes: p,
        level,
        aligned_draws: aligned,
        differences,
        similarity,
    })
}

/// Top-`k` nodes by selected-edge degree (descending), ties broken by node
/// index ascending; `k` is clipped to the node count.
pub fn degree_ranking(estimate: &GraphEstimate, k: usize) -> Vec<(usize, usize)> {
    let mut degrees = vec![0usize; estimate.nodes];
    for e in estimate.edges.iter().filter(|e| e.selected) {
        degrees[e.j] += 1;
        degrees[e.l] += 1;
    }
    let mut ranked: Vec<(usize, usize)> = degrees.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k.min(estimate.nodes));
    ranked
}
