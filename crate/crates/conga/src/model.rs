//! Pairwise count MRF with bounded arctan edge potentials: pmf evaluation,
//! node-conditional likelihoods with truncated normalizers, and analytic
//! bounds.
//!
//! The joint mass is, up to the intractable global normalizer,
//!
//! ```text
//! Pr(x) ∝ prod_j lambda_j^{x_j}/x_j! * exp(-sum_{j<l} beta_jl F(x_j) F(x_l))
//! F(x) = atan(x)^theta
//! ```
//!
//! All evaluation is in the log domain; conditional normalizers are sums
//! over 0..=B with a Poisson-tail error bound.

use std::f64::consts::FRAC_PI_2;

use crate::edges::EdgeWeights;
use crate::error::{CongaError, Result};
use crate::math::{ln_factorial, logsumexp, poisson_tail};
use crate::CountMatrix;

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(CongaError::InvalidParameter(format!(
            "theta must be positive and finite, got {theta}"
        )));
    }
    Ok(())
}

/// F(x) = atan(x)^theta without argument validation. The x = 0 case is
/// short-circuited so theta powers never see log(0).
#[inline]
pub(crate) fn transform(x: f64, theta: f64) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let a = x.atan();
    (theta * a.ln()).exp()
}

/// The edge-potential transform F(x) = (arctan x)^theta.
pub fn edge_transform(x: u64, theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(transform(x as f64, theta))
}

/// Supremum of the transform, U = (pi/2)^theta.
pub fn transform_upper_bound(theta: f64) -> f64 {
    (theta * FRAC_PI_2.ln()).exp()
}

/// Precomputed F(v) and log(v!) for v = 0..=B.
#[derive(Debug, Clone)]
pub(crate) struct SupportTables {
    pub f: Vec<f64>,
    pub ln_fact: Vec<f64>,
}

impl SupportTables {
    pub fn new(b: usize, theta: f64) -> Self {
        let f = (0..=b).map(|v| transform(v as f64, theta)).collect();
        let ln_fact = (0..=b).map(|v| ln_factorial(v as u64)).collect();
        SupportTables { f, ln_fact }
    }
}

/// Model parameters for likelihood evaluation over a data set.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Row-major n x P random effects, strictly positive.
    pub lambda: Vec<f64>,
    pub n: usize,
    pub p: usize,
    pub beta: EdgeWeights,
    pub theta: f64,
    /// Truncation level for conditional normalizers.
    pub b: usize,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        if self.b < 1 {
            return Err(CongaError::InvalidParameter("B must be >= 1".into()));
        }
        if self.lambda.len() != self.n * self.p {
            return Err(CongaError::ShapeMismatch(format!(
                "lambda has {} entries, expected {}",
                self.lambda.len(),
                self.n * self.p
            )));
        }
        if self.beta.p() != self.p {
            return Err(CongaError::ShapeMismatch(
                "edge weights dimension differs from lambda".into(),
            ));
        }
        if self.lambda.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(CongaError::InvalidParameter(
                "lambda entries must be strictly positive and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Log of the unnormalized joint mass at one count vector.
pub fn log_unnormalized_joint(
    x: &[u64],
    lambda_row: &[f64],
    beta: &EdgeWeights,
    theta: f64,
) -> Result<f64> {
    check_theta(theta)?;
    let p = beta.p();
    if x.len() != p || lambda_row.len() != p {
        return Err(CongaError::ShapeMismatch(format!(
            "x has {} entries, lambda {} for p={}",
            x.len(),
            lambda_row.len(),
            p
        )));
    }
    if lambda_row.iter().any(|&l| !(l > 0.0)) {
        return Err(CongaError::InvalidParameter(
            "lambda entries must be strictly positive".into(),
        ));
    }
    let f: Vec<f64> = x.iter().map(|&v| transform(v as f64, theta)).collect();
    let mut out = 0.0;
    for j in 0..p {
        out += x[j] as f64 * lambda_row[j].ln() - ln_factorial(x[j]);
    }
    for (j, l) in beta.pairs() {
        out -= beta.weight(j, l) * f[j] * f[l];
    }
    Ok(out)
}

/// Unnormalized conditional log-mass terms over v = 0..=B for one node,
/// given the cross-term `cross = sum_{l != j} beta_jl F(x_l)`.
#[inline]
pub(crate) fn conditional_terms(
    log_lambda: f64,
    cross: f64,
    tables: &SupportTables,
) -> Vec<f64> {
    tables
        .f
        .iter()
        .zip(tables.ln_fact.iter())
        .enumerate()
        .map(|(v, (&fv, &lf))| v as f64 * log_lambda - lf - fv * cross)
        .collect()
}

/// Log normalizer of the truncated conditional at one node.
#[inline]
pub(crate) fn conditional_log_normalizer(
    log_lambda: f64,
    cross: f64,
    tables: &SupportTables,
) -> f64 {
    logsumexp(&conditional_terms(log_lambda, cross, tables))
}

pub(crate) fn cross_term(
    j: usize,
    x: &[u64],
    beta: &EdgeWeights,
    theta: f64,
) -> f64 {
    let mut cross = 0.0;
    for l in 0..x.len() {
        if l != j {
            cross += beta.weight(j, l) * transform(x[l] as f64, theta);
        }
    }
    cross
}

/// Log probabilities of X_j = 0..=B given the other coordinates, normalized
/// over the truncated support.
pub fn conditional_log_pmf(
    j: usize,
    x: &[u64],
    lambda_tj: f64,
    beta: &EdgeWeights,
    theta: f64,
    b: usize,
) -> Result<Vec<f64>> {
    check_theta(theta)?;
    if b < 1 {
        return Err(CongaError::InvalidParameter("B must be >= 1".into()));
    }
    let p = beta.p();
    if x.len() != p || j >= p {
        return Err(CongaError::ShapeMismatch(format!(
            "x has {} entries, node {j}, p={p}",
            x.len()
        )));
    }
    if !(lambda_tj > 0.0) || !lambda_tj.is_finite() {
        return Err(CongaError::InvalidParameter(
            "lambda must be strictly positive and finite".into(),
        ));
    }
    let tables = SupportTables::new(b, theta);
    let cross = cross_term(j, x, beta, theta);
    let mut terms = conditional_terms(lambda_tj.ln(), cross, &tables);
    let z = logsumexp(&terms);
    for t in terms.iter_mut() {
        *t -= z;
    }
    Ok(terms)
}

/// The normalizer-tail error bound for truncating the conditional sum at B.
#[derive(Debug, Clone, Copy)]
pub struct TruncationBound {
    /// Bound using the observed neighbor values through F.
    pub tight: f64,
    /// Coarser bound with every F(x_l) replaced by its supremum.
    pub coarse: f64,
}

/// Bounds the mass dropped from the conditional normalizer when truncating
/// at B: exp(lambda) * PoissonTail(B; lambda) * exp(-sum_{beta<0} beta U F(x_l)).
pub fn truncation_error_bound(
    lambda_tj: f64,
    beta_row: &[f64],
    x_others: &[u64],
    theta: f64,
    b: usize,
) -> Result<TruncationBound> {
    check_theta(theta)?;
    if b < 1 {
        return Err(CongaError::InvalidParameter("B must be >= 1".into()));
    }
    if beta_row.len() != x_others.len() {
        return Err(CongaError::ShapeMismatch(format!(
            "{} edge weights vs {} neighbor counts",
            beta_row.len(),
            x_others.len()
        )));
    }
    if !(lambda_tj > 0.0) || !lambda_tj.is_finite() {
        return Err(CongaError::InvalidParameter(
            "lambda must be strictly positive and finite".into(),
        ));
    }
    let u = transform_upper_bound(theta);
    let mut neg_sum_tight = 0.0;
    let mut neg_sum_coarse = 0.0;
    for (&beta, &xl) in beta_row.iter().zip(x_others) {
        if beta < 0.0 {
            neg_sum_tight += beta * u * transform(xl as f64, theta);
            neg_sum_coarse += beta * u * u;
        }
    }
    let tail = poisson_tail(b as u64, lambda_tj);
    let base = lambda_tj.exp() * tail;
    Ok(TruncationBound {
        tight: base * (-neg_sum_tight).exp(),
        coarse: base * (-neg_sum_coarse).exp(),
    })
}

/// Lemma-style sandwich on the global normalizing constant:
/// exp(sum_j e^{alpha_j} -/+ U^2 sum |beta_jl|).
pub fn normalizing_constant_bounds(
    alpha: &[f64],
    beta: &EdgeWeights,
    theta: f64,
) -> Result<(f64, f64)> {
    check_theta(theta)?;
    if alpha.len() != beta.p() {
        return Err(CongaError::ShapeMismatch(format!(
            "alpha has {} entries for p={}",
            alpha.len(),
            beta.p()
        )));
    }
    let u = transform_upper_bound(theta);
    let base: f64 = alpha.iter().map(|a| a.exp()).sum();
    let abs_beta: f64 = beta.as_slice().iter().map(|b| b.abs()).sum();
    let spread = u * u * abs_beta;
    Ok(((base - spread).exp(), (base + spread).exp()))
}

/// Sum over observations and nodes of the truncated conditional log
/// likelihood at the observed counts.
pub fn log_pseudo_likelihood(data: &CountMatrix, params: &ModelParams) -> Result<f64> {
    params.validate()?;
    if data.n() != params.n || data.p() != params.p {
        return Err(CongaError::ShapeMismatch(format!(
            "data is {}x{}, params expect {}x{}",
            data.n(),
            data.p(),
            params.n,
            params.p
        )));
    }
    if let Some((t, j, v)) = data.first_exceeding(params.b) {
        return Err(CongaError::Truncation {
            observation: t,
            node: j,
            count: v,
            b: params.b,
        });
    }
    let tables = SupportTables::new(params.b, params.theta);
    let mut total = 0.0;
    for t in 0..params.n {
        let row = data.row(t);
        let f_row: Vec<f64> = row.iter().map(|&v| tables.f[v as usize]).collect();
        for j in 0..params.p {
            let mut cross = 0.0;
            for l in 0..params.p {
                if l != j {
                    cross += params.beta.weight(j, l) * f_row[l];
                }
            }
            let log_lambda = params.lambda[t * params.p + j].ln();
            let x = row[j];
            let num = x as f64 * log_lambda - tables.ln_fact[x as usize] - tables.f[x as usize] * cross;
            total += num - conditional_log_normalizer(log_lambda, cross, &tables);
        }
    }
    Ok(total)
}
