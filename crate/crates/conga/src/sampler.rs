//! Pseudo-posterior MCMC: Dirichlet-process updates for the random effect
//! columns, an auxiliary-variable update for each concentration parameter,
//! and row-wise Metropolis-Hastings updates for the edge weights with a
//! Gaussian-graphical-model-style proposal.
//!
//! One sweep per iteration: all lambda assignments, all M_j, all beta rows.
//! Step sizes K1 (lambda shrink) and K2 (beta step) adapt toward a target
//! acceptance rate during burn-in only and are frozen afterward.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::edges::EdgeWeights;
use crate::error::{CongaError, Result};
use crate::math::{gamma_log_pdf, ln_factorial, logsumexp};
use crate::model::SupportTables;
use crate::CountMatrix;

pub const STATE_FORMAT_VERSION: u32 = 1;

/// Prior hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorConfig {
    /// Variance of the iid Gaussian prior on each edge weight.
    pub nu3: f64,
    /// Regularizer added to the gram diagonal in the proposal covariance.
    pub gamma_w: f64,
    /// Gamma base measure shape.
    pub a: f64,
    /// Gamma base measure rate.
    pub b: f64,
    /// Gamma prior shape on the concentration parameters.
    pub c: f64,
    /// Gamma prior rate on the concentration parameters.
    pub d: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            nu3: 100.0,
            gamma_w: 5.0,
            a: 1.0,
            b: 1.0,
            c: 10.0,
            d: 10.0,
        }
    }
}

impl PriorConfig {
    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("nu3", self.nu3),
            ("gamma", self.gamma_w),
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("d", self.d),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CongaError::InvalidParameter(format!(
                    "prior constant {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Checkpoint settings: a versioned JSON snapshot of the state every
/// `every` iterations.
#[derive(Debug, Clone)]
pub struct CheckpointConfig {
    pub every: usize,
    pub path: PathBuf,
}

/// Run settings.
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub n_burn: usize,
    pub n_keep: usize,
    pub seed: u64,
    /// Truncation level for conditional normalizers.
    pub b: usize,
    pub target_accept: f64,
    /// When false the likelihood term is dropped from every MH ratio and
    /// the cluster weights reduce to the plain urn prior; the chain then
    /// targets the prior.
    pub likelihood: bool,
    /// Probability of an independence jump to the Gibbs-style draw in the
    /// beta row kernel (the remaining moves are adapted random-walk steps).
    pub gibbs_jump_prob: f64,
    /// Update beta rows in a random order each sweep instead of 0..P.
    pub random_scan_beta: bool,
    pub checkpoint: Option<CheckpointConfig>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_burn: 5000,
            n_keep: 5000,
            seed: 0,
            b: 100,
            target_accept: 0.3,
            likelihood: true,
            gibbs_jump_prob: 0.1,
            random_scan_beta: false,
            checkpoint: None,
        }
    }
}

/// Serializable sampler state; everything needed to resume a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerState {
    pub version: u32,
    pub n: usize,
    pub p: usize,
    pub theta: f64,
    pub b: usize,
    /// Row-major n x P random effects.
    pub lambda: Vec<f64>,
    pub beta: EdgeWeights,
    /// Per-node DP concentration parameters.
    pub m: Vec<f64>,
    /// Fixed diagonal of the proposal precision matrix.
    pub omega_diag: Vec<f64>,
    pub k1: f64,
    pub k2: f64,
    pub iteration: usize,
    pub ridge_repairs: u64,
    pub nonfinite_rejects: u64,
    pub rng: ChaCha8Rng,
}

/// Per-iteration scalar diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    pub log_pseudo_likelihood: f64,
    pub lambda_accept_rate: f64,
    pub beta_accept_rate: f64,
    pub k1: f64,
    pub k2: f64,
}

/// Retained draws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorSamples {
    pub p: usize,
    /// Retained edge-weight vectors, one per kept iteration.
    pub beta: Vec<Vec<f64>>,
    /// Retained per-node concentration parameters, one row per kept iteration.
    pub m: Vec<Vec<f64>>,
    pub diagnostics: Vec<IterationDiagnostics>,
}

impl PosteriorSamples {
    pub fn q(&self) -> usize {
        self.p * (self.p - 1) / 2
    }

    /// All retained draws for one edge index.
    pub fn edge_column(&self, idx: usize) -> Vec<f64> {
        self.beta.iter().map(|row| row[idx]).collect()
    }
}

struct SweepCounters {
    lambda_attempts: usize,
    lambda_accepts: usize,
    beta_attempts: usize,
    beta_accepts: usize,
}

impl SweepCounters {
    fn new() -> Self {
        SweepCounters {
            lambda_attempts: 0,
            lambda_accepts: 0,
            beta_attempts: 0,
            beta_accepts: 0,
        }
    }
}

/// The MCMC chain over one data set.
pub struct Chain<'a> {
    data: &'a CountMatrix,
    priors: PriorConfig,
    cfg: SamplerConfig,
    tables: SupportTables,
    /// F(x_tj), row-major n x P.
    f_data: Vec<f64>,
    /// Gram matrix of column-standardized F(X).
    s: DMatrix<f64>,
    /// cross[t*p + j] = sum_{l != j} beta_jl F(x_tl).
    cross: Vec<f64>,
    /// Cached conditional log normalizers, row-major n x P.
    logz: Vec<f64>,
    scratch_cross: Vec<f64>,
    scratch_logz: Vec<f64>,
    pub state: SamplerState,
}

impl<'a> Chain<'a> {
    pub fn new(
        data: &'a CountMatrix,
        priors: PriorConfig,
        theta: f64,
        cfg: SamplerConfig,
    ) -> Result<Self> {
        priors.validate()?;
        if !(theta > 0.0) || !theta.is_finite() {
            return Err(CongaError::InvalidParameter(format!(
                "theta must be positive, got {theta}"
            )));
        }
        if cfg.b < 1 {
            return Err(CongaError::InvalidParameter("B must be >= 1".into()));
        }
        if let Some((t, j, v)) = data.first_exceeding(cfg.b) {
            return Err(CongaError::Truncation {
                observation: t,
                node: j,
                count: v,
                b: cfg.b,
            });
        }
        let n = data.n();
        let p = data.p();
        let tables = SupportTables::new(cfg.b, theta);
        let f_data: Vec<f64> = (0..n)
            .flat_map(|t| data.row(t).iter().map(|&v| tables.f[v as usize]))
            .collect::<Vec<f64>>();

        let (s, omega_diag) = standardized_gram(&f_data, n, p);

        // Data-adjacent start for lambda avoids early truncation rejects.
        let lambda: Vec<f64> = (0..n)
            .flat_map(|t| data.row(t).iter().map(|&v| v as f64 + 0.5))
            .collect();
        let m = vec![priors.c / priors.d; p];

        let state = SamplerState {
            version: STATE_FORMAT_VERSION,
            n,
            p,
            theta,
            b: cfg.b,
            lambda,
            beta: EdgeWeights::zeros(p)?,
            m,
            omega_diag,
            k1: 0.5,
            k2: 0.1,
            iteration: 0,
            ridge_repairs: 0,
            nonfinite_rejects: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        };

        let mut chain = Chain {
            data,
            priors,
            cfg,
            tables,
            f_data,
            s,
            cross: vec![0.0; n * p],
            logz: vec![0.0; n * p],
            scratch_cross: vec![0.0; n * p],
            scratch_logz: vec![0.0; n * p],
            state,
        };
        chain.rebuild_caches();
        Ok(chain)
    }

    /// Rebuilds a chain around a checkpointed state.
    pub fn resume(
        data: &'a CountMatrix,
        priors: PriorConfig,
        cfg: SamplerConfig,
        state: SamplerState,
    ) -> Result<Self> {
        if state.version != STATE_FORMAT_VERSION {
            return Err(CongaError::InvalidParameter(format!(
                "state format version {} unsupported (expected {})",
                state.version, STATE_FORMAT_VERSION
            )));
        }
        if state.n != data.n() || state.p != data.p() {
            return Err(CongaError::ShapeMismatch(
                "checkpoint dimensions differ from data".into(),
            ));
        }
        let mut base = Chain::new(data, priors, state.theta, cfg)?;
        base.state = state;
        base.rebuild_caches();
        Ok(base)
    }

    fn rebuild_caches(&mut self) {
        let n = self.state.n;
        let p = self.state.p;
        for t in 0..n {
            for j in 0..p {
                let mut c = 0.0;
                for l in 0..p {
                    if l != j {
                        c += self.state.beta.weight(j, l) * self.f_data[t * p + l];
                    }
                }
                self.cross[t * p + j] = c;
                self.logz[t * p + j] =
                    self.log_normalizer(self.state.lambda[t * p + j].ln(), c);
            }
        }
    }

    #[inline]
    fn log_normalizer(&self, log_lambda: f64, cross: f64) -> f64 {
        let f = &self.tables.f;
        let lf = &self.tables.ln_fact;
        let mut max = f64::NEG_INFINITY;
        for v in 0..f.len() {
            let term = v as f64 * log_lambda - lf[v] - f[v] * cross;
            if term > max {
                max = term;
            }
        }
        let mut sum = 0.0;
        for v in 0..f.len() {
            let term = v as f64 * log_lambda - lf[v] - f[v] * cross;
            sum += (term - max).exp();
        }
        max + sum.ln()
    }

    /// Current log pseudo-likelihood from the caches.
    pub fn log_pseudo_likelihood(&self) -> f64 {
        let p = self.state.p;
        let mut total = 0.0;
        for t in 0..self.state.n {
            let row = self.data.row(t);
            for j in 0..p {
                let x = row[j] as usize;
                let ll = self.state.lambda[t * p + j].ln();
                total += x as f64 * ll
                    - self.tables.ln_fact[x]
                    - self.tables.f[x] * self.cross[t * p + j]
                    - self.logz[t * p + j];
            }
        }
        total
    }

    /// One full sweep. Returns the per-block acceptance counters.
    fn sweep(&mut self) -> SweepCounters {
        let mut counters = SweepCounters::new();
        let p = self.state.p;
        for j in 0..p {
            for i in 0..self.state.n {
                self.dp_assignment_step(j, i, &mut counters);
            }
            self.update_concentration(j);
        }
        if self.cfg.random_scan_beta {
            let mut order: Vec<usize> = (0..p).collect();
            for i in (1..p).rev() {
                let k = self.state.rng.random_range(0..=i);
                order.swap(i, k);
            }
            for l in order {
                self.beta_row_update(l, &mut counters);
            }
        } else {
            for l in 0..p {
                self.beta_row_update(l, &mut counters);
            }
        }
        counters
    }

    /// Reassigns lambda_{ij} to an existing value or triggers a fresh draw.
    fn dp_assignment_step(&mut self, j: usize, i: usize, counters: &mut SweepCounters) {
        let n = self.state.n;
        let p = self.state.p;
        let x = self.data.get(i, j);
        let pr = &self.priors;

        let mut lw = Vec::with_capacity(n);
        for k in 0..n {
            if k == i {
                let fresh = if self.cfg.likelihood {
                    log_base_marginal(pr.a, pr.b, x)
                } else {
                    0.0
                };
                lw.push(self.state.m[j].ln() + fresh);
            } else {
                let lam = self.state.lambda[k * p + j];
                lw.push(if self.cfg.likelihood {
                    x as f64 * lam.ln() - lam - self.tables.ln_fact[x as usize]
                } else {
                    0.0
                });
            }
        }
        let z = logsumexp(&lw);
        let u: f64 = self.state.rng.random();
        let mut acc = 0.0;
        let mut pick = n - 1;
        for (k, &w) in lw.iter().enumerate() {
            acc += (w - z).exp();
            if u < acc {
                pick = k;
                break;
            }
        }

        if pick == i {
            self.lambda_fresh_draw(j, i, counters);
        } else {
            let new_lambda = self.state.lambda[pick * p + j];
            if new_lambda != self.state.lambda[i * p + j] {
                self.state.lambda[i * p + j] = new_lambda;
                self.logz[i * p + j] =
                    self.log_normalizer(new_lambda.ln(), self.cross[i * p + j]);
            }
        }
    }

    /// MH move for a fresh lambda value: Gamma(a + x, b + 1) candidate,
    /// shrunk toward the current value by K1.
    fn lambda_fresh_draw(&mut self, j: usize, i: usize, counters: &mut SweepCounters) {
        counters.lambda_attempts += 1;
        let p = self.state.p;
        let x = self.data.get(i, j);
        let pr = &self.priors;
        let k1 = self.state.k1;
        let lam0 = self.state.lambda[i * p + j];

        let proposal = Gamma::new(pr.a + x as f64, 1.0 / (pr.b + 1.0))
            .expect("valid gamma parameters");
        let cand_raw: f64 = proposal.sample(&mut self.state.rng);
        let lam_new = lam0 + k1 * (cand_raw - lam0);
        if !(lam_new > 0.0) {
            return; // auto-reject, counted toward adaptation
        }
        // Pre-image of the reverse shrunk move.
        let rev_raw = lam_new + (lam0 - lam_new) / k1;
        if !(rev_raw > 0.0) {
            return;
        }

        let mut log_ratio = gamma_log_pdf(lam_new, pr.a, pr.b) - gamma_log_pdf(lam0, pr.a, pr.b)
            + gamma_log_pdf(rev_raw, pr.a + x as f64, pr.b + 1.0)
            - gamma_log_pdf(cand_raw, pr.a + x as f64, pr.b + 1.0);

        let mut logz_new = self.logz[i * p + j];
        if self.cfg.likelihood {
            logz_new = self.log_normalizer(lam_new.ln(), self.cross[i * p + j]);
            log_ratio += x as f64 * (lam_new.ln() - lam0.ln())
                - logz_new
                + self.logz[i * p + j];
        }
        if !log_ratio.is_finite() && log_ratio != f64::NEG_INFINITY {
            self.state.nonfinite_rejects += 1;
            return;
        }
        let u: f64 = self.state.rng.random();
        if u.ln() < log_ratio {
            self.state.lambda[i * p + j] = lam_new;
            self.logz[i * p + j] = if self.cfg.likelihood {
                logz_new
            } else {
                self.log_normalizer(lam_new.ln(), self.cross[i * p + j])
            };
            counters.lambda_accepts += 1;
        }
    }

    /// Auxiliary-variable update of the concentration parameter M_j.
    fn update_concentration(&mut self, j: usize) {
        let n = self.state.n;
        let p = self.state.p;
        let unique = {
            let mut seen = std::collections::BTreeSet::new();
            for t in 0..n {
                seen.insert(self.state.lambda[t * p + j].to_bits());
            }
            seen.len()
        };
        let pr = &self.priors;
        let delta_dist =
            Beta::new(self.state.m[j], n as f64).expect("valid beta parameters");
        let delta: f64 = delta_dist.sample(&mut self.state.rng);
        let delta = delta.clamp(1e-300, 1.0 - 1e-16);
        let rate = pr.d - delta.ln();
        let gamma = Gamma::new(pr.c + unique as f64, 1.0 / rate).expect("valid gamma parameters");
        self.state.m[j] = gamma.sample(&mut self.state.rng).max(1e-300);
    }

    /// Proposal moments for the beta row of node `l`: the precision A of the
    /// Gibbs-style Gaussian (so C = A^{-1}) and the mean -C s_{l,-l}.
    fn proposal_moments(&mut self, l: usize) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.state.p;
        let k = p - 1;
        let others: Vec<usize> = (0..p).filter(|&a| a != l).collect();

        let mut omega_sub = DMatrix::zeros(k, k);
        for (ai, &a) in others.iter().enumerate() {
            for (bi, &b) in others.iter().enumerate() {
                omega_sub[(ai, bi)] = if a == b {
                    self.state.omega_diag[a]
                } else {
                    self.state.beta.weight(a, b)
                };
            }
        }
        let mut omega_inv = match omega_sub.clone().try_inverse() {
            Some(inv) => inv,
            None => {
                self.state.ridge_repairs += 1;
                let repaired = &omega_sub + DMatrix::identity(k, k) * 1e-8;
                repaired
                    .try_inverse()
                    .unwrap_or_else(|| DMatrix::identity(k, k))
            }
        };
        // The submatrix is not positive definite in general; clamp its
        // inverse's spectrum so the proposal precision stays PD.
        if omega_inv.clone().cholesky().is_none() {
            self.state.ridge_repairs += 1;
            let sym = (omega_inv.clone() + omega_inv.transpose()) * 0.5;
            let eig = nalgebra::SymmetricEigen::new(sym);
            let vals = eig.eigenvalues.map(|v| v.abs().max(1e-8));
            omega_inv = &eig.eigenvectors
                * DMatrix::from_diagonal(&vals)
                * eig.eigenvectors.transpose();
        }

        let s_ll = self.s[(l, l)];
        let precision = omega_inv * (s_ll + self.priors.gamma_w)
            + DMatrix::identity(k, k) / self.priors.nu3;

        let s_vec = DVector::from_iterator(k, others.iter().map(|&a| self.s[(l, a)]));
        let chol = precision
            .clone()
            .cholesky()
            .expect("proposal precision is PD by construction");
        let mean = -chol.solve(&s_vec);
        (mean, precision)
    }

    /// One beta row update: mixture of an adapted random-walk step along
    /// the centered Gibbs draw and an occasional independence jump to it.
    fn beta_row_update(&mut self, l: usize, counters: &mut SweepCounters) {
        let p = self.state.p;
        let k = p - 1;
        let others: Vec<usize> = (0..p).filter(|&a| a != l).collect();
        let (mean, precision) = self.proposal_moments(l);
        let chol = precision
            .clone()
            .cholesky()
            .expect("proposal precision is PD by construction");

        // z ~ MVN(mean, precision^{-1}): solve L^T x = eps.
        let eps = DVector::from_fn(k, |_, _| {
            self.state.rng.sample::<f64, _>(rand_distr::StandardNormal)
        });
        let z = &mean
            + chol
                .l()
                .transpose()
                .solve_upper_triangular(&eps)
                .expect("nonsingular Cholesky factor");

        let current = DVector::from_iterator(
            k,
            others.iter().map(|&a| self.state.beta.weight(l, a)),
        );

        let jump: f64 = self.state.rng.random();
        let independence = jump < self.cfg.gibbs_jump_prob;
        let (candidate, log_proposal_ratio, adapt) = if independence {
            // Independence jump straight to the Gibbs draw; Hastings factor
            // is the Gaussian density ratio with the shared (mean, C).
            let lphi = |v: &DVector<f64>| {
                let d = v - &mean;
                -0.5 * (precision.clone() * &d).dot(&d)
            };
            let ratio = lphi(&current) - lphi(&z);
            (z.clone(), ratio, false)
        } else {
            // Symmetric preconditioned random walk with step K2.
            let cand = &current + (&z - &mean) * self.state.k2;
            (cand, 0.0, true)
        };
        if adapt {
            counters.beta_attempts += 1;
        }

        if (&candidate - &current).norm() == 0.0 {
            // Degenerate zero-length move; nothing to decide.
            return;
        }

        let mut log_ratio = log_proposal_ratio;
        // Gaussian prior on each entry.
        for idx in 0..k {
            log_ratio +=
                (current[idx].powi(2) - candidate[idx].powi(2)) / (2.0 * self.priors.nu3);
        }

        if self.cfg.likelihood {
            // Curvature adjustment: each edge term appears in two node
            // conditionals, so the raw pseudo-likelihood overcounts edge
            // information by a factor of two and its posterior is too
            // narrow by exactly sqrt(2). Weighting the edge-update ratio
            // by 1/2 counts each pair once and restores interval
            // calibration under the null.
            log_ratio += 0.5 * self.pseudo_likelihood_delta(l, &others, &current, &candidate);
        }

        if !log_ratio.is_finite() && log_ratio != f64::NEG_INFINITY {
            self.state.nonfinite_rejects += 1;
            return;
        }
        let u: f64 = self.state.rng.random();
        if u.ln() < log_ratio {
            for (idx, &a) in others.iter().enumerate() {
                self.state.beta.set_weight(l, a, candidate[idx]);
            }
            // Adopt the caches computed for the candidate.
            if self.cfg.likelihood {
                let n = self.state.n;
                for t in 0..n {
                    for j in 0..p {
                        self.cross[t * p + j] = self.scratch_cross[t * p + j];
                        self.logz[t * p + j] = self.scratch_logz[t * p + j];
                    }
                }
            } else {
                self.rebuild_caches();
            }
            if adapt {
                counters.beta_accepts += 1;
            }
        }
    }

    /// Pseudo-likelihood log ratio for replacing the beta row of node `l`,
    /// filling the scratch caches with the candidate's cross terms and
    /// normalizers.
    fn pseudo_likelihood_delta(
        &mut self,
        l: usize,
        others: &[usize],
        current: &DVector<f64>,
        candidate: &DVector<f64>,
    ) -> f64 {
        let n = self.state.n;
        let p = self.state.p;
        let mut delta_by_node = vec![0.0; p];
        for (idx, &a) in others.iter().enumerate() {
            delta_by_node[a] = candidate[idx] - current[idx];
        }

        let mut total = 0.0;
        for t in 0..n {
            let row = self.data.row(t);
            let f_l = self.f_data[t * p + l];
            // New cross term at node l aggregates every changed weight.
            let mut cross_l = self.cross[t * p + l];
            for &a in others {
                cross_l += delta_by_node[a] * self.f_data[t * p + a];
            }
            for j in 0..p {
                let new_cross = if j == l {
                    cross_l
                } else {
                    self.cross[t * p + j] + delta_by_node[j] * f_l
                };
                self.scratch_cross[t * p + j] = new_cross;
                if new_cross == self.cross[t * p + j] {
                    self.scratch_logz[t * p + j] = self.logz[t * p + j];
                    continue;
                }
                let x = row[j] as usize;
                let new_logz =
                    self.log_normalizer(self.state.lambda[t * p + j].ln(), new_cross);
                self.scratch_logz[t * p + j] = new_logz;
                total += -self.tables.f[x] * (new_cross - self.cross[t * p + j])
                    - new_logz
                    + self.logz[t * p + j];
            }
        }
        total
    }

    fn adapt(&mut self, counters: &SweepCounters) {
        let gain = (1.0 + self.state.iteration as f64).powf(-0.6);
        let target = self.cfg.target_accept;
        if counters.lambda_attempts > 0 {
            let rate = counters.lambda_accepts as f64 / counters.lambda_attempts as f64;
            self.state.k1 =
                (self.state.k1 * (gain * (rate - target)).exp()).clamp(1e-3, 0.999);
        }
        if counters.beta_attempts > 0 {
            let rate = counters.beta_accepts as f64 / counters.beta_attempts as f64;
            self.state.k2 = (self.state.k2 * (gain * (rate - target)).exp()).clamp(1e-6, 1e6);
        }
    }

    fn checkpoint(&self) -> Result<()> {
        if let Some(cp) = &self.cfg.checkpoint {
            if cp.every > 0 && self.state.iteration % cp.every == 0 {
                let json = serde_json::to_string(&self.state)?;
                std::fs::write(&cp.path, json)?;
            }
        }
        Ok(())
    }

    /// Runs until `n_burn + n_keep` total iterations, returning draws
    /// retained after burn-in.
    pub fn run(&mut self) -> Result<PosteriorSamples> {
        let total = self.cfg.n_burn + self.cfg.n_keep;
        let mut samples = PosteriorSamples {
            p: self.state.p,
            beta: Vec::with_capacity(self.cfg.n_keep),
            m: Vec::with_capacity(self.cfg.n_keep),
            diagnostics: Vec::with_capacity(self.cfg.n_keep),
        };
        while self.state.iteration < total {
            let counters = self.sweep();
            if self.state.iteration < self.cfg.n_burn {
                self.adapt(&counters);
            }
            self.state.iteration += 1;
            if self.state.iteration > self.cfg.n_burn {
                samples.beta.push(self.state.beta.as_slice().to_vec());
                samples.m.push(self.state.m.clone());
                samples.diagnostics.push(IterationDiagnostics {
                    log_pseudo_likelihood: if self.cfg.likelihood {
                        self.log_pseudo_likelihood()
                    } else {
                        f64::NAN
                    },
                    lambda_accept_rate: if counters.lambda_attempts > 0 {
                        counters.lambda_accepts as f64 / counters.lambda_attempts as f64
                    } else {
                        f64::NAN
                    },
                    beta_accept_rate: if counters.beta_attempts > 0 {
                        counters.beta_accepts as f64 / counters.beta_attempts as f64
                    } else {
                        f64::NAN
                    },
                    k1: self.state.k1,
                    k2: self.state.k2,
                });
            }
            self.checkpoint()?;
        }
        Ok(samples)
    }
}

/// Convenience wrapper: build a chain and run it.
pub fn run_chain(
    data: &CountMatrix,
    priors: PriorConfig,
    theta: f64,
    cfg: SamplerConfig,
) -> Result<(PosteriorSamples, SamplerState)> {
    let mut chain = Chain::new(data, priors, theta, cfg)?;
    let samples = chain.run()?;
    Ok((samples, chain.state))
}

/// Log Gamma(a, b)-Poisson marginal mass of a count (negative binomial),
/// used as the fresh-draw weight in the urn step.
pub(crate) fn log_base_marginal(a: f64, b: f64, x: u64) -> f64 {
    ln_gamma(a + x as f64) - ln_gamma(a) - ln_factorial(x) + a * (b / (b + 1.0)).ln()
        - x as f64 * (b + 1.0).ln()
}

/// Column-standardized gram matrix of F(X) and the frozen proposal
/// precision diagonal (diagonal of the inverse sample covariance of the
/// standardized columns).
fn standardized_gram(f_data: &[f64], n: usize, p: usize) -> (DMatrix<f64>, Vec<f64>) {
    let mut z = DMatrix::zeros(n, p);
    for j in 0..p {
        let mean: f64 = (0..n).map(|t| f_data[t * p + j]).sum::<f64>() / n as f64;
        let var: f64 = (0..n)
            .map(|t| (f_data[t * p + j] - mean).powi(2))
            .sum::<f64>()
            / (n.max(2) - 1) as f64;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for t in 0..n {
            z[(t, j)] = (f_data[t * p + j] - mean) / sd;
        }
    }
    let s = z.transpose() * &z;
    let cov = &s / (n.max(2) - 1) as f64;
    let omega_diag = match cov.clone().try_inverse() {
        Some(inv) => (0..p).map(|j| inv[(j, j)].abs().max(1e-8)).collect(),
        None => {
            let repaired = cov + DMatrix::identity(p, p) * 1e-6;
            match repaired.try_inverse() {
                Some(inv) => (0..p).map(|j| inv[(j, j)].abs().max(1e-8)).collect(),
                None => vec![1.0; p],
            }
        }
    };
    (s, omega_diag)
}
