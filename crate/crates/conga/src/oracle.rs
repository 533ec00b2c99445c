//! Exact brute-force reference for tiny models: full enumeration of the
//! joint pmf over a truncated support, inverse-CDF sampling from it, and
//! edge-recovery scoring.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::edges::EdgeWeights;
use crate::error::{CongaError, Result};
use crate::math::logsumexp;
use crate::model::log_unnormalized_joint;

/// Maximum number of enumerated states.
const MAX_STATES: usize = 250_000;

/// A model instance small enough to enumerate exhaustively.
#[derive(Debug, Clone)]
pub struct TinyMrfSpec {
    pub lambda_row: Vec<f64>,
    pub beta: EdgeWeights,
    pub theta: f64,
    /// Support cap per node; the joint is enumerated over {0..=b_small}^P.
    pub b_small: usize,
}

impl TinyMrfSpec {
    fn validate(&self) -> Result<()> {
        let p = self.beta.p();
        if self.lambda_row.len() != p {
            return Err(CongaError::ShapeMismatch(format!(
                "lambda_row has {} entries for p={p}",
                self.lambda_row.len()
            )));
        }
        if p > 3 {
            return Err(CongaError::InvalidParameter(
                "exhaustive enumeration supports p <= 3".into(),
            ));
        }
        let states = (self.b_small + 1).checked_pow(p as u32).unwrap_or(usize::MAX);
        if states > MAX_STATES {
            return Err(CongaError::InvalidParameter(format!(
                "support of {states} states is too large to enumerate"
            )));
        }
        Ok(())
    }
}

/// Fully enumerated joint over {0..=b}^P, normalized over that support.
#[derive(Debug, Clone)]
pub struct ExactJointPmf {
    p: usize,
    b: usize,
    probs: Vec<f64>,
}

impl ExactJointPmf {
    pub fn new(spec: &TinyMrfSpec) -> Result<Self> {
        spec.validate()?;
        let p = spec.beta.p();
        let b = spec.b_small;
        let n_states = (b + 1).pow(p as u32);
        let mut log_mass = Vec::with_capacity(n_states);
        let mut state = vec![0u64; p];
        for idx in 0..n_states {
            Self::decode(idx, b, &mut state);
            log_mass.push(log_unnormalized_joint(
                &state,
                &spec.lambda_row,
                &spec.beta,
                spec.theta,
            )?);
        }
        let z = logsumexp(&log_mass);
        let probs = log_mass.iter().map(|&lm| (lm - z).exp()).collect();
        Ok(ExactJointPmf { p, b, probs })
    }

    fn decode(mut idx: usize, b: usize, state: &mut [u64]) {
        let base = b + 1;
        for s in state.iter_mut().rev() {
            *s = (idx % base) as u64;
            idx /= base;
        }
    }

    fn encode(&self, state: &[u64]) -> usize {
        let base = self.b + 1;
        state.iter().fold(0usize, |acc, &v| acc * base + v as usize)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn prob(&self, state: &[u64]) -> f64 {
        self.probs[self.encode(state)]
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Conditional pmf of node `j` over 0..=b given the other coordinates
    /// of `state` (the value at `j` is ignored).
    pub fn conditional(&self, j: usize, state: &[u64]) -> Vec<f64> {
        let mut s = state.to_vec();
        let table: Vec<f64> = (0..=self.b as u64)
            .map(|v| {
                s[j] = v;
                self.prob(&s)
            })
            .collect();
        let z: f64 = table.iter().sum();
        table.iter().map(|&t| t / z).collect()
    }

    /// Marginal pmf of node `j`.
    pub fn marginal(&self, j: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.b + 1];
        let mut state = vec![0u64; self.p];
        for (idx, &pr) in self.probs.iter().enumerate() {
            Self::decode(idx, self.b, &mut state);
            out[state[j] as usize] += pr;
        }
        out
    }

    /// Pearson correlation of nodes j and l under the enumerated joint.
    pub fn correlation(&self, j: usize, l: usize) -> f64 {
        let mut state = vec![0u64; self.p];
        let (mut ej, mut el, mut ejj, mut ell, mut ejl) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (idx, &pr) in self.probs.iter().enumerate() {
            Self::decode(idx, self.b, &mut state);
            let (xj, xl) = (state[j] as f64, state[l] as f64);
            ej += pr * xj;
            el += pr * xl;
            ejj += pr * xj * xj;
            ell += pr * xl * xl;
            ejl += pr * xj * xl;
        }
        (ejl - ej * el) / ((ejj - ej * ej).sqrt() * (ell - el * el).sqrt())
    }

    /// For p = 3: the largest violation of the conditional-independence
    /// factorization P(x_j, x_l | x_m) = P(x_j | x_m) P(x_l | x_m) over the
    /// whole support, where m is the remaining node.
    pub fn factorization_gap(&self, j: usize, l: usize) -> Result<f64> {
        if self.p != 3 {
            return Err(CongaError::InvalidParameter(
                "factorization gap is defined for p = 3".into(),
            ));
        }
        let m = (0..3).find(|&k| k != j && k != l).unwrap();
        let base = self.b + 1;
        let mut worst: f64 = 0.0;
        let mut state = vec![0u64; 3];
        for xm in 0..base as u64 {
            state[m] = xm;
            // P(x_m), joint slice, and the two conditional marginals.
            let mut slice = vec![0.0; base * base];
            let mut pm = 0.0;
            for xj in 0..base as u64 {
                for xl in 0..base as u64 {
                    state[j] = xj;
                    state[l] = xl;
                    let pr = self.prob(&state);
                    slice[xj as usize * base + xl as usize] = pr;
                    pm += pr;
                }
            }
            let mut mj = vec![0.0; base];
            let mut ml = vec![0.0; base];
            for xj in 0..base {
                for xl in 0..base {
                    mj[xj] += slice[xj * base + xl];
                    ml[xl] += slice[xj * base + xl];
                }
            }
            for xj in 0..base {
                for xl in 0..base {
                    let lhs = slice[xj * base + xl] / pm;
                    let rhs = (mj[xj] / pm) * (ml[xl] / pm);
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
        Ok(worst)
    }
}

/// Draws iid rows from the enumerated joint by inverse-CDF lookup.
pub fn sample_tiny_mrf(spec: &TinyMrfSpec, n: usize, seed: u64) -> Result<Vec<Vec<u64>>> {
    let pmf = ExactJointPmf::new(spec)?;
    let mut cdf = Vec::with_capacity(pmf.probs.len());
    let mut acc = 0.0;
    for &pr in &pmf.probs {
        acc += pr;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut state = vec![0u64; pmf.p];
    for _ in 0..n {
        let u: f64 = rng.random();
        let idx = cdf.partition_point(|&c| c < u).min(cdf.len() - 1);
        ExactJointPmf::decode(idx, pmf.b, &mut state);
        rows.push(state.clone());
    }
    Ok(rows)
}

/// False-positive and false-negative edge proportions of an estimated edge
/// set against the truth. `p1` is false edges over true non-edges (0 when
/// the truth is complete); `p2` is missed edges over true edges (0 when the
/// truth is empty).
pub fn evaluate_estimate(
    p: usize,
    truth: &[(usize, usize)],
    estimate: &[(usize, usize)],
) -> (f64, f64) {
    let norm = |(j, l): (usize, usize)| if j < l { (j, l) } else { (l, j) };
    let truth: std::collections::BTreeSet<_> = truth.iter().copied().map(norm).collect();
    let estimate: std::collections::BTreeSet<_> = estimate.iter().copied().map(norm).collect();
    let q = p * (p - 1) / 2;
    let non_edges = q - truth.len();
    let false_pos = estimate.difference(&truth).count();
    let false_neg = truth.difference(&estimate).count();
    let p1 = if non_edges == 0 {
        0.0
    } else {
        false_pos as f64 / non_edges as f64
    };
    let p2 = if truth.is_empty() {
        0.0
    } else {
        false_neg as f64 / truth.len() as f64
    };
    (p1, p2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{ln_factorial, poisson_log_pmf};
    use approx::assert_relative_eq;

    fn independent_spec(b: usize) -> TinyMrfSpec {
        TinyMrfSpec {
            lambda_row: vec![1.0, 1.0],
            beta: EdgeWeights::zeros(2).unwrap(),
            theta: 1.0,
            b_small: b,
        }
    }

    #[test]
    fn normalizes_to_one() {
        let pmf = ExactJointPmf::new(&independent_spec(25)).unwrap();
        assert!((pmf.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_case_is_product_of_truncated_poissons() {
        let b = 25usize;
        let pmf = ExactJointPmf::new(&independent_spec(b)).unwrap();
        let z: f64 = (0..=b as u64)
            .map(|v| poisson_log_pmf(v, 1.0).exp())
            .sum();
        for x1 in [0u64, 1, 3, 10] {
            for x2 in [0u64, 2, 7] {
                let expected = (poisson_log_pmf(x1, 1.0).exp() / z)
                    * (poisson_log_pmf(x2, 1.0).exp() / z);
                assert_relative_eq!(pmf.prob(&[x1, x2]), expected, epsilon = 1e-10);
            }
        }
        let _ = ln_factorial(3);
    }

    #[test]
    fn zero_edge_weight_factorizes() {
        let mut beta = EdgeWeights::zeros(3).unwrap();
        beta.set_weight(0, 2, 0.8);
        beta.set_weight(1, 2, -0.5);
        let spec = TinyMrfSpec {
            lambda_row: vec![1.0, 2.0, 0.5],
            beta,
            theta: 1.4,
            b_small: 15,
        };
        let pmf = ExactJointPmf::new(&spec).unwrap();
        assert!(pmf.factorization_gap(0, 1).unwrap() < 1e-10);
    }

    #[test]
    fn positive_beta_induces_negative_correlation() {
        // The minus-sign convention in the exponent makes positive beta
        // repulsive.
        let spec = TinyMrfSpec {
            lambda_row: vec![2.0, 2.0],
            beta: EdgeWeights::from_vec(2, vec![4.0]).unwrap(),
            theta: 1.0,
            b_small: 25,
        };
        let pmf = ExactJointPmf::new(&spec).unwrap();
        assert!(pmf.correlation(0, 1) < 0.0);
    }

    #[test]
    fn sampler_empty_and_deterministic() {
        let spec = independent_spec(10);
        assert!(sample_tiny_mrf(&spec, 0, 1).unwrap().is_empty());
        let a = sample_tiny_mrf(&spec, 20, 42).unwrap();
        let b = sample_tiny_mrf(&spec, 20, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sampler_respects_near_point_mass() {
        // Huge lambda contrast concentrates the truncated joint at (b, b).
        let spec = TinyMrfSpec {
            lambda_row: vec![1e5, 1e5],
            beta: EdgeWeights::zeros(2).unwrap(),
            theta: 1.0,
            b_small: 5,
        };
        let pmf = ExactJointPmf::new(&spec).unwrap();
        assert!(pmf.prob(&[5, 5]) > 0.999);
        let rows = sample_tiny_mrf(&spec, 200, 7).unwrap();
        let hits = rows.iter().filter(|r| r.as_slice() == [5, 5]).count();
        assert!(hits >= 198);
    }

    #[test]
    fn sampler_goodness_of_fit() {
        // Chi-square GOF against the enumerated table at the 1% level.
        let spec = TinyMrfSpec {
            lambda_row: vec![1.5, 1.0],
            beta: EdgeWeights::from_vec(2, vec![0.7]).unwrap(),
            theta: 1.0,
            b_small: 10,
        };
        let pmf = ExactJointPmf::new(&spec).unwrap();
        let n = 50_000usize;
        let rows = sample_tiny_mrf(&spec, n, 99).unwrap();
        let base = spec.b_small + 1;
        let mut counts = vec![0usize; base * base];
        for r in &rows {
            counts[r[0] as usize * base + r[1] as usize] += 1;
        }
        // Pool cells with tiny expectation into one bucket.
        let mut chi2 = 0.0;
        let mut dof = 0usize;
        let (mut pooled_obs, mut pooled_exp) = (0.0f64, 0.0f64);
        let mut state = vec![0u64; 2];
        for idx in 0..base * base {
            ExactJointPmf::decode(idx, spec.b_small, &mut state);
            let expected = pmf.prob(&state) * n as f64;
            if expected < 5.0 {
                pooled_obs += counts[idx] as f64;
                pooled_exp += expected;
            } else {
                chi2 += (counts[idx] as f64 - expected).powi(2) / expected;
                dof += 1;
            }
        }
        if pooled_exp > 0.0 {
            chi2 += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
            dof += 1;
        }
        let dof = dof.saturating_sub(1) as f64;
        // 1% critical value for chi-square: roughly dof + 3.29*sqrt(2*dof)
        // is a close normal approximation at these dof.
        let crit = dof + 3.29 * (2.0 * dof).sqrt();
        assert!(chi2 < crit, "chi2 {chi2:.1} vs crit {crit:.1} (dof {dof})");
    }

    #[test]
    fn evaluate_estimate_conventions() {
        assert_eq!(
            evaluate_estimate(3, &[(0, 1)], &[(0, 1), (0, 2)]),
            (0.5, 0.0)
        );
        assert_eq!(evaluate_estimate(3, &[(0, 1)], &[(0, 1)]), (0.0, 0.0));
        assert_eq!(evaluate_estimate(3, &[], &[]), (0.0, 0.0));
        // Complete truth: p1 is 0 by convention.
        assert_eq!(
            evaluate_estimate(3, &[(0, 1), (0, 2), (1, 2)], &[(0, 1)]),
            (0.0, 2.0 / 3.0)
        );
    }
}
