//! Selection of the transform exponent theta by matching the sample
//! covariance of F(X) to that of X in Frobenius norm.

use crate::error::{CongaError, Result};
use crate::model::transform;
use crate::CountMatrix;

/// Search settings for the one-dimensional objective.
#[derive(Debug, Clone)]
pub struct ThetaSearchConfig {
    pub lower: f64,
    pub upper: f64,
    pub tolerance: f64,
    pub grid_points: usize,
}

impl Default for ThetaSearchConfig {
    fn default() -> Self {
        ThetaSearchConfig {
            lower: 0.05,
            upper: 8.0,
            tolerance: 1e-4,
            grid_points: 200,
        }
    }
}

impl ThetaSearchConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lower > 0.0 && self.lower < self.upper) {
            return Err(CongaError::InvalidParameter(
                "need 0 < lower < upper".into(),
            ));
        }
        if !(self.tolerance > 0.0) || self.grid_points < 2 {
            return Err(CongaError::InvalidParameter(
                "need positive tolerance and at least two grid points".into(),
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let step = (self.upper - self.lower) / (self.grid_points - 1) as f64;
        (0..self.grid_points)
            .map(|i| self.lower + i as f64 * step)
            .collect()
    }
}

/// Selected exponent plus a flag for a flat (degenerate) objective.
#[derive(Debug, Clone, Copy)]
pub struct ThetaEstimate {
    pub theta: f64,
    pub objective: f64,
    pub degenerate: bool,
}

fn sample_covariance(cols: &[Vec<f64>], n: usize) -> Vec<f64> {
    let p = cols.len();
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let mut cov = vec![0.0; p * p];
    for j in 0..p {
        for l in j..p {
            let s: f64 = (0..n)
                .map(|t| (cols[j][t] - means[j]) * (cols[l][t] - means[l]))
                .sum();
            let v = s / (n - 1) as f64;
            cov[j * p + l] = v;
            cov[l * p + j] = v;
        }
    }
    cov
}

/// Frobenius norm of cov(F(X)) - cov(X), sample covariances with
/// denominator n - 1.
pub fn covariance_discrepancy(data: &CountMatrix, theta: f64) -> Result<f64> {
    if data.n() < 2 {
        return Err(CongaError::InsufficientData(
            "covariance needs at least two observations".into(),
        ));
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(CongaError::InvalidParameter(format!(
            "theta must be positive, got {theta}"
        )));
    }
    let n = data.n();
    let p = data.p();
    let raw: Vec<Vec<f64>> = (0..p)
        .map(|j| data.column(j).map(|v| v as f64).collect())
        .collect();
    let trans: Vec<Vec<f64>> = raw
        .iter()
        .map(|c| c.iter().map(|&v| transform(v, theta)).collect())
        .collect();
    let cov_x = sample_covariance(&raw, n);
    let cov_f = sample_covariance(&trans, n);
    let ss: f64 = cov_x
        .iter()
        .zip(&cov_f)
        .map(|(a, b)| (b - a) * (b - a))
        .sum();
    Ok(ss.sqrt())
}

/// Coarse grid scan followed by golden-section refinement of the
/// bracketing interval.
pub fn select_theta(data: &CountMatrix, config: &ThetaSearchConfig) -> Result<ThetaEstimate> {
    config.validate()?;
    let grid = config.grid();
    let values: Vec<f64> = grid
        .iter()
        .map(|&t| covariance_discrepancy(data, t))
        .collect::<Result<_>>()?;

    let (best, &best_val) = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let spread = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)) - best_val;
    if spread <= 1e-14 {
        return Ok(ThetaEstimate {
            theta: config.lower,
            objective: best_val,
            degenerate: true,
        });
    }

    let lo = if best == 0 { grid[0] } else { grid[best - 1] };
    let hi = if best + 1 == grid.len() {
        grid[best]
    } else {
        grid[best + 1]
    };
    let (theta, objective) = golden_section(
        |t| covariance_discrepancy(data, t).unwrap_or(f64::INFINITY),
        lo,
        hi,
        config.tolerance,
    );
    // Never report worse than the grid winner.
    if objective <= best_val {
        Ok(ThetaEstimate {
            theta,
            objective,
            degenerate: false,
        })
    } else {
        Ok(ThetaEstimate {
            theta: grid[best],
            objective: best_val,
            degenerate: false,
        })
    }
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    (mid, f(mid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn constant_columns_give_zero_discrepancy() {
        let data = CountMatrix::from_rows(&[vec![3, 5], vec![3, 5], vec![3, 5]]).unwrap();
        for theta in [0.1, 1.0, 4.0] {
            assert_eq!(covariance_discrepancy(&data, theta).unwrap(), 0.0);
        }
    }

    #[test]
    fn two_point_single_effective_column() {
        // Column 0 varies (0, 1), column 1 constant so it contributes nothing.
        let data = CountMatrix::from_rows(&[vec![0, 2], vec![1, 2]]).unwrap();
        let d = covariance_discrepancy(&data, 1.0).unwrap();
        let var_x = 0.5;
        let var_f = (PI / 4.0) * (PI / 4.0) / 2.0;
        assert_relative_eq!(d, var_x - var_f, epsilon = 1e-12);
        assert_relative_eq!(d, 0.19157, epsilon = 1e-4);
    }

    #[test]
    fn discrepancy_nonnegative() {
        let data = CountMatrix::from_rows(&[vec![0, 4], vec![2, 1], vec![5, 3]]).unwrap();
        for theta in [0.05, 0.3, 1.0, 2.0, 8.0] {
            assert!(covariance_discrepancy(&data, theta).unwrap() >= 0.0);
        }
    }

    #[test]
    fn insufficient_data_rejected() {
        let data = CountMatrix::from_rows(&[vec![1, 2]]).unwrap();
        assert!(matches!(
            covariance_discrepancy(&data, 1.0),
            Err(CongaError::InsufficientData(_))
        ));
    }

    #[test]
    fn constant_data_is_degenerate() {
        let data = CountMatrix::from_rows(&[vec![2, 2], vec![2, 2]]).unwrap();
        let est = select_theta(&data, &ThetaSearchConfig::default()).unwrap();
        assert!(est.degenerate);
        assert_eq!(est.theta, 0.05);
    }

    #[test]
    fn objective_continuity() {
        let data = CountMatrix::from_rows(&[
            vec![0, 4, 1],
            vec![2, 1, 0],
            vec![5, 3, 2],
            vec![1, 0, 6],
        ])
        .unwrap();
        for i in 0..20 {
            let theta = 0.1 + 0.35 * i as f64;
            let a = covariance_discrepancy(&data, theta).unwrap();
            let b = covariance_discrepancy(&data, theta + 1e-6).unwrap();
            assert!((a - b).abs() < 1e-4, "jump at theta={theta}");
        }
    }

    #[test]
    fn matches_fine_grid_argmin() {
        let data = CountMatrix::from_rows(&[
            vec![0, 4, 1],
            vec![2, 1, 0],
            vec![5, 3, 2],
            vec![1, 0, 6],
            vec![3, 2, 2],
        ])
        .unwrap();
        let config = ThetaSearchConfig::default();
        let est = select_theta(&data, &config).unwrap();
        let coarse_spacing = (config.upper - config.lower) / (config.grid_points - 1) as f64;
        let fine = ThetaSearchConfig {
            grid_points: config.grid_points * 10,
            ..config.clone()
        };
        let fine_grid = fine.grid();
        let fine_best = fine_grid
            .iter()
            .copied()
            .min_by(|a, b| {
                covariance_discrepancy(&data, *a)
                    .unwrap()
                    .total_cmp(&covariance_discrepancy(&data, *b).unwrap())
            })
            .unwrap();
        assert!(
            (est.theta - fine_best).abs() <= 2.0 * coarse_spacing,
            "selected {} vs fine argmin {}",
            est.theta,
            fine_best
        );
    }

    #[test]
    fn estimate_within_bounds_and_deterministic() {
        let data = CountMatrix::from_rows(&[vec![0, 4], vec![2, 1], vec![5, 3], vec![9, 0]])
            .unwrap();
        let config = ThetaSearchConfig::default();
        let a = select_theta(&data, &config).unwrap();
        let b = select_theta(&data, &config).unwrap();
        assert_eq!(a.theta, b.theta);
        assert!(a.theta >= config.lower && a.theta <= config.upper);
    }
}
