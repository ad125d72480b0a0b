//! Cross-run mean and Student-t confidence half-width.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

pub const DEFAULT_CONFIDENCE: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least two runs for a confidence interval, got {0}")]
    TooFewRuns(usize),
    #[error("confidence must lie strictly between 0 and 1, got {0}")]
    InvalidConfidence(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateStat {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
    pub confidence: f64,
}

/// Two-sided Student-t quantile `t(1 - (1 - confidence)/2, df)`.
pub fn t_critical(confidence: f64, df: usize) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df as f64).expect("df >= 1");
    dist.inverse_cdf(1.0 - (1.0 - confidence) / 2.0)
}

/// `half_width = t * s / sqrt(n)` with `s` the sample standard deviation.
pub fn aggregate_runs(values: &[f64], confidence: f64) -> Result<AggregateStat, StatsError> {
    let n = values.len();
    if n < 2 {
        return Err(StatsError::TooFewRuns(n));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::InvalidConfidence(confidence));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    // identical runs give exactly zero, not float noise
    let half_width = if values.iter().all(|v| *v == values[0]) || var == 0.0 {
        0.0
    } else {
        t_critical(confidence, n - 1) * var.sqrt() / (n as f64).sqrt()
    };
    Ok(AggregateStat {
        mean,
        half_width,
        n,
        confidence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Closed-form inverse CDF of Student's t with two degrees of freedom.
    fn t2_quantile(p: f64) -> f64 {
        let a = 4.0 * p * (1.0 - p);
        (2.0 * p - 1.0) * (2.0 / a).sqrt()
    }

    #[test]
    fn critical_value_df2() {
        let t = t_critical(0.95, 2);
        assert!((t - t2_quantile(0.975)).abs() < 1e-9);
        assert!((t - 4.302653).abs() < 1e-6);
    }

    #[test]
    fn three_runs() {
        let s = aggregate_runs(&[0.5, 0.6, 0.7], 0.95).unwrap();
        assert!((s.mean - 0.6).abs() < 1e-12);
        let expected = t2_quantile(0.975) * 0.1 / 3f64.sqrt();
        assert!((s.half_width - expected).abs() < 1e-9);
        assert!((s.half_width - 0.2484).abs() < 1e-4);
        assert_eq!(s.n, 3);
    }

    #[test]
    fn zero_variance() {
        let s = aggregate_runs(&[0.6, 0.6, 0.6], 0.95).unwrap();
        assert_eq!(s.half_width, 0.0);
    }

    #[test]
    fn errors() {
        assert_eq!(aggregate_runs(&[0.5], 0.95), Err(StatsError::TooFewRuns(1)));
        assert!(aggregate_runs(&[0.5, 0.6], 1.0).is_err());
    }
}
