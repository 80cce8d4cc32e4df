//! Streaming sample statistics and the derived efficiency metrics.
//!
//! `Moments` accumulates count/mean/M2 with Welford updates and merges
//! partial accumulators with Chan's pairwise formula, so a run can be split
//! into blocks, reduced in a fixed order, and produce the same floating-point
//! result no matter how many workers computed the blocks.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MetricsError {
    #[error("relative error is undefined against a zero reference value")]
    ZeroReference,
}

/// Running first and second moments of a scalar sample.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn new() -> Self {
        Moments::default()
    }

    /// Welford single-observation update.
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    /// Chan's parallel combination of two partial accumulators.
    pub fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n1 = self.count as f64;
        let n2 = other.count as f64;
        let n = n1 + n2;
        let delta = other.mean - self.mean;
        self.mean += delta * n2 / n;
        self.m2 += other.m2 + delta * delta * n1 * n2 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance of the observations.
    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        self.m2 / (self.count as f64 - 1.0)
    }

    /// Standard deviation of the *estimator* (the sample mean), i.e. the
    /// sample standard deviation divided by sqrt(count).
    pub fn estimator_stddev(&self) -> f64 {
        if self.count < 2 {
            return 0.0;
        }
        (self.sample_variance() / self.count as f64).sqrt()
    }
}

/// Neumaier compensated summation, for adding many signed per-sample terms
/// without drift.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        CompensatedSum::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Relative standard deviation of the estimate: sqrt(N) * stddev / |mean|.
/// Undefined (None) when the estimate itself is zero.
pub fn relative_stddev(moments: &Moments) -> Option<f64> {
    if moments.mean() == 0.0 {
        return None;
    }
    Some((moments.count() as f64).sqrt() * moments.estimator_stddev() / moments.mean().abs())
}

/// Work-normalized squared relative spread: RSD^2 * cost-per-sample seconds.
/// Lower is better; it is invariant to how many samples the run used.
pub fn rsd_cost(moments: &Moments, cost_per_sample_seconds: f64) -> Option<f64> {
    relative_stddev(moments).map(|rsd| rsd * rsd * cost_per_sample_seconds)
}

/// Relative error against a known reference, in percent.
pub fn relative_error_percent(estimate: f64, reference: f64) -> Result<f64, MetricsError> {
    if reference == 0.0 {
        return Err(MetricsError::ZeroReference);
    }
    Ok((estimate - reference).abs() / reference.abs() * 100.0)
}
