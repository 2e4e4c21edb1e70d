//! Exact binomial confidence bounds used by every statistical check.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;

/// Default confidence level, in standard deviations.
pub const DEFAULT_SIGMA: f64 = 3.0;

/// One-sided tail mass equivalent to `sigma` standard deviations.
pub fn alpha_for_sigma(sigma: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("standard normal").cdf(-sigma)
}

/// An observed rate with its Clopper-Pearson bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateEstimate {
    pub hits: u64,
    pub trials: u64,
    pub rate: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Quantile of Beta(a, b) by bisection on the regularized incomplete beta.
fn beta_quantile(a: f64, b: f64, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// One-sided Clopper-Pearson bounds, each at tail mass `alpha`.
pub fn clopper_pearson(hits: u64, trials: u64, alpha: f64) -> (f64, f64) {
    assert!(
        hits <= trials && trials > 0,
        "need 0 <= hits <= trials, trials > 0"
    );
    let (k, n) = (hits as f64, trials as f64);
    let lo = if hits == 0 {
        0.0
    } else {
        beta_quantile(k, n - k + 1.0, alpha)
    };
    let hi = if hits == trials {
        1.0
    } else {
        beta_quantile(k + 1.0, n - k, 1.0 - alpha)
    };
    (lo, hi)
}

impl RateEstimate {
    pub fn new(hits: u64, trials: u64, sigma: f64) -> Self {
        let (lo, hi) = clopper_pearson(hits, trials, alpha_for_sigma(sigma));
        RateEstimate {
            hits,
            trials,
            rate: hits as f64 / trials as f64,
            lo,
            hi,
        }
    }

    /// The rate is significantly at least `threshold`: the lower bound clears it.
    pub fn clears(&self, threshold: f64) -> bool {
        self.lo >= threshold
    }

    /// The rate is not significantly above `bound`.
    pub fn within(&self, bound: f64) -> bool {
        self.lo <= bound
    }
}
