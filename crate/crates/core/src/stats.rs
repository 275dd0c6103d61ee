//! Streaming sample moments and the iterated-logarithm acceptance radius.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default variance inflation slack.
pub const DEFAULT_EPSILON: f64 = 3.0;

/// Smallest allowed first decision index; `ln ln N > 0` needs `N > e`.
pub const MIN_N_MIN: u64 = 16;

/// Running count, mean and sum of squared deviations (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OnlineStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl OnlineStats {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// Sample variance with the `1/N` normalisation; `None` before the first
    /// sample.
    pub fn variance(&self) -> Option<f64> {
        (self.count > 0).then(|| self.m2 / self.count as f64)
    }

    pub fn update(&mut self, x: f64) -> Result<()> {
        if !x.is_finite() {
            return Err(Error::NonFinite { what: "sample", value: x });
        }
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 = (self.m2 + delta * (x - self.mean)).max(0.0);
        Ok(())
    }

    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        let mut s = Self::new();
        for &x in xs {
            s.update(x)?;
        }
        Ok(s)
    }

    /// Statistics of the concatenation of both samples (Chan et al.).
    pub fn merge(&self, other: &OnlineStats) -> OnlineStats {
        if self.count == 0 {
            return *other;
        }
        if other.count == 0 {
            return *self;
        }
        let count = self.count + other.count;
        let (na, nb, n) = (self.count as f64, other.count as f64, count as f64);
        let delta = other.mean - self.mean;
        OnlineStats {
            count,
            mean: self.mean + delta * nb / n,
            m2: (self.m2 + other.m2 + delta * delta * na * nb / n).max(0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LilParams {
    epsilon: f64,
    n_min: u64,
}

impl LilParams {
    pub fn new(epsilon: f64, n_min: u64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::invalid("epsilon", format!("must be finite and > 0, got {epsilon}")));
        }
        if n_min < MIN_N_MIN {
            return Err(Error::invalid("n_min", format!("must be >= {MIN_N_MIN}, got {n_min}")));
        }
        Ok(LilParams { epsilon, n_min })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n_min(&self) -> u64 {
        self.n_min
    }
}

impl Default for LilParams {
    fn default() -> Self {
        LilParams {
            epsilon: DEFAULT_EPSILON,
            n_min: MIN_N_MIN,
        }
    }
}

/// `sqrt(inflation * var_hat * ln ln n / n)` without the burn-in check.
/// Callers must keep `n > e`.
pub fn lil_radius(n: u64, var_hat: f64, inflation: f64) -> f64 {
    let n = n as f64;
    (inflation * var_hat * n.ln().ln() / n).sqrt()
}

/// The acceptance radius `delta_N = sqrt((1 + eps) var_hat ln ln N / N)`.
pub fn lil_threshold(n: u64, var_hat: f64, params: &LilParams) -> Result<f64> {
    if n < params.n_min {
        return Err(Error::TooEarly { n, n_min: params.n_min });
    }
    if !(var_hat.is_finite() && var_hat >= 0.0) {
        return Err(Error::NonFinite { what: "variance", value: var_hat });
    }
    Ok(lil_radius(n, var_hat, 1.0 + params.epsilon))
}
