//! Seeded i.i.d. sample streams and bit sources.
//!
//! Every sample consumes exactly one SplitMix64 output (see [`rng`]); normal
//! variates use the AS 241 inverse CDF, so stream position `i` depends only
//! on `(seed, i)`.

mod bits;
pub mod mean;
pub mod normal;
pub mod rng;

use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

pub use bits::{BitSource, ComputableSet};
pub use mean::Mean;
pub use rng::SplitMix64;

use crate::error::{Error, Result};

/// Relative tolerance for checking stated moments of discrete shapes.
const MOMENT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    Normal,
    /// Uniform on `mean ± sqrt(3 variance)`.
    Uniform,
    /// `shift + Bernoulli(p)` with `shift = mean - p`.
    ShiftedBernoulli { p: f64 },
    /// Finite support `values[i]` with probability `probs[i]`.
    DiscretePmf { values: Vec<f64>, probs: Vec<f64> },
}

impl Distribution {
    pub fn name(&self) -> &'static str {
        match self {
            Distribution::Normal => "normal",
            Distribution::Uniform => "uniform",
            Distribution::ShiftedBernoulli { .. } => "shifted-bernoulli",
            Distribution::DiscretePmf { .. } => "discrete-pmf",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StreamSpec {
    pub distribution: Distribution,
    pub mean: Mean,
    pub variance: f64,
    pub seed: u64,
}

impl StreamSpec {
    /// Validating constructor.
    pub fn new(distribution: Distribution, mean: Mean, variance: f64, seed: u64) -> Result<Self> {
        let spec = StreamSpec {
            distribution,
            mean,
            variance,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn normal(mean: impl Into<Mean>, variance: f64, seed: u64) -> Result<Self> {
        Self::new(Distribution::Normal, mean.into(), variance, seed)
    }

    pub fn uniform_range(a: f64, b: f64, seed: u64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::invalid("uniform range", format!("need finite a <= b, got [{a}, {b}]")));
        }
        let mid = (BigRational::from_float(a).unwrap() + BigRational::from_float(b).unwrap())
            / BigRational::from_integer(2.into());
        Self::new(Distribution::Uniform, Mean::Exact(mid), (b - a) * (b - a) / 12.0, seed)
    }

    pub fn shifted_bernoulli(p: f64, shift: Mean, seed: u64) -> Result<Self> {
        let pr = BigRational::from_float(p).ok_or(Error::NonFinite { what: "p", value: p })?;
        let mean = match shift {
            Mean::Exact(s) => Mean::Exact(s + pr),
            dyadic => Mean::Exact(dyadic.value() + pr),
        };
        Self::new(Distribution::ShiftedBernoulli { p }, mean, p * (1.0 - p), seed)
    }

    pub fn discrete_pmf(values: Vec<f64>, probs: Vec<f64>, seed: u64) -> Result<Self> {
        check_pmf(&values, &probs)?;
        let exact: Option<BigRational> = values
            .iter()
            .zip(&probs)
            .map(|(&v, &p)| Some(BigRational::from_float(v)? * BigRational::from_float(p)?))
            .sum();
        let mean = exact.ok_or_else(|| Error::invalid("values", "non-finite entry"))?;
        let m = mean.to_f64().unwrap_or(f64::NAN);
        let variance = values.iter().zip(&probs).map(|(v, p)| p * (v - m) * (v - m)).sum();
        Self::new(Distribution::DiscretePmf { values, probs }, Mean::Exact(mean), variance, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.variance.is_finite() || self.variance < 0.0 {
            return Err(Error::invalid(
                "variance",
                format!("must be finite and >= 0, got {}", self.variance),
            ));
        }
        self.mean.validate()?;
        let mean = self.mean.to_f64();
        match &self.distribution {
            Distribution::Normal | Distribution::Uniform => {}
            Distribution::ShiftedBernoulli { p } => {
                if !(0.0..=1.0).contains(p) {
                    return Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")));
                }
                check_close("variance", self.variance, p * (1.0 - p))?;
            }
            Distribution::DiscretePmf { values, probs } => {
                check_pmf(values, probs)?;
                let m: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
                let var: f64 = values.iter().zip(probs).map(|(v, p)| p * (v - m) * (v - m)).sum();
                check_close("mean", mean, m)?;
                check_close("variance", self.variance, var)?;
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        StreamSpec {
            seed,
            ..self.clone()
        }
    }

    pub fn stream(&self) -> SampleStream {
        SampleStream::new(self)
    }
}

fn check_close(field: &str, got: f64, want: f64) -> Result<()> {
    if (got - want).abs() > MOMENT_TOL * want.abs().max(1.0) {
        return Err(Error::invalid(field, format!("stated {got} but the distribution implies {want}")));
    }
    Ok(())
}

fn check_pmf(values: &[f64], probs: &[f64]) -> Result<()> {
    if values.is_empty() || values.len() != probs.len() {
        return Err(Error::invalid("probs", "need one probability per value, at least one value"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("values", "entries must be finite"));
    }
    if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(Error::invalid("probs", "entries must be finite and >= 0"));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > MOMENT_TOL {
        return Err(Error::invalid("probs", format!("must sum to 1, got {total}")));
    }
    Ok(())
}

#[derive(Clone, Debug)]
enum Shape {
    Normal { mean: f64, sd: f64 },
    Uniform { mean: f64, half_width: f64 },
    Bernoulli { shift: f64, p: f64 },
    Pmf { values: Vec<f64>, cumulative: Vec<f64> },
}

/// Single-owner sampling state for one [`StreamSpec`].
#[derive(Clone, Debug)]
pub struct SampleStream {
    rng: SplitMix64,
    shape: Shape,
}

impl SampleStream {
    pub fn new(spec: &StreamSpec) -> Self {
        let mean = spec.mean.to_f64();
        let shape = match &spec.distribution {
            Distribution::Normal => Shape::Normal {
                mean,
                sd: spec.variance.sqrt(),
            },
            Distribution::Uniform => Shape::Uniform {
                mean,
                half_width: (3.0 * spec.variance).sqrt(),
            },
            Distribution::ShiftedBernoulli { p } => {
                let shift = spec.mean.value() - BigRational::from_float(*p).unwrap_or_default();
                Shape::Bernoulli {
                    shift: shift.to_f64().unwrap_or(f64::NAN),
                    p: *p,
                }
            }
            Distribution::DiscretePmf { values, probs } => Shape::Pmf {
                values: values.clone(),
                cumulative: probs
                    .iter()
                    .scan(0.0, |acc, p| {
                        *acc += p;
                        Some(*acc)
                    })
                    .collect(),
            },
        };
        SampleStream {
            rng: SplitMix64::new(spec.seed),
            shape,
        }
    }

    /// Samples drawn so far.
    pub fn position(&self) -> u64 {
        self.rng.position()
    }

    pub fn next_sample(&mut self) -> f64 {
        let u = self.rng.next_open01();
        match &self.shape {
            Shape::Normal { mean, sd } => mean + sd * normal::quantile(u),
            Shape::Uniform { mean, half_width } => mean + half_width * (2.0 * u - 1.0),
            Shape::Bernoulli { shift, p } => shift + if u < *p { 1.0 } else { 0.0 },
            Shape::Pmf { values, cumulative } => {
                let i = cumulative.partition_point(|&c| c <= u).min(values.len() - 1);
                values[i]
            }
        }
    }
}

impl Iterator for SampleStream {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        Some(self.next_sample())
    }
}
