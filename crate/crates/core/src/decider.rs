//! The composed mean test: is the mean of an i.i.d. stream in a Δ₂ set?
//!
//! Each sample updates the running moments. From `n_min` on, the rounded mean
//! `mu_hat` is accepted as the true (natural) mean when it lies within the
//! iterated-logarithm radius `delta_N` of the sample mean (`d_N = 1`). A
//! rejected estimate gives `e_N = 0`; an accepted one is settled by the
//! stage-`N` witness race for `mu_hat`, and an undecided race keeps the
//! previous `e` (0 before any decision).
//!
//! [`Estimator::Sequence`] replaces the naturals by a computable sequence of
//! reals `s_0, s_1, ...` given through certified approximations: the nearest
//! `s_n` with `n <= N` plays the role of `mu_hat` and the race runs on its
//! index. When the closure of the sequence is uncountable the resulting test
//! can fail on a null set of means outside the sequence; nothing here detects
//! that case.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::delta2::{Delta2Set, Verdict, WitnessTracker};
use crate::error::{Error, Result};
use crate::stats::{lil_threshold, LilParams, OnlineStats};
use crate::streams::ComputableSet;

/// `(d, mu_hat)`: `mu_hat` is the natural number nearest to `mean` (halves
/// round up, negatives clamp to 0) and `d = [|mu_hat - mean| <= delta]`.
pub fn integer_decision(mean: f64, delta: f64) -> Result<(bool, u64)> {
    if !mean.is_finite() {
        return Err(Error::NonFinite { what: "mean", value: mean });
    }
    if !(delta.is_finite() && delta >= 0.0) {
        return Err(Error::NonFinite { what: "delta", value: delta });
    }
    let rounded = mean.round().max(0.0);
    let mu_hat = rounded as u64;
    Ok(((rounded - mean).abs() <= delta, mu_hat))
}

/// `1` iff `s` agrees with `target` on every index `< s.len()`.
pub fn prefix_match_decider(target: ComputableSet, s: &[bool]) -> bool {
    s.iter().enumerate().all(|(i, &b)| b == target.contains(i as u64))
}

/// An approximation `value` with `|value - s_n| <= err`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Approx {
    pub value: f64,
    pub err: f64,
}

/// A computable sequence of reals given by certified approximations.
pub trait ApproxSequence: Send + Sync + fmt::Debug {
    /// An approximation of `s_n` with error at most `tol`, or an error if
    /// this sequence cannot provide one.
    fn approx(&self, n: u64, tol: f64) -> Result<Approx>;
}

/// `s_n = n`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Naturals;

impl ApproxSequence for Naturals {
    fn approx(&self, n: u64, _tol: f64) -> Result<Approx> {
        if n >= 1 << 53 {
            return Err(Error::Approximation {
                index: n,
                message: "not representable as a double".into(),
            });
        }
        Ok(Approx { value: n as f64, err: 0.0 })
    }
}

/// `s_n = n * num / den`.
#[derive(Clone, Copy, Debug)]
pub struct Linear {
    pub num: i64,
    pub den: u64,
}

impl ApproxSequence for Linear {
    fn approx(&self, n: u64, tol: f64) -> Result<Approx> {
        let p = n as i128 * self.num as i128;
        if self.den == 0 || p.unsigned_abs() >= 1 << 53 {
            return Err(Error::Approximation {
                index: n,
                message: "numerator out of exact range".into(),
            });
        }
        let value = p as f64 / self.den as f64;
        // a quotient of exact doubles is exact when the divisor is a power of
        // two or divides the numerator; otherwise it is correctly rounded
        let exact = self.den.is_power_of_two() || p % self.den as i128 == 0;
        let err = if exact { 0.0 } else { value.abs() * f64::EPSILON / 2.0 };
        if err > tol {
            return Err(Error::Approximation {
                index: n,
                message: format!("error {err:e} above tolerance {tol:e}"),
            });
        }
        Ok(Approx { value, err })
    }
}

/// `s_n = sqrt(n)`, from the correctly rounded double square root.
#[derive(Clone, Copy, Debug, Default)]
pub struct SquareRoots;

impl ApproxSequence for SquareRoots {
    fn approx(&self, n: u64, tol: f64) -> Result<Approx> {
        let r = n.isqrt();
        if r * r == n {
            return Ok(Approx { value: r as f64, err: 0.0 });
        }
        let value = (n as f64).sqrt();
        // half an ulp of the result, plus the input rounding for large n
        let err = value * f64::EPSILON;
        if err > tol {
            return Err(Error::Approximation {
                index: n,
                message: format!("error {err:e} above tolerance {tol:e}"),
            });
        }
        Ok(Approx { value, err })
    }
}

/// `(d, index)` for a general sequence: the index `n <= bound` minimising
/// `|s_n - mean|` using approximations within `delta / 4` (any certified
/// approximation when `delta = 0`), ties going to the
/// larger index; `d = 1` iff the distance plus the approximation error is at
/// most `delta`.
pub fn sequence_decision(seq: &dyn ApproxSequence, mean: f64, delta: f64, bound: u64) -> Result<(bool, u64)> {
    if !mean.is_finite() {
        return Err(Error::NonFinite { what: "mean", value: mean });
    }
    // with delta = 0 only exact members can be accepted, so any certified
    // approximation settles the comparison
    let tol = if delta > 0.0 { delta / 4.0 } else { f64::INFINITY };
    let mut best: Option<(f64, f64, u64)> = None;
    for n in 0..=bound {
        let a = seq.approx(n, tol)?;
        let dist = (a.value - mean).abs();
        if best.is_none_or(|(d, _, _)| dist <= d) {
            best = Some((dist, a.err, n));
        }
    }
    let (dist, err, index) = best.expect("range 0..=bound is non-empty");
    Ok((dist + err <= delta, index))
}

/// How the stage estimate of the mean is formed.
#[derive(Clone, Debug, Default)]
pub enum Estimator {
    /// Round to the nearest natural number.
    #[default]
    Naturals,
    Sequence(Arc<dyn ApproxSequence>),
}

/// The per-step decisions. Absent before `n_min`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub delta: f64,
    pub mu_hat: u64,
    pub d: bool,
    pub e: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    #[serde(rename = "N")]
    pub n: u64,
    pub mean: f64,
    pub var: f64,
    #[serde(flatten)]
    pub decision: Option<Decision>,
}

/// Running state of the composed test for one stream.
#[derive(Clone, Debug)]
pub struct Decider {
    stats: OnlineStats,
    params: LilParams,
    set: Arc<Delta2Set>,
    estimator: Estimator,
    last_d: Option<bool>,
    last_e: Option<bool>,
    tracker: WitnessTracker,
}

impl Decider {
    pub fn new(set: Arc<Delta2Set>, params: LilParams) -> Self {
        Self::with_estimator(set, params, Estimator::Naturals)
    }

    pub fn with_estimator(set: Arc<Delta2Set>, params: LilParams, estimator: Estimator) -> Self {
        Decider {
            stats: OnlineStats::new(),
            params,
            set,
            estimator,
            last_d: None,
            last_e: None,
            tracker: WitnessTracker::new(),
        }
    }

    pub fn stats(&self) -> &OnlineStats {
        &self.stats
    }

    pub fn last_d(&self) -> Option<bool> {
        self.last_d
    }

    pub fn last_e(&self) -> Option<bool> {
        self.last_e
    }

    /// Consumes one sample. A failing step leaves the state unchanged.
    pub fn step(&mut self, x: f64) -> Result<TraceRow> {
        let mut stats = self.stats;
        stats.update(x)?;
        let n = stats.count();
        let mean = stats.mean();
        let var = stats.variance().unwrap_or(0.0);
        if n < self.params.n_min() {
            self.stats = stats;
            return Ok(TraceRow {
                n,
                mean,
                var,
                decision: None,
            });
        }
        let delta = lil_threshold(n, var, &self.params)?;
        let (d, mu_hat) = match &self.estimator {
            Estimator::Naturals => integer_decision(mean, delta)?,
            Estimator::Sequence(seq) => sequence_decision(seq.as_ref(), mean, delta, n)?,
        };
        let e = if d {
            match self.tracker.race(&self.set, mu_hat, n).verdict {
                Verdict::InSet => true,
                Verdict::NotInSet => false,
                Verdict::Undecided => self.last_e.unwrap_or(false),
            }
        } else {
            false
        };
        self.stats = stats;
        self.last_d = Some(d);
        self.last_e = Some(e);
        Ok(TraceRow {
            n,
            mean,
            var,
            decision: Some(Decision { delta, mu_hat, d, e }),
        })
    }
}

/// Rows of one run, plus the error that ended it early, if any.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub rows: Vec<TraceRow>,
    pub failure: Option<String>,
}

pub const TRACE_CSV_HEADER: &str = "N,mean,var,delta,mu_hat,d,e";

impl DecisionTrace {
    pub fn decision_rows(&self) -> impl Iterator<Item = (u64, &Decision)> {
        self.rows.iter().filter_map(|r| r.decision.as_ref().map(|d| (r.n, d)))
    }

    /// `e` at the final decision row.
    pub fn final_verdict(&self) -> Option<bool> {
        self.decision_rows().last().map(|(_, d)| d.e)
    }

    pub fn final_d(&self) -> Option<bool> {
        self.decision_rows().last().map(|(_, d)| d.d)
    }

    /// The largest `N` with `e_N != e_{N-1}`, 0 if `e` never changes.
    pub fn last_flip_n(&self) -> u64 {
        let mut flips = FlipWatch::default();
        for (n, d) in self.decision_rows() {
            flips.observe(n, d.e);
        }
        flips.last_flip
    }

    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{TRACE_CSV_HEADER}")?;
        for r in &self.rows {
            write!(w, "{},{},{}", r.n, r.mean, r.var)?;
            match &r.decision {
                Some(d) => writeln!(w, ",{},{},{},{}", d.delta, d.mu_hat, u8::from(d.d), u8::from(d.e))?,
                None => writeln!(w, ",,,,")?,
            }
        }
        Ok(())
    }

    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut lines = r.lines();
        let bad = |line: usize, message: String| Error::Parse { line, message };
        match lines.next() {
            Some(Ok(h)) if h == TRACE_CSV_HEADER => {}
            _ => return Err(bad(1, format!("expected header `{TRACE_CSV_HEADER}`"))),
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line.map_err(|e| bad(i + 2, e.to_string()))?;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(bad(i + 2, format!("expected 7 fields, got {}", f.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|e| bad(i + 2, e.to_string()));
            let bit = |s: &str| match s {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(bad(i + 2, format!("bad bit `{s}`"))),
            };
            let decision = if f[3..].iter().all(|s| s.is_empty()) {
                None
            } else {
                Some(Decision {
                    delta: num(f[3])?,
                    mu_hat: f[4].parse().map_err(|e: std::num::ParseIntError| bad(i + 2, e.to_string()))?,
                    d: bit(f[5])?,
                    e: bit(f[6])?,
                })
            };
            rows.push(TraceRow {
                n: f[0].parse().map_err(|e: std::num::ParseIntError| bad(i + 2, e.to_string()))?,
                mean: num(f[1])?,
                var: num(f[2])?,
                decision,
            });
        }
        Ok(DecisionTrace { rows, failure: None })
    }

    /// One JSON object per row; sentinel rows carry nulls.
    pub fn write_jsonl(&self, mut w: impl Write) -> io::Result<()> {
        for r in &self.rows {
            let d = r.decision.as_ref();
            let obj = serde_json::json!({
                "N": r.n,
                "mean": r.mean,
                "var": r.var,
                "delta": d.map(|d| d.delta),
                "mu_hat": d.map(|d| d.mu_hat),
                "d": d.map(|d| u8::from(d.d)),
                "e": d.map(|d| u8::from(d.e)),
            });
            writeln!(w, "{obj}")?;
        }
        Ok(())
    }
}

/// Tracks the last index at which a bit sequence changed value.
#[derive(Clone, Copy, Debug, Default)]
pub struct FlipWatch {
    prev: Option<bool>,
    pub last_flip: u64,
}

impl FlipWatch {
    pub fn observe(&mut self, n: u64, e: bool) {
        if self.prev.is_some_and(|p| p != e) {
            self.last_flip = n;
        }
        self.prev = Some(e);
    }
}
