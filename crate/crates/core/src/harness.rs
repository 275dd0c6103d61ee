//! Seeded Monte Carlo runs of the composed decider.
//!
//! Trial `i` samples from the stream reseeded with
//! [`derive_seed`]`(base_seed, i)`, so a run is a pure function of its
//! [`ExperimentSpec`] whatever the thread schedule. Aggregation happens in
//! trial order.

use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decider::{Decider, DecisionTrace, FlipWatch, TraceRow};
use crate::delta2::Delta2Set;
use crate::error::{Error, Result};
use crate::stats::LilParams;
use crate::streams::rng::derive_seed;
use crate::streams::StreamSpec;

pub const SCHEMA_VERSION: u32 = 1;

/// First agreement checkpoint.
pub const FIRST_CHECKPOINT: u64 = 1 << 10;

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub stream: StreamSpec,
    pub set: Arc<Delta2Set>,
    pub params: LilParams,
    pub horizon: u64,
    pub trials: u64,
    pub base_seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        self.stream.validate()?;
        if self.horizon < self.params.n_min() {
            return Err(Error::invalid(
                "horizon",
                format!("must be >= n_min = {}, got {}", self.params.n_min(), self.horizon),
            ));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials", "must be >= 1"));
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: u64) -> u64 {
        derive_seed(self.base_seed, trial)
    }

    /// Powers of two from 2^10 up to the horizon, then the horizon itself.
    pub fn checkpoints(&self) -> Vec<u64> {
        checkpoints(self.horizon)
    }

    /// Whether the stream mean lies in the set. A mean that is not a natural
    /// number is outside every set of naturals.
    pub fn ground_truth(&self) -> Result<bool> {
        match self.stream.mean.natural()? {
            None => Ok(false),
            Some(n) => self.set.truth(n).ok_or_else(|| {
                Error::invalid(
                    "set",
                    format!("membership of {n} in `{}` is unknown within the budget", self.set.id()),
                )
            }),
        }
    }
}

pub fn checkpoints(horizon: u64) -> Vec<u64> {
    let mut points: Vec<u64> = std::iter::successors(Some(FIRST_CHECKPOINT), |&c| c.checked_mul(2))
        .take_while(|&c| c <= horizon)
        .collect();
    if points.last() != Some(&horizon) {
        points.push(horizon);
    }
    points
}

/// Runs the decider over one trial's stream, passing every row to `sink`.
/// Returns the error that ended the trial early, if any.
fn drive(spec: &ExperimentSpec, trial: u64, mut sink: impl FnMut(&TraceRow)) -> Option<String> {
    let mut stream = spec.stream.with_seed(spec.trial_seed(trial)).stream();
    let mut decider = Decider::new(spec.set.clone(), spec.params);
    for _ in 0..spec.horizon {
        match decider.step(stream.next_sample()) {
            Ok(row) => sink(&row),
            Err(e) => return Some(e.to_string()),
        }
    }
    None
}

/// Full trace of one trial, sentinel rows included.
pub fn run_trial(spec: &ExperimentSpec, trial: u64) -> Result<DecisionTrace> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.horizon as usize);
    let failure = drive(spec, trial, |r| rows.push(*r));
    Ok(DecisionTrace { rows, failure })
}

/// What the summary needs from one trial.
#[derive(Clone, Debug, PartialEq)]
struct TrialOutcome {
    final_e: Option<bool>,
    final_d: Option<bool>,
    last_flip: u64,
    at_checkpoints: Vec<Option<bool>>,
    failed: bool,
}

fn summarize_trial(spec: &ExperimentSpec, checkpoints: &[u64], trial: u64) -> TrialOutcome {
    let mut flips = FlipWatch::default();
    let mut at_checkpoints = vec![None; checkpoints.len()];
    let mut next = 0;
    let mut last = None;
    let failure = drive(spec, trial, |row| {
        if let Some(d) = &row.decision {
            flips.observe(row.n, d.e);
            last = Some((d.d, d.e));
        }
        if next < checkpoints.len() && row.n == checkpoints[next] {
            at_checkpoints[next] = row.decision.map(|d| d.e);
            next += 1;
        }
    });
    TrialOutcome {
        final_e: last.map(|l| l.1),
        final_d: last.map(|l| l.0),
        last_flip: flips.last_flip,
        at_checkpoints,
        failed: failure.is_some(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    /// Rayon's global pool.
    #[default]
    Parallel,
    Serial,
    /// A dedicated pool with this many threads.
    Threads(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementPoint {
    pub checkpoint: u64,
    /// Fraction of trials whose `e` at the checkpoint equals the truth.
    pub agreement: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub set: String,
    pub horizon: u64,
    pub base_seed: u64,
    pub trials: u64,
    pub failures: u64,
    pub ground_truth: bool,
    pub final_accuracy: f64,
    pub final_d_rate: f64,
    pub last_flip_p50: u64,
    pub last_flip_p90: u64,
    pub last_flip_max: u64,
    pub agreement: Vec<AgreementPoint>,
}

pub fn monte_carlo(spec: &ExperimentSpec) -> Result<Summary> {
    monte_carlo_with(spec, Execution::Parallel)
}

pub fn monte_carlo_with(spec: &ExperimentSpec, execution: Execution) -> Result<Summary> {
    spec.validate()?;
    let truth = spec.ground_truth()?;
    let points = spec.checkpoints();
    let run = |t: u64| summarize_trial(spec, &points, t);
    let outcomes: Vec<TrialOutcome> = match execution {
        Execution::Serial => (0..spec.trials).map(run).collect(),
        Execution::Parallel => (0..spec.trials).into_par_iter().map(run).collect(),
        Execution::Threads(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid("threads", e.to_string()))?
            .install(|| (0..spec.trials).into_par_iter().map(run).collect()),
    };
    Ok(aggregate(spec, truth, &points, &outcomes))
}

fn aggregate(spec: &ExperimentSpec, truth: bool, points: &[u64], outcomes: &[TrialOutcome]) -> Summary {
    let trials = outcomes.len() as u64;
    let frac = |count: usize| if trials == 0 { 0.0 } else { count as f64 / trials as f64 };
    let mut flips: Vec<u64> = outcomes.iter().filter(|o| !o.failed).map(|o| o.last_flip).collect();
    flips.sort_unstable();
    let agreement = if trials == 0 {
        Vec::new()
    } else {
        points
            .iter()
            .enumerate()
            .map(|(i, &checkpoint)| AgreementPoint {
                checkpoint,
                agreement: frac(outcomes.iter().filter(|o| o.at_checkpoints[i] == Some(truth)).count()),
            })
            .collect()
    };
    Summary {
        schema_version: SCHEMA_VERSION,
        set: spec.set.id().to_string(),
        horizon: spec.horizon,
        base_seed: spec.base_seed,
        trials,
        failures: outcomes.iter().filter(|o| o.failed).count() as u64,
        ground_truth: truth,
        final_accuracy: frac(outcomes.iter().filter(|o| !o.failed && o.final_e == Some(truth)).count()),
        final_d_rate: frac(outcomes.iter().filter(|o| o.final_d == Some(true)).count()),
        last_flip_p50: nearest_rank(&flips, 0.5),
        last_flip_p90: nearest_rank(&flips, 0.9),
        last_flip_max: flips.last().copied().unwrap_or(0),
        agreement,
    }
}

impl Summary {
    /// The summary of a run with no trials: no curve, zero rates.
    pub fn empty(spec: &ExperimentSpec) -> Result<Summary> {
        Ok(aggregate(spec, spec.ground_truth()?, &spec.checkpoints(), &[]))
    }
}

/// Nearest-rank quantile of sorted data; 0 when empty.
pub fn nearest_rank(sorted: &[u64], q: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

pub const SUMMARY_CSV_HEADER: &str = "schema_version,set,horizon,base_seed,trials,failures,ground_truth,\
final_accuracy,final_d_rate,last_flip_p50,last_flip_p90,last_flip_max,checkpoint,agreement";

impl Summary {
    /// One row per checkpoint, scalars repeated on every row. No rows when the
    /// curve is empty.
    pub fn write_csv(&self, mut w: impl Write) -> io::Result<()> {
        writeln!(w, "{SUMMARY_CSV_HEADER}")?;
        for p in &self.agreement {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.schema_version,
                self.set,
                self.horizon,
                self.base_seed,
                self.trials,
                self.failures,
                u8::from(self.ground_truth),
                self.final_accuracy,
                self.final_d_rate,
                self.last_flip_p50,
                self.last_flip_p90,
                self.last_flip_max,
                p.checkpoint,
                p.agreement
            )?;
        }
        Ok(())
    }

    /// Inverse of [`Summary::write_csv`]; `None` for a header-only file.
    pub fn read_csv(r: impl BufRead) -> Result<Option<Summary>> {
        let mut lines = r.lines();
        let bad = |line: usize, message: String| Error::Parse { line, message };
        match lines.next() {
            Some(Ok(h)) if h == SUMMARY_CSV_HEADER => {}
            _ => return Err(bad(1, "expected the summary header".into())),
        }
        let mut summary: Option<Summary> = None;
        for (i, line) in lines.enumerate() {
            let ln = i + 2;
            let line = line.map_err(|e| bad(ln, e.to_string()))?;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 14 {
                return Err(bad(ln, format!("expected 14 fields, got {}", f.len())));
            }
            let int = |s: &str| s.parse::<u64>().map_err(|e| bad(ln, format!("`{s}`: {e}")));
            let real = |s: &str| s.parse::<f64>().map_err(|e| bad(ln, format!("`{s}`: {e}")));
            let row = Summary {
                schema_version: int(f[0])? as u32,
                set: f[1].to_string(),
                horizon: int(f[2])?,
                base_seed: int(f[3])?,
                trials: int(f[4])?,
                failures: int(f[5])?,
                ground_truth: match f[6] {
                    "0" => false,
                    "1" => true,
                    other => return Err(bad(ln, format!("bad ground_truth `{other}`"))),
                },
                final_accuracy: real(f[7])?,
                final_d_rate: real(f[8])?,
                last_flip_p50: int(f[9])?,
                last_flip_p90: int(f[10])?,
                last_flip_max: int(f[11])?,
                agreement: vec![AgreementPoint {
                    checkpoint: int(f[12])?,
                    agreement: real(f[13])?,
                }],
            };
            match &mut summary {
                None => summary = Some(row),
                Some(s) => {
                    let point = row.agreement[0];
                    let scalars = Summary {
                        agreement: s.agreement.clone(),
                        ..row
                    };
                    if scalars != *s {
                        return Err(bad(ln, "scalar columns differ from the first row".into()));
                    }
                    s.agreement.push(point);
                }
            }
        }
        Ok(summary)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn from_json(text: &str) -> Result<Summary> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }

    pub fn render(&self, format: ReportFormat) -> Vec<u8> {
        match format {
            ReportFormat::Csv => {
                let mut out = Vec::new();
                self.write_csv(&mut out).expect("writing to memory");
                out
            }
            ReportFormat::Json => (self.to_json() + "\n").into_bytes(),
        }
    }
}

pub fn emit_report(summary: &Summary, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, summary.render(format)).map_err(|e| Error::io(path, e))
}
