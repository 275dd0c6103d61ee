//! The `limitdecide` command line.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 runtime failure
//! (including trials that aborted), 4 inconclusive adversary certificate.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, BitString, CandidateProcedure, CertificateKind};
use crate::delta2::SetRegistry;
use crate::error::Error;
use crate::harness::{monte_carlo_with, run_trial, Execution, ExperimentSpec, ReportFormat, Summary};
use crate::stats::{LilParams, DEFAULT_EPSILON, MIN_N_MIN};
use crate::streams::{BitSource, ComputableSet, Distribution, Mean, StreamSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;
pub const EXIT_INCONCLUSIVE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "limitdecide", version, about = "Decision-in-the-limit experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo runs of the composed mean test against a set.
    DecideMean(DecideMeanArgs),
    /// Search extensions of an off-target stem for a dilemma certificate.
    Adversary(AdversaryArgs),
    /// Prefix-match decisions of a computable target against a bit file.
    Blackbox(BlackboxArgs),
    /// Convert a summary report between CSV and JSON.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct DecideMeanArgs {
    /// TOML config; defaults apply to anything it leaves out.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub horizon: Option<u64>,
    /// Base seed for per-trial seeds.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Set id, builtin or from the manifest.
    #[arg(long)]
    pub set: Option<String>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Csv)]
    pub format: ReportFormat,
    /// Write the summary here in `--format` instead of the config outputs.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads; 1 runs serially.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Args)]
pub struct AdversaryArgs {
    /// constant-1 | constant-0 | parity-vote | majority-window:W |
    /// prefix-match:SET | bytecode:PATH
    #[arg(long)]
    pub procedure: String,
    /// Off-target stem as 0/1 text.
    #[arg(long)]
    pub stem: String,
    #[arg(long, default_value_t = 12)]
    pub depth: usize,
    #[arg(long, default_value_t = 0.9)]
    pub rho: f64,
    /// Target sequence; defaults to the prefix-match target, else all-zeros.
    #[arg(long)]
    pub target: Option<String>,
    /// Emit the full search report rather than the certificate.
    #[arg(long)]
    pub report: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BlackboxArgs {
    /// TOML config with a `[blackbox]` section.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Bit file, read MSB first.
    #[arg(long)]
    pub bits: Option<PathBuf>,
    #[arg(long)]
    pub target: Option<String>,
    /// Only report the first mismatch, as JSON.
    #[arg(long)]
    pub first_mismatch: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Summary file in CSV or JSON.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = ReportFormat::Json)]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A message and the exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_RUNTIME,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter { .. }
            | Error::Io { .. }
            | Error::Parse { .. }
            | Error::DepthOverCap { .. }
            | Error::Unknown { .. }
            | Error::Config(_) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeanValue {
    Int(i64),
    Real(f64),
    Text(String),
}

impl MeanValue {
    fn to_mean(&self) -> Result<Mean, Error> {
        match self {
            MeanValue::Int(n) => Ok(Mean::integer(*n)),
            MeanValue::Real(x) => Mean::from_f64(*x),
            MeanValue::Text(s) => s.parse(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub trials: u64,
    pub horizon: u64,
    pub base_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            trials: 100,
            horizon: 1 << 14,
            base_seed: 1,
            threads: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamSection {
    /// normal | uniform | shifted-bernoulli | discrete-pmf
    pub distribution: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<MeanValue>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<f64>>,
}

/// Keys left out of a `[stream]` table stay unset; a missing table means
/// Normal(7, 1).
impl Default for StreamSection {
    fn default() -> Self {
        StreamSection {
            distribution: "normal".into(),
            mean: None,
            variance: None,
            p: None,
            values: None,
            probs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LilSection {
    pub epsilon: f64,
    pub n_min: u64,
}

impl Default for LilSection {
    fn default() -> Self {
        LilSection {
            epsilon: DEFAULT_EPSILON,
            n_min: MIN_N_MIN,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetSection {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

impl Default for SetSection {
    fn default() -> Self {
        SetSection {
            name: "evens".into(),
            manifest: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary_csv: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub summary_json: Option<PathBuf>,
    /// Full trace of trial 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace_csv: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlackboxSection {
    pub target: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bits: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

impl Default for BlackboxSection {
    fn default() -> Self {
        BlackboxSection {
            target: "evens".into(),
            bits: None,
            out: None,
        }
    }
}

/// Relative paths in a config file resolve against the file's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub experiment: ExperimentSection,
    pub stream: StreamSection,
    pub lil: LilSection,
    pub set: SetSection,
    pub output: OutputSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blackbox: Option<BlackboxSection>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            experiment: ExperimentSection::default(),
            stream: StreamSection {
                mean: Some(MeanValue::Int(7)),
                variance: Some(1.0),
                ..StreamSection::default()
            },
            lil: LilSection::default(),
            set: SetSection::default(),
            output: OutputSection::default(),
            blackbox: None,
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Config, Error> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string() + &span_hint(text, e.span())))
    }

    /// Reads a config and rewrites its relative paths against its directory.
    pub fn load(path: &Path) -> Result<Config, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut config.set.manifest);
        fix(&mut config.output.summary_csv);
        fix(&mut config.output.summary_json);
        fix(&mut config.output.trace_csv);
        if let Some(b) = &mut config.blackbox {
            fix(&mut b.bits);
            fix(&mut b.out);
        }
        config.check_inputs()?;
        Ok(config)
    }

    fn check_inputs(&self) -> Result<(), Error> {
        let inputs = [
            ("set.manifest", self.set.manifest.as_ref()),
            ("blackbox.bits", self.blackbox.as_ref().and_then(|b| b.bits.as_ref())),
        ];
        for (field, path) in inputs {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(Error::invalid(field, format!("{} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn stream_spec(&self) -> Result<StreamSpec, Error> {
        let s = &self.stream;
        let field = |name: &str| format!("stream.{name}");
        let missing = |name: &str| Error::invalid(field(name), format!("required for `{}`", s.distribution));
        let mean = |required: bool| -> Result<Option<Mean>, Error> {
            match &s.mean {
                Some(m) => m.to_mean().map(Some).map_err(|e| Error::invalid(field("mean"), e.to_string())),
                None if required => Err(missing("mean")),
                None => Ok(None),
            }
        };
        let built = match s.distribution.as_str() {
            "normal" | "uniform" => {
                let dist = if s.distribution == "normal" {
                    Distribution::Normal
                } else {
                    Distribution::Uniform
                };
                let variance = s.variance.ok_or_else(|| missing("variance"))?;
                StreamSpec::new(dist, mean(true)?.expect("required"), variance, 0)
            }
            "shifted-bernoulli" => {
                let p = s.p.ok_or_else(|| missing("p"))?;
                let variance = s.variance.unwrap_or(p * (1.0 - p));
                StreamSpec::new(Distribution::ShiftedBernoulli { p }, mean(true)?.expect("required"), variance, 0)
            }
            "discrete-pmf" => {
                let values = s.values.clone().ok_or_else(|| missing("values"))?;
                let probs = s.probs.clone().ok_or_else(|| missing("probs"))?;
                let derived = StreamSpec::discrete_pmf(values, probs, 0);
                match (derived, mean(false)?, s.variance) {
                    (Ok(d), m, v) => {
                        StreamSpec::new(d.distribution, m.unwrap_or(d.mean), v.unwrap_or(d.variance), 0)
                    }
                    (Err(e), ..) => Err(e),
                }
            }
            other => {
                return Err(Error::invalid(
                    field("distribution"),
                    format!("unknown distribution `{other}`"),
                ))
            }
        };
        built.map_err(|e| match e {
            Error::InvalidParameter { field: f, reason } if !f.starts_with("stream.") => Error::InvalidParameter {
                field: field(&f),
                reason,
            },
            e => e,
        })
    }

    pub fn registry(&self) -> Result<SetRegistry, Error> {
        let mut r = SetRegistry::builtin();
        if let Some(m) = &self.set.manifest {
            r.load_manifest(m)?;
        }
        Ok(r)
    }

    pub fn experiment_spec(&self) -> Result<ExperimentSpec, Error> {
        let lil = |e: Error| match e {
            Error::InvalidParameter { field, reason } => Error::InvalidParameter {
                field: format!("lil.{field}"),
                reason,
            },
            e => e,
        };
        let spec = ExperimentSpec {
            stream: self.stream_spec()?,
            set: self.registry()?.get(&self.set.name)?,
            params: LilParams::new(self.lil.epsilon, self.lil.n_min).map_err(lil)?,
            horizon: self.experiment.horizon,
            trials: self.experiment.trials,
            base_seed: self.experiment.base_seed,
        };
        spec.validate().map_err(|e| match e {
            Error::InvalidParameter { field, reason } if field == "horizon" || field == "trials" => {
                Error::InvalidParameter {
                    field: format!("experiment.{field}"),
                    reason,
                }
            }
            e => e,
        })?;
        Ok(spec)
    }

    pub fn execution(&self) -> Execution {
        match self.experiment.threads {
            None | Some(0) => Execution::Parallel,
            Some(1) => Execution::Serial,
            Some(n) => Execution::Threads(n),
        }
    }
}

fn span_hint(text: &str, span: Option<std::ops::Range<usize>>) -> String {
    span.map(|s| format!(" (line {})", text[..s.start].lines().count().max(1)))
        .unwrap_or_default()
}

fn write_output(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| CliError::runtime(format!("{}: {e}", dir.display())))?;
            }
            std::fs::write(p, bytes).map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))
        }
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::runtime(format!("stdout: {e}"))),
    }
}

pub fn run(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::DecideMean(a) => decide_mean(a),
        Command::Adversary(a) => adversary(a),
        Command::Blackbox(a) => blackbox(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}

fn decide_mean(a: DecideMeanArgs) -> CliResult<i32> {
    let mut config = match &a.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(t) = a.trials {
        config.experiment.trials = t;
    }
    if let Some(h) = a.horizon {
        config.experiment.horizon = h;
    }
    if let Some(s) = a.seed {
        config.experiment.base_seed = s;
    }
    if let Some(e) = a.epsilon {
        config.lil.epsilon = e;
    }
    if let Some(s) = &a.set {
        config.set.name = s.clone();
    }
    if let Some(t) = a.threads {
        config.experiment.threads = Some(t);
    }
    let spec = config.experiment_spec()?;
    if a.dump_config {
        write_output(None, config.to_toml().as_bytes())?;
        return Ok(EXIT_OK);
    }
    let summary = monte_carlo_with(&spec, config.execution())?;
    let outputs = [
        (config.output.summary_csv.as_deref(), ReportFormat::Csv),
        (config.output.summary_json.as_deref(), ReportFormat::Json),
    ];
    if a.out.is_some() || outputs.iter().all(|(p, _)| p.is_none()) {
        write_output(a.out.as_deref(), &summary.render(a.format))?;
    } else {
        for (path, format) in outputs {
            if path.is_some() {
                write_output(path, &summary.render(format))?;
            }
        }
    }
    if let Some(path) = &config.output.trace_csv {
        let trace = run_trial(&spec, 0)?;
        let mut bytes = Vec::new();
        trace.write_csv(&mut bytes).expect("writing to memory");
        write_output(Some(path), &bytes)?;
    }
    if summary.failures > 0 {
        return Err(CliError::runtime(format!(
            "{} of {} trials failed",
            summary.failures, summary.trials
        )));
    }
    Ok(EXIT_OK)
}

/// The target a procedure is judged against when none is given.
pub fn default_target(procedure: &CandidateProcedure) -> ComputableSet {
    match procedure {
        CandidateProcedure::PrefixMatch(t) => *t,
        _ => ComputableSet::AllZeros,
    }
}

fn adversary(a: AdversaryArgs) -> CliResult<i32> {
    let procedure = CandidateProcedure::parse(&a.procedure)?;
    let stem: BitString = a.stem.parse()?;
    let target = match &a.target {
        Some(t) => ComputableSet::from_name(t)?,
        None => default_target(&procedure),
    };
    let search = Adversary::new(procedure);
    if a.report {
        let report = search.report(&stem, a.depth, a.rho)?;
        let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        write_output(a.out.as_deref(), json.as_bytes())?;
        return Ok(EXIT_OK);
    }
    let cert = search.dilemma_certificate(target, &stem, a.depth, a.rho)?;
    let json = serde_json::to_string_pretty(&cert).expect("certificate serializes") + "\n";
    write_output(a.out.as_deref(), json.as_bytes())?;
    Ok(if cert.kind == CertificateKind::Inconclusive {
        EXIT_INCONCLUSIVE
    } else {
        EXIT_OK
    })
}

fn finite_len(source: &BitSource) -> Result<u64, Error> {
    source
        .len()
        .ok_or_else(|| Error::invalid("bits", "the source is unbounded"))
}

/// Index of the first bit where a finite `source` leaves `target`.
pub fn first_mismatch(source: &BitSource, target: ComputableSet) -> Result<Option<u64>, Error> {
    for i in 0..finite_len(source)? {
        if source.bit_at(i)? != target.contains(i) {
            return Ok(Some(i));
        }
    }
    Ok(None)
}

fn blackbox(a: BlackboxArgs) -> CliResult<i32> {
    let section = match &a.config {
        Some(p) => Config::load(p)?.blackbox.unwrap_or_default(),
        None => BlackboxSection::default(),
    };
    let target = ComputableSet::from_name(a.target.as_deref().unwrap_or(&section.target))?;
    let bits = a
        .bits
        .or(section.bits)
        .ok_or_else(|| CliError::config("blackbox.bits: no bit file given"))?;
    let out = a.out.or(section.out);
    let source = BitSource::open_file(&bits)?;
    let mismatch = first_mismatch(&source, target)?;
    if a.first_mismatch {
        let json = serde_json::json!({
            "target": target.name(),
            "bits": finite_len(&source)?,
            "first_mismatch": mismatch,
        });
        write_output(out.as_deref(), format!("{json}\n").as_bytes())?;
        return Ok(EXIT_OK);
    }
    // F(s|n) = 1 iff the first n bits match, i.e. n <= first mismatch
    let mut csv = String::from("n,bit,decision\n");
    for i in 0..finite_len(&source)? {
        let decision = mismatch.is_none_or(|m| i < m);
        let bit = source.bit_at(i)?;
        csv.push_str(&format!("{},{},{}\n", i + 1, u8::from(bit), u8::from(decision)));
    }
    write_output(out.as_deref(), csv.as_bytes())?;
    Ok(EXIT_OK)
}

fn report(a: ReportArgs) -> CliResult<i32> {
    let text = std::fs::read_to_string(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let summary = if text.trim_start().starts_with('{') {
        Summary::from_json(&text)?
    } else {
        Summary::read_csv(text.as_bytes())?
            .ok_or_else(|| CliError::config(format!("{}: summary has no rows", a.input.display())))?
    };
    write_output(a.out.as_deref(), &summary.render(a.format))?;
    Ok(EXIT_OK)
}

/// Loads a config file and builds the experiment it describes.
pub fn spec_from_config_file(path: &Path) -> Result<(Config, ExperimentSpec), Error> {
    let config = Config::load(path)?;
    let spec = config.experiment_spec()?;
    Ok((config, spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let c = Config::default();
        assert_eq!(Config::parse(&c.to_toml()).unwrap(), c);
        c.experiment_spec().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::parse("[stream]\nsigma = 1\n").is_err());
        assert!(Config::parse("[extra]\n").is_err());
    }

    #[test]
    fn negative_variance_names_field() {
        let c = Config::parse("[stream]\nmean = 3\nvariance = -1.0\n").unwrap();
        let e = c.experiment_spec().unwrap_err();
        assert!(e.to_string().contains("stream.variance"), "{e}");
        assert_eq!(CliError::from(e).code, EXIT_CONFIG);
    }

    #[test]
    fn mean_forms() {
        for text in ["mean = 3", "mean = 2.5", "mean = \"sqrt(2)\"", "mean = \"7/2\""] {
            let c = Config::parse(&format!("[stream]\n{text}\nvariance = 1.0\n")).unwrap();
            c.stream_spec().unwrap();
        }
    }

    #[test]
    fn discrete_pmf_moments_derived() {
        let c = Config::parse("[stream]\ndistribution = 'discrete-pmf'\nvalues = [2.0, 4.0]\nprobs = [0.5, 0.5]\n")
            .unwrap();
        let s = c.stream_spec().unwrap();
        assert_eq!(s.mean.natural().unwrap(), Some(3));
        assert_eq!(s.variance, 1.0);
    }

    #[test]
    fn first_mismatch_scan() {
        let src = BitSource::from_bytes("mem", vec![0b1010_1110]);
        assert_eq!(first_mismatch(&src, ComputableSet::Evens).unwrap(), Some(5));
        let src = BitSource::from_bytes("mem", vec![0b1010_1010]);
        assert_eq!(first_mismatch(&src, ComputableSet::Evens).unwrap(), None);
    }

    #[test]
    fn default_targets() {
        assert_eq!(default_target(&CandidateProcedure::ConstantOne), ComputableSet::AllZeros);
        assert_eq!(
            default_target(&CandidateProcedure::PrefixMatch(ComputableSet::Primes)),
            ComputableSet::Primes
        );
    }
}
