//! Finite-depth evidence against a candidate bit-source decider `F`.
//!
//! For a stem `t` that is not a prefix of the target sequence, a correct
//! asymptotic decider may accept only finitely many extensions of `t`. The
//! searches here look at the extensions of `t` up to a depth `D` and report:
//!
//! * survivor counts: how many extensions of each length `F` accepts;
//! * a persistent branch: a length-`D` extension that `F` accepts, with `F`
//!   accepting at least a `rho` fraction of its prefixes from `|t|` to `D`;
//! * the branch with the most decision changes along its prefixes.
//!
//! A dilemma certificate is the first of these that applies: extinction (no
//! accepted extension from some level through `D`), a wrong-way branch, or an
//! unstable branch with at least `D / 4` flips.
//!
//! Depths up to [`Limits::exact_cap`] are searched exhaustively. Deeper
//! searches use a beam of bounded width and report lower bounds, flagged with
//! `exact = false`.

pub mod bytecode;

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use bytecode::Bytecode;

use crate::decider::prefix_match_decider;
use crate::error::{Error, Result};
use crate::streams::ComputableSet;

/// A finite binary string, written as `0`/`1` text.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString(pub Vec<bool>);

impl BitString {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn is_prefix_of(&self, other: &[bool]) -> bool {
        other.starts_with(&self.0)
    }

    /// True iff the string disagrees with `target` somewhere.
    pub fn is_off_target(&self, target: ComputableSet) -> bool {
        !prefix_match_decider(target, &self.0)
    }
}

impl From<Vec<bool>> for BitString {
    fn from(v: Vec<bool>) -> Self {
        BitString(v)
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|&b| f.write_str(if b { "1" } else { "0" }))
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::invalid("bit string", format!("`{s}` has a character other than 0/1"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString)
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A total decision procedure on finite bit strings.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CandidateProcedure {
    ConstantOne,
    ConstantZero,
    /// Accept iff the string is a prefix of the target's characteristic
    /// sequence.
    PrefixMatch(ComputableSet),
    /// Accept iff the number of ones is even.
    ParityVote,
    /// Accept iff at least half of the last `w` bits (all bits, when fewer)
    /// are ones.
    MajorityWindow(usize),
    Bytecode(Arc<Bytecode>),
}

impl CandidateProcedure {
    /// The five builtin procedures, with the given prefix-match target and a
    /// window of 4.
    pub fn builtins(target: ComputableSet) -> [CandidateProcedure; 5] {
        [
            CandidateProcedure::ConstantOne,
            CandidateProcedure::ConstantZero,
            CandidateProcedure::PrefixMatch(target),
            CandidateProcedure::ParityVote,
            CandidateProcedure::MajorityWindow(4),
        ]
    }

    pub fn eval(&self, s: &[bool]) -> bool {
        match self {
            CandidateProcedure::ConstantOne => true,
            CandidateProcedure::ConstantZero => false,
            CandidateProcedure::PrefixMatch(target) => prefix_match_decider(*target, s),
            CandidateProcedure::ParityVote => s.iter().filter(|&&b| b).count() % 2 == 0,
            CandidateProcedure::MajorityWindow(w) => {
                let window = &s[s.len().saturating_sub(*w)..];
                2 * window.iter().filter(|&&b| b).count() >= window.len()
            }
            CandidateProcedure::Bytecode(p) => p.eval(s),
        }
    }

    /// Parses `constant-1`, `constant-0`, `parity-vote`, `majority-window:W`,
    /// `prefix-match:SET` or `bytecode:PATH`.
    pub fn parse(spec: &str) -> Result<Self> {
        let (name, arg) = match spec.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (spec, None),
        };
        let need = |what: &str| Error::invalid("procedure", format!("`{name}` needs `:{what}`"));
        Ok(match (name, arg) {
            ("constant-1", None) => CandidateProcedure::ConstantOne,
            ("constant-0", None) => CandidateProcedure::ConstantZero,
            ("parity-vote", None) => CandidateProcedure::ParityVote,
            ("majority-window", Some(w)) => CandidateProcedure::MajorityWindow(
                w.parse()
                    .ok()
                    .filter(|&w| w > 0)
                    .ok_or_else(|| Error::invalid("procedure", format!("bad window `{w}`")))?,
            ),
            ("majority-window", None) => return Err(need("W")),
            ("prefix-match", Some(t)) => CandidateProcedure::PrefixMatch(ComputableSet::from_name(t)?),
            ("prefix-match", None) => return Err(need("SET")),
            ("bytecode", Some(path)) => Self::load_bytecode(path)?,
            ("bytecode", None) => return Err(need("PATH")),
            _ => {
                return Err(Error::Unknown {
                    kind: "procedure",
                    name: spec.to_string(),
                })
            }
        })
    }

    pub fn load_bytecode(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(CandidateProcedure::Bytecode(Arc::new(Bytecode::parse(&text)?)))
    }

    pub fn name(&self) -> String {
        match self {
            CandidateProcedure::ConstantOne => "constant-1".into(),
            CandidateProcedure::ConstantZero => "constant-0".into(),
            CandidateProcedure::PrefixMatch(t) => format!("prefix-match:{}", t.name()),
            CandidateProcedure::ParityVote => "parity-vote".into(),
            CandidateProcedure::MajorityWindow(w) => format!("majority-window:{w}"),
            CandidateProcedure::Bytecode(_) => "bytecode".into(),
        }
    }
}

/// Number of `i < |s|` with `F(s|i) != F(s|i+1)`.
pub fn flip_count(f: &CandidateProcedure, s: &[bool]) -> usize {
    let values: Vec<bool> = (0..=s.len()).map(|i| f.eval(&s[..i])).collect();
    values.windows(2).filter(|w| w[0] != w[1]).count()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Limits {
    /// Deepest level searched exhaustively.
    pub exact_cap: usize,
    /// Deepest level searched at all.
    pub depth_cap: usize,
    /// Frontier width of the beam above `exact_cap`.
    pub beam_width: usize,
    /// Node expansions allowed for a branch search above `exact_cap`.
    pub node_budget: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            exact_cap: 20,
            depth_cap: 28,
            beam_width: 1 << 12,
            node_budget: 1 << 22,
        }
    }
}

/// Accepted extensions of the stem per level `|t| ..= D`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivorCounts {
    pub stem_len: usize,
    pub counts: Vec<u64>,
    /// False when levels above the exact cap are beam lower bounds.
    pub exact: bool,
}

impl SurvivorCounts {
    pub fn depth(&self) -> usize {
        self.stem_len + self.counts.len() - 1
    }

    pub fn at_level(&self, level: usize) -> Option<u64> {
        level.checked_sub(self.stem_len).and_then(|i| self.counts.get(i)).copied()
    }

    /// The first level from which every count through the depth is zero.
    pub fn extinction_level(&self) -> Option<usize> {
        let nonzero_tail = self.counts.iter().rposition(|&c| c > 0);
        match nonzero_tail {
            None => Some(self.stem_len),
            Some(i) if i + 1 < self.counts.len() => Some(self.stem_len + i + 1),
            Some(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BranchSearch {
    pub branch: Option<BitString>,
    /// Fraction of levels `|t| ..= D` at which `F` accepts the branch prefix.
    pub density: Option<f64>,
    /// False when the search gave up on its node budget.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipSearch {
    pub branch: BitString,
    pub flips: usize,
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversaryReport {
    pub procedure: String,
    pub stem: BitString,
    pub depth: usize,
    pub rho: f64,
    pub survivors_per_level: Vec<u64>,
    pub extinction_level: Option<usize>,
    pub persistent_branch: Option<BitString>,
    pub max_flips: (BitString, usize),
    pub exact: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    /// `F` accepts no extension of the stem from some level through `D`.
    Extinction,
    /// `F` persistently accepts a string that leaves the target.
    WrongWayBranch,
    /// `F` changes its decision at least `D / 4` times along one branch.
    UnstableBranch,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub procedure: String,
    pub stem: BitString,
    pub depth: usize,
    pub rho: f64,
    pub exact: bool,
    pub evidence: Option<BitString>,
    pub extinction_level: Option<usize>,
    pub density: Option<f64>,
    pub flips: Option<usize>,
    pub survivors_per_level: Vec<u64>,
}

/// Searches over extensions of stems for one candidate procedure.
#[derive(Clone, Debug)]
pub struct Adversary {
    procedure: CandidateProcedure,
    limits: Limits,
}

/// Levels handled by the serial prefix enumeration before the parallel split.
const SPLIT_LEVELS: usize = 8;

impl Adversary {
    pub fn new(procedure: CandidateProcedure) -> Self {
        Self::with_limits(procedure, Limits::default())
    }

    pub fn with_limits(procedure: CandidateProcedure, limits: Limits) -> Self {
        Adversary { procedure, limits }
    }

    pub fn procedure(&self) -> &CandidateProcedure {
        &self.procedure
    }

    pub fn limits(&self) -> &Limits {
        &self.limits
    }

    fn check(&self, stem: &BitString, depth: usize) -> Result<()> {
        if depth > self.limits.depth_cap {
            return Err(Error::DepthOverCap {
                depth,
                cap: self.limits.depth_cap,
            });
        }
        if depth < stem.len() {
            return Err(Error::invalid(
                "depth",
                format!("depth {depth} is shorter than the stem ({} bits)", stem.len()),
            ));
        }
        Ok(())
    }

    fn is_exact(&self, depth: usize) -> bool {
        depth <= self.limits.exact_cap
    }

    pub fn survivors(&self, stem: &BitString, depth: usize) -> Result<SurvivorCounts> {
        self.check(stem, depth)?;
        let exact_depth = depth.min(self.limits.exact_cap).max(stem.len());
        let mut counts = self.exact_counts(stem, exact_depth);
        let exact = depth <= exact_depth;
        if !exact {
            counts.extend(self.beam_counts(stem, exact_depth, depth));
        }
        Ok(SurvivorCounts {
            stem_len: stem.len(),
            counts,
            exact,
        })
    }

    /// Exhaustive counts for levels `|t| ..= depth`.
    fn exact_counts(&self, stem: &BitString, depth: usize) -> Vec<u64> {
        let base = stem.len();
        let mut counts = vec![0u64; depth - base + 1];
        // serial part: levels base ..= base + split
        let split = (depth - base).min(SPLIT_LEVELS);
        let mut frontier: Vec<Vec<bool>> = vec![stem.0.clone()];
        counts[0] = u64::from(self.procedure.eval(&stem.0));
        for count in &mut counts[1..=split] {
            frontier = frontier
                .into_iter()
                .flat_map(|s| [false, true].map(|b| [s.as_slice(), &[b]].concat()))
                .collect();
            *count = frontier.iter().filter(|s| self.procedure.eval(s)).count() as u64;
        }
        if split == depth - base {
            return counts;
        }
        let deeper: Vec<Vec<u64>> = frontier
            .par_iter()
            .map(|prefix| {
                let mut local = vec![0u64; depth - base - split];
                let mut path = prefix.clone();
                self.count_below(&mut path, depth, base + split + 1, &mut local);
                local
            })
            .collect();
        for local in deeper {
            for (i, c) in local.into_iter().enumerate() {
                counts[split + 1 + i] += c;
            }
        }
        counts
    }

    fn count_below(&self, path: &mut Vec<bool>, depth: usize, first_level: usize, counts: &mut [u64]) {
        if path.len() == depth {
            return;
        }
        for b in [false, true] {
            path.push(b);
            if self.procedure.eval(path) {
                counts[path.len() - first_level] += 1;
            }
            self.count_below(path, depth, first_level, counts);
            path.pop();
        }
    }

    /// Lower bounds for levels `from + 1 ..= depth` from a bounded frontier.
    fn beam_counts(&self, stem: &BitString, from: usize, depth: usize) -> Vec<u64> {
        let width = self.limits.beam_width;
        let mut accepted = Vec::new();
        let mut rejected = Vec::new();
        let mut path = stem.0.clone();
        self.collect_level(&mut path, from, width, &mut accepted, &mut rejected);
        let mut frontier = accepted;
        frontier.extend(rejected.into_iter().take(width.saturating_sub(frontier.len())));
        let mut counts = Vec::new();
        for _ in from + 1..=depth {
            let mut acc = Vec::new();
            let mut rej = Vec::new();
            for s in &frontier {
                for b in [false, true] {
                    let child = [s.as_slice(), &[b]].concat();
                    if self.procedure.eval(&child) {
                        acc.push(child);
                    } else {
                        rej.push(child);
                    }
                }
            }
            counts.push(acc.len() as u64);
            acc.truncate(width);
            let room = width - acc.len();
            acc.extend(rej.into_iter().take(room));
            frontier = acc;
        }
        counts
    }

    /// First `width` accepted strings at `level` in lexicographic order, and
    /// enough rejected ones to fill a frontier.
    fn collect_level(
        &self,
        path: &mut Vec<bool>,
        level: usize,
        width: usize,
        accepted: &mut Vec<Vec<bool>>,
        rejected: &mut Vec<Vec<bool>>,
    ) {
        if accepted.len() >= width {
            return;
        }
        if path.len() == level {
            if self.procedure.eval(path) {
                accepted.push(path.clone());
            } else if rejected.len() < width {
                rejected.push(path.clone());
            }
            return;
        }
        for b in [false, true] {
            path.push(b);
            self.collect_level(path, level, width, accepted, rejected);
            path.pop();
        }
    }

    /// Depth-first search for a persistent branch, accepted children first.
    pub fn find_persistent_branch(&self, stem: &BitString, depth: usize, rho: f64) -> Result<BranchSearch> {
        self.check(stem, depth)?;
        check_rho(rho)?;
        let levels = depth - stem.len() + 1;
        let needed = required_accepts(rho, levels);
        let mut search = BranchDfs {
            f: &self.procedure,
            depth,
            needed,
            budget: if self.is_exact(depth) { u64::MAX } else { self.limits.node_budget },
            exhausted: false,
        };
        let mut path = stem.0.clone();
        let accepted = usize::from(self.procedure.eval(&path));
        let found = search.run(&mut path, accepted);
        Ok(BranchSearch {
            density: found.as_ref().map(|(_, a)| *a as f64 / levels as f64),
            branch: found.map(|(b, _)| BitString(b)),
            exact: !search.exhausted,
        })
    }

    /// The extension with the most flips along its prefixes; the first in
    /// lexicographic order among ties. Greedy above the exact cap.
    pub fn max_flips(&self, stem: &BitString, depth: usize) -> Result<FlipSearch> {
        self.check(stem, depth)?;
        let base_flips = flip_count(&self.procedure, &stem.0);
        let last = self.procedure.eval(&stem.0);
        let mut path = stem.0.clone();
        if !self.is_exact(depth) {
            let mut flips = base_flips;
            let mut prev = last;
            while path.len() < depth {
                path.push(false);
                let v0 = self.procedure.eval(&path);
                if v0 == prev {
                    path.pop();
                    path.push(true);
                    let v1 = self.procedure.eval(&path);
                    if v1 == prev {
                        path.pop();
                        path.push(false);
                    }
                }
                let v = self.procedure.eval(&path);
                flips += usize::from(v != prev);
                prev = v;
            }
            return Ok(FlipSearch {
                branch: BitString(path),
                flips,
                exact: false,
            });
        }
        let mut best = (Vec::new(), 0usize, false);
        self.flip_dfs(&mut path, depth, last, base_flips, &mut best);
        Ok(FlipSearch {
            branch: BitString(best.0),
            flips: best.1,
            exact: true,
        })
    }

    fn flip_dfs(&self, path: &mut Vec<bool>, depth: usize, prev: bool, flips: usize, best: &mut (Vec<bool>, usize, bool)) {
        if best.2 && flips + (depth - path.len()) <= best.1 {
            return;
        }
        if path.len() == depth {
            *best = (path.clone(), flips, true);
            return;
        }
        for b in [false, true] {
            path.push(b);
            let v = self.procedure.eval(path);
            self.flip_dfs(path, depth, v, flips + usize::from(v != prev), best);
            path.pop();
        }
    }

    pub fn report(&self, stem: &BitString, depth: usize, rho: f64) -> Result<AdversaryReport> {
        let survivors = self.survivors(stem, depth)?;
        let branch = self.find_persistent_branch(stem, depth, rho)?;
        let flips = self.max_flips(stem, depth)?;
        Ok(AdversaryReport {
            procedure: self.procedure.name(),
            stem: stem.clone(),
            depth,
            rho,
            extinction_level: survivors.extinction_level(),
            exact: survivors.exact && branch.exact && flips.exact,
            survivors_per_level: survivors.counts,
            persistent_branch: branch.branch,
            max_flips: (flips.branch, flips.flips),
        })
    }

    /// Extinction, else a wrong-way branch, else an unstable branch, else
    /// inconclusive. The stem must leave `target`.
    pub fn dilemma_certificate(
        &self,
        target: ComputableSet,
        stem: &BitString,
        depth: usize,
        rho: f64,
    ) -> Result<Certificate> {
        if !stem.is_off_target(target) {
            return Err(Error::invalid(
                "stem",
                format!("`{stem}` is a prefix of the {} sequence", target.name()),
            ));
        }
        check_rho(rho)?;
        let survivors = self.survivors(stem, depth)?;
        let mut cert = Certificate {
            kind: CertificateKind::Inconclusive,
            procedure: self.procedure.name(),
            stem: stem.clone(),
            depth,
            rho,
            exact: survivors.exact,
            evidence: None,
            extinction_level: None,
            density: None,
            flips: None,
            survivors_per_level: survivors.counts.clone(),
        };
        if let Some(level) = survivors.extinction_level() {
            cert.kind = CertificateKind::Extinction;
            cert.extinction_level = Some(level);
            return Ok(cert);
        }
        let branch = self.find_persistent_branch(stem, depth, rho)?;
        cert.exact &= branch.exact;
        if let Some(b) = branch.branch {
            cert.kind = CertificateKind::WrongWayBranch;
            cert.density = branch.density;
            cert.flips = Some(flip_count(&self.procedure, &b.0));
            cert.evidence = Some(b);
            return Ok(cert);
        }
        let flips = self.max_flips(stem, depth)?;
        cert.exact &= flips.exact;
        if 4 * flips.flips >= depth {
            cert.kind = CertificateKind::UnstableBranch;
            cert.flips = Some(flips.flips);
            cert.density = Some(acceptance_density(&self.procedure, &flips.branch.0, stem.len()));
            cert.evidence = Some(flips.branch);
        }
        Ok(cert)
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("rho", format!("must lie in (0, 1], got {rho}")))
    }
}

/// Smallest accepted-prefix count meeting density `rho` over `levels`.
pub fn required_accepts(rho: f64, levels: usize) -> usize {
    let raw = rho * levels as f64;
    // guard against 0.9 * 10 = 9.000000000000002
    let rounded = raw.round();
    if (raw - rounded).abs() < 1e-9 {
        rounded as usize
    } else {
        raw.ceil() as usize
    }
}

/// Fraction of levels `from ..= |s|` at which `F` accepts the prefix.
pub fn acceptance_density(f: &CandidateProcedure, s: &[bool], from: usize) -> f64 {
    let levels = s.len() - from + 1;
    let accepted = (from..=s.len()).filter(|&l| f.eval(&s[..l])).count();
    accepted as f64 / levels as f64
}

struct BranchDfs<'a> {
    f: &'a CandidateProcedure,
    depth: usize,
    needed: usize,
    budget: u64,
    exhausted: bool,
}

impl BranchDfs<'_> {
    /// `accepted` counts accepted levels from the stem through `path`.
    fn run(&mut self, path: &mut Vec<bool>, accepted: usize) -> Option<(Vec<bool>, usize)> {
        if path.len() == self.depth {
            let ok = accepted >= self.needed && self.f.eval(path);
            return ok.then(|| (path.clone(), accepted));
        }
        if accepted + (self.depth - path.len()) < self.needed {
            return None;
        }
        if self.budget == 0 {
            self.exhausted = true;
            return None;
        }
        self.budget -= 1;
        let children = [false, true].map(|b| {
            path.push(b);
            let v = self.f.eval(path);
            path.pop();
            (b, v)
        });
        // accepted children first, 0 before 1
        let order = children.iter().filter(|c| c.1).chain(children.iter().filter(|c| !c.1));
        for &(b, v) in order {
            path.push(b);
            let found = self.run(path, accepted + usize::from(v));
            path.pop();
            if found.is_some() {
                return found;
            }
        }
        None
    }
}
