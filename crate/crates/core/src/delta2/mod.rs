//! Limit-computable (Δ₂) sets of naturals as pairs of total relations.
//!
//! A set `A` is given by relations `phi`, `psi` with
//!
//! ```text
//! n in A      <=>  exists m forall k  phi(m, k, n)
//! n not in A  <=>  exists m forall k  psi(m, k, n)
//! ```
//!
//! At stage `N` the witness race looks for the least `m < N` such that
//! `phi(m, k, n)` holds for every `k < N`, and likewise for `psi`; the side
//! with the smaller bounded witness wins. Both the `m` and the `k` range use
//! the stage as their budget, so every stage is a finite computation, and a
//! true witness eventually falls inside the budget while every false
//! candidate is eventually refuted.

pub mod corpus;
pub mod machine;
mod registry;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

pub use machine::{Instr, Outcome, Program, ToyMachine};
pub use registry::SetRegistry;

use crate::error::{Error, Result};
use crate::streams::ComputableSet;

/// Which of the two defining relations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Phi,
    Psi,
}

/// A limit set: `g(n, s)` is the value of the last flip for `n` at a stage
/// `<= s`, or `default`. The limit of `g(n, s)` as `s` grows is the set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlipSchedule {
    default: bool,
    flips: BTreeMap<u64, Vec<(u64, bool)>>,
}

impl FlipSchedule {
    /// `flips` holds `(n, stage, value)` triples; stages for one `n` must be
    /// distinct.
    pub fn new(default: bool, flips: impl IntoIterator<Item = (u64, u64, bool)>) -> Result<Self> {
        let mut map: BTreeMap<u64, Vec<(u64, bool)>> = BTreeMap::new();
        for (n, stage, value) in flips {
            map.entry(n).or_default().push((stage, value));
        }
        for (n, list) in map.iter_mut() {
            list.sort_by_key(|&(s, _)| s);
            if list.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::invalid("flips", format!("two flips for n = {n} at the same stage")));
            }
        }
        Ok(FlipSchedule { default, flips: map })
    }

    pub fn default_value(&self) -> bool {
        self.default
    }

    pub fn triples(&self) -> impl Iterator<Item = (u64, u64, bool)> + '_ {
        self.flips
            .iter()
            .flat_map(|(&n, list)| list.iter().map(move |&(s, v)| (n, s, v)))
    }

    /// The stage-`s` approximation `g(n, s)`.
    pub fn value_at(&self, n: u64, s: u64) -> bool {
        self.flips
            .get(&n)
            .and_then(|list| list.iter().rev().find(|&&(stage, _)| stage <= s))
            .map_or(self.default, |&(_, v)| v)
    }

    pub fn limit(&self, n: u64) -> bool {
        self.flips
            .get(&n)
            .and_then(|list| list.last())
            .map_or(self.default, |&(_, v)| v)
    }

    /// One past the last flip stage for `n` (1 if `n` never flips).
    pub fn settle(&self, n: u64) -> u64 {
        self.flips
            .get(&n)
            .and_then(|list| list.last())
            .map_or(1, |&(s, _)| s + 1)
    }
}

/// Machines whose halting defines the set.
#[derive(Clone, Debug)]
pub enum MachineSource {
    /// `n` is the input of a fixed program.
    OnInput(Arc<Program>),
    /// `n` indexes a program list, run on input 0; indices past the end
    /// denote a program that never halts.
    Indexed(Vec<Arc<Program>>),
}

/// `{ n : machine n halts }` with `phi(m, k, n) = halts within m steps` and
/// `psi(m, k, n) = does not halt within k steps`.
///
/// Runs are classified once per `n` with certified loop detection and cached;
/// relation values agree with direct interpretation.
pub struct HaltingSet {
    source: MachineSource,
    budget: u64,
    cache: Mutex<HashMap<u64, Outcome>>,
}

impl HaltingSet {
    pub fn new(source: MachineSource, budget: u64) -> Self {
        HaltingSet {
            source,
            budget,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn source(&self) -> &MachineSource {
        &self.source
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn machine(&self, n: u64) -> ToyMachine {
        match &self.source {
            MachineSource::OnInput(p) => ToyMachine::new(p.clone(), n),
            MachineSource::Indexed(list) => match usize::try_from(n).ok().and_then(|i| list.get(i)) {
                Some(p) => ToyMachine::new(p.clone(), 0),
                None => ToyMachine::new(corpus::looping(), 0),
            },
        }
    }

    pub fn outcome(&self, n: u64) -> Outcome {
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        *cache
            .entry(n)
            .or_insert_with(|| self.machine(n).classify(self.budget))
    }

    pub fn halts_within(&self, n: u64, steps: u64) -> bool {
        match self.outcome(n) {
            Outcome::Halts(h) => h <= steps,
            Outcome::Loops(_) => false,
            Outcome::Unknown(b) if steps <= b => false,
            Outcome::Unknown(_) => self.machine(n).halts_within(steps),
        }
    }
}

impl fmt::Debug for HaltingSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HaltingSet")
            .field("source", &self.source)
            .field("budget", &self.budget)
            .finish()
    }
}

type Relation = Arc<dyn Fn(u64, u64, u64) -> bool + Send + Sync>;
type Oracle = Arc<dyn Fn(u64) -> Option<bool> + Send + Sync>;

/// Relations supplied directly as closures.
#[derive(Clone)]
pub struct CustomRelations {
    pub phi: Relation,
    pub psi: Relation,
    pub truth: Oracle,
}

impl fmt::Debug for CustomRelations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomRelations")
    }
}

#[derive(Clone, Debug)]
pub enum SetKind {
    /// A decidable set: `phi = [n in S]`, `psi = [n not in S]`.
    Recursive(ComputableSet),
    /// `phi(m, k, n) = g(n, m + k)`, `psi(m, k, n) = !g(n, m + k)`.
    Flip(Arc<FlipSchedule>),
    Halting(Arc<HaltingSet>),
    Custom(CustomRelations),
}

#[derive(Clone, Debug)]
pub struct Delta2Set {
    id: String,
    kind: SetKind,
}

impl Delta2Set {
    pub fn new(id: impl Into<String>, kind: SetKind) -> Self {
        Delta2Set { id: id.into(), kind }
    }

    pub fn recursive(set: ComputableSet) -> Self {
        Self::new(set.name(), SetKind::Recursive(set))
    }

    pub fn flip(id: impl Into<String>, schedule: FlipSchedule) -> Self {
        Self::new(id, SetKind::Flip(Arc::new(schedule)))
    }

    pub fn halting(id: impl Into<String>, source: MachineSource, budget: u64) -> Self {
        Self::new(id, SetKind::Halting(Arc::new(HaltingSet::new(source, budget))))
    }

    pub fn custom(
        id: impl Into<String>,
        phi: impl Fn(u64, u64, u64) -> bool + Send + Sync + 'static,
        psi: impl Fn(u64, u64, u64) -> bool + Send + Sync + 'static,
        truth: impl Fn(u64) -> Option<bool> + Send + Sync + 'static,
    ) -> Self {
        Self::new(
            id,
            SetKind::Custom(CustomRelations {
                phi: Arc::new(phi),
                psi: Arc::new(psi),
                truth: Arc::new(truth),
            }),
        )
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn kind(&self) -> &SetKind {
        &self.kind
    }

    pub fn eval(&self, side: Side, m: u64, k: u64, n: u64) -> bool {
        let member = match &self.kind {
            SetKind::Recursive(s) => s.contains(n),
            SetKind::Flip(f) => f.value_at(n, m.saturating_add(k)),
            SetKind::Halting(h) => {
                return match side {
                    Side::Phi => h.halts_within(n, m),
                    Side::Psi => !h.halts_within(n, k),
                }
            }
            SetKind::Custom(c) => {
                return match side {
                    Side::Phi => (c.phi)(m, k, n),
                    Side::Psi => (c.psi)(m, k, n),
                }
            }
        };
        match side {
            Side::Phi => member,
            Side::Psi => !member,
        }
    }

    /// `eval(side, ., ., n)` with the parts that depend only on `n` resolved.
    fn relation(&self, side: Side, n: u64) -> Resolved<'_> {
        let flip = |member: bool| match side {
            Side::Phi => member,
            Side::Psi => !member,
        };
        match &self.kind {
            SetKind::Recursive(s) => Resolved::Const(flip(s.contains(n))),
            SetKind::Flip(f) => Resolved::Flip {
                schedule: f,
                n,
                want: flip(true),
            },
            SetKind::Halting(h) => match (h.outcome(n), side) {
                (Outcome::Loops(_), Side::Phi) => Resolved::Const(false),
                (Outcome::Loops(_), Side::Psi) => Resolved::Const(true),
                (Outcome::Halts(steps), Side::Phi) => Resolved::HaltedByM(steps),
                (Outcome::Halts(steps), Side::Psi) => Resolved::RunningAtK(steps),
                (Outcome::Unknown(_), _) => Resolved::Direct { set: self, side, n },
            },
            SetKind::Custom(_) => Resolved::Direct { set: self, side, n },
        }
    }

    /// Ground truth for tests; `None` where it cannot be certified.
    pub fn truth(&self, n: u64) -> Option<bool> {
        match &self.kind {
            SetKind::Recursive(s) => Some(s.contains(n)),
            SetKind::Flip(f) => Some(f.limit(n)),
            SetKind::Halting(h) => match h.outcome(n) {
                Outcome::Halts(_) => Some(true),
                Outcome::Loops(_) => Some(false),
                Outcome::Unknown(_) => None,
            },
            SetKind::Custom(c) => (c.truth)(n),
        }
    }

    /// A stage from which the bounded race is known to give `truth(n)`.
    pub fn settle_hint(&self, n: u64) -> Option<u64> {
        match &self.kind {
            SetKind::Recursive(_) => Some(1),
            SetKind::Flip(f) => Some(f.settle(n)),
            SetKind::Halting(h) => match h.outcome(n) {
                Outcome::Halts(steps) => Some(steps + 1),
                Outcome::Loops(_) => Some(1),
                Outcome::Unknown(_) => None,
            },
            SetKind::Custom(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    InSet,
    NotInSet,
    Undecided,
}

impl Verdict {
    /// Race outcome from the two bounded minimal witnesses.
    pub fn from_minima(phi: Option<u64>, psi: Option<u64>) -> Self {
        match (phi, psi) {
            (Some(a), Some(b)) if a < b => Verdict::InSet,
            (Some(a), Some(b)) if b < a => Verdict::NotInSet,
            (Some(_), None) => Verdict::InSet,
            (None, Some(_)) => Verdict::NotInSet,
            _ => Verdict::Undecided,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessResult {
    pub min_m_phi: Option<u64>,
    pub min_m_psi: Option<u64>,
    pub verdict: Verdict,
}

/// One side of a set's relations at a fixed `n`.
enum Resolved<'a> {
    Const(bool),
    Flip { schedule: &'a FlipSchedule, n: u64, want: bool },
    /// Halts within `m` steps, for a machine halting at this step.
    HaltedByM(u64),
    /// Still running after `k` steps, for a machine halting at this step.
    RunningAtK(u64),
    Direct { set: &'a Delta2Set, side: Side, n: u64 },
}

impl Resolved<'_> {
    fn holds(&self, m: u64, k: u64) -> bool {
        match *self {
            Resolved::Const(v) => v,
            Resolved::Flip { schedule, n, want } => schedule.value_at(n, m.saturating_add(k)) == want,
            Resolved::HaltedByM(steps) => steps <= m,
            Resolved::RunningAtK(steps) => steps > k,
            Resolved::Direct { set, side, n } => set.eval(side, m, k, n),
        }
    }
}

/// Least `m < bound` with `set.eval(side, m, k, n)` for all `k < bound`.
pub fn bounded_min_witness(set: &Delta2Set, side: Side, n: u64, bound: u64) -> Option<u64> {
    let rel = set.relation(side, n);
    (0..bound).find(|&m| (0..bound).all(|k| rel.holds(m, k)))
}

/// The stage-`bound` witness race for `n`.
pub fn bounded_witness(set: &Delta2Set, n: u64, bound: u64) -> WitnessResult {
    let min_m_phi = bounded_min_witness(set, Side::Phi, n, bound);
    let min_m_psi = bounded_min_witness(set, Side::Psi, n, bound);
    WitnessResult {
        min_m_phi,
        min_m_psi,
        verdict: Verdict::from_minima(min_m_phi, min_m_psi),
    }
}

/// Resumable search for one side's bounded minimal witness.
///
/// Every `m < candidate` has failed at some `k < last stage`, hence at every
/// later stage too, and `candidate` itself holds for all `k < checked`.
#[derive(Clone, Copy, Debug, Default)]
struct Cursor {
    candidate: u64,
    checked: u64,
    stage: u64,
}

impl Cursor {
    fn advance(&mut self, set: &Delta2Set, side: Side, n: u64, bound: u64) -> Option<u64> {
        if bound < self.stage {
            *self = Cursor::default();
        }
        self.stage = bound;
        let rel = set.relation(side, n);
        'search: while self.candidate < bound {
            while self.checked < bound {
                if !rel.holds(self.candidate, self.checked) {
                    self.candidate += 1;
                    self.checked = 0;
                    continue 'search;
                }
                self.checked += 1;
            }
            return Some(self.candidate);
        }
        None
    }
}

/// Incremental witness race over non-decreasing stages, one cursor pair per
/// `n`. Gives the same results as [`bounded_witness`] while reusing work
/// between stages; a decreasing stage restarts the search for that `n`.
#[derive(Clone, Debug, Default)]
pub struct WitnessTracker {
    cursors: HashMap<u64, (Cursor, Cursor)>,
}

impl WitnessTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn race(&mut self, set: &Delta2Set, n: u64, bound: u64) -> WitnessResult {
        let (phi, psi) = self.cursors.entry(n).or_default();
        let min_m_phi = phi.advance(set, Side::Phi, n, bound);
        let min_m_psi = psi.advance(set, Side::Psi, n, bound);
        WitnessResult {
            min_m_phi,
            min_m_psi,
            verdict: Verdict::from_minima(min_m_phi, min_m_psi),
        }
    }
}
