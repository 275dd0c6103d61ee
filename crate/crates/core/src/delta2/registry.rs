use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{corpus, Delta2Set, FlipSchedule, MachineSource, Program};
use crate::error::{Error, Result};
use crate::streams::ComputableSet;

/// Named Δ₂ sets: the bundled ones plus any loaded from manifests.
///
/// Manifest format (TOML):
///
/// ```toml
/// [[set]]
/// id = "my-evens"
/// kind = "recursive"
/// set = "evens"
///
/// [[set]]
/// id = "late-five"
/// kind = "flip-schedule"
/// default = false
/// flips = [[5, 10, 1], [3, 4, 1], [3, 40, 0]]   # (n, stage, value)
///
/// [[set]]
/// id = "even-halter"
/// kind = "halting"
/// program = "machines/halt_even.cm"   # relative to the manifest
/// budget = 100000
/// ```
///
/// A halting entry may list `programs = [...]` instead, in which case `n`
/// indexes the list.
#[derive(Clone, Debug, Default)]
pub struct SetRegistry {
    sets: BTreeMap<String, Arc<Delta2Set>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    #[serde(default)]
    set: Vec<SetEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SetEntry {
    id: String,
    kind: String,
    set: Option<String>,
    default: Option<bool>,
    flips: Option<Vec<[u64; 3]>>,
    program: Option<PathBuf>,
    programs: Option<Vec<PathBuf>>,
    budget: Option<u64>,
}

impl SetRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        for s in corpus::builtin_sets() {
            r.insert(s);
        }
        r
    }

    pub fn insert(&mut self, set: Delta2Set) -> Arc<Delta2Set> {
        let set = Arc::new(set);
        self.sets.insert(set.id().to_string(), set.clone());
        set
    }

    pub fn get(&self, id: &str) -> Result<Arc<Delta2Set>> {
        self.sets.get(id).cloned().ok_or_else(|| Error::Unknown {
            kind: "set",
            name: id.to_string(),
        })
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.sets.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Arc<Delta2Set>> {
        self.sets.values()
    }

    /// Adds every set in the manifest; later ids replace earlier ones.
    pub fn load_manifest(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        self.load_manifest_str(&text, base)
    }

    pub fn load_manifest_str(&mut self, text: &str, base: &Path) -> Result<()> {
        let manifest: Manifest =
            toml::from_str(text).map_err(|e| Error::Config(format!("set manifest: {e}")))?;
        for entry in manifest.set {
            let set = entry.build(base)?;
            self.insert(set);
        }
        Ok(())
    }
}

impl SetEntry {
    fn build(self, base: &Path) -> Result<Delta2Set> {
        let field = |name: &str| format!("set `{}`: {name}", self.id);
        let unexpected = |present: bool, name: &str| -> Result<()> {
            if present {
                Err(Error::invalid(field(name), format!("not allowed for kind `{}`", self.kind)))
            } else {
                Ok(())
            }
        };
        let load = |p: &PathBuf| -> Result<Arc<Program>> {
            let full = base.join(p);
            let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
            Ok(Arc::new(Program::parse(&text)?))
        };
        match self.kind.as_str() {
            "recursive" => {
                unexpected(self.default.is_some(), "default")?;
                unexpected(self.flips.is_some(), "flips")?;
                unexpected(self.program.is_some() || self.programs.is_some(), "program")?;
                unexpected(self.budget.is_some(), "budget")?;
                let name = self.set.as_deref().ok_or_else(|| Error::invalid(field("set"), "missing"))?;
                Ok(Delta2Set::new(
                    self.id.clone(),
                    super::SetKind::Recursive(ComputableSet::from_name(name)?),
                ))
            }
            "flip-schedule" => {
                unexpected(self.set.is_some(), "set")?;
                unexpected(self.program.is_some() || self.programs.is_some(), "program")?;
                unexpected(self.budget.is_some(), "budget")?;
                let flips = self
                    .flips
                    .iter()
                    .flatten()
                    .map(|&[n, stage, value]| match value {
                        0 | 1 => Ok((n, stage, value == 1)),
                        _ => Err(Error::invalid(field("flips"), "value must be 0 or 1")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let schedule = FlipSchedule::new(self.default.unwrap_or(false), flips)?;
                Ok(Delta2Set::flip(self.id.clone(), schedule))
            }
            "halting" => {
                unexpected(self.set.is_some(), "set")?;
                unexpected(self.default.is_some(), "default")?;
                unexpected(self.flips.is_some(), "flips")?;
                let source = match (&self.program, &self.programs) {
                    (Some(p), None) => MachineSource::OnInput(load(p)?),
                    (None, Some(list)) => MachineSource::Indexed(list.iter().map(load).collect::<Result<_>>()?),
                    _ => return Err(Error::invalid(field("program"), "give exactly one of `program`, `programs`")),
                };
                Ok(Delta2Set::halting(
                    self.id.clone(),
                    source,
                    self.budget.unwrap_or(corpus::CLASSIFY_BUDGET),
                ))
            }
            other => Err(Error::invalid(field("kind"), format!("unknown kind `{other}`"))),
        }
    }
}
