use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::delta2::FlipSchedule;
use crate::error::{Error, Result};

/// Decidable sets of naturals, usable as bit sequences `n -> [n in set]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComputableSet {
    Evens,
    Odds,
    Primes,
    Squares,
    /// The empty set; its characteristic sequence is all zeros.
    AllZeros,
    /// All naturals; all ones.
    AllOnes,
}

impl ComputableSet {
    pub const ALL: [ComputableSet; 6] = [
        ComputableSet::Evens,
        ComputableSet::Odds,
        ComputableSet::Primes,
        ComputableSet::Squares,
        ComputableSet::AllZeros,
        ComputableSet::AllOnes,
    ];

    pub fn contains(self, n: u64) -> bool {
        match self {
            ComputableSet::Evens => n.is_multiple_of(2),
            ComputableSet::Odds => n % 2 == 1,
            ComputableSet::Primes => is_prime(n),
            ComputableSet::Squares => {
                let r = n.isqrt();
                r * r == n
            }
            ComputableSet::AllZeros => false,
            ComputableSet::AllOnes => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ComputableSet::Evens => "evens",
            ComputableSet::Odds => "odds",
            ComputableSet::Primes => "primes",
            ComputableSet::Squares => "squares",
            ComputableSet::AllZeros => "all-zeros",
            ComputableSet::AllOnes => "all-ones",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name)
            .ok_or_else(|| Error::Unknown {
                kind: "computable set",
                name: name.to_string(),
            })
    }

    /// First `len` bits of the characteristic sequence.
    pub fn prefix(self, len: usize) -> Vec<bool> {
        (0..len as u64).map(|n| self.contains(n)).collect()
    }
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// A source of bits `S(0), S(1), ...`.
#[derive(Clone, Debug)]
pub enum BitSource {
    /// Raw bytes, most significant bit first: bit `n` is bit `7 - n % 8` of
    /// byte `n / 8`.
    File { path: PathBuf, bytes: Arc<[u8]> },
    Computable(ComputableSet),
    /// The limit values of a flip schedule.
    Limit(Arc<FlipSchedule>),
}

impl BitSource {
    pub fn open_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_bytes(path, bytes))
    }

    pub fn from_bytes(path: impl Into<PathBuf>, bytes: Vec<u8>) -> Self {
        BitSource::File {
            path: path.into(),
            bytes: bytes.into(),
        }
    }

    /// Number of available bits, `None` for unbounded sources.
    pub fn len(&self) -> Option<u64> {
        match self {
            BitSource::File { bytes, .. } => Some(bytes.len() as u64 * 8),
            _ => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }

    pub fn bit_at(&self, n: u64) -> Result<bool> {
        match self {
            BitSource::File { bytes, .. } => {
                let byte = usize::try_from(n / 8)
                    .ok()
                    .and_then(|i| bytes.get(i))
                    .ok_or(Error::SourceExhausted {
                        index: n,
                        available: bytes.len() as u64 * 8,
                    })?;
                Ok(byte >> (7 - n % 8) & 1 == 1)
            }
            BitSource::Computable(set) => Ok(set.contains(n)),
            BitSource::Limit(schedule) => Ok(schedule.limit(n)),
        }
    }
}
