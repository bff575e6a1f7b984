//! Cylinder addresses: words over `{1, 2, 3, 4}`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Deepest generation a packed `u64` index can represent.
pub const MAX_GENERATION: usize = 31;

/// A generation-`n` square `I_{i_1...i_n}` of the construction, identified by its word.
///
/// The empty word is the root (the unit square).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CylinderAddress {
    word: Vec<u8>,
}

impl CylinderAddress {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn new(word: Vec<u8>) -> Result<Self> {
        if word.len() > MAX_GENERATION || word.iter().any(|s| !(1..=4).contains(s)) {
            return Err(Error::InvalidAddress(
                word.iter().map(|s| s.to_string()).collect(),
            ));
        }
        Ok(Self { word })
    }

    pub fn word(&self) -> &[u8] {
        &self.word
    }

    pub fn generation(&self) -> usize {
        self.word.len()
    }

    pub fn is_root(&self) -> bool {
        self.word.is_empty()
    }

    /// The father `Î`; `None` for the root.
    pub fn parent(&self) -> Option<Self> {
        if self.word.is_empty() {
            return None;
        }
        Some(Self {
            word: self.word[..self.word.len() - 1].to_vec(),
        })
    }

    /// # Panics
    /// If `symbol` is not in `1..=4`.
    pub fn child(&self, symbol: u8) -> Self {
        assert!((1..=4).contains(&symbol), "symbol {symbol} not in 1..=4");
        let mut word = self.word.clone();
        word.push(symbol);
        Self { word }
    }

    /// The concatenation `IJ`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut word = self.word.clone();
        word.extend_from_slice(&other.word);
        Self { word }
    }

    /// Base-4 index in `0..4^generation`, most significant symbol first.
    pub fn index(&self) -> u64 {
        self.word
            .iter()
            .fold(0u64, |acc, &s| (acc << 2) | u64::from(s - 1))
    }

    pub fn from_index(index: u64, generation: usize) -> Self {
        debug_assert!(generation <= MAX_GENERATION);
        let word = (0..generation)
            .rev()
            .map(|g| ((index >> (2 * g)) & 3) as u8 + 1)
            .collect();
        Self { word }
    }

    /// All `4^generation` addresses in index order.
    pub fn all(generation: usize) -> impl Iterator<Item = Self> {
        (0..1u64 << (2 * generation)).map(move |i| Self::from_index(i, generation))
    }

    /// Applies a permutation of the four symbols (`perm[s - 1]` replaces `s`).
    pub fn relabel(&self, perm: [u8; 4]) -> Self {
        Self {
            word: self.word.iter().map(|&s| perm[usize::from(s - 1)]).collect(),
        }
    }
}

impl fmt::Display for CylinderAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.word {
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for CylinderAddress {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let word = s
            .bytes()
            .map(|b| match b {
                b'1'..=b'4' => Ok(b - b'0'),
                _ => Err(Error::InvalidAddress(s.to_string())),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(word).map_err(|_| Error::InvalidAddress(s.to_string()))
    }
}

impl Serialize for CylinderAddress {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CylinderAddress {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
