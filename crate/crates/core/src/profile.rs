//! Sequences, types, profiles and the coefficient `C_φ`.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::ln_factorial;

/// Natural log of a probability; `-inf` encodes zero.
pub type LogProb = f64;

/// Maps opaque string tokens to dense ids in order of first appearance.
#[derive(Debug, Default, Clone)]
pub struct SymbolTable {
    ids: HashMap<String, u32>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, token: &str) -> u32 {
        let next = self.ids.len() as u32;
        *self.ids.entry(token.to_owned()).or_insert(next)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// A sample sequence over dense symbol ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    symbols: Vec<u32>,
}

impl Sequence {
    /// # Errors
    ///
    /// Returns [`PmlError::Invalid`](crate::PmlError::Invalid) for an empty sequence.
    pub fn new(symbols: Vec<u32>) -> Result<Self> {
        if symbols.is_empty() {
            return invalid("empty sequence");
        }
        Ok(Self { symbols })
    }

    /// Interns each token through `table`.
    pub fn from_tokens<'a, I>(table: &mut SymbolTable, tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        Self::new(tokens.into_iter().map(|t| table.intern(t)).collect())
    }

    /// One symbol per `char`; handy for literals like `"ababc"`.
    pub fn from_chars(s: &str) -> Result<Self> {
        let mut table = SymbolTable::new();
        let mut buf = [0u8; 4];
        Self::new(s.chars().map(|c| table.intern(c.encode_utf8(&mut buf))).collect())
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Frequencies of the symbols that occur in a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeVector {
    entries: BTreeMap<u32, u64>,
    n: u64,
}

impl TypeVector {
    /// # Errors
    ///
    /// Rejects zero frequencies and empty maps.
    pub fn new(entries: BTreeMap<u32, u64>) -> Result<Self> {
        if entries.is_empty() {
            return invalid("empty type");
        }
        if entries.values().any(|&f| f == 0) {
            return invalid("type frequencies must be positive");
        }
        let n = entries.values().sum();
        Ok(Self { entries, n })
    }

    pub fn entries(&self) -> &BTreeMap<u32, u64> {
        &self.entries
    }

    pub fn n(&self) -> u64 {
        self.n
    }
}

/// Multiset of `(frequency, count)` pairs, strictly decreasing in frequency.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ProfileRepr", into = "ProfileRepr")]
pub struct Profile {
    pairs: Vec<(u64, u64)>,
    n: u64,
}

#[derive(Serialize, Deserialize)]
struct ProfileRepr {
    pairs: Vec<(u64, u64)>,
}

impl TryFrom<ProfileRepr> for Profile {
    type Error = crate::PmlError;
    fn try_from(r: ProfileRepr) -> Result<Self> {
        Profile::new(r.pairs)
    }
}

impl From<Profile> for ProfileRepr {
    fn from(p: Profile) -> Self {
        ProfileRepr { pairs: p.pairs }
    }
}

impl Profile {
    /// Builds a profile, sorting pairs by decreasing frequency.
    ///
    /// # Errors
    ///
    /// Rejects empty input, zero frequencies or counts, and repeated frequencies.
    pub fn new(mut pairs: Vec<(u64, u64)>) -> Result<Self> {
        if pairs.is_empty() {
            return invalid("empty profile");
        }
        if pairs.iter().any(|&(f, c)| f == 0 || c == 0) {
            return invalid("profile frequencies and counts must be positive");
        }
        pairs.sort_by(|a, b| b.0.cmp(&a.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return invalid("repeated frequency in profile");
        }
        let n = pairs.iter().map(|&(f, c)| f * c).sum();
        Ok(Self { pairs, n })
    }

    /// Profile of a frequency multiset (zeros ignored).
    pub fn from_frequencies(freqs: impl IntoIterator<Item = u64>) -> Result<Self> {
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        for f in freqs.into_iter().filter(|&f| f > 0) {
            *counts.entry(f).or_insert(0) += 1;
        }
        Self::new(counts.into_iter().collect())
    }

    pub fn pairs(&self) -> &[(u64, u64)] {
        &self.pairs
    }

    /// Sample length `Σ freq·count`.
    pub fn n(&self) -> u64 {
        self.n
    }

    /// Number of distinct observed symbols.
    pub fn distinct(&self) -> u64 {
        self.pairs.iter().map(|&(_, c)| c).sum()
    }

    pub fn max_frequency(&self) -> u64 {
        self.pairs[0].0
    }

    /// Frequencies of the observed symbols, largest first.
    pub fn frequencies(&self) -> Vec<u64> {
        self.pairs
            .iter()
            .flat_map(|&(f, c)| std::iter::repeat_n(f, c as usize))
            .collect()
    }
}

pub fn type_of_sequence(seq: &Sequence) -> TypeVector {
    let mut entries = BTreeMap::new();
    for &s in seq.symbols() {
        *entries.entry(s).or_insert(0u64) += 1;
    }
    let n = seq.len() as u64;
    TypeVector { entries, n }
}

pub fn profile_of_type(t: &TypeVector) -> Profile {
    Profile::from_frequencies(t.entries().values().copied())
        .expect("a valid type has a valid profile")
}

pub fn profile_of_sequence(seq: &Sequence) -> Profile {
    profile_of_type(&type_of_sequence(seq))
}

/// `ln C_φ = ln n! - Σ_j φ_j ln(d_j!)`.
pub fn log_c_phi(p: &Profile) -> f64 {
    ln_factorial(p.n()) - p.pairs().iter().map(|&(f, c)| c as f64 * ln_factorial(f)).sum::<f64>()
}

/// Exact `C_φ` for `n ≤ 30`.
pub fn c_phi_exact(p: &Profile) -> Option<u128> {
    if p.n() > 30 {
        return None;
    }
    let fact = |k: u64| (1..=k as u128).product::<u128>();
    let denom: u128 = p.pairs().iter().map(|&(f, c)| fact(f).pow(c as u32)).product();
    Some(fact(p.n()) / denom)
}
