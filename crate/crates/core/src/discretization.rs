//! Geometric probability and frequency grids, with floor/ceil maps onto them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::oracle::DenseDistribution;
use crate::profile::Profile;

fn check_eps(eps: f64, what: &str) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return invalid(format!("{what} must lie in (0, 1], got {eps}"));
    }
    Ok(())
}

/// Probability levels `ζ_i = (1+ε₁)^{1-i}`, stored as integer exponents.
///
/// Row `i` (0-based, ascending value) has exponent `b₁ - 1 - i`, so the last
/// row is the level `1`. Floors compare exponents, never raw floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbabilityGrid {
    eps: f64,
    exponents: Vec<u32>,
}

impl ProbabilityGrid {
    /// Smallest grid whose lowest level is at most `1/(2n²)`.
    ///
    /// # Errors
    ///
    /// Rejects `n = 0` and `eps1 ∉ (0, 1]`.
    pub fn build(n: u64, eps1: f64) -> Result<Self> {
        if n == 0 {
            return invalid("grid needs n ≥ 1");
        }
        check_eps(eps1, "eps1")?;
        let floor = 1.0 / (2.0 * (n as f64) * (n as f64));
        let mut top = 0u32;
        while level(eps1, top) > floor {
            top += 1;
        }
        Ok(Self { eps: eps1, exponents: (0..=top).rev().collect() })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn b1(&self) -> usize {
        self.exponents.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    /// `ζ_i` for 0-based row `i`.
    pub fn value(&self, i: usize) -> f64 {
        level(self.eps, self.exponents[i])
    }

    /// `ln ζ_i`.
    pub fn log_value(&self, i: usize) -> f64 {
        -(self.exponents[i] as f64) * self.eps.ln_1p()
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.b1()).map(|i| self.value(i)).collect()
    }

    pub fn min_value(&self) -> f64 {
        self.value(0)
    }

    /// Row of `⌊c⌋_𝐏`, the largest level not above `c`; `None` below `ζ₁`.
    pub fn floor_index(&self, c: f64) -> Option<usize> {
        if c >= 1.0 {
            return Some(self.b1() - 1);
        }
        if !(c > 0.0) {
            return None;
        }
        let top = self.exponents[0];
        let guess = (-c.ln() / self.eps.ln_1p()).ceil().max(0.0);
        let mut e = if guess > top as f64 { top + 1 } else { guess as u32 };
        while e > 0 && level(self.eps, e - 1) <= c {
            e -= 1;
        }
        while e <= top && level(self.eps, e) > c {
            e += 1;
        }
        (e <= top).then(|| (top - e) as usize)
    }
}

fn level(eps: f64, e: u32) -> f64 {
    (1.0 + eps).powi(-(e as i32))
}

/// Frequencies `{1..⌈1/ε₂⌉} ∪ {⌈(1+ε₂/2)^k⌉ < n} ∪ {n}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    #[serde(with = "eps_bits")]
    eps: u64,
    values: Vec<u64>,
}

// The grid is Eq; keep eps as raw bits.
mod eps_bits {
    use serde::{Deserialize, Deserializer, Serializer};
    pub fn serialize<S: Serializer>(b: &u64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(f64::from_bits(*b))
    }
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<u64, D::Error> {
        Ok(f64::deserialize(d)?.to_bits())
    }
}

impl FrequencyGrid {
    /// # Errors
    ///
    /// Rejects `n = 0` and `eps2 ∉ (0, 1]`.
    pub fn build(n: u64, eps2: f64) -> Result<Self> {
        if n == 0 {
            return invalid("grid needs n ≥ 1");
        }
        check_eps(eps2, "eps2")?;
        let mut values: Vec<u64> = (1..=((1.0 / eps2).ceil() as u64).min(n)).collect();
        let ratio = 1.0 + eps2 / 2.0;
        let mut k = 1;
        loop {
            let v = ratio.powi(k).ceil() as u64;
            if v >= n {
                break;
            }
            values.push(v);
            k += 1;
        }
        values.push(n);
        values.sort_unstable();
        values.dedup();
        Ok(Self { eps: eps2.to_bits(), values })
    }

    pub fn eps(&self) -> f64 {
        f64::from_bits(self.eps)
    }

    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn b2(&self) -> usize {
        self.values.len()
    }

    pub fn max(&self) -> u64 {
        *self.values.last().expect("grid is nonempty")
    }

    /// Index of `⌈f⌉_𝐌`, the smallest grid value `≥ f`.
    pub fn ceil_index(&self, f: u64) -> Option<usize> {
        let i = self.values.partition_point(|&v| v < f);
        (i < self.values.len()).then_some(i)
    }
}

/// A pseudo-distribution whose values all lie on a [`ProbabilityGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePseudoDistribution {
    /// Element count per grid row.
    pub counts: Vec<u64>,
    /// Grid values, row-aligned with `counts`.
    pub values: Vec<f64>,
    /// Entries that fell below `ζ₁` and were floored to zero.
    pub dropped: usize,
    pub dropped_mass: f64,
}

impl DiscretePseudoDistribution {
    pub fn mass(&self) -> f64 {
        self.counts.iter().zip(&self.values).map(|(&c, &v)| c as f64 * v).sum()
    }

    /// Nonempty `(value, count)` levels in ascending value order.
    pub fn levels(&self) -> Vec<(f64, u64)> {
        self.counts
            .iter()
            .zip(&self.values)
            .filter(|(&c, _)| c > 0)
            .map(|(&c, &v)| (v, c))
            .collect()
    }

    /// One entry per element, largest first.
    pub fn to_dense(&self) -> DenseDistribution {
        let mut probs: Vec<f64> = self
            .levels()
            .into_iter()
            .flat_map(|(v, c)| std::iter::repeat_n(v, c as usize))
            .collect();
        probs.reverse();
        DenseDistribution { probs }
    }
}

/// Entrywise floor `q_x = ⌊p_x⌋_𝐏`.
pub fn disc(p: &DenseDistribution, grid: &ProbabilityGrid) -> DiscretePseudoDistribution {
    let mut counts = vec![0u64; grid.b1()];
    let mut dropped = 0;
    let mut dropped_mass = 0.0;
    for &px in p.probs.iter().filter(|&&v| v > 0.0) {
        match grid.floor_index(px) {
            Some(i) => counts[i] += 1,
            None => {
                dropped += 1;
                dropped_mass += px;
            }
        }
    }
    DiscretePseudoDistribution { counts, values: grid.values(), dropped, dropped_mass }
}

/// A profile whose frequencies lie on a [`FrequencyGrid`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteProfile {
    /// Grid values `m_j`.
    pub freqs: Vec<u64>,
    /// `φ′_j`, aligned with `freqs`.
    pub counts: Vec<u64>,
    pub n_prime: u64,
}

impl DiscreteProfile {
    /// The length-`n′` profile with the nonzero grid counts.
    pub fn to_profile(&self) -> Profile {
        let pairs = self.freqs.iter().zip(&self.counts).filter(|(_, &c)| c > 0).map(|(&f, &c)| (f, c)).collect();
        Profile::new(pairs).expect("nonempty discrete profile")
    }
}

/// Moves every frequency up to `⌈f⌉_𝐌`.
///
/// # Errors
///
/// Rejects profiles whose largest frequency exceeds the grid maximum.
pub fn discretize_profile(phi: &Profile, grid: &FrequencyGrid) -> Result<DiscreteProfile> {
    let mut counts = vec![0u64; grid.b2()];
    for &(f, c) in phi.pairs() {
        let Some(j) = grid.ceil_index(f) else {
            return invalid(format!("frequency {f} above grid maximum {}", grid.max()));
        };
        counts[j] += c;
    }
    let freqs = grid.values().to_vec();
    let n_prime = freqs.iter().zip(&counts).map(|(f, c)| f * c).sum();
    Ok(DiscreteProfile { freqs, counts, n_prime })
}
