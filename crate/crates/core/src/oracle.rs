//! Exact profile probabilities and brute-force PML at tiny scale.
//!
//! Three independent routes compute `ℙ(p, φ)`:
//! arrangement enumeration over a dense distribution ([`exact_profile_logprob`]),
//! enumeration of every sequence ([`profile_logprob_by_sequences`]), and a
//! dynamic program over level sets ([`level_set_logprob`]) that handles
//! distributions with large support but few distinct values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{guard, invalid, Result};
use crate::numeric::{ln_factorial, LogAccumulator};
use crate::profile::{log_c_phi, LogProb, Profile, TypeVector};

pub const MAX_ORACLE_N: u64 = 12;
pub const MAX_ORACLE_SUPPORT: usize = 10;
const MAX_SEQUENCES: u64 = 2_000_000;
const MAX_GRID_CANDIDATES: usize = 2_000_000;
const MAX_DP_WORK: u64 = 50_000_000;

/// A (pseudo-)distribution over `0..probs.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseDistribution {
    pub probs: Vec<f64>,
}

impl DenseDistribution {
    /// Accepts pseudo-distributions (mass at most `1 + 1e-12`).
    ///
    /// # Errors
    ///
    /// Rejects negative or non-finite entries and mass above one.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return invalid("probabilities must be finite and nonnegative");
        }
        if probs.iter().sum::<f64>() > 1.0 + 1e-12 {
            return invalid("total mass exceeds one");
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Self {
        Self { probs: vec![1.0 / k as f64; k] }
    }

    pub fn mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn is_distribution(&self) -> bool {
        (self.mass() - 1.0).abs() <= 1e-12
    }

    pub fn support(&self) -> usize {
        self.probs.iter().filter(|&&p| p > 0.0).count()
    }
}

/// Search grid for [`brute_force_pml`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSearchConfig {
    pub support_cap: usize,
    pub resolution: u64,
    pub n: u64,
}

impl GridSearchConfig {
    /// Support cap `min(2n², 10)` and resolution `min(2n², 24)`.
    pub fn for_profile(phi: &Profile) -> Self {
        let n = phi.n();
        let two_n2 = 2 * n * n;
        Self { support_cap: two_n2.min(10) as usize, resolution: two_n2.min(24), n }
    }
}

pub fn exact_sequence_logprob(p: &DenseDistribution, t: &TypeVector) -> Result<LogProb> {
    let mut acc = 0.0;
    for (&x, &f) in t.entries() {
        let Some(&px) = p.probs.get(x as usize) else {
            return invalid(format!("symbol {x} outside distribution support"));
        };
        if px == 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        acc += f as f64 * px.ln();
    }
    Ok(acc)
}

fn check_oracle_guard(n: u64, support: usize) -> Result<()> {
    if n > MAX_ORACLE_N {
        return guard(format!("profile length {n} exceeds {MAX_ORACLE_N}"));
    }
    if support > MAX_ORACLE_SUPPORT {
        return guard(format!("support {support} exceeds {MAX_ORACLE_SUPPORT}"));
    }
    Ok(())
}

/// `ln ℙ(p, φ)` by enumerating every type with profile `φ`.
///
/// Types are the distinct arrangements of the frequency multiset of `φ`
/// (padded with zeros) over the support of `p`.
///
/// # Errors
///
/// [`PmlError::Guard`](crate::PmlError::Guard) when `n > 12` or the support exceeds 10.
pub fn exact_profile_logprob(p: &DenseDistribution, phi: &Profile) -> Result<LogProb> {
    let logs: Vec<f64> = p.probs.iter().filter(|&&v| v > 0.0).map(|v| v.ln()).collect();
    check_oracle_guard(phi.n(), logs.len())?;
    let distinct = phi.distinct() as usize;
    if distinct > logs.len() {
        return Ok(f64::NEG_INFINITY);
    }
    // Frequency classes: (frequency, remaining count); frequency 0 pads the support.
    let mut classes: Vec<(u64, u64)> = phi.pairs().to_vec();
    classes.push((0, (logs.len() - distinct) as u64));

    let branches: Vec<usize> = (0..classes.len()).filter(|&c| classes[c].1 > 0).collect();
    let parts: Vec<LogAccumulator> = branches
        .par_iter()
        .map(|&c| {
            let mut cl = classes.clone();
            cl[c].1 -= 1;
            let mut acc = LogAccumulator::new();
            arrange(&logs, 1, &mut cl, cl_freq(&classes, c) as f64 * logs[0], &mut acc);
            acc
        })
        .collect();
    let mut total = LogAccumulator::new();
    for a in &parts {
        total.merge(a);
    }
    Ok(log_c_phi(phi) + total.value())
}

fn cl_freq(classes: &[(u64, u64)], c: usize) -> u64 {
    classes[c].0
}

fn arrange(logs: &[f64], x: usize, classes: &mut [(u64, u64)], partial: f64, acc: &mut LogAccumulator) {
    if x == logs.len() {
        acc.add(partial);
        return;
    }
    for c in 0..classes.len() {
        if classes[c].1 == 0 {
            continue;
        }
        classes[c].1 -= 1;
        arrange(logs, x + 1, classes, partial + classes[c].0 as f64 * logs[x], acc);
        classes[c].1 += 1;
    }
}

/// `ln ℙ(p, φ)` by summing over every sequence in `supp(p)^n`.
///
/// Independent cross-check of [`exact_profile_logprob`]; feasible only for
/// `|supp|^n ≤ 2·10⁶`.
pub fn profile_logprob_by_sequences(p: &DenseDistribution, phi: &Profile) -> Result<LogProb> {
    let k = p.probs.len() as u64;
    let n = phi.n() as u32;
    if k == 0 || k.checked_pow(n).is_none_or(|c| c > MAX_SEQUENCES) {
        return guard("too many sequences to enumerate");
    }
    let target = phi.frequencies();
    let total = k.pow(n);
    let mut seq = vec![0usize; n as usize];
    let mut sum = 0.0;
    let mut counts = vec![0u64; k as usize];
    for idx in 0..total {
        let mut r = idx;
        for s in seq.iter_mut() {
            *s = (r % k) as usize;
            r /= k;
        }
        counts.iter_mut().for_each(|c| *c = 0);
        let mut prob = 1.0;
        for &s in &seq {
            counts[s] += 1;
            prob *= p.probs[s];
        }
        let mut fr: Vec<u64> = counts.iter().copied().filter(|&c| c > 0).collect();
        fr.sort_unstable_by(|a, b| b.cmp(a));
        if fr == target {
            sum += prob;
        }
    }
    Ok(sum.ln())
}

/// `ln ℙ` of a profile under a level-set distribution, in `d` dimensions.
///
/// `levels` holds `(value tuple, element count)`; `classes` holds
/// `(frequency tuple, number of elements)` with no all-zero tuple. For `d = 1`
/// these are a level-set distribution and a profile.
///
/// The DP walks the levels and tracks how many elements of each frequency
/// class are still unassigned; a level with `c` elements that takes `a_j`
/// elements of class `j` contributes `c!/((c-Σa)! Π a_j!) · Π_k v_k^{Σ_j a_j f_j(k)}`.
pub fn level_set_logprob(levels: &[(Vec<f64>, u64)], classes: &[(Vec<u64>, u64)]) -> Result<LogProb> {
    let Some(d) = classes.first().map(|c| c.0.len()) else {
        return invalid("empty profile");
    };
    if classes.iter().any(|c| c.0.len() != d || c.0.iter().all(|&f| f == 0) || c.1 == 0)
        || levels.iter().any(|l| l.0.len() != d)
    {
        return invalid("malformed level set or profile");
    }
    let radix: Vec<u64> = classes.iter().map(|c| c.1 + 1).collect();
    let states: u64 = radix.iter().product();
    if states.saturating_mul(states).saturating_mul(levels.len() as u64) > MAX_DP_WORK {
        return guard("level-set DP too large");
    }
    let states = states as usize;
    let decode = |mut s: usize, out: &mut Vec<u64>| {
        out.clear();
        for &r in &radix {
            out.push(s as u64 % r);
            s /= r as usize;
        }
    };
    let encode = |v: &[u64]| {
        let mut s = 0usize;
        let mut mul = 1usize;
        for (x, &r) in v.iter().zip(&radix) {
            s += *x as usize * mul;
            mul *= r as usize;
        }
        s
    };

    // Per-class log-weight contributed by one element at a given level.
    let mut dp = vec![f64::NEG_INFINITY; states];
    let full: Vec<u64> = classes.iter().map(|c| c.1).collect();
    dp[encode(&full)] = 0.0;
    let mut rem = Vec::new();
    for (value, count) in levels {
        if *count == 0 {
            continue;
        }
        let unit: Vec<f64> = classes
            .iter()
            .map(|(f, _)| {
                f.iter()
                    .zip(value)
                    .map(|(&fk, &vk)| if fk == 0 { 0.0 } else { fk as f64 * vk.ln() })
                    .sum()
            })
            .collect();
        let mut next = vec![LogAccumulator::new(); states];
        for s in 0..states {
            if dp[s] == f64::NEG_INFINITY {
                continue;
            }
            decode(s, &mut rem);
            let mut alloc = vec![0u64; rem.len()];
            loop {
                let taken: u64 = alloc.iter().sum();
                if taken <= *count {
                    let mut w = ln_factorial(*count) - ln_factorial(count - taken);
                    for (j, &a) in alloc.iter().enumerate() {
                        if a > 0 {
                            w += a as f64 * unit[j] - ln_factorial(a);
                        }
                    }
                    if w > f64::NEG_INFINITY {
                        let left: Vec<u64> = rem.iter().zip(&alloc).map(|(r, a)| r - a).collect();
                        next[encode(&left)].add(dp[s] + w);
                    }
                }
                // Odometer over 0..=rem[j].
                let mut j = 0;
                while j < alloc.len() {
                    if alloc[j] < rem[j] {
                        alloc[j] += 1;
                        break;
                    }
                    alloc[j] = 0;
                    j += 1;
                }
                if j == alloc.len() {
                    break;
                }
            }
        }
        dp = next.iter().map(LogAccumulator::value).collect();
    }
    let mut log_c = 0.0;
    for k in 0..d {
        let nk: u64 = classes.iter().map(|(f, c)| f[k] * c).sum();
        log_c += ln_factorial(nk);
        log_c -= classes.iter().map(|(f, c)| *c as f64 * ln_factorial(f[k])).sum::<f64>();
    }
    Ok(log_c + dp[0])
}

/// One-dimensional convenience wrapper over [`level_set_logprob`].
pub fn level_set_profile_logprob(levels: &[(f64, u64)], phi: &Profile) -> Result<LogProb> {
    let lv: Vec<(Vec<f64>, u64)> = levels.iter().map(|&(v, c)| (vec![v], c)).collect();
    let cl: Vec<(Vec<u64>, u64)> = phi.pairs().iter().map(|&(f, c)| (vec![f], c)).collect();
    level_set_logprob(&lv, &cl)
}

/// Nonincreasing positive integer vectors summing to `total` with length in `min_len..=max_len`.
pub(crate) fn partitions_into(total: u64, min_len: usize, max_len: usize) -> Vec<Vec<u64>> {
    fn rec(left: u64, max: u64, min_len: usize, max_len: usize, acc: &mut Vec<u64>, out: &mut Vec<Vec<u64>>, limit: usize) -> bool {
        if out.len() > limit {
            return false;
        }
        if left == 0 {
            if acc.len() >= min_len {
                out.push(acc.clone());
            }
            return true;
        }
        if acc.len() == max_len {
            return true;
        }
        let slots = (max_len - acc.len()) as u64;
        for part in (1..=left.min(max)).rev() {
            if part * slots < left {
                break;
            }
            acc.push(part);
            let ok = rec(left - part, part, min_len, max_len, acc, out, limit);
            acc.pop();
            if !ok {
                return false;
            }
        }
        true
    }
    let mut out = Vec::new();
    rec(total, total, min_len, max_len, &mut Vec::new(), &mut out, MAX_GRID_CANDIDATES);
    out
}

/// Grid-search PML over sorted probability vectors with entries in `(1/R)ℕ`.
///
/// The returned value lower-bounds the true PML probability. Ties keep the
/// first candidate in enumeration order (largest leading entry first).
///
/// # Errors
///
/// [`PmlError::Guard`](crate::PmlError::Guard) if the oracle guard or the
/// candidate budget is exceeded.
pub fn brute_force_pml(phi: &Profile, cfg: &GridSearchConfig) -> Result<(DenseDistribution, LogProb)> {
    check_oracle_guard(phi.n(), cfg.support_cap)?;
    if cfg.resolution == 0 || cfg.support_cap == 0 {
        return invalid("resolution and support cap must be positive");
    }
    let distinct = phi.distinct() as usize;
    if distinct > cfg.support_cap {
        return invalid("support cap below the number of observed symbols");
    }
    let cands = partitions_into(cfg.resolution, distinct, cfg.support_cap);
    if cands.len() > MAX_GRID_CANDIDATES {
        return guard("too many grid candidates");
    }
    if cands.is_empty() {
        return invalid("resolution too small for the observed support");
    }
    let r = cfg.resolution as f64;
    let values: Vec<f64> = cands
        .par_iter()
        .map(|c| {
            let p = DenseDistribution { probs: c.iter().map(|&k| k as f64 / r).collect() };
            exact_profile_logprob(&p, phi).unwrap_or(f64::NEG_INFINITY)
        })
        .collect();
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    let probs = cands[best].iter().map(|&k| k as f64 / r).collect();
    Ok((DenseDistribution { probs }, values[best]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    fn prof(pairs: &[(u64, u64)]) -> Profile {
        Profile::new(pairs.to_vec()).unwrap()
    }

    fn dist(p: &[f64]) -> DenseDistribution {
        DenseDistribution::new(p.to_vec()).unwrap()
    }

    #[test]
    fn sequence_logprob_examples() {
        let t = TypeVector::new(BTreeMap::from([(0, 1), (1, 1)])).unwrap();
        assert!((exact_sequence_logprob(&dist(&[0.5, 0.5]), &t).unwrap() - 0.25f64.ln()).abs() < 1e-15);
        let t = TypeVector::new(BTreeMap::from([(0, 4)])).unwrap();
        assert_eq!(exact_sequence_logprob(&dist(&[1.0]), &t).unwrap(), 0.0);
        let t = TypeVector::new(BTreeMap::from([(0, 2), (1, 1)])).unwrap();
        assert!((exact_sequence_logprob(&dist(&[0.6, 0.4]), &t).unwrap() - 0.144f64.ln()).abs() < 1e-14);
        let t = TypeVector::new(BTreeMap::from([(5, 1)])).unwrap();
        assert!(exact_sequence_logprob(&dist(&[1.0]), &t).is_err());
    }

    #[test]
    fn profile_logprob_examples() {
        let u2 = dist(&[0.5, 0.5]);
        assert!((exact_profile_logprob(&u2, &prof(&[(1, 2)])).unwrap() - 0.5f64.ln()).abs() < 1e-14);
        assert!((exact_profile_logprob(&u2, &prof(&[(2, 1)])).unwrap() - 0.5f64.ln()).abs() < 1e-14);
        for n in 1..=12 {
            assert!(exact_profile_logprob(&dist(&[1.0]), &prof(&[(n, 1)])).unwrap().abs() < 1e-14);
        }
        assert!(exact_profile_logprob(&u2, &prof(&[(13, 1)])).is_err());
        assert_eq!(exact_profile_logprob(&u2, &prof(&[(1, 3)])).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn sequence_path_matches_closed_form() {
        // P([(1,2)]) = 1 - Σ p²
        let p = dist(&[0.6, 0.3, 0.1]);
        let v = profile_logprob_by_sequences(&p, &prof(&[(1, 2)])).unwrap();
        assert!((v - (1.0f64 - 0.36 - 0.09 - 0.01).ln()).abs() < 1e-14);
    }

    #[test]
    fn level_dp_matches_arrangements() {
        let levels = [(0.3, 2u64), (0.2, 1), (0.1, 2)];
        let dense = dist(&[0.3, 0.3, 0.2, 0.1, 0.1]);
        for pairs in [&[(2u64, 2u64), (1, 1)][..], &[(1, 4)], &[(3, 1), (1, 2)], &[(5, 1)]] {
            let phi = prof(pairs);
            let a = level_set_profile_logprob(&levels, &phi).unwrap();
            let b = exact_profile_logprob(&dense, &phi).unwrap();
            assert!((a - b).abs() < 1e-12, "{pairs:?}: {a} vs {b}");
        }
    }

    #[test]
    fn level_dp_handles_large_support() {
        // 1000 elements at 1/1000: P([(1,2)]) = 1 - 1/1000.
        let v = level_set_profile_logprob(&[(1e-3, 1000)], &prof(&[(1, 2)])).unwrap();
        // ln 1000! is about 5900, so cancellation costs roughly 1e-12.
        assert!((v - 0.999f64.ln()).abs() < 1e-10, "{v} vs {}", 0.999f64.ln());
    }

    #[test]
    fn brute_force_examples() {
        let phi = prof(&[(2, 1)]);
        let (p, v) = brute_force_pml(&phi, &GridSearchConfig::for_profile(&phi)).unwrap();
        assert_eq!(p.probs, vec![1.0]);
        assert!(v.abs() < 1e-15);
        let phi = prof(&[(5, 1)]);
        let (_, v) = brute_force_pml(&phi, &GridSearchConfig::for_profile(&phi)).unwrap();
        assert!(v.abs() < 1e-15);
        for s in [2usize, 3, 4] {
            let phi = prof(&[(1, 2)]);
            let cfg = GridSearchConfig { support_cap: s, resolution: 12, n: 2 };
            let (p, v) = brute_force_pml(&phi, &cfg).unwrap();
            assert_eq!(p.probs.len(), s);
            assert!((v - (1.0 - 1.0 / s as f64).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn partitions_count() {
        // partitions of 6 into at most 3 parts: 6,51,42,411,33,321,222
        assert_eq!(partitions_into(6, 1, 3).len(), 7);
        assert_eq!(partitions_into(6, 3, 3).len(), 3);
    }
}
