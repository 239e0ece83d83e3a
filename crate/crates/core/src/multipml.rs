//! `d`-dimensional profiles and the shared pipeline.
//!
//! `d` sequences over a common domain give each element a `d`-tuple of
//! frequencies. Grids become products of the 1-d ladders, levels and
//! frequencies become tuples, and there is one budget row per coordinate.
//! The 1-d pipeline is the `d = 1` case of [`run_pipeline`].

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{FrequencyGrid, ProbabilityGrid};
use crate::error::{guard, invalid, PmlError, Result};
use crate::estimators::{Diagnostics, LevelSetDistribution, PairedLevelSetDistribution};
use crate::numeric::{ln_factorial, LogAccumulator};
use crate::oracle::DenseDistribution;
use crate::profile::{LogProb, Profile, Sequence};
use crate::rounding::{round, RoundedSolution};
use crate::sdpml::{
    for_each_integral, log_g, log_k_upper_bound, log_w_sdpml, stirling_bounds, stirling_upper_worst_case,
    FeasibleSetSpec, Variant,
};
use crate::solver::{maximize_g, SolveResult, SolverConfig};

pub const MAX_D: usize = 3;
/// Enumerate `K_{φ′}` exactly when its upper bound is below this many members.
const K_ENUM_CAP: u64 = 200_000;

/// Counts of `d`-frequency tuples.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DProfileRepr", into = "DProfileRepr")]
pub struct DProfile {
    d: usize,
    entries: Vec<(Vec<u64>, u64)>,
    n: Vec<u64>,
}

#[derive(Serialize, Deserialize)]
struct DProfileRepr {
    d: usize,
    entries: Vec<(Vec<u64>, u64)>,
}

impl TryFrom<DProfileRepr> for DProfile {
    type Error = PmlError;
    fn try_from(r: DProfileRepr) -> Result<Self> {
        DProfile::new(r.d, r.entries)
    }
}

impl From<DProfile> for DProfileRepr {
    fn from(p: DProfile) -> Self {
        DProfileRepr { d: p.d, entries: p.entries }
    }
}

impl DProfile {
    /// Sorts entries by decreasing tuple.
    ///
    /// # Errors
    ///
    /// Rejects `d ∉ 1..=3`, wrong tuple lengths, all-zero tuples, zero counts,
    /// repeated tuples and coordinates with no samples.
    pub fn new(d: usize, mut entries: Vec<(Vec<u64>, u64)>) -> Result<Self> {
        if !(1..=MAX_D).contains(&d) {
            return invalid(format!("d must lie in 1..={MAX_D}, got {d}"));
        }
        if entries.iter().any(|(f, c)| f.len() != d || f.iter().all(|&x| x == 0) || *c == 0) {
            return invalid("malformed d-profile entry");
        }
        entries.sort_by(|a, b| b.0.cmp(&a.0));
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return invalid("repeated frequency tuple");
        }
        let n: Vec<u64> = (0..d).map(|k| entries.iter().map(|(f, c)| f[k] * c).sum()).collect();
        if n.contains(&0) {
            return invalid("every coordinate needs at least one sample");
        }
        Ok(Self { d, entries, n })
    }

    pub fn from_profile(p: &Profile) -> Self {
        let entries = p.pairs().iter().map(|&(f, c)| (vec![f], c)).collect();
        Self::new(1, entries).expect("a profile is a valid 1-d profile")
    }

    /// # Errors
    ///
    /// Only `d = 1` profiles convert.
    pub fn to_profile(&self) -> Result<Profile> {
        if self.d != 1 {
            return invalid("only d = 1 converts to a profile");
        }
        Profile::new(self.entries.iter().map(|(f, c)| (f[0], *c)).collect())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn entries(&self) -> &[(Vec<u64>, u64)] {
        &self.entries
    }

    /// Per-coordinate sample lengths.
    pub fn n(&self) -> &[u64] {
        &self.n
    }

    pub fn distinct(&self) -> u64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    /// `n(k)^{-1/(2d+1)}` per coordinate.
    pub fn default_eps(&self) -> Vec<f64> {
        let p = -1.0 / (2.0 * self.d as f64 + 1.0);
        self.n.iter().map(|&n| (n as f64).powf(p)).collect()
    }

    /// `ln C_φ = Σ_k [ln n(k)! - Σ_x ln ψ_k(x)!]`.
    pub fn log_c(&self) -> f64 {
        (0..self.d)
            .map(|k| {
                ln_factorial(self.n[k])
                    - self.entries.iter().map(|(f, c)| *c as f64 * ln_factorial(f[k])).sum::<f64>()
            })
            .sum()
    }
}

/// Joint frequency tuples of `seqs`, which must share symbol ids.
///
/// # Errors
///
/// `d ∉ 1..=3`.
pub fn d_profile_of(seqs: &[Sequence]) -> Result<DProfile> {
    let d = seqs.len();
    if !(1..=MAX_D).contains(&d) {
        return invalid(format!("d must lie in 1..={MAX_D}, got {d}"));
    }
    let mut freq: BTreeMap<u32, Vec<u64>> = BTreeMap::new();
    for (k, s) in seqs.iter().enumerate() {
        for &x in s.symbols() {
            freq.entry(x).or_insert_with(|| vec![0; d])[k] += 1;
        }
    }
    let mut counts: BTreeMap<Vec<u64>, u64> = BTreeMap::new();
    for f in freq.into_values() {
        *counts.entry(f).or_insert(0) += 1;
    }
    DProfile::new(d, counts.into_iter().collect())
}

/// Product probability and frequency grids.
#[derive(Debug, Clone, PartialEq)]
pub struct DGrids {
    pub pgrids: Vec<ProbabilityGrid>,
    pub mgrids: Vec<FrequencyGrid>,
    /// Per-coordinate grid rows of each product row; coordinate 0 varies slowest.
    pub plevel: Vec<Vec<usize>>,
    /// Frequency tuple of each column `j ≥ 1`, ascending.
    pub mlevel: Vec<Vec<u64>>,
}

fn product<T: Clone>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<T>> = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(v.clone());
                    p
                })
            })
            .collect();
    }
    out
}

impl DGrids {
    /// For `d ≥ 2` each coordinate's frequency ladder also contains `0`
    /// (an element may be unseen in one sequence only); the all-zero tuple
    /// is the unseen column.
    ///
    /// # Errors
    ///
    /// Mismatched lengths or parameters outside `(0, 1]`.
    pub fn build(n: &[u64], eps: &[f64], gamma: &[f64]) -> Result<Self> {
        let d = n.len();
        if !(1..=MAX_D).contains(&d) || eps.len() != d || gamma.len() != d {
            return invalid("one (n, eps, gamma) triple per coordinate, d ≤ 3");
        }
        let pgrids = (0..d).map(|k| ProbabilityGrid::build(n[k], eps[k])).collect::<Result<Vec<_>>>()?;
        let mgrids = (0..d).map(|k| FrequencyGrid::build(n[k], gamma[k])).collect::<Result<Vec<_>>>()?;
        let rows: Vec<Vec<usize>> = pgrids.iter().map(|g| (0..g.b1()).collect()).collect();
        let plevel = product(&rows);
        let mlevel = if d == 1 {
            mgrids[0].values().iter().map(|&m| vec![m]).collect()
        } else {
            let axes: Vec<Vec<u64>> =
                mgrids.iter().map(|g| std::iter::once(0).chain(g.values().iter().copied()).collect()).collect();
            product(&axes).into_iter().filter(|t| t.iter().any(|&m| m > 0)).collect()
        };
        Ok(Self { pgrids, mgrids, plevel, mlevel })
    }

    pub fn d(&self) -> usize {
        self.pgrids.len()
    }

    pub fn b1(&self) -> usize {
        self.plevel.len()
    }

    pub fn b2(&self) -> usize {
        self.mlevel.len()
    }

    pub fn level_values(&self, row: usize) -> Vec<f64> {
        self.plevel[row].iter().zip(&self.pgrids).map(|(&i, g)| g.value(i)).collect()
    }

    pub fn spec(&self, phi_prime: &DiscreteDProfile, variant: Variant) -> Result<FeasibleSetSpec> {
        let levels = (0..self.b1()).map(|r| self.level_values(r)).collect();
        FeasibleSetSpec::new(levels, self.mlevel.clone(), phi_prime.counts.clone(), variant)
    }
}

/// `φ′` over the columns of a [`DGrids`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteDProfile {
    pub counts: Vec<u64>,
    pub n_prime: Vec<u64>,
}

impl DiscreteDProfile {
    /// The discretized profile as a [`DProfile`] of lengths `n′`.
    pub fn to_d_profile(&self, grids: &DGrids) -> Result<DProfile> {
        let entries =
            grids.mlevel.iter().zip(&self.counts).filter(|(_, &c)| c > 0).map(|(m, &c)| (m.clone(), c)).collect();
        DProfile::new(grids.d(), entries)
    }
}

/// Ceils every nonzero coordinate onto its ladder.
pub fn discretize_d_profile(dp: &DProfile, grids: &DGrids) -> Result<DiscreteDProfile> {
    if dp.d() != grids.d() {
        return invalid("profile and grid dimensions differ");
    }
    let index: HashMap<&[u64], usize> = grids.mlevel.iter().enumerate().map(|(j, m)| (m.as_slice(), j)).collect();
    let mut counts = vec![0u64; grids.b2()];
    for (f, c) in dp.entries() {
        let mut t = Vec::with_capacity(f.len());
        for (k, &fk) in f.iter().enumerate() {
            if fk == 0 {
                t.push(0);
                continue;
            }
            let g = &grids.mgrids[k];
            let Some(i) = g.ceil_index(fk) else {
                return invalid(format!("frequency {fk} above grid maximum {}", g.max()));
            };
            t.push(g.values()[i]);
        }
        counts[index[t.as_slice()]] += c;
    }
    let n_prime = (0..grids.d()).map(|k| grids.mlevel.iter().zip(&counts).map(|(m, c)| m[k] * c).sum()).collect();
    Ok(DiscreteDProfile { counts, n_prime })
}

/// `(value tuple, count)` levels, sorted by decreasing tuple, values merged.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DLevelSetDistribution {
    d: usize,
    levels: Vec<(Vec<f64>, u64)>,
}

impl DLevelSetDistribution {
    pub fn new(d: usize, levels: Vec<(Vec<f64>, u64)>) -> Result<Self> {
        let mut lv: Vec<(Vec<f64>, u64)> = levels.into_iter().filter(|(_, c)| *c > 0).collect();
        if lv.iter().any(|(v, _)| v.len() != d || v.iter().any(|x| !(0.0..=1.0).contains(x))) {
            return invalid("level tuples must have length d and values in [0, 1]");
        }
        lv.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));
        lv.dedup_by(|next, kept| {
            if next.0 == kept.0 {
                kept.1 += next.1;
                true
            } else {
                false
            }
        });
        Ok(Self { d, levels: lv })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn levels(&self) -> &[(Vec<f64>, u64)] {
        &self.levels
    }

    pub fn masses(&self) -> Vec<f64> {
        (0..self.d).map(|k| self.levels.iter().map(|(v, c)| v[k] * *c as f64).sum()).collect()
    }

    /// Divides each coordinate by its mass.
    pub fn normalize(&self) -> Result<Self> {
        let m = self.masses();
        if m.iter().any(|&x| !(x > 0.0)) {
            return invalid("cannot normalize zero mass");
        }
        Self::new(
            self.d,
            self.levels.iter().map(|(v, c)| (v.iter().zip(&m).map(|(a, b)| (a / b).min(1.0)).collect(), *c)).collect(),
        )
    }

    pub fn to_one(&self) -> Result<LevelSetDistribution> {
        if self.d != 1 {
            return invalid("not one-dimensional");
        }
        LevelSetDistribution::new(self.levels.iter().map(|(v, c)| (v[0], *c)).collect())
    }

    pub fn to_pair(&self) -> Result<PairedLevelSetDistribution> {
        if self.d != 2 {
            return invalid("not two-dimensional");
        }
        PairedLevelSetDistribution::new(self.levels.iter().map(|(v, c)| ((v[0], v[1]), *c)).collect())
    }
}

/// Level `(ζ_i, (X1)_i)` for every row of the rounded matrix with positive count.
pub fn pseudo_from_assignment_d(r: &RoundedSolution) -> DLevelSetDistribution {
    let levels = (0..r.x.rows())
        .filter_map(|i| {
            let c = r.x.row_sum(i).round() as u64;
            (c > 0).then(|| (r.spec_ext.levels()[i].clone(), c))
        })
        .collect();
    DLevelSetDistribution::new(r.spec_ext.d(), levels).expect("levels come from a valid spec")
}

/// Every intermediate of one pipeline run.
#[derive(Debug, Clone)]
pub struct PmlRun {
    pub grids: DGrids,
    pub phi_prime: DiscreteDProfile,
    /// Fractional spec `K^f_{φ′}`.
    pub spec: FeasibleSetSpec,
    pub solve: SolveResult,
    pub rounded: RoundedSolution,
    pub pseudo: DLevelSetDistribution,
    pub distribution: DLevelSetDistribution,
    pub diagnostics: Diagnostics,
}

/// Grids, discretized profile, solve, round, read off levels, normalize.
///
/// # Errors
///
/// Propagated from each stage.
pub fn run_pipeline(dp: &DProfile, eps: &[f64], gamma: &[f64], delta: Option<f64>) -> Result<PmlRun> {
    let d = dp.d();
    let grids = DGrids::build(dp.n(), eps, gamma)?;
    let phi_prime = discretize_d_profile(dp, &grids)?;
    let spec = grids.spec(&phi_prime, Variant::Fractional)?;
    let mut cfg = SolverConfig::for_spec(&spec);
    if let Some(delta) = delta {
        if !(delta > 0.0) {
            return invalid("delta must be positive");
        }
        cfg.delta = delta;
    }
    let solve = maximize_g(&spec, &cfg)?;
    let rounded = round(&solve.x, &spec)?;
    let pseudo = pseudo_from_assignment_d(&rounded);
    let distribution = pseudo.normalize()?;

    let log_g_rounded = log_g(&rounded.x, &rounded.spec_ext)?;
    let log_w_rounded = log_w_sdpml(&rounded.x, &rounded.spec_ext)?;
    let ispec = spec.with_variant(Variant::Integral)?;
    let k_bound = log_k_upper_bound(&ispec);
    let stirling_upper_bound = stirling_upper_worst_case(&ispec);
    let (log_k, log_k_exact, stirling_upper) = if k_bound < (K_ENUM_CAP as f64).ln() {
        let mut worst = f64::NEG_INFINITY;
        let count = for_each_integral(&ispec, K_ENUM_CAP, None, |x| {
            let diff = log_w_sdpml(x, &ispec).expect("integral") - log_g(x, &ispec).expect("nonnegative");
            worst = worst.max(diff);
        })?;
        ((count as f64).ln(), true, worst)
    } else {
        (k_bound, false, stirling_upper_bound)
    };

    let n = dp.n().to_vec();
    let nf: Vec<f64> = n.iter().map(|&x| x as f64).collect();
    let slack_probability: f64 = eps.iter().zip(&phi_prime.n_prime).map(|(e, &np)| e * np as f64).sum();
    let gn: Vec<f64> = gamma.iter().zip(&nf).map(|(g, n)| g * n).collect();
    let slack_profile = if d == 1 {
        7.0 * gn[0] * nf[0].ln()
    } else {
        let s: f64 = gn.iter().sum();
        5.0 * gn.iter().zip(&nf).map(|(g, n)| g * n.ln()).sum::<f64>() + if s > 1.0 { s * s.ln() } else { 0.0 }
    };
    let nmax = nf.iter().copied().fold(0.0, f64::max);
    let rounding_loss = solve.objective - log_g_rounded;
    let stirling_lower_rounded = log_g_rounded - log_w_rounded;
    let delta_total = 2.0 * slack_profile
        + slack_probability
        + log_k
        + stirling_upper
        + solve.certified_gap
        + rounding_loss
        + stirling_lower_rounded;
    let diagnostics = Diagnostics {
        d,
        n,
        n_prime: phi_prime.n_prime.clone(),
        eps1: eps.to_vec(),
        eps2: gamma.to_vec(),
        b1: grids.b1(),
        b2: grids.b2(),
        log_c_phi_prime: spec.log_c(),
        log_g_fractional: solve.objective,
        log_g_rounded,
        log_w_rounded,
        solver_gap: solve.certified_gap,
        solver_delta: cfg.delta,
        solver_iterations: solve.iterations,
        certified: solve.certified,
        slack_probability,
        slack_profile,
        log_k,
        log_k_exact,
        stirling_upper,
        stirling_upper_bound,
        stirling_lower_rounded,
        stirling_lower_rounded_bound: -stirling_bounds(&rounded.x).0,
        rounding_loss,
        rounding_loss_closed_form: (grids.b1() * (grids.b2() + 1)) as f64 * (2.0 * nmax * nmax).ln(),
        pseudo_mass: pseudo.masses(),
        delta_total,
    };
    Ok(PmlRun { grids, phi_prime, spec, solve, rounded, pseudo, distribution, diagnostics })
}

/// Approximate `d`-dimensional PML distribution, normalized per coordinate.
pub fn approximate_pml_d(
    dp: &DProfile,
    eps: &[f64],
    gamma: &[f64],
    delta: Option<f64>,
) -> Result<(DLevelSetDistribution, Diagnostics)> {
    run_pipeline(dp, eps, gamma, delta).map(|r| (r.distribution, r.diagnostics))
}

const MAX_D_ORACLE_N: u64 = 6;
const MAX_D_ORACLE_SUPPORT: usize = 5;

/// `ln ℙ(p, φ)` for a `d`-profile by enumerating every joint type.
///
/// `p[k]` is coordinate `k`; shorter vectors are padded with zeros.
///
/// # Errors
///
/// Guard when some `n(k) > 6` or the domain exceeds 5 elements.
pub fn exact_d_profile_logprob(p: &[DenseDistribution], dp: &DProfile) -> Result<LogProb> {
    if p.len() != dp.d() {
        return invalid("one distribution per coordinate");
    }
    if dp.n().iter().any(|&n| n > MAX_D_ORACLE_N) {
        return guard(format!("coordinate length above {MAX_D_ORACLE_N}"));
    }
    let len = p.iter().map(|q| q.probs.len()).max().unwrap_or(0);
    if len > MAX_D_ORACLE_SUPPORT {
        return guard(format!("domain above {MAX_D_ORACLE_SUPPORT}"));
    }
    let logs: Vec<Vec<f64>> =
        (0..len).map(|x| p.iter().map(|q| q.probs.get(x).copied().unwrap_or(0.0).ln()).collect()).collect();
    let distinct = dp.distinct() as usize;
    if distinct > len {
        return Ok(f64::NEG_INFINITY);
    }
    let mut classes: Vec<(Vec<u64>, u64)> = dp.entries().to_vec();
    classes.push((vec![0; dp.d()], (len - distinct) as u64));
    let mut acc = LogAccumulator::new();
    arrange_d(&logs, 0, &mut classes, 0.0, &mut acc);
    Ok(dp.log_c() + acc.value())
}

fn arrange_d(logs: &[Vec<f64>], x: usize, classes: &mut [(Vec<u64>, u64)], partial: f64, acc: &mut LogAccumulator) {
    if x == logs.len() {
        acc.add(partial);
        return;
    }
    for c in 0..classes.len() {
        if classes[c].1 == 0 {
            continue;
        }
        let term: f64 =
            classes[c].0.iter().zip(&logs[x]).map(|(&f, &l)| if f == 0 { 0.0 } else { f as f64 * l }).sum();
        if term == f64::NEG_INFINITY {
            continue;
        }
        classes[c].1 -= 1;
        arrange_d(logs, x + 1, classes, partial + term, acc);
        classes[c].1 += 1;
    }
}

/// Ordered compositions of `total` into `parts` positive parts.
fn positive_compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    fn rec(left: u64, parts: usize, acc: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if parts == 1 {
            acc.push(left);
            out.push(acc.clone());
            acc.pop();
            return;
        }
        for v in 1..=left.saturating_sub(parts as u64 - 1) {
            acc.push(v);
            rec(left - v, parts - 1, acc, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    if total >= parts as u64 && parts > 0 {
        rec(total, parts, &mut Vec::new(), &mut out);
    }
    out
}

/// Grid-search PML for a `d`-profile: every coordinate is a vector of
/// positive multiples of `1/resolution` on a common domain of at most
/// `support_cap` elements. Joint vectors are kept only in decreasing
/// lexicographic order (one representative per relabeling).
///
/// # Errors
///
/// Guard beyond 200 000 candidates or the oracle limits.
pub fn brute_force_pml_d(
    dp: &DProfile,
    support_cap: usize,
    resolution: u64,
) -> Result<(Vec<DenseDistribution>, LogProb)> {
    let d = dp.d();
    let r = resolution as f64;
    let mut cands: Vec<Vec<Vec<u64>>> = Vec::new();
    for s in (dp.distinct() as usize)..=support_cap.min(MAX_D_ORACLE_SUPPORT) {
        let comps = positive_compositions(resolution, s);
        let axes: Vec<Vec<Vec<u64>>> = vec![comps; d];
        let total: usize = axes.iter().map(Vec::len).product();
        if cands.len() + total > 2_000_000 {
            return guard("too many joint grid candidates");
        }
        for combo in product(&axes) {
            let joint: Vec<Vec<u64>> = (0..s).map(|x| combo.iter().map(|c| c[x]).collect()).collect();
            if joint.windows(2).all(|w| w[0] >= w[1]) {
                cands.push(combo);
            }
        }
    }
    if cands.len() > 200_000 {
        return guard("too many joint grid candidates");
    }
    if cands.is_empty() {
        return invalid("no candidates: raise resolution or support cap");
    }
    let to_dists = |c: &Vec<Vec<u64>>| -> Vec<DenseDistribution> {
        c.iter().map(|v| DenseDistribution { probs: v.iter().map(|&k| k as f64 / r).collect() }).collect()
    };
    let values: Vec<f64> = cands
        .par_iter()
        .map(|c| exact_d_profile_logprob(&to_dists(c), dp).unwrap_or(f64::NEG_INFINITY))
        .collect();
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    Ok((to_dists(&cands[best]), values[best]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_profile_logprob;
    use crate::profile::SymbolTable;

    fn seqs(xs: &[&str]) -> Vec<Sequence> {
        let mut t = SymbolTable::new();
        xs.iter()
            .map(|s| {
                let mut buf = [0u8; 4];
                let ids: Vec<u32> = s.chars().map(|c| t.intern(c.encode_utf8(&mut buf))).collect();
                Sequence::new(ids).unwrap()
            })
            .collect()
    }

    #[test]
    fn d_profile_examples() {
        let dp = d_profile_of(&seqs(&["ab", "aa"])).unwrap();
        assert_eq!(dp.entries(), &[(vec![1, 2], 1), (vec![1, 0], 1)]);
        assert_eq!(dp.n(), &[2, 2]);
        let dp = d_profile_of(&seqs(&["abc", "abc"])).unwrap();
        assert!(dp.entries().iter().all(|(f, _)| f[0] == f[1]));
        let dp = d_profile_of(&seqs(&["ababc"])).unwrap();
        assert_eq!(dp.to_profile().unwrap().pairs(), &[(2, 2), (1, 1)]);
        assert!(d_profile_of(&seqs(&["a", "a", "a", "a"])).is_err());
        assert!(d_profile_of(&[]).is_err());
    }

    #[test]
    fn d_profile_json() {
        let dp = d_profile_of(&seqs(&["ab", "aa"])).unwrap();
        let s = serde_json::to_string(&dp).unwrap();
        assert_eq!(s, r#"{"d":2,"entries":[[[1,2],1],[[1,0],1]]}"#);
        assert_eq!(serde_json::from_str::<DProfile>(&s).unwrap(), dp);
    }

    #[test]
    fn grids_include_zero_for_d2() {
        let g = DGrids::build(&[3, 2], &[1.0, 1.0], &[1.0, 1.0]).unwrap();
        // {0,1,2,3} × {0,1,2} minus (0,0)
        assert_eq!(g.b2(), 11);
        assert_eq!(g.b1(), g.pgrids[0].b1() * g.pgrids[1].b1());
        let g1 = DGrids::build(&[3], &[1.0], &[1.0]).unwrap();
        assert_eq!(g1.mlevel, vec![vec![1], vec![2], vec![3]]);
    }

    #[test]
    fn d_oracle_reduces_to_1d() {
        let p = DenseDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
        for s in ["aab", "abc", "aaab"] {
            let dp = d_profile_of(&seqs(&[s])).unwrap();
            let a = exact_d_profile_logprob(std::slice::from_ref(&p), &dp).unwrap();
            let b = exact_profile_logprob(&p, &dp.to_profile().unwrap()).unwrap();
            assert!((a - b).abs() < 1e-13);
        }
    }

    /// Sums over every pair of length-2 sequences on a 2-letter alphabet.
    #[test]
    fn d_oracle_matches_joint_sequences() {
        let p1 = [0.7, 0.3];
        let p2 = [0.4, 0.6];
        let dp = d_profile_of(&seqs(&["ab", "ab"])).unwrap();
        let mut total = 0.0;
        for s1 in 0..4usize {
            for s2 in 0..4usize {
                let a = [s1 & 1, s1 >> 1];
                let b = [s2 & 1, s2 >> 1];
                let mut f = [[0u64; 2]; 2];
                for &x in &a {
                    f[x][0] += 1;
                }
                for &x in &b {
                    f[x][1] += 1;
                }
                let mut tuples: Vec<Vec<u64>> = f.iter().map(|t| t.to_vec()).filter(|t| t.iter().any(|&v| v > 0)).collect();
                tuples.sort();
                if tuples == vec![vec![1, 1], vec![1, 1]] {
                    total += a.iter().map(|&x| p1[x]).product::<f64>() * b.iter().map(|&x| p2[x]).product::<f64>();
                }
            }
        }
        let v = exact_d_profile_logprob(
            &[DenseDistribution::new(p1.to_vec()).unwrap(), DenseDistribution::new(p2.to_vec()).unwrap()],
            &dp,
        )
        .unwrap();
        assert!((v - total.ln()).abs() < 1e-13);
        let pm = DenseDistribution::new(vec![1.0]).unwrap();
        let dp = d_profile_of(&seqs(&["aa", "aa"])).unwrap();
        assert!(exact_d_profile_logprob(&[pm.clone(), pm], &dp).unwrap().abs() < 1e-15);
    }

    #[test]
    fn level_dp_matches_d_oracle() {
        let levels = vec![(vec![0.5, 0.25], 1u64), (vec![0.25, 0.375], 2)];
        let p = [
            DenseDistribution::new(vec![0.5, 0.25, 0.25]).unwrap(),
            DenseDistribution::new(vec![0.25, 0.375, 0.375]).unwrap(),
        ];
        for pair in [["ab", "ab"], ["aab", "b"], ["abc", "cc"]] {
            let dp = d_profile_of(&seqs(&pair)).unwrap();
            let a = crate::oracle::level_set_logprob(&levels, dp.entries()).unwrap();
            let b = exact_d_profile_logprob(&p, &dp).unwrap();
            assert!((a - b).abs() < 1e-12, "{pair:?}: {a} vs {b}");
        }
    }

    #[test]
    fn d1_pipeline_runs() {
        let dp = d_profile_of(&seqs(&["ababc"])).unwrap();
        let e = dp.default_eps();
        let run = run_pipeline(&dp, &e, &e, None).unwrap();
        let m = run.distribution.masses();
        assert!((m[0] - 1.0).abs() < 1e-12);
        assert!(run.pseudo.masses()[0] <= 1.0 + 1e-12);
    }

    #[test]
    fn d2_point_mass() {
        let dp = d_profile_of(&seqs(&["aa", "aa"])).unwrap();
        let e = dp.default_eps();
        let run = run_pipeline(&dp, &e, &e, None).unwrap();
        for m in run.pseudo.masses() {
            assert!(m <= 1.0 + 1e-12);
        }
        let top = &run.distribution.levels()[0];
        assert!(top.0.iter().all(|&v| v > 0.5), "{:?}", run.distribution);
    }
}
