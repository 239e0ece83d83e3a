//! Assignment matrices, feasible sets and the objectives `w` and `g`.
//!
//! Rows are probability levels, column 0 counts unseen elements and column
//! `j ≥ 1` counts elements with discretized frequency `m_j`. Levels and
//! frequencies are `d`-tuples; the 1-d case is `d = 1`.

use crate::discretization::{DiscreteProfile, DiscretePseudoDistribution, ProbabilityGrid};
use crate::error::{guard, invalid, PmlError, Result};
use crate::numeric::{ln_binomial, ln_factorial, stirling_term_bound, xlogx, LogAccumulator};

/// Clamp applied inside logarithms of the gradient.
pub const GRAD_CLAMP: f64 = 1e-12;

/// Dense row-major nonnegative matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl AssignmentMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Self { rows: rows.len(), cols, data: rows.concat() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// `(X1)_i`, summed fresh.
    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).iter().sum()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row_sum(i)).collect()
    }

    pub fn col_sum(&self, j: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, j)).sum()
    }

    pub fn is_integral(&self, tol: f64) -> bool {
        self.data.iter().all(|v| (v - v.round()).abs() <= tol)
    }

    /// `⟨self, other⟩`.
    pub fn dot(&self, other: &AssignmentMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }
}

/// Which feasible set a [`FeasibleSetSpec`] describes.
#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    /// `K_{φ′}`: integral entries.
    Integral,
    /// `K^f_{φ′}`: the polytope.
    Fractional,
    /// `K_{q,φ′}`: integral with row sums fixed to the level counts of `q`.
    QRestricted(Vec<u64>),
    /// `K^ext`: base rows followed by one appended row per frequency column.
    Extended { base_rows: usize },
}

/// Levels, frequency columns, column targets `φ′` and a [`Variant`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSetSpec {
    d: usize,
    levels: Vec<Vec<f64>>,
    log_levels: Vec<Vec<f64>>,
    freqs: Vec<Vec<u64>>,
    phi_prime: Vec<u64>,
    variant: Variant,
    // c_ij = Σ_k m_j(k) ln ζ_i(k), row-major over (rows, b₂ + 1).
    coef: Vec<f64>,
}

impl FeasibleSetSpec {
    /// `levels[i]` is the value tuple of row `i`; `freqs[j-1]` the frequency
    /// tuple of column `j`; `phi_prime[j-1]` its target sum.
    ///
    /// # Errors
    ///
    /// Rejects ragged tuples, values outside `[0, 1]`, and all-zero frequency tuples.
    pub fn new(levels: Vec<Vec<f64>>, freqs: Vec<Vec<u64>>, phi_prime: Vec<u64>, variant: Variant) -> Result<Self> {
        let d = levels.first().map(Vec::len).or(freqs.first().map(Vec::len)).unwrap_or(1);
        if d == 0 || levels.iter().any(|l| l.len() != d) || freqs.iter().any(|f| f.len() != d) {
            return invalid("level and frequency tuples must share one positive dimension");
        }
        if freqs.len() != phi_prime.len() {
            return invalid("one target per frequency column");
        }
        if levels.iter().flatten().any(|&v| !(0.0..=1.0).contains(&v)) {
            return invalid("level values must lie in [0, 1]");
        }
        if freqs.iter().any(|f| f.iter().all(|&m| m == 0)) {
            return invalid("all-zero frequency column");
        }
        match &variant {
            Variant::QRestricted(l) if l.len() != levels.len() => return invalid("one level count per row"),
            Variant::Extended { base_rows } if base_rows + freqs.len() != levels.len() => {
                return invalid("extended spec needs one appended row per column")
            }
            _ => {}
        }
        let log_levels: Vec<Vec<f64>> = levels.iter().map(|l| l.iter().map(|v| v.ln()).collect()).collect();
        let cols = freqs.len() + 1;
        let mut coef = vec![0.0; levels.len() * cols];
        for (i, ll) in log_levels.iter().enumerate() {
            for (j, f) in freqs.iter().enumerate() {
                coef[i * cols + j + 1] =
                    f.iter().zip(ll).map(|(&m, &lv)| if m == 0 { 0.0 } else { m as f64 * lv }).sum();
            }
        }
        Ok(Self { d, levels, log_levels, freqs, phi_prime, variant, coef })
    }

    /// The 1-d spec over a probability grid and a discrete profile.
    pub fn from_grid(grid: &ProbabilityGrid, dp: &DiscreteProfile, variant: Variant) -> Result<Self> {
        let levels = grid.values().into_iter().map(|v| vec![v]).collect();
        let freqs = dp.freqs.iter().map(|&m| vec![m]).collect();
        Self::new(levels, freqs, dp.counts.clone(), variant)
    }

    /// Same levels and columns, different variant.
    pub fn with_variant(&self, variant: Variant) -> Result<Self> {
        Self::new(self.levels.clone(), self.freqs.clone(), self.phi_prime.clone(), variant)
    }

    /// Appends one row per frequency column; `None` rows get the zero marker.
    pub fn extended(&self, extra: &[Option<Vec<f64>>]) -> Result<Self> {
        if extra.len() != self.b2() {
            return invalid("one extra level per frequency column");
        }
        let mut levels = self.levels.clone();
        for e in extra {
            levels.push(e.clone().unwrap_or_else(|| vec![0.0; self.d]));
        }
        Self::new(levels, self.freqs.clone(), self.phi_prime.clone(), Variant::Extended { base_rows: self.rows() })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn rows(&self) -> usize {
        self.levels.len()
    }

    pub fn b2(&self) -> usize {
        self.freqs.len()
    }

    pub fn cols(&self) -> usize {
        self.freqs.len() + 1
    }

    pub fn levels(&self) -> &[Vec<f64>] {
        &self.levels
    }

    pub fn log_levels(&self) -> &[Vec<f64>] {
        &self.log_levels
    }

    pub fn freqs(&self) -> &[Vec<u64>] {
        &self.freqs
    }

    pub fn phi_prime(&self) -> &[u64] {
        &self.phi_prime
    }

    pub fn variant(&self) -> &Variant {
        &self.variant
    }

    /// `c_ij = Σ_k m_j(k) ln ζ_i(k)`; zero in column 0.
    #[inline]
    pub fn coef(&self, i: usize, j: usize) -> f64 {
        self.coef[i * self.cols() + j]
    }

    /// `n′(k) = Σ_j m_j(k) φ′_j`.
    pub fn n_prime(&self) -> Vec<u64> {
        (0..self.d).map(|k| self.freqs.iter().zip(&self.phi_prime).map(|(f, c)| f[k] * c).sum()).collect()
    }

    /// `ln C_{φ′} = Σ_k [ln n′(k)! - Σ_j φ′_j ln m_j(k)!]`.
    pub fn log_c(&self) -> f64 {
        let np = self.n_prime();
        (0..self.d)
            .map(|k| {
                ln_factorial(np[k])
                    - self.freqs.iter().zip(&self.phi_prime).map(|(f, &c)| c as f64 * ln_factorial(f[k])).sum::<f64>()
            })
            .sum()
    }

    /// Budget usage `ζ(k)ᵀ X 1` per coordinate.
    pub fn budget_usage(&self, x: &AssignmentMatrix) -> Vec<f64> {
        let rs = x.row_sums();
        (0..self.d).map(|k| self.levels.iter().zip(&rs).map(|(l, r)| l[k] * r).sum()).collect()
    }

    fn check_dims(&self, x: &AssignmentMatrix) -> Result<()> {
        if x.rows() != self.rows() || x.cols() != self.cols() {
            return invalid(format!(
                "matrix is {}x{}, spec expects {}x{}",
                x.rows(),
                x.cols(),
                self.rows(),
                self.cols()
            ));
        }
        Ok(())
    }
}

/// Membership test with tolerance `tol` on every constraint.
///
/// # Errors
///
/// Dimension mismatch.
pub fn is_feasible(x: &AssignmentMatrix, spec: &FeasibleSetSpec, tol: f64) -> Result<bool> {
    spec.check_dims(x)?;
    if x.data().iter().any(|&v| !(v >= -tol)) {
        return Ok(false);
    }
    for j in 1..spec.cols() {
        if (x.col_sum(j) - spec.phi_prime[j - 1] as f64).abs() > tol {
            return Ok(false);
        }
    }
    if spec.budget_usage(x).iter().any(|&u| u > 1.0 + tol) {
        return Ok(false);
    }
    match &spec.variant {
        Variant::Integral => {
            if !x.is_integral(tol) {
                return Ok(false);
            }
        }
        Variant::QRestricted(l) => {
            if !x.is_integral(tol) || x.row_sums().iter().zip(l).any(|(r, &li)| (r - li as f64).abs() > tol) {
                return Ok(false);
            }
        }
        Variant::Extended { base_rows } => {
            for r in *base_rows..spec.rows() {
                let own = r - base_rows + 1;
                if (0..spec.cols()).any(|j| j != own && x.get(r, j) != 0.0) {
                    return Ok(false);
                }
            }
        }
        Variant::Fractional => {}
    }
    Ok(true)
}

/// `Σ_ij X_ij c_ij`, the probability part of both objectives.
pub fn probability_term(x: &AssignmentMatrix, spec: &FeasibleSetSpec) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.rows() {
        for j in 1..x.cols() {
            let v = x.get(i, j);
            if v != 0.0 {
                acc += v * spec.coef(i, j);
            }
        }
    }
    acc
}

/// `ln w(X) = Σ_i [(Xm)_i ln ζ_i + ln (X1)_i! - Σ_j ln X_ij!]`.
///
/// # Errors
///
/// Dimension mismatch or entries that are not nonnegative integers.
pub fn log_w_sdpml(x: &AssignmentMatrix, spec: &FeasibleSetSpec) -> Result<f64> {
    spec.check_dims(x)?;
    if !x.is_integral(1e-9) || x.data().iter().any(|&v| v < -1e-9) {
        return invalid("log_w needs a nonnegative integral matrix");
    }
    let mut acc = probability_term(x, spec);
    for i in 0..x.rows() {
        let r: u64 = x.row(i).iter().map(|v| v.round() as u64).sum();
        acc += ln_factorial(r);
        acc -= x.row(i).iter().map(|v| ln_factorial(v.round() as u64)).sum::<f64>();
    }
    Ok(acc)
}

/// `ln g(X) = Σ_ij X_ij c_ij + Σ_i (X1)_i ln (X1)_i - Σ_ij X_ij ln X_ij`.
///
/// # Errors
///
/// Dimension mismatch or a negative entry.
pub fn log_g(x: &AssignmentMatrix, spec: &FeasibleSetSpec) -> Result<f64> {
    spec.check_dims(x)?;
    if x.data().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return invalid("log_g needs finite nonnegative entries");
    }
    Ok(log_g_unchecked(x, spec))
}

pub(crate) fn log_g_unchecked(x: &AssignmentMatrix, spec: &FeasibleSetSpec) -> f64 {
    let mut acc = probability_term(x, spec);
    for i in 0..x.rows() {
        let row = x.row(i);
        acc += xlogx(row.iter().sum());
        acc -= row.iter().map(|&v| xlogx(v)).sum::<f64>();
    }
    acc
}

/// `∂ ln g / ∂X_ij = c_ij + ln (X1)_i - ln X_ij`, with both logs clamped at [`GRAD_CLAMP`].
pub fn grad_log_g(x: &AssignmentMatrix, spec: &FeasibleSetSpec) -> AssignmentMatrix {
    let mut g = AssignmentMatrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let lr = x.row_sum(i).max(GRAD_CLAMP).ln();
        for j in 0..x.cols() {
            g.set(i, j, spec.coef(i, j) + lr - x.get(i, j).max(GRAD_CLAMP).ln());
        }
    }
    g
}

/// Bounds on `ln w(X) - ln g(X)` from `1 ≤ k!/e^{k ln k - k} ≤ e√(k+1)`.
///
/// Returns `(lower, upper)` with lower `-Σ_{X_ij>0} ln(e√(X_ij+1))` and upper
/// `Σ_{(X1)_i>0} ln(e√((X1)_i+1))`.
pub fn stirling_bounds(x: &AssignmentMatrix) -> (f64, f64) {
    let lower = -x.data().iter().filter(|&&v| v > 0.0).map(|&v| stirling_term_bound(v)).sum::<f64>();
    let upper = x.row_sums().into_iter().filter(|&r| r > 0.0).map(stirling_term_bound).sum::<f64>();
    (lower, upper)
}

/// Upper bound of [`stirling_bounds`] over every integral feasible point,
/// using `(X1)_i ≤ 1/ζ_i`.
pub fn stirling_upper_worst_case(spec: &FeasibleSetSpec) -> f64 {
    spec.levels
        .iter()
        .map(|l| {
            let cap = l.iter().map(|&v| if v > 0.0 { (1.0 / v).floor() } else { 0.0 }).fold(f64::INFINITY, f64::min);
            if cap >= 1.0 {
                stirling_term_bound(cap)
            } else {
                0.0
            }
        })
        .sum()
}

const BUDGET_TOL: f64 = 1e-12;

struct Enumerator<'a, F: FnMut(&AssignmentMatrix)> {
    spec: &'a FeasibleSetSpec,
    cap: u64,
    max_unseen: Option<u64>,
    seen: u64,
    x: AssignmentMatrix,
    used: Vec<f64>,
    sink: F,
}

impl<F: FnMut(&AssignmentMatrix)> Enumerator<'_, F> {
    fn fits(&self, i: usize, units: f64) -> bool {
        self.used.iter().zip(&self.spec.levels[i]).all(|(u, l)| u + l * units <= 1.0 + BUDGET_TOL)
    }

    fn charge(&mut self, i: usize, units: f64) {
        for (u, l) in self.used.iter_mut().zip(&self.spec.levels[i]) {
            *u += l * units;
        }
    }

    // Composition of φ′_j over rows i.., then the next column.
    fn column(&mut self, j: usize, i: usize, left: u64) -> Result<()> {
        let rows = self.spec.rows();
        if i + 1 == rows || left == 0 {
            let last = if left == 0 { None } else { Some(i) };
            if let Some(r) = last {
                if !self.fits(r, left as f64) {
                    return Ok(());
                }
                self.x.set(r, j, left as f64);
                self.charge(r, left as f64);
            }
            let res = if j + 1 < self.spec.cols() { self.column(j + 1, 0, self.spec.phi_prime[j]) } else { self.unseen(0) };
            if let Some(r) = last {
                self.x.set(r, j, 0.0);
                self.charge(r, -(left as f64));
            }
            return res;
        }
        for k in (0..=left).rev() {
            if k > 0 && !self.fits(i, k as f64) {
                continue;
            }
            self.x.set(i, j, k as f64);
            self.charge(i, k as f64);
            let res = self.column(j, i + 1, left - k);
            self.x.set(i, j, 0.0);
            self.charge(i, -(k as f64));
            res?;
        }
        Ok(())
    }

    fn unseen(&mut self, i: usize) -> Result<()> {
        if i == self.spec.rows() {
            self.seen += 1;
            if self.seen > self.cap {
                return guard(format!("more than {} feasible matrices", self.cap));
            }
            (self.sink)(&self.x);
            return Ok(());
        }
        if let Variant::QRestricted(l) = &self.spec.variant {
            let have: f64 = self.x.row(i)[1..].iter().sum();
            let need = l[i] as f64 - have;
            if need < 0.0 || !self.fits(i, need) {
                return Ok(());
            }
            self.x.set(i, 0, need);
            self.charge(i, need);
            let res = self.unseen(i + 1);
            self.x.set(i, 0, 0.0);
            self.charge(i, -need);
            return res;
        }
        let mut k = 0u64;
        loop {
            if k > 0 && (!self.fits(i, k as f64) || self.max_unseen.is_some_and(|m| k > m)) {
                break;
            }
            self.x.set(i, 0, k as f64);
            self.charge(i, k as f64);
            let res = self.unseen(i + 1);
            self.x.set(i, 0, 0.0);
            self.charge(i, -(k as f64));
            res?;
            k += 1;
        }
        Ok(())
    }
}

/// Visits every integral feasible matrix once.
///
/// `max_unseen` caps each unseen entry `X_i0`. Only the integral and
/// `q`-restricted variants can be enumerated.
///
/// # Errors
///
/// [`PmlError::Guard`] once more than `cap` matrices are found.
pub fn for_each_integral(
    spec: &FeasibleSetSpec,
    cap: u64,
    max_unseen: Option<u64>,
    sink: impl FnMut(&AssignmentMatrix),
) -> Result<u64> {
    if !matches!(spec.variant, Variant::Integral | Variant::QRestricted(_)) {
        return invalid("only integral feasible sets can be enumerated");
    }
    if spec.rows() == 0 {
        return invalid("no rows");
    }
    let mut e = Enumerator {
        spec,
        cap,
        max_unseen,
        seen: 0,
        x: AssignmentMatrix::zeros(spec.rows(), spec.cols()),
        used: vec![0.0; spec.d],
        sink,
    };
    if spec.cols() > 1 {
        e.column(1, 0, spec.phi_prime[0])?;
    } else {
        e.unseen(0)?;
    }
    Ok(e.seen)
}

/// Collects [`for_each_integral`].
pub fn enumerate_integral_k(spec: &FeasibleSetSpec, cap: u64, max_unseen: Option<u64>) -> Result<Vec<AssignmentMatrix>> {
    let mut out = Vec::new();
    for_each_integral(spec, cap, max_unseen, |x| out.push(x.clone()))?;
    Ok(out)
}

/// `ln |K_{φ′}|` upper bound.
///
/// Seen columns are counted as unconstrained compositions
/// `Π_j C(φ′_j + b₁ - 1, b₁ - 1)`. The unseen column is counted with a
/// knapsack DP on a lattice: a feasible unseen column satisfies
/// `Σ_i ⌊ζ_i(k) Q⌋ X_i0 ≤ Q` for every coordinate `k`.
pub fn log_k_upper_bound(spec: &FeasibleSetSpec) -> f64 {
    let b1 = spec.rows() as u64;
    let seen: f64 = spec.phi_prime.iter().map(|&c| ln_binomial(c + b1 - 1, b1 - 1)).sum();
    let mut unseen = f64::INFINITY;
    for k in 0..spec.d {
        let zmin = spec.levels.iter().map(|l| l[k]).filter(|&v| v > 0.0).fold(1.0, f64::min);
        let q = ((8.0 / zmin).ceil() as usize).min(1 << 22);
        let weights: Vec<usize> =
            spec.levels.iter().map(|l| (l[k] * q as f64).floor() as usize).filter(|&w| w > 0).collect();
        if weights.len() < spec.levels.iter().filter(|l| l[k] > 0.0).count() {
            continue;
        }
        // ways[s] = number of vectors with weight exactly s
        let mut ways = vec![0.0f64; q + 1];
        ways[0] = 1.0;
        for &w in &weights {
            for s in w..=q {
                ways[s] += ways[s - w];
            }
        }
        unseen = unseen.min(ways.iter().sum::<f64>().ln());
    }
    seen + unseen
}

/// `ln` of `C_{φ′} Σ_{X ∈ K_{q,φ′}} w(X)`, which equals `ln ℙ(q, φ′)`.
///
/// # Errors
///
/// Guard when `K_{q,φ′}` has more than `cap` members.
pub fn log_dpml_sum(
    q: &DiscretePseudoDistribution,
    phi_prime: &DiscreteProfile,
    spec: &FeasibleSetSpec,
    cap: u64,
) -> Result<f64> {
    if q.counts.len() != spec.rows() {
        return invalid("pseudo-distribution and spec rows differ");
    }
    if spec.phi_prime() != phi_prime.counts.as_slice() {
        return invalid("spec targets differ from the discrete profile");
    }
    let qspec = spec.with_variant(Variant::QRestricted(q.counts.clone()))?;
    let mut acc = LogAccumulator::new();
    let mut err: Option<PmlError> = None;
    for_each_integral(&qspec, cap, None, |x| match log_w_sdpml(x, &qspec) {
        Ok(v) => acc.add(v),
        Err(e) => err = Some(e),
    })?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(qspec.log_c() + acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{disc, discretize_profile, FrequencyGrid};
    use crate::oracle::{exact_profile_logprob, DenseDistribution};
    use crate::profile::Profile;
    use proptest::prelude::*;

    fn spec1(levels: &[f64], freqs: &[u64], phi: &[u64]) -> FeasibleSetSpec {
        FeasibleSetSpec::new(
            levels.iter().map(|&v| vec![v]).collect(),
            freqs.iter().map(|&m| vec![m]).collect(),
            phi.to_vec(),
            Variant::Integral,
        )
        .unwrap()
    }

    #[test]
    fn feasibility_examples() {
        let s = spec1(&[0.5], &[1], &[0]);
        assert!(is_feasible(&AssignmentMatrix::zeros(1, 2), &s, 1e-12).unwrap());
        let s = spec1(&[0.5], &[1], &[2]);
        let x = AssignmentMatrix::from_rows(&[vec![0.0, 2.0]]);
        assert!(is_feasible(&x, &s, 0.0).unwrap());
        let x = AssignmentMatrix::from_rows(&[vec![0.0, 3.0]]);
        assert!(!is_feasible(&x, &s, 1e-12).unwrap());
        assert!(is_feasible(&AssignmentMatrix::zeros(2, 2), &s, 0.0).is_err());
    }

    #[test]
    fn log_w_examples() {
        let s = spec1(&[0.5], &[1], &[2]);
        let x = AssignmentMatrix::from_rows(&[vec![0.0, 2.0]]);
        assert!((log_w_sdpml(&x, &s).unwrap() - 2.0 * 0.5f64.ln()).abs() < 1e-15);
        assert!((log_g(&x, &s).unwrap() - 2.0 * 0.5f64.ln()).abs() < 1e-15);
        assert_eq!(log_w_sdpml(&AssignmentMatrix::zeros(1, 2), &s).unwrap(), 0.0);
        let s = spec1(&[0.5], &[1], &[1]);
        let x = AssignmentMatrix::from_rows(&[vec![1.0, 1.0]]);
        assert!(log_w_sdpml(&x, &s).unwrap().abs() < 1e-15);
        assert!(log_w_sdpml(&AssignmentMatrix::from_rows(&[vec![0.5, 1.0]]), &s).is_err());
    }

    #[test]
    fn log_g_fractional_example() {
        let s = spec1(&[0.3], &[1, 2], &[1, 1]);
        let x = AssignmentMatrix::from_rows(&[vec![0.0, 0.5, 0.5]]);
        let want = 0.5 * 3.0 * 0.3f64.ln() + 2f64.ln();
        assert!((log_g(&x, &s).unwrap() - want).abs() < 1e-15);
        assert_eq!(log_g(&AssignmentMatrix::zeros(1, 3), &s).unwrap(), 0.0);
        assert!(log_g(&AssignmentMatrix::from_rows(&[vec![-0.1, 0.5, 0.5]]), &s).is_err());
    }

    #[test]
    fn gradient_examples() {
        let s = spec1(&[0.3, 0.6], &[1, 2], &[1, 1]);
        let x = AssignmentMatrix::from_rows(&[vec![0.0, 0.0, 0.7], vec![0.4, 0.4, 0.0]]);
        let g = grad_log_g(&x, &s);
        assert!((g.get(0, 2) - 2.0 * 0.3f64.ln()).abs() < 1e-15);
        assert_eq!(g.get(1, 0), g.get(1, 1) - 0.6f64.ln());
    }

    #[test]
    fn enumeration_examples() {
        let s = spec1(&[0.5, 1.0], &[1], &[1]);
        assert_eq!(enumerate_integral_k(&s, 100, Some(0)).unwrap().len(), 2);
        let s = spec1(&[0.5, 1.0], &[1], &[0]);
        assert_eq!(enumerate_integral_k(&s, 100, Some(0)).unwrap().len(), 1);
        let s = spec1(&[0.5], &[1], &[2]);
        assert_eq!(enumerate_integral_k(&s, 100, None).unwrap().len(), 1);
        // cap
        let s = spec1(&[0.01, 0.5], &[1], &[1]);
        assert!(matches!(enumerate_integral_k(&s, 5, None), Err(PmlError::Guard(_))));
    }

    #[test]
    fn enumeration_unique_and_feasible() {
        let s = spec1(&[0.125, 0.25, 0.5, 1.0], &[1, 2], &[2, 1]);
        let all = enumerate_integral_k(&s, 100_000, None).unwrap();
        for x in &all {
            assert!(is_feasible(x, &s, 1e-12).unwrap());
        }
        let mut keys: Vec<Vec<u64>> = all.iter().map(|x| x.data().iter().map(|v| *v as u64).collect()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), all.len());
        assert!((all.len() as f64).ln() <= log_k_upper_bound(&s) + 1e-12);
    }

    #[test]
    fn dpml_sum_examples() {
        let g = ProbabilityGrid::build(4, 1.0).unwrap(); // levels 2^-k
        let mg = FrequencyGrid::build(2, 1.0).unwrap();
        let dp = discretize_profile(&Profile::new(vec![(1, 2)]).unwrap(), &mg).unwrap();
        let spec = FeasibleSetSpec::from_grid(&g, &dp, Variant::Integral).unwrap();
        let q = disc(&DenseDistribution::uniform(2), &g);
        let v = log_dpml_sum(&q, &dp, &spec, 1000).unwrap();
        assert!((v - 0.5f64.ln()).abs() < 1e-14);

        let mg = FrequencyGrid::build(3, 1.0).unwrap();
        let dp = discretize_profile(&Profile::new(vec![(3, 1)]).unwrap(), &mg).unwrap();
        let spec = FeasibleSetSpec::from_grid(&g, &dp, Variant::Integral).unwrap();
        let q = disc(&DenseDistribution::new(vec![1.0]).unwrap(), &g);
        assert!(log_dpml_sum(&q, &dp, &spec, 1000).unwrap().abs() < 1e-14);

        let mg = FrequencyGrid::build(1, 1.0).unwrap();
        let dp = discretize_profile(&Profile::new(vec![(1, 1)]).unwrap(), &mg).unwrap();
        let spec = FeasibleSetSpec::from_grid(&g, &dp, Variant::Integral).unwrap();
        let p = DenseDistribution::new(vec![0.5, 0.25, 0.25]).unwrap();
        let q = disc(&p, &g);
        let v = log_dpml_sum(&q, &dp, &spec, 1000).unwrap();
        assert!((v - exact_profile_logprob(&p, &dp.to_profile()).unwrap()).abs() < 1e-14);
        assert!(v.abs() < 1e-14); // three placements summing to 1
    }

    #[test]
    fn extended_structure_enforced() {
        let base = spec1(&[0.25, 0.5], &[1], &[1]);
        let ext = base.extended(&[Some(vec![0.375])]).unwrap();
        let mut x = AssignmentMatrix::zeros(3, 2);
        x.set(2, 1, 1.0);
        assert!(is_feasible(&x, &ext, 1e-12).unwrap());
        x.set(2, 0, 1.0);
        assert!(!is_feasible(&x, &ext, 1e-12).unwrap());
    }

    fn interior_point() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (1usize..4, 1usize..4).prop_flat_map(|(r, c)| {
            (proptest::collection::vec(0.001f64..1.0, r), proptest::collection::vec(1e-3f64..5.0, r * (c + 1)))
        })
    }

    proptest! {
        #[test]
        fn gradient_matches_central_differences((lv, xs) in interior_point()) {
            let rows = lv.len();
            let cols = xs.len() / rows;
            let s = FeasibleSetSpec::new(
                lv.iter().map(|&v| vec![v]).collect(),
                (1..cols as u64).map(|m| vec![m]).collect(),
                vec![0; cols - 1],
                Variant::Fractional,
            ).unwrap();
            let x = AssignmentMatrix { rows, cols, data: xs };
            let g = grad_log_g(&x, &s);
            let h = 1e-6;
            for k in 0..x.data.len() {
                let mut a = x.clone();
                let mut b = x.clone();
                a.data[k] += h;
                b.data[k] -= h;
                let fd = (log_g(&a, &s).unwrap() - log_g(&b, &s).unwrap()) / (2.0 * h);
                let rel = (fd - g.data[k]).abs() / g.data[k].abs().max(1.0);
                prop_assert!(rel <= 1e-5, "entry {k}: fd {fd} vs {}", g.data[k]);
            }
        }

        #[test]
        fn log_g_midpoint_concave((lv, xs) in interior_point(), ys in proptest::collection::vec(0.0f64..5.0, 16)) {
            let rows = lv.len();
            let cols = xs.len() / rows;
            let s = FeasibleSetSpec::new(
                lv.iter().map(|&v| vec![v]).collect(),
                (1..cols as u64).map(|m| vec![m]).collect(),
                vec![0; cols - 1],
                Variant::Fractional,
            ).unwrap();
            let x = AssignmentMatrix { rows, cols, data: xs.clone() };
            let y = AssignmentMatrix { rows, cols, data: ys[..xs.len()].to_vec() };
            let mid = AssignmentMatrix { rows, cols, data: xs.iter().zip(&ys).map(|(a, b)| 0.5 * (a + b)).collect() };
            let lhs = log_g(&mid, &s).unwrap();
            let rhs = 0.5 * (log_g(&x, &s).unwrap() + log_g(&y, &s).unwrap());
            prop_assert!(lhs >= rhs - 1e-9);
        }
    }
}
