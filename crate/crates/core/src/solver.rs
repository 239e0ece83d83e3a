//! Maximization of `ln g` over the fractional polytope `K^f_{φ′}`.
//!
//! The default method is a barrier method on the dual (see `barrier`), whose
//! certificate is the dual bound minus `ln g`. Frank-Wolfe ascent with an
//! exact linear maximization oracle is kept as an alternative; its
//! certificate is the Frank-Wolfe gap.
//!
//! The linear maximization oracle is exact. In one dimension the polytope is a
//! multiple-choice knapsack with a single budget row, solved greedily on the
//! upper hull of each column; with `d ≥ 2` budgets it falls back to an LP.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::barrier;
use crate::error::{invalid, PmlError, Result};
use crate::sdpml::{grad_log_g, is_feasible, log_g_unchecked, AssignmentMatrix, FeasibleSetSpec, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Newton path following on the dual.
    #[default]
    Barrier,
    FrankWolfe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Stop once the duality gap is at most `delta`.
    pub delta: f64,
    /// Newton steps for [`Method::Barrier`], iterations for [`Method::FrankWolfe`].
    pub max_iters: usize,
    /// Tolerance for LMO comparisons.
    pub lmo_tol: f64,
    pub method: Method,
}

impl SolverConfig {
    /// `δ = 1e-6 · n′ ln n′` (floored at `1e-9`), `n′` summed over coordinates.
    pub fn for_spec(spec: &FeasibleSetSpec) -> Self {
        let np: u64 = spec.n_prime().iter().sum();
        let np = np as f64;
        let delta = if np > 1.0 { 1e-6 * np * np.ln() } else { 1e-9 };
        Self { delta: delta.max(1e-9), max_iters: 200_000, lmo_tol: 1e-10, method: Method::Barrier }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub x: AssignmentMatrix,
    /// `ln g(x)`.
    pub objective: f64,
    /// Upper bound on `max ln g - objective`: dual bound minus objective, or
    /// the final Frank-Wolfe gap `⟨∇ ln g(x), s - x⟩`.
    pub certified_gap: f64,
    pub iterations: usize,
    /// `certified_gap ≤ delta`.
    pub certified: bool,
}

fn check_fractional(spec: &FeasibleSetSpec) -> Result<()> {
    if !matches!(spec.variant(), Variant::Fractional) {
        return invalid("solver needs the fractional variant");
    }
    Ok(())
}

/// `argmax ⟨G, S⟩` over `K^f_{φ′}`. Ties go to the lowest row index.
pub fn lmo(g: &AssignmentMatrix, spec: &FeasibleSetSpec, tol: f64) -> Result<AssignmentMatrix> {
    check_fractional(spec)?;
    if spec.d() == 1 {
        lmo_knapsack(g, spec, tol)
    } else {
        lmo_lp(g, spec)
    }
}

fn level(spec: &FeasibleSetSpec, i: usize) -> f64 {
    spec.levels()[i][0]
}

struct Segment {
    slope: f64,
    col: usize,
    from: usize,
    to: usize,
}

/// Greedy LMO for a single budget row.
///
/// Each seen column starts at its cheapest row and climbs the upper concave
/// hull of `(ζ_i, G_ij)`; the unseen column buys budget at the best ratio
/// `G_i0/ζ_i` without limit. Segments are bought in decreasing slope order
/// until the budget or the positive slopes run out, so at most one column
/// is split between two rows.
fn lmo_knapsack(g: &AssignmentMatrix, spec: &FeasibleSetSpec, tol: f64) -> Result<AssignmentMatrix> {
    let rows = spec.rows();
    let mut s = AssignmentMatrix::zeros(rows, spec.cols());
    let lowest = (0..rows).filter(|&i| level(spec, i) > 0.0).fold(None, |best: Option<usize>, i| match best {
        Some(b) if level(spec, b) <= level(spec, i) => Some(b),
        _ => Some(i),
    });
    let Some(lowest) = lowest else {
        return invalid("no positive level");
    };
    let zmin = level(spec, lowest);

    let mut pos = vec![0usize; spec.cols()];
    let mut segs: Vec<Segment> = Vec::new();
    let mut used = 0.0;
    for j in 1..spec.cols() {
        let phi = spec.phi_prime()[j - 1] as f64;
        if phi == 0.0 {
            continue;
        }
        // Leftmost hull point: cheapest level, best score, lowest index.
        let mut a = lowest;
        for i in 0..rows {
            if level(spec, i) == zmin && g.get(i, j) > g.get(a, j) + tol {
                a = i;
            }
        }
        pos[j] = a;
        used += phi * zmin;
        loop {
            let mut best: Option<(usize, f64)> = None;
            for b in 0..rows {
                let dz = level(spec, b) - level(spec, a);
                if dz <= 0.0 {
                    continue;
                }
                let slope = (g.get(b, j) - g.get(a, j)) / dz;
                if best.is_none_or(|(_, bs)| slope > bs + tol) {
                    best = Some((b, slope));
                }
            }
            match best {
                Some((b, slope)) if slope > tol => {
                    segs.push(Segment { slope, col: j, from: a, to: b });
                    a = b;
                }
                _ => break,
            }
        }
    }
    if used > 1.0 + 1e-12 {
        return Err(PmlError::Infeasible("column mass exceeds the budget at the lowest level".into()));
    }
    let mut unseen: Option<(usize, f64)> = None;
    for i in 0..rows {
        let z = level(spec, i);
        if z > 0.0 {
            let r = g.get(i, 0) / z;
            if r > tol && unseen.is_none_or(|(_, br)| r > br + tol) {
                unseen = Some((i, r));
            }
        }
    }
    if let Some((i, r)) = unseen {
        segs.push(Segment { slope: r, col: 0, from: i, to: i });
    }
    // Stable: equal slopes keep column order, then hull order.
    segs.sort_by(|a, b| b.slope.partial_cmp(&a.slope).expect("finite slopes"));

    let mut left = (1.0 - used).max(0.0);
    let mut split: Option<(usize, usize, f64)> = None;
    for seg in &segs {
        if left <= 0.0 {
            break;
        }
        if seg.col == 0 {
            s.set(seg.from, 0, left / level(spec, seg.from));
            break;
        }
        if pos[seg.col] != seg.from {
            continue;
        }
        let phi = spec.phi_prime()[seg.col - 1] as f64;
        let cost = phi * (level(spec, seg.to) - level(spec, seg.from));
        if cost <= left {
            pos[seg.col] = seg.to;
            left -= cost;
        } else {
            split = Some((seg.col, seg.to, left / cost));
            break;
        }
    }
    for j in 1..spec.cols() {
        let phi = spec.phi_prime()[j - 1] as f64;
        if phi == 0.0 {
            continue;
        }
        match split {
            Some((c, to, t)) if c == j => {
                s.set(pos[j], j, phi * (1.0 - t));
                s.set(to, j, phi * t);
            }
            _ => s.set(pos[j], j, phi),
        }
    }
    Ok(s)
}

/// LP-based LMO for any number of budget rows.
pub fn lmo_lp(g: &AssignmentMatrix, spec: &FeasibleSetSpec) -> Result<AssignmentMatrix> {
    let (rows, cols) = (spec.rows(), spec.cols());
    let mut p = Problem::new(OptimizationDirection::Maximize);
    let mut vars = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let ub = if j == 0 { f64::INFINITY } else { spec.phi_prime()[j - 1] as f64 };
            vars.push(p.add_var(g.get(i, j), (0.0, ub)));
        }
    }
    for j in 1..cols {
        let terms: Vec<_> = (0..rows).map(|i| (vars[i * cols + j], 1.0)).collect();
        p.add_constraint(&terms[..], ComparisonOp::Eq, spec.phi_prime()[j - 1] as f64);
    }
    for k in 0..spec.d() {
        let mut terms = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let z = spec.levels()[i][k];
            if z > 0.0 {
                for j in 0..cols {
                    terms.push((vars[i * cols + j], z));
                }
            }
        }
        p.add_constraint(&terms[..], ComparisonOp::Le, 1.0);
    }
    let sol = p.solve().map_err(|e| PmlError::Infeasible(format!("linear oracle: {e}")))?;
    let mut s = AssignmentMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            s.set(i, j, sol[vars[i * cols + j]].max(0.0));
        }
    }
    Ok(s)
}

/// Row whose log-levels are closest to `target` (squared distance), lowest index on ties.
fn nearest_row(spec: &FeasibleSetSpec, target: &[f64]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, ll) in spec.log_levels().iter().enumerate() {
        let dist: f64 = ll.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist < best.1 {
            best = (i, dist);
        }
    }
    best.0
}

/// Row with the largest levels not above `target` in every coordinate.
fn floor_row(spec: &FeasibleSetSpec, target: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, ll) in spec.log_levels().iter().enumerate() {
        if ll.iter().zip(target).all(|(a, b)| *a <= *b) {
            let s: f64 = ll.iter().sum();
            if best.is_none_or(|(_, bs)| s > bs) {
                best = Some((i, s));
            }
        }
    }
    best.map(|b| b.0)
}

/// Feasible starting point.
///
/// Column `j` goes to the row nearest `m_j/n′` in log space. If that
/// overdraws a budget, every column target is scaled by a common factor
/// found by bisection: in one dimension each column is split between the
/// two levels bracketing its target so the budget binds exactly; otherwise
/// each column drops to the row below its target.
///
/// # Errors
///
/// [`PmlError::Infeasible`] when the columns overdraw a budget even at the lowest level.
pub fn initial_point(spec: &FeasibleSetSpec) -> Result<AssignmentMatrix> {
    check_fractional(spec)?;
    let (rows, cols, d) = (spec.rows(), spec.cols(), spec.d());
    let np = spec.n_prime();
    let active: Vec<usize> = (1..cols).filter(|&j| spec.phi_prime()[j - 1] > 0).collect();
    let phi = |j: usize| spec.phi_prime()[j - 1] as f64;

    let bottom = (0..rows)
        .min_by(|&a, &b| {
            let sa: f64 = spec.log_levels()[a].iter().sum();
            let sb: f64 = spec.log_levels()[b].iter().sum();
            sa.partial_cmp(&sb).expect("finite levels")
        })
        .ok_or_else(|| PmlError::Invalid("no rows".into()))?;
    let total: f64 = active.iter().map(|&j| phi(j)).sum();
    if spec.levels()[bottom].iter().any(|&z| total * z > 1.0 + 1e-12) {
        return Err(PmlError::Infeasible("profile mass exceeds the budget at the lowest level".into()));
    }

    let start: Vec<usize> = active
        .iter()
        .map(|&j| {
            let target: Vec<f64> = (0..d)
                .map(|k| (spec.freqs()[j - 1][k].max(1) as f64 / np[k].max(1) as f64).ln())
                .collect();
            nearest_row(spec, &target)
        })
        .collect();
    let mut x = AssignmentMatrix::zeros(rows, cols);
    for (&j, &i) in active.iter().zip(&start) {
        x.set(i, j, phi(j));
    }
    if spec.budget_usage(&x).iter().all(|&u| u <= 1.0) {
        return Ok(x);
    }

    if d == 1 {
        let mut order: Vec<usize> = (0..rows).collect();
        order.sort_by(|&a, &b| level(spec, a).partial_cmp(&level(spec, b)).expect("finite").then(a.cmp(&b)));
        let (zlo, zhi) = (level(spec, order[0]), level(spec, order[rows - 1]));
        let usage = |c: f64| -> f64 {
            active.iter().zip(&start).map(|(&j, &i)| phi(j) * (level(spec, i) * c).clamp(zlo, zhi)).sum()
        };
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if usage(mid) <= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut x = AssignmentMatrix::zeros(rows, cols);
        for (&j, &i) in active.iter().zip(&start) {
            let v = (level(spec, i) * lo).clamp(zlo, zhi);
            let b = order.partition_point(|&r| level(spec, r) < v).min(rows - 1);
            let hi_row = order[b];
            if level(spec, hi_row) == v || b == 0 {
                x.set(hi_row, j, x.get(hi_row, j) + phi(j));
                continue;
            }
            let lo_row = order[b - 1];
            let (za, zb) = (level(spec, lo_row), level(spec, hi_row));
            let t = ((v - za) / (zb - za)).clamp(0.0, 1.0);
            x.set(lo_row, j, x.get(lo_row, j) + phi(j) * (1.0 - t));
            x.set(hi_row, j, x.get(hi_row, j) + phi(j) * t);
        }
        return Ok(x);
    }

    let place = |shift: f64| -> AssignmentMatrix {
        let mut x = AssignmentMatrix::zeros(rows, cols);
        for (&j, &i) in active.iter().zip(&start) {
            let target: Vec<f64> = spec.log_levels()[i].iter().map(|l| l - shift).collect();
            let r = floor_row(spec, &target).unwrap_or(bottom);
            x.set(r, j, x.get(r, j) + phi(j));
        }
        x
    };
    let fits = |x: &AssignmentMatrix| spec.budget_usage(x).iter().all(|&u| u <= 1.0 + 1e-12);
    let mut hi = 1.0;
    while !fits(&place(hi)) {
        hi *= 2.0;
        if hi > 1e4 {
            return Ok(place(f64::INFINITY));
        }
    }
    let mut lo = 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if fits(&place(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(place(hi))
}

/// Maximizes `ln g` over `K^f_{φ′}` with the method in `cfg`.
///
/// Stops when the certified gap is at most `cfg.delta`; hitting `max_iters`
/// first returns a result with `certified = false`.
///
/// # Errors
///
/// Invalid configuration, a non-fractional spec, or a profile that does not
/// fit the budget.
pub fn maximize_g(spec: &FeasibleSetSpec, cfg: &SolverConfig) -> Result<SolveResult> {
    if !(cfg.delta > 0.0) || cfg.max_iters == 0 {
        return invalid("solver needs delta > 0 and max_iters ≥ 1");
    }
    match cfg.method {
        Method::FrankWolfe => frank_wolfe(spec, cfg),
        Method::Barrier => {
            // Infeasible profiles are reported the same way for both methods.
            initial_point(spec)?;
            let r = barrier::solve(spec, cfg.delta, cfg.max_iters);
            let gap = (r.dual_bound - r.objective).max(0.0);
            Ok(SolveResult {
                certified: gap <= cfg.delta,
                x: r.x,
                objective: r.objective,
                certified_gap: gap,
                iterations: r.newton_steps,
            })
        }
    }
}

/// Frank-Wolfe with Armijo backtracking from `γ = 2/(k+2)`.
fn frank_wolfe(spec: &FeasibleSetSpec, cfg: &SolverConfig) -> Result<SolveResult> {
    let mut x = initial_point(spec)?;
    let mut f = log_g_unchecked(&x, spec);
    let mut iterations = 0;
    let mut gap;
    loop {
        let grad = grad_log_g(&x, spec);
        let s = lmo(&grad, spec, cfg.lmo_tol)?;
        gap = (grad.dot(&s) - grad.dot(&x)).max(0.0);
        if gap <= cfg.delta || iterations >= cfg.max_iters {
            break;
        }
        let mut gamma = 2.0 / (iterations as f64 + 2.0);
        let mut trial = x.clone();
        loop {
            for ((t, &xv), &sv) in trial.data_mut().iter_mut().zip(x.data()).zip(s.data()) {
                *t = (xv + gamma * (sv - xv)).max(0.0);
            }
            let ft = log_g_unchecked(&trial, spec);
            if ft >= f + 0.5 * gamma * gap {
                x = trial;
                f = ft;
                break;
            }
            gamma *= 0.5;
            if gamma < 1e-18 {
                break;
            }
        }
        iterations += 1;
    }
    debug_assert!(is_feasible(&x, spec, 1e-9).unwrap_or(false));
    Ok(SolveResult { certified: gap <= cfg.delta, x, objective: f, certified_gap: gap, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdpml::{enumerate_integral_k, log_g};

    fn spec1(levels: &[f64], freqs: &[u64], phi: &[u64]) -> FeasibleSetSpec {
        FeasibleSetSpec::new(
            levels.iter().map(|&v| vec![v]).collect(),
            freqs.iter().map(|&m| vec![m]).collect(),
            phi.to_vec(),
            Variant::Fractional,
        )
        .unwrap()
    }

    #[test]
    fn lmo_examples() {
        let s = spec1(&[0.25, 0.5], &[1], &[1]);
        let g = AssignmentMatrix::zeros(2, 2);
        let v = lmo(&g, &s, 1e-12).unwrap();
        assert!(is_feasible(&v, &s, 1e-12).unwrap());
        assert_eq!(g.dot(&v), 0.0);

        let g = AssignmentMatrix::from_rows(&[vec![0.0, 2.0], vec![0.0, 1.0]]);
        let v = lmo(&g, &s, 1e-12).unwrap();
        assert_eq!(v.get(0, 1), 1.0);

        let s = spec1(&[0.25, 0.5], &[1], &[0]);
        let g = AssignmentMatrix::from_rows(&[vec![0.0, 0.0], vec![3.0, 0.0]]);
        let v = lmo(&g, &s, 1e-12).unwrap();
        assert_eq!(v.get(1, 0), 2.0);
        assert_eq!(g.dot(&v), 6.0);
    }

    #[test]
    fn lmo_splits_one_column_at_the_budget() {
        let s = spec1(&[0.25, 0.5], &[1], &[3]);
        let g = AssignmentMatrix::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]);
        let v = lmo(&g, &s, 1e-12).unwrap();
        // 3 units: budget 1 allows 1 unit at 0.5, 2 at 0.25
        assert!((v.get(1, 1) - 1.0).abs() < 1e-12);
        assert!((v.get(0, 1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn greedy_and_lp_agree() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let rows = rng.gen_range(1..6);
            let mut lv: Vec<f64> = (0..rows).map(|i| 0.7f64.powi(i * 2 + 1)).collect();
            lv.reverse();
            let b2 = rng.gen_range(0..4);
            let phi: Vec<u64> = (0..b2).map(|_| rng.gen_range(0..3)).collect();
            let mass: f64 = phi.iter().sum::<u64>() as f64 * lv[0];
            if mass > 1.0 {
                continue;
            }
            let s = spec1(&lv, &(1..=b2 as u64).collect::<Vec<_>>(), &phi);
            let g = AssignmentMatrix::from_rows(
                &(0..rows).map(|_| (0..=b2).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect::<Vec<_>>(),
            );
            let a = lmo_knapsack(&g, &s, 1e-12).unwrap();
            let b = lmo_lp(&g, &s).unwrap();
            assert!(is_feasible(&a, &s, 1e-9).unwrap());
            assert!((g.dot(&a) - g.dot(&b)).abs() < 1e-7, "{} vs {}", g.dot(&a), g.dot(&b));
        }
    }

    #[test]
    fn initial_point_examples() {
        let s = spec1(&[0.25, 0.5, 1.0], &[1], &[0]);
        assert_eq!(initial_point(&s).unwrap(), AssignmentMatrix::zeros(3, 2));
        let s = spec1(&[0.125, 0.25, 0.5, 1.0], &[1], &[2]);
        let x = initial_point(&s).unwrap();
        assert_eq!(x.get(2, 1), 2.0);
        assert_eq!(s.budget_usage(&x)[0], 1.0);
        // Nearest rows 0.25 and 0.5 would use 1.25 of the budget.
        let s = spec1(&[0.125, 0.25, 0.5, 1.0], &[1, 2], &[3, 1]);
        let x = initial_point(&s).unwrap();
        let u = s.budget_usage(&x)[0];
        assert!(u <= 1.0 && u > 1.0 - 1e-12, "{u}");
        assert!(is_feasible(&x, &s, 1e-12).unwrap());
        let s = spec1(&[0.5, 1.0], &[1], &[3]);
        assert!(matches!(initial_point(&s), Err(PmlError::Infeasible(_))));
    }

    #[test]
    fn solver_beats_enumerated_integral_points() {
        let s = spec1(&[0.125, 0.25, 0.5, 1.0], &[1, 2], &[2, 0]);
        let cfg = SolverConfig::for_spec(&s);
        let r = maximize_g(&s, &cfg).unwrap();
        assert!(r.certified, "gap {}", r.certified_gap);
        let ispec = s.with_variant(Variant::Integral).unwrap();
        let best = enumerate_integral_k(&ispec, 1_000_000, None)
            .unwrap()
            .iter()
            .map(|x| log_g(x, &ispec).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(r.objective >= best - cfg.delta, "{} < {}", r.objective, best);
    }

    #[test]
    fn frank_wolfe_objective_never_decreases() {
        let s = spec1(&[0.125, 0.25, 0.5, 1.0], &[1, 2], &[2, 1]);
        let mut last = f64::NEG_INFINITY;
        for iters in [1, 2, 5, 20, 100] {
            let cfg = SolverConfig { max_iters: iters, method: Method::FrankWolfe, ..SolverConfig::for_spec(&s) };
            let r = maximize_g(&s, &cfg).unwrap();
            assert!(r.objective >= last - 1e-12);
            last = r.objective;
        }
    }

    /// Each certificate bounds the other method's objective.
    #[test]
    fn barrier_and_frank_wolfe_agree() {
        let cases: [(&[f64], &[u64], &[u64]); 3] = [
            (&[0.125, 0.25, 0.5, 1.0], &[1, 2], &[2, 1]),
            (&[0.05, 0.1, 0.2, 0.4, 0.8], &[1, 2, 3], &[3, 1, 1]),
            (&[0.02, 0.05, 0.1, 0.3], &[1, 4], &[10, 0]),
        ];
        for (lv, fr, phi) in cases {
            let s = spec1(lv, fr, phi);
            let base = SolverConfig::for_spec(&s);
            let b = maximize_g(&s, &base).unwrap();
            let f = maximize_g(&s, &SolverConfig { method: Method::FrankWolfe, ..base }).unwrap();
            assert!(b.certified);
            assert!(is_feasible(&b.x, &s, 1e-9).unwrap());
            assert!(f.objective <= b.objective + b.certified_gap + 1e-12);
            assert!(b.objective <= f.objective + f.certified_gap + 1e-12);
        }
    }

    #[test]
    fn barrier_handles_two_budgets() {
        let levels = vec![vec![0.5, 0.25], vec![0.25, 0.5], vec![0.1, 0.1]];
        let freqs = vec![vec![1, 0], vec![0, 1], vec![1, 1]];
        let s = FeasibleSetSpec::new(levels, freqs, vec![1, 1, 1], Variant::Fractional).unwrap();
        let base = SolverConfig::for_spec(&s);
        let b = maximize_g(&s, &base).unwrap();
        assert!(b.certified && is_feasible(&b.x, &s, 1e-9).unwrap());
        let f = maximize_g(&s, &SolverConfig { method: Method::FrankWolfe, ..base }).unwrap();
        assert!(f.objective <= b.objective + b.certified_gap + 1e-12);
    }
}
