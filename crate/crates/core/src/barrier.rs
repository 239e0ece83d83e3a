//! Log-barrier Newton method on the Lagrangian dual of `max ln g` over `K^f_{φ′}`.
//!
//! With `μ_j` for the column sums (`j ≥ 1`, `φ′_j > 0`) and `λ_k ≥ 0` for the
//! budgets, each row of `ln g` is maximized in closed form, leaving
//!
//! ```text
//! min  Σ_j φ′_j μ_j + Σ_k λ_k
//! s.t. A_i(μ) - Σ_k λ_k ζ_i(k) ≤ 0   for every row i,
//!      A_i(μ) = ln(1 + Σ_j exp(c_ij - μ_j)).
//! ```
//!
//! Any strictly feasible `(μ, λ)` gives an upper bound on the relaxed optimum.
//! Points on the barrier's central path also give a primal matrix
//! `X_ij = p_ij / (t s_i)`, with `p_i` the softmax inside `A_i` and
//! `s_i` the constraint slack. Its column sums are exact and its budgets sit
//! strictly inside, so the bound minus `ln g(X)` is a checkable gap.

use nalgebra::{DMatrix, DVector};

use crate::numeric::log_sum_exp;
use crate::sdpml::{log_g_unchecked, AssignmentMatrix, FeasibleSetSpec};

pub(crate) struct BarrierResult {
    pub x: AssignmentMatrix,
    pub objective: f64,
    pub dual_bound: f64,
    pub newton_steps: usize,
}

struct Dual<'a> {
    spec: &'a FeasibleSetSpec,
    /// Columns with `φ′_j > 0`.
    cols: Vec<usize>,
    phi: Vec<f64>,
}

/// Per-row quantities at one dual point.
struct RowEval {
    slack: Vec<f64>,
    /// Softmax weights over `cols`, column 0 omitted.
    p: Vec<Vec<f64>>,
}

impl Dual<'_> {
    fn dim(&self) -> usize {
        self.cols.len() + self.spec.d()
    }

    fn eval(&self, y: &[f64]) -> Option<RowEval> {
        let (nc, d) = (self.cols.len(), self.spec.d());
        if y[nc..].iter().any(|&l| !(l > 0.0)) {
            return None;
        }
        let mut slack = Vec::with_capacity(self.spec.rows());
        let mut p = Vec::with_capacity(self.spec.rows());
        let mut terms = vec![0.0; nc + 1];
        for i in 0..self.spec.rows() {
            terms[0] = 0.0;
            for (t, (&j, &mu)) in terms[1..].iter_mut().zip(self.cols.iter().zip(y)) {
                *t = self.spec.coef(i, j) - mu;
            }
            let a = log_sum_exp(&terms);
            let cost: f64 = (0..d).map(|k| y[nc + k] * self.spec.levels()[i][k]).sum();
            let s = cost - a;
            if !(s > 0.0) {
                return None;
            }
            slack.push(s);
            p.push(terms[1..].iter().map(|&t| (t - a).exp()).collect());
        }
        Some(RowEval { slack, p })
    }

    fn dual_value(&self, y: &[f64]) -> f64 {
        let nc = self.cols.len();
        self.phi.iter().zip(y).map(|(f, m)| f * m).sum::<f64>() + y[nc..].iter().sum::<f64>()
    }

    fn barrier(&self, y: &[f64], t: f64) -> Option<f64> {
        let ev = self.eval(y)?;
        let nc = self.cols.len();
        Some(
            t * self.dual_value(y)
                - ev.slack.iter().map(|s| s.ln()).sum::<f64>()
                - y[nc..].iter().map(|l| l.ln()).sum::<f64>(),
        )
    }

    fn grad_hess(&self, y: &[f64], t: f64, ev: &RowEval) -> (DVector<f64>, DMatrix<f64>) {
        let (nc, d, m) = (self.cols.len(), self.spec.d(), self.dim());
        let mut g = DVector::zeros(m);
        let mut h = DMatrix::zeros(m, m);
        for j in 0..nc {
            g[j] = t * self.phi[j];
        }
        for k in 0..d {
            g[nc + k] = t - 1.0 / y[nc + k];
            h[(nc + k, nc + k)] = 1.0 / (y[nc + k] * y[nc + k]);
        }
        let mut v = vec![0.0; m];
        for (i, (s, p)) in ev.slack.iter().zip(&ev.p).enumerate() {
            // Gradient of the constraint `A_i - λ·ζ_i` is (-p, -ζ_i).
            v[..nc].iter_mut().zip(p).for_each(|(a, &b)| *a = -b);
            for k in 0..d {
                v[nc + k] = -self.spec.levels()[i][k];
            }
            for a in 0..m {
                g[a] += v[a] / s;
            }
            let s2 = s * s;
            for a in 0..m {
                if v[a] == 0.0 {
                    continue;
                }
                for b in 0..m {
                    h[(a, b)] += v[a] * v[b] / s2;
                }
            }
            for a in 0..nc {
                h[(a, a)] += p[a] / s;
                for b in 0..nc {
                    h[(a, b)] -= p[a] * p[b] / s;
                }
            }
        }
        (g, h)
    }

    /// Primal point read off the central path, columns rescaled to their exact sums.
    fn primal(&self, ev: &RowEval, t: f64) -> AssignmentMatrix {
        let spec = self.spec;
        let mut x = AssignmentMatrix::zeros(spec.rows(), spec.cols());
        for (i, (s, p)) in ev.slack.iter().zip(&ev.p).enumerate() {
            let r = 1.0 / (t * s);
            let p0 = 1.0 - p.iter().sum::<f64>();
            x.set(i, 0, r * p0.max(0.0));
            for (&j, &pj) in self.cols.iter().zip(p) {
                x.set(i, j, r * pj);
            }
        }
        for (&j, &f) in self.cols.iter().zip(&self.phi) {
            let sum = x.col_sum(j);
            if sum > 0.0 {
                for i in 0..spec.rows() {
                    x.set(i, j, x.get(i, j) * f / sum);
                }
            }
        }
        // Rescaling can overshoot a budget by rounding noise; the unseen column absorbs it.
        for k in 0..spec.d() {
            let used = spec.budget_usage(&x)[k];
            if used > 1.0 {
                let unseen: f64 = (0..spec.rows()).map(|i| x.get(i, 0) * spec.levels()[i][k]).sum();
                if unseen > 0.0 {
                    let scale = ((unseen - (used - 1.0)) / unseen).max(0.0);
                    for i in 0..spec.rows() {
                        x.set(i, 0, x.get(i, 0) * scale);
                    }
                }
            }
        }
        x
    }

    /// Strictly feasible start: `λ·ζ_i ≥ 1` for every row and `μ_j` large.
    fn start(&self) -> Vec<f64> {
        let (nc, d) = (self.cols.len(), self.spec.d());
        let mut y = vec![0.0; nc + d];
        for k in 0..d {
            let zmin = self.spec.levels().iter().map(|l| l[k]).fold(f64::INFINITY, f64::min);
            y[nc + k] = 1.0 / (d as f64 * zmin);
        }
        let spread = (nc.max(1) as f64).ln() + 2.0;
        for (a, &j) in self.cols.iter().enumerate() {
            y[a] = (0..self.spec.rows()).map(|i| self.spec.coef(i, j)).fold(f64::NEG_INFINITY, f64::max) + spread;
        }
        y
    }
}

fn newton_direction(g: &DVector<f64>, h: DMatrix<f64>) -> Option<DVector<f64>> {
    let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    if let Some(c) = h.clone().cholesky() {
        return Some(-c.solve(g));
    }
    let mut reg = h;
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-12 * scale;
    }
    reg.cholesky().map(|c| -c.solve(g))
}

const MAX_CENTERING_STEPS: usize = 200;

/// Follows the central path until the dual bound is within `delta` of `ln g(X)`.
pub(crate) fn solve(spec: &FeasibleSetSpec, delta: f64, max_newton: usize) -> BarrierResult {
    let cols: Vec<usize> = (1..spec.cols()).filter(|&j| spec.phi_prime()[j - 1] > 0).collect();
    if cols.is_empty() {
        let x = AssignmentMatrix::zeros(spec.rows(), spec.cols());
        return BarrierResult { x, objective: 0.0, dual_bound: 0.0, newton_steps: 0 };
    }
    let phi = cols.iter().map(|&j| spec.phi_prime()[j - 1] as f64).collect();
    let dual = Dual { spec, cols, phi };
    let mut y = dual.start();
    let constraints = (spec.rows() + spec.d()) as f64;
    let mut t = constraints / dual.dual_value(&y).abs().max(1.0);
    let mut steps = 0;
    let mut best: Option<BarrierResult> = None;
    loop {
        // Centering; the barrier value is O(t), so progress below its rounding noise counts as converged.
        let mut inner = 0;
        while steps < max_newton && inner < MAX_CENTERING_STEPS {
            let ev = dual.eval(&y).expect("iterates stay strictly feasible");
            let (g, h) = dual.grad_hess(&y, t, &ev);
            let Some(dir) = newton_direction(&g, h) else { break };
            let dec = -g.dot(&dir);
            let f0 = dual.barrier(&y, t).expect("feasible");
            if !(dec > 1e-9 && dec > 1e-13 * f0.abs()) {
                break;
            }
            let mut alpha = 1.0;
            let mut moved = false;
            while alpha > 1e-10 {
                let trial: Vec<f64> = y.iter().zip(dir.iter()).map(|(a, b)| a + alpha * b).collect();
                if let Some(ft) = dual.barrier(&trial, t) {
                    if ft <= f0 - 0.25 * alpha * dec {
                        y = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            steps += 1;
            inner += 1;
            if !moved {
                break;
            }
        }
        let ev = dual.eval(&y).expect("feasible");
        let x = dual.primal(&ev, t);
        let objective = log_g_unchecked(&x, spec);
        let bound = dual.dual_value(&y);
        let gap = bound - objective;
        let improved = best.as_ref().is_none_or(|b| gap < b.dual_bound - b.objective);
        if improved {
            best = Some(BarrierResult { x, objective, dual_bound: bound, newton_steps: steps });
        }
        if gap <= delta || steps >= max_newton || t > 1e18 {
            let mut out = best.expect("set above");
            out.newton_steps = steps;
            return out;
        }
        t *= 8.0;
    }
}
