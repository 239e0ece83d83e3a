//! Floor-and-regroup rounding of a fractional assignment.

use crate::error::{invalid, Result};
use crate::sdpml::{is_feasible, AssignmentMatrix, FeasibleSetSpec, Variant};

/// Values within this distance of an integer are snapped before flooring.
pub const SNAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RoundedSolution {
    /// Integral, `(b₁ + b₂) × (b₂ + 1)`.
    pub x: AssignmentMatrix,
    /// Level tuple of appended row `b₁ + j`; all zeros when column `j` needed none.
    pub extra_levels: Vec<Vec<f64>>,
    /// Extended spec matching `x`.
    pub spec_ext: FeasibleSetSpec,
}

fn snap(v: f64) -> f64 {
    let r = v.round();
    if (v - r).abs() <= SNAP {
        r
    } else {
        v
    }
}

/// Floors every base entry, then moves the fractional remainder of each
/// frequency column `j` onto a fresh row whose level is the mass-weighted
/// mean of the levels it came from (per coordinate).
///
/// Column sums are restored exactly and seen-column mass is conserved;
/// fractional unseen entries are dropped.
///
/// # Errors
///
/// Rejects inputs that are not in `K^f_{φ′}` within `1e-9`.
pub fn round(xf: &AssignmentMatrix, spec: &FeasibleSetSpec) -> Result<RoundedSolution> {
    let fspec = spec.with_variant(Variant::Fractional)?;
    if !is_feasible(xf, &fspec, 1e-9)? {
        return invalid("rounding needs a feasible fractional matrix");
    }
    let (b1, cols, d) = (spec.rows(), spec.cols(), spec.d());
    let b2 = cols - 1;
    let mut x = AssignmentMatrix::zeros(b1 + b2, cols);
    let mut frac = AssignmentMatrix::zeros(b1, cols);
    for i in 0..b1 {
        for j in 0..cols {
            let v = snap(xf.get(i, j).max(0.0));
            let f = v.floor();
            x.set(i, j, f);
            frac.set(i, j, v - f);
        }
    }
    let mut extra = vec![vec![0.0; d]; b2];
    let mut extra_opt: Vec<Option<Vec<f64>>> = vec![None; b2];
    for j in 1..cols {
        let floored: f64 = (0..b1).map(|i| x.get(i, j)).sum();
        let r = spec.phi_prime()[j - 1] as f64 - floored;
        if r < 0.5 {
            continue;
        }
        let w: f64 = (0..b1).map(|i| frac.get(i, j)).sum();
        let mut lv = vec![0.0; d];
        for (k, slot) in lv.iter_mut().enumerate() {
            let mass: f64 = (0..b1).map(|i| frac.get(i, j) * spec.levels()[i][k]).sum();
            // `w` equals `r` up to solver noise; the mean stays inside the grid range.
            let lo = spec.levels().iter().map(|l| l[k]).fold(f64::INFINITY, f64::min);
            let hi = spec.levels().iter().map(|l| l[k]).fold(0.0, f64::max);
            *slot = if w > 0.0 { (mass / r).clamp(lo, hi) } else { lo };
        }
        x.set(b1 + j - 1, j, r.round());
        extra[j - 1] = lv.clone();
        extra_opt[j - 1] = Some(lv);
    }
    let spec_ext = spec.with_variant(Variant::Integral)?.extended(&extra_opt)?;
    Ok(RoundedSolution { x, extra_levels: extra, spec_ext })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdpml::probability_term;

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
    fn integral_input_unchanged() {
        let s = spec1(&[0.25, 0.5], &[1], &[2]);
        let xf = AssignmentMatrix::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        let r = round(&xf, &s).unwrap();
        assert_eq!(r.x.get(0, 0), 1.0);
        assert_eq!(r.x.get(2, 1), 0.0);
        assert_eq!(r.extra_levels, vec![vec![0.0]]);
    }

    #[test]
    fn half_and_half_example() {
        let s = spec1(&[0.5, 0.25], &[1], &[1]);
        let xf = AssignmentMatrix::from_rows(&[vec![0.0, 0.5], vec![0.0, 0.5]]);
        let r = round(&xf, &s).unwrap();
        assert_eq!(r.extra_levels, vec![vec![0.375]]);
        assert_eq!(r.x.get(2, 1), 1.0);
        assert!((r.spec_ext.budget_usage(&r.x)[0] - 0.375).abs() < 1e-15);
        assert!(is_feasible(&r.x, &r.spec_ext, 1e-12).unwrap());
    }

    #[test]
    fn residual_two() {
        let s = spec1(&[0.1, 0.2, 0.4], &[1], &[3]);
        let xf = AssignmentMatrix::from_rows(&[vec![0.0, 1.5], vec![0.0, 0.7], vec![0.0, 0.8]]);
        let r = round(&xf, &s).unwrap();
        assert_eq!(r.x.get(3, 1), 2.0);
        let want = (0.5 * 0.1 + 0.7 * 0.2 + 0.8 * 0.4) / 2.0;
        assert!((r.extra_levels[0][0] - want).abs() < 1e-15);
        assert!(probability_term(&xf, &s) <= probability_term(&r.x, &r.spec_ext) + 1e-12);
    }

    #[test]
    fn snapping() {
        let s = spec1(&[0.1, 0.2], &[1], &[3]);
        let xf = AssignmentMatrix::from_rows(&[vec![0.0, 3.0 - 1e-11], vec![0.0, 1e-11]]);
        let r = round(&xf, &s).unwrap();
        assert_eq!(r.x.get(0, 1), 3.0);
        assert_eq!(r.x.get(2, 1), 0.0);
    }

    #[test]
    fn rejects_infeasible() {
        let s = spec1(&[0.5], &[1], &[1]);
        assert!(round(&AssignmentMatrix::from_rows(&[vec![0.0, 0.5]]), &s).is_err());
    }
}
