//! Level-set distributions, the 1-d pipeline entry point and plug-in estimators.

use serde::Serialize;

use crate::error::{invalid, PmlError, Result};
use crate::multipml::{approximate_pml_d, DProfile, DLevelSetDistribution};
use crate::profile::Profile;
use crate::rounding::RoundedSolution;

const NORMALIZED_TOL: f64 = 1e-9;

/// `(value, count)` levels, sorted by decreasing value with distinct values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSetDistribution {
    levels: Vec<(f64, u64)>,
}

impl LevelSetDistribution {
    /// Drops empty levels and merges equal values.
    ///
    /// # Errors
    ///
    /// Rejects values outside `(0, 1]` and mass above `1 + 1e-12`.
    pub fn new(levels: Vec<(f64, u64)>) -> Result<Self> {
        let mut lv: Vec<(f64, u64)> = levels.into_iter().filter(|&(_, c)| c > 0).collect();
        if lv.iter().any(|&(v, _)| !(v > 0.0 && v <= 1.0)) {
            return invalid("level values must lie in (0, 1]");
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
        let out = Self { levels: lv };
        if out.total_mass() > 1.0 + 1e-12 {
            return invalid("total mass exceeds one");
        }
        Ok(out)
    }

    pub fn levels(&self) -> &[(f64, u64)] {
        &self.levels
    }

    pub fn total_mass(&self) -> f64 {
        self.levels.iter().map(|&(v, c)| v * c as f64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    fn check_normalized(&self) -> Result<()> {
        if (self.total_mass() - 1.0).abs() > NORMALIZED_TOL {
            return invalid(format!("distribution not normalized (mass {})", self.total_mass()));
        }
        Ok(())
    }
}

/// Two-coordinate levels `((v1, v2), count)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairedLevelSetDistribution {
    levels: Vec<((f64, f64), u64)>,
}

impl PairedLevelSetDistribution {
    /// # Errors
    ///
    /// Rejects values outside `[0, 1]` and per-coordinate mass above `1 + 1e-12`.
    pub fn new(levels: Vec<((f64, f64), u64)>) -> Result<Self> {
        let lv: Vec<_> = levels.into_iter().filter(|&(_, c)| c > 0).collect();
        if lv.iter().any(|&((a, b), _)| !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b)) {
            return invalid("level values must lie in [0, 1]");
        }
        let out = Self { levels: lv };
        let (m1, m2) = out.masses();
        if m1 > 1.0 + 1e-12 || m2 > 1.0 + 1e-12 {
            return invalid("coordinate mass exceeds one");
        }
        Ok(out)
    }

    pub fn levels(&self) -> &[((f64, f64), u64)] {
        &self.levels
    }

    pub fn masses(&self) -> (f64, f64) {
        self.levels.iter().fold((0.0, 0.0), |(a, b), &((v1, v2), c)| (a + v1 * c as f64, b + v2 * c as f64))
    }
}

/// Every quantity entering the end-to-end slack `Δ`.
///
/// Tuple-valued fields have one entry per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub d: usize,
    pub n: Vec<u64>,
    pub n_prime: Vec<u64>,
    pub eps1: Vec<f64>,
    pub eps2: Vec<f64>,
    pub b1: usize,
    pub b2: usize,
    pub log_c_phi_prime: f64,
    /// `ln g` at the solver output.
    pub log_g_fractional: f64,
    /// `ln g` and `ln w` of the rounded extended matrix.
    pub log_g_rounded: f64,
    pub log_w_rounded: f64,
    pub solver_gap: f64,
    pub solver_delta: f64,
    pub solver_iterations: usize,
    pub certified: bool,
    /// `Σ_k ε₁(k) n′(k)`.
    pub slack_probability: f64,
    /// One-sided profile discretization slack; enters `Δ` twice.
    pub slack_profile: f64,
    /// `ln |K_{φ′}|`, exact when `log_k_exact`.
    pub log_k: f64,
    pub log_k_exact: bool,
    /// Upper bound on `max_K (ln w - ln g)`; exact maximum when `log_k_exact`.
    pub stirling_upper: f64,
    /// Per-term worst case of the same quantity.
    pub stirling_upper_bound: f64,
    /// `ln g - ln w` at the rounded matrix.
    pub stirling_lower_rounded: f64,
    /// Per-term bound of the same quantity.
    pub stirling_lower_rounded_bound: f64,
    /// `ln g(X′) - ln g(X)` for the rounded `X`.
    pub rounding_loss: f64,
    /// Closed-form `b₁(b₂+1) ln(2n²)` for comparison.
    pub rounding_loss_closed_form: f64,
    /// Per-coordinate mass before normalization.
    pub pseudo_mass: Vec<f64>,
    /// `2·slack_profile + slack_probability + log_k + stirling_upper + solver_gap + rounding_loss + stirling_lower_rounded`.
    pub delta_total: f64,
}

/// Rows with positive count, as 1-d levels.
///
/// # Errors
///
/// Rejects multi-dimensional solutions.
pub fn pseudo_from_assignment(r: &RoundedSolution) -> Result<LevelSetDistribution> {
    if r.spec_ext.d() != 1 {
        return invalid("pseudo_from_assignment is one-dimensional; use the d-level variant");
    }
    let d = crate::multipml::pseudo_from_assignment_d(r);
    LevelSetDistribution::new(d.levels().iter().map(|(v, c)| (v[0], *c)).collect())
}

/// Divides values by the total mass.
///
/// # Errors
///
/// Zero mass.
pub fn normalize(q: &LevelSetDistribution) -> Result<LevelSetDistribution> {
    let m = q.total_mass();
    if !(m > 0.0) {
        return invalid("cannot normalize zero mass");
    }
    LevelSetDistribution::new(q.levels.iter().map(|&(v, c)| ((v / m).min(1.0), c)).collect())
}

/// Approximate PML distribution of `phi`.
///
/// `eps1`/`eps2` default to `n^{-1/3}`; `delta` defaults to the solver's
/// `1e-6·n′ ln n′`.
pub fn approximate_pml(
    phi: &Profile,
    eps1: Option<f64>,
    eps2: Option<f64>,
    delta: Option<f64>,
) -> Result<(LevelSetDistribution, Diagnostics)> {
    let dp = DProfile::from_profile(phi);
    let def = dp.default_eps()[0];
    let (dist, diag) = approximate_pml_d(&dp, &[eps1.unwrap_or(def)], &[eps2.unwrap_or(def)], delta)?;
    Ok((dist.to_one()?, diag))
}

/// `-Σ count·v ln v` in nats.
pub fn entropy(d: &LevelSetDistribution) -> Result<f64> {
    d.check_normalized()?;
    Ok(-d.levels.iter().map(|&(v, c)| c as f64 * v * v.ln()).sum::<f64>())
}

pub fn support_size(d: &LevelSetDistribution) -> Result<u64> {
    d.check_normalized()?;
    Ok(d.levels.iter().map(|&(_, c)| c).sum())
}

/// Expected number of distinct elements in `m` draws.
pub fn support_coverage(d: &LevelSetDistribution, m: u64) -> Result<f64> {
    d.check_normalized()?;
    // 1 - (1-v)^m without cancellation
    Ok(d.levels.iter().map(|&(v, c)| -(c as f64) * (m as f64 * (-v).ln_1p()).exp_m1()).sum())
}

/// `ℓ₁` distance to the uniform distribution on `k` elements.
///
/// # Errors
///
/// [`PmlError::Domain`] when `k` is below the support size.
pub fn distance_to_uniformity(d: &LevelSetDistribution, k: u64) -> Result<f64> {
    let support = support_size(d)?;
    if k < support || k == 0 {
        return Err(PmlError::Domain(format!("k = {k} below support size {support}")));
    }
    let u = 1.0 / k as f64;
    Ok(d.levels.iter().map(|&(v, c)| c as f64 * (v - u).abs()).sum::<f64>() + (k - support) as f64 * u)
}

/// `Σ count·v1 ln(v1/v2)`.
///
/// # Errors
///
/// [`PmlError::Domain`] if some `v2 = 0` while `v1 > 0`; invalid input if a
/// coordinate is not normalized.
pub fn kl_plugin(d2: &PairedLevelSetDistribution) -> Result<f64> {
    let (m1, m2) = d2.masses();
    if (m1 - 1.0).abs() > NORMALIZED_TOL || (m2 - 1.0).abs() > NORMALIZED_TOL {
        return invalid("both coordinates must be normalized");
    }
    let mut acc = 0.0;
    for &((v1, v2), c) in &d2.levels {
        if v1 == 0.0 {
            continue;
        }
        if v2 == 0.0 {
            return Err(PmlError::Domain("infinite divergence: v2 = 0 where v1 > 0".into()));
        }
        acc += c as f64 * v1 * (v1 / v2).ln();
    }
    Ok(acc)
}

/// Converts a 2-d level set.
impl TryFrom<&DLevelSetDistribution> for PairedLevelSetDistribution {
    type Error = PmlError;
    fn try_from(d: &DLevelSetDistribution) -> Result<Self> {
        d.to_pair()
    }
}
