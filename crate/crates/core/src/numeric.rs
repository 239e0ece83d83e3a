//! Log-space helpers shared across modules.

/// `ln(k!)`; table-exact below 170, log-gamma above.
pub fn ln_factorial(k: u64) -> f64 {
    statrs::function::factorial::ln_factorial(k)
}

/// `ln Γ(x + 1)` for real `x ≥ 0`.
pub fn ln_factorial_real(x: f64) -> f64 {
    if x == x.floor() && x < 170.0 {
        return ln_factorial(x as u64);
    }
    statrs::function::gamma::ln_gamma(x + 1.0)
}

/// `x ln x` with the convention `0 ln 0 = 0`.
pub fn xlogx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Max-shifted log-sum-exp. Empty input gives `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + s.ln()
}

/// `ln(e^a + e^b)`.
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Stirling remainder `ln k! - (k ln k - k)`, in `[0, 1 + ln(k+1)/2]`.
pub fn stirling_remainder(k: f64) -> f64 {
    ln_factorial_real(k) - (xlogx(k) - k)
}

/// Per-term Stirling bound `ln(e * sqrt(k + 1))`.
pub fn stirling_term_bound(k: f64) -> f64 {
    1.0 + 0.5 * (k + 1.0).ln()
}

/// Binomial coefficient in log space.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}


/// Streaming log-sum-exp accumulator with a running max shift.
#[derive(Debug, Clone, Copy)]
pub struct LogAccumulator {
    max: f64,
    scaled: f64,
}

impl Default for LogAccumulator {
    fn default() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }
}

impl LogAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, t: f64) {
        if t == f64::NEG_INFINITY {
            return;
        }
        if t > self.max {
            self.scaled = self.scaled * (self.max - t).exp() + 1.0;
            self.max = t;
        } else {
            self.scaled += (t - self.max).exp();
        }
    }

    pub fn merge(&mut self, other: &LogAccumulator) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if other.max > self.max {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        } else {
            self.scaled += other.scaled * (other.max - self.max).exp();
        }
    }

    pub fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.scaled.ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_direct() {
        let xs = [0.1f64.ln(), 0.2f64.ln(), 0.3f64.ln()];
        assert!((log_sum_exp(&xs) - 0.6f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_add(0.25f64.ln(), 0.25f64.ln()) - 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn stirling_remainder_in_bounds() {
        for k in 0..500u64 {
            let s = stirling_remainder(k as f64);
            assert!(s >= -1e-12, "k={k} s={s}");
            assert!(s <= stirling_term_bound(k as f64) + 1e-12, "k={k}");
        }
    }

    #[test]
    fn ln_factorial_small() {
        assert_eq!(ln_factorial(0), 0.0);
        assert!((ln_factorial(5) - 120f64.ln()).abs() < 1e-14);
        assert!((ln_factorial_real(2.5) - statrs::function::gamma::ln_gamma(3.5)).abs() < 1e-14);
    }
}
