//! Numerically stable log-sum-exp primitives.
//!
//! Every channel-aware LLR in this crate is a ratio of positive mixtures
//! `log(Σ wᵢ e^{xᵢ} / Σ vⱼ e^{yⱼ})` whose exponents grow like
//! `-|z - m|²/σ²`; naive evaluation overflows or underflows at high SNR.
//! All mixtures are therefore evaluated by factoring out the largest
//! exponent.

use crate::fmath;

/// `ln(1 + e^x)` without overflow for large `x` or precision loss for
/// very negative `x`.
#[inline]
pub fn ln_1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + fmath::ln_1p(fmath::exp(-x))
    } else {
        fmath::ln_1p(fmath::exp(x))
    }
}

/// `ln[(1 + a e^t) / (1 + b e^t)]` for `a, b > 0`, stable for any `t`.
///
/// `ln_a` and `ln_b` are the logarithms of the two coefficients; passing
/// them directly avoids recomputing logs inside quadrature loops.
#[inline]
pub fn ln_ratio_1p_exp(ln_a: f64, ln_b: f64, t: f64) -> f64 {
    ln_1p_exp(ln_a + t) - ln_1p_exp(ln_b + t)
}

/// `ln(w1 e^{x1} + w2 e^{x2})` with nonnegative weights, at most one zero.
#[inline]
pub fn ln_weighted_sum_exp2(w1: f64, x1: f64, w2: f64, x2: f64) -> f64 {
    debug_assert!(w1 >= 0.0 && w2 >= 0.0);
    if w1 == 0.0 {
        return fmath::ln(w2) + x2;
    }
    if w2 == 0.0 {
        return fmath::ln(w1) + x1;
    }
    let t1 = fmath::ln(w1) + x1;
    let t2 = fmath::ln(w2) + x2;
    let m = if t1 > t2 { t1 } else { t2 };
    m + fmath::ln(fmath::exp(t1 - m) + fmath::exp(t2 - m))
}

/// `ln(w1 e^{x1} + w2 e^{x2} + w3 e^{x3})`, nonnegative weights, not all zero.
#[inline]
pub fn ln_weighted_sum_exp3(w1: f64, x1: f64, w2: f64, x2: f64, w3: f64, x3: f64) -> f64 {
    debug_assert!(w1 >= 0.0 && w2 >= 0.0 && w3 >= 0.0);
    let mut m = f64::NEG_INFINITY;
    let terms = [(w1, x1), (w2, x2), (w3, x3)];
    let mut logs = [f64::NEG_INFINITY; 3];
    for (i, (w, x)) in terms.iter().enumerate() {
        if *w > 0.0 {
            let t = fmath::ln(*w) + x;
            logs[i] = t;
            if t > m {
                m = t;
            }
        }
    }
    let mut sum = 0.0;
    for t in logs {
        if t > f64::NEG_INFINITY {
            sum += fmath::exp(t - m);
        }
    }
    m + fmath::ln(sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_1p_exp_matches_naive_in_safe_range() {
        for &x in &[-20.0, -3.0, -0.5, 0.0, 0.5, 3.0, 20.0] {
            assert_relative_eq!(ln_1p_exp(x), (1f64 + x.exp()).ln(), max_relative = 1e-14);
        }
    }

    #[test]
    fn ln_1p_exp_extreme_arguments() {
        assert_eq!(ln_1p_exp(1000.0), 1000.0);
        // Below the exp underflow threshold the result rounds to zero.
        assert_eq!(ln_1p_exp(-1000.0), 0.0);
        assert_relative_eq!(ln_1p_exp(-700.0), (-700f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn weighted_sum_matches_naive() {
        let v = ln_weighted_sum_exp2(0.9, -0.25, 0.1, -2.25);
        let naive = (0.9 * (-0.25f64).exp() + 0.1 * (-2.25f64).exp()).ln();
        assert_relative_eq!(v, naive, max_relative = 1e-14);
    }

    #[test]
    fn weighted_sum_survives_huge_exponents() {
        let v = ln_weighted_sum_exp2(0.9, -1e6, 0.1, -1e6 - 2.0);
        assert!(v.is_finite());
        assert_relative_eq!(
            v,
            -1e6 + (0.9f64 + 0.1 * (-2.0f64).exp()).ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn weighted_sum3_drops_zero_weight() {
        let v2 = ln_weighted_sum_exp2(0.4, -1.0, 0.6, -3.0);
        let v3 = ln_weighted_sum_exp3(0.4, -1.0, 0.6, -3.0, 0.0, 1e300);
        assert_eq!(v2, v3);
    }

    #[test]
    fn ln_ratio_consistent_with_parts() {
        let (a, b, t) = (9.0f64, 1.0f64 / 9.0, -3.7);
        let v = ln_ratio_1p_exp(a.ln(), b.ln(), t);
        let naive = ((1.0 + a * t.exp()) / (1.0 + b * t.exp())).ln();
        assert_relative_eq!(v, naive, max_relative = 1e-13);
    }
}
