//! Log-domain arithmetic helpers.
//!
//! Occupations and Jarzynski averages for optical gaps at cryogenic
//! temperatures involve factors like exp(±4582); everything that can
//! underflow or overflow in linear f64 goes through these.

/// log(exp(a) + exp(b)) without overflow.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// log(exp(a) - exp(b)) for a >= b.
pub fn log_sub_exp(a: f64, b: f64) -> f64 {
    debug_assert!(a >= b);
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a == b {
        return f64::NEG_INFINITY;
    }
    a + (-((b - a).exp())).ln_1p()
}

/// log(sum_i exp(x_i)) over a slice.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - hi).exp()).sum();
    hi + sum.ln()
}

/// log(1 + exp(x)), stable for any x.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn log_add_exp_matches_naive_in_range() {
        let (a, b) = (1.5, -0.3);
        assert_relative_eq!(
            log_add_exp(a, b),
            (a.exp() + b.exp()).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn log_add_exp_survives_extremes() {
        let v = log_add_exp(4582.0, -4582.0);
        assert_relative_eq!(v, 4582.0, epsilon = 1e-12);
        assert!(log_add_exp(f64::NEG_INFINITY, f64::NEG_INFINITY).is_infinite());
    }

    #[test]
    fn log_sum_exp_normalized_weights() {
        // log of (0.2 + 0.3 + 0.5) = 0
        let xs = [0.2f64.ln(), 0.3f64.ln(), 0.5f64.ln()];
        assert_relative_eq!(log_sum_exp(&xs), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn log_sub_exp_small_difference() {
        let v = log_sub_exp(1000.0, 999.9999);
        let expected = 1000.0 + (-((-1e-4f64).exp())).ln_1p();
        assert_relative_eq!(v, expected, epsilon = 1e-9);
    }

    #[test]
    fn log1p_exp_both_branches() {
        assert_relative_eq!(log1p_exp(0.5), (1.0 + 0.5f64.exp()).ln(), epsilon = 1e-14);
        assert_relative_eq!(log1p_exp(-40.0), (-40.0f64).exp(), epsilon = 1e-14);
        assert_relative_eq!(log1p_exp(5000.0), 5000.0, epsilon = 1e-12);
    }
}
