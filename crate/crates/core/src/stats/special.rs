//! Distribution tails needed by the tests.

use crate::math::{erfc, exp, ln, ln_gamma, sqrt};

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "shape parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * ln(x) + b * ln(1.0 - x);
    let front = exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_fraction(a, b, x) / a
    } else {
        1.0 - front * beta_fraction(b, a, 1.0 - x) / b
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Upper tail `P(F > f)` of the F distribution with `(d1, d2)` degrees of freedom.
pub fn f_upper_tail(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f == f64::INFINITY {
        return 0.0;
    }
    incomplete_beta(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
}

/// Upper tail `P(Z > z)` of the standard normal.
pub fn normal_upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / sqrt(2.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_symmetry_and_edges() {
        assert_eq!(incomplete_beta(2.0, 3.0, 0.0), 0.0);
        assert_eq!(incomplete_beta(2.0, 3.0, 1.0), 1.0);
        let x = 0.3;
        let s = incomplete_beta(2.5, 4.0, x) + incomplete_beta(4.0, 2.5, 1.0 - x);
        assert!((s - 1.0).abs() < 1e-14);
        // I_x(1, 1) = x
        assert!((incomplete_beta(1.0, 1.0, 0.42) - 0.42).abs() < 1e-15);
    }

    #[test]
    fn f_tail_closed_form() {
        // F(2, 2): P(F > f) = 1 / (1 + f)
        for f in [0.1, 1.0, 3.0, 50.0] {
            assert!((f_upper_tail(f, 2.0, 2.0) - 1.0 / (1.0 + f)).abs() < 1e-13);
        }
        assert_eq!(f_upper_tail(0.0, 3.0, 10.0), 1.0);
    }

    #[test]
    fn normal_tail_values() {
        assert!((normal_upper_tail(0.0) - 0.5).abs() < 1e-16);
        assert!((normal_upper_tail(1.959_963_984_540_054) - 0.025).abs() < 1e-12);
    }
}
