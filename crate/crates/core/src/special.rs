//! Real special functions: the gamma function and integer-order Bessel
//! functions of the first kind.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Returns `Some(m)` when `x = m / 2` for a positive integer `m`.
fn positive_half_integer(x: f64) -> Option<u64> {
    let twice = 2.0 * x;
    if x > 0.0 && twice.fract() == 0.0 && twice <= 400.0 {
        Some(twice as u64)
    } else {
        None
    }
}

/// `ln Γ(m/2)` by the exact recurrences from `Γ(1) = 1` and `Γ(1/2) = √π`.
fn ln_gamma_half_integer(m: u64) -> f64 {
    let (mut acc, mut arg) = if m % 2 == 0 {
        (0.0, 1.0)
    } else {
        (0.5 * PI.ln(), 0.5)
    };
    let target = m as f64 / 2.0;
    while arg < target {
        acc += arg.ln();
        arg += 1.0;
    }
    acc
}

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (original minus one)
    let mut a = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    a
}

/// Natural log of `|Γ(x)|` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires a positive argument, got {x}");
    if let Some(m) = positive_half_integer(x) {
        return ln_gamma_half_integer(m);
    }
    if x < 0.5 {
        // reflection keeps the Lanczos series in its accurate range
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

/// Γ(x) for real `x` away from the poles.
pub fn gamma(x: f64) -> f64 {
    if let Some(m) = positive_half_integer(x) {
        if m <= 340 {
            return ln_gamma_half_integer(m).exp();
        }
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z)
}

/// Bessel function `J_n(x)` of integer order.
///
/// Uses the trapezoid rule on the periodic Bessel integral
/// `J_n(x) = (1/2π) ∫_0^{2π} cos(nτ − x sin τ) dτ`, which converges
/// geometrically once the node count exceeds `|x| + n`. Small arguments use
/// the power series, which keeps relative accuracy near the origin.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    if x.abs() <= 2.0 {
        let q = -x * x / 4.0;
        let mut term = (0..n).fold(1.0, |acc, j| acc * x / 2.0 / (j + 1) as f64);
        let mut sum = term;
        for m in 1..40 {
            term *= q / (m as f64 * (m + n as usize) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    let nodes = (x.abs() + n as f64 + 40.0).ceil() as usize * 2;
    let step = 2.0 * PI / nodes as f64;
    let nf = n as f64;
    let sum: f64 = (0..nodes)
        .map(|j| {
            let tau = j as f64 * step;
            (nf * tau - x * tau.sin()).cos()
        })
        .sum();
    sum / nodes as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gamma_at_integers_and_half_integers() {
        assert_eq!(gamma(1.0), 1.0);
        assert_relative_eq!(gamma(0.5), PI.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(gamma(5.0), 24.0, max_relative = 1e-15);
        assert_relative_eq!(gamma(3.5), 15.0 / 8.0 * PI.sqrt(), max_relative = 1e-15);
    }

    #[test]
    fn lanczos_branch_matches_recurrence() {
        for &x in &[0.3, 1.7, 2.25, 7.9, 13.1, 31.4] {
            let lhs = gamma(x + 1.0);
            let rhs = x * gamma(x);
            assert_relative_eq!(lhs, rhs, max_relative = 1e-13);
            assert_relative_eq!(ln_gamma(x), gamma(x).ln(), max_relative = 1e-12, epsilon = 1e-14);
        }
        // Γ(1/3)Γ(2/3) = 2π/√3
        assert_relative_eq!(
            gamma(1.0 / 3.0) * gamma(2.0 / 3.0),
            2.0 * PI / 3f64.sqrt(),
            max_relative = 1e-13
        );
    }

    #[test]
    fn ln_gamma_large_arguments() {
        // Stirling with two correction terms is accurate to ~1e-12 at x = 40.3
        let x: f64 = 40.3;
        let stirling = (x - 0.5) * x.ln() - x + 0.5 * (2.0 * PI).ln() + 1.0 / (12.0 * x)
            - 1.0 / (360.0 * x.powi(3));
        assert_relative_eq!(ln_gamma(x), stirling, max_relative = 1e-13);
    }

    #[test]
    fn bessel_small_arguments() {
        let x = 1e-3;
        assert_relative_eq!(bessel_j(2, x), x * x / 8.0 * (1.0 - x * x / 12.0), max_relative = 1e-14);
        assert_relative_eq!(bessel_j(3, 2.0), 0.128_943_249_474_402_05, max_relative = 1e-14);
        assert_relative_eq!(bessel_j(0, -1.5), 0.511_827_671_735_918_1, max_relative = 1e-14);
    }

    #[test]
    fn bessel_reference_values() {
        // Abramowitz & Stegun table 9.1
        assert_relative_eq!(bessel_j(0, 1.0), 0.765_197_686_557_966_6, epsilon = 1e-15);
        assert_relative_eq!(bessel_j(1, 1.0), 0.440_050_585_744_933_5, epsilon = 1e-15);
        assert_relative_eq!(bessel_j(2, 1.0), 0.114_903_484_931_900_5, epsilon = 1e-15);
        assert_relative_eq!(bessel_j(2, 10.0), 0.254_630_313_685_120_6, epsilon = 1e-14);
        // recurrence J_1 + J_3 = (4/x) J_2
        let x = 37.2;
        assert_relative_eq!(
            bessel_j(1, x) + bessel_j(3, x),
            4.0 / x * bessel_j(2, x),
            epsilon = 1e-14
        );
    }
}
