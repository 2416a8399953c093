//! Special functions used by the Tauberian formula layer and the test oracles:
//! Gamma function, upper incomplete Gamma (real shape, including negative),
//! and the modified Bessel function `I0`.

/// Lanczos coefficients, g = 7, n = 9.
const LANCZOS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x < 0.5 {
        // reflection: Γ(x)Γ(1-x) = π / sin(πx)
        return std::f64::consts::PI.ln()
            - (std::f64::consts::PI * x).sin().ln()
            - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (z + i as f64);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
}

/// Γ(x) for real x that is not a non-positive integer.
pub fn gamma(x: f64) -> f64 {
    if x > 0.0 {
        if x > 171.6 {
            return f64::INFINITY;
        }
        ln_gamma(x).exp()
    } else {
        assert!(
            x.fract() != 0.0,
            "gamma undefined at non-positive integer {x}"
        );
        // reflection
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    }
}

/// Upper incomplete Gamma Γ(a, x) = ∫_x^∞ t^{a-1} e^{-t} dt for x > 0 and
/// real a ≤ 1 (negative a allowed). Used for Laplace-transform power tails.
pub fn inc_gamma_upper(a: f64, x: f64) -> f64 {
    assert!(x > 0.0, "inc_gamma_upper requires x > 0");
    assert!(a <= 1.0 + 1e-12, "inc_gamma_upper implemented for a <= 1");
    if x >= 1.5 {
        // Lentz continued fraction, valid for any real a here since x > a + 1.
        return upper_cf(a, x);
    }
    if a.abs() < 1e-12 {
        return e1_series(x);
    }
    if a > 0.0 {
        return upper_via_series(a, x);
    }
    // Lift negative a to a0 in (0, 1] and recurse downward:
    // Γ(a, x) = (Γ(a+1, x) - x^a e^{-x}) / a. No cancellation for x < 1.5.
    let k = (-a).ceil() as usize;
    let a0 = a + k as f64;
    let mut g = if a0.abs() < 1e-12 {
        e1_series(x)
    } else {
        upper_via_series(a0, x)
    };
    for j in (0..k).rev() {
        let aj = a + j as f64;
        g = (g - x.powf(aj) * (-x).exp()) / aj;
    }
    g
}

/// Γ(a, x) = Γ(a)(1 - P(a, x)) with P from the standard lower series; a in (0, 1], x < a+1.
fn upper_via_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut n = 1.0;
    while term.abs() > sum.abs() * 1e-17 {
        term *= x / (a + n);
        sum += term;
        n += 1.0;
        if n > 500.0 {
            break;
        }
    }
    let p = sum * (-x + a * x.ln() - ln_gamma(a)).exp();
    gamma(a) * (1.0 - p)
}

/// Continued fraction for Γ(a, x)·x^{-a}e^{x}, modified Lentz algorithm.
fn upper_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..400 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln()).exp() * h
}

/// E₁(x) = Γ(0, x) via the alternating series, for 0 < x < 1.5.
fn e1_series(x: f64) -> f64 {
    const EULER_GAMMA: f64 = 0.5772156649015329;
    let mut sum = -EULER_GAMMA - x.ln();
    let mut term = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= -x / kf;
        sum -= term / kf;
        if term.abs() / kf < 1e-18 {
            break;
        }
    }
    sum
}

/// Scaled modified Bessel function e^{-x} I₀(x) for x ≥ 0.
///
/// The scaled form stays bounded, which is what the return-probability
/// oracles for the simple random walk need at large times.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    assert!(x >= 0.0);
    if x < 50.0 {
        // power series, all terms positive
        let mut term = 1.0f64;
        let mut sum = 1.0f64;
        let q = 0.25 * x * x;
        let mut k = 1.0;
        while term > sum * 1e-18 {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
            if k > 200.0 {
                break;
            }
        }
        sum * (-x).exp()
    } else {
        // asymptotic expansion: I0(x) ~ e^x/sqrt(2πx) * Σ a_k / x^k
        let coeffs = [
            1.0,
            1.0 / 8.0,
            9.0 / 128.0,
            75.0 / 1024.0,
            3675.0 / 32768.0,
            59535.0 / 262144.0,
            2401245.0 / 4194304.0,
            57972915.0 / 33554432.0,
        ];
        let mut sum = 0.0;
        let mut xp = 1.0;
        for &c in &coeffs {
            sum += c / xp;
            xp *= x;
        }
        sum / (2.0 * std::f64::consts::PI * x).sqrt()
    }
}

/// I₀(x) (unscaled); overflows for large x, prefer [`bessel_i0_scaled`].
pub fn bessel_i0(x: f64) -> f64 {
    bessel_i0_scaled(x) * x.exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) {
        assert!(
            (a - b).abs() <= rel * b.abs().max(1e-300),
            "{a} vs {b} (rel {:.2e})",
            (a - b).abs() / b.abs()
        );
    }

    #[test]
    fn gamma_known_values() {
        close(gamma(0.5), std::f64::consts::PI.sqrt(), 1e-14);
        close(gamma(1.0), 1.0, 1e-14);
        close(gamma(4.0), 6.0, 1e-14);
        close(gamma(1.5), 0.5 * std::f64::consts::PI.sqrt(), 1e-14);
        // reflection: Γ(-0.5) = -2√π
        close(gamma(-0.5), -2.0 * std::f64::consts::PI.sqrt(), 1e-13);
    }

    #[test]
    fn incomplete_gamma_reference_values() {
        // reference values computed with mpmath (30 digits)
        close(inc_gamma_upper(0.5, 1.0), 0.278805585280661976, 1e-12);
        close(inc_gamma_upper(-0.5, 1.0), 0.178147711781560690, 1e-12);
        close(inc_gamma_upper(-1.5, 0.25), 3.20999120563032116, 1e-12);
        close(inc_gamma_upper(0.9, 3.0), 0.0434633691570107674, 1e-12);
        close(inc_gamma_upper(-0.3, 1e-4), 48.5051860597304792, 1e-12);
        // Γ(1, x) = e^{-x}
        close(inc_gamma_upper(1.0, 0.7), (-0.7f64).exp(), 1e-13);
        close(inc_gamma_upper(1.0, 4.2), (-4.2f64).exp(), 1e-13);
    }

    #[test]
    fn exponential_integral_at_zero_shape() {
        // E1(1) = 0.219383934395520274, E1(0.3) = 0.905676651675843
        close(inc_gamma_upper(0.0, 1.0), 0.219383934395520274, 1e-12);
        close(inc_gamma_upper(0.0, 3.0), 0.0130483810941970375, 1e-12);
    }

    #[test]
    fn bessel_i0_reference_values() {
        // mpmath: e^{-1} I0(1), e^{-2} I0(2), and a large argument
        close(bessel_i0_scaled(1.0), 0.465759607593640437, 1e-13);
        close(bessel_i0_scaled(2.0), 0.308508322553671040, 1e-13);
        close(bessel_i0_scaled(0.0), 1.0, 1e-15);
        // e^{-x} I0(x) ~ 1/sqrt(2πx): at x=1e4 relative deviation is ~1/(8x)
        let v = bessel_i0_scaled(1e4);
        let lead = 1.0 / (2.0 * std::f64::consts::PI * 1e4).sqrt();
        assert!((v / lead - 1.0 - 1.0 / 8e4).abs() < 1e-8);
    }

    #[test]
    fn bessel_series_asymptotic_crossover_consistent() {
        // both branches should agree near the switch point
        for &x in &[49.9, 50.1, 55.0] {
            let series = {
                let mut term = 1.0f64;
                let mut sum = 1.0f64;
                let q = 0.25 * x * x;
                let mut k = 1.0;
                while term > sum * 1e-18 && k < 400.0 {
                    term *= q / (k * k);
                    sum += term;
                    k += 1.0;
                }
                sum * (-x as f64).exp()
            };
            close(bessel_i0_scaled(x), series, 1e-12);
        }
    }
}
