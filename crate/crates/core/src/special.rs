//! Special functions used by the tail constants and the heavy-tailed samplers.
//!
//! Gamma and log-gamma come from `statrs` (Lanczos, ~1e-15 relative). The
//! samplers additionally need `ln Γ(x + a) − ln Γ(x + b)` for `x` up to
//! ~1e19, where subtracting two huge log-gammas would lose every digit, so
//! that difference is evaluated from a Stirling expansion of the ratio.

use std::f64::consts::PI;

pub use statrs::function::gamma::{gamma, ln_gamma};

/// Bernoulli-number coefficients of the Stirling series for ln Γ(z):
/// B_{2n} / (2n (2n − 1)).
const STIRLING: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
];

const STIRLING_MIN: f64 = 20.0;

fn stirling_tail(z: f64) -> f64 {
    let inv = 1.0 / z;
    let inv2 = inv * inv;
    let mut pow = inv;
    let mut acc = 0.0;
    for c in STIRLING {
        acc += c * pow;
        pow *= inv2;
    }
    acc
}

/// `ln Γ(x + a) − ln Γ(x + b)`, accurate in absolute terms even when `x` is
/// astronomically large.
pub fn ln_gamma_ratio(x: f64, a: f64, b: f64) -> f64 {
    let z1 = x + a;
    let z2 = x + b;
    if z1.min(z2) < STIRLING_MIN {
        return ln_gamma(z1) - ln_gamma(z2);
    }
    let d = a - b;
    // (z1 − ½) ln z1 − (z2 − ½) ln z2 − (z1 − z2), rearranged around ln(z1/z2).
    (z1 - 0.5) * (d / z2).ln_1p() + d * z2.ln() - d + stirling_tail(z1) - stirling_tail(z2)
}

/// Reciprocal gamma function, zero at the poles 0, −1, −2, …
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x < 0.5 {
        // Reflection keeps large negative arguments finite.
        return (PI * x).sin() * gamma(1.0 - x) / PI;
    }
    1.0 / gamma(x)
}

/// `(-1)^k binom(a, k)`: the coefficient of `s^k` in `(1 − s)^a`.
pub fn falling_binomial_coeff(a: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if a >= 0.0 && a == a.floor() {
        if (k as f64) > a {
            return 0.0;
        }
        let mut c = 1.0;
        for j in 0..k {
            c *= (j as f64 - a) / (j as f64 + 1.0);
        }
        return c;
    }
    // Γ(k − a) / (Γ(−a) Γ(k + 1)), sign carried by 1/Γ(−a).
    let r = rgamma(-a);
    if r == 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    if kf - a > 0.0 {
        r * ln_gamma_ratio(kf, -a, 1.0).exp()
    } else {
        // Small k with k − a ≤ 0 only happens for a ≥ 1; fall back to the product.
        let mut c = 1.0;
        for j in 0..k {
            c *= (j as f64 - a) / (j as f64 + 1.0);
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_matches_direct_difference_for_moderate_arguments() {
        for &x in &[20.0, 55.5, 300.0, 1.0e4] {
            for &(a, b) in &[(-0.5, 1.0), (0.2, 0.0), (-1.3, 1.0)] {
                let direct = ln_gamma(x + a) - ln_gamma(x + b);
                let r = ln_gamma_ratio(x, a, b);
                assert!((direct - r).abs() < 1e-10, "x={x} a={a} b={b}: {direct} vs {r}");
            }
        }
    }

    #[test]
    fn ratio_has_power_law_limit() {
        // Γ(x + a)/Γ(x + b) ~ x^(a − b)
        let x = 1.0e15;
        let r = ln_gamma_ratio(x, -0.3, 1.0);
        assert!((r - (-1.3) * x.ln()).abs() < 1e-12);
    }

    #[test]
    fn gamma_constants() {
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-13);
        assert!((1.0 / gamma(0.2) - 0.217_824_884_211_667_2).abs() < 1e-12);
        assert!((1.0 / gamma(0.8) - 0.858_937_019_224_667_7).abs() < 1e-12);
    }

    #[test]
    fn binomial_coefficients_of_sqrt() {
        // (1 − s)^{1/2} = 1 − s/2 − s²/8 − s³/16 − 5 s⁴/128 …
        let expect = [1.0, -0.5, -0.125, -0.0625, -5.0 / 128.0];
        for (k, e) in expect.iter().enumerate() {
            assert!((falling_binomial_coeff(0.5, k as u64) - e).abs() < 1e-14);
        }
        assert_eq!(falling_binomial_coeff(2.0, 3), 0.0);
        assert!((falling_binomial_coeff(2.0, 2) - 1.0).abs() < 1e-14);
    }
}
