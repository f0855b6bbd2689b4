//! Hurwitz zeta function `zeta(s, a) = sum_{k >= 0} (a + k)^(-s)` for `s > 1`.
//!
//! Direct summation up to a shifted argument followed by Euler-Maclaurin
//! with eight Bernoulli corrections; relative accuracy is near machine
//! precision for the exponents used by the tail sums.

// B_{2j} / (2j)!
const BERNOULLI_OVER_FACT: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0, "hurwitz_zeta requires s > 1, got {s}");
    assert!(a > 0.0, "hurwitz_zeta requires a > 0, got {a}");
    let shift = 12.0 + s;
    let mut head = 0.0;
    let mut x = a;
    while x < shift {
        head += x.powf(-s);
        x += 1.0;
    }
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) times x^(-s-2j+1)
    let mut rising = s;
    let mut xpow = x.powf(-s - 1.0);
    let x2 = x * x;
    for (j, coeff) in BERNOULLI_OVER_FACT.iter().enumerate() {
        let term = coeff * rising * xpow;
        tail += term;
        let j = j as f64 + 1.0;
        rising *= (s + 2.0 * j - 1.0) * (s + 2.0 * j);
        xpow /= x2;
    }
    head + tail
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn riemann_values() {
        assert!((hurwitz_zeta(2.0, 1.0) - PI * PI / 6.0).abs() < 1e-15);
        assert!((hurwitz_zeta(3.0, 1.0) - 1.2020569031595942).abs() < 1e-15);
        assert!((hurwitz_zeta(4.0, 1.0) - PI.powi(4) / 90.0).abs() < 1e-15);
    }

    #[test]
    fn shifted_argument_matches_partial_sums() {
        let direct = PI * PI / 6.0 - 1.0 - 0.25 - 1.0 / 9.0 - 1.0 / 16.0;
        assert!((hurwitz_zeta(2.0, 5.0) - direct).abs() < 1e-15);
        // zeta(6, 1000.5) against brute force with a crude integral tail
        let brute: f64 = (0..200_000).map(|k| (1000.5 + k as f64).powf(-6.0)).sum();
        let z = hurwitz_zeta(6.0, 1000.5);
        assert!(((z - brute) / z).abs() < 1e-9);
    }

    #[test]
    fn large_exponent() {
        let z = hurwitz_zeta(40.0, 2.0);
        let brute: f64 = (0..50).map(|k| (2.0 + k as f64).powf(-40.0)).sum();
        assert!(((z - brute) / z).abs() < 1e-14);
    }
}
