//! Hurwitz zeta function `ζ(s, a) = Σ_{k≥0} (k + a)^{-s}` for real `s > 1`, `a > 0`.
//!
//! Evaluated by Euler–Maclaurin summation: a short direct sum brings the
//! argument above 10, then the integral tail plus eight Bernoulli corrections.

/// `B_{2j} / (2j)!` for j = 1..=8.
const BERNOULLI_OVER_FACTORIAL: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

const SHIFT: f64 = 10.0;

pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    assert!(s > 1.0, "hurwitz_zeta requires s > 1, got {s}");
    assert!(a > 0.0, "hurwitz_zeta requires a > 0, got {a}");
    let n = if a < SHIFT { (SHIFT - a).ceil() as usize } else { 0 };
    let mut sum = 0.0;
    for k in 0..n {
        sum += (a + k as f64).powf(-s);
    }
    let x = a + n as f64;
    let mut tail = x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    // rising factorial s (s+1) ... (s+2j-2) times x^{-s-2j+1}
    let mut term = s * x.powf(-s - 1.0);
    let x2 = x * x;
    for (j, c) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        tail += c * term;
        let k = 2.0 * j as f64;
        term *= (s + k + 1.0) * (s + k + 2.0) / x2;
    }
    sum + tail
}

pub fn riemann_zeta(s: f64) -> f64 {
    hurwitz_zeta(s, 1.0)
}
