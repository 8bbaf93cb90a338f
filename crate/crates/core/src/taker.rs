//! Market-order volume policies.
//!
//! A market order takes a fraction `f` of the volume at the opposite best,
//! with `f` drawn from the density `k (1 - f)^{k-1}` on `[0, 1]`. The constant
//! policy fixes `k`; the adaptive policy sets `k = g(x)` where `x = ε·ε̂` is
//! the correctness of the sign prediction, chosen so the chance of taking
//! the whole best level is `α (1 - x)`.

use rand::Rng;
use thiserror::Error;

const X_CEILING: f64 = 1.0 - 1e-12;
const MIN_EXPONENT: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("zeta={0} must be positive")]
    InvalidZeta(f64),
    #[error("alpha={0} outside (0, 1/2]")]
    InvalidAlpha(f64),
    #[error("delta={0} outside (0, 1)")]
    InvalidDelta(f64),
    #[error("exponent {0} below the clamp floor")]
    DegenerateExponent(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TothPolicy {
    zeta: f64,
}

impl TothPolicy {
    pub fn new(zeta: f64) -> Result<Self, PolicyError> {
        if zeta > 0.0 && zeta.is_finite() {
            Ok(TothPolicy { zeta })
        } else {
            Err(PolicyError::InvalidZeta(zeta))
        }
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptivePolicy {
    alpha: f64,
    delta: f64,
}

impl AdaptivePolicy {
    pub fn new(alpha: f64, delta: f64) -> Result<Self, PolicyError> {
        if !(alpha > 0.0 && alpha <= 0.5) {
            return Err(PolicyError::InvalidAlpha(alpha));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(PolicyError::InvalidDelta(delta));
        }
        Ok(AdaptivePolicy { alpha, delta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Impact scale `w α / 2` for a log tick `w`.
    pub fn impact_scale(&self, log_tick: f64) -> f64 {
        0.5 * log_tick * self.alpha
    }
}

/// Exponent `g(x) = (ln α + ln(1 - x)) / ln δ`, or an error when it would fall
/// below the clamp floor.
pub fn g_exponent(policy: &AdaptivePolicy, x: f64) -> Result<f64, PolicyError> {
    let (g, clamped) = g_exponent_clamped(policy, x);
    if clamped {
        Err(PolicyError::DegenerateExponent(g))
    } else {
        Ok(g)
    }
}

/// Exponent with `x` capped just below 1 and the result floored at `1e-12`;
/// the flag reports whether the floor was applied.
pub fn g_exponent_clamped(policy: &AdaptivePolicy, x: f64) -> (f64, bool) {
    let x = x.min(X_CEILING);
    let g = (policy.alpha.ln() + (1.0 - x).ln()) / policy.delta.ln();
    if g <= MIN_EXPONENT {
        (MIN_EXPONENT, true)
    } else {
        (g, false)
    }
}

pub fn penetration_prob(policy: &AdaptivePolicy, x: f64) -> f64 {
    (policy.alpha * (1.0 - x)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    Toth(TothPolicy),
    Adaptive(AdaptivePolicy),
}

impl Policy {
    /// Exponent of the fraction density for correctness `x`, and whether it
    /// had to be clamped.
    pub fn exponent(&self, x: f64) -> (f64, bool) {
        match self {
            Policy::Toth(p) => (p.zeta, false),
            Policy::Adaptive(p) => g_exponent_clamped(p, x),
        }
    }

    /// Fraction threshold above which the whole opposite best is taken.
    pub fn full_take_threshold(&self) -> Option<f64> {
        match self {
            Policy::Toth(_) => None,
            Policy::Adaptive(p) => Some(1.0 - p.delta),
        }
    }
}

/// Inverse-CDF draw `f = 1 - (1 - u)^{1/k}` from a uniform `u` in `[0, 1)`.
pub fn fraction_from_uniform(exponent: f64, u: f64) -> f64 {
    1.0 - (1.0 - u).powf(1.0 / exponent)
}

pub fn sample_fraction<R: Rng + ?Sized>(policy: &Policy, x: f64, rng: &mut R) -> f64 {
    let (k, _) = policy.exponent(x);
    fraction_from_uniform(k, rng.random::<f64>())
}

/// Shares to send for fraction `f` of an opposite best of `v_opp_best` shares.
///
/// The constant-exponent policy rounds up, so the best is taken in full
/// with probability `v_opp_best^-zeta`. The adaptive policy rounds down and
/// takes the full best only above its threshold.
pub fn market_volume(policy: &Policy, f: f64, v_opp_best: u64) -> u64 {
    let raw = f * v_opp_best as f64;
    let shares = match policy {
        Policy::Toth(_) => raw.ceil(),
        Policy::Adaptive(a) if f >= 1.0 - a.delta() => return v_opp_best,
        Policy::Adaptive(_) => raw.floor(),
    };
    (shares as u64).clamp(1, v_opp_best.max(1))
}
