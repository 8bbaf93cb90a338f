//! Independent reference computations shared by the integration tests.

#![allow(dead_code)]

use alob::flow::DarParams;

/// P(next sign = +1) by summing over every branch of one DAR step: copy
/// lag `i` with probability `χ φ_i`, else draw fresh from the marginal.
pub fn dar_prob_up(params: &DarParams, history: &[i8]) -> f64 {
    let chi = params.chi();
    let up = 0.5 * (1.0 + params.mu_z());
    let n = history.len();
    let mut total = 0.0;
    for copy in [true, false] {
        let pv = if copy { chi } else { 1.0 - chi };
        if copy {
            for (i, &phi) in params.phi().iter().enumerate() {
                if history[n - 1 - i] == 1 {
                    total += pv * phi;
                }
            }
        } else {
            total += pv * up;
        }
    }
    total
}

/// E[ε_{n+s} | history] by enumerating all `2^s` intermediate sign paths.
pub fn dar_path_expectation(params: &DarParams, history: &[i8], s: usize) -> f64 {
    let up = dar_prob_up(params, history);
    if s == 0 {
        return 2.0 * up - 1.0;
    }
    let mut h = history.to_vec();
    h.push(1);
    let plus = dar_path_expectation(params, &h, s - 1);
    *h.last_mut().unwrap() = -1;
    let minus = dar_path_expectation(params, &h, s - 1);
    up * plus + (1.0 - up) * minus
}

/// Σ_{k≥0} (k+a)^{-s} as a direct partial sum of `terms` terms plus the
/// integral and half-term tail corrections.
pub fn zeta_partial_sum(s: f64, a: f64, terms: usize) -> f64 {
    let head: f64 = (0..terms).rev().map(|k| (k as f64 + a).powf(-s)).sum();
    let x = terms as f64 + a;
    head + x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s)
}

/// Kolmogorov-Smirnov distance between a sample and a continuous CDF.
pub fn ks_distance(sample: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Adaptive taker on metaorder flow with the private predictor, at the rates
/// used throughout the simulation experiments.
pub fn baseline_config(pi: f64, delta: f64, n_trades: usize, seed: u64) -> alob::sim::SimConfig {
    use alob::flow::LmfParams;
    use alob::sim::{FlowSpec, PredictorSpec, SimConfig};
    use alob::taker::{AdaptivePolicy, Policy};
    let mut c = SimConfig::new(
        0.1,
        0.5,
        0.01,
        FlowSpec::Lmf(LmfParams::new(1.5, pi).unwrap()),
        Policy::Adaptive(AdaptivePolicy::new(0.5, delta).unwrap()),
    );
    c.predictor = PredictorSpec::Private;
    c.n_trades = n_trades;
    c.seed = seed;
    c
}

/// One-tick log gap at the midprice of each trade, used to express returns
/// in ticks.
pub fn tick_gap(r: &alob::tradelog::TradeRecord, tick: f64) -> f64 {
    (1.0 + tick / r.p_log.exp()).ln()
}

/// Stationary sign autocorrelation of a DAR process up to `max_lag`, from the
/// Yule-Walker recursion solved by Gauss-Seidel sweeps on the first `p - 1`
/// lags.
pub fn dar_acf(params: &alob::flow::DarParams, max_lag: usize) -> Vec<f64> {
    let chi = params.chi();
    let phi = params.phi();
    let p = phi.len();
    let mut rho = vec![0.0; max_lag.max(p) + 1];
    rho[0] = 1.0;
    let step = |rho: &[f64], k: usize| -> f64 {
        chi * phi
            .iter()
            .enumerate()
            .map(|(i, w)| w * rho[(k as i64 - i as i64 - 1).unsigned_abs() as usize])
            .sum::<f64>()
    };
    for _ in 0..10_000 {
        let mut change: f64 = 0.0;
        for k in 1..p {
            let v = step(&rho, k);
            change = change.max((v - rho[k]).abs());
            rho[k] = v;
        }
        if change < 1e-15 {
            break;
        }
    }
    for k in p.max(1)..rho.len() {
        rho[k] = step(&rho, k);
    }
    rho.truncate(max_lag + 1);
    rho
}
