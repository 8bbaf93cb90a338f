//! End-to-end acceptance runs. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::Instant;

use alob::analytics::{
    conditional_curve, conditional_curve_batched, diffusion_closed_form, log_lags, log_log_slope,
    penetration_stats, signature_plot, signature_slope, weighted_line, ConditionalCurve,
    SlopeEstimate,
};
use alob::dar::{predict, predict_lagged, sample_autocorr, yule_walker_fit, LaggedPredictor};
use alob::flow::{continuation_probability, gen_lmf, DarParams, LmfParams, SignSeries};
use alob::io::ingest::{ingest, read_events, write_events};
use alob::io::tables::write_trades;
use alob::sim::{run_reduced, simulate, FlowSpec, PredictorSpec, ReducedConfig, SimConfig};
use alob::taker::{
    g_exponent_clamped, sample_fraction, AdaptivePolicy, Policy, TothPolicy,
};
use alob::tradelog::TradeLog;
use common::{
    dar_path_expectation, dar_prob_up, baseline_config, ks_critical_1pct, ks_distance,
    tick_gap, zeta_partial_sum,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ALPHA: f64 = 0.5;
const BATCHES: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

fn report(id: u32, name: &str, start: Instant, o: &Outcome) {
    println!(
        "criterion {id:2} {} {name}: {} [{:.1}s]",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail,
        start.elapsed().as_secs_f64()
    );
}

fn dar_weights(p: usize, decay: f64) -> Vec<f64> {
    let raw: Vec<f64> = (1..=p).map(|i| (i as f64).powf(-decay)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|w| w / total).collect()
}

struct Flatness {
    max_dev: f64,
    slope: SlopeEstimate,
}

impl Flatness {
    fn pass(&self) -> bool {
        self.max_dev < 0.1 && self.slope.slope.abs() < 0.02 + 2.0 * self.slope.se
    }

    fn describe(&self) -> String {
        format!(
            "max dev {:.1}%, slope {:+.4} ± {:.4}",
            100.0 * self.max_dev,
            self.slope.slope,
            self.slope.se
        )
    }
}

fn flatness(prices: &[f64], lo: usize, hi: usize) -> Flatness {
    let lags = log_lags(lo, hi, 10);
    let sigma = signature_plot(prices, &lags).unwrap().sigma;
    let mean = sigma.iter().sum::<f64>() / sigma.len() as f64;
    let max_dev = sigma
        .iter()
        .map(|s| (s - mean).abs() / mean)
        .fold(0.0, f64::max);
    Flatness {
        max_dev,
        slope: signature_slope(prices, &lags, BATCHES).unwrap(),
    }
}

/// Mean of `σ(ℓ)` over `[1, 1000]` with its spread across contiguous segments.
fn plateau(prices: &[f64]) -> (f64, f64) {
    let lags = log_lags(1, 1000, 10);
    let level = |p: &[f64]| {
        let s = signature_plot(p, &lags).unwrap().sigma;
        s.iter().sum::<f64>() / s.len() as f64
    };
    let size = prices.len() / BATCHES;
    let per: Vec<f64> = (0..BATCHES)
        .map(|i| level(&prices[i * size..(i + 1) * size]))
        .collect();
    let m = per.iter().sum::<f64>() / BATCHES as f64;
    let var = per.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    (level(prices), (var / BATCHES as f64).sqrt())
}

// 1
fn exact_diffusivity() -> Outcome {
    let params = DarParams::new(0.5, dar_weights(10, 1.5), 0.0).unwrap();
    let (a, sigma2) = (0.01, 1e-4);
    let out = run_reduced(&ReducedConfig {
        a,
        sigma2,
        flow: FlowSpec::Dar(params.clone()),
        predictor: PredictorSpec::Model,
        n_trades: 10_000_000,
        seed: 101,
        pilot_trades: 0,
    })
    .unwrap();
    let acf = sample_autocorr(&SignSeries::new(out.signs.clone()).unwrap(), 10).unwrap();
    let rho: Vec<f64> = (0..=10).map(|k| acf.at(k)).collect();
    let want = diffusion_closed_form(&params, a, sigma2, &rho).sqrt();
    let lags = [1, 10, 100, 1000];
    let got = signature_plot(&out.log_prices, &lags).unwrap().sigma;
    let devs: Vec<f64> = got.iter().map(|s| (s - want).abs() / want).collect();
    let detail = lags
        .iter()
        .zip(&devs)
        .map(|(l, d)| format!("ℓ={l} {:.2}%", 100.0 * d))
        .collect::<Vec<_>>()
        .join(", ");
    Outcome::new(devs.iter().all(|d| *d < 0.01), format!("D = {want:.5e}; {detail}"))
}

struct BaselineRun {
    pi: f64,
    delta: f64,
    log: TradeLog,
}

fn baseline_runs() -> Vec<BaselineRun> {
    let mut runs = Vec::new();
    for (i, &(pi, delta)) in [(0.6, 0.05), (0.6, 0.2), (0.9, 0.05), (0.9, 0.2)]
        .iter()
        .enumerate()
    {
        let cfg = baseline_config(pi, delta, 1_000_000, 200 + i as u64);
        runs.push(BaselineRun {
            pi,
            delta,
            log: simulate(&cfg, false).unwrap().log,
        });
    }
    runs
}

// 2
fn flat_signature(runs: &[BaselineRun]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let f = flatness(&r.log.log_prices(), 1, 1000);
        pass &= f.pass();
        parts.push(format!("π={} δ={}: {}", r.pi, r.delta, f.describe()));
    }
    Outcome::new(pass, parts.join("; "))
}

/// Cumulative returns measured in ticks at the price of each trade.
fn tick_path(log: &TradeLog) -> Vec<f64> {
    let mut q = 0.0;
    log.records
        .iter()
        .map(|r| {
            let here = q;
            q += r.r / tick_gap(r, 1.0);
            here
        })
        .collect()
}

// 3
fn volatility_ordering(runs: &[BaselineRun]) -> Outcome {
    let levels: Vec<(f64, f64)> = runs.iter().map(|r| plateau(&tick_path(&r.log))).collect();
    let find = |pi: f64, delta: f64| {
        let i = runs
            .iter()
            .position(|r| r.pi == pi && r.delta == delta)
            .unwrap();
        levels[i]
    };
    let z = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0) / (a.1 * a.1 + b.1 * b.1).sqrt();
    let mut pass = true;
    let mut parts = Vec::new();
    for pi in [0.6, 0.9] {
        let zd = z(find(pi, 0.05), find(pi, 0.2));
        pass &= zd.abs() < 2.0;
        parts.push(format!("π={pi} δ effect z={zd:+.2}"));
    }
    for delta in [0.05, 0.2] {
        let zp = z(find(0.6, delta), find(0.9, delta));
        pass &= zp > 2.0;
        parts.push(format!("δ={delta} σ(0.6)-σ(0.9) z={zp:+.2}"));
    }
    let sig = levels
        .iter()
        .zip(runs)
        .map(|(l, r)| format!("σ(π={},δ={})={:.4} ticks", r.pi, r.delta, l.0))
        .collect::<Vec<_>>()
        .join(" ");
    Outcome::new(pass, format!("{}; {sig}", parts.join(", ")))
}

fn toth_config(zeta: f64, nu: f64, lambda: f64, n: usize, seed: u64) -> SimConfig {
    let mut c = SimConfig::new(
        0.1,
        lambda,
        nu,
        FlowSpec::Lmf(LmfParams::new(1.5, 1.0).unwrap()),
        Policy::Toth(TothPolicy::new(zeta).unwrap()),
    );
    c.lot_size = 1;
    c.predictor = PredictorSpec::Private;
    c.n_trades = n;
    c.seed = seed;
    c
}

fn short_slope(zeta: f64) -> f64 {
    let log = simulate(&toth_config(zeta, 0.01, 0.5, 200_000, 300), false)
        .unwrap()
        .log;
    let lags = log_lags(1, 10, 10);
    let sigma = signature_plot(&log.log_prices(), &lags).unwrap().sigma;
    let lx: Vec<f64> = lags.iter().map(|&l| l as f64).collect();
    log_log_slope(&lx, &sigma)
}

/// Bisection in `ln ζ` for the zero of the short-lag signature slope.
fn tune_zeta() -> Option<f64> {
    let (mut lo, mut hi) = (1.0f64.ln(), 4.0f64.ln());
    let f_lo = short_slope(lo.exp());
    let f_hi = short_slope(hi.exp());
    if f_lo.signum() == f_hi.signum() {
        return None;
    }
    for _ in 0..8 {
        let mid = 0.5 * (lo + hi);
        if short_slope(mid.exp()).signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some((0.5 * (lo + hi)).exp())
}

// 4
fn toth_superdiffusive(zeta: Option<f64>) -> Outcome {
    let Some(zeta) = zeta else {
        return Outcome::new(false, "no sign change of the ℓ∈[1,10] slope for ζ in [1, 4]");
    };
    let log = simulate(&toth_config(zeta, 0.01, 0.5, 1_000_000, 301), false)
        .unwrap()
        .log;
    let est = signature_slope(&log.log_prices(), &log_lags(30, 300, 10), BATCHES).unwrap();
    Outcome::new(
        est.slope - 2.0 * est.se > 0.05,
        format!("ζc = {zeta:.3}; slope over [30,300] {:+.4} ± {:.4}", est.slope, est.se),
    )
}

// 5
fn dar_horizon() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, p) in [50usize, 200].into_iter().enumerate() {
        let mut cfg = baseline_config(0.6, 0.05, 3_000_000, 400 + i as u64);
        cfg.predictor = PredictorSpec::Dar { p };
        let prices = simulate(&cfg, false).unwrap().log.log_prices();
        let flat = flatness(&prices, 1, p - 1);
        let late = signature_slope(&prices, &log_lags(2 * p, 10 * p, 10), BATCHES).unwrap();
        pass &= flat.pass() && late.slope - 2.0 * late.se > 0.0;
        parts.push(format!(
            "p={p}: ℓ<p {}; slope over [{}, {}] {:+.4} ± {:.4}",
            flat.describe(),
            2 * p,
            10 * p,
            late.slope,
            late.se
        ));
    }
    Outcome::new(pass, parts.join("; "))
}

fn bins_outside_2se(curve: &ConditionalCurve, target: impl Fn(usize) -> f64) -> Vec<(usize, f64)> {
    (0..curve.len())
        .map(|i| (i, (curve.mean[i] - target(i)) / curve.se[i]))
        .filter(|(_, z)| z.abs() > 2.0)
        .collect()
}

// 6
fn linear_laws(log: &TradeLog) -> Outcome {
    let pen = penetration_stats(log, 20).unwrap().penetration;
    let fit = weighted_line(&pen.bin_center, &pen.mean, &pen.se);
    let slope_ok = (fit.slope + ALPHA).abs() < 2.0 * fit.slope_se;
    let icept_ok = (fit.intercept - ALPHA).abs() < 2.0 * fit.intercept_se;

    let x = log.correctness().unwrap();
    let tick = 1.0;
    let y: Vec<f64> = log
        .records
        .iter()
        .map(|r| r.eps as f64 * r.r / tick_gap(r, tick))
        .collect();
    let curve = conditional_curve(&y, &x, 20).unwrap();
    let off = bins_outside_2se(&curve, |i| 0.5 * ALPHA * (1.0 - curve.bin_center[i]));
    let worst = off.iter().map(|(_, z)| z.abs()).fold(0.0, f64::max);
    Outcome::new(
        slope_ok && icept_ok && off.is_empty(),
        format!(
            "slope {:+.4} ± {:.4}, intercept {:.4} ± {:.4}; E[εr|x] bins beyond 2 SE: {}/{} (max |z| {worst:.2})",
            fit.slope,
            fit.slope_se,
            fit.intercept,
            fit.intercept_se,
            off.len(),
            curve.len()
        ),
    )
}

/// Counts sign agreements of `E[v_B - v_A | ε̂]` with `expected_sign · sign(ε̂)`
/// over bins that lie entirely on one side of zero.
fn volume_signs(curve: &ConditionalCurve, expected_sign: f64) -> (usize, usize, String) {
    let mut ok = 0;
    let mut used = 0;
    let mut zs = Vec::new();
    for i in 0..curve.len() {
        let side = if curve.bin_lo[i] > 0.0 {
            1.0
        } else if curve.bin_hi[i] < 0.0 {
            -1.0
        } else {
            continue;
        };
        used += 1;
        let z = expected_sign * side * curve.mean[i] / curve.se[i];
        if z > 2.0 {
            ok += 1;
        }
        zs.push(format!("{z:.1}"));
    }
    (ok, used, zs.join(" "))
}

fn volume_gap(log: &TradeLog) -> Vec<f64> {
    log.records
        .iter()
        .map(|r| r.v_bid as f64 - r.v_ask as f64)
        .collect()
}

// 7
fn conditional_volumes(log: &TradeLog, zeta: Option<f64>) -> Outcome {
    let signs = log.signs();
    let p = 500;
    let series = SignSeries::new(signs.clone()).unwrap();
    let params = yule_walker_fit(&sample_autocorr(&series, p).unwrap(), p)
        .unwrap()
        .params;
    let hat = LaggedPredictor::new(&params, 0).series(&signs);
    let dv = volume_gap(log);
    let (x, y): (Vec<f64>, Vec<f64>) = hat
        .iter()
        .zip(&dv)
        .filter_map(|(h, v)| h.map(|h| (h, *v)))
        .unzip();
    let curve = conditional_curve_batched(&y, &x, 20, 30).unwrap();
    let (ok, used, zs) = volume_signs(&curve, 1.0);
    let adaptive_ok = ok == used && used > 0;

    let Some(zeta) = zeta else {
        return Outcome::new(
            false,
            format!("adaptive {ok}/{used} bins (z: {zs}); no tuned ζ for the low-cancellation run"),
        );
    };
    let mut cfg = toth_config(zeta, 1e-4, 0.005, 300_000, 700);
    cfg.base_price_ticks = 10_000;
    cfg.warmup_check = false;
    let toth = simulate(&cfg, false).unwrap().log;
    let hat = toth.predictions().unwrap();
    let curve = conditional_curve_batched(&volume_gap(&toth), &hat, 20, 30).unwrap();
    let (tok, tused, tzs) = volume_signs(&curve, -1.0);
    let flip_ok = tok == tused && tused > 0;
    Outcome::new(
        adaptive_ok && flip_ok,
        format!("adaptive {ok}/{used} bins (z: {zs}); ν=1e-4 inverted {tok}/{tused} bins (z: {tzs})"),
    )
}

// 8
fn lmf_autocorrelation() -> Outcome {
    let n = 10_000_000;
    let replicates = 5;
    let acf = |pi: f64, seed: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (signs, _) = gen_lmf(&LmfParams::new(1.5, pi).unwrap(), n, &mut rng);
        let est = sample_autocorr(&signs, 1000).unwrap();
        (0..=1000).map(|k| est.at(k)).collect::<Vec<f64>>()
    };
    let median = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        v[v.len() / 2]
    };
    let lags = log_lags(10, 1000, 10);
    let lx: Vec<f64> = lags.iter().map(|&l| l as f64).collect();
    let band = |c: &[f64]| c[64..=256].iter().sum::<f64>();
    let mut slopes = Vec::new();
    let mut full_band = Vec::new();
    let mut damped_band = Vec::new();
    for i in 0..replicates {
        let full = acf(1.0, 800 + i);
        let ly: Vec<f64> = lags.iter().map(|&l| full[l]).collect();
        slopes.push(log_log_slope(&lx, &ly));
        full_band.push(band(&full));
        damped_band.push(band(&acf(0.6, 900 + i)));
    }
    let each = slopes.iter().map(|s| format!("{s:+.3}")).collect::<Vec<_>>().join(" ");
    let slope = median(slopes);
    let ratio = median(damped_band) / median(full_band);
    let want = 0.6f64.powf(1.5);
    let rel = (ratio - want).abs() / want;
    Outcome::new(
        (slope + 0.5).abs() <= 0.1 && rel < 0.2,
        format!(
            "median ACF slope {slope:+.3} (replicates {each}); damping {ratio:.3} vs {want:.3} ({:.1}%)",
            100.0 * rel
        ),
    )
}

fn random_dar<R: Rng>(rng: &mut R, p: usize) -> DarParams {
    let raw: Vec<f64> = (0..p).map(|_| rng.random_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    DarParams::new(
        rng.random_range(0.0..0.99),
        raw.iter().map(|w| w / total).collect(),
        rng.random_range(-0.9..0.9),
    )
    .unwrap()
}

fn random_history<R: Rng>(rng: &mut R, len: usize) -> Vec<i8> {
    (0..len).map(|_| if rng.random_bool(0.5) { 1 } else { -1 }).collect()
}

// 9
fn oracle_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(900);
    let mut one_step: f64 = 0.0;
    let mut tower: f64 = 0.0;
    for _ in 0..500 {
        let p = rng.random_range(1..=2);
        let params = random_dar(&mut rng, p);
        let hist = random_history(&mut rng, p);
        let oracle = 2.0 * dar_prob_up(&params, &hist) - 1.0;
        one_step = one_step.max((predict(&params, &hist).unwrap().value - oracle).abs());

        let p = rng.random_range(1..=3);
        let params = random_dar(&mut rng, p);
        let hist = random_history(&mut rng, p + 2);
        let s = rng.random_range(0..=10);
        let oracle = dar_path_expectation(&params, &hist, s);
        let direct = predict_lagged(&params, &hist, s).unwrap().value;
        let kernel = LaggedPredictor::new(&params, s).apply(&hist);
        tower = tower.max((direct - oracle).abs()).max((kernel - oracle).abs());
    }

    let p1 = continuation_probability(1.5, 1);
    let p1_oracle = zeta_partial_sum(2.5, 2.0, 200_000) / zeta_partial_sum(2.5, 1.0, 200_000);
    let p1_ok = (p1 - p1_oracle).abs() < 1e-9 && (p1 - 0.2546).abs() <= 1e-4;
    let mut pm_dev: f64 = 0.0;
    for m in [50u64, 100, 1000, 100_000] {
        let approx = (m as f64 / (m as f64 + 1.0)).powf(1.5);
        pm_dev = pm_dev.max((continuation_probability(1.5, m) - approx).abs() / approx);
    }

    let mut identity: f64 = 0.0;
    for _ in 0..10_000 {
        let policy =
            AdaptivePolicy::new(rng.random_range(1e-3..=0.5), rng.random_range(1e-3..0.999)).unwrap();
        let x = rng.random_range(-1.0..0.999_999);
        let (g, clamped) = g_exponent_clamped(&policy, x);
        if !clamped {
            identity = identity.max((policy.delta().powf(g) - policy.alpha() * (1.0 - x)).abs());
        }
    }

    let n = 20_000;
    let mut ks_ok = true;
    for (policy, x) in [
        (Policy::Toth(TothPolicy::new(1.5).unwrap()), 0.0),
        (Policy::Adaptive(AdaptivePolicy::new(0.5, 0.05).unwrap()), 0.4),
    ] {
        let k = policy.exponent(x).0;
        let mut sample: Vec<f64> = (0..n).map(|_| sample_fraction(&policy, x, &mut rng)).collect();
        ks_ok &= ks_distance(&mut sample, |f| 1.0 - (1.0 - f).powf(k)) < ks_critical_1pct(n);
    }

    Outcome::new(
        one_step < 1e-12 && tower < 1e-10 && p1_ok && pm_dev < 0.01 && identity < 1e-12 && ks_ok,
        format!(
            "one-step {one_step:.1e}, tower {tower:.1e}, P1 {p1:.6}, P_m dev {:.3}%, δ^g {identity:.1e}, KS {}",
            100.0 * pm_dev,
            if ks_ok { "ok" } else { "rejected" }
        ),
    )
}

// 10
fn determinism_and_round_trip() -> Outcome {
    let cfg = baseline_config(0.6, 0.05, 20_000, 1000);
    let bytes = |log: &TradeLog| {
        let mut buf = Vec::new();
        write_trades(&mut buf, log).unwrap();
        buf
    };
    let first = simulate(&cfg, true).unwrap();
    let second = simulate(&cfg, false).unwrap();
    let same = bytes(&first.log) == bytes(&second.log);

    let mut buf = Vec::new();
    write_events(&mut buf, first.events.as_ref().unwrap()).unwrap();
    let (back, _) = ingest(&read_events(buf.as_slice()).unwrap()).unwrap();
    let identical = back.len() == first.log.len()
        && first.log.records.iter().zip(&back.records).all(|(a, b)| {
            (a.n, a.eps, a.v_ask, a.v_bid, a.v_mo, a.v_opp_best, a.penetrated)
                == (b.n, b.eps, b.v_ask, b.v_bid, b.v_mo, b.v_opp_best, b.penetrated)
                && [
                    (a.t, b.t),
                    (a.p_log, b.p_log),
                    (a.gap_ask, b.gap_ask),
                    (a.gap_bid, b.gap_bid),
                    (a.r_mech, b.r_mech),
                    (a.r_quote, b.r_quote),
                    (a.r, b.r),
                ]
                .iter()
                .all(|(u, v)| u.to_bits() == v.to_bits())
        });
    Outcome::new(
        same && identical,
        format!(
            "double run {}, export/ingest {} over {} trades",
            if same { "byte-identical" } else { "differs" },
            if identical { "identical" } else { "differs" },
            first.log.len()
        ),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut failed = 0;
    let mut record = |id: u32, name: &str, o: Outcome| {
        report(id, name, start, &o);
        if !o.pass {
            failed += 1;
        }
    };

    record(9, "oracle suites", oracle_suites());
    record(10, "determinism and round trip", determinism_and_round_trip());
    record(1, "reduced model diffusivity", exact_diffusivity());
    record(8, "metaorder sign autocorrelation", lmf_autocorrelation());

    let runs = baseline_runs();
    record(2, "flat signature plot", flat_signature(&runs));
    record(3, "volatility against δ and π", volatility_ordering(&runs));
    let canonical = &runs[0].log;
    record(6, "linear penetration and impact", linear_laws(canonical));

    let zeta = tune_zeta();
    record(4, "constant-exponent super-diffusion", toth_superdiffusive(zeta));
    record(7, "conditional best volumes", conditional_volumes(canonical, zeta));
    drop(runs);

    record(5, "DAR predictor horizon", dar_horizon());

    println!(
        "acceptance: {} of 10 criteria failed [{:.1}s]",
        failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
