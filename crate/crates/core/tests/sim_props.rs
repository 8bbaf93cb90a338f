mod common;

use alob::analytics::{
    inefficiency_scan, log_lags, mechanical_impact_approx, penetration_stats, signature_plot,
    signature_slope, weighted_line,
};
use alob::dar::{sample_autocorr, yule_walker_fit};
use alob::flow::{DarParams, SignSeries};
use alob::io::ingest::{ingest, read_events, write_events};
use alob::io::tables::{read_trades, write_trades};
use alob::sim::{run_reduced, simulate, FlowSpec, PredictorSpec, ReducedConfig, SimConfig, SimError};
use alob::taker::{Policy, TothPolicy};
use common::baseline_config;

fn toth(zeta: f64, n: usize, seed: u64) -> SimConfig {
    let mut c = SimConfig::new(
        0.1,
        0.5,
        0.01,
        FlowSpec::Iid,
        Policy::Toth(TothPolicy::new(zeta).unwrap()),
    );
    c.predictor = PredictorSpec::None;
    c.n_trades = n;
    c.seed = seed;
    c
}

#[test]
fn depth_and_trade_rate_match_inputs() {
    let cfg = toth(1.0, 50_000, 3);
    let out = simulate(&cfg, false).unwrap();
    let rho = cfg.rho_inf_lots();
    assert!((out.stats.warmup_depth_lots - rho).abs() / rho < 0.1);
    let steps = (out.stats.steps - out.stats.warmup_steps) as f64;
    let rate = out.stats.trade_rate(out.log.len(), cfg.dt);
    let sd = (cfg.mu * (1.0 - cfg.mu) / steps).sqrt() / cfg.dt;
    assert!((rate - cfg.mu).abs() < 4.0 * sd, "{rate} vs {}", cfg.mu);
}

#[test]
fn returns_decompose_exactly() {
    let log = simulate(&baseline_config(0.6, 0.05, 20_000, 4), false).unwrap().log;
    for w in log.records.windows(2) {
        let r = &w[0];
        assert_eq!(r.r, r.r_mech + r.r_quote);
        assert!((r.r - (w[1].p_log - r.p_log)).abs() < 1e-12);
        assert!(r.r_mech == 0.0 || r.r_mech.signum() == r.eps as f64);
        assert_eq!(r.penetrated, r.v_mo >= r.v_opp_best);
        assert!(r.v_mo >= 1 && r.v_mo <= r.v_opp_best);
    }
}

#[test]
fn same_seed_reproduces_bit_for_bit() {
    let a = simulate(&baseline_config(0.6, 0.05, 5_000, 11), false).unwrap().log;
    let b = simulate(&baseline_config(0.6, 0.05, 5_000, 11), false).unwrap().log;
    let c = simulate(&baseline_config(0.6, 0.05, 5_000, 12), false).unwrap().log;
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn event_export_ingests_to_same_observables() {
    let out = simulate(&baseline_config(0.6, 0.05, 5_000, 21), true).unwrap();
    let events = out.events.unwrap();
    let mut buf = Vec::new();
    write_events(&mut buf, &events).unwrap();
    let reread = read_events(buf.as_slice()).unwrap();
    let (log, report) = ingest(&reread).unwrap();
    assert_eq!(report.dropped_no_quote, 0);
    assert_eq!(log.len(), out.log.len());
    for (a, b) in out.log.records.iter().zip(&log.records) {
        assert_eq!((a.n, a.t, a.eps), (b.n, b.t, b.eps));
        assert_eq!((a.v_ask, a.v_bid, a.v_mo, a.v_opp_best), (b.v_ask, b.v_bid, b.v_mo, b.v_opp_best));
        assert_eq!(a.penetrated, b.penetrated);
        for (u, v) in [
            (a.p_log, b.p_log),
            (a.gap_ask, b.gap_ask),
            (a.gap_bid, b.gap_bid),
            (a.r_mech, b.r_mech),
            (a.r_quote, b.r_quote),
            (a.r, b.r),
        ] {
            assert_eq!(u.to_bits(), v.to_bits());
        }
    }
}

#[test]
fn trade_table_round_trips() {
    let log = simulate(&baseline_config(0.6, 0.05, 3_000, 22), false).unwrap().log;
    let mut buf = Vec::new();
    write_trades(&mut buf, &log).unwrap();
    assert_eq!(read_trades(buf.as_slice()).unwrap(), log);
}

#[test]
fn mechanical_impact_approximation_holds_per_bin() {
    let log = simulate(&baseline_config(0.6, 0.05, 200_000, 31), false).unwrap().log;
    let m = mechanical_impact_approx(&log, 20).unwrap();
    let mut checked = 0;
    for i in 0..m.approx.len() {
        if m.measured.count[i] < 1_000 {
            continue;
        }
        let (got, want) = (m.measured.mean[i], m.approx[i]);
        assert!((got - want).abs() <= 0.05 * got.abs(), "bin {i}: {got} vs {want}");
        checked += 1;
    }
    assert!(checked >= 15);
}

#[test]
fn unit_orders_barely_move_price() {
    let tiny = simulate(&toth(1e3, 20_000, 5), false).unwrap().log;
    let unit = simulate(&toth(1.0, 20_000, 5), false).unwrap().log;
    let s_tiny = signature_plot(&tiny.log_prices(), &[1]).unwrap().sigma[0];
    let s_unit = signature_plot(&unit.log_prices(), &[1]).unwrap().sigma[0];
    assert!(s_tiny < 0.1 * s_unit, "{s_tiny} vs {s_unit}");
}

#[test]
fn iid_flow_is_diffusive() {
    let log = simulate(&toth(1.0, 200_000, 6), false).unwrap().log;
    let est = signature_slope(&log.log_prices(), &log_lags(1, 100, 8), 20).unwrap();
    assert!(est.slope.abs() < 0.02 + 2.0 * est.se, "{} ± {}", est.slope, est.se);
}

#[test]
fn constant_exponent_penetration_flat_for_iid_flow() {
    let mut cfg = toth(1.0, 100_000, 7);
    cfg.predictor = PredictorSpec::Dar { p: 10 };
    let log = simulate(&cfg, false).unwrap().log;
    let pen = penetration_stats(&log, 20).unwrap().penetration;
    let fit = weighted_line(&pen.bin_center, &pen.mean, &pen.se);
    assert!(fit.slope.abs() < 2.0 * fit.slope_se, "{} ± {}", fit.slope, fit.slope_se);
}

#[test]
fn adaptive_book_leaves_no_exploitable_horizon() {
    let log = simulate(&baseline_config(0.6, 0.05, 200_000, 8), false).unwrap().log;
    let signs = log.signs();
    let series = SignSeries::new(signs.clone()).unwrap();
    let params = yule_walker_fit(&sample_autocorr(&series, 50).unwrap(), 50).unwrap().params;
    let scan = inefficiency_scan(&signs, &log.returns(), &params, &[0, 1, 2, 5, 10], 20).unwrap();
    assert!(scan.minimal_horizon.is_some_and(|s| s <= 1), "{:?}", scan.minimal_horizon);
}

#[test]
fn reduced_model_is_efficient_at_zero_horizon() {
    let raw: Vec<f64> = (1..=8).map(|i| 1.0 / i as f64).collect();
    let total: f64 = raw.iter().sum();
    let params = DarParams::new(0.5, raw.iter().map(|w| w / total).collect(), 0.0).unwrap();
    let out = run_reduced(&ReducedConfig {
        a: 1e-3,
        sigma2: 1e-8,
        flow: FlowSpec::Dar(params.clone()),
        predictor: PredictorSpec::Model,
        n_trades: 100_000,
        seed: 9,
        pilot_trades: 0,
    })
    .unwrap();
    let scan = inefficiency_scan(&out.signs, &out.returns, &params, &[0, 1], 5).unwrap();
    assert_eq!(scan.minimal_horizon, Some(0));
}

#[test]
fn invalid_rates_are_rejected() {
    let mut cfg = toth(1.0, 10, 1);
    cfg.mu = 1.5;
    assert!(matches!(simulate(&cfg, false), Err(SimError::ConfigInvalid(_))));
    let mut cfg = toth(1.0, 10, 1);
    cfg.nu = 0.0;
    assert!(matches!(simulate(&cfg, false), Err(SimError::ConfigInvalid(_))));
}
