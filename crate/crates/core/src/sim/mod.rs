//! Event-step simulation of the book driven by correlated market orders.

mod grid;
mod reduced;

pub use grid::{Fill, GridParams, LazyGrid};
pub use reduced::{run_reduced, ReducedConfig, ReducedOutput};

use rand::Rng;
use thiserror::Error;

use crate::dar::{autocorr, yule_walker_fit, DarError, DarFit, LaggedPredictor};
use crate::flow::{DarGenerator, DarParams, LmfGenerator, LmfParams, LmfState};
use crate::io::ingest::EventRow;
use crate::rng::{stream, Stream};
use crate::taker::{fraction_from_uniform, market_volume, Policy};
use crate::tradelog::{TradeLog, TradeRecord};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),
    #[error("depth after warm-up is {measured:.2} lots per tick, expected about {expected:.2}")]
    NonStationaryWarmup { measured: f64, expected: f64 },
    #[error("public predictor fit failed: {0}")]
    PredictorFit(#[from] DarError),
    #[error("midprice left the positive price range")]
    PriceFloor,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FlowSpec {
    Iid,
    Dar(DarParams),
    Lmf(LmfParams),
}

/// Source of the sign prediction `ε̂` fed to the policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorSpec {
    /// `ε̂ = 0`.
    None,
    /// Conditional mean given the active metaorder (LMF flow only).
    Private,
    /// DAR(p) fitted by Yule–Walker on a pilot run of the same flow.
    Dar { p: usize },
    /// The generating DAR parameters (DAR flow only).
    Model,
    /// `ε̂ = ε`.
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Market-order rate per unit time.
    pub mu: f64,
    /// Limit-order rate per unit time per tick.
    pub lambda: f64,
    /// Cancellation rate per lot per unit time.
    pub nu: f64,
    pub dt: f64,
    pub tick_size: f64,
    pub lot_size: u64,
    pub grid_halfwidth: i64,
    pub base_price_ticks: i64,
    pub n_trades: usize,
    /// Warm-up steps; `None` means `10 / (ν Δt)`.
    pub burn_in: Option<u64>,
    pub seed: u64,
    pub flow: FlowSpec,
    pub policy: Policy,
    pub predictor: PredictorSpec,
    /// Length of the pilot sign series used to fit a DAR predictor.
    pub pilot_trades: usize,
    /// Fail when the far-book depth after warm-up is off by more than 20%.
    pub warmup_check: bool,
}

impl SimConfig {
    pub fn new(mu: f64, lambda: f64, nu: f64, flow: FlowSpec, policy: Policy) -> Self {
        let predictor = match flow {
            FlowSpec::Lmf(_) => PredictorSpec::Private,
            FlowSpec::Dar(_) => PredictorSpec::Model,
            FlowSpec::Iid => PredictorSpec::None,
        };
        SimConfig {
            mu,
            lambda,
            nu,
            dt: 1.0,
            tick_size: 1.0,
            lot_size: 100,
            grid_halfwidth: 500,
            base_price_ticks: 1000,
            n_trades: 100_000,
            burn_in: None,
            seed: 0,
            flow,
            policy,
            predictor,
            pilot_trades: 1_000_000,
            warmup_check: true,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::ConfigInvalid(m));
        for (name, v) in [
            ("mu", self.mu),
            ("lambda", self.lambda),
            ("nu", self.nu),
            ("dt", self.dt),
            ("tick", self.tick_size),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if self.mu * self.dt > 0.2 {
            return bad("mu*dt must not exceed 0.2".into());
        }
        if self.nu * self.dt > 0.2 {
            return bad("nu*dt must not exceed 0.2".into());
        }
        if self.lot_size == 0 {
            return bad("lot must be positive".into());
        }
        if self.grid_halfwidth < 10 {
            return bad("grid must be at least 10 ticks".into());
        }
        if self.base_price_ticks <= self.grid_halfwidth / 10 {
            return bad("base_price must be well above zero".into());
        }
        check_predictor(&self.flow, self.predictor)?;
        if let PredictorSpec::Dar { p } = self.predictor {
            if self.pilot_trades <= 10 * p {
                return bad(format!("pilot must exceed {} trades for p={p}", 10 * p));
            }
        }
        Ok(())
    }

    pub fn burn_in_steps(&self) -> u64 {
        self.burn_in
            .unwrap_or_else(|| (10.0 / (self.nu * self.dt)).ceil() as u64)
    }

    /// Stationary depth `λ w / ν` in lots per tick.
    pub fn rho_inf_lots(&self) -> f64 {
        self.lambda / self.nu
    }

    pub fn grid_params(&self) -> GridParams {
        GridParams {
            tick_size: self.tick_size,
            lot_size: self.lot_size,
            arrival: self.lambda * self.dt,
            cancel: self.nu * self.dt,
            halfwidth: self.grid_halfwidth,
        }
    }
}

pub(crate) fn check_predictor(flow: &FlowSpec, pred: PredictorSpec) -> Result<(), SimError> {
    match (pred, flow) {
        (PredictorSpec::Private, FlowSpec::Lmf(_)) => Ok(()),
        (PredictorSpec::Private, _) => Err(SimError::ConfigInvalid(
            "private predictor needs lmf flow".into(),
        )),
        (PredictorSpec::Model, FlowSpec::Dar(_)) => Ok(()),
        (PredictorSpec::Model, _) => Err(SimError::ConfigInvalid(
            "model predictor needs dar flow".into(),
        )),
        (PredictorSpec::Dar { p: 0 }, _) => {
            Err(SimError::ConfigInvalid("predictor order must be positive".into()))
        }
        _ => Ok(()),
    }
}

/// Sign generator for any supported flow.
#[derive(Debug, Clone)]
pub enum FlowSource {
    Iid,
    Dar(DarGenerator),
    Lmf(LmfGenerator),
}

impl FlowSource {
    pub fn new<R: Rng + ?Sized>(spec: &FlowSpec, rng: &mut R) -> Self {
        match spec {
            FlowSpec::Iid => FlowSource::Iid,
            FlowSpec::Dar(p) => FlowSource::Dar(DarGenerator::new(p.clone(), rng)),
            FlowSpec::Lmf(p) => FlowSource::Lmf(LmfGenerator::new(*p, rng)),
        }
    }

    /// Next sign, with the metaorder state preceding it for LMF flow.
    pub fn next_sign<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (i8, Option<LmfState>) {
        match self {
            FlowSource::Iid => (if rng.random::<bool>() { 1 } else { -1 }, None),
            FlowSource::Dar(g) => (g.next_sign(rng), None),
            FlowSource::Lmf(g) => {
                let (st, s) = g.next_sign(rng);
                (s, Some(st))
            }
        }
    }
}

/// Rolling sign history feeding a linear DAR predictor.
#[derive(Debug, Clone)]
pub(crate) struct PublicPredictor {
    kernel: LaggedPredictor,
    history: Vec<i8>,
}

impl PublicPredictor {
    pub(crate) fn new(params: &DarParams) -> Self {
        PublicPredictor {
            kernel: LaggedPredictor::new(params, 0),
            history: Vec::new(),
        }
    }

    pub(crate) fn order(&self) -> usize {
        self.kernel.order()
    }

    pub(crate) fn predict(&self) -> Option<f64> {
        (self.history.len() >= self.kernel.order()).then(|| self.kernel.apply(&self.history))
    }

    pub(crate) fn push(&mut self, eps: i8) {
        let p = self.kernel.order();
        if self.history.len() >= 4 * p.max(64) {
            self.history.drain(..self.history.len() - p);
        }
        self.history.push(eps);
    }
}

/// Fits DAR(p) by Yule–Walker to a pilot series of the given flow.
pub fn fit_pilot(flow: &FlowSpec, p: usize, n: usize, seed: u64) -> Result<DarFit, DarError> {
    let mut rng = stream(seed, Stream::Pilot);
    let mut src = FlowSource::new(flow, &mut rng);
    let x: Vec<f64> = (0..n).map(|_| src.next_sign(&mut rng).0 as f64).collect();
    let acf = autocorr(&x, p)?;
    yule_walker_fit(&acf, p)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimStats {
    pub steps: u64,
    /// Step at which recording began.
    pub warmup_steps: u64,
    /// Market orders executed, warm-up included.
    pub trades_total: u64,
    pub warmup_depth_lots: f64,
    /// Policy exponents floored at the clamp threshold.
    pub clamped_exponents: u64,
    pub pilot_fit: Option<DarFit>,
}

impl SimStats {
    /// Realized market orders per unit time after warm-up.
    pub fn trade_rate(&self, recorded: usize, dt: f64) -> f64 {
        recorded as f64 / ((self.steps - self.warmup_steps) as f64 * dt)
    }
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub log: TradeLog,
    pub stats: SimStats,
    pub events: Option<Vec<EventRow>>,
}

pub fn run(config: &SimConfig) -> Result<TradeLog, SimError> {
    Ok(simulate(config, false)?.log)
}

pub fn simulate(config: &SimConfig, emit_events: bool) -> Result<SimOutput, SimError> {
    config.validate()?;
    let seed = config.seed;
    let mut limits = stream(seed, Stream::Limits);
    let mut cancels = stream(seed, Stream::Cancels);
    let mut arrivals = stream(seed, Stream::MarketArrivals);
    let mut flow_rng = stream(seed, Stream::Flow);
    let mut frac_rng = stream(seed, Stream::Fraction);
    let mut grid = LazyGrid::new(
        config.grid_params(),
        config.base_price_ticks,
        stream(seed, Stream::Grid),
    );
    let mut flow = FlowSource::new(&config.flow, &mut flow_rng);
    let mut stats = SimStats::default();

    let mut public = match (config.predictor, &config.flow) {
        (PredictorSpec::Dar { p }, _) => {
            let fit = fit_pilot(&config.flow, p, config.pilot_trades, seed)?;
            let pp = PublicPredictor::new(&fit.params);
            stats.pilot_fit = Some(fit);
            Some(pp)
        }
        (PredictorSpec::Model, FlowSpec::Dar(params)) => Some(PublicPredictor::new(params)),
        _ => None,
    };
    let lmf_params = match &config.flow {
        FlowSpec::Lmf(p) => Some(*p),
        _ => None,
    };
    let warm_trades = public.as_ref().map_or(0, |p| p.order() as u64);
    let burn = config.burn_in_steps();
    let p_mo = config.mu * config.dt;
    let n = config.n_trades;

    let mut records: Vec<TradeRecord> = Vec::with_capacity(n);
    let mut events = emit_events.then(Vec::new);
    let mut recording = false;
    let mut pending: Option<(TradeRecord, f64)> = None;

    while records.len() < n || pending.is_some() {
        grid.advance_step(&mut limits, &mut cancels);
        if grid.step_count().is_multiple_of(4096) {
            grid.prune();
        }
        if !grid::bernoulli(p_mo, &mut arrivals) {
            continue;
        }
        if grid.best_bid() <= 1 {
            return Err(SimError::PriceFloor);
        }
        let t = grid.step_count() as f64 * config.dt;
        let snap = grid.snapshot();
        if recording || pending.is_some() {
            if let Some(ev) = events.as_mut() {
                ev.push(EventRow::quote(t, &snap));
            }
        }
        if let Some((mut rec, p_after)) = pending.take() {
            rec.r_quote = snap.log_mid - p_after;
            rec.r = rec.r_mech + rec.r_quote;
            records.push(rec);
            if records.len() == n {
                break;
            }
        }
        if !recording && grid.step_count() >= burn && stats.trades_total >= warm_trades {
            recording = true;
            stats.warmup_steps = grid.step_count();
            stats.warmup_depth_lots = grid.mean_depth_lots(20, 60);
            let expected = config.rho_inf_lots();
            if config.warmup_check
                && (stats.warmup_depth_lots - expected).abs() > 0.2 * expected
            {
                return Err(SimError::NonStationaryWarmup {
                    measured: stats.warmup_depth_lots,
                    expected,
                });
            }
            if let Some(ev) = events.as_mut() {
                ev.push(EventRow::quote(t, &snap));
            }
        }

        let (eps, state) = flow.next_sign(&mut flow_rng);
        let hat_pub = public.as_ref().and_then(PublicPredictor::predict);
        let hat_priv = match (state, lmf_params) {
            (Some(s), Some(p)) => Some(s.prediction(&p)),
            _ => None,
        };
        let hat = match config.predictor {
            PredictorSpec::None => 0.0,
            PredictorSpec::Private => hat_priv.unwrap_or(0.0),
            PredictorSpec::Dar { .. } | PredictorSpec::Model => hat_pub.unwrap_or(0.0),
            PredictorSpec::Oracle => eps as f64,
        };
        let x = eps as f64 * hat;
        let (k, clamped) = config.policy.exponent(x);
        stats.clamped_exponents += u64::from(clamped);
        let f = fraction_from_uniform(k, frac_rng.random::<f64>());
        let v_opp = snap.opposite_volume(eps);
        let v = market_volume(&config.policy, f, v_opp);
        let fill = grid.execute(eps, v);
        let post = grid.snapshot();
        if let Some(p) = public.as_mut() {
            p.push(eps);
        }
        stats.trades_total += 1;

        if recording {
            if let Some(ev) = events.as_mut() {
                ev.push(EventRow::trade(t, eps, &snap, fill.executed));
                ev.push(EventRow::quote(t, &post));
            }
            let rec = TradeRecord {
                n: records.len() as u64,
                t,
                eps,
                eps_hat_pub: hat_pub,
                eps_hat_priv: hat_priv,
                x: Some(x),
                p_log: snap.log_mid,
                v_ask: snap.v_ask,
                v_bid: snap.v_bid,
                gap_ask: snap.gap_ask,
                gap_bid: snap.gap_bid,
                f: Some(f),
                v_mo: fill.executed,
                v_opp_best: v_opp,
                penetrated: fill.penetrated,
                r_mech: post.log_mid - snap.log_mid,
                r_quote: 0.0,
                r: 0.0,
            };
            pending = Some((rec, post.log_mid));
        }
    }
    stats.steps = grid.step_count();
    Ok(SimOutput {
        log: TradeLog::new(records),
        stats,
        events,
    })
}
