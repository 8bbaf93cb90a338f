//! Reduced-form price model `r = A (ε - ε̂) + η` with Gaussian `η`.

use rand_distr::{Distribution, Normal};

use super::{check_predictor, fit_pilot, FlowSource, FlowSpec, PredictorSpec, PublicPredictor, SimError};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedConfig {
    /// Impact scale in log units.
    pub a: f64,
    /// Variance of the idiosyncratic return component.
    pub sigma2: f64,
    pub flow: FlowSpec,
    pub predictor: PredictorSpec,
    pub n_trades: usize,
    pub seed: u64,
    pub pilot_trades: usize,
}

impl ReducedConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(SimError::ConfigInvalid("A must be non-negative".into()));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(SimError::ConfigInvalid("sigma2 must be non-negative".into()));
        }
        check_predictor(&self.flow, self.predictor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedOutput {
    /// `n + 1` log-prices starting at zero.
    pub log_prices: Vec<f64>,
    pub signs: Vec<i8>,
    pub predictions: Vec<f64>,
    pub returns: Vec<f64>,
}

pub fn run_reduced(config: &ReducedConfig) -> Result<ReducedOutput, SimError> {
    config.validate()?;
    let mut flow_rng = stream(config.seed, Stream::Flow);
    let mut noise_rng = stream(config.seed, Stream::Noise);
    let noise = Normal::new(0.0, config.sigma2.sqrt()).expect("finite variance");
    let mut flow = FlowSource::new(&config.flow, &mut flow_rng);
    let lmf = match &config.flow {
        FlowSpec::Lmf(p) => Some(*p),
        _ => None,
    };
    let mut public = match (config.predictor, &config.flow) {
        (PredictorSpec::Dar { p }, _) => Some(PublicPredictor::new(
            &fit_pilot(&config.flow, p, config.pilot_trades, config.seed)?.params,
        )),
        (PredictorSpec::Model, FlowSpec::Dar(params)) => Some(PublicPredictor::new(params)),
        _ => None,
    };
    if let Some(pp) = public.as_mut() {
        for _ in 0..pp.order() {
            pp.push(flow.next_sign(&mut flow_rng).0);
        }
    }

    let n = config.n_trades;
    let mut out = ReducedOutput {
        log_prices: Vec::with_capacity(n + 1),
        signs: Vec::with_capacity(n),
        predictions: Vec::with_capacity(n),
        returns: Vec::with_capacity(n),
    };
    let mut p = 0.0;
    out.log_prices.push(p);
    for _ in 0..n {
        let (eps, state) = flow.next_sign(&mut flow_rng);
        let hat = match config.predictor {
            PredictorSpec::None => 0.0,
            PredictorSpec::Private => state
                .zip(lmf)
                .map_or(0.0, |(s, params)| s.prediction(&params)),
            PredictorSpec::Dar { .. } | PredictorSpec::Model => {
                public.as_ref().and_then(PublicPredictor::predict).unwrap_or(0.0)
            }
            PredictorSpec::Oracle => eps as f64,
        };
        if let Some(pp) = public.as_mut() {
            pp.push(eps);
        }
        let r = config.a * (eps as f64 - hat) + noise.sample(&mut noise_rng);
        p += r;
        out.signs.push(eps);
        out.predictions.push(hat);
        out.returns.push(r);
        out.log_prices.push(p);
    }
    Ok(out)
}
