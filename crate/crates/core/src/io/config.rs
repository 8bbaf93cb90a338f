//! Flat `key = value` run configuration.
//!
//! Blank lines and text after `#` are ignored. Keys are case-sensitive and
//! every key may appear once.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::flow::{DarParams, LmfParams};
use crate::sim::{FlowSpec, PredictorSpec, ReducedConfig, SimConfig, SimError};
use crate::taker::{AdaptivePolicy, Policy, TothPolicy};

pub const CONFIG_HELP: &str = "\
Configuration files hold one `key = value` per line; `#` starts a comment.

  model        full | reduced                          (default full)

full model
  mu           market orders per unit time             (required)
  lambda       limit orders per unit time per tick     (required)
  nu           cancellation rate per lot               (required)
  dt           step length                             (default 1)
  tick         tick size in price units                (default 1)
  lot          shares per limit order                  (default 100)
  grid         half-width of the price grid in ticks   (default 500)
  base_price   starting midprice in ticks              (default 1000)
  burn_in      warm-up steps                           (default 10/(nu*dt))
  warmup_check true | false                            (default true)

both models
  n_trades     recorded trades                         (default 100000)
  seed         random seed, overridden by --seed       (default 0)
  flow         iid | dar | lmf                         (default iid)
  beta         metaorder size tail exponent (lmf)      (or gamma = beta - 1)
  pi           participation ratio (lmf)               (default 1)
  l_max        metaorder size truncation (lmf)         (default 10000000)
  chi          DAR memory (dar)
  phi          comma-separated DAR lag weights (dar)
  mu_z         DAR marginal mean (dar)                 (default 0)
  predictor    none | private | dar | model | oracle   (default private for lmf,
                                                        model for dar, none for iid)
  p            order of the fitted DAR predictor       (default 500)
  pilot        pilot trades for the DAR fit            (default 1000000)

full model policy
  policy       toth | adaptive      (default adaptive, toth when zeta is set)
  zeta         constant fraction exponent (toth)
  alpha        penetration scale in (0, 1/2] (adaptive) (default 0.5)
  delta        full-take threshold width in (0, 1) (adaptive) (default 0.05)

reduced model
  a            impact scale A in log units             (required)
  sigma2       idiosyncratic return variance           (required)
";

const FULL_KEYS: &[&str] = &[
    "mu", "lambda", "nu", "dt", "tick", "lot", "grid", "base_price", "burn_in", "warmup_check",
    "policy", "zeta", "alpha", "delta",
];
const SHARED_KEYS: &[&str] = &[
    "model", "n_trades", "seed", "flow", "beta", "gamma", "pi", "l_max", "chi", "phi", "mu_z",
    "predictor", "p", "pilot",
];
const REDUCED_KEYS: &[&str] = &["a", "sigma2"];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<SimError> for ConfigError {
    fn from(e: SimError) -> Self {
        ConfigError::Validation(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunConfig {
    Full(SimConfig),
    Reduced(ReducedConfig),
}

impl RunConfig {
    pub fn set_seed(&mut self, seed: u64) {
        match self {
            RunConfig::Full(c) => c.seed = seed,
            RunConfig::Reduced(c) => c.seed = seed,
        }
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn raw(&self, key: &str) -> Option<&(usize, String)> {
        self.map.get(key)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| ConfigError::Parse {
                line: *line,
                msg: format!("{key}: cannot parse {v:?}"),
            }),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError> {
        self.get(key)?
            .ok_or_else(|| ConfigError::Validation(format!("missing required key {key}")))
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.get(key)?.unwrap_or(default))
    }
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError::Validation(msg.into()))
}

fn lex(text: &str) -> Result<Entries, ConfigError> {
    let known: Vec<&str> = FULL_KEYS
        .iter()
        .chain(SHARED_KEYS)
        .chain(REDUCED_KEYS)
        .copied()
        .collect();
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| ConfigError::Parse {
            line,
            msg: "expected key = value".into(),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !known.contains(&k) {
            return Err(ConfigError::Parse {
                line,
                msg: format!("unknown key {k:?}"),
            });
        }
        if map.insert(k.to_string(), (line, v.to_string())).is_some() {
            return Err(ConfigError::Parse {
                line,
                msg: format!("duplicate key {k:?}"),
            });
        }
    }
    Ok(Entries { map })
}

fn flow_spec(e: &Entries) -> Result<FlowSpec, ConfigError> {
    let kind: String = e.or("flow", "iid".to_string())?;
    match kind.as_str() {
        "iid" => Ok(FlowSpec::Iid),
        "lmf" => {
            let beta = match (e.get::<f64>("beta")?, e.get::<f64>("gamma")?) {
                (Some(_), Some(_)) => return invalid("give either beta or gamma, not both"),
                (Some(b), None) => b,
                (None, Some(g)) => g + 1.0,
                (None, None) => return invalid("missing required key beta"),
            };
            let pi = e.or("pi", 1.0)?;
            let l_max = e.or("l_max", LmfParams::DEFAULT_L_MAX)?;
            LmfParams::with_truncation(beta, pi, l_max)
                .map(FlowSpec::Lmf)
                .map_err(|err| ConfigError::Validation(err.to_string()))
        }
        "dar" => {
            let chi: f64 = e.required("chi")?;
            let (line, phi_raw) = e
                .raw("phi")
                .ok_or_else(|| ConfigError::Validation("missing required key phi".into()))?;
            let phi = phi_raw
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| ConfigError::Parse {
                    line: *line,
                    msg: "phi: expected comma-separated numbers".into(),
                })?;
            let mu_z = e.or("mu_z", 0.0)?;
            DarParams::new(chi, phi, mu_z)
                .map(FlowSpec::Dar)
                .map_err(|err| ConfigError::Validation(err.to_string()))
        }
        other => invalid(format!("flow must be iid, dar or lmf, got {other:?}")),
    }
}

fn predictor_spec(e: &Entries, flow: &FlowSpec) -> Result<PredictorSpec, ConfigError> {
    let default = match flow {
        FlowSpec::Lmf(_) => "private",
        FlowSpec::Dar(_) => "model",
        FlowSpec::Iid => "none",
    };
    let kind: String = e.or("predictor", default.to_string())?;
    let spec = match kind.as_str() {
        "none" => PredictorSpec::None,
        "private" => PredictorSpec::Private,
        "dar" => PredictorSpec::Dar { p: e.or("p", 500)? },
        "model" => PredictorSpec::Model,
        "oracle" => PredictorSpec::Oracle,
        other => return invalid(format!("unknown predictor {other:?}")),
    };
    if e.has("p") && !matches!(spec, PredictorSpec::Dar { .. }) {
        return invalid("p applies only to predictor = dar");
    }
    Ok(spec)
}

fn policy(e: &Entries) -> Result<Policy, ConfigError> {
    let default = if e.has("zeta") { "toth" } else { "adaptive" };
    let kind: String = e.or("policy", default.to_string())?;
    match kind.as_str() {
        "toth" => {
            if e.has("alpha") || e.has("delta") {
                return invalid("alpha and delta apply only to policy = adaptive");
            }
            TothPolicy::new(e.required("zeta")?)
                .map(Policy::Toth)
                .map_err(|err| ConfigError::Validation(err.to_string()))
        }
        "adaptive" => {
            if e.has("zeta") {
                return invalid("zeta applies only to policy = toth");
            }
            AdaptivePolicy::new(e.or("alpha", 0.5)?, e.or("delta", 0.05)?)
                .map(Policy::Adaptive)
                .map_err(|err| ConfigError::Validation(err.to_string()))
        }
        other => invalid(format!("policy must be toth or adaptive, got {other:?}")),
    }
}

fn reject(e: &Entries, keys: &[&str], model: &str) -> Result<(), ConfigError> {
    for k in keys {
        if let Some((line, _)) = e.raw(k) {
            return Err(ConfigError::Parse {
                line: *line,
                msg: format!("key {k:?} does not apply to model = {model}"),
            });
        }
    }
    Ok(())
}

pub fn parse_config_str(text: &str) -> Result<RunConfig, ConfigError> {
    let e = lex(text)?;
    let model: String = e.or("model", "full".to_string())?;
    let flow = flow_spec(&e)?;
    let predictor = predictor_spec(&e, &flow)?;
    let n_trades = e.or("n_trades", 100_000usize)?;
    let seed = e.or("seed", 0u64)?;
    let pilot = e.or("pilot", 1_000_000usize)?;
    match model.as_str() {
        "full" => {
            reject(&e, REDUCED_KEYS, "full")?;
            let mut c = SimConfig::new(
                e.required("mu")?,
                e.required("lambda")?,
                e.required("nu")?,
                flow,
                policy(&e)?,
            );
            c.predictor = predictor;
            c.n_trades = n_trades;
            c.seed = seed;
            c.pilot_trades = pilot;
            c.dt = e.or("dt", c.dt)?;
            c.tick_size = e.or("tick", c.tick_size)?;
            c.lot_size = e.or("lot", c.lot_size)?;
            c.grid_halfwidth = e.or("grid", c.grid_halfwidth)?;
            c.base_price_ticks = e.or("base_price", c.base_price_ticks)?;
            c.burn_in = e.get("burn_in")?;
            c.warmup_check = e.or("warmup_check", true)?;
            c.validate()?;
            Ok(RunConfig::Full(c))
        }
        "reduced" => {
            reject(&e, FULL_KEYS, "reduced")?;
            let c = ReducedConfig {
                a: e.required("a")?,
                sigma2: e.required("sigma2")?,
                flow,
                predictor,
                n_trades,
                seed,
                pilot_trades: pilot,
            };
            c.validate()?;
            Ok(RunConfig::Reduced(c))
        }
        other => invalid(format!("model must be full or reduced, got {other:?}")),
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    parse_config_str(&std::fs::read_to_string(path)?)
}
