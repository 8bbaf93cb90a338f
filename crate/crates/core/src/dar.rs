//! DAR(p) estimation by Yule–Walker, sign predictors and prediction error.

use nalgebra::{DMatrix, DVector};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::flow::{DarParams, SignSeries};

#[derive(Debug, Error, PartialEq)]
pub enum DarError {
    #[error("series of length {n} too short for {k} lags (need more than {})", 10 * k)]
    SeriesTooShort { n: usize, k: usize },
    #[error("series has zero variance")]
    DegenerateSeries,
    #[error("Yule-Walker system is singular or nearly so")]
    SingularSystem,
    #[error("recovered memory chi={0} outside [0, 1)")]
    InvalidMemory(f64),
    #[error("order {p} exceeds available lags {k}")]
    OrderTooLarge { p: usize, k: usize },
    #[error("history has {got} values, need {need}")]
    InsufficientHistory { need: usize, got: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

/// Sample autocorrelation `rho[k]` for `k = 0..=K`, with `rho[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct AutocorrEstimate {
    pub rho: Vec<f64>,
    pub variance: f64,
    pub n_obs: usize,
}

impl AutocorrEstimate {
    pub fn max_lag(&self) -> usize {
        self.rho.len() - 1
    }

    pub fn at(&self, k: usize) -> f64 {
        self.rho[k]
    }

    pub fn autocovariance(&self, k: usize) -> f64 {
        self.rho[k] * self.variance
    }
}

pub fn sample_autocorr(series: &SignSeries, k: usize) -> Result<AutocorrEstimate, DarError> {
    autocorr(&series.to_f64(), k)
}

/// Biased (divide-by-n), mean-centred sample autocorrelation of a real series.
pub fn autocorr(x: &[f64], k: usize) -> Result<AutocorrEstimate, DarError> {
    let n = x.len();
    if n <= 10 * k || n < 2 {
        return Err(DarError::SeriesTooShort { n, k });
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let cov = if k <= 32 {
        lagged_products_direct(&centred, k)
    } else {
        lagged_products_fft(&centred, k)
    };
    let c0 = cov[0];
    if !(c0 > 1e-300 * n as f64) {
        return Err(DarError::DegenerateSeries);
    }
    let rho = cov.iter().map(|c| c / c0).collect();
    Ok(AutocorrEstimate {
        rho,
        variance: c0 / n as f64,
        n_obs: n,
    })
}

fn lagged_products_direct(x: &[f64], k: usize) -> Vec<f64> {
    (0..=k)
        .map(|lag| x[..x.len() - lag].iter().zip(&x[lag..]).map(|(a, b)| a * b).sum())
        .collect()
}

/// `Σ_i x_i x_{i+lag}` for every lag up to `k`, by blockwise FFT correlation
/// so that memory stays proportional to the lag range.
fn lagged_products_fft(x: &[f64], k: usize) -> Vec<f64> {
    let size = (4 * (k + 1)).next_power_of_two().max(4096);
    let block = size - k;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut out = vec![0.0; k + 1];
    let mut a = vec![Complex::new(0.0, 0.0); size];
    let mut b = vec![Complex::new(0.0, 0.0); size];
    let n = x.len();
    let mut start = 0;
    while start < n {
        let end = (start + block).min(n);
        let ext = (start + block + k).min(n);
        a.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        b.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (dst, &v) in a.iter_mut().zip(&x[start..end]) {
            dst.re = v;
        }
        for (dst, &v) in b.iter_mut().zip(&x[start..ext]) {
            dst.re = v;
        }
        fwd.process(&mut a);
        fwd.process(&mut b);
        for (ai, bi) in a.iter_mut().zip(&b) {
            *ai = ai.conj() * bi;
        }
        inv.process(&mut a);
        for (o, c) in out.iter_mut().zip(&a) {
            *o += c.re / size as f64;
        }
        start = end;
    }
    out
}

/// Yule–Walker estimate: raw `chi * phi_i` coefficients and the smoothed,
/// projected parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct DarFit {
    pub raw: Vec<f64>,
    pub params: DarParams,
}

/// Solves `rho_k = Σ_i c_i rho_{k-i}`, `k = 1..=p`, for `c_i = chi * phi_i`.
pub fn yule_walker_raw(acf: &AutocorrEstimate, p: usize) -> Result<Vec<f64>, DarError> {
    let k = acf.max_lag();
    if p == 0 || p > k {
        return Err(DarError::OrderTooLarge { p, k });
    }
    let r = DMatrix::from_fn(p, p, |i, j| acf.rho[i.abs_diff(j)]);
    let rhs = DVector::from_iterator(p, acf.rho[1..=p].iter().copied());
    let lu = r.lu();
    let diag = lu.u().diagonal().map(f64::abs);
    let (lo, hi) = (diag.min(), diag.max());
    if !(hi > 0.0) || lo / hi < 1e-12 {
        return Err(DarError::SingularSystem);
    }
    let sol = lu.solve(&rhs).ok_or(DarError::SingularSystem)?;
    Ok(sol.iter().copied().collect())
}

pub fn yule_walker_fit(acf: &AutocorrEstimate, p: usize) -> Result<DarFit, DarError> {
    let raw = yule_walker_raw(acf, p)?;
    let params = smooth_and_project(&raw)?;
    Ok(DarFit { raw, params })
}

const SMOOTH_BEFORE: usize = 5;
const SMOOTH_AFTER: usize = 4;

/// Centred ten-point moving average (truncated at the ends), negatives
/// clipped to zero, then split into `chi` and a normalised `phi`.
pub fn smooth_and_project(raw: &[f64]) -> Result<DarParams, DarError> {
    let p = raw.len();
    if p == 0 {
        return Err(DarError::OrderTooLarge { p, k: 0 });
    }
    let smoothed: Vec<f64> = (0..p)
        .map(|i| {
            let lo = i.saturating_sub(SMOOTH_BEFORE);
            let hi = (i + SMOOTH_AFTER).min(p - 1);
            let w = &raw[lo..=hi];
            (w.iter().sum::<f64>() / w.len() as f64).max(0.0)
        })
        .collect();
    let chi: f64 = smoothed.iter().sum();
    if !(chi < 1.0) {
        return Err(DarError::InvalidMemory(chi));
    }
    let phi = if chi > 0.0 {
        let mut phi: Vec<f64> = smoothed.iter().map(|c| c / chi).collect();
        // absorb rounding so the simplex constraint holds tightly
        let drift = phi.iter().sum::<f64>() - 1.0;
        let top = phi
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        phi[top] -= drift;
        phi
    } else {
        vec![1.0 / p as f64; p]
    };
    DarParams::new(chi, phi, 0.0).map_err(|_| DarError::InvalidMemory(chi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionSource {
    PublicDar,
    PrivateLmf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignPrediction {
    pub value: f64,
    pub horizon: usize,
    pub source: PredictionSource,
}

/// One-step predictor. `history` is chronological; its last element is the
/// most recent sign.
pub fn predict(params: &DarParams, history: &[i8]) -> Result<SignPrediction, DarError> {
    predict_lagged(params, history, 0)
}

/// Forecast `s` steps beyond the next trade, substituting earlier forecasts
/// for signs that are not yet observed.
pub fn predict_lagged(
    params: &DarParams,
    history: &[i8],
    s: usize,
) -> Result<SignPrediction, DarError> {
    let p = params.order();
    if history.len() < p {
        return Err(DarError::InsufficientHistory {
            need: p,
            got: history.len(),
        });
    }
    let w = params.weights();
    let base = params.mu_z() * (1.0 - params.chi());
    // y[j] for j < p holds observed signs oldest..newest, later entries forecasts
    let mut y: Vec<f64> = history[history.len() - p..]
        .iter()
        .map(|&v| v as f64)
        .collect();
    for _ in 0..=s {
        let t = y.len();
        let v = base + w.iter().enumerate().map(|(i, c)| c * y[t - 1 - i]).sum::<f64>();
        y.push(v);
    }
    Ok(SignPrediction {
        value: *y.last().unwrap(),
        horizon: s,
        source: PredictionSource::PublicDar,
    })
}

/// Precomputed linear form of [`predict_lagged`] at a fixed horizon:
/// `value = constant + Σ_j kernel[j] * ε_{n-1-j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaggedPredictor {
    pub horizon: usize,
    pub kernel: Vec<f64>,
    pub constant: f64,
}

impl LaggedPredictor {
    pub fn new(params: &DarParams, s: usize) -> Self {
        let p = params.order();
        let w = params.weights();
        let base = params.mu_z() * (1.0 - params.chi());
        // forecasts[t] = (coefficients on ε_{n-1-j}, constant) for horizon t
        let mut forecasts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(s + 1);
        for t in 0..=s {
            let mut coef = vec![0.0; p];
            let mut cst = base;
            for (i, &c) in w.iter().enumerate() {
                let lag = i + 1;
                if lag <= t {
                    let (fc, fk) = &forecasts[t - lag];
                    for (a, b) in coef.iter_mut().zip(fc) {
                        *a += c * b;
                    }
                    cst += c * fk;
                } else {
                    coef[lag - t - 1] += c;
                }
            }
            forecasts.push((coef, cst));
        }
        let (kernel, constant) = forecasts.pop().unwrap();
        LaggedPredictor {
            horizon: s,
            kernel,
            constant,
        }
    }

    pub fn order(&self) -> usize {
        self.kernel.len()
    }

    /// Prediction from a chronological window whose last element is ε_{n-1}.
    pub fn apply(&self, history: &[i8]) -> f64 {
        let n = history.len();
        debug_assert!(n >= self.kernel.len());
        self.constant
            + self
                .kernel
                .iter()
                .enumerate()
                .map(|(j, c)| c * history[n - 1 - j] as f64)
                .sum::<f64>()
    }

    /// Predictions for every position of `signs`: entry `n` forecasts
    /// `signs[n + horizon]` from `signs[..n]`; `None` until `p` signs exist.
    pub fn series(&self, signs: &[i8]) -> Vec<Option<f64>> {
        let p = self.kernel.len();
        (0..signs.len())
            .map(|n| (n >= p).then(|| self.apply(&signs[..n])))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseReport {
    pub mse: f64,
    /// `1 + mean(ε̂²)`, the error of a predictor uncorrelated with the signs.
    pub null_bound: f64,
}

pub fn mse(eps: &[i8], eps_hat: &[f64]) -> Result<MseReport, DarError> {
    if eps.len() != eps_hat.len() {
        return Err(DarError::LengthMismatch(eps.len(), eps_hat.len()));
    }
    let n = eps.len().max(1) as f64;
    let err = eps
        .iter()
        .zip(eps_hat)
        .map(|(&e, h)| (e as f64 - h).powi(2))
        .sum::<f64>()
        / n;
    let sq = eps_hat.iter().map(|h| h * h).sum::<f64>() / n;
    Ok(MseReport {
        mse: err,
        null_bound: 1.0 + sq,
    })
}
