//! Diagnostics computed from trade logs: signature plots, quantile-binned
//! conditional curves, penetration statistics, the mechanical-impact
//! approximation, inefficiency scans and closed forms of the reduced model.

use thiserror::Error;

use crate::dar::LaggedPredictor;
use crate::flow::DarParams;
use crate::tradelog::TradeLog;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticsError {
    #[error("series of length {n} too short, need more than {need}")]
    SeriesTooShort { n: usize, need: usize },
    #[error("conditioning variable has {distinct} distinct values, fewer than {k} bins")]
    DegenerateBins { distinct: usize, k: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("trade log lacks the {0} column")]
    MissingColumn(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignaturePlot {
    pub lags: Vec<usize>,
    pub sigma: Vec<f64>,
    pub se: Vec<f64>,
}

/// `σ(ℓ) = sqrt(E[(p_{n+ℓ} - p_n)²] / ℓ)` over overlapping windows, with
/// batch-means standard errors.
pub fn signature_plot(prices: &[f64], lags: &[usize]) -> Result<SignaturePlot, AnalyticsError> {
    let n = prices.len();
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    if max_lag == 0 || n <= 10 * max_lag {
        return Err(AnalyticsError::SeriesTooShort {
            n,
            need: 10 * max_lag.max(1),
        });
    }
    let mut sigma = Vec::with_capacity(lags.len());
    let mut se = Vec::with_capacity(lags.len());
    for &l in lags {
        let sq: Vec<f64> = prices
            .windows(l + 1)
            .map(|w| (w[l] - w[0]).powi(2) / l as f64)
            .collect();
        let (m, m_se) = batch_means(&sq, batch_count(sq.len(), l));
        let s = m.sqrt();
        sigma.push(s);
        se.push(if s > 0.0 { m_se / (2.0 * s) } else { 0.0 });
    }
    Ok(SignaturePlot {
        lags: lags.to_vec(),
        sigma,
        se,
    })
}

fn batch_count(len: usize, lag: usize) -> usize {
    (len / (10 * lag)).clamp(2, 30)
}

/// Mean of `x` and its standard error from `b` contiguous batches.
pub fn batch_means(x: &[f64], b: usize) -> (f64, f64) {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let b = b.clamp(2, n.max(2));
    let size = n / b;
    if size == 0 {
        return (mean, f64::NAN);
    }
    let batch: Vec<f64> = (0..b)
        .map(|i| x[i * size..(i + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let bm = batch.iter().sum::<f64>() / b as f64;
    let var = batch.iter().map(|v| (v - bm).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}

/// Lags spaced evenly in log scale between `lo` and `hi` inclusive.
pub fn log_lags(lo: usize, hi: usize, per_decade: usize) -> Vec<usize> {
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let steps = (((b - a) / std::f64::consts::LN_10) * per_decade as f64).ceil() as usize;
    let mut out: Vec<usize> = (0..=steps)
        .map(|i| (a + (b - a) * i as f64 / steps.max(1) as f64).exp().round() as usize)
        .collect();
    out.dedup();
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeEstimate {
    pub slope: f64,
    pub se: f64,
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Log-log slope of the signature plot over `lags`; the standard error comes
/// from the spread of slopes fitted on `batches` contiguous segments.
pub fn signature_slope(
    prices: &[f64],
    lags: &[usize],
    batches: usize,
) -> Result<SlopeEstimate, AnalyticsError> {
    let lx: Vec<f64> = lags.iter().map(|&l| (l as f64).ln()).collect();
    let full = signature_plot(prices, lags)?;
    let ly: Vec<f64> = full.sigma.iter().map(|s| s.ln()).collect();
    let slope = ols_slope(&lx, &ly);
    let size = prices.len() / batches;
    let per: Vec<f64> = (0..batches)
        .map(|i| {
            let seg = &prices[i * size..(i + 1) * size];
            signature_plot(seg, lags).map(|s| {
                let ly: Vec<f64> = s.sigma.iter().map(|v| v.ln()).collect();
                ols_slope(&lx, &ly)
            })
        })
        .collect::<Result<_, _>>()?;
    let m = per.iter().sum::<f64>() / batches as f64;
    let var = per.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (batches - 1) as f64;
    Ok(SlopeEstimate {
        slope,
        se: (var / batches as f64).sqrt(),
    })
}

/// Slope of `log(y)` against `log(x)` by ordinary least squares.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    ols_slope(&lx, &ly)
}

/// Per-bin statistics of `y` over equal-count quantile bins of `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalCurve {
    pub bin_lo: Vec<f64>,
    pub bin_hi: Vec<f64>,
    pub bin_center: Vec<f64>,
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    pub count: Vec<usize>,
}

impl ConditionalCurve {
    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }
}

/// Indices of `x` split into `k` groups of consecutive ranks with sizes
/// differing by at most one.
pub fn quantile_bins(x: &[f64], k: usize) -> Result<Vec<Vec<usize>>, AnalyticsError> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut distinct = 0;
    let mut prev = None;
    for &i in &order {
        if prev != Some(x[i]) {
            distinct += 1;
            prev = Some(x[i]);
        }
    }
    if k < 2 || distinct < k {
        return Err(AnalyticsError::DegenerateBins { distinct, k });
    }
    let n = x.len();
    let (q, r) = (n / k, n % k);
    let mut bins = Vec::with_capacity(k);
    let mut start = 0;
    for b in 0..k {
        let size = q + usize::from(b < r);
        bins.push(order[start..start + size].to_vec());
        start += size;
    }
    Ok(bins)
}

fn mean_se(v: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let (mut n, mut s, mut s2) = (0usize, 0.0, 0.0);
    for x in v {
        n += 1;
        s += x;
        s2 += x * x;
    }
    if n == 0 {
        return (f64::NAN, f64::NAN, 0);
    }
    let m = s / n as f64;
    let var = if n > 1 {
        ((s2 - n as f64 * m * m) / (n - 1) as f64).max(0.0)
    } else {
        0.0
    };
    (m, (var / n as f64).sqrt(), n)
}

fn curve_from_bins(x: &[f64], y: &[f64], bins: &[Vec<usize>]) -> ConditionalCurve {
    let mut c = ConditionalCurve {
        bin_lo: Vec::new(),
        bin_hi: Vec::new(),
        bin_center: Vec::new(),
        mean: Vec::new(),
        se: Vec::new(),
        count: Vec::new(),
    };
    for b in bins {
        let lo = b.iter().map(|&i| x[i]).fold(f64::INFINITY, f64::min);
        let hi = b.iter().map(|&i| x[i]).fold(f64::NEG_INFINITY, f64::max);
        let (cx, _, _) = mean_se(b.iter().map(|&i| x[i]));
        let (m, se, n) = mean_se(b.iter().map(|&i| y[i]));
        c.bin_lo.push(lo);
        c.bin_hi.push(hi);
        c.bin_center.push(cx);
        c.mean.push(m);
        c.se.push(se);
        c.count.push(n);
    }
    c
}

pub fn conditional_curve(y: &[f64], x: &[f64], k: usize) -> Result<ConditionalCurve, AnalyticsError> {
    if y.len() != x.len() {
        return Err(AnalyticsError::LengthMismatch(y.len(), x.len()));
    }
    let bins = quantile_bins(x, k)?;
    Ok(curve_from_bins(x, y, &bins))
}

/// As [`conditional_curve`], with standard errors from `batches` contiguous
/// blocks of the series so that serial correlation in `y` is accounted for.
pub fn conditional_curve_batched(
    y: &[f64],
    x: &[f64],
    k: usize,
    batches: usize,
) -> Result<ConditionalCurve, AnalyticsError> {
    if y.len() != x.len() {
        return Err(AnalyticsError::LengthMismatch(y.len(), x.len()));
    }
    if batches < 2 || y.len() < batches {
        return Err(AnalyticsError::SeriesTooShort {
            n: y.len(),
            need: batches.max(2),
        });
    }
    let bins = quantile_bins(x, k)?;
    let mut c = curve_from_bins(x, y, &bins);
    let len = y.len();
    for (b, members) in bins.iter().enumerate() {
        let mut sums = vec![0.0; batches];
        let mut counts = vec![0usize; batches];
        for &i in members {
            let j = i * batches / len;
            sums[j] += y[i];
            counts[j] += 1;
        }
        let (m, n) = (c.mean[b], c.count[b] as f64);
        let ss: f64 = sums
            .iter()
            .zip(&counts)
            .map(|(&s, &cnt)| (s - cnt as f64 * m).powi(2))
            .sum();
        let bf = batches as f64;
        c.se[b] = (ss * bf / (bf - 1.0)).sqrt() / n;
    }
    Ok(c)
}

/// Weighted least-squares line through curve points with weights `1/se²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub intercept_se: f64,
}

pub fn weighted_line(x: &[f64], y: &[f64], se: &[f64]) -> LineFit {
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&xi, &yi), &ei) in x.iter().zip(y).zip(se) {
        let w = 1.0 / (ei * ei);
        s += w;
        sx += w * xi;
        sy += w * yi;
        sxx += w * xi * xi;
        sxy += w * xi * yi;
    }
    let det = s * sxx - sx * sx;
    LineFit {
        slope: (s * sxy - sx * sy) / det,
        slope_se: (s / det).sqrt(),
        intercept: (sxx * sy - sx * sxy) / det,
        intercept_se: (sxx / det).sqrt(),
    }
}

/// Penetration frequency and volume profiles conditioned on correctness `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenetrationStats {
    pub penetration: ConditionalCurve,
    pub fraction: ConditionalCurve,
    pub v_mo: ConditionalCurve,
    pub v_opp_best: ConditionalCurve,
}

pub fn penetration_stats(log: &TradeLog, k: usize) -> Result<PenetrationStats, AnalyticsError> {
    let x = log.correctness().ok_or(AnalyticsError::MissingColumn("x"))?;
    let bins = quantile_bins(&x, k)?;
    let col = |f: &dyn Fn(&crate::tradelog::TradeRecord) -> f64| -> Vec<f64> {
        log.records.iter().map(f).collect()
    };
    let pen = col(&|r| f64::from(u8::from(r.penetrated)));
    let v_mo = col(&|r| r.v_mo as f64);
    let v_ob = col(&|r| r.v_opp_best as f64);
    let frac = col(&|r| r.f.unwrap_or(f64::NAN));
    Ok(PenetrationStats {
        penetration: curve_from_bins(&x, &pen, &bins),
        fraction: curve_from_bins(&x, &frac, &bins),
        v_mo: curve_from_bins(&x, &v_mo, &bins),
        v_opp_best: curve_from_bins(&x, &v_ob, &bins),
    })
}

/// Mechanical impact per correctness bin: the measured `E[ε r^M | x]` and
/// its approximation from per-side penetration probabilities and gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanicalImpact {
    pub measured: ConditionalCurve,
    pub approx: Vec<f64>,
}

pub fn mechanical_impact_approx(log: &TradeLog, k: usize) -> Result<MechanicalImpact, AnalyticsError> {
    let x = log.correctness().ok_or(AnalyticsError::MissingColumn("x"))?;
    let bins = quantile_bins(&x, k)?;
    let y: Vec<f64> = log
        .records
        .iter()
        .map(|r| r.eps as f64 * r.r_mech)
        .collect();
    let measured = curve_from_bins(&x, &y, &bins);
    let approx = bins
        .iter()
        .map(|b| {
            [1i8, -1]
                .iter()
                .map(|&side| {
                    let trades: Vec<_> = b
                        .iter()
                        .map(|&i| &log.records[i])
                        .filter(|r| r.eps == side)
                        .collect();
                    if trades.is_empty() {
                        return 0.0;
                    }
                    let pen: Vec<f64> = trades
                        .iter()
                        .filter(|r| r.penetrated)
                        .map(|r| r.opposite_gap() / 4.0)
                        .collect();
                    if pen.is_empty() {
                        return 0.0;
                    }
                    let p = pen.len() as f64 / trades.len() as f64;
                    p * pen.iter().sum::<f64>() / pen.len() as f64
                })
                .sum()
        })
        .collect();
    Ok(MechanicalImpact { measured, approx })
}

/// Outcome of the conditional inefficiency test at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonScan {
    pub horizon: usize,
    /// Bin-wise `E[εr | +|x|] - E[εr | -|x|]` and its standard error.
    pub diff: Vec<f64>,
    pub diff_se: Vec<f64>,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InefficiencyScan {
    pub horizons: Vec<HorizonScan>,
    /// Smallest scanned horizon with no violating bin.
    pub minimal_horizon: Option<usize>,
}

/// For each horizon `s`, predicts `ε_{n+s}` from signs before `n` and checks,
/// on quantile bins of `|x|`, whether correct predictions carry a
/// significantly larger signed return than wrong ones.
pub fn inefficiency_scan(
    signs: &[i8],
    returns: &[f64],
    params: &DarParams,
    horizons: &[usize],
    k: usize,
) -> Result<InefficiencyScan, AnalyticsError> {
    if signs.len() != returns.len() {
        return Err(AnalyticsError::LengthMismatch(signs.len(), returns.len()));
    }
    let mut out = Vec::with_capacity(horizons.len());
    for &s in horizons {
        let pred = LaggedPredictor::new(params, s).series(signs);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (n, hat) in pred.iter().enumerate() {
            if let (Some(h), Some(&e)) = (hat, signs.get(n + s)) {
                x.push(e as f64 * h);
                y.push(e as f64 * returns[n + s]);
            }
        }
        out.push(scan_pairs(&x, &y, s, k)?);
    }
    let minimal_horizon = out.iter().find(|h| h.violations == 0).map(|h| h.horizon);
    Ok(InefficiencyScan {
        horizons: out,
        minimal_horizon,
    })
}

/// Paired-bin comparison of `y` for positive against negative `x`.
pub fn scan_pairs(x: &[f64], y: &[f64], horizon: usize, k: usize) -> Result<HorizonScan, AnalyticsError> {
    let ax: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    let bins = quantile_bins(&ax, k)?;
    let mut diff = Vec::new();
    let mut diff_se = Vec::new();
    let mut violations = 0;
    for b in &bins {
        let (mp, sp, np) = mean_se(b.iter().filter(|&&i| x[i] > 0.0).map(|&i| y[i]));
        let (mn, sn, nn) = mean_se(b.iter().filter(|&&i| x[i] < 0.0).map(|&i| y[i]));
        if np < 2 || nn < 2 {
            continue;
        }
        let d = mp - mn;
        let se = (sp * sp + sn * sn).sqrt();
        if d > 2.0 * se {
            violations += 1;
        }
        diff.push(d);
        diff_se.push(se);
    }
    Ok(HorizonScan {
        horizon,
        diff,
        diff_se,
        violations,
    })
}

/// Per-trade variance `D²` of the reduced model with a DAR predictor, using the
/// sign autocorrelation `rho` (index = lag, `rho[0] = 1`).
pub fn diffusion_closed_form(params: &DarParams, a: f64, sigma2: f64, rho: &[f64]) -> f64 {
    let chi = params.chi();
    let phi = params.phi();
    let p = phi.len();
    assert!(rho.len() >= p, "need autocorrelations up to lag p-1");
    let sq: f64 = phi.iter().map(|f| f * f).sum();
    let mut cross = 0.0;
    for r in 0..p {
        for s in 0..r {
            cross += phi[r] * phi[s] * rho[r - s];
        }
    }
    sigma2 + a * a * (1.0 - chi * chi * sq - 2.0 * chi * chi * cross)
}

/// Propagator `G₀(ℓ) = A χ (1 - Σ_{j<ℓ} φ_j)` for `ℓ = 1..=l_max`.
pub fn propagator(params: &DarParams, a: f64, l_max: usize) -> Vec<f64> {
    let ac = a * params.chi();
    let mut cum = 0.0;
    (1..=l_max)
        .map(|l| {
            if l >= 2 {
                cum += params.phi().get(l - 2).copied().unwrap_or(0.0);
            }
            ac * (1.0 - cum).max(0.0)
        })
        .collect()
}
