//! Market-order sign generators: IID, discrete autoregressive DAR(p), and the
//! single-metaorder splitting model with a noise background.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use thiserror::Error;

use crate::zeta::hurwitz_zeta;

#[derive(Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("DAR order must be positive")]
    EmptyPhi,
    #[error("memory parameter chi={0} outside [0, 1)")]
    InvalidChi(f64),
    #[error("phi must be non-negative and sum to one (sum = {0})")]
    InvalidPhi(f64),
    #[error("marginal mean mu_z={0} outside [-1, 1]")]
    InvalidMean(f64),
    #[error("tail exponent beta={0} must exceed 1")]
    InvalidBeta(f64),
    #[error("participation ratio pi={0} outside (0, 1]")]
    InvalidParticipation(f64),
    #[error("size truncation must be at least 1")]
    InvalidTruncation,
}

/// Ordered sequence of trade signs, each `+1` or `-1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SignSeries(Vec<i8>);

impl SignSeries {
    pub fn new(signs: Vec<i8>) -> Option<Self> {
        signs
            .iter()
            .all(|&s| s == 1 || s == -1)
            .then_some(SignSeries(signs))
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&s| s as f64).collect()
    }

    pub fn into_inner(self) -> Vec<i8> {
        self.0
    }
}

/// Parameters of a DAR(p) sign process: with probability `chi * phi[i-1]` the
/// next value copies the one `i` steps back, otherwise it is a fresh draw from
/// the ±1 marginal with mean `mu_z`.
#[derive(Debug, Clone, PartialEq)]
pub struct DarParams {
    chi: f64,
    phi: Vec<f64>,
    mu_z: f64,
}

impl DarParams {
    pub fn new(chi: f64, phi: Vec<f64>, mu_z: f64) -> Result<Self, FlowError> {
        if phi.is_empty() {
            return Err(FlowError::EmptyPhi);
        }
        if !(0.0..1.0).contains(&chi) {
            return Err(FlowError::InvalidChi(chi));
        }
        let sum: f64 = phi.iter().sum();
        if phi.iter().any(|&x| !(x >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
            return Err(FlowError::InvalidPhi(sum));
        }
        if !(-1.0..=1.0).contains(&mu_z) {
            return Err(FlowError::InvalidMean(mu_z));
        }
        Ok(DarParams { chi, phi, mu_z })
    }

    pub fn order(&self) -> usize {
        self.phi.len()
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn mu_z(&self) -> f64 {
        self.mu_z
    }

    /// Effective lag weights `chi * phi_i`.
    pub fn weights(&self) -> Vec<f64> {
        self.phi.iter().map(|&f| self.chi * f).collect()
    }
}

/// Draw from the ±1 marginal with mean `mu`.
fn marginal_sign<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> i8 {
    if rng.random::<f64>() < 0.5 * (1.0 + mu) {
        1
    } else {
        -1
    }
}

/// Stateful DAR(p) sign generator.
#[derive(Debug, Clone)]
pub struct DarGenerator {
    params: DarParams,
    lag: WeightedIndex<f64>,
    /// Ring buffer of the last p values; `head` is the most recent.
    history: Vec<i8>,
    head: usize,
}

impl DarGenerator {
    /// Seeds the history with p IID marginal draws and discards a burn-in of
    /// 10·p values.
    pub fn new<R: Rng + ?Sized>(params: DarParams, rng: &mut R) -> Self {
        let p = params.order();
        let history = (0..p).map(|_| marginal_sign(params.mu_z, rng)).collect();
        let lag = WeightedIndex::new(&params.phi).expect("validated phi");
        let mut gen = DarGenerator {
            params,
            lag,
            history,
            head: p - 1,
        };
        for _ in 0..10 * p {
            gen.next_sign(rng);
        }
        gen
    }

    pub fn params(&self) -> &DarParams {
        &self.params
    }

    /// Value `i` steps back (i = 1 is the latest).
    fn back(&self, i: usize) -> i8 {
        let p = self.history.len();
        self.history[(self.head + p + 1 - i) % p]
    }

    pub fn next_sign<R: Rng + ?Sized>(&mut self, rng: &mut R) -> i8 {
        let x = if rng.random::<f64>() < self.params.chi {
            let i = self.lag.sample(rng) + 1;
            self.back(i)
        } else {
            marginal_sign(self.params.mu_z, rng)
        };
        let p = self.history.len();
        self.head = (self.head + 1) % p;
        self.history[self.head] = x;
        x
    }
}

pub fn gen_dar<R: Rng + ?Sized>(params: &DarParams, n: usize, rng: &mut R) -> SignSeries {
    let mut gen = DarGenerator::new(params.clone(), rng);
    SignSeries((0..n).map(|_| gen.next_sign(rng)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmfParams {
    pub beta: f64,
    pub pi: f64,
    pub l_max: u64,
}

impl LmfParams {
    pub const DEFAULT_L_MAX: u64 = 10_000_000;

    pub fn new(beta: f64, pi: f64) -> Result<Self, FlowError> {
        Self::with_truncation(beta, pi, Self::DEFAULT_L_MAX)
    }

    pub fn with_truncation(beta: f64, pi: f64, l_max: u64) -> Result<Self, FlowError> {
        if !(beta > 1.0) || !beta.is_finite() {
            return Err(FlowError::InvalidBeta(beta));
        }
        if !(pi > 0.0 && pi <= 1.0) {
            return Err(FlowError::InvalidParticipation(pi));
        }
        if l_max == 0 {
            return Err(FlowError::InvalidTruncation);
        }
        Ok(LmfParams { beta, pi, l_max })
    }

    /// Autocorrelation decay exponent `beta - 1`.
    pub fn gamma(&self) -> f64 {
        self.beta - 1.0
    }
}

/// Probability that a metaorder which has already executed `m` child trades
/// executes at least one more: `ζ(1+β, m+1) / ζ(1+β, m)`.
pub fn continuation_probability(beta: f64, m: u64) -> f64 {
    if m == 0 {
        return 1.0;
    }
    let s = 1.0 + beta;
    hurwitz_zeta(s, m as f64 + 1.0) / hurwitz_zeta(s, m as f64)
}

/// Metaorder state seen by the trader before a trade.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LmfState {
    /// Sign of the active metaorder.
    pub sign: i8,
    /// Total child trades of the active metaorder.
    pub size: u64,
    /// Child trades executed so far.
    pub executed: u64,
}

impl LmfState {
    /// Conditional mean of the next sign given the metaorder state:
    /// `sign * pi * P_m`.
    pub fn prediction(&self, params: &LmfParams) -> f64 {
        self.sign as f64 * params.pi * continuation_probability(params.beta, self.executed)
    }
}

/// Discrete Pareto sizes `p_L ∝ L^{-(1+β)}` on `1..=l_max`, sampled by
/// inverting the survival function.
#[derive(Debug, Clone)]
pub struct ParetoSizes {
    s: f64,
    l_max: u64,
    /// `survival[L-1] = P(size >= L)` for `L = 1..=table_len + 1`.
    survival: Vec<f64>,
    zeta_cut: f64,
    norm: f64,
}

impl ParetoSizes {
    const TABLE: u64 = 1 << 16;

    pub fn new(beta: f64, l_max: u64) -> Self {
        assert!(beta > 1.0 && l_max >= 1);
        let s = 1.0 + beta;
        let zeta_cut = hurwitz_zeta(s, l_max as f64 + 1.0);
        let norm = hurwitz_zeta(s, 1.0) - zeta_cut;
        let k = l_max.min(Self::TABLE);
        let mut survival = vec![0.0; k as usize + 1];
        let mut acc = if k < l_max {
            (hurwitz_zeta(s, k as f64 + 1.0) - zeta_cut) / norm
        } else {
            0.0
        };
        survival[k as usize] = acc;
        for l in (1..=k).rev() {
            acc += (l as f64).powf(-s) / norm;
            survival[l as usize - 1] = acc;
        }
        ParetoSizes {
            s,
            l_max,
            survival,
            zeta_cut,
            norm,
        }
    }

    pub fn pmf(&self, l: u64) -> f64 {
        if l == 0 || l > self.l_max {
            0.0
        } else {
            (l as f64).powf(-self.s) / self.norm
        }
    }

    /// `P(size >= l)`.
    pub fn survival(&self, l: u64) -> f64 {
        if l <= 1 {
            1.0
        } else if l > self.l_max {
            0.0
        } else if (l as usize) <= self.survival.len() {
            self.survival[l as usize - 1]
        } else {
            (hurwitz_zeta(self.s, l as f64) - self.zeta_cut) / self.norm
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = 1.0 - rng.random::<f64>();
        // largest L with survival(L) >= u
        let table_top = self.survival.len() as u64;
        let (mut lo, mut hi) = if self.survival(table_top) >= u && table_top < self.l_max {
            (table_top, self.l_max)
        } else {
            (1, table_top.min(self.l_max))
        };
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if self.survival(mid) >= u {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }
}

pub fn sample_pareto_size<R: Rng + ?Sized>(beta: f64, l_max: u64, rng: &mut R) -> u64 {
    ParetoSizes::new(beta, l_max).sample(rng)
}

/// One active metaorder at a time, trading with probability `pi`; the rest of
/// the flow is fair noise.
#[derive(Debug, Clone)]
pub struct LmfGenerator {
    params: LmfParams,
    sizes: ParetoSizes,
    state: LmfState,
}

impl LmfGenerator {
    pub fn new<R: Rng + ?Sized>(params: LmfParams, rng: &mut R) -> Self {
        let sizes = ParetoSizes::new(params.beta, params.l_max);
        let state = LmfState {
            sign: marginal_sign(0.0, rng),
            size: sizes.sample(rng),
            executed: 0,
        };
        LmfGenerator {
            params,
            sizes,
            state,
        }
    }

    pub fn params(&self) -> &LmfParams {
        &self.params
    }

    pub fn state(&self) -> LmfState {
        self.state
    }

    /// Emits the next sign together with the state that preceded it.
    pub fn next_sign<R: Rng + ?Sized>(&mut self, rng: &mut R) -> (LmfState, i8) {
        let before = self.state;
        let sign = if rng.random::<f64>() < self.params.pi {
            if self.state.executed == self.state.size {
                self.state = LmfState {
                    sign: marginal_sign(0.0, rng),
                    size: self.sizes.sample(rng),
                    executed: 0,
                };
            }
            self.state.executed += 1;
            self.state.sign
        } else {
            marginal_sign(0.0, rng)
        };
        (before, sign)
    }
}

pub fn gen_lmf<R: Rng + ?Sized>(
    params: &LmfParams,
    n: usize,
    rng: &mut R,
) -> (SignSeries, Vec<LmfState>) {
    let mut gen = LmfGenerator::new(*params, rng);
    let mut signs = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        let (st, s) = gen.next_sign(rng);
        signs.push(s);
        states.push(st);
    }
    (SignSeries(signs), states)
}

pub fn gen_iid<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SignSeries {
    SignSeries((0..n).map(|_| marginal_sign(0.0, rng)).collect())
}
