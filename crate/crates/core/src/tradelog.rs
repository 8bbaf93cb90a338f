//! Per-trade records consumed by every diagnostic.

/// One market order with the book state just before it and the returns that
/// follow it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradeRecord {
    pub n: u64,
    /// Event time.
    pub t: f64,
    pub eps: i8,
    pub eps_hat_pub: Option<f64>,
    pub eps_hat_priv: Option<f64>,
    /// Correctness `ε·ε̂` seen by the policy.
    pub x: Option<f64>,
    /// Log-midprice before the trade.
    pub p_log: f64,
    pub v_ask: u64,
    pub v_bid: u64,
    pub gap_ask: f64,
    pub gap_bid: f64,
    pub f: Option<f64>,
    pub v_mo: u64,
    pub v_opp_best: u64,
    pub penetrated: bool,
    pub r_mech: f64,
    pub r_quote: f64,
    /// Log-midprice change up to the next trade, `r_mech + r_quote`.
    pub r: f64,
}

impl TradeRecord {
    pub fn opposite_gap(&self) -> f64 {
        if self.eps > 0 {
            self.gap_ask
        } else {
            self.gap_bid
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TradeLog {
    pub records: Vec<TradeRecord>,
}

impl TradeLog {
    pub fn new(records: Vec<TradeRecord>) -> Self {
        TradeLog { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn signs(&self) -> Vec<i8> {
        self.records.iter().map(|r| r.eps).collect()
    }

    pub fn log_prices(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.p_log).collect()
    }

    pub fn returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.r).collect()
    }

    /// Signed returns `ε r`.
    pub fn signed_returns(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.eps as f64 * r.r).collect()
    }

    /// Public prediction if present, otherwise the private one.
    pub fn predictions(&self) -> Option<Vec<f64>> {
        self.records
            .iter()
            .map(|r| r.eps_hat_pub.or(r.eps_hat_priv))
            .collect()
    }

    pub fn correctness(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.x).collect()
    }
}
