//! Discrete-price-grid limit order book.
//!
//! Prices live on an integer tick grid; each side maps a tick to the number
//! of resting shares at that level. Shares arrive in lots of `lot_size`
//! shares, so a level with `v` shares holds `v / lot_size` full lots plus at
//! most one partial lot left behind by an execution.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use thiserror::Error;

pub type Tick = i64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    /// Side of the book a market order of sign `eps` executes against.
    pub fn opposite_of_sign(eps: i8) -> Side {
        if eps > 0 {
            Side::Ask
        } else {
            Side::Bid
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum BookError {
    #[error("{0:?} side of the book is empty")]
    EmptySide(Side),
    #[error("{0:?} side has a single level; gap undefined")]
    ThinSide(Side),
    #[error("{side:?} limit at tick {tick} would cross the midprice {mid}")]
    CrossingOrder { side: Side, tick: Tick, mid: f64 },
    #[error("market order of {requested} shares exceeds executable liquidity {available}")]
    InsufficientLiquidity { requested: u64, available: u64 },
    #[error("market order volume must be at least one share")]
    ZeroVolume,
}

/// Book state captured immediately before a trade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BookSnapshot {
    pub best_ask: f64,
    pub best_bid: f64,
    pub second_ask: f64,
    pub second_bid: f64,
    pub mid: f64,
    pub log_mid: f64,
    pub log_ask: f64,
    pub log_bid: f64,
    /// Shares at the best ask.
    pub v_ask: u64,
    /// Shares at the best bid.
    pub v_bid: u64,
    /// `ln(second ask) - ln(best ask)`.
    pub gap_ask: f64,
    /// `ln(best bid) - ln(second bid)`.
    pub gap_bid: f64,
}

impl BookSnapshot {
    /// Shares at the best level a market order of sign `eps` would hit.
    pub fn opposite_volume(&self, eps: i8) -> u64 {
        if eps > 0 {
            self.v_ask
        } else {
            self.v_bid
        }
    }

    pub fn opposite_gap(&self, eps: i8) -> f64 {
        if eps > 0 {
            self.gap_ask
        } else {
            self.gap_bid
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecutionReport {
    pub executed: u64,
    /// Levels emptied by the order.
    pub levels_consumed: usize,
    /// Log-midprice after the execution minus log-midprice before it.
    pub r_mech: f64,
    /// The order took the whole best opposite level.
    pub penetrated: bool,
}

/// Natural log of the midprice of a bid/ask pair given in price units.
pub fn log_mid(bid: f64, ask: f64) -> f64 {
    (0.5 * (bid + ask)).ln()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderBook {
    tick_size: f64,
    lot_size: u64,
    bids: BTreeMap<Tick, u64>,
    asks: BTreeMap<Tick, u64>,
}

impl OrderBook {
    pub fn new(tick_size: f64, lot_size: u64) -> Self {
        assert!(tick_size > 0.0, "tick size must be positive");
        assert!(lot_size > 0, "lot size must be positive");
        OrderBook {
            tick_size,
            lot_size,
            bids: BTreeMap::new(),
            asks: BTreeMap::new(),
        }
    }

    /// Builds a book from `(tick, lots)` pairs.
    pub fn from_lots(
        tick_size: f64,
        lot_size: u64,
        bids: &[(Tick, u64)],
        asks: &[(Tick, u64)],
    ) -> Self {
        let mut book = OrderBook::new(tick_size, lot_size);
        for &(t, lots) in bids {
            book.add_shares(Side::Bid, t, lots * lot_size);
        }
        for &(t, lots) in asks {
            book.add_shares(Side::Ask, t, lots * lot_size);
        }
        book
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    pub fn lot_size(&self) -> u64 {
        self.lot_size
    }

    pub fn price(&self, tick: Tick) -> f64 {
        tick as f64 * self.tick_size
    }

    fn levels(&self, side: Side) -> &BTreeMap<Tick, u64> {
        match side {
            Side::Bid => &self.bids,
            Side::Ask => &self.asks,
        }
    }

    fn levels_mut(&mut self, side: Side) -> &mut BTreeMap<Tick, u64> {
        match side {
            Side::Bid => &mut self.bids,
            Side::Ask => &mut self.asks,
        }
    }

    pub fn best_bid(&self) -> Option<Tick> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask(&self) -> Option<Tick> {
        self.asks.keys().next().copied()
    }

    pub fn best(&self, side: Side) -> Option<Tick> {
        match side {
            Side::Bid => self.best_bid(),
            Side::Ask => self.best_ask(),
        }
    }

    /// Second-best level of a side, if any.
    pub fn second(&self, side: Side) -> Option<Tick> {
        match side {
            Side::Bid => self.bids.keys().rev().nth(1).copied(),
            Side::Ask => self.asks.keys().nth(1).copied(),
        }
    }

    /// Midprice in ticks (half-integer when the spread is odd).
    pub fn mid_ticks(&self) -> Option<f64> {
        Some(0.5 * (self.best_bid()? as f64 + self.best_ask()? as f64))
    }

    pub fn shares_at(&self, side: Side, tick: Tick) -> u64 {
        self.levels(side).get(&tick).copied().unwrap_or(0)
    }

    pub fn lots_at(&self, side: Side, tick: Tick) -> u64 {
        self.shares_at(side, tick).div_ceil(self.lot_size)
    }

    pub fn depth(&self, side: Side) -> usize {
        self.levels(side).len()
    }

    pub fn total_shares(&self, side: Side) -> u64 {
        self.levels(side).values().sum()
    }

    pub fn iter_levels(&self, side: Side) -> impl Iterator<Item = (Tick, u64)> + '_ {
        self.levels(side).iter().map(|(&t, &v)| (t, v))
    }

    /// Adds shares at a level without the midprice placement check.
    pub fn add_shares(&mut self, side: Side, tick: Tick, shares: u64) {
        if shares > 0 {
            *self.levels_mut(side).entry(tick).or_insert(0) += shares;
        }
    }

    /// Overwrites the share count of a level; zero removes it.
    pub fn set_shares(&mut self, side: Side, tick: Tick, shares: u64) {
        let levels = self.levels_mut(side);
        if shares == 0 {
            levels.remove(&tick);
        } else {
            levels.insert(tick, shares);
        }
    }

    /// Removes every level of a side farther than `max_dist` ticks from `center`.
    pub fn prune(&mut self, center: Tick, max_dist: i64) {
        self.bids.retain(|&t, _| (center - t).abs() <= max_dist);
        self.asks.retain(|&t, _| (center - t).abs() <= max_dist);
    }

    /// Places `lots` limit orders. Buys must sit strictly below the midprice and
    /// sells strictly above it; with one side empty the order only has to not
    /// cross the opposite best.
    pub fn place_limit(&mut self, side: Side, tick: Tick, lots: u64) -> Result<(), BookError> {
        let t = tick as f64;
        let (ok, mid) = match self.mid_ticks() {
            Some(mid) => (
                match side {
                    Side::Bid => t < mid,
                    Side::Ask => t > mid,
                },
                mid,
            ),
            None => match side {
                Side::Bid => (self.best_ask().is_none_or(|a| tick < a), f64::NAN),
                Side::Ask => (self.best_bid().is_none_or(|b| tick > b), f64::NAN),
            },
        };
        if !ok {
            return Err(BookError::CrossingOrder { side, tick, mid });
        }
        self.add_shares(side, tick, lots * self.lot_size);
        Ok(())
    }

    /// Cancels each lot resting at one level independently with probability `p`.
    /// Returns the number of shares removed.
    pub fn cancel_level<R: Rng + ?Sized>(
        &mut self,
        side: Side,
        tick: Tick,
        p: f64,
        rng: &mut R,
    ) -> u64 {
        let shares = self.shares_at(side, tick);
        let kept = thin_lots(shares, self.lot_size, 1.0 - p, rng);
        self.set_shares(side, tick, kept);
        shares - kept
    }

    /// One cancellation pass over the whole book: every resting lot is removed
    /// independently with probability `p`. A side that would lose its last
    /// level keeps one lot at its former best price.
    pub fn cancel_pass<R: Rng + ?Sized>(&mut self, p: f64, rng: &mut R) {
        assert!((0.0..=1.0).contains(&p), "cancellation probability out of range");
        if p == 0.0 {
            return;
        }
        for side in [Side::Bid, Side::Ask] {
            let best = self.best(side);
            let best_shares = best.map(|t| self.shares_at(side, t)).unwrap_or(0);
            let ticks: Vec<Tick> = self.levels(side).keys().copied().collect();
            for t in ticks {
                self.cancel_level(side, t, p, rng);
            }
            if let Some(b) = best {
                if self.depth(side) == 0 {
                    self.set_shares(side, b, best_shares.min(self.lot_size));
                }
            }
        }
    }

    /// Executes a market order of sign `eps` for `volume` shares against the
    /// opposite side in price priority.
    pub fn execute_market(&mut self, eps: i8, volume: u64) -> Result<ExecutionReport, BookError> {
        if volume == 0 {
            return Err(BookError::ZeroVolume);
        }
        let side = Side::opposite_of_sign(eps);
        let (bid, ask) = match (self.best_bid(), self.best_ask()) {
            (Some(b), Some(a)) => (b, a),
            (None, _) => return Err(BookError::EmptySide(Side::Bid)),
            (_, None) => return Err(BookError::EmptySide(Side::Ask)),
        };
        let total = self.total_shares(side);
        let protected = total.min(self.lot_size);
        let available = total - protected;
        if volume > available {
            return Err(BookError::InsufficientLiquidity {
                requested: volume,
                available,
            });
        }
        let before = log_mid(self.price(bid), self.price(ask));
        let best_volume = self.shares_at(side, self.best(side).expect("non-empty side"));

        let mut remaining = volume;
        let mut consumed = 0;
        while remaining > 0 {
            let t = self.best(side).expect("liquidity checked above");
            let v = self.shares_at(side, t);
            let take = v.min(remaining);
            self.set_shares(side, t, v - take);
            remaining -= take;
            if take == v {
                consumed += 1;
            }
        }
        let after = log_mid(
            self.price(self.best_bid().expect("protected lot")),
            self.price(self.best_ask().expect("protected lot")),
        );
        Ok(ExecutionReport {
            executed: volume,
            levels_consumed: consumed,
            r_mech: after - before,
            penetrated: volume >= best_volume,
        })
    }

    /// Snapshot of best quotes, volumes and gaps. Fails when a side has fewer
    /// than two levels.
    pub fn snapshot(&self) -> Result<BookSnapshot, BookError> {
        for side in [Side::Bid, Side::Ask] {
            match self.depth(side) {
                0 => return Err(BookError::EmptySide(side)),
                1 => return Err(BookError::ThinSide(side)),
                _ => {}
            }
        }
        Ok(self.snapshot_unchecked())
    }

    /// Like [`OrderBook::snapshot`], but a side with a single level reports a
    /// gap of one tick.
    pub fn snapshot_with_tick_gap(&self) -> Result<BookSnapshot, BookError> {
        for side in [Side::Bid, Side::Ask] {
            if self.depth(side) == 0 {
                return Err(BookError::EmptySide(side));
            }
        }
        Ok(self.snapshot_unchecked())
    }

    fn snapshot_unchecked(&self) -> BookSnapshot {
        let bid = self.best_bid().expect("checked");
        let ask = self.best_ask().expect("checked");
        let bid2 = self.second(Side::Bid).unwrap_or(bid - 1);
        let ask2 = self.second(Side::Ask).unwrap_or(ask + 1);
        let (pb, pa) = (self.price(bid), self.price(ask));
        let (pb2, pa2) = (self.price(bid2), self.price(ask2));
        BookSnapshot {
            best_ask: pa,
            best_bid: pb,
            second_ask: pa2,
            second_bid: pb2,
            mid: 0.5 * (pa + pb),
            log_mid: log_mid(pb, pa),
            log_ask: pa.ln(),
            log_bid: pb.ln(),
            v_ask: self.shares_at(Side::Ask, ask),
            v_bid: self.shares_at(Side::Bid, bid),
            gap_ask: pa2.ln() - pa.ln(),
            gap_bid: pb.ln() - pb2.ln(),
        }
    }

    /// Panics if the book is crossed or holds an empty level.
    pub fn assert_consistent(&self) {
        if let (Some(b), Some(a)) = (self.best_bid(), self.best_ask()) {
            assert!(b < a, "crossed book: bid {b} >= ask {a}");
        }
        assert!(self.bids.values().all(|&v| v > 0));
        assert!(self.asks.values().all(|&v| v > 0));
    }
}

/// Keeps each lot of a level independently with probability `keep`; a trailing
/// partial lot counts as one lot.
pub(crate) fn thin_lots<R: Rng + ?Sized>(shares: u64, lot: u64, keep: f64, rng: &mut R) -> u64 {
    if shares == 0 || keep >= 1.0 {
        return shares;
    }
    if keep <= 0.0 {
        return 0;
    }
    let full = shares / lot;
    let partial = shares % lot;
    let kept_full = if full > 0 {
        Binomial::new(full, keep).expect("valid binomial").sample(rng)
    } else {
        0
    };
    let kept_partial = if partial > 0 && rng.random::<f64>() < keep {
        partial
    } else {
        0
    };
    kept_full * lot + kept_partial
}
