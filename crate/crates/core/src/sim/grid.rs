//! Price grid whose levels outside the spread are advanced in closed form.
//!
//! A tick below the best bid receives buy limits at every step and a tick above
//! the best ask receives sell limits, so between visits its lot count evolves
//! as a thinned copy of the old lots plus an independent Poisson number of new
//! ones. Each level stores its share count and the step it was last brought up
//! to date; untouched ticks are drawn from the stationary law. Only the ticks
//! between the best quotes are stepped explicitly.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::book::{log_mid, thin_lots, BookSnapshot, Side, Tick};

#[derive(Debug, Clone, Copy)]
struct Level {
    shares: u64,
    stamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridParams {
    pub tick_size: f64,
    pub lot_size: u64,
    /// Expected limit lots per tick per step.
    pub arrival: f64,
    /// Per-step cancellation probability of a lot.
    pub cancel: f64,
    pub halfwidth: i64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fill {
    pub executed: u64,
    pub r_mech: f64,
    pub penetrated: bool,
}

#[derive(Debug, Clone)]
pub struct LazyGrid {
    p: GridParams,
    keep: f64,
    arrivals: Option<Poisson<f64>>,
    stationary: Option<Poisson<f64>>,
    levels: BTreeMap<Tick, Level>,
    step: u64,
    bid: Tick,
    ask: Tick,
    rng: ChaCha8Rng,
}

fn poisson(mean: f64) -> Option<Poisson<f64>> {
    (mean > 0.0).then(|| Poisson::new(mean).expect("finite positive mean"))
}

impl LazyGrid {
    /// Book centred on `center` with a two-tick spread and every level drawn
    /// from its stationary law.
    pub fn new(p: GridParams, center: Tick, rng: ChaCha8Rng) -> Self {
        assert!(p.cancel > 0.0 && p.cancel < 1.0);
        let keep = 1.0 - p.cancel;
        let mut grid = LazyGrid {
            p,
            keep,
            arrivals: poisson(p.arrival),
            stationary: poisson(p.arrival * keep / p.cancel),
            levels: BTreeMap::new(),
            step: 0,
            bid: center - 1,
            ask: center + 1,
            rng,
        };
        grid.levels.insert(center, Level { shares: 0, stamp: 0 });
        grid.bid = grid.find_level(Side::Bid, center - 1).unwrap_or(center - 1);
        grid.ask = grid.find_level(Side::Ask, center + 1).unwrap_or(center + 1);
        for t in [grid.bid, grid.ask] {
            if grid.shares(t) == 0 {
                grid.levels.insert(t, Level { shares: p.lot_size, stamp: 0 });
            }
        }
        grid
    }

    pub fn params(&self) -> &GridParams {
        &self.p
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn best_bid(&self) -> Tick {
        self.bid
    }

    pub fn best_ask(&self) -> Tick {
        self.ask
    }

    pub fn mid_ticks(&self) -> f64 {
        0.5 * (self.bid + self.ask) as f64
    }

    pub fn price(&self, tick: Tick) -> f64 {
        tick as f64 * self.p.tick_size
    }

    pub fn log_mid(&self) -> f64 {
        log_mid(self.price(self.bid), self.price(self.ask))
    }

    /// Shares at a tick, bringing a lazily stored level up to the current step.
    pub fn shares(&mut self, tick: Tick) -> u64 {
        let step = self.step;
        match self.levels.get(&tick).copied() {
            Some(l) if l.stamp == step => l.shares,
            Some(l) => {
                let s = self.advance(l.shares, step - l.stamp);
                self.levels.insert(tick, Level { shares: s, stamp: step });
                s
            }
            None => {
                let lots = self
                    .stationary
                    .as_ref()
                    .map_or(0, |d| d.sample(&mut self.rng) as u64);
                let s = lots * self.p.lot_size;
                self.levels.insert(tick, Level { shares: s, stamp: step });
                s
            }
        }
    }

    fn advance(&mut self, shares: u64, k: u64) -> u64 {
        let surv = self.keep.powf(k as f64);
        let kept = thin_lots(shares, self.p.lot_size, surv, &mut self.rng);
        let mean = self.p.arrival * self.keep * (1.0 - surv) / self.p.cancel;
        let new = poisson(mean).map_or(0, |d| d.sample(&mut self.rng) as u64);
        kept + new * self.p.lot_size
    }

    fn set(&mut self, tick: Tick, shares: u64) {
        self.levels.insert(
            tick,
            Level {
                shares,
                stamp: self.step,
            },
        );
    }

    /// First tick at or beyond `from` (moving away from the spread) holding
    /// shares, within the grid half-width of the midprice.
    fn find_level(&mut self, side: Side, from: Tick) -> Option<Tick> {
        let mid = self.mid_ticks();
        let limit = self.p.halfwidth as f64;
        let dir = match side {
            Side::Bid => -1,
            Side::Ask => 1,
        };
        let mut t = from;
        while (t as f64 - mid).abs() <= limit {
            if self.shares(t) > 0 {
                return Some(t);
            }
            t += dir;
        }
        None
    }

    /// Limit arrivals then cancellations for one step.
    pub fn advance_step(&mut self, limits: &mut ChaCha8Rng, cancels: &mut ChaCha8Rng) {
        self.step += 1;
        let (b0, a0) = (self.bid, self.ask);
        let mid = self.mid_ticks();
        let lot = self.p.lot_size;
        let mut shares: Vec<u64> = (b0..=a0)
            .map(|t| {
                let l = self.levels.get(&t).copied();
                debug_assert!(l.is_some_and(|l| l.stamp + 1 == self.step));
                l.map_or(0, |l| l.shares)
            })
            .collect();
        if let Some(d) = &self.arrivals {
            for (i, s) in shares.iter_mut().enumerate() {
                if (b0 + i as Tick) as f64 != mid {
                    *s += d.sample(limits) as u64 * lot;
                }
            }
        }
        let before: Vec<u64> = shares.clone();
        for s in shares.iter_mut() {
            *s = thin_lots(*s, lot, self.keep, cancels);
        }
        for (i, &s) in shares.iter().enumerate() {
            self.set(b0 + i as Tick, s);
        }
        // bids sit below the step's starting midprice, asks above it
        let bid_in = (b0..=a0).rev().find(|&t| (t as f64) < mid && shares[(t - b0) as usize] > 0);
        let ask_in = (b0..=a0).find(|&t| (t as f64) > mid && shares[(t - b0) as usize] > 0);
        self.bid = match bid_in {
            Some(t) => t,
            None => self.find_level(Side::Bid, b0 - 1).unwrap_or_else(|| {
                let top = (b0..=a0).rev().find(|&t| (t as f64) < mid).unwrap_or(b0);
                let restore = before[(top - b0) as usize].clamp(1, lot);
                self.set(top, restore);
                top
            }),
        };
        self.ask = match ask_in {
            Some(t) => t,
            None => self.find_level(Side::Ask, a0 + 1).unwrap_or_else(|| {
                let bottom = (b0..=a0).find(|&t| (t as f64) > mid).unwrap_or(a0);
                let restore = before[(bottom - b0) as usize].clamp(1, lot);
                self.set(bottom, restore);
                bottom
            }),
        };
    }

    pub fn snapshot(&mut self) -> BookSnapshot {
        let (bid, ask) = (self.bid, self.ask);
        let bid2 = self.find_level(Side::Bid, bid - 1).unwrap_or(bid - 1);
        let ask2 = self.find_level(Side::Ask, ask + 1).unwrap_or(ask + 1);
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
            v_ask: self.shares(ask),
            v_bid: self.shares(bid),
            gap_ask: pa2.ln() - pa.ln(),
            gap_bid: pb.ln() - pb2.ln(),
        }
    }

    /// Executes a market order against the opposite side in price priority.
    /// If the side would run dry within the grid, one lot is left in place.
    pub fn execute(&mut self, eps: i8, volume: u64) -> Fill {
        let side = Side::opposite_of_sign(eps);
        let before = self.log_mid();
        let first = self.best(side);
        let best_volume = self.shares(first);
        let mut remaining = volume;
        let mut t = first;
        loop {
            let v = self.shares(t);
            if remaining < v {
                self.set(t, v - remaining);
                remaining = 0;
                break;
            }
            remaining -= v;
            self.set(t, 0);
            let from = match side {
                Side::Bid => t - 1,
                Side::Ask => t + 1,
            };
            match self.find_level(side, from) {
                Some(next) => {
                    t = next;
                    if remaining == 0 {
                        break;
                    }
                }
                None => {
                    let keep = v.min(self.p.lot_size);
                    self.set(t, keep);
                    remaining += keep;
                    break;
                }
            }
        }
        match side {
            Side::Bid => self.bid = t,
            Side::Ask => self.ask = t,
        }
        Fill {
            executed: volume - remaining,
            r_mech: self.log_mid() - before,
            penetrated: volume >= best_volume,
        }
    }

    fn best(&self, side: Side) -> Tick {
        match side {
            Side::Bid => self.bid,
            Side::Ask => self.ask,
        }
    }

    /// Forgets levels farther than the half-width from the midprice; they are
    /// redrawn from the stationary law if visited again.
    pub fn prune(&mut self) {
        let mid = self.mid_ticks();
        let w = self.p.halfwidth as f64;
        self.levels.retain(|&t, _| (t as f64 - mid).abs() <= w);
    }

    /// Mean lots per tick over ticks `near..=far` away from each best quote.
    pub fn mean_depth_lots(&mut self, near: i64, far: i64) -> f64 {
        let (bid, ask) = (self.bid, self.ask);
        let mut total = 0u64;
        let mut count = 0u64;
        for d in near..=far {
            total += self.shares(bid - d).div_ceil(self.p.lot_size);
            total += self.shares(ask + d).div_ceil(self.p.lot_size);
            count += 2;
        }
        total as f64 / count as f64
    }

    /// Shares at every stored level between two ticks, bringing each up to date.
    pub fn profile(&mut self, lo: Tick, hi: Tick) -> Vec<(Tick, u64)> {
        (lo..=hi).map(|t| (t, self.shares(t))).collect()
    }

    pub fn stored_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn assert_consistent(&mut self) {
        assert!(self.bid < self.ask, "crossed grid {} >= {}", self.bid, self.ask);
        assert!(self.shares(self.bid) > 0 && self.shares(self.ask) > 0);
        for t in self.bid + 1..self.ask {
            assert_eq!(self.shares(t), 0, "resting shares inside the spread at {t}");
        }
    }
}

/// Bernoulli draw used for market-order arrivals.
pub(crate) fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < p
}
