//! External order-book event logs and their conversion to trade logs.
//!
//! An event log interleaves quote rows (best quotes, best volumes and
//! second-best prices) with trade rows (sign and executed shares). Adjacent
//! trade rows sharing a timestamp and sign are one market order. Each trade
//! takes its pre-trade state from the last quote before it, its post-trade
//! midprice from the first quote after it, and the next trade's pre-trade
//! midprice closes its return.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::book::{log_mid, BookSnapshot};
use crate::tradelog::{TradeLog, TradeRecord};

pub const EVENT_COLUMNS: [&str; 11] = [
    "timestamp",
    "event",
    "sign",
    "price",
    "shares",
    "bid",
    "ask",
    "bid_volume",
    "ask_volume",
    "bid2",
    "ask2",
];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {msg}")]
    Schema { line: usize, msg: String },
    #[error("line {line}: timestamp decreases")]
    UnorderedTimestamps { line: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Trade,
    Quote,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub bid: f64,
    pub ask: f64,
    pub bid_volume: u64,
    pub ask_volume: u64,
    pub bid2: f64,
    pub ask2: f64,
}

impl Quote {
    pub fn log_mid(&self) -> f64 {
        log_mid(self.bid, self.ask)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventRow {
    Quote { timestamp: f64, quote: Quote },
    Trade { timestamp: f64, sign: i8, price: f64, shares: u64 },
}

impl EventRow {
    pub fn quote(timestamp: f64, snap: &BookSnapshot) -> Self {
        EventRow::Quote {
            timestamp,
            quote: Quote {
                bid: snap.best_bid,
                ask: snap.best_ask,
                bid_volume: snap.v_bid,
                ask_volume: snap.v_ask,
                bid2: snap.second_bid,
                ask2: snap.second_ask,
            },
        }
    }

    /// Trade of sign `sign` at the opposite best of `snap`.
    pub fn trade(timestamp: f64, sign: i8, snap: &BookSnapshot, shares: u64) -> Self {
        EventRow::Trade {
            timestamp,
            sign,
            price: if sign > 0 { snap.best_ask } else { snap.best_bid },
            shares,
        }
    }

    pub fn timestamp(&self) -> f64 {
        match self {
            EventRow::Quote { timestamp, .. } | EventRow::Trade { timestamp, .. } => *timestamp,
        }
    }

    pub fn kind(&self) -> EventKind {
        match self {
            EventRow::Quote { .. } => EventKind::Quote,
            EventRow::Trade { .. } => EventKind::Trade,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    /// Trades with no earlier quote row.
    pub dropped_no_quote: usize,
    /// Trailing trades with no later quote row.
    pub dropped_tail: usize,
    /// Trade rows folded into an earlier row of the same order.
    pub merged_rows: usize,
}

struct OpenTrade {
    t: f64,
    eps: i8,
    shares: u64,
    pre: Quote,
    post: Option<Quote>,
}

fn close(open: OpenTrade, next: Quote, n: u64) -> TradeRecord {
    let post = open.post.unwrap_or(next);
    let pre = open.pre;
    let p_pre = pre.log_mid();
    let p_post = post.log_mid();
    let r_mech = p_post - p_pre;
    let r_quote = next.log_mid() - p_post;
    let v_opp = if open.eps > 0 {
        pre.ask_volume
    } else {
        pre.bid_volume
    };
    TradeRecord {
        n,
        t: open.t,
        eps: open.eps,
        eps_hat_pub: None,
        eps_hat_priv: None,
        x: None,
        p_log: p_pre,
        v_ask: pre.ask_volume,
        v_bid: pre.bid_volume,
        gap_ask: pre.ask2.ln() - pre.ask.ln(),
        gap_bid: pre.bid.ln() - pre.bid2.ln(),
        f: None,
        v_mo: open.shares,
        v_opp_best: v_opp,
        penetrated: open.shares >= v_opp,
        r_mech,
        r_quote,
        r: r_mech + r_quote,
    }
}

pub fn ingest(rows: &[EventRow]) -> Result<(TradeLog, IngestReport), IngestError> {
    let mut report = IngestReport::default();
    let mut records = Vec::new();
    let mut last_quote: Option<Quote> = None;
    let mut open: Option<OpenTrade> = None;
    let mut prev_t = f64::NEG_INFINITY;
    let mut prev_was_trade = false;

    for (i, row) in rows.iter().enumerate() {
        let line = i + 2;
        let ts = row.timestamp();
        if ts < prev_t {
            return Err(IngestError::UnorderedTimestamps { line });
        }
        prev_t = ts;
        match *row {
            EventRow::Quote { quote, .. } => {
                if let Some(o) = open.as_mut() {
                    o.post.get_or_insert(quote);
                }
                last_quote = Some(quote);
                prev_was_trade = false;
            }
            EventRow::Trade {
                timestamp,
                sign,
                shares,
                ..
            } => {
                if sign != 1 && sign != -1 {
                    return Err(IngestError::Schema {
                        line,
                        msg: format!("trade sign {sign} is not +1 or -1"),
                    });
                }
                if let Some(o) = open.as_mut() {
                    if prev_was_trade && o.t == timestamp && o.eps == sign {
                        o.shares += shares;
                        report.merged_rows += 1;
                        continue;
                    }
                }
                if let Some(o) = open.take() {
                    let next = last_quote.expect("open trade implies a quote");
                    records.push(close(o, next, records.len() as u64));
                }
                prev_was_trade = true;
                match last_quote {
                    Some(pre) => {
                        open = Some(OpenTrade {
                            t: timestamp,
                            eps: sign,
                            shares,
                            pre,
                            post: None,
                        })
                    }
                    None => report.dropped_no_quote += 1,
                }
            }
        }
    }
    if let Some(o) = open {
        if o.post.is_some() {
            let next = last_quote.expect("quote seen");
            records.push(close(o, next, records.len() as u64));
        } else {
            report.dropped_tail += 1;
        }
    }
    Ok((TradeLog::new(records), report))
}

fn field(rec: &csv::StringRecord, i: usize) -> &str {
    rec.get(i).unwrap_or("").trim()
}

fn parse<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, line: usize) -> Result<T, IngestError> {
    let s = field(rec, i);
    s.parse().map_err(|_| IngestError::Schema {
        line,
        msg: format!("column {} has invalid value {s:?}", EVENT_COLUMNS[i]),
    })
}

pub fn read_events<R: Read>(reader: R) -> Result<Vec<EventRow>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header != EVENT_COLUMNS {
        return Err(IngestError::Schema {
            line: 1,
            msg: format!("expected header {}", EVENT_COLUMNS.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let timestamp: f64 = parse(&rec, 0, line)?;
        let row = match field(&rec, 1) {
            "trade" => EventRow::Trade {
                timestamp,
                sign: parse(&rec, 2, line)?,
                price: parse(&rec, 3, line)?,
                shares: parse(&rec, 4, line)?,
            },
            "quote" => {
                let quote = Quote {
                    bid: parse(&rec, 5, line)?,
                    ask: parse(&rec, 6, line)?,
                    bid_volume: parse(&rec, 7, line)?,
                    ask_volume: parse(&rec, 8, line)?,
                    bid2: parse(&rec, 9, line)?,
                    ask2: parse(&rec, 10, line)?,
                };
                if !(quote.bid > 0.0 && quote.bid < quote.ask) {
                    return Err(IngestError::Schema {
                        line,
                        msg: "quote must have 0 < bid < ask".into(),
                    });
                }
                EventRow::Quote { timestamp, quote }
            }
            other => {
                return Err(IngestError::Schema {
                    line,
                    msg: format!("unknown event type {other:?}"),
                })
            }
        };
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_events<W: Write>(writer: W, rows: &[EventRow]) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(EVENT_COLUMNS)?;
    for row in rows {
        let rec: [String; 11] = match row {
            EventRow::Trade {
                timestamp,
                sign,
                price,
                shares,
            } => [
                timestamp.to_string(),
                "trade".into(),
                sign.to_string(),
                price.to_string(),
                shares.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
            EventRow::Quote { timestamp, quote: q } => [
                timestamp.to_string(),
                "quote".into(),
                String::new(),
                String::new(),
                String::new(),
                q.bid.to_string(),
                q.ask.to_string(),
                q.bid_volume.to_string(),
                q.ask_volume.to_string(),
                q.bid2.to_string(),
                q.ask2.to_string(),
            ],
        };
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_events_file(path: &Path) -> Result<Vec<EventRow>, IngestError> {
    read_events(std::fs::File::open(path)?)
}

pub fn write_events_file(path: &Path, rows: &[EventRow]) -> Result<(), IngestError> {
    write_events(std::io::BufWriter::new(std::fs::File::create(path)?), rows)
}
