//! CSV export and reload of trade logs and curve tables.
//!
//! Floats are written in shortest round-trip form, so reading a file back
//! reproduces every value bit for bit. Missing optional values are empty
//! fields.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::analytics::ConditionalCurve;
use crate::tradelog::{TradeLog, TradeRecord};

pub const TRADE_COLUMNS: [&str; 18] = [
    "n",
    "t",
    "eps",
    "eps_hat_pub",
    "eps_hat_priv",
    "x",
    "p_log",
    "v_ask",
    "v_bid",
    "gap_ask",
    "gap_bid",
    "f",
    "v_mo",
    "v_opp_best",
    "penetrated",
    "r_mech",
    "r_quote",
    "r",
];

pub const CURVE_COLUMNS: [&str; 6] = ["bin_lo", "bin_hi", "bin_center", "mean", "se", "count"];

#[derive(Debug, Error)]
pub enum TableError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    Format { line: usize, msg: String },
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trades<W: Write>(writer: W, log: &TradeLog) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRADE_COLUMNS)?;
    for r in &log.records {
        w.write_record([
            r.n.to_string(),
            r.t.to_string(),
            r.eps.to_string(),
            opt(r.eps_hat_pub),
            opt(r.eps_hat_priv),
            opt(r.x),
            r.p_log.to_string(),
            r.v_ask.to_string(),
            r.v_bid.to_string(),
            r.gap_ask.to_string(),
            r.gap_bid.to_string(),
            opt(r.f),
            r.v_mo.to_string(),
            r.v_opp_best.to_string(),
            u8::from(r.penetrated).to_string(),
            r.r_mech.to_string(),
            r.r_quote.to_string(),
            r.r.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

struct Row<'a> {
    rec: &'a csv::StringRecord,
    line: usize,
}

impl Row<'_> {
    fn get<T: std::str::FromStr>(&self, i: usize) -> Result<T, TableError> {
        let s = self.rec.get(i).unwrap_or("");
        s.parse().map_err(|_| TableError::Format {
            line: self.line,
            msg: format!("column {} has invalid value {s:?}", TRADE_COLUMNS[i]),
        })
    }

    fn opt(&self, i: usize) -> Result<Option<f64>, TableError> {
        match self.rec.get(i).unwrap_or("") {
            "" => Ok(None),
            _ => self.get(i).map(Some),
        }
    }
}

pub fn read_trades<R: Read>(reader: R) -> Result<TradeLog, TableError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header: Vec<&str> = rdr.headers()?.iter().collect();
    if header != TRADE_COLUMNS {
        return Err(TableError::Format {
            line: 1,
            msg: format!("expected header {}", TRADE_COLUMNS.join(",")),
        });
    }
    let mut records = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = Row { rec: &rec, line: i + 2 };
        let penetrated = match row.get::<u8>(14)? {
            0 => false,
            1 => true,
            v => {
                return Err(TableError::Format {
                    line: row.line,
                    msg: format!("penetrated must be 0 or 1, got {v}"),
                })
            }
        };
        records.push(TradeRecord {
            n: row.get(0)?,
            t: row.get(1)?,
            eps: row.get(2)?,
            eps_hat_pub: row.opt(3)?,
            eps_hat_priv: row.opt(4)?,
            x: row.opt(5)?,
            p_log: row.get(6)?,
            v_ask: row.get(7)?,
            v_bid: row.get(8)?,
            gap_ask: row.get(9)?,
            gap_bid: row.get(10)?,
            f: row.opt(11)?,
            v_mo: row.get(12)?,
            v_opp_best: row.get(13)?,
            penetrated,
            r_mech: row.get(15)?,
            r_quote: row.get(16)?,
            r: row.get(17)?,
        });
    }
    Ok(TradeLog::new(records))
}

pub fn write_trades_file(path: &Path, log: &TradeLog) -> Result<(), TableError> {
    write_trades(std::io::BufWriter::new(std::fs::File::create(path)?), log)
}

pub fn read_trades_file(path: &Path) -> Result<TradeLog, TableError> {
    read_trades(std::io::BufReader::new(std::fs::File::open(path)?))
}

pub fn write_curve<W: Write>(writer: W, curve: &ConditionalCurve) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CURVE_COLUMNS)?;
    for i in 0..curve.len() {
        w.write_record([
            curve.bin_lo[i].to_string(),
            curve.bin_hi[i].to_string(),
            curve.bin_center[i].to_string(),
            curve.mean[i].to_string(),
            curve.se[i].to_string(),
            curve.count[i].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_curve_file(path: &Path, curve: &ConditionalCurve) -> Result<(), TableError> {
    write_curve(std::fs::File::create(path)?, curve)
}

/// Writes named numeric columns of equal length.
pub fn write_columns<W: Write>(writer: W, names: &[&str], cols: &[Vec<f64>]) -> Result<(), TableError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(names)?;
    let n = cols.first().map_or(0, Vec::len);
    for i in 0..n {
        w.write_record(cols.iter().map(|c| c[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}
