use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use alob::analytics::{
    conditional_curve, inefficiency_scan, log_lags, penetration_stats, propagator, signature_plot,
};
use alob::dar::{sample_autocorr, yule_walker_fit, DarFit, LaggedPredictor};
use alob::flow::SignSeries;
use alob::io::config::{parse_config_str, RunConfig, CONFIG_HELP};
use alob::io::ingest::{ingest, read_events_file, write_events_file};
use alob::io::tables::{read_trades_file, write_columns, write_curve_file, write_trades_file};
use alob::sim::{run_reduced, simulate};
use alob::tradelog::TradeLog;
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

mod error;

use error::CliError;

#[derive(Parser)]
#[command(name = "alob", version, about = "Order book simulation with adaptive liquidity takers")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full order book model for one or more configuration files.
    #[command(after_help = CONFIG_HELP)]
    Simulate {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Also write the quote and trade event stream.
        #[arg(long)]
        events: bool,
    },
    /// Run the reduced return model.
    #[command(after_help = CONFIG_HELP)]
    Reduced {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the configuration file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit DAR(p) coefficients to the trade signs of a trades file.
    FitDar {
        trades: PathBuf,
        #[arg(long, default_value_t = 500)]
        p: usize,
        /// Output file; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute diagnostics from a trades file.
    Analyze {
        trades: PathBuf,
        which: Analysis,
        /// Output directory, defaults to the directory of the trades file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long, default_value_t = 1000)]
        max_lag: usize,
        /// Order of the DAR model fitted to the signs.
        #[arg(long, default_value_t = 500)]
        p: usize,
        /// Largest horizon of the inefficiency scan.
        #[arg(long, default_value_t = 10)]
        max_horizon: usize,
        /// Conditioned quantity for `conditional`.
        #[arg(long, value_enum, default_value_t = Column::SignedReturn)]
        y: Column,
        /// Conditioning variable for `conditional`.
        #[arg(long, value_enum, default_value_t = Conditioning::Correctness)]
        on: Conditioning,
        /// Impact scale for `propagator`; estimated from the data when omitted.
        #[arg(long)]
        a: Option<f64>,
    },
    /// Convert an external event log into a trades file.
    Ingest {
        events: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Analysis {
    Signature,
    Conditional,
    Penetration,
    Inefficiency,
    Propagator,
}

#[derive(Clone, Copy, ValueEnum)]
enum Column {
    SignedReturn,
    SignedMech,
    SignedQuote,
    VAsk,
    VBid,
    GapAsk,
    GapBid,
    Fraction,
    Penetrated,
}

#[derive(Clone, Copy, ValueEnum)]
enum Conditioning {
    /// Recorded correctness `eps * eps_hat`.
    Correctness,
    /// Recorded public prediction.
    Public,
    /// Recorded private prediction.
    Private,
    /// Prediction of a DAR(p) model fitted to the signs.
    Dar,
}

#[derive(Serialize)]
struct Manifest {
    config: String,
    config_sha256: String,
    seed: u64,
    version: &'static str,
    outputs: Vec<String>,
    wall_clock_secs: f64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(m).map_err(|e| CliError::Invalid(e.to_string()))?;
    fs::write(dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn threads() -> usize {
    std::env::var("ALOB_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn simulate_one(path: &Path, seed: u64, dir: &Path, events: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let text = fs::read_to_string(path)?;
    let mut cfg = match parse_config_str(&text)? {
        RunConfig::Full(c) => c,
        RunConfig::Reduced(_) => {
            return Err(CliError::Invalid(format!(
                "{}: reduced-model configuration, use the reduced subcommand",
                path.display()
            )))
        }
    };
    cfg.seed = seed;
    let out = simulate(&cfg, events)?;
    fs::create_dir_all(dir)?;
    let trades = dir.join("trades.csv");
    write_trades_file(&trades, &out.log)?;
    let mut outputs = vec![trades.display().to_string()];
    if let Some(rows) = &out.events {
        let p = dir.join("events.csv");
        write_events_file(&p, rows)?;
        outputs.push(p.display().to_string());
    }
    eprintln!(
        "{}: {} trades, {} steps, warm-up depth {:.2} lots, {} clamped exponents",
        path.display(),
        out.log.len(),
        out.stats.steps,
        out.stats.warmup_depth_lots,
        out.stats.clamped_exponents
    );
    write_manifest(
        dir,
        &Manifest {
            config: path.display().to_string(),
            config_sha256: sha256_hex(text.as_bytes()),
            seed,
            version: env!("CARGO_PKG_VERSION"),
            outputs,
            wall_clock_secs: start.elapsed().as_secs_f64(),
        },
    )
}

fn cmd_simulate(configs: &[PathBuf], seed: u64, out: &Path, events: bool) -> Result<(), CliError> {
    if configs.len() == 1 {
        return simulate_one(&configs[0], seed, out, events);
    }
    let mut stems: Vec<String> = configs
        .iter()
        .map(|p| p.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned()))
        .collect();
    stems.sort();
    stems.dedup();
    if stems.len() != configs.len() {
        return Err(CliError::Invalid("configuration file names must be distinct".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads())
        .build()
        .map_err(|e| CliError::Invalid(e.to_string()))?;
    let results: Vec<Result<(), CliError>> = pool.install(|| {
        configs
            .par_iter()
            .map(|p| {
                let stem = p.file_stem().unwrap_or_default();
                simulate_one(p, seed, &out.join(stem), events)
            })
            .collect()
    });
    results.into_iter().collect()
}

fn cmd_reduced(path: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let start = Instant::now();
    let text = fs::read_to_string(path)?;
    let mut cfg = match parse_config_str(&text)? {
        RunConfig::Reduced(c) => c,
        RunConfig::Full(_) => {
            return Err(CliError::Invalid(format!(
                "{}: full-model configuration, use the simulate subcommand",
                path.display()
            )))
        }
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let r = run_reduced(&cfg)?;
    fs::create_dir_all(out)?;
    let file = out.join("prices.csv");
    let n = r.signs.len();
    write_columns(
        fs::File::create(&file)?,
        &["n", "eps", "eps_hat", "r", "p_log"],
        &[
            (0..n).map(|i| i as f64).collect(),
            r.signs.iter().map(|&e| e as f64).collect(),
            r.predictions.clone(),
            r.returns.clone(),
            r.log_prices[..n].to_vec(),
        ],
    )?;
    write_manifest(
        out,
        &Manifest {
            config: path.display().to_string(),
            config_sha256: sha256_hex(text.as_bytes()),
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION"),
            outputs: vec![file.display().to_string()],
            wall_clock_secs: start.elapsed().as_secs_f64(),
        },
    )
}

fn fit_signs(log: &TradeLog, p: usize) -> Result<DarFit, CliError> {
    let series = SignSeries::new(log.signs())
        .ok_or_else(|| CliError::Invalid("trade signs must be +1 or -1".into()))?;
    Ok(yule_walker_fit(&sample_autocorr(&series, p)?, p)?)
}

fn cmd_fit_dar(trades: &Path, p: usize, out: Option<&Path>) -> Result<(), CliError> {
    let log = read_trades_file(trades)?;
    let fit = fit_signs(&log, p)?;
    let phi: Vec<String> = fit.params.phi().iter().map(|v| v.to_string()).collect();
    let text = format!(
        "flow = dar\nchi = {}\nmu_z = {}\nphi = {}\n",
        fit.params.chi(),
        fit.params.mu_z(),
        phi.join(", ")
    );
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn column(log: &TradeLog, c: Column) -> Vec<f64> {
    log.records
        .iter()
        .map(|r| {
            let e = r.eps as f64;
            match c {
                Column::SignedReturn => e * r.r,
                Column::SignedMech => e * r.r_mech,
                Column::SignedQuote => e * r.r_quote,
                Column::VAsk => r.v_ask as f64,
                Column::VBid => r.v_bid as f64,
                Column::GapAsk => r.gap_ask,
                Column::GapBid => r.gap_bid,
                Column::Fraction => r.f.unwrap_or(f64::NAN),
                Column::Penetrated => f64::from(u8::from(r.penetrated)),
            }
        })
        .collect()
}

/// Pairs of (conditioned value, conditioning value) for trades where both exist.
fn conditioning(
    log: &TradeLog,
    y: &[f64],
    on: Conditioning,
    p: usize,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let cond: Vec<Option<f64>> = match on {
        Conditioning::Correctness => log.records.iter().map(|r| r.x).collect(),
        Conditioning::Public => log.records.iter().map(|r| r.eps_hat_pub).collect(),
        Conditioning::Private => log.records.iter().map(|r| r.eps_hat_priv).collect(),
        Conditioning::Dar => {
            let fit = fit_signs(log, p)?;
            LaggedPredictor::new(&fit.params, 0).series(&log.signs())
        }
    };
    let (ys, xs): (Vec<f64>, Vec<f64>) = y
        .iter()
        .zip(&cond)
        .filter_map(|(&v, c)| c.filter(|_| v.is_finite()).map(|c| (v, c)))
        .unzip();
    if xs.is_empty() {
        return Err(CliError::Invalid("the trades file has no values for the conditioning variable".into()));
    }
    Ok((ys, xs))
}

#[allow(clippy::too_many_arguments)]
fn cmd_analyze(
    trades: &Path,
    which: Analysis,
    out: Option<&Path>,
    bins: usize,
    max_lag: usize,
    p: usize,
    max_horizon: usize,
    y: Column,
    on: Conditioning,
    a: Option<f64>,
) -> Result<(), CliError> {
    let log = read_trades_file(trades)?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => trades.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf),
    };
    fs::create_dir_all(&dir)?;
    match which {
        Analysis::Signature => {
            let lags = log_lags(1, max_lag, 10);
            let s = signature_plot(&log.log_prices(), &lags)?;
            write_columns(
                fs::File::create(dir.join("signature.csv"))?,
                &["lag", "sigma", "se"],
                &[s.lags.iter().map(|&l| l as f64).collect(), s.sigma, s.se],
            )?;
        }
        Analysis::Conditional => {
            let (ys, xs) = conditioning(&log, &column(&log, y), on, p)?;
            write_curve_file(&dir.join("conditional.csv"), &conditional_curve(&ys, &xs, bins)?)?;
        }
        Analysis::Penetration => {
            let s = penetration_stats(&log, bins)?;
            write_curve_file(&dir.join("penetration.csv"), &s.penetration)?;
            write_curve_file(&dir.join("fraction.csv"), &s.fraction)?;
            write_curve_file(&dir.join("v_mo.csv"), &s.v_mo)?;
            write_curve_file(&dir.join("v_opp_best.csv"), &s.v_opp_best)?;
        }
        Analysis::Inefficiency => {
            let fit = fit_signs(&log, p)?;
            let horizons: Vec<usize> = (0..=max_horizon).collect();
            let scan = inefficiency_scan(&log.signs(), &log.returns(), &fit.params, &horizons, bins)?;
            let mut cols = vec![Vec::new(); 5];
            for h in &scan.horizons {
                for (b, (d, se)) in h.diff.iter().zip(&h.diff_se).enumerate() {
                    cols[0].push(h.horizon as f64);
                    cols[1].push(b as f64);
                    cols[2].push(*d);
                    cols[3].push(*se);
                    cols[4].push(f64::from(u8::from(*d > 2.0 * se)));
                }
            }
            write_columns(
                fs::File::create(dir.join("inefficiency.csv"))?,
                &["horizon", "bin", "diff", "se", "violation"],
                &cols,
            )?;
            match scan.minimal_horizon {
                Some(s) => println!("minimal horizon without violations: {s}"),
                None => println!("violations at every horizon up to {max_horizon}"),
            }
        }
        Analysis::Propagator => {
            let fit = fit_signs(&log, p)?;
            let a = match a {
                Some(a) => a,
                None => {
                    let (er, x) = conditioning(&log, &column(&log, Column::SignedReturn), Conditioning::Dar, p)?;
                    let (num, den) = er
                        .iter()
                        .zip(&x)
                        .fold((0.0, 0.0), |(n, d), (r, x)| (n + (1.0 - x) * r, d + (1.0 - x) * (1.0 - x)));
                    num / den
                }
            };
            let g = propagator(&fit.params, a, max_lag);
            write_columns(
                fs::File::create(dir.join("propagator.csv"))?,
                &["lag", "g"],
                &[(1..=g.len()).map(|l| l as f64).collect(), g],
            )?;
            println!("impact scale A = {a}");
        }
    }
    Ok(())
}

fn cmd_ingest(events: &Path, out: &Path) -> Result<(), CliError> {
    let rows = read_events_file(events)?;
    let (log, report) = ingest(&rows)?;
    fs::create_dir_all(out)?;
    write_trades_file(&out.join("trades.csv"), &log)?;
    eprintln!(
        "{} trades, {} merged rows, {} dropped without a prior quote, {} dropped at the end",
        log.len(),
        report.merged_rows,
        report.dropped_no_quote,
        report.dropped_tail
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Command::Simulate { configs, seed, out, events } => cmd_simulate(&configs, seed, &out, events),
        Command::Reduced { config, out, seed } => cmd_reduced(&config, &out, seed),
        Command::FitDar { trades, p, out } => cmd_fit_dar(&trades, p, out.as_deref()),
        Command::Analyze {
            trades,
            which,
            out,
            bins,
            max_lag,
            p,
            max_horizon,
            y,
            on,
            a,
        } => cmd_analyze(&trades, which, out.as_deref(), bins, max_lag, p, max_horizon, y, on, a),
        Command::Ingest { events, out } => cmd_ingest(&events, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
