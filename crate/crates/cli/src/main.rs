//! `moea-portfolio`: synthetic data generation, single-period Phase I and
//! Phase II runs, full backtests and report rendering.
//!
//! Exit status: 0 on success, 1 on a usage error, 2 on a data, I/O or
//! configuration error, 3 when no feasible portfolio exists.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser, Subcommand};
use log::info;

use moea_portfolio::backtest::{
    read_periods, render_summary, run_backtest, summarize_periods, write_report, MarketData,
};
use moea_portfolio::data::parse_date;
use moea_portfolio::engine::TraceWriter;
use moea_portfolio::phase1::{read_phase1_portfolios, write_phase1_outputs};
use moea_portfolio::phase2::{read_portfolio, write_winner};
use moea_portfolio::synthetic::generate_universe;
use moea_portfolio::{backtest, BacktestConfig, Error, Mandate, Portfolio, Result};

#[derive(Debug, Parser)]
#[command(name = "moea-portfolio", version, about = "Two-phase evolutionary portfolio construction")]
struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master RNG seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_parser = parse_mandate)]
    mandate: Option<Mandate>,
    /// Output prefix (a directory for gen-data).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for population evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write per-generation objective statistics to this file.
    #[arg(long, global = true)]
    trace: Option<PathBuf>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic price file, risk-free file and score files.
    GenData,
    /// Run Phase I for one rebalance date.
    Phase1 {
        #[arg(long, value_parser = parse_day)]
        date: NaiveDate,
    },
    /// Weight the candidates of a Phase I run and pick the winner.
    Phase2 {
        #[arg(long, value_parser = parse_day)]
        date: NaiveDate,
        /// Prefix the Phase I files were written under.
        #[arg(long)]
        phase1: PathBuf,
        /// Holdings before the rebalance (`asset_id,weight`).
        #[arg(long)]
        previous: Option<PathBuf>,
    },
    /// Run the quarterly backtest.
    Backtest {
        /// Comma-separated rebalance dates.
        #[arg(long, value_delimiter = ',', value_parser = parse_day)]
        dates: Vec<NaiveDate>,
    },
    /// Summarize a periods CSV written by `backtest`.
    Report {
        periods: PathBuf,
    },
}

fn parse_mandate(s: &str) -> std::result::Result<Mandate, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_day(s: &str) -> std::result::Result<NaiveDate, String> {
    parse_date(s).map_err(|e| e.to_string())
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent().filter(|p| !p.as_os_str().is_empty()) {
        Some(dir) => std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.to_path_buf(),
            source: e,
        }),
        None => Ok(()),
    }
}

fn load_config(cli: &Cli) -> Result<BacktestConfig> {
    let mut cfg = match &cli.config {
        Some(p) => BacktestConfig::load(p)?,
        None => BacktestConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.rng_seed = seed;
        cfg.synthetic.rng_seed = seed;
    }
    if let Some(m) = cli.mandate {
        cfg.mandate = m;
    }
    if let Some(Command::Backtest { dates }) = &cli.command {
        if !dates.is_empty() {
            cfg.backtest.rebalance_dates = dates.clone();
        }
    }
    if let (Some(out), Some(Command::Backtest { .. })) = (&cli.out, &cli.command) {
        cfg.backtest.output_prefix = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    if cli.print_config {
        print!("{}", cfg.to_toml()?);
        return Ok(());
    }
    if let Some(path) = &cli.trace {
        ensure_parent(path)?;
        cfg.trace = Some(TraceWriter::create(path)?);
    }
    let out = |default: &str| cli.out.clone().unwrap_or_else(|| PathBuf::from(default));
    let Some(command) = &cli.command else {
        return Ok(());
    };

    match command {
        Command::GenData => {
            let dir = cli.out.clone().unwrap_or_else(|| cfg.data.dir.clone());
            let files = generate_universe(&cfg.synthetic, &dir)?;
            info!("wrote {} score files and {}", files.score_files.len(), files.price_file.display());
        }
        Command::Phase1 { date } => {
            let market = MarketData::load(&cfg)?;
            let period = market.period_index(&cfg, *date)?;
            let inputs = market.period(&cfg, *date)?;
            let set = backtest::period_phase1(&cfg, &inputs, period, &[])?;
            let prefix = out("out/phase1");
            let (objectives, portfolios) = (with_suffix(&prefix, "_objectives.csv"), with_suffix(&prefix, "_portfolios.csv"));
            ensure_parent(&objectives)?;
            write_phase1_outputs(&set, &objectives, &portfolios)?;
            info!("{} candidate portfolios written under {}", set.len(), prefix.display());
        }
        Command::Phase2 { date, phase1, previous } => {
            let market = MarketData::load(&cfg)?;
            let period = market.period_index(&cfg, *date)?;
            let inputs = market.period(&cfg, *date)?;
            let (ids, genomes) = read_phase1_portfolios(&with_suffix(phase1, "_portfolios.csv"))?;
            let sets: Vec<Vec<String>> = genomes
                .iter()
                .map(|g| g.selected().map(|i| ids[i].clone()).collect())
                .collect();
            let previous = match previous {
                Some(p) => read_portfolio(p)?,
                None => Portfolio::empty(),
            };
            let outcome = backtest::period_phase2(&cfg, &inputs, period, &sets, &previous)?;
            let prefix = out("out/phase2");
            let (csv, json) = (with_suffix(&prefix, "_winner.csv"), with_suffix(&prefix, "_winner.json"));
            ensure_parent(&csv)?;
            write_winner(&csv, &json, outcome.winner())?;
            info!("winner is candidate {} of {}", outcome.winner().index, sets.len());
        }
        Command::Backtest { .. } => {
            let report = run_backtest(&cfg)?;
            let paths = write_report(&report, &cfg.backtest.output_prefix)?;
            print!("{}", render_summary(&report.aggregate));
            info!("periods written to {}", paths.periods.display());
        }
        Command::Report { periods } => {
            let rows = read_periods(periods)?;
            print!("{}", render_summary(&summarize_periods(&rows)?));
        }
    }
    if let Some(t) = &cfg.trace {
        t.flush();
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    if e.is_infeasible() || matches!(e, Error::InfeasibleCardinality { .. } | Error::EmptyUniverse(_)) {
        3
    } else {
        2
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) if c.command.is_none() && !c.print_config => {
            let _ = Cli::command().error(ErrorKind::MissingSubcommand, "a subcommand is required").print();
            return ExitCode::from(1);
        }
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
