//! Quarterly backtest: filter, Phase I and Phase II at each rebalance date,
//! buy-and-hold performance until the next one, and aggregate metrics.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::config::BacktestConfig;
use crate::data::{
    build_returns_matrix, compute_statistics, filter_universe, format_date, list_score_files,
    nearest_rate, read_risk_free, read_scores, universe_targets, PriceTable, UniverseSnapshot,
};
use crate::engine::derive_seed;
use crate::error::{Error, Result};
use crate::phase1::{run_phase1, CandidatePortfolioSet, SelectionProblem};
use crate::phase2::{weight_candidates, write_portfolio, Phase2Context, Phase2Outcome};
use crate::portfolio::{
    check_constraints, turnover, Candidate, ConstraintKind, ConstraintReport, ConstraintSet,
    Portfolio, ReturnStatistics,
};
use crate::synthetic::benchmark_return;

pub const INITIAL_VALUE: f64 = 10_000.0;
pub const QUARTERS_PER_YEAR: f64 = 4.0;
/// Trailing windows reported, in quarters (1, 3, 5 and 10 years).
pub const TRAILING_QUARTERS: [usize; 4] = [4, 12, 20, 40];

/// Buy-and-hold outcome of one holding period.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodPerformance {
    pub gross: f64,
    pub net: f64,
    /// Weights at the end of the period, renormalized over holdings still
    /// priced.
    pub end_weights: Portfolio,
    pub events: Vec<String>,
}

/// Forward return of `portfolio` given each holding's price path from the
/// rebalance date onward (`forward[id][0]` is the entry price). A holding
/// whose path has a gap is sold at its last price before the gap. Net
/// return deducts `cost_bps` per unit of one-way turnover on both sides.
pub fn period_performance(
    portfolio: &Portfolio,
    forward: &BTreeMap<String, Vec<Option<f64>>>,
    cost_bps: f64,
    one_way_turnover: f64,
) -> PeriodPerformance {
    let mut gross = 0.0;
    let mut ends = Vec::new();
    let mut events = Vec::new();
    for (id, &w) in &portfolio.holdings {
        let path = forward.get(id).map(Vec::as_slice).unwrap_or(&[]);
        let Some(p0) = path.first().copied().flatten() else {
            events.push(format!("{id}: no entry price, held at cost"));
            continue;
        };
        let gap = path.iter().position(Option::is_none);
        let exit = match gap {
            Some(g) => {
                let p = path[g - 1].expect("prices before the gap are present");
                events.push(format!("{id}: price missing after {} days, sold at {p}", g - 1));
                p
            }
            None => *path.last().expect("non-empty path").as_ref().expect("present"),
        };
        let growth = exit / p0;
        gross += w * (growth - 1.0);
        if gap.is_none() {
            ends.push((id.clone(), w * growth));
        }
    }
    let total: f64 = ends.iter().map(|(_, v)| v).sum();
    let end_weights = if total > 0.0 {
        Portfolio::new(ends.into_iter().map(|(id, v)| (id, v / total)))
    } else {
        Portfolio::empty()
    };
    PeriodPerformance {
        gross,
        net: gross - cost_bps * 1e-4 * one_way_turnover * 2.0,
        end_weights,
        events,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrailingWindow {
    pub quarters: usize,
    pub cumulative: f64,
    pub annualized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub periods: usize,
    pub cumulative_value: f64,
    pub benchmark_cumulative_value: f64,
    pub trailing: Vec<TrailingWindow>,
    pub benchmark_trailing: Vec<TrailingWindow>,
    /// Annualized; `None` when net returns have zero dispersion.
    pub sharpe: Option<f64>,
    pub benchmark_sharpe: Option<f64>,
    pub information_ratio: f64,
    /// Tracking error was zero, so the information ratio is reported as 0.
    pub zero_tracking_error: bool,
    pub turnover_breaches: usize,
    pub held_periods: usize,
}

fn growth_value(returns: &[f64]) -> f64 {
    returns.iter().fold(INITIAL_VALUE, |v, r| v * (1.0 + r))
}

fn trailing(returns: &[f64]) -> Vec<TrailingWindow> {
    TRAILING_QUARTERS
        .iter()
        .filter(|&&q| returns.len() >= q)
        .map(|&q| {
            let cumulative = returns[returns.len() - q..].iter().fold(1.0, |v, r| v * (1.0 + r)) - 1.0;
            TrailingWindow {
                quarters: q,
                cumulative,
                annualized: (1.0 + cumulative).powf(QUARTERS_PER_YEAR / q as f64) - 1.0,
            }
        })
        .collect()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn annualized_ratio(xs: &[f64]) -> Option<f64> {
    let (mean, sd) = mean_sd(xs);
    (sd > 0.0).then(|| mean * QUARTERS_PER_YEAR / (sd * QUARTERS_PER_YEAR.sqrt()))
}

/// Aggregates quarterly net returns against the benchmark. `risk_free`
/// holds per-quarter risk-free returns aligned with `net`.
pub fn aggregate_metrics(net: &[f64], benchmark: &[f64], risk_free: &[f64]) -> Result<AggregateMetrics> {
    if net.len() != benchmark.len() || net.len() != risk_free.len() {
        return Err(Error::InvalidArgument("return series differ in length".into()));
    }
    if net.is_empty() {
        return Err(Error::InvalidArgument("no periods to aggregate".into()));
    }
    let excess: Vec<f64> = net.iter().zip(risk_free).map(|(r, f)| r - f).collect();
    let bench_excess: Vec<f64> = benchmark.iter().zip(risk_free).map(|(r, f)| r - f).collect();
    let active: Vec<f64> = net.iter().zip(benchmark).map(|(r, b)| r - b).collect();
    let ir = annualized_ratio(&active);
    Ok(AggregateMetrics {
        periods: net.len(),
        cumulative_value: growth_value(net),
        benchmark_cumulative_value: growth_value(benchmark),
        trailing: trailing(net),
        benchmark_trailing: trailing(benchmark),
        sharpe: annualized_ratio(&excess),
        benchmark_sharpe: annualized_ratio(&bench_excess),
        information_ratio: ir.unwrap_or(0.0),
        zero_tracking_error: ir.is_none(),
        turnover_breaches: 0,
        held_periods: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRow {
    pub date: NaiveDate,
    pub end_date: NaiveDate,
    pub gross_return: f64,
    pub net_return: f64,
    pub benchmark_return: f64,
    pub risk_free_return: f64,
    /// In the constraint set's convention.
    pub turnover: f64,
    pub turnover_budget: f64,
    pub turnover_breach: bool,
    /// Phase I or II was infeasible and the previous portfolio was kept.
    pub held_previous: bool,
    pub candidates: usize,
    pub cumulative_value: f64,
    pub benchmark_value: f64,
    pub winner: Portfolio,
    pub report: ConstraintReport,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub periods: Vec<PeriodRow>,
    pub aggregate: AggregateMetrics,
}

/// Prices, risk-free rates and score files for a run.
pub struct MarketData {
    pub prices: PriceTable,
    pub rates: Vec<(NaiveDate, f64)>,
    pub score_files: Vec<(NaiveDate, PathBuf)>,
}

impl MarketData {
    pub fn load(cfg: &BacktestConfig) -> Result<Self> {
        let prices = PriceTable::load(&cfg.data.price_file())?;
        let rates = match cfg.data.risk_free_file() {
            Some(p) => read_risk_free(&p)?,
            None => Vec::new(),
        };
        Ok(MarketData {
            prices,
            rates,
            score_files: list_score_files(&cfg.data.dir)?,
        })
    }

    /// Rebalance dates of the run: the configured dates (each must have a
    /// score file) or every score file, keeping only dates with a complete
    /// forward window.
    pub fn rebalance_dates(&self, cfg: &BacktestConfig) -> Result<Vec<NaiveDate>> {
        let mut dates: Vec<NaiveDate> = self.score_files.iter().map(|(d, _)| *d).collect();
        let wanted = &cfg.backtest.rebalance_dates;
        if !wanted.is_empty() {
            if let Some(d) = wanted.iter().find(|d| !dates.contains(d)) {
                return Err(Error::DataConsistency(format!("no score file for rebalance date {d}")));
            }
            dates.retain(|d| wanted.contains(d));
        }
        let horizon = cfg.window.forward;
        let calendar_len = self.prices.calendar().len();
        dates.retain(|d| self.prices.day_index(*d).is_some_and(|i| i + horizon < calendar_len));
        if let Some(m) = cfg.backtest.max_periods {
            dates.truncate(m);
        }
        if dates.is_empty() {
            return Err(Error::DataConsistency("no rebalance date has a complete forward window".into()));
        }
        Ok(dates)
    }

    /// Position of `date` among the run's rebalance dates, which fixes the
    /// seeds of its Phase I and Phase II runs.
    pub fn period_index(&self, cfg: &BacktestConfig, date: NaiveDate) -> Result<usize> {
        let wanted = &cfg.backtest.rebalance_dates;
        self.score_files
            .iter()
            .map(|(d, _)| *d)
            .filter(|d| wanted.is_empty() || wanted.contains(d))
            .position(|d| d == date)
            .ok_or_else(|| Error::DataConsistency(format!("{date} is not a rebalance date")))
    }

    /// Inputs for the rebalance on `date`.
    pub fn period(&self, cfg: &BacktestConfig, date: NaiveDate) -> Result<PeriodInputs> {
        let path = self
            .score_files
            .iter()
            .find(|(d, _)| *d == date)
            .map(|(_, p)| p)
            .ok_or_else(|| Error::DataConsistency(format!("no score file for {date}")))?;
        let universe = read_scores(path)?;
        let snapshot = UniverseSnapshot::build(universe.clone(), &self.prices, date, cfg.window)?;
        let filtered = filter_universe(&snapshot, cfg.filter.score_floor, cfg.filter.cap_fraction, cfg.filter.cap_floor);
        let constraints = match &filtered {
            Ok(f) => {
                let (cap, bp) = universe_targets(f);
                ConstraintSet {
                    market_cap_target: cap,
                    book_to_price_ceiling: cfg.mandate.is_growth().then_some(bp),
                    ..cfg.constraints.clone()
                }
            }
            Err(_) => cfg.constraints.clone(),
        };
        Ok(PeriodInputs {
            date,
            universe,
            snapshot,
            filtered: filtered.map_err(|e| e.to_string()),
            constraints,
            daily_risk_free: nearest_rate(&self.rates, date).unwrap_or(0.0),
        })
    }
}

/// Everything one rebalance needs.
#[derive(Debug, Clone)]
pub struct PeriodInputs {
    pub date: NaiveDate,
    /// The full scored universe, used for the benchmark.
    pub universe: Vec<Candidate>,
    pub snapshot: UniverseSnapshot,
    /// Candidates after the a-priori filters, or why none remain.
    pub filtered: std::result::Result<UniverseSnapshot, String>,
    /// Configured constraints with this period's market-cap target and, for
    /// the growth mandate, book-to-price ceiling.
    pub constraints: ConstraintSet,
    pub daily_risk_free: f64,
}

impl PeriodInputs {
    pub fn filtered(&self) -> Result<&UniverseSnapshot> {
        self.filtered.as_ref().map_err(|m| Error::EmptyUniverse(m.clone()))
    }
}

/// Phase I for the period with index `period` in the run.
pub fn period_phase1(cfg: &BacktestConfig, inputs: &PeriodInputs, period: usize, priors: &[Vec<String>]) -> Result<CandidatePortfolioSet> {
    let cardinality = inputs.constraints.cardinality()?;
    let problem = SelectionProblem::new(inputs.filtered()?, cfg.mandate, cardinality)?
        .with_priors(priors)
        .with_initial_popcount(cfg.phase1.initial_popcount);
    let mut params = cfg.phase1.params(cfg.mandate).clone().with_seed(derive_seed(cfg.rng_seed, 2 * period as u64));
    params.trace = cfg.trace.as_ref().map(|t| t.labeled(format!("{}/phase1", format_date(inputs.date))));
    run_phase1(&problem, &params, cfg.phase1.max_candidates)
}

/// Phase II over Phase I's candidate sets.
pub fn period_phase2(
    cfg: &BacktestConfig,
    inputs: &PeriodInputs,
    period: usize,
    candidate_sets: &[Vec<String>],
    previous: &Portfolio,
) -> Result<Phase2Outcome> {
    let snapshot = &inputs.snapshot;
    let stats = |ids: &[String]| -> Result<ReturnStatistics> {
        compute_statistics(&build_returns_matrix(snapshot, ids, snapshot.as_of)?)
    };
    let ctx = Phase2Context {
        stats: &stats,
        previous,
        constraints: &inputs.constraints,
        risk_free: inputs.daily_risk_free,
        universe: &inputs.filtered()?.candidates,
    };
    let mut config = cfg.phase2.clone();
    config.params.trace = cfg.trace.as_ref().map(|t| t.labeled(format_date(inputs.date)));
    weight_candidates(candidate_sets, &ctx, &config, derive_seed(cfg.rng_seed, 2 * period as u64 + 1))
}

fn forward_paths(prices: &PriceTable, ids: impl Iterator<Item = String>, start: usize, horizon: usize) -> BTreeMap<String, Vec<Option<f64>>> {
    let end = (start + horizon).min(prices.calendar().len() - 1);
    ids.map(|id| {
        let path = prices.series(&id).map(|s| s[start..=end].to_vec()).unwrap_or_default();
        (id, path)
    })
    .collect()
}

fn holds_previous(e: &Error) -> bool {
    e.is_infeasible() || matches!(e, Error::EmptyUniverse(_) | Error::InfeasibleCardinality { .. })
}

/// Runs every rebalance period in order. A period whose selection is
/// infeasible keeps the previous (drifted) portfolio.
pub fn run_backtest(cfg: &BacktestConfig) -> Result<BacktestReport> {
    cfg.validate()?;
    let market = MarketData::load(cfg)?;
    let dates = market.rebalance_dates(cfg)?;
    let prices = &market.prices;
    let horizon = cfg.window.forward;

    let mut previous = Portfolio::empty();
    let mut priors: Vec<Vec<String>> = Vec::new();
    let mut rows: Vec<PeriodRow> = Vec::with_capacity(dates.len());
    let mut value = INITIAL_VALUE;
    let mut bench_value = INITIAL_VALUE;

    for (period, &date) in dates.iter().enumerate() {
        let inputs = market.period(cfg, date)?;
        let start = prices.day_index(date).expect("filtered above");
        let end_date = prices.calendar()[start + horizon];
        let benchmark = benchmark_return(prices, &inputs.universe, date, horizon)?;
        let risk_free_return = (1.0 + inputs.daily_risk_free).powi(horizon as i32) - 1.0;
        let constraints = &inputs.constraints;

        let selection = period_phase1(cfg, &inputs, period, &priors).and_then(|set| {
            let outcome = period_phase2(cfg, &inputs, period, &set.asset_sets(), &previous)?;
            Ok((set, outcome))
        });
        let (winner, held, mut events, n_candidates) = match selection {
            Ok((set, outcome)) => {
                let w = outcome.winner();
                let mut events = w.events.clone();
                if !outcome.failed.is_empty() {
                    events.push(format!("{} candidates had no feasible weighting", outcome.failed.len()));
                }
                // only this period's evolved sets seed the next one, so the
                // prior list stays within max_candidates
                priors = set
                    .portfolios
                    .iter()
                    .filter(|p| !p.carried_over)
                    .map(|p| set.asset_ids_of(&p.genome))
                    .collect();
                (w.portfolio.clone(), false, events, set.len())
            }
            Err(e) if holds_previous(&e) => {
                warn!("{date}: {e}; holding the previous portfolio");
                (previous.clone(), true, vec![format!("held previous portfolio: {e}")], 0)
            }
            Err(e) => return Err(e),
        };

        let one_way = turnover(&previous, &winner);
        let measured = constraints.measured_turnover(one_way);
        let budget = constraints.turnover_budget();
        let breach = measured > budget + 1e-12;
        if breach {
            warn!("{date}: turnover {measured:.4} exceeds budget {budget:.4}");
        }
        let report = check_constraints(&winner, constraints, &previous, &inputs.snapshot.candidates);
        let forward = forward_paths(prices, winner.holdings.keys().cloned(), start, horizon);
        let perf = period_performance(&winner, &forward, cfg.backtest.transaction_cost_bps, one_way);
        events.extend(perf.events.iter().cloned());

        value *= 1.0 + perf.net;
        bench_value *= 1.0 + benchmark;
        info!(
            "{date}: net {:+.4} benchmark {:+.4} turnover {:.4}{}",
            perf.net,
            benchmark,
            measured,
            if held { " (held)" } else { "" }
        );
        rows.push(PeriodRow {
            date,
            end_date,
            gross_return: perf.gross,
            net_return: perf.net,
            benchmark_return: benchmark,
            risk_free_return,
            turnover: measured,
            turnover_budget: budget,
            turnover_breach: breach,
            held_previous: held,
            candidates: n_candidates,
            cumulative_value: value,
            benchmark_value: bench_value,
            winner: winner.clone().with_as_of(date),
            report,
            events,
        });
        previous = perf.end_weights;
    }

    let aggregate = aggregate_rows(&rows)?;
    Ok(BacktestReport { periods: rows, aggregate })
}

fn aggregate_rows(rows: &[PeriodRow]) -> Result<AggregateMetrics> {
    let net: Vec<f64> = rows.iter().map(|r| r.net_return).collect();
    let bench: Vec<f64> = rows.iter().map(|r| r.benchmark_return).collect();
    let rf: Vec<f64> = rows.iter().map(|r| r.risk_free_return).collect();
    let mut agg = aggregate_metrics(&net, &bench, &rf)?;
    agg.turnover_breaches = rows.iter().filter(|r| r.turnover_breach).count();
    agg.held_periods = rows.iter().filter(|r| r.held_previous).count();
    Ok(agg)
}

const PERIOD_HEADER: [&str; 16] = [
    "date",
    "end_date",
    "gross_return",
    "net_return",
    "benchmark_return",
    "risk_free_return",
    "turnover",
    "turnover_budget",
    "turnover_breach",
    "held_previous",
    "candidates",
    "holdings",
    "cumulative_value",
    "benchmark_value",
    "passes_position",
    "passes_market_cap",
];

pub struct ReportPaths {
    pub periods: PathBuf,
    pub summary: PathBuf,
    pub holdings_dir: PathBuf,
}

impl ReportPaths {
    pub fn for_prefix(prefix: &Path) -> Self {
        let with = |suffix: &str| {
            let mut s = prefix.as_os_str().to_owned();
            s.push(suffix);
            PathBuf::from(s)
        };
        ReportPaths {
            periods: with("_periods.csv"),
            summary: with("_summary.json"),
            holdings_dir: with("_holdings"),
        }
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Writes `<prefix>_periods.csv`, `<prefix>_summary.json` and one
/// `<prefix>_holdings/<date>.csv` per period.
pub fn write_report(report: &BacktestReport, prefix: &Path) -> Result<ReportPaths> {
    let paths = ReportPaths::for_prefix(prefix);
    if let Some(parent) = paths.periods.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::create_dir_all(&paths.holdings_dir).map_err(|e| Error::io(&paths.holdings_dir, e))?;

    let mut w = csv::Writer::from_path(&paths.periods).map_err(|e| csv_err(&paths.periods, e))?;
    w.write_record(PERIOD_HEADER).map_err(|e| csv_err(&paths.periods, e))?;
    for r in &report.periods {
        w.write_record([
            format_date(r.date),
            format_date(r.end_date),
            r.gross_return.to_string(),
            r.net_return.to_string(),
            r.benchmark_return.to_string(),
            r.risk_free_return.to_string(),
            r.turnover.to_string(),
            r.turnover_budget.to_string(),
            r.turnover_breach.to_string(),
            r.held_previous.to_string(),
            r.candidates.to_string(),
            r.winner.len().to_string(),
            r.cumulative_value.to_string(),
            r.benchmark_value.to_string(),
            (r.report.passes(ConstraintKind::PositionBounds) && r.report.passes(ConstraintKind::Cardinality)).to_string(),
            r.report.passes(ConstraintKind::MarketCap).to_string(),
        ])
        .map_err(|e| csv_err(&paths.periods, e))?;
        write_portfolio(&paths.holdings_dir.join(format!("{}.csv", format_date(r.date))), &r.winner)?;
    }
    w.flush().map_err(|e| Error::io(&paths.periods, e))?;

    let json = serde_json::to_string_pretty(&report.aggregate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    std::fs::write(&paths.summary, json + "\n").map_err(|e| Error::io(&paths.summary, e))?;
    Ok(paths)
}

/// The return columns of a periods CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodSummary {
    pub date: NaiveDate,
    pub net_return: f64,
    pub benchmark_return: f64,
    pub risk_free_return: f64,
    pub turnover_breach: bool,
    pub held_previous: bool,
}

pub fn read_periods(path: &Path) -> Result<Vec<PeriodSummary>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let col = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("missing column {name}"),
        })
    };
    let (c_date, c_net, c_bench, c_rf, c_breach, c_held) = (
        col("date")?,
        col("net_return")?,
        col("benchmark_return")?,
        col("risk_free_return")?,
        col("turnover_breach")?,
        col("held_previous")?,
    );
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |m: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: m,
        };
        let num = |c: usize| -> Result<f64> { rec[c].parse().map_err(|_| bad(format!("bad number {:?}", &rec[c]))) };
        let flag = |c: usize| -> Result<bool> { rec[c].parse().map_err(|_| bad(format!("bad flag {:?}", &rec[c]))) };
        out.push(PeriodSummary {
            date: crate::data::parse_date(&rec[c_date]).map_err(|_| bad(format!("bad date {:?}", &rec[c_date])))?,
            net_return: num(c_net)?,
            benchmark_return: num(c_bench)?,
            risk_free_return: num(c_rf)?,
            turnover_breach: flag(c_breach)?,
            held_previous: flag(c_held)?,
        });
    }
    Ok(out)
}

/// Aggregates a periods CSV the same way the backtest does.
pub fn summarize_periods(rows: &[PeriodSummary]) -> Result<AggregateMetrics> {
    let net: Vec<f64> = rows.iter().map(|r| r.net_return).collect();
    let bench: Vec<f64> = rows.iter().map(|r| r.benchmark_return).collect();
    let rf: Vec<f64> = rows.iter().map(|r| r.risk_free_return).collect();
    let mut agg = aggregate_metrics(&net, &bench, &rf)?;
    agg.turnover_breaches = rows.iter().filter(|r| r.turnover_breach).count();
    agg.held_periods = rows.iter().filter(|r| r.held_previous).count();
    Ok(agg)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{x:.3}"))
}

/// Plain-text summary table.
pub fn render_summary(agg: &AggregateMetrics) -> String {
    let mut s = String::new();
    s.push_str(&format!("{:<28}{:>14}{:>14}\n", "", "portfolio", "benchmark"));
    s.push_str(&format!(
        "{:<28}{:>14.2}{:>14.2}\n",
        "value of 10,000 USD", agg.cumulative_value, agg.benchmark_cumulative_value
    ));
    for (p, b) in agg.trailing.iter().zip(&agg.benchmark_trailing) {
        let years = p.quarters / 4;
        s.push_str(&format!(
            "{:<28}{:>13.2}%{:>13.2}%\n",
            format!("{years}y cumulative return"),
            100.0 * p.cumulative,
            100.0 * b.cumulative
        ));
        s.push_str(&format!(
            "{:<28}{:>13.2}%{:>13.2}%\n",
            format!("{years}y annualized return"),
            100.0 * p.annualized,
            100.0 * b.annualized
        ));
    }
    s.push_str(&format!("{:<28}{:>14}{:>14}\n", "Sharpe ratio", opt(agg.sharpe), opt(agg.benchmark_sharpe)));
    s.push_str(&format!(
        "{:<28}{:>14}\n",
        "information ratio",
        if agg.zero_tracking_error { "0 (no TE)".to_string() } else { format!("{:.3}", agg.information_ratio) }
    ));
    s.push_str(&format!("{:<28}{:>14}\n", "periods", agg.periods));
    s.push_str(&format!("{:<28}{:>14}\n", "turnover breaches", agg.turnover_breaches));
    s.push_str(&format!("{:<28}{:>14}\n", "held periods", agg.held_periods));
    s
}
