//! Score, price and risk-free files; universe pre-filters; return windows
//! and sample statistics.
//!
//! File formats (comma separated, header row required, `.` decimal point,
//! ISO-8601 dates):
//!
//! * score file `scores_YYYY-MM-DD.csv`: `asset_id,score,market_cap_usd,book_to_price`
//! * price file: `date,asset_id,close_usd` (long format, trading days only)
//! * risk-free file: `date,daily_rate`

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::portfolio::{Candidate, Covariance, ReturnStatistics};

pub const SCORE_HEADER: [&str; 4] = ["asset_id", "score", "market_cap_usd", "book_to_price"];
pub const PRICE_HEADER: [&str; 3] = ["date", "asset_id", "close_usd"];
pub const RISK_FREE_HEADER: [&str; 2] = ["date", "daily_rate"];
const DATE_FORMAT: &str = "%Y-%m-%d";

fn default_history() -> usize {
    287
}
fn default_forward() -> usize {
    63
}
fn default_min_returns() -> usize {
    126
}
fn default_max_fill() -> usize {
    5
}

/// Price-window requirements around a rebalance date.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    /// Daily returns available before the rebalance date (prices = history + 1).
    #[serde(default = "default_history")]
    pub history: usize,
    /// Trading days held after the rebalance date.
    #[serde(default = "default_forward")]
    pub forward: usize,
    /// Shortest return window for statistics.
    #[serde(default = "default_min_returns")]
    pub min_returns: usize,
    /// Longest run of missing prices that is forward-filled.
    #[serde(default = "default_max_fill")]
    pub max_fill: usize,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            history: default_history(),
            forward: default_forward(),
            min_returns: default_min_returns(),
            max_fill: default_max_fill(),
        }
    }
}

impl WindowSpec {
    /// Return-window length for `n_assets`: more observations than assets,
    /// clamped to `[min_returns, history]`.
    pub fn returns_window(&self, n_assets: usize) -> usize {
        (n_assets + 1).clamp(self.min_returns, self.history)
    }
}

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), DATE_FORMAT)
        .map_err(|e| Error::InvalidArgument(format!("bad date {s:?}: {e}")))
}

pub fn format_date(d: NaiveDate) -> String {
    d.format(DATE_FORMAT).to_string()
}

pub fn score_file_name(date: NaiveDate) -> String {
    format!("scores_{}.csv", format_date(date))
}

/// Rebalance date encoded in a `scores_YYYY-MM-DD.csv` file name.
pub fn score_file_date(path: &Path) -> Option<NaiveDate> {
    let name = path.file_name()?.to_str()?;
    let stem = name.strip_prefix("scores_")?.strip_suffix(".csv")?;
    NaiveDate::parse_from_str(stem, DATE_FORMAT).ok()
}

/// All score files in `dir`, sorted by date.
pub fn list_score_files(dir: &Path) -> Result<Vec<(NaiveDate, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if let Some(date) = score_file_date(&path) {
            files.push((date, path));
        }
    }
    files.sort();
    Ok(files)
}

fn open_csv(path: &Path, header: &[&str]) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {:?}, found {:?}", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
        });
    }
    Ok(reader)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

struct Row<'a> {
    path: &'a Path,
    line: u64,
    record: csv::StringRecord,
}

impl Row<'_> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line: self.line,
            message: message.into(),
        }
    }

    fn str(&self, i: usize) -> Result<&str> {
        self.record
            .get(i)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| self.err(format!("missing field {}", i + 1)))
    }

    fn num(&self, i: usize, name: &str) -> Result<f64> {
        let s = self.str(i)?;
        let v: f64 = s.parse().map_err(|_| self.err(format!("{name}: not a number: {s:?}")))?;
        if !v.is_finite() {
            return Err(self.err(format!("{name}: not finite")));
        }
        Ok(v)
    }

    fn date(&self, i: usize) -> Result<NaiveDate> {
        let s = self.str(i)?;
        NaiveDate::parse_from_str(s, DATE_FORMAT).map_err(|_| self.err(format!("bad date {s:?}")))
    }
}

fn rows<'a>(path: &'a Path, reader: &'a mut csv::Reader<File>) -> impl Iterator<Item = Result<Row<'a>>> + 'a {
    reader.records().map(move |r| {
        let record = r.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        Ok(Row { path, line, record })
    })
}

pub fn read_scores(path: &Path) -> Result<Vec<Candidate>> {
    let mut reader = open_csv(path, &SCORE_HEADER)?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for row in rows(path, &mut reader) {
        let row = row?;
        let c = Candidate {
            asset_id: row.str(0)?.to_string(),
            score: row.num(1, "score")?,
            market_cap: row.num(2, "market_cap_usd")?,
            book_to_price: row.num(3, "book_to_price")?,
        };
        c.validate().map_err(|e| row.err(e.to_string()))?;
        if !seen.insert(c.asset_id.clone()) {
            return Err(row.err(format!("duplicate asset_id {}", c.asset_id)));
        }
        out.push(c);
    }
    Ok(out)
}

fn create(path: &Path) -> Result<std::io::BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn write_scores(path: &Path, candidates: &[Candidate]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", SCORE_HEADER.join(",")).map_err(io)?;
    for c in candidates {
        writeln!(out, "{},{},{},{}", c.asset_id, c.score, c.market_cap, c.book_to_price).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Close prices on the union trading calendar of a price file.
#[derive(Debug, Clone)]
pub struct PriceTable {
    calendar: Vec<NaiveDate>,
    index: HashMap<String, usize>,
    series: Vec<Vec<Option<f64>>>,
}

impl PriceTable {
    pub fn load(path: &Path) -> Result<PriceTable> {
        let mut reader = open_csv(path, &PRICE_HEADER)?;
        let mut raw: Vec<(NaiveDate, String, f64, u64)> = Vec::new();
        for row in rows(path, &mut reader) {
            let row = row?;
            let price = row.num(2, "close_usd")?;
            if price <= 0.0 {
                return Err(row.err("close_usd must be positive"));
            }
            raw.push((row.date(0)?, row.str(1)?.to_string(), price, row.line));
        }
        let mut calendar: Vec<NaiveDate> = raw.iter().map(|r| r.0).collect();
        calendar.sort_unstable();
        calendar.dedup();
        let day: HashMap<NaiveDate, usize> = calendar.iter().enumerate().map(|(i, d)| (*d, i)).collect();

        let mut index = HashMap::new();
        let mut series: Vec<Vec<Option<f64>>> = Vec::new();
        for (date, asset, price, line) in raw {
            let next = series.len();
            let a = *index.entry(asset.clone()).or_insert(next);
            if a == next {
                series.push(vec![None; calendar.len()]);
            }
            let slot = &mut series[a][day[&date]];
            if slot.is_some() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("duplicate price for {asset} on {}", format_date(date)),
                });
            }
            *slot = Some(price);
        }
        Ok(PriceTable {
            calendar,
            index,
            series,
        })
    }

    /// Builds a table from in-memory series, each aligned to `calendar`.
    pub fn from_series(calendar: Vec<NaiveDate>, series: Vec<(String, Vec<Option<f64>>)>) -> Result<PriceTable> {
        if calendar.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("calendar must be strictly increasing".into()));
        }
        let mut index = HashMap::new();
        let mut out = Vec::with_capacity(series.len());
        for (id, s) in series {
            if s.len() != calendar.len() {
                return Err(Error::InvalidArgument(format!("series for {id} does not match the calendar")));
            }
            if index.insert(id.clone(), out.len()).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate series for {id}")));
            }
            out.push(s);
        }
        Ok(PriceTable {
            calendar,
            index,
            series: out,
        })
    }

    pub fn calendar(&self) -> &[NaiveDate] {
        &self.calendar
    }

    pub fn series(&self, asset_id: &str) -> Option<&[Option<f64>]> {
        self.index.get(asset_id).map(|&i| self.series[i].as_slice())
    }

    pub fn asset_ids(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }

    /// Index of the last trading day on or before `date`.
    pub fn day_index(&self, date: NaiveDate) -> Option<usize> {
        match self.calendar.binary_search(&date) {
            Ok(i) => Some(i),
            Err(0) => None,
            Err(i) => Some(i - 1),
        }
    }
}

/// Writes a long-format price file. `series` maps asset id to prices on
/// `calendar` (`None` = no trade that day).
pub fn write_prices(path: &Path, calendar: &[NaiveDate], series: &[(String, Vec<Option<f64>>)]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", PRICE_HEADER.join(",")).map_err(io)?;
    for (t, d) in calendar.iter().enumerate() {
        let date = format_date(*d);
        for (id, prices) in series {
            if let Some(p) = prices[t] {
                writeln!(out, "{date},{id},{p}").map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}

/// Why an asset was left out of a snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub asset_id: String,
    pub reason: String,
}

/// Candidates at one rebalance date joined to their price windows.
#[derive(Debug, Clone)]
pub struct UniverseSnapshot {
    pub as_of: NaiveDate,
    pub candidates: Vec<Candidate>,
    /// Trading dates covering `[as_of - history, as_of + forward]`.
    pub window_dates: Vec<NaiveDate>,
    /// Forward-filled prices on `window_dates`, per candidate.
    pub price_history: BTreeMap<String, Vec<f64>>,
    pub excluded: Vec<Exclusion>,
    pub window: WindowSpec,
}

impl UniverseSnapshot {
    /// Joins candidates to the price table, dropping (and logging) any asset
    /// without a full history and forward window.
    pub fn build(candidates: Vec<Candidate>, prices: &PriceTable, as_of: NaiveDate, window: WindowSpec) -> Result<UniverseSnapshot> {
        let t0 = prices.day_index(as_of).ok_or_else(|| {
            Error::EmptyUniverse(format!("no trading days on or before {}", format_date(as_of)))
        })?;
        if t0 < window.history || t0 + window.forward >= prices.calendar.len() {
            return Err(Error::InsufficientHistory {
                asset: "*".into(),
                detail: format!(
                    "price calendar cannot cover {} days back and {} forward of {}",
                    window.history,
                    window.forward,
                    format_date(as_of)
                ),
            });
        }
        let start = t0 - window.history;
        let end = t0 + window.forward;
        let mut kept = Vec::new();
        let mut history = BTreeMap::new();
        let mut excluded = Vec::new();
        for c in candidates {
            let filled = prices
                .series(&c.asset_id)
                .ok_or_else(|| "no prices".to_string())
                .and_then(|s| fill_window(&s[start..=end], window.max_fill));
            match filled {
                Ok(series) => {
                    history.insert(c.asset_id.clone(), series);
                    kept.push(c);
                }
                Err(reason) => {
                    warn!("{}: excluding {}: {reason}", format_date(as_of), c.asset_id);
                    excluded.push(Exclusion {
                        asset_id: c.asset_id,
                        reason,
                    });
                }
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyUniverse(format!(
                "no candidate has full price history at {}",
                format_date(as_of)
            )));
        }
        Ok(UniverseSnapshot {
            as_of,
            candidates: kept,
            window_dates: prices.calendar[start..=end].to_vec(),
            price_history: history,
            excluded,
            window,
        })
    }

    /// Index of the rebalance date within `window_dates`.
    pub fn as_of_offset(&self) -> usize {
        self.window.history
    }

    /// The trading date prices are marked at (last trading day ≤ `as_of`).
    pub fn trade_date(&self) -> NaiveDate {
        self.window_dates[self.as_of_offset()]
    }

    /// Prices from the rebalance date through the end of the forward window
    /// (`forward + 1` values).
    pub fn forward_prices(&self, asset_id: &str) -> Option<&[f64]> {
        self.price_history
            .get(asset_id)
            .map(|p| &p[self.as_of_offset()..])
    }

    pub fn candidate(&self, asset_id: &str) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.asset_id == asset_id)
    }

    pub fn contains(&self, asset_id: &str) -> bool {
        self.price_history.contains_key(asset_id)
    }

    fn with_candidates(&self, candidates: Vec<Candidate>) -> UniverseSnapshot {
        let keep: HashSet<&str> = candidates.iter().map(|c| c.asset_id.as_str()).collect();
        UniverseSnapshot {
            as_of: self.as_of,
            window_dates: self.window_dates.clone(),
            price_history: self
                .price_history
                .iter()
                .filter(|(k, _)| keep.contains(k.as_str()))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            excluded: self.excluded.clone(),
            window: self.window,
            candidates,
        }
    }
}

/// Forward-fills gaps of at most `max_fill` days. A missing first price or a
/// longer gap disqualifies the series.
fn fill_window(raw: &[Option<f64>], max_fill: usize) -> std::result::Result<Vec<f64>, String> {
    let mut out = Vec::with_capacity(raw.len());
    let mut last: Option<f64> = None;
    let mut gap = 0;
    for (i, p) in raw.iter().enumerate() {
        match (p, last) {
            (Some(v), _) => {
                gap = 0;
                last = Some(*v);
                out.push(*v);
            }
            (None, Some(v)) => {
                gap += 1;
                if gap > max_fill {
                    return Err(format!("gap of more than {max_fill} missing prices at window day {i}"));
                }
                out.push(v);
            }
            (None, None) => return Err(format!("no price at window start (window day {i})")),
        }
    }
    Ok(out)
}

/// Loads one rebalance date's universe from a score file and a price file.
pub fn load_universe(score_path: &Path, price_path: &Path, as_of: NaiveDate) -> Result<UniverseSnapshot> {
    let candidates = read_scores(score_path)?;
    let prices = PriceTable::load(price_path)?;
    UniverseSnapshot::build(candidates, &prices, as_of, WindowSpec::default())
}

fn default_score_floor() -> f64 {
    20.0
}
fn default_cap_fraction() -> f64 {
    0.12
}
fn default_cap_floor() -> f64 {
    750e6
}

/// A-priori candidate filters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    #[serde(default = "default_score_floor")]
    pub score_floor: f64,
    #[serde(default = "default_cap_fraction")]
    pub cap_fraction: f64,
    /// USD.
    #[serde(default = "default_cap_floor")]
    pub cap_floor: f64,
}

impl Default for FilterSpec {
    fn default() -> Self {
        FilterSpec {
            score_floor: default_score_floor(),
            cap_fraction: default_cap_fraction(),
            cap_floor: default_cap_floor(),
        }
    }
}

/// Drops candidates scoring below `score_floor`, then the smallest
/// `⌊cap_fraction·N⌋` by market cap (ties by asset id). When the market cap
/// at that cutoff exceeds `cap_floor`, only candidates below `cap_floor` are
/// dropped instead.
pub fn filter_universe(snapshot: &UniverseSnapshot, score_floor: f64, cap_fraction: f64, cap_floor: f64) -> Result<UniverseSnapshot> {
    if !(0.0..1.0).contains(&cap_fraction) {
        return Err(Error::InvalidArgument(format!("cap_fraction must be in [0, 1), got {cap_fraction}")));
    }
    let mut kept: Vec<Candidate> = snapshot
        .candidates
        .iter()
        .filter(|c| c.score >= score_floor)
        .cloned()
        .collect();

    let cut = (cap_fraction * kept.len() as f64).floor() as usize;
    if cut > 0 {
        let mut by_cap: Vec<&Candidate> = kept.iter().collect();
        by_cap.sort_by(|a, b| a.market_cap.total_cmp(&b.market_cap).then_with(|| a.asset_id.cmp(&b.asset_id)));
        let level = by_cap[cut - 1].market_cap;
        let drop: HashSet<String> = if level > cap_floor {
            by_cap.iter().filter(|c| c.market_cap < cap_floor).map(|c| c.asset_id.clone()).collect()
        } else {
            by_cap[..cut].iter().map(|c| c.asset_id.clone()).collect()
        };
        kept.retain(|c| !drop.contains(&c.asset_id));
    }
    if kept.is_empty() {
        return Err(Error::EmptyUniverse(format!(
            "every candidate filtered out at {}",
            format_date(snapshot.as_of)
        )));
    }
    Ok(snapshot.with_candidates(kept))
}

/// Unweighted mean market cap and mean book-to-price over the candidates.
pub fn universe_targets(snapshot: &UniverseSnapshot) -> (f64, f64) {
    let n = snapshot.candidates.len().max(1) as f64;
    let cap = snapshot.candidates.iter().map(|c| c.market_cap).sum::<f64>() / n;
    let bp = snapshot.candidates.iter().map(|c| c.book_to_price).sum::<f64>() / n;
    (cap, bp)
}

/// T×N daily simple returns ending at the rebalance date.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnsMatrix {
    pub asset_ids: Vec<String>,
    /// One row per day, one column per asset.
    pub observations: Vec<Vec<f64>>,
    pub window: (NaiveDate, NaiveDate),
}

impl ReturnsMatrix {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

pub fn build_returns_matrix(snapshot: &UniverseSnapshot, asset_ids: &[String], as_of: NaiveDate) -> Result<ReturnsMatrix> {
    if as_of != snapshot.as_of {
        return Err(Error::InvalidArgument(format!(
            "snapshot is for {}, not {}",
            format_date(snapshot.as_of),
            format_date(as_of)
        )));
    }
    let n = asset_ids.len();
    if n == 0 {
        return Err(Error::InvalidArgument("no assets for returns matrix".into()));
    }
    let t = snapshot.window.returns_window(n);
    if t <= n {
        return Err(Error::InvalidArgument(format!(
            "{n} assets need more than {n} observations but the window allows at most {}",
            snapshot.window.history
        )));
    }
    let end = snapshot.as_of_offset();
    let start = end - t;
    let series = asset_ids
        .iter()
        .map(|a| {
            snapshot.price_history.get(a).ok_or_else(|| Error::InsufficientHistory {
                asset: a.clone(),
                detail: format!("not in the universe at {}", format_date(as_of)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let observations = (start + 1..=end)
        .map(|day| series.iter().map(|p| p[day] / p[day - 1] - 1.0).collect())
        .collect();
    Ok(ReturnsMatrix {
        asset_ids: asset_ids.to_vec(),
        observations,
        window: (snapshot.window_dates[start + 1], snapshot.window_dates[end]),
    })
}

/// Sample means and covariance (`1/(T−1)`, two-pass).
pub fn compute_statistics(matrix: &ReturnsMatrix) -> Result<ReturnStatistics> {
    let t = matrix.observations.len();
    if t < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 observations, got {t}")));
    }
    let n = matrix.asset_ids.len();
    let mut means = vec![0.0; n];
    for row in &matrix.observations {
        for (m, r) in means.iter_mut().zip(row) {
            *m += r;
        }
    }
    for (j, m) in means.iter_mut().enumerate() {
        let first = matrix.observations[0][j];
        *m = if matrix.observations.iter().all(|row| row[j] == first) {
            first
        } else {
            *m / t as f64
        };
    }
    // centered columns, asset-major for cache-friendly dot products
    let centered: Vec<Vec<f64>> = (0..n)
        .map(|j| matrix.observations.iter().map(|row| row[j] - means[j]).collect())
        .collect();
    let mut cov = Covariance::zeros(n);
    let denom = (t - 1) as f64;
    for i in 0..n {
        for j in i..n {
            let s: f64 = centered[i].iter().zip(&centered[j]).map(|(a, b)| a * b).sum();
            cov.set_symmetric(i, j, s / denom);
        }
    }
    Ok(ReturnStatistics {
        asset_ids: matrix.asset_ids.clone(),
        mean_returns: means,
        covariance: cov,
        observation_count: t,
    })
}

pub fn read_risk_free(path: &Path) -> Result<Vec<(NaiveDate, f64)>> {
    let mut reader = open_csv(path, &RISK_FREE_HEADER)?;
    let mut out = Vec::new();
    for row in rows(path, &mut reader) {
        let row = row?;
        out.push((row.date(0)?, row.num(1, "daily_rate")?));
    }
    out.sort_by_key(|r| r.0);
    Ok(out)
}

pub fn write_risk_free(path: &Path, rates: &[(NaiveDate, f64)]) -> Result<()> {
    let mut out = create(path)?;
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", RISK_FREE_HEADER.join(",")).map_err(io)?;
    for (d, r) in rates {
        writeln!(out, "{},{r}", format_date(*d)).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Rate dated nearest to `as_of`; equidistant dates resolve to the earlier.
pub fn nearest_rate(rates: &[(NaiveDate, f64)], as_of: NaiveDate) -> Option<f64> {
    rates
        .iter()
        .min_by_key(|(d, _)| ((*d - as_of).num_days().abs(), *d))
        .map(|r| r.1)
}

pub fn load_risk_free(path: &Path, as_of: NaiveDate) -> Result<f64> {
    let rates = read_risk_free(path)?;
    nearest_rate(&rates, as_of).ok_or_else(|| {
        Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::UnexpectedEof, "risk-free file has no rates"),
        )
    })
}
