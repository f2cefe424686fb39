//! Deterministic synthetic market: factor-model prices, scores that carry a
//! tunable amount of forward-return signal, and log-normal fundamentals.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::data::{read_scores, score_file_name, write_prices, write_risk_free, write_scores, PriceTable};
use crate::error::{Error, Result};
use crate::portfolio::{Candidate, TRADING_DAYS_PER_YEAR};

fn d_n_assets() -> usize {
    400
}
fn d_n_periods() -> usize {
    20
}
fn d_n_factors() -> usize {
    3
}
fn d_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date")
}
fn d_cap_median() -> f64 {
    5e9
}
fn d_cap_sigma() -> f64 {
    1.0
}
fn d_bp_median() -> f64 {
    0.4
}
fn d_bp_sigma() -> f64 {
    0.5
}
fn d_ic() -> f64 {
    0.05
}
fn d_autocorr() -> f64 {
    0.8
}
fn d_drift() -> f64 {
    0.0003
}
fn d_factor_vol() -> f64 {
    0.007
}
fn d_idio_vol() -> f64 {
    0.015
}
fn d_rf() -> f64 {
    0.02
}
fn d_history() -> usize {
    287
}
fn d_spacing() -> usize {
    63
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(default = "d_n_assets")]
    pub n_assets: usize,
    /// Number of rebalance dates (score files).
    #[serde(default = "d_n_periods")]
    pub n_periods: usize,
    /// Trading days to simulate; the minimum for `n_periods` when unset.
    #[serde(default)]
    pub n_days: Option<usize>,
    #[serde(default = "d_n_factors")]
    pub n_factors: usize,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default = "d_start")]
    pub start_date: NaiveDate,
    #[serde(default = "d_cap_median")]
    pub cap_median: f64,
    /// Log-space standard deviation of market caps.
    #[serde(default = "d_cap_sigma")]
    pub cap_sigma: f64,
    #[serde(default = "d_bp_median")]
    pub book_to_price_median: f64,
    #[serde(default = "d_bp_sigma")]
    pub book_to_price_sigma: f64,
    /// Target correlation between the latent score signal and the next
    /// period's return.
    #[serde(default = "d_ic")]
    pub information_coefficient: f64,
    /// AR(1) coefficient of the signal between rebalance dates.
    #[serde(default = "d_autocorr")]
    pub score_autocorrelation: f64,
    #[serde(default = "d_drift")]
    pub daily_drift: f64,
    #[serde(default = "d_factor_vol")]
    pub factor_vol: f64,
    #[serde(default = "d_idio_vol")]
    pub idio_vol: f64,
    #[serde(default = "d_rf")]
    pub risk_free_annual: f64,
    /// Fraction of the scored universe swapped for new names at each
    /// rebalance date.
    #[serde(default)]
    pub replacement_fraction: f64,
    /// Trading days before the first rebalance date.
    #[serde(default = "d_history")]
    pub history_days: usize,
    /// Trading days between rebalance dates.
    #[serde(default = "d_spacing")]
    pub rebalance_spacing: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_assets: d_n_assets(),
            n_periods: d_n_periods(),
            n_days: None,
            n_factors: d_n_factors(),
            rng_seed: 0,
            start_date: d_start(),
            cap_median: d_cap_median(),
            cap_sigma: d_cap_sigma(),
            book_to_price_median: d_bp_median(),
            book_to_price_sigma: d_bp_sigma(),
            information_coefficient: d_ic(),
            score_autocorrelation: d_autocorr(),
            daily_drift: d_drift(),
            factor_vol: d_factor_vol(),
            idio_vol: d_idio_vol(),
            risk_free_annual: d_rf(),
            replacement_fraction: 0.0,
            history_days: d_history(),
            rebalance_spacing: d_spacing(),
        }
    }
}

impl SyntheticSpec {
    /// Smallest calendar that gives every rebalance date its history and a
    /// full forward window.
    pub fn min_days(&self) -> usize {
        self.history_days + 1 + self.rebalance_spacing * self.n_periods
    }

    pub fn days(&self) -> usize {
        self.n_days.unwrap_or_else(|| self.min_days())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_assets == 0 || self.n_periods == 0 || self.n_factors == 0 {
            return bad("n_assets, n_periods and n_factors must be positive".into());
        }
        if self.days() < self.min_days() {
            return bad(format!(
                "n_days {} is below the {} needed for {} periods",
                self.days(),
                self.min_days(),
                self.n_periods
            ));
        }
        if !(-1.0 < self.information_coefficient && self.information_coefficient < 1.0) {
            return bad(format!("information_coefficient {} outside (-1, 1)", self.information_coefficient));
        }
        if !(0.0..1.0).contains(&self.score_autocorrelation) {
            return bad("score_autocorrelation must be in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.replacement_fraction) {
            return bad("replacement_fraction must be in [0, 1]".into());
        }
        if !(self.cap_median > 0.0 && self.book_to_price_median > 0.0) {
            return bad("median cap and book-to-price must be positive".into());
        }
        if self.cap_sigma < 0.0 || self.book_to_price_sigma < 0.0 || self.factor_vol < 0.0 || self.idio_vol < 0.0 {
            return bad("volatilities must be non-negative".into());
        }
        if self.rebalance_spacing == 0 {
            return bad("rebalance_spacing must be positive".into());
        }
        Ok(())
    }

    /// Calendar offsets of the rebalance dates.
    pub fn rebalance_indices(&self) -> Vec<usize> {
        (0..self.n_periods).map(|k| self.history_days + k * self.rebalance_spacing).collect()
    }

    fn pool_size(&self) -> usize {
        if self.replacement_fraction > 0.0 {
            2 * self.n_assets
        } else {
            self.n_assets
        }
    }
}

/// Weekday calendar of `n` trading days starting at `start` (rolled
/// forward to a weekday).
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d.checked_add_days(Days::new(1)).expect("date in range");
    }
    out
}

/// In-memory synthetic market.
#[derive(Debug, Clone)]
pub struct SyntheticMarket {
    pub calendar: Vec<NaiveDate>,
    pub asset_ids: Vec<String>,
    /// `prices[asset][day]`.
    pub prices: Vec<Vec<f64>>,
    /// One scored universe per rebalance date.
    pub snapshots: Vec<(NaiveDate, Vec<Candidate>)>,
    pub daily_risk_free: f64,
    /// Latent signal per rebalance date and pool asset.
    pub signals: Vec<Vec<f64>>,
}

/// Builds prices and score snapshots. Daily return of asset i is
/// `drift + βᵢ·f + εᵢ + αᵢ`, where the alpha term spreads
/// `κ·sᵢ` over the period following each rebalance date and the score
/// published on that date is `100·Φ(sᵢ)`.
pub fn simulate(spec: &SyntheticSpec) -> Result<SyntheticMarket> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let n_days = spec.days();
    let pool = spec.pool_size();
    let k = spec.n_factors;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let asset_ids: Vec<String> = (0..pool).map(|i| format!("SYN{i:04}")).collect();
    let loadings: Vec<Vec<f64>> = (0..pool)
        .map(|_| {
            (0..k)
                .map(|j| {
                    let z: f64 = std_normal.sample(&mut rng);
                    if j == 0 {
                        1.0 + 0.3 * z
                    } else {
                        0.5 * z
                    }
                })
                .collect()
        })
        .collect();
    let caps = LogNormal::new(spec.cap_median.ln(), spec.cap_sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let bps = LogNormal::new(spec.book_to_price_median.ln(), spec.book_to_price_sigma)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let cap0: Vec<f64> = (0..pool).map(|_| caps.sample(&mut rng)).collect();
    let bp0: Vec<f64> = (0..pool).map(|_| bps.sample(&mut rng)).collect();
    let price0: Vec<f64> = (0..pool).map(|_| (50f64.ln() + 0.5 * std_normal.sample(&mut rng)).exp()).collect();

    // latent signal per rebalance date
    let rho = spec.score_autocorrelation;
    let innovation = (1.0 - rho * rho).sqrt();
    let mut signals: Vec<Vec<f64>> = Vec::with_capacity(spec.n_periods);
    for p in 0..spec.n_periods {
        let s: Vec<f64> = (0..pool)
            .map(|i| {
                let e: f64 = std_normal.sample(&mut rng);
                if p == 0 {
                    e
                } else {
                    rho * signals[p - 1][i] + innovation * e
                }
            })
            .collect();
        signals.push(s);
    }

    // alpha scale giving the requested correlation with the period return
    let spacing = spec.rebalance_spacing as f64;
    let loading_var = 0.09 + 0.25 * (k - 1) as f64;
    let period_sd = (spacing * (spec.idio_vol.powi(2) + spec.factor_vol.powi(2) * loading_var)).sqrt();
    let ic = spec.information_coefficient;
    let kappa = ic / (1.0 - ic * ic).sqrt() * period_sd;

    let rebalances = spec.rebalance_indices();
    let mut prices: Vec<Vec<f64>> = price0.iter().map(|&p| {
        let mut v = Vec::with_capacity(n_days);
        v.push(p);
        v
    }).collect();
    let mut factors = vec![0.0; k];
    for t in 1..n_days {
        for f in factors.iter_mut() {
            *f = spec.factor_vol * std_normal.sample(&mut rng);
        }
        // period whose forward window contains day t
        let period = rebalances.iter().rposition(|&r| r < t).filter(|&p| t <= rebalances[p] + spec.rebalance_spacing);
        for i in 0..pool {
            let common: f64 = loadings[i].iter().zip(&factors).map(|(b, f)| b * f).sum();
            let eps = spec.idio_vol * std_normal.sample(&mut rng);
            let alpha = period.map_or(0.0, |p| kappa * signals[p][i] / spacing);
            let r = (spec.daily_drift + common + eps + alpha).max(-0.9);
            let prev = prices[i][t - 1];
            prices[i].push(prev * (1.0 + r));
        }
    }

    // scored universe membership per date
    let mut members: BTreeSet<usize> = (0..spec.n_assets).collect();
    let swap = (spec.replacement_fraction * spec.n_assets as f64).floor() as usize;
    let phi = StdNormal::new(0.0, 1.0).expect("unit normal");
    let calendar = business_days(spec.start_date, n_days);
    let mut snapshots = Vec::with_capacity(spec.n_periods);
    for (p, &r) in rebalances.iter().enumerate() {
        if p > 0 && swap > 0 {
            let current: Vec<usize> = members.iter().copied().collect();
            let outside: Vec<usize> = (0..pool).filter(|i| !members.contains(i)).collect();
            let n = swap.min(outside.len());
            let leaving = index::sample(&mut rng, current.len(), n);
            let joining = index::sample(&mut rng, outside.len(), n);
            for l in leaving.iter() {
                members.remove(&current[l]);
            }
            for j in joining.iter() {
                members.insert(outside[j]);
            }
        }
        let cands = members
            .iter()
            .map(|&i| {
                let growth = prices[i][r] / prices[i][0];
                Candidate {
                    asset_id: asset_ids[i].clone(),
                    score: 100.0 * phi.cdf(signals[p][i]),
                    market_cap: cap0[i] * growth,
                    book_to_price: bp0[i] / growth,
                }
            })
            .collect();
        snapshots.push((calendar[r], cands));
    }

    Ok(SyntheticMarket {
        calendar,
        asset_ids,
        prices,
        snapshots,
        daily_risk_free: spec.risk_free_annual / TRADING_DAYS_PER_YEAR as f64,
        signals,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratedFiles {
    pub score_files: Vec<(NaiveDate, PathBuf)>,
    pub price_file: PathBuf,
    pub risk_free_file: PathBuf,
}

pub const PRICE_FILE_NAME: &str = "prices.csv";
pub const RISK_FREE_FILE_NAME: &str = "risk_free.csv";

/// Writes score files, `prices.csv` and `risk_free.csv` into `out_dir`.
pub fn generate_universe(spec: &SyntheticSpec, out_dir: &Path) -> Result<GeneratedFiles> {
    let market = simulate(spec)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut score_files = Vec::with_capacity(market.snapshots.len());
    for (date, cands) in &market.snapshots {
        let path = out_dir.join(score_file_name(*date));
        write_scores(&path, cands)?;
        score_files.push((*date, path));
    }
    let price_file = out_dir.join(PRICE_FILE_NAME);
    let series: Vec<(String, Vec<Option<f64>>)> = market
        .asset_ids
        .iter()
        .zip(&market.prices)
        .map(|(id, p)| (id.clone(), p.iter().map(|&x| Some(x)).collect()))
        .collect();
    write_prices(&price_file, &market.calendar, &series)?;
    let risk_free_file = out_dir.join(RISK_FREE_FILE_NAME);
    let rates: Vec<(NaiveDate, f64)> = market.snapshots.iter().map(|(d, _)| (*d, market.daily_risk_free)).collect();
    write_risk_free(&risk_free_file, &rates)?;
    Ok(GeneratedFiles {
        score_files,
        price_file,
        risk_free_file,
    })
}

/// Buy-and-hold return of a cap-weighted portfolio of `universe` from
/// `as_of` over `horizon` trading days. Names without a price on `as_of`
/// are skipped; a name whose prices stop early is valued at its last
/// available price.
pub fn benchmark_return(prices: &PriceTable, universe: &[Candidate], as_of: NaiveDate, horizon: usize) -> Result<f64> {
    let start = prices
        .day_index(as_of)
        .ok_or_else(|| Error::DataConsistency(format!("{as_of} is not a trading day in the price file")))?;
    let end = (start + horizon).min(prices.calendar().len() - 1);
    let mut total_cap = 0.0;
    let mut acc = 0.0;
    for c in universe {
        let Some(series) = prices.series(&c.asset_id) else { continue };
        let Some(p0) = series[start] else { continue };
        let p1 = series[start..=end].iter().rev().find_map(|p| *p).unwrap_or(p0);
        total_cap += c.market_cap;
        acc += c.market_cap * (p1 / p0 - 1.0);
    }
    if total_cap <= 0.0 {
        return Err(Error::EmptyUniverse(format!("no priced benchmark constituents on {as_of}")));
    }
    Ok(acc / total_cap)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPeriod {
    pub start: NaiveDate,
    pub period_return: f64,
}

/// Quarterly-rebalanced cap-weighted benchmark over the full (unfiltered)
/// universe of each score file.
pub fn cap_weighted_benchmark(price_path: &Path, score_files: &[(NaiveDate, PathBuf)], horizon: usize) -> Result<Vec<BenchmarkPeriod>> {
    let prices = PriceTable::load(price_path)?;
    score_files
        .iter()
        .map(|(date, path)| {
            let universe = read_scores(path)?;
            Ok(BenchmarkPeriod {
                start: *date,
                period_return: benchmark_return(&prices, &universe, *date, horizon)?,
            })
        })
        .collect()
}
