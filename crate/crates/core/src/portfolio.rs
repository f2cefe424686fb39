//! Finance-side types and pure functions shared by both phases and the
//! backtester.
//!
//! Turnover throughout is one-way turnover, `½·Σ|w_new − w_old|` over the
//! union of holdings. The turnover budget for a rebalance is the monthly cap
//! times the months between rebalances (8% × 3 = 24% by default);
//! [`TurnoverConvention::TwoWay`] measures `Σ|Δw|` against the same budget.

use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trading days per year used for annualization.
pub const TRADING_DAYS_PER_YEAR: u32 = 252;

/// One investable stock at a rebalance date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub asset_id: String,
    pub score: f64,
    /// USD.
    pub market_cap: f64,
    pub book_to_price: f64,
}

impl Candidate {
    pub fn validate(&self) -> Result<()> {
        if !self.score.is_finite() {
            return Err(Error::InvalidArgument(format!("{}: score is not finite", self.asset_id)));
        }
        if !(self.market_cap > 0.0 && self.market_cap.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{}: market cap must be positive",
                self.asset_id
            )));
        }
        if !(self.book_to_price > 0.0 && self.book_to_price.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "{}: book-to-price must be positive",
                self.asset_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TurnoverConvention {
    #[default]
    OneWay,
    TwoWay,
}

fn default_min_weight() -> f64 {
    0.0035
}
fn default_max_weight() -> f64 {
    0.04
}
fn default_monthly_turnover_cap() -> f64 {
    0.08
}
fn default_rebalance_months() -> u32 {
    3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    #[serde(default = "default_min_weight")]
    pub min_weight: f64,
    #[serde(default = "default_max_weight")]
    pub max_weight: f64,
    #[serde(default = "default_monthly_turnover_cap")]
    pub monthly_turnover_cap: f64,
    #[serde(default = "default_rebalance_months")]
    pub rebalance_months: u32,
    /// USD; set per period from the universe.
    #[serde(default)]
    pub market_cap_target: f64,
    /// Growth mandate only; set per period from the universe.
    #[serde(default)]
    pub book_to_price_ceiling: Option<f64>,
    #[serde(default)]
    pub turnover_convention: TurnoverConvention,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        ConstraintSet {
            min_weight: default_min_weight(),
            max_weight: default_max_weight(),
            monthly_turnover_cap: default_monthly_turnover_cap(),
            rebalance_months: default_rebalance_months(),
            market_cap_target: 0.0,
            book_to_price_ceiling: None,
            turnover_convention: TurnoverConvention::OneWay,
        }
    }
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.min_weight && self.min_weight < self.max_weight && self.max_weight <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "weight bounds must satisfy 0 < min < max <= 1, got [{}, {}]",
                self.min_weight, self.max_weight
            )));
        }
        if !(self.monthly_turnover_cap > 0.0 && self.monthly_turnover_cap <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "monthly turnover cap must be in (0, 1], got {}",
                self.monthly_turnover_cap
            )));
        }
        if self.rebalance_months == 0 {
            return Err(Error::InvalidArgument("rebalance_months must be positive".into()));
        }
        Ok(())
    }

    /// Allowed turnover per rebalance event.
    pub fn turnover_budget(&self) -> f64 {
        self.monthly_turnover_cap * self.rebalance_months as f64
    }

    /// One-way turnover expressed in this set's convention.
    pub fn measured_turnover(&self, one_way: f64) -> f64 {
        match self.turnover_convention {
            TurnoverConvention::OneWay => one_way,
            TurnoverConvention::TwoWay => 2.0 * one_way,
        }
    }

    pub fn cardinality(&self) -> Result<(usize, usize)> {
        cardinality_bounds(self.min_weight, self.max_weight)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PortfolioDiagnostics {
    /// Objective values in natural orientation (return, variance, turnover,
    /// position violation for a weighted portfolio).
    pub objectives: Vec<f64>,
    pub sharpe: Option<f64>,
    pub report: Option<ConstraintReport>,
}

/// Asset weights (fractions of NAV) with provenance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Portfolio {
    pub holdings: BTreeMap<String, f64>,
    pub as_of: Option<NaiveDate>,
    #[serde(default)]
    pub diagnostics: PortfolioDiagnostics,
}

impl Portfolio {
    pub fn new(holdings: impl IntoIterator<Item = (String, f64)>) -> Self {
        Portfolio {
            holdings: holdings.into_iter().filter(|(_, w)| *w != 0.0).collect(),
            as_of: None,
            diagnostics: PortfolioDiagnostics::default(),
        }
    }

    pub fn empty() -> Self {
        Portfolio::default()
    }

    pub fn with_as_of(mut self, as_of: NaiveDate) -> Self {
        self.as_of = Some(as_of);
        self
    }

    pub fn is_empty(&self) -> bool {
        self.holdings.is_empty()
    }

    pub fn len(&self) -> usize {
        self.holdings.len()
    }

    pub fn weight(&self, asset_id: &str) -> f64 {
        self.holdings.get(asset_id).copied().unwrap_or(0.0)
    }

    pub fn total_weight(&self) -> f64 {
        self.holdings.values().sum()
    }

    /// Weights aligned to `asset_ids` (0 for assets not held).
    pub fn aligned(&self, asset_ids: &[String]) -> Vec<f64> {
        asset_ids.iter().map(|a| self.weight(a)).collect()
    }
}

/// Symmetric covariance matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Covariance {
    dim: usize,
    data: Vec<f64>,
}

impl Covariance {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument("covariance must be square".into()));
        }
        Ok(Covariance {
            dim,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Covariance {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub(crate) fn set_symmetric(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Sub-matrix for the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> Covariance {
        let dim = indices.len();
        let mut data = Vec::with_capacity(dim * dim);
        for &i in indices {
            for &j in indices {
                data.push(self.get(i, j));
            }
        }
        Covariance { dim, data }
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }
}

/// Per-asset daily mean returns and covariance over a return window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnStatistics {
    pub asset_ids: Vec<String>,
    pub mean_returns: Vec<f64>,
    pub covariance: Covariance,
    pub observation_count: usize,
}

impl ReturnStatistics {
    /// Statistics restricted to `asset_ids` (all must be present).
    pub fn subset(&self, asset_ids: &[String]) -> Result<ReturnStatistics> {
        let pos: HashMap<&str, usize> = self
            .asset_ids
            .iter()
            .enumerate()
            .map(|(i, a)| (a.as_str(), i))
            .collect();
        let idx = asset_ids
            .iter()
            .map(|a| {
                pos.get(a.as_str()).copied().ok_or_else(|| {
                    Error::DataConsistency(format!("asset {a} missing from return statistics"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ReturnStatistics {
            asset_ids: asset_ids.to_vec(),
            mean_returns: idx.iter().map(|&i| self.mean_returns[i]).collect(),
            covariance: self.covariance.select(&idx),
            observation_count: self.observation_count,
        })
    }
}

/// Cardinality range implied by position bounds. The upper bound rounds
/// `1 / min_weight` to nearest (1/0.0035 = 285.7 → 286); the lower bound is
/// `⌈1 / max_weight⌉`.
pub fn cardinality_bounds(min_weight: f64, max_weight: f64) -> Result<(usize, usize)> {
    if !(0.0 < min_weight && min_weight < max_weight && max_weight <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "weight bounds must satisfy 0 < min < max <= 1, got [{min_weight}, {max_weight}]"
        )));
    }
    // 1/0.04 is not exact in binary; tolerate representation error before ceil.
    let min_n = (1.0 / max_weight - 1e-9).ceil().max(1.0) as usize;
    let max_n = (1.0 / min_weight).round() as usize;
    Ok((min_n, max_n))
}

pub fn portfolio_mean_return(weights: &[f64], mean_returns: &[f64]) -> Result<f64> {
    if weights.len() != mean_returns.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} mean returns",
            weights.len(),
            mean_returns.len()
        )));
    }
    Ok(weights.iter().zip(mean_returns).map(|(w, r)| w * r).sum())
}

/// `wᵀΣw`, floored at zero against rounding.
pub fn portfolio_variance(weights: &[f64], covariance: &Covariance) -> Result<f64> {
    if weights.len() != covariance.dim() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for a {}x{} covariance",
            weights.len(),
            covariance.dim(),
            covariance.dim()
        )));
    }
    let mut total = 0.0;
    for (i, &wi) in weights.iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        let row = covariance.row(i);
        let s: f64 = weights.iter().zip(row).map(|(wj, c)| wj * c).sum();
        total += wi * s;
    }
    Ok(total.max(0.0))
}

/// Annualized Sharpe ratio from per-period mean return, variance and
/// risk-free rate.
pub fn sharpe_ratio(mean_return: f64, variance: f64, risk_free_rate: f64, periods_per_year: u32) -> Result<f64> {
    if variance.is_nan() || variance <= 0.0 {
        return Err(Error::DegeneratePortfolio(format!(
            "Sharpe ratio undefined for variance {variance}"
        )));
    }
    let p = periods_per_year as f64;
    Ok(((mean_return - risk_free_rate) * p) / (variance.sqrt() * p.sqrt()))
}

/// One-way turnover between two portfolios. An empty previous portfolio
/// (inception) has zero turnover by convention.
pub fn turnover(previous: &Portfolio, proposed: &Portfolio) -> f64 {
    if previous.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (id, &w) in &proposed.holdings {
        total += (w - previous.weight(id)).abs();
    }
    for (id, &w) in &previous.holdings {
        if !proposed.holdings.contains_key(id) {
            total += w.abs();
        }
    }
    (0.5 * total).clamp(0.0, 1.0)
}

fn lookup(universe: &[Candidate]) -> HashMap<&str, &Candidate> {
    universe.iter().map(|c| (c.asset_id.as_str(), c)).collect()
}

/// `Σ wᵢ·capᵢ` in USD.
pub fn weighted_market_cap(portfolio: &Portfolio, universe: &[Candidate]) -> Result<f64> {
    weighted_attribute(portfolio, &lookup(universe), |c| c.market_cap)
}

/// Weight-averaged book-to-price.
pub fn weighted_book_to_price(portfolio: &Portfolio, universe: &[Candidate]) -> Result<f64> {
    let total = portfolio.total_weight();
    if total <= 0.0 {
        return Ok(0.0);
    }
    Ok(weighted_attribute(portfolio, &lookup(universe), |c| c.book_to_price)? / total)
}

fn weighted_attribute(
    portfolio: &Portfolio,
    by_id: &HashMap<&str, &Candidate>,
    attr: impl Fn(&Candidate) -> f64,
) -> Result<f64> {
    portfolio
        .holdings
        .iter()
        .map(|(id, &w)| {
            by_id
                .get(id.as_str())
                .map(|c| w * attr(c))
                .ok_or_else(|| Error::DataConsistency(format!("holding {id} is not in the universe")))
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Cardinality,
    PositionBounds,
    MarketCap,
    BookToPrice,
    Turnover,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub kind: ConstraintKind,
    pub passed: bool,
    /// Magnitude by which the limit is exceeded; 0 when passed.
    pub violation: f64,
    pub value: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintReport {
    pub checks: Vec<ConstraintCheck>,
}

impl ConstraintReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, kind: ConstraintKind) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.kind == kind)
    }

    pub fn passes(&self, kind: ConstraintKind) -> bool {
        self.check(kind).is_none_or(|c| c.passed)
    }
}

fn upper_check(kind: ConstraintKind, value: f64, limit: f64) -> ConstraintCheck {
    let violation = (value - limit).max(0.0);
    ConstraintCheck {
        kind,
        passed: value <= limit,
        violation,
        value,
        limit,
    }
}

/// Evaluates every portfolio constraint. Violations are reported, never
/// raised; a holding missing from `universe` counts as zero market cap and
/// zero book-to-price.
pub fn check_constraints(
    portfolio: &Portfolio,
    constraints: &ConstraintSet,
    previous: &Portfolio,
    universe: &[Candidate],
) -> ConstraintReport {
    let by_id = lookup(universe);
    let mut checks = Vec::with_capacity(5);

    let count = portfolio.holdings.values().filter(|&&w| w != 0.0).count();
    let (min_n, max_n) = constraints.cardinality().unwrap_or((1, usize::MAX));
    let card_violation = if count < min_n {
        (min_n - count) as f64
    } else if count > max_n {
        (count - max_n) as f64
    } else {
        0.0
    };
    checks.push(ConstraintCheck {
        kind: ConstraintKind::Cardinality,
        passed: card_violation == 0.0,
        violation: card_violation,
        value: count as f64,
        limit: if count < min_n { min_n as f64 } else { max_n as f64 },
    });

    let position_violation: f64 = portfolio
        .holdings
        .values()
        .filter(|&&w| w != 0.0)
        .map(|&w| {
            if w < constraints.min_weight {
                constraints.min_weight - w
            } else if w > constraints.max_weight {
                w - constraints.max_weight
            } else {
                0.0
            }
        })
        .sum();
    checks.push(ConstraintCheck {
        kind: ConstraintKind::PositionBounds,
        passed: position_violation == 0.0,
        violation: position_violation,
        value: portfolio.holdings.values().copied().fold(0.0, f64::max),
        limit: constraints.max_weight,
    });

    let attr_sum = |f: fn(&Candidate) -> f64| -> f64 {
        portfolio
            .holdings
            .iter()
            .map(|(id, &w)| by_id.get(id.as_str()).map_or(0.0, |c| w * f(c)))
            .sum()
    };
    let wcap = attr_sum(|c| c.market_cap);
    checks.push(ConstraintCheck {
        kind: ConstraintKind::MarketCap,
        passed: wcap >= constraints.market_cap_target,
        violation: (constraints.market_cap_target - wcap).max(0.0),
        value: wcap,
        limit: constraints.market_cap_target,
    });

    if let Some(ceiling) = constraints.book_to_price_ceiling {
        let total = portfolio.total_weight();
        let bp = if total > 0.0 {
            attr_sum(|c| c.book_to_price) / total
        } else {
            0.0
        };
        checks.push(upper_check(ConstraintKind::BookToPrice, bp, ceiling));
    }

    let measured = constraints.measured_turnover(turnover(previous, portfolio));
    checks.push(upper_check(
        ConstraintKind::Turnover,
        measured,
        constraints.turnover_budget(),
    ));

    ConstraintReport { checks }
}
