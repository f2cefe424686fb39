use std::cmp::Ordering;

use super::Phase2Context;
use crate::error::{Error, Result};
use crate::portfolio::{check_constraints, ConstraintKind, Portfolio};

/// One candidate's post-repair best-Sharpe portfolio with its constraint
/// checks.
#[derive(Debug, Clone)]
pub struct CandidateResult {
    /// Position of the candidate in the Phase I output.
    pub index: usize,
    pub portfolio: Portfolio,
    pub sharpe: f64,
    /// Turnover in the constraint set's convention.
    pub turnover: f64,
    pub passes_market_cap: bool,
    pub passes_turnover: bool,
    pub turnover_repaired: bool,
    pub events: Vec<String>,
}

impl CandidateResult {
    pub(crate) fn assess(
        index: usize,
        mut portfolio: Portfolio,
        ctx: &Phase2Context<'_>,
        turnover_repaired: bool,
        events: Vec<String>,
    ) -> Self {
        let report = check_constraints(&portfolio, ctx.constraints, ctx.previous, ctx.universe);
        let turnover = report.check(ConstraintKind::Turnover).map_or(0.0, |c| c.value);
        let passes_market_cap = report.passes(ConstraintKind::MarketCap);
        let passes_turnover = report.passes(ConstraintKind::Turnover);
        portfolio.diagnostics.report = Some(report);
        CandidateResult {
            index,
            sharpe: portfolio.diagnostics.sharpe.unwrap_or(f64::NEG_INFINITY),
            portfolio,
            turnover,
            passes_market_cap,
            passes_turnover,
            turnover_repaired,
            events,
        }
    }

    pub fn passes(&self) -> bool {
        self.passes_market_cap && self.passes_turnover
    }
}

/// Position in `results` of the winner: the highest Sharpe among
/// portfolios passing the market-cap and turnover checks, otherwise the
/// lowest turnover overall. Ties go to the lowest candidate index.
pub fn select_winner(results: &[CandidateResult]) -> Result<usize> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no candidate results to choose from".into()));
    }
    let by_index = |a: &CandidateResult, b: &CandidateResult| b.index.cmp(&a.index);
    let passing = results.iter().enumerate().filter(|(_, r)| r.passes());
    let best = passing.max_by(|(_, a), (_, b)| a.sharpe.total_cmp(&b.sharpe).then_with(|| by_index(a, b)));
    if let Some((i, _)) = best {
        return Ok(i);
    }
    let (i, _) = results
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| match a.turnover.total_cmp(&b.turnover) {
            Ordering::Equal => a.index.cmp(&b.index),
            o => o,
        })
        .expect("non-empty");
    Ok(i)
}
