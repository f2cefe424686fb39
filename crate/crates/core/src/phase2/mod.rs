//! Phase II: weight each Phase I candidate with SPEA2, repair turnover
//! where needed, and pick the period's winner.

mod repair;
mod turnover_repair;
mod winner;

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;

use log::{debug, info};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::{
    derive_seed, polynomial_mutation_in_place, run_spea2, sbx_crossover, Bounds, EaParams, EaRng,
    Evaluation, ObjectiveVector, Problem, WeightGenome,
};
use crate::error::{Error, Result};
use crate::portfolio::{
    portfolio_mean_return, portfolio_variance, sharpe_ratio, Candidate, ConstraintReport,
    ConstraintSet, Portfolio, PortfolioDiagnostics, ReturnStatistics, TRADING_DAYS_PER_YEAR,
};

pub use repair::{
    decode_weights, normalize_weights, repair_weights_strategy1, repair_weights_strategy2,
    sparse_threshold, FailureReason, RepairFailure, RepairStrategy, WeightLedger,
    LEDGER_TOLERANCE, MAX_REDISTRIBUTION_PASSES,
};
pub use turnover_repair::{repair_turnover, TurnoverRepair};
pub use winner::{select_winner, CandidateResult};

/// Position objective for a genome whose weights sum to zero.
const DEGENERATE_POSITION_PENALTY: f64 = 2.0;

fn default_weighting_params() -> EaParams {
    EaParams::new(100, 600, 0.01)
}
fn default_turnover_params() -> EaParams {
    EaParams::new(50, 200, 0.02)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Phase2Config {
    #[serde(default = "default_weighting_params")]
    pub params: EaParams,
    #[serde(default)]
    pub strategy: RepairStrategy,
    /// Turnover-repair MOEA.
    #[serde(default = "default_turnover_params")]
    pub turnover: EaParams,
    /// Weight at most this many Phase I candidates (all when unset).
    #[serde(default)]
    pub max_candidates: Option<usize>,
}

impl Default for Phase2Config {
    fn default() -> Self {
        Phase2Config {
            params: default_weighting_params(),
            strategy: RepairStrategy::default(),
            turnover: default_turnover_params(),
            max_candidates: None,
        }
    }
}

/// Weighting problem over one candidate asset set.
#[derive(Debug, Clone)]
pub struct WeightingProblem {
    asset_ids: Vec<String>,
    stats: ReturnStatistics,
    previous: Portfolio,
    previous_aligned: Vec<f64>,
    /// Previous-winner weight in assets outside this set.
    previous_outside: f64,
    constraints: ConstraintSet,
    risk_free: f64,
    strategy: RepairStrategy,
    market_caps: Option<Vec<f64>>,
}

impl WeightingProblem {
    /// `asset_ids` are sorted; `stats` must cover all of them.
    pub fn new(
        asset_ids: &[String],
        stats: &ReturnStatistics,
        previous: Portfolio,
        constraints: ConstraintSet,
        risk_free: f64,
        strategy: RepairStrategy,
    ) -> Result<Self> {
        let mut ids = asset_ids.to_vec();
        ids.sort();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::InvalidArgument("weighting problem needs at least one asset".into()));
        }
        constraints.validate()?;
        let stats = stats.subset(&ids)?;
        let previous_aligned = previous.aligned(&ids);
        let previous_outside = (previous.total_weight() - previous_aligned.iter().sum::<f64>()).max(0.0);
        Ok(WeightingProblem {
            asset_ids: ids,
            stats,
            previous,
            previous_aligned,
            previous_outside,
            constraints,
            risk_free,
            strategy,
            market_caps: None,
        })
    }

    /// Enables the weighted market-cap check when choosing the best-Sharpe
    /// archive member. Assets missing from `universe` count as zero cap.
    pub fn with_market_caps(mut self, universe: &[Candidate]) -> Self {
        let caps: BTreeMap<&str, f64> = universe.iter().map(|c| (c.asset_id.as_str(), c.market_cap)).collect();
        self.market_caps = Some(self.asset_ids.iter().map(|a| caps.get(a.as_str()).copied().unwrap_or(0.0)).collect());
        self
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn stats(&self) -> &ReturnStatistics {
        &self.stats
    }

    pub fn previous(&self) -> &Portfolio {
        &self.previous
    }

    pub fn constraints(&self) -> &ConstraintSet {
        &self.constraints
    }

    pub fn risk_free(&self) -> f64 {
        self.risk_free
    }

    pub fn strategy(&self) -> RepairStrategy {
        self.strategy
    }

    pub fn decode(&self, genome: &WeightGenome) -> Result<std::result::Result<Vec<f64>, RepairFailure>> {
        decode_weights(genome.genes(), self.strategy, self.constraints.min_weight, self.constraints.max_weight)
    }

    /// One-way turnover against the previous winner, counting previous
    /// holdings outside this asset set as fully sold.
    pub fn turnover_of(&self, weights: &[f64]) -> f64 {
        if self.previous.is_empty() {
            return 0.0;
        }
        let inside: f64 = weights.iter().zip(&self.previous_aligned).map(|(w, p)| (w - p).abs()).sum();
        (0.5 * (inside + self.previous_outside)).clamp(0.0, 1.0)
    }

    pub fn measured_turnover(&self, weights: &[f64]) -> f64 {
        self.constraints.measured_turnover(self.turnover_of(weights))
    }

    pub fn passes_turnover(&self, weights: &[f64]) -> bool {
        self.measured_turnover(weights) <= self.constraints.turnover_budget() + 1e-12
    }

    pub fn mean_and_variance(&self, weights: &[f64]) -> (f64, f64) {
        let mean = portfolio_mean_return(weights, &self.stats.mean_returns).expect("aligned weights");
        let var = portfolio_variance(weights, &self.stats.covariance).expect("aligned weights");
        (mean, var)
    }

    /// Annualized Sharpe ratio; `-inf` when variance is zero.
    pub fn sharpe(&self, weights: &[f64]) -> f64 {
        let (mean, var) = self.mean_and_variance(weights);
        sharpe_ratio(mean, var, self.risk_free, TRADING_DAYS_PER_YEAR).unwrap_or(f64::NEG_INFINITY)
    }

    /// True when no caps were supplied.
    pub fn passes_market_cap(&self, weights: &[f64]) -> bool {
        match &self.market_caps {
            Some(caps) => weights.iter().zip(caps).map(|(w, c)| w * c).sum::<f64>() >= self.constraints.market_cap_target,
            None => true,
        }
    }

    /// Summed position-bound violation of non-zero weights plus the
    /// distance of the total from one.
    pub fn position_violation(&self, weights: &[f64]) -> f64 {
        if self.strategy == RepairStrategy::NormalizeOnly {
            return 0.0;
        }
        let (lo, hi) = (self.constraints.min_weight, self.constraints.max_weight);
        let bounds: f64 = weights
            .iter()
            .filter(|&&w| w != 0.0)
            .map(|&w| (lo - w).max(0.0) + (w - hi).max(0.0))
            .sum();
        let total = (1.0 - weights.iter().sum::<f64>()).abs();
        let v = bounds + if total < LEDGER_TOLERANCE { 0.0 } else { total };
        if v < 1e-12 {
            0.0
        } else {
            v
        }
    }

    pub fn portfolio(&self, weights: &[f64]) -> Portfolio {
        let (mean, var) = self.mean_and_variance(weights);
        let mut p = Portfolio::new(self.asset_ids.iter().cloned().zip(weights.iter().copied()));
        p.diagnostics = PortfolioDiagnostics {
            objectives: vec![mean, var, self.turnover_of(weights), self.position_violation(weights)],
            sharpe: Some(self.sharpe(weights)),
            report: None,
        };
        p
    }

    /// Previous winner restricted to this asset set and renormalized, if it
    /// holds any of these assets.
    pub fn previous_seed(&self) -> Option<WeightGenome> {
        normalize_weights(&self.previous_aligned).ok().map(WeightGenome)
    }
}

/// Four minimization objectives for already-repaired weights:
/// (−mean return, variance, turnover, position violation).
pub fn evaluate_weighting(weights: &[f64], problem: &WeightingProblem) -> Result<ObjectiveVector> {
    if weights.len() != problem.asset_ids.len() {
        return Err(Error::InvalidArgument(format!(
            "{} weights for {} assets",
            weights.len(),
            problem.asset_ids.len()
        )));
    }
    let (mean, var) = problem.mean_and_variance(weights);
    Ok(ObjectiveVector::new(vec![
        -mean,
        var,
        problem.turnover_of(weights),
        problem.position_violation(weights),
    ]))
}

fn random_weights(n: usize, rng: &mut EaRng) -> WeightGenome {
    WeightGenome((0..n).map(|_| rng.random::<f64>()).collect())
}

pub(crate) fn vary(a: &WeightGenome, b: &WeightGenome, params: &EaParams, rng: &mut EaRng) -> (WeightGenome, WeightGenome) {
    sbx_crossover(a, b, params.sbx_eta, Bounds::unit(), rng).expect("parents share the asset count")
}

pub(crate) fn perturb(g: &mut WeightGenome, params: &EaParams, rng: &mut EaRng) {
    polynomial_mutation_in_place(g, params.mutation_rate, params.pm_eta, Bounds::unit(), rng);
    if g.0.iter().all(|&x| x == 0.0) {
        *g = random_weights(g.0.len(), rng);
    }
}

impl Problem for WeightingProblem {
    type Genome = WeightGenome;

    fn objective_count(&self) -> usize {
        4
    }

    fn genome_len(&self) -> usize {
        self.asset_ids.len()
    }

    fn evaluate(&self, genome: &WeightGenome) -> Evaluation {
        match self.decode(genome) {
            Ok(Ok(w)) => {
                let (mean, var) = self.mean_and_variance(&w);
                Evaluation::feasible(vec![-mean, var, self.turnover_of(&w), 0.0])
            }
            Ok(Err(failure)) => {
                let penalty = 1.0 + failure.magnitude(self.constraints.min_weight, self.constraints.max_weight);
                let (mean, var) = self.mean_and_variance(&failure.weights);
                Evaluation {
                    objectives: vec![-mean, var, self.turnover_of(&failure.weights), penalty],
                    violation: penalty,
                }
            }
            Err(_) => Evaluation {
                objectives: vec![0.0, 0.0, 1.0, DEGENERATE_POSITION_PENALTY],
                violation: DEGENERATE_POSITION_PENALTY,
            },
        }
    }

    fn random_genome(&self, rng: &mut EaRng) -> WeightGenome {
        random_weights(self.asset_ids.len(), rng)
    }

    fn crossover(&self, a: &WeightGenome, b: &WeightGenome, params: &EaParams, rng: &mut EaRng) -> (WeightGenome, WeightGenome) {
        vary(a, b, params, rng)
    }

    fn mutate(&self, genome: &mut WeightGenome, params: &EaParams, rng: &mut EaRng) {
        perturb(genome, params, rng);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMember {
    /// Repaired weights aligned with the problem's asset ids.
    pub weights: Vec<f64>,
    pub objectives: ObjectiveVector,
}

#[derive(Debug, Clone)]
pub struct Phase2Result {
    pub asset_ids: Vec<String>,
    pub archive: Vec<WeightedMember>,
    pub best_index: usize,
    pub best_sharpe: Portfolio,
}

impl Phase2Result {
    pub fn best(&self) -> &WeightedMember {
        &self.archive[self.best_index]
    }
}

/// SPEA2 over repaired weight vectors. Generation zero holds the previous
/// winner (restricted and renormalized) and random weights. The best
/// member maximizes Sharpe, preferring members that pass the weighted
/// market-cap check when caps are known.
pub fn run_phase2(problem: &WeightingProblem, params: &EaParams) -> Result<Phase2Result> {
    let seeds: Vec<WeightGenome> = problem.previous_seed().into_iter().collect();
    let outcome = run_spea2(problem, params, &seeds)?;

    let mut archive = Vec::with_capacity(outcome.archive.len());
    for ind in outcome.archive.into_members() {
        if let Ok(Ok(weights)) = problem.decode(&ind.genome) {
            archive.push(WeightedMember {
                weights,
                objectives: ind.objectives().clone(),
            });
        }
    }
    if archive.is_empty() {
        return Err(Error::Phase2Infeasible(format!(
            "every weighting of the {} assets failed position repair",
            problem.asset_ids.len()
        )));
    }
    let key = |m: &WeightedMember| (problem.passes_market_cap(&m.weights), problem.sharpe(&m.weights));
    let mut best_index = 0;
    let mut best_key = key(&archive[0]);
    for (i, m) in archive.iter().enumerate().skip(1) {
        let k = key(m);
        if (k.0 && !best_key.0) || (k.0 == best_key.0 && k.1 > best_key.1) {
            best_index = i;
            best_key = k;
        }
    }
    let best_sharpe = problem.portfolio(&archive[best_index].weights);
    debug!(
        "phase 2: {} assets, archive {}, best Sharpe {:.3}",
        problem.asset_ids.len(),
        archive.len(),
        best_key.1
    );
    Ok(Phase2Result {
        asset_ids: problem.asset_ids.clone(),
        archive,
        best_index,
        best_sharpe,
    })
}

/// Everything a period's Phase II needs besides the candidate sets.
pub struct Phase2Context<'a> {
    /// Return statistics for an arbitrary asset set (candidate plus
    /// previous holdings for turnover repair).
    pub stats: &'a (dyn Fn(&[String]) -> Result<ReturnStatistics> + Sync),
    pub previous: &'a Portfolio,
    pub constraints: &'a ConstraintSet,
    pub risk_free: f64,
    /// Used for the weighted market-cap check.
    pub universe: &'a [Candidate],
}

#[derive(Debug, Clone)]
pub struct Phase2Outcome {
    pub results: Vec<CandidateResult>,
    pub winner: usize,
    /// Candidate indices skipped because Phase II found nothing feasible.
    pub failed: Vec<usize>,
}

impl Phase2Outcome {
    pub fn winner(&self) -> &CandidateResult {
        &self.results[self.winner]
    }
}

fn weigh_one(index: usize, ids: &[String], ctx: &Phase2Context<'_>, config: &Phase2Config, seed: u64) -> Result<CandidateResult> {
    let stats = (ctx.stats)(ids)?;
    let problem = WeightingProblem::new(ids, &stats, ctx.previous.clone(), ctx.constraints.clone(), ctx.risk_free, config.strategy)?
        .with_market_caps(ctx.universe);
    let mut params = config.params.clone().with_seed(derive_seed(seed, 2 * index as u64));
    params.trace = config.params.trace.as_ref().map(|t| t.labeled(format!("phase2/candidate{index}")));
    let result = run_phase2(&problem, &params)?;
    let best = result.best();
    let mut events = Vec::new();
    let mut portfolio = result.best_sharpe.clone();
    let mut turnover_repaired = false;

    let mcap_ok = problem.passes_market_cap(&best.weights);
    if mcap_ok && !problem.passes_turnover(&best.weights) {
        let mut tparams = config.turnover.clone().with_seed(derive_seed(seed, 2 * index as u64 + 1));
        tparams.trace = config.params.trace.as_ref().map(|t| t.labeled(format!("phase2a/candidate{index}")));
        match repair_turnover(&portfolio, &problem, ctx.stats, &tparams)? {
            TurnoverRepair::Unchanged => {}
            TurnoverRepair::Repaired(p) => {
                events.push(format!(
                    "turnover repaired from {:.4} to {:.4}",
                    portfolio.diagnostics.objectives[2], p.diagnostics.objectives[2]
                ));
                portfolio = p;
                turnover_repaired = true;
            }
            TurnoverRepair::Failed => events.push("turnover repair found no feasible member".into()),
        }
    }
    Ok(CandidateResult::assess(index, portfolio, ctx, turnover_repaired, events))
}

/// Weights every candidate set in parallel (independent seeds per
/// candidate) and selects the winner.
pub fn weight_candidates(
    candidates: &[Vec<String>],
    ctx: &Phase2Context<'_>,
    config: &Phase2Config,
    seed: u64,
) -> Result<Phase2Outcome> {
    let limit = config.max_candidates.unwrap_or(usize::MAX).min(candidates.len());
    let outcomes: Vec<Result<CandidateResult>> = candidates[..limit]
        .par_iter()
        .enumerate()
        .map(|(i, ids)| weigh_one(i, ids, ctx, config, seed))
        .collect();

    let mut results = Vec::new();
    let mut failed = Vec::new();
    for (i, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(r) => results.push(r),
            Err(e) if e.is_infeasible() || matches!(e, Error::InfeasibleCardinality { .. }) => {
                debug!("candidate {i}: {e}");
                failed.push(i);
            }
            Err(e) => return Err(e),
        }
    }
    if results.is_empty() {
        return Err(Error::Phase2Infeasible(format!("none of {limit} candidates produced a feasible weighting")));
    }
    let winner = select_winner(&results)?;
    info!(
        "phase 2: {} candidates weighted, winner is candidate {} (Sharpe {:.3})",
        results.len(),
        results[winner].index,
        results[winner].sharpe
    );
    Ok(Phase2Outcome { results, winner, failed })
}

/// Writes the `asset_id,weight` file for a portfolio.
pub fn write_portfolio(path: &Path, portfolio: &Portfolio) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    w.write_record(["asset_id", "weight"]).map_err(|e| csv_io(path, e))?;
    for (id, weight) in &portfolio.holdings {
        w.write_record([id.as_str(), &weight.to_string()]).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_portfolio(path: &Path) -> Result<Portfolio> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let mut holdings = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_io(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let id = rec.get(0).ok_or_else(|| parse_err("missing asset_id".into()))?;
        let w: f64 = rec
            .get(1)
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(format!("bad weight for {id}")))?;
        holdings.push((id.to_string(), w));
    }
    Ok(Portfolio::new(holdings))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
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

/// Diagnostics JSON written next to each winner file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WinnerDiagnostics {
    pub candidate_index: usize,
    /// (mean return, variance, turnover, position violation), daily units.
    pub objectives: Vec<f64>,
    pub sharpe: f64,
    pub turnover: f64,
    pub turnover_repaired: bool,
    pub report: Option<ConstraintReport>,
    pub repair_events: Vec<String>,
}

impl WinnerDiagnostics {
    pub fn from_result(r: &CandidateResult) -> Self {
        WinnerDiagnostics {
            candidate_index: r.index,
            objectives: r.portfolio.diagnostics.objectives.clone(),
            sharpe: r.sharpe,
            turnover: r.turnover,
            turnover_repaired: r.turnover_repaired,
            report: r.portfolio.diagnostics.report.clone(),
            repair_events: r.events.clone(),
        }
    }
}

pub fn write_winner(csv_path: &Path, json_path: &Path, result: &CandidateResult) -> Result<()> {
    write_portfolio(csv_path, &result.portfolio)?;
    let json = serde_json::to_string_pretty(&WinnerDiagnostics::from_result(result))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    std::fs::write(json_path, json + "\n").map_err(|e| Error::io(json_path, e))
}

#[cfg(test)]
mod tests;
