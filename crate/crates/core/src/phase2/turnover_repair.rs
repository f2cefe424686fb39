//! Turnover repair: trade the best-Sharpe weighting off against its
//! distance from the previous winner.

use super::{perturb, vary, RepairStrategy, WeightingProblem};
use crate::engine::{run_spea2, EaParams, EaRng, Evaluation, Problem, WeightGenome};
use crate::error::Result;
use crate::portfolio::{Portfolio, ReturnStatistics};

/// Floor applied to the Sharpe objective so degenerate weightings stay finite.
const SHARPE_FLOOR: f64 = -1e6;

#[derive(Debug, Clone, PartialEq)]
pub enum TurnoverRepair {
    /// The input already met the turnover budget.
    Unchanged,
    Repaired(Portfolio),
    /// No archived weighting met the budget.
    Failed,
}

struct TurnoverProblem {
    inner: WeightingProblem,
}

impl Problem for TurnoverProblem {
    type Genome = WeightGenome;

    fn objective_count(&self) -> usize {
        2
    }

    fn genome_len(&self) -> usize {
        self.inner.asset_ids().len()
    }

    fn evaluate(&self, genome: &WeightGenome) -> Evaluation {
        let (lo, hi) = (self.inner.constraints().min_weight, self.inner.constraints().max_weight);
        match self.inner.decode(genome) {
            Ok(Ok(w)) => Evaluation::feasible(vec![
                -self.inner.sharpe(&w).max(SHARPE_FLOOR),
                self.inner.turnover_of(&w),
            ]),
            Ok(Err(f)) => {
                let penalty = 1.0 + f.magnitude(lo, hi);
                Evaluation {
                    objectives: vec![-self.inner.sharpe(&f.weights).max(SHARPE_FLOOR), self.inner.turnover_of(&f.weights)],
                    violation: penalty,
                }
            }
            Err(_) => Evaluation {
                objectives: vec![-SHARPE_FLOOR, 1.0],
                violation: 2.0,
            },
        }
    }

    fn random_genome(&self, rng: &mut EaRng) -> WeightGenome {
        self.inner.random_genome(rng)
    }

    fn crossover(&self, a: &WeightGenome, b: &WeightGenome, params: &EaParams, rng: &mut EaRng) -> (WeightGenome, WeightGenome) {
        vary(a, b, params, rng)
    }

    fn mutate(&self, genome: &mut WeightGenome, params: &EaParams, rng: &mut EaRng) {
        perturb(genome, params, rng);
    }
}

/// Runs a two-objective SPEA2 (maximize Sharpe, minimize turnover) over
/// the best-Sharpe portfolio's assets plus the previous winner's, with
/// sparse repair so holdings may drop to zero. Generation zero holds the
/// best-Sharpe weights, the previous winner and blends of the two.
/// `stats` supplies return statistics for the enlarged asset set; previous
/// holdings it cannot cover are treated as sold.
pub fn repair_turnover(
    best_sharpe: &Portfolio,
    problem: &WeightingProblem,
    stats: &(dyn Fn(&[String]) -> Result<ReturnStatistics> + Sync),
    params: &EaParams,
) -> Result<TurnoverRepair> {
    if problem.passes_turnover(&best_sharpe.aligned(problem.asset_ids())) {
        return Ok(TurnoverRepair::Unchanged);
    }
    let mut ids: Vec<String> = best_sharpe.holdings.keys().chain(problem.previous().holdings.keys()).cloned().collect();
    ids.sort();
    ids.dedup();
    let union_stats = match stats(&ids) {
        Ok(s) => s,
        Err(_) => {
            ids.retain(|id| stats(std::slice::from_ref(id)).is_ok());
            stats(&ids)?
        }
    };
    let inner = WeightingProblem::new(
        &ids,
        &union_stats,
        problem.previous().clone(),
        problem.constraints().clone(),
        problem.risk_free(),
        RepairStrategy::LedgerSparse,
    )?;
    let tp = TurnoverProblem { inner };
    let inner = &tp.inner;

    let best = best_sharpe.aligned(inner.asset_ids());
    let mut seeds = vec![WeightGenome(best.clone())];
    if let Some(prev) = inner.previous_seed() {
        for alpha in [0.25, 0.5, 0.75] {
            let blend = best.iter().zip(&prev.0).map(|(b, p)| alpha * b + (1.0 - alpha) * p).collect();
            seeds.push(WeightGenome(blend));
        }
        seeds.push(prev);
    }
    let outcome = run_spea2(&tp, params, &seeds)?;

    let mut chosen: Option<(f64, Vec<f64>)> = None;
    for ind in outcome.archive.members() {
        if let Ok(Ok(w)) = inner.decode(&ind.genome) {
            if !inner.passes_turnover(&w) {
                continue;
            }
            let s = inner.sharpe(&w);
            if chosen.as_ref().is_none_or(|(best_s, _)| s > *best_s) {
                chosen = Some((s, w));
            }
        }
    }
    Ok(match chosen {
        Some((_, w)) => TurnoverRepair::Repaired(inner.portfolio(&w)),
        None => TurnoverRepair::Failed,
    })
}
