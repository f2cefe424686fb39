//! Weight normalization and the two ledger-based position repairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse-repair rounding threshold: half the minimum position.
pub fn sparse_threshold(min_weight: f64) -> f64 {
    min_weight / 2.0
}

/// Redistribution stops once the ledger is smaller than this.
pub const LEDGER_TOLERANCE: f64 = 1e-9;

pub const MAX_REDISTRIBUTION_PASSES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairStrategy {
    /// Strategy 1: small weights round to zero or up to the minimum.
    #[default]
    LedgerSparse,
    /// Strategy 2: every asset keeps at least the minimum.
    LedgerFull,
    /// No position repair, only normalization.
    NormalizeOnly,
}

/// Scales non-negative raw weights to sum to one.
pub fn normalize_weights(raw: &[f64]) -> Result<Vec<f64>> {
    if raw.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
    }
    let sum: f64 = raw.iter().sum();
    if sum <= 0.0 {
        return Err(Error::DegenerateGenome);
    }
    Ok(raw.iter().map(|w| w / sum).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FailureReason {
    /// Ledger non-zero but no holding can take or give weight.
    NoRecipients,
    PassLimit,
    /// The asset count cannot satisfy the bounds at all.
    InfeasibleCardinality,
}

/// Repair that could not bring the ledger to zero. `weights` is the
/// partially repaired vector.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairFailure {
    pub weights: Vec<f64>,
    pub residual: f64,
    pub reason: FailureReason,
}

impl RepairFailure {
    /// Summed bound violation plus the unallocated ledger.
    pub fn magnitude(&self, min_weight: f64, max_weight: f64) -> f64 {
        let bounds: f64 = self
            .weights
            .iter()
            .filter(|&&w| w != 0.0)
            .map(|&w| (min_weight - w).max(0.0) + (w - max_weight).max(0.0))
            .sum();
        bounds + self.residual.abs()
    }

    pub fn into_error(self, min_weight: f64, max_weight: f64) -> Error {
        match self.reason {
            FailureReason::InfeasibleCardinality => Error::InfeasibleCardinality {
                count: self.weights.len(),
                min_weight,
                max_weight,
            },
            _ => Error::DegeneratePortfolio(format!(
                "weight repair left {:.3e} unallocated",
                self.residual
            )),
        }
    }
}

/// Signed weight not yet placed: `1 - Σw`. Positive means holdings must
/// absorb weight, negative means they must give some up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightLedger {
    pub balance: f64,
}

impl WeightLedger {
    pub fn of(weights: &[f64]) -> Self {
        WeightLedger {
            balance: 1.0 - weights.iter().sum::<f64>(),
        }
    }

    pub fn settled(&self) -> bool {
        self.balance.abs() < LEDGER_TOLERANCE
    }
}

fn check_inputs(weights: &[f64], min_weight: f64, max_weight: f64) -> Result<()> {
    if !(0.0 < min_weight && min_weight <= max_weight && max_weight <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bad position bounds [{min_weight}, {max_weight}]"
        )));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidArgument("weights must be finite and non-negative".into()));
    }
    Ok(())
}

/// Spreads the ledger evenly over holdings that can move, capping each
/// share at the holding's room to its bound, until the ledger settles.
fn redistribute(w: &mut [f64], min_weight: f64, max_weight: f64) -> std::result::Result<(), (f64, FailureReason)> {
    for _ in 0..MAX_REDISTRIBUTION_PASSES {
        let ledger = WeightLedger::of(w);
        if ledger.settled() {
            return Ok(());
        }
        let give = ledger.balance > 0.0;
        let room = |x: f64| if give { max_weight - x } else { x - min_weight };
        let eligible = w.iter().filter(|&&x| x != 0.0 && room(x) > 0.0).count();
        if eligible == 0 {
            return Err((ledger.balance, FailureReason::NoRecipients));
        }
        let share = ledger.balance.abs() / eligible as f64;
        for x in w.iter_mut().filter(|x| **x != 0.0) {
            let r = room(*x);
            if r <= 0.0 {
                continue;
            }
            if share >= r {
                *x = if give { max_weight } else { min_weight };
            } else if give {
                *x += share;
            } else {
                *x -= share;
            }
        }
    }
    let ledger = WeightLedger::of(w);
    if ledger.settled() {
        Ok(())
    } else {
        Err((ledger.balance, FailureReason::PassLimit))
    }
}

fn finish(
    mut w: Vec<f64>,
    min_weight: f64,
    max_weight: f64,
) -> std::result::Result<Vec<f64>, RepairFailure> {
    match redistribute(&mut w, min_weight, max_weight) {
        Ok(()) => Ok(w),
        Err((residual, reason)) => Err(RepairFailure {
            weights: w,
            residual,
            reason,
        }),
    }
}

/// Strategy 1. Weights at or below half the minimum drop to zero, other
/// sub-minimum weights round up to the minimum, weights above the maximum
/// are capped; the net change is then redistributed.
pub fn repair_weights_strategy1(
    weights: &[f64],
    min_weight: f64,
    max_weight: f64,
) -> Result<std::result::Result<Vec<f64>, RepairFailure>> {
    check_inputs(weights, min_weight, max_weight)?;
    let threshold = sparse_threshold(min_weight);
    let w: Vec<f64> = weights
        .iter()
        .map(|&x| {
            if x <= threshold {
                0.0
            } else {
                x.clamp(min_weight, max_weight)
            }
        })
        .collect();
    Ok(finish(w, min_weight, max_weight))
}

/// Strategy 2. Every weight is clamped into the bounds, so every asset
/// stays held, then the net change is redistributed.
pub fn repair_weights_strategy2(
    weights: &[f64],
    min_weight: f64,
    max_weight: f64,
) -> Result<std::result::Result<Vec<f64>, RepairFailure>> {
    check_inputs(weights, min_weight, max_weight)?;
    let n = weights.len() as f64;
    let w: Vec<f64> = weights.iter().map(|&x| x.clamp(min_weight, max_weight)).collect();
    if n * min_weight > 1.0 + LEDGER_TOLERANCE || n * max_weight < 1.0 - LEDGER_TOLERANCE {
        return Ok(Err(RepairFailure {
            residual: WeightLedger::of(&w).balance,
            weights: w,
            reason: FailureReason::InfeasibleCardinality,
        }));
    }
    Ok(finish(w, min_weight, max_weight))
}

/// Normalizes raw genes and applies the chosen repair.
pub fn decode_weights(
    raw: &[f64],
    strategy: RepairStrategy,
    min_weight: f64,
    max_weight: f64,
) -> Result<std::result::Result<Vec<f64>, RepairFailure>> {
    let w = normalize_weights(raw)?;
    match strategy {
        RepairStrategy::LedgerSparse => repair_weights_strategy1(&w, min_weight, max_weight),
        RepairStrategy::LedgerFull => repair_weights_strategy2(&w, min_weight, max_weight),
        RepairStrategy::NormalizeOnly => Ok(Ok(w)),
    }
}
