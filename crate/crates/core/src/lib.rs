//! Multiobjective evolutionary portfolio construction.
//!
//! A rebalance runs in two evolutionary phases: NSGA-II picks candidate
//! stock sets under cardinality, market-cap and (optionally) style
//! constraints, then SPEA2 weights each set against return, risk, turnover
//! and position limits. A quarterly backtester drives both phases over
//! synthetic or user-supplied data.

pub mod backtest;
pub mod config;
pub mod data;
pub mod engine;
pub mod error;
pub mod phase1;
pub mod phase2;
pub mod portfolio;
pub mod synthetic;

pub use config::BacktestConfig;
pub use engine::{EaParams, ObjectiveVector};
pub use error::{Error, Result};
pub use phase1::Mandate;
pub use portfolio::{Candidate, ConstraintSet, Portfolio};
