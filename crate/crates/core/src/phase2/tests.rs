use super::*;
use crate::engine::dominates;
use crate::portfolio::Covariance;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("A{i:03}")).collect()
}

/// Independent assets with the given daily means and volatilities, plus a
/// common factor so the covariance is not diagonal.
fn stats(means: &[f64], vols: &[f64]) -> ReturnStatistics {
    let n = means.len();
    let factor = 0.004;
    let rows = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { vols[i] * vols[i] + factor * factor } else { factor * factor * 0.5 })
                .collect()
        })
        .collect();
    ReturnStatistics {
        asset_ids: ids(n),
        mean_returns: means.to_vec(),
        covariance: Covariance::from_rows(rows).unwrap(),
        observation_count: 287,
    }
}

fn random_stats(n: usize, seed: u64) -> ReturnStatistics {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.001)).collect();
    let vols: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.03)).collect();
    stats(&means, &vols)
}

fn equal(ids: &[String]) -> Portfolio {
    Portfolio::new(ids.iter().map(|a| (a.clone(), 1.0 / ids.len() as f64)))
}

fn problem(n: usize, s: &ReturnStatistics, previous: Portfolio) -> WeightingProblem {
    WeightingProblem::new(&ids(n), s, previous, ConstraintSet::default(), 0.0, RepairStrategy::LedgerSparse).unwrap()
}

#[test]
fn same_weights_as_previous_have_zero_turnover() {
    let s = random_stats(40, 1);
    let prev = equal(&ids(40));
    let p = problem(40, &s, prev.clone());
    let w = prev.aligned(p.asset_ids());
    assert_eq!(evaluate_weighting(&w, &p).unwrap()[2], 0.0);
}

#[test]
fn objectives_match_recomputation() {
    let s = random_stats(30, 2);
    let prev = equal(&ids(40)[10..]);
    let p = problem(30, &s, prev.clone());
    let w = vec![1.0 / 30.0; 30];
    let o = evaluate_weighting(&w, &p).unwrap();

    let mut mean = 0.0;
    let mut var = 0.0;
    for i in 0..30 {
        mean += w[i] * s.mean_returns[i];
        for j in 0..30 {
            var += w[i] * w[j] * s.covariance.get(i, j);
        }
    }
    let proposed = p.portfolio(&w);
    assert!((o[0] + mean).abs() < 1e-15);
    assert!((o[1] - var).abs() < 1e-15);
    assert!((o[2] - crate::portfolio::turnover(&prev, &proposed)).abs() < 1e-12);
    assert_eq!(o[3], 0.0);
}

#[test]
fn dominance_follows_return() {
    let s = random_stats(30, 3);
    let p = problem(30, &s, Portfolio::empty());
    let w = vec![1.0 / 30.0; 30];
    let a = evaluate_weighting(&w, &p).unwrap();
    let mut better = a.values().to_vec();
    better[0] -= 1e-4;
    assert!(dominates(&ObjectiveVector::new(better), &a).unwrap());
}

#[test]
fn failed_repair_is_penalized() {
    let s = random_stats(10, 4);
    let p = problem(10, &s, Portfolio::empty());
    let e = p.evaluate(&WeightGenome(vec![1.0; 10]));
    assert!(e.violation > 1.0);
    assert_eq!(e.objectives[3], e.violation);
}

fn dominant_stats(n: usize) -> ReturnStatistics {
    let mut means = vec![0.0002; n];
    let mut vols = vec![0.02; n];
    means[7] = 0.002;
    vols[7] = 0.005;
    stats(&means, &vols)
}

#[test]
fn dominant_asset_gets_max_weight() {
    for n in [25, 40] {
        let s = dominant_stats(n);
        let p = problem(n, &s, Portfolio::empty());
        let r = run_phase2(&p, &EaParams::new(60, 150, 0.02).with_seed(5)).unwrap();
        let w = r.best_sharpe.weight(&ids(n)[7]);
        assert!((w - 0.04).abs() < 1e-9, "n={n}: {w}");
    }
}

#[test]
fn phase2_is_deterministic_and_archive_nondominated() {
    let s = random_stats(40, 6);
    let p = problem(40, &s, equal(&ids(40)));
    let params = EaParams::new(30, 40, 0.02).with_seed(11);
    let a = run_phase2(&p, &params).unwrap();
    let b = run_phase2(&p, &params).unwrap();
    assert_eq!(a.archive, b.archive);
    assert_eq!(a.best_index, b.best_index);
    for (i, x) in a.archive.iter().enumerate() {
        for (j, y) in a.archive.iter().enumerate() {
            if i != j {
                assert!(!x.objectives.dominates(&y.objectives));
            }
        }
        assert!((x.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(x.weights.iter().all(|&w| w == 0.0 || (0.0035..=0.04).contains(&w)));
    }
}

#[test]
fn previous_winner_is_seeded() {
    let s = random_stats(40, 7);
    let prev = equal(&ids(40));
    let p = problem(40, &s, prev);
    let r = run_phase2(&p, &EaParams::new(20, 5, 0.02).with_seed(1)).unwrap();
    // the seed has zero turnover and is feasible, so the archive's turnover minimum is zero
    let min_turnover = r.archive.iter().map(|m| m.objectives[2]).fold(f64::MAX, f64::min);
    assert!(min_turnover < 1e-12, "{min_turnover}");
}

#[test]
fn all_failed_repairs_are_phase2_infeasible() {
    let s = random_stats(10, 8);
    let p = problem(10, &s, Portfolio::empty());
    let err = run_phase2(&p, &EaParams::new(10, 3, 0.02)).unwrap_err();
    assert!(matches!(err, Error::Phase2Infeasible(_)));
}

/// Previous winner holds assets 0..30, the best-Sharpe portfolio 9..39:
/// one-way turnover 9/30 = 0.30 against a 0.24 budget.
fn turnover_fixture() -> (ReturnStatistics, Portfolio, Portfolio) {
    let n = 60;
    let mut means = vec![0.0003; n];
    for m in means.iter_mut().skip(30).take(9) {
        *m = 0.0008;
    }
    let s = stats(&means, &vec![0.015; n]);
    let all = ids(n);
    (s, equal(&all[..30]), equal(&all[9..39]))
}

#[test]
fn turnover_repair_meets_budget() {
    let (s, prev, best) = turnover_fixture();
    let cand: Vec<String> = best.holdings.keys().cloned().collect();
    let p = WeightingProblem::new(&cand, &s, prev.clone(), ConstraintSet::default(), 0.0, RepairStrategy::LedgerSparse).unwrap();
    assert!((p.turnover_of(&best.aligned(p.asset_ids())) - 0.30).abs() < 1e-12);

    let lookup = |a: &[String]| s.subset(a);
    let out = repair_turnover(&best, &p, &lookup, &EaParams::new(30, 40, 0.02).with_seed(3)).unwrap();
    let TurnoverRepair::Repaired(r) = out else { panic!("expected a repair, got {out:?}") };
    let t = crate::portfolio::turnover(&prev, &r);
    assert!(t <= 0.24 + 1e-12, "{t}");
    assert!(r.holdings.values().all(|&w| (0.0035..=0.04).contains(&w)));
    assert!((r.total_weight() - 1.0).abs() < 1e-9);

    let prev_ids: Vec<String> = prev.holdings.keys().cloned().collect();
    let pp = WeightingProblem::new(&prev_ids, &s, prev.clone(), ConstraintSet::default(), 0.0, RepairStrategy::LedgerSparse).unwrap();
    let prev_sharpe = pp.sharpe(&prev.aligned(pp.asset_ids()));
    assert!(r.diagnostics.sharpe.unwrap() >= prev_sharpe - 1e-12);
}

#[test]
fn feasible_input_is_returned_unchanged() {
    let (s, prev, _) = turnover_fixture();
    let cand: Vec<String> = prev.holdings.keys().cloned().collect();
    let p = WeightingProblem::new(&cand, &s, prev.clone(), ConstraintSet::default(), 0.0, RepairStrategy::LedgerSparse).unwrap();
    let lookup = |a: &[String]| s.subset(a);
    let out = repair_turnover(&prev, &p, &lookup, &EaParams::new(10, 2, 0.02)).unwrap();
    assert_eq!(out, TurnoverRepair::Unchanged);
}

#[test]
fn weight_candidates_picks_a_winner() {
    let s = random_stats(80, 9);
    let all = ids(80);
    let universe: Vec<Candidate> = all
        .iter()
        .map(|a| Candidate {
            asset_id: a.clone(),
            score: 50.0,
            market_cap: 1e10,
            book_to_price: 0.5,
        })
        .collect();
    let constraints = ConstraintSet {
        market_cap_target: 5e9,
        ..ConstraintSet::default()
    };
    let lookup = |a: &[String]| s.subset(a);
    let previous = Portfolio::empty();
    let ctx = Phase2Context {
        stats: &lookup,
        previous: &previous,
        constraints: &constraints,
        risk_free: 0.0,
        universe: &universe,
    };
    let config = Phase2Config {
        params: EaParams::new(20, 20, 0.02),
        ..Phase2Config::default()
    };
    let sets = vec![all[..40].to_vec(), all[30..].to_vec(), all[..10].to_vec()];
    let a = weight_candidates(&sets, &ctx, &config, 42).unwrap();
    let b = weight_candidates(&sets, &ctx, &config, 42).unwrap();
    assert_eq!(a.failed, vec![2]);
    assert_eq!(a.results.len(), 2);
    assert!(a.winner().passes());
    assert_eq!(a.winner().portfolio, b.winner().portfolio);

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("winner.csv");
    let json = dir.path().join("winner.json");
    write_winner(&csv, &json, a.winner()).unwrap();
    let back = read_portfolio(&csv).unwrap();
    assert_eq!(back.holdings, a.winner().portfolio.holdings);
    let diag: WinnerDiagnostics = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(diag.candidate_index, a.winner().index);
}
