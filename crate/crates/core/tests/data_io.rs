use std::path::Path;

use chrono::{Days, NaiveDate};
use moea_portfolio::data::*;
use moea_portfolio::portfolio::Candidate;
use moea_portfolio::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn day0() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 1, 1).unwrap()
}

fn calendar(n: usize) -> Vec<NaiveDate> {
    (0..n).map(|i| day0().checked_add_days(Days::new(i as u64)).unwrap()).collect()
}

fn cand(id: &str, score: f64, cap: f64, bp: f64) -> Candidate {
    Candidate {
        asset_id: id.into(),
        score,
        market_cap: cap,
        book_to_price: bp,
    }
}

/// Random-walk prices for `ids` over `days` calendar days.
fn price_table(ids: &[String], days: usize, seed: u64) -> PriceTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let series = ids
        .iter()
        .map(|id| {
            let mut p = 100.0;
            let s = (0..days)
                .map(|_| {
                    p *= 1.0 + rng.random_range(-0.02..0.02);
                    Some(p)
                })
                .collect();
            (id.clone(), s)
        })
        .collect();
    PriceTable::from_series(calendar(days), series).unwrap()
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("A{i:03}")).collect()
}

fn snapshot_of(n: usize) -> UniverseSnapshot {
    let ids = ids(n);
    let prices = price_table(&ids, 400, 1);
    let cands = ids.iter().map(|id| cand(id, 50.0, 1e9, 0.5)).collect();
    UniverseSnapshot::build(cands, &prices, calendar(400)[300], WindowSpec::default()).unwrap()
}

fn write_fixture(dir: &Path, n: usize, short_asset: Option<usize>) -> (std::path::PathBuf, std::path::PathBuf) {
    let ids = ids(n);
    let days = 400;
    let cal = calendar(days);
    let table = price_table(&ids, days, 2);
    let series: Vec<(String, Vec<Option<f64>>)> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let mut s = table.series(id).unwrap().to_vec();
            if Some(i) == short_asset {
                // only the last 100 days of history
                for p in s.iter_mut().take(days - 100) {
                    *p = None;
                }
            }
            (id.clone(), s)
        })
        .collect();
    let price_path = dir.join("prices.csv");
    write_prices(&price_path, &cal, &series).unwrap();
    let score_path = dir.join(score_file_name(cal[300]));
    let cands: Vec<Candidate> = ids.iter().map(|id| cand(id, 60.0, 2e9, 0.4)).collect();
    write_scores(&score_path, &cands).unwrap();
    (score_path, price_path)
}

#[test]
fn load_well_formed_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (scores, prices) = write_fixture(dir.path(), 10, None);
    assert_eq!(score_file_date(&scores), Some(calendar(400)[300]));
    let snap = load_universe(&scores, &prices, calendar(400)[300]).unwrap();
    assert_eq!(snap.candidates.len(), 10);
    assert!(snap.excluded.is_empty());
    assert_eq!(snap.forward_prices("A000").unwrap().len(), 64);
}

#[test]
fn short_history_asset_is_excluded_and_logged() {
    let dir = tempfile::tempdir().unwrap();
    let (scores, prices) = write_fixture(dir.path(), 10, Some(3));
    let snap = load_universe(&scores, &prices, calendar(400)[300]).unwrap();
    assert_eq!(snap.candidates.len(), 9);
    assert_eq!(snap.excluded.len(), 1);
    assert_eq!(snap.excluded[0].asset_id, "A003");
}

#[test]
fn duplicate_asset_id_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores_2020-01-01.csv");
    std::fs::write(&path, "asset_id,score,market_cap_usd,book_to_price\nX,50,1e9,0.5\nY,40,1e9,0.5\nX,30,1e9,0.5\n").unwrap();
    match read_scores(&path).unwrap_err() {
        Error::Parse { line, message, .. } => {
            assert_eq!(line, 4);
            assert!(message.contains('X'), "{message}");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn malformed_row_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores_2020-01-01.csv");
    std::fs::write(&path, "asset_id,score,market_cap_usd,book_to_price\nX,50,1e9,0.5\nY,abc,1e9,0.5\n").unwrap();
    assert!(matches!(read_scores(&path).unwrap_err(), Error::Parse { line: 3, .. }));
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(read_scores(Path::new("/nonexistent/scores.csv")), Err(Error::Io { .. })));
}

#[test]
fn score_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scores_2021-03-31.csv");
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cands: Vec<Candidate> = (0..50)
        .map(|i| cand(&format!("S{i}"), rng.random_range(0.0..100.0), rng.random_range(1e8..1e12), rng.random_range(0.05..3.0)))
        .collect();
    write_scores(&path, &cands).unwrap();
    assert_eq!(read_scores(&path).unwrap(), cands);
}

fn with_candidates(cands: Vec<Candidate>) -> UniverseSnapshot {
    let ids: Vec<String> = cands.iter().map(|c| c.asset_id.clone()).collect();
    let prices = price_table(&ids, 400, 3);
    UniverseSnapshot::build(cands, &prices, calendar(400)[300], WindowSpec::default()).unwrap()
}

#[test]
fn score_floor_is_inclusive() {
    let snap = with_candidates(vec![
        cand("a", 19.0, 5e9, 0.5),
        cand("b", 20.0, 5e9, 0.5),
        cand("c", 21.0, 5e9, 0.5),
    ]);
    let f = filter_universe(&snap, 20.0, 0.12, 750e6).unwrap();
    let kept: Vec<&str> = f.candidates.iter().map(|c| c.asset_id.as_str()).collect();
    assert_eq!(kept, vec!["b", "c"]);
}

#[test]
fn bottom_twelve_percent_removed_when_cutoff_below_floor() {
    let cands = (1..=100).map(|i| cand(&format!("S{i:03}"), 50.0, i as f64 * 1e6, 0.5)).collect();
    let f = filter_universe(&with_candidates(cands), 20.0, 0.12, 750e6).unwrap();
    assert_eq!(f.candidates.len(), 88);
    assert!(f.candidates.iter().all(|c| c.market_cap >= 13e6));
}

#[test]
fn floor_replaces_percentile_for_large_caps() {
    let cands = (1..=100).map(|i| cand(&format!("S{i:03}"), 50.0, 1e9 + i as f64 * 1e7, 0.5)).collect();
    let f = filter_universe(&with_candidates(cands), 20.0, 0.12, 750e6).unwrap();
    assert_eq!(f.candidates.len(), 100);
}

#[test]
fn everything_filtered_is_an_error() {
    let snap = with_candidates(vec![cand("a", 5.0, 5e9, 0.5)]);
    assert!(matches!(filter_universe(&snap, 20.0, 0.12, 750e6), Err(Error::EmptyUniverse(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn filter_is_subset_and_idempotent_when_floor_binds(
        seed in any::<u64>(),
        n in 9usize..60,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // one sub-floor name, the rest large: after one pass the cutoff sits above the floor
        let cands: Vec<Candidate> = (0..n)
            .map(|i| {
                let cap = if i == 0 { rng.random_range(1e8..7e8) } else { rng.random_range(1e9..1e11) };
                cand(&format!("S{i:03}"), rng.random_range(0.0..100.0), cap, 0.5)
            })
            .collect();
        let snap = with_candidates(cands);
        if let Ok(once) = filter_universe(&snap, 20.0, 0.12, 750e6) {
            let ids: Vec<&str> = snap.candidates.iter().map(|c| c.asset_id.as_str()).collect();
            prop_assert!(once.candidates.iter().all(|c| ids.contains(&c.asset_id.as_str())));
            let twice = filter_universe(&once, 20.0, 0.12, 750e6).unwrap();
            prop_assert_eq!(once.candidates, twice.candidates);
        }
    }
}

#[test]
fn returns_window_length_follows_asset_count() {
    let w = WindowSpec::default();
    assert_eq!(w.returns_window(100), 126);
    assert_eq!(w.returns_window(200), 201);
    assert_eq!(w.returns_window(286), 287);

    let snap = snapshot_of(286);
    let as_of = snap.as_of;
    for n in [100usize, 200, 286] {
        let m = build_returns_matrix(&snap, &ids(n), as_of).unwrap();
        assert_eq!(m.len(), w.returns_window(n));
        assert!(m.len() > n);
        assert_eq!(m.observations[0].len(), n);
        assert_eq!(m.window.1, snap.trade_date());
    }
    assert!(build_returns_matrix(&snap, &ids(287)[..], as_of).is_err());
}

#[test]
fn returns_are_simple_returns() {
    let snap = snapshot_of(3);
    let m = build_returns_matrix(&snap, &ids(1), snap.as_of).unwrap();
    let p = &snap.price_history["A000"];
    let end = snap.as_of_offset();
    assert_eq!(*m.observations.last().unwrap(), vec![p[end] / p[end - 1] - 1.0]);
}

#[test]
fn unknown_asset_is_a_data_error() {
    let snap = snapshot_of(3);
    let err = build_returns_matrix(&snap, &["ZZZ".to_string()], snap.as_of).unwrap_err();
    assert!(matches!(err, Error::InsufficientHistory { ref asset, .. } if asset == "ZZZ"));
}

fn matrix(rows: Vec<Vec<f64>>) -> ReturnsMatrix {
    let n = rows[0].len();
    ReturnsMatrix {
        asset_ids: ids(n),
        observations: rows,
        window: (day0(), day0()),
    }
}

#[test]
fn constant_series_has_zero_variance() {
    let s = compute_statistics(&matrix((0..10).map(|i| vec![0.01, i as f64 * 0.001]).collect())).unwrap();
    assert_eq!(s.covariance.get(0, 0), 0.0);
    assert_eq!(s.covariance.get(0, 1), 0.0);
    assert!(s.covariance.get(1, 1) > 0.0);
}

#[test]
fn perfectly_correlated_covariance_is_product_of_sds() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rows = (0..50)
        .map(|_| {
            let x: f64 = rng.random_range(-0.02..0.02);
            vec![x, 3.0 * x + 0.001]
        })
        .collect();
    let s = compute_statistics(&matrix(rows)).unwrap();
    let sd0 = s.covariance.get(0, 0).sqrt();
    let sd1 = s.covariance.get(1, 1).sqrt();
    assert!((s.covariance.get(0, 1) - sd0 * sd1).abs() < 1e-15);
}

#[test]
fn statistics_match_two_pass_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..200).map(|_| (0..5).map(|_| rng.random_range(-0.03..0.03)).collect()).collect();
    let s = compute_statistics(&matrix(rows.clone())).unwrap();
    assert!(s.covariance.is_symmetric());
    let t = rows.len() as f64;
    for i in 0..5 {
        let mi: f64 = rows.iter().map(|r| r[i]).sum::<f64>() / t;
        assert!((s.mean_returns[i] - mi).abs() < 1e-12);
        for j in 0..5 {
            let mj: f64 = rows.iter().map(|r| r[j]).sum::<f64>() / t;
            let c: f64 = rows.iter().map(|r| (r[i] - mi) * (r[j] - mj)).sum::<f64>() / (t - 1.0);
            assert!((s.covariance.get(i, j) - c).abs() < 1e-12);
        }
    }
}

#[test]
fn universe_targets_are_unweighted_means() {
    let snap = with_candidates(vec![cand("a", 50.0, 10e9, 0.2), cand("b", 50.0, 20e9, 0.6)]);
    let (cap, bp) = universe_targets(&snap);
    assert_eq!(cap, 15e9);
    assert!((bp - 0.4).abs() < 1e-15);

    let single = with_candidates(vec![cand("a", 50.0, 7e9, 0.3)]);
    assert_eq!(universe_targets(&single), (7e9, 0.3));

    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let cands: Vec<Candidate> = (0..100)
        .map(|i| cand(&format!("S{i}"), 50.0, rng.random_range(1e9..1e11), rng.random_range(0.1..2.0)))
        .collect();
    let mut cap_sum = 0.0;
    let mut bp_sum = 0.0;
    for c in &cands {
        cap_sum += c.market_cap;
        bp_sum += c.book_to_price;
    }
    let (cap, bp) = universe_targets(&with_candidates(cands));
    assert!((cap - cap_sum / 100.0).abs() < 1e-6);
    assert!((bp - bp_sum / 100.0).abs() < 1e-12);
}

#[test]
fn risk_free_nearest_date() {
    let d = |m, day| NaiveDate::from_ymd_opt(2020, m, day).unwrap();
    let rates = vec![(d(1, 1), 0.1), (d(1, 11), 0.2)];
    assert_eq!(nearest_rate(&rates, d(1, 1)), Some(0.1));
    assert_eq!(nearest_rate(&rates, d(1, 8)), Some(0.2));
    assert_eq!(nearest_rate(&rates, d(1, 6)), Some(0.1));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rf.csv");
    write_risk_free(&path, &rates).unwrap();
    assert_eq!(load_risk_free(&path, d(1, 10)).unwrap(), 0.2);

    std::fs::write(&path, "date,daily_rate\n").unwrap();
    assert!(matches!(load_risk_free(&path, d(1, 10)), Err(Error::Io { .. })));
}

#[test]
fn short_gaps_are_forward_filled_long_gaps_exclude() {
    let ids = ids(2);
    let days = 400;
    let mut table: Vec<(String, Vec<Option<f64>>)> = ids.iter().map(|id| (id.clone(), vec![Some(10.0); days])).collect();
    for t in 200..205 {
        table[0].1[t] = None; // 5-day gap: filled
    }
    for t in 200..206 {
        table[1].1[t] = None; // 6-day gap: excluded
    }
    let prices = PriceTable::from_series(calendar(days), table).unwrap();
    let cands = ids.iter().map(|id| cand(id, 50.0, 1e9, 0.5)).collect();
    let snap = UniverseSnapshot::build(cands, &prices, calendar(days)[300], WindowSpec::default()).unwrap();
    assert_eq!(snap.candidates.len(), 1);
    assert_eq!(snap.candidates[0].asset_id, "A000");
}
