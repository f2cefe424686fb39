use moea_portfolio::data::{list_score_files, read_scores, PriceTable};
use moea_portfolio::synthetic::{cap_weighted_benchmark, generate_universe, simulate, SyntheticSpec};

fn spec(ic: f64, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        n_assets: 400,
        n_periods: 20,
        information_coefficient: ic,
        rng_seed: seed,
        ..SyntheticSpec::default()
    }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    for (k, &i) in idx.iter().enumerate() {
        r[i] = k as f64;
    }
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Mean over rebalance dates of the rank correlation between published
/// score and the following period's return.
fn mean_rank_ic(s: &SyntheticSpec) -> f64 {
    let m = simulate(s).unwrap();
    let offsets = s.rebalance_indices();
    let mut total = 0.0;
    for ((_, cands), &r) in m.snapshots.iter().zip(&offsets) {
        let scores: Vec<f64> = cands.iter().map(|c| c.score).collect();
        let fwd: Vec<f64> = cands
            .iter()
            .map(|c| {
                let i = m.asset_ids.iter().position(|a| *a == c.asset_id).unwrap();
                m.prices[i][r + s.rebalance_spacing] / m.prices[i][r] - 1.0
            })
            .collect();
        total += pearson(&ranks(&scores), &ranks(&fwd));
    }
    total / offsets.len() as f64
}

#[test]
fn generation_is_byte_identical() {
    let s = SyntheticSpec { n_assets: 50, n_periods: 2, rng_seed: 4, ..SyntheticSpec::default() };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = generate_universe(&s, a.path()).unwrap();
    let fb = generate_universe(&s, b.path()).unwrap();
    assert_eq!(std::fs::read(&fa.price_file).unwrap(), std::fs::read(&fb.price_file).unwrap());
    for ((_, x), (_, y)) in fa.score_files.iter().zip(&fb.score_files) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
    }
    let c = tempfile::tempdir().unwrap();
    let fc = generate_universe(&SyntheticSpec { rng_seed: 5, ..s }, c.path()).unwrap();
    assert_ne!(std::fs::read(&fa.price_file).unwrap(), std::fs::read(&fc.price_file).unwrap());
}

#[test]
fn cross_sectional_drift_matches_within_three_standard_errors() {
    let s = spec(0.0, 21);
    let m = simulate(&s).unwrap();
    let days = m.calendar.len();
    let avg: Vec<f64> = (1..days)
        .map(|t| m.prices.iter().map(|p| p[t] / p[t - 1] - 1.0).sum::<f64>() / m.prices.len() as f64)
        .collect();
    let n = avg.len() as f64;
    let mean = avg.iter().sum::<f64>() / n;
    let sd = (avg.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    assert!((mean - s.daily_drift).abs() < 3.0 * sd / n.sqrt(), "mean {mean} sd {sd}");
}

#[test]
fn zero_information_coefficient_gives_no_rank_correlation() {
    let ic = mean_rank_ic(&spec(0.0, 3));
    // 20 dates of 400 names: standard error about 0.011
    assert!(ic.abs() < 0.035, "{ic}");
}

#[test]
fn rank_correlation_increases_with_information_coefficient() {
    let values: Vec<f64> = [0.0, 0.05, 0.2].iter().map(|&ic| mean_rank_ic(&spec(ic, 11))).collect();
    assert!(values[0] < values[1] && values[1] < values[2], "{values:?}");
    assert!((values[2] - 0.2).abs() < 0.06, "{values:?}");
}

#[test]
fn files_round_trip_through_loaders() {
    let s = SyntheticSpec { n_assets: 30, n_periods: 2, rng_seed: 8, ..SyntheticSpec::default() };
    let m = simulate(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = generate_universe(&s, dir.path()).unwrap();
    let listed = list_score_files(dir.path()).unwrap();
    assert_eq!(listed, files.score_files);

    let table = PriceTable::load(&files.price_file).unwrap();
    assert_eq!(table.calendar(), m.calendar.as_slice());
    for (i, id) in m.asset_ids.iter().enumerate() {
        let series = table.series(id).unwrap();
        assert!(series.iter().zip(&m.prices[i]).all(|(a, b)| *a == Some(*b)));
    }
    for ((d, path), (sd, cands)) in files.score_files.iter().zip(&m.snapshots) {
        assert_eq!(d, sd);
        assert_eq!(&read_scores(path).unwrap(), cands);
    }
}

#[test]
fn benchmark_matches_a_plain_loop() {
    let s = SyntheticSpec { n_assets: 10, n_periods: 3, rng_seed: 13, ..SyntheticSpec::default() };
    let m = simulate(&s).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let files = generate_universe(&s, dir.path()).unwrap();
    let bench = cap_weighted_benchmark(&files.price_file, &files.score_files, 63).unwrap();
    for ((period, (_, cands)), &r) in bench.iter().zip(&m.snapshots).zip(&s.rebalance_indices()) {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in cands {
            let i = m.asset_ids.iter().position(|a| *a == c.asset_id).unwrap();
            num += c.market_cap * (m.prices[i][r + 63] / m.prices[i][r] - 1.0);
            den += c.market_cap;
        }
        assert!((period.period_return - num / den).abs() < 1e-12);
    }
}
