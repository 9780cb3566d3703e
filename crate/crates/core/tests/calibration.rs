mod common;

use chrono::NaiveDate;
use proptest::prelude::*;
use qvar_core::calibration::*;
use qvar_core::model::implied_correlation;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform_sample(n: usize, seed: u64) -> ReturnSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ReturnSeries::new((0..n).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn subjective() -> ParamOverrides {
    let t = common::table_raw();
    ParamOverrides {
        r: Some(t.r),
        beta: Some(t.beta),
        gamma: Some(t.gamma),
        alpha: Some(t.alpha),
        epsilon: Some(t.epsilon),
        psi: Some(t.psi),
        psi0: Some(t.psi0),
        horizon: Some(t.horizon),
        ..ParamOverrides::default()
    }
}

#[test]
fn uniform_densities_are_near_one() {
    let returns = uniform_sample(100_000, 7);
    let (params, report) =
        calibrate_with_report(&returns, &subjective(), &CalibrationOptions::default()).unwrap();
    assert!((params.f1() - 1.0).abs() < 0.05, "f1 = {}", params.f1());
    assert!((params.f2() - 1.0).abs() < 0.05, "f2 = {}", params.f2());
    assert!((report.quantile_p1 - 0.05).abs() < 0.01);
    assert!((report.quantile_p2 - 0.5).abs() < 0.01);
    assert_eq!(report.rho, implied_correlation(&params));
}

#[test]
fn pinned_table_is_echoed() {
    let returns = uniform_sample(500, 3);
    let pinned = ParamOverrides::from_params(&common::table());
    let p = calibrate(&returns, &pinned).unwrap();
    assert_eq!(p.q05(), 0.00077);
    assert_eq!(p.f1(), 47.63579);
    assert_eq!(p.f2(), 68.43975);
    assert_eq!(p.b2(), 0.00599);
    assert_eq!(p.alpha(), 10.0);
    assert_eq!(p.epsilon(), 0.00001);
    // twice gives the same record
    assert_eq!(calibrate(&returns, &pinned).unwrap(), p);
}

#[test]
fn matched_quantiles_give_zero_drift() {
    // symmetric sample; the drift estimate shrinks as p1 approaches p2
    let values: Vec<f64> = (-500..=500).map(|i| i as f64 * 1e-3).collect();
    let returns = ReturnSeries::new(values).unwrap();
    let mut last = f64::INFINITY;
    for delta in [0.2, 0.1, 0.01, 0.001] {
        let xi1 = sample_quantile(&returns, 0.5 - delta).unwrap();
        let xi2 = sample_quantile(&returns, 0.5).unwrap();
        let b2 = xi2 - xi1;
        assert!(b2 >= 0.0 && b2 < last);
        last = b2;
    }
    assert_eq!(last, 0.001);
    let same = sample_quantile(&returns, 0.5).unwrap() - sample_quantile(&returns, 0.5).unwrap();
    assert_eq!(same, 0.0);
}

#[test]
fn missing_subjective_parameters() {
    let returns = uniform_sample(200, 1);
    match calibrate(&returns, &ParamOverrides::default()) {
        Err(CalibrationError::MissingParameters(names)) => {
            for n in ["r", "beta", "gamma", "alpha", "epsilon", "psi", "psi0", "T"] {
                assert!(names.contains(&n), "{n} not reported");
            }
            assert!(!names.contains(&"f1"));
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn centering_is_recorded() {
    let returns = uniform_sample(1000, 11);
    let c = returns.centered(0.25);
    assert_eq!(c.shift(), 0.25);
    for (a, b) in c.raw_values().iter().zip(returns.values()) {
        assert!((a - b).abs() < 1e-15);
    }
    let raw = calibrate(&returns, &subjective()).unwrap();
    let centered = calibrate(&c, &subjective()).unwrap();
    // q05 refers to raw returns; the drift does not depend on the shift
    assert!((raw.q05() - centered.q05()).abs() < 1e-12);
    assert!((raw.b2() - centered.b2()).abs() < 1e-12);
}

#[test]
fn price_series_validation() {
    let d = |i: u32| NaiveDate::from_ymd_opt(2020, 1, i).unwrap();
    assert!(matches!(
        PriceSeries::new(vec![(d(1), 1.0)]),
        Err(CalibrationError::InsufficientData { .. })
    ));
    assert!(matches!(
        PriceSeries::new(vec![(d(1), 1.0), (d(2), 0.0)]),
        Err(CalibrationError::NonPositivePrice { .. })
    ));
    assert!(matches!(
        PriceSeries::new(vec![(d(1), 1.0), (d(1), 2.0)]),
        Err(CalibrationError::DuplicateDate(_))
    ));
    // unsorted input is ordered by date
    let s = PriceSeries::new(vec![(d(3), 3.0), (d(1), 1.0), (d(2), 2.0)]).unwrap();
    assert_eq!(s.prices(), [1.0, 2.0, 3.0]);
    assert_eq!(compute_returns(&s).values(), [1.0, 0.5]);
}

#[test]
fn degenerate_sample_has_no_bandwidth() {
    let flat = ReturnSeries::new(vec![0.01; 50]).unwrap();
    assert!(matches!(
        silverman_bandwidth(&flat),
        Err(CalibrationError::DegenerateSample)
    ));
}

fn sample() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 1..1000)
}

proptest! {
    #[test]
    fn quantile_matches_sort_oracle(values in sample(), k in 1usize..100) {
        let p = k as f64 / 100.0;
        let returns = ReturnSeries::new(values.clone()).unwrap();
        prop_assert_eq!(sample_quantile(&returns, p).unwrap(), common::sorted_quantile(&values, p));
    }

    #[test]
    fn quantile_is_monotone(values in sample(), a in 0.001f64..0.999, b in 0.001f64..0.999) {
        let returns = ReturnSeries::new(values).unwrap();
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(sample_quantile(&returns, lo).unwrap() <= sample_quantile(&returns, hi).unwrap());
    }

    #[test]
    fn kde_is_a_density(values in prop::collection::vec(-0.05f64..0.05, 2..300)) {
        let returns = ReturnSeries::new(values.clone()).unwrap();
        let Ok(kde) = DensityEstimate::silverman(&returns) else {
            // every value identical
            prop_assume!(false);
            unreachable!()
        };
        let h = kde.bandwidth();
        prop_assert!(h > 0.0);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min) - 10.0 * h;
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 10.0 * h;
        let panels = (((hi - lo) / h) * 20.0).ceil() as usize * 2;
        let mass = common::simpson(|x| kde_density(&kde, x), lo, hi, panels);
        prop_assert!((mass - 1.0).abs() < 1e-3, "mass {}", mass);
        for x in [lo - 1.0, lo, 0.0, hi, hi + 1.0] {
            prop_assert!(kde_density(&kde, x) >= 0.0);
        }
    }

    #[test]
    fn returns_reconstruct_prices(steps in prop::collection::vec(-0.2f64..0.2, 1..500), p0 in 0.1f64..1000.0) {
        let mut prices = vec![p0];
        for s in &steps {
            let last = *prices.last().unwrap();
            prices.push(last * (1.0 + s));
        }
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let rows = prices.iter().enumerate()
            .map(|(i, &p)| (start + chrono::Days::new(i as u64), p))
            .collect();
        let series = PriceSeries::new(rows).unwrap();
        let returns = compute_returns(&series);
        prop_assert_eq!(returns.len(), prices.len() - 1);
        let mut rebuilt = p0;
        for (r, expected) in returns.values().iter().zip(&prices[1..]) {
            rebuilt *= 1.0 + r;
            prop_assert!(common::rel_err(rebuilt, *expected) < 1e-12);
        }
    }
}
