use aftmean::distributions::SeedSpec;
use aftmean::gehan::{bootstrap_se, fit_aft, FitOptions};
use aftmean::simulation::{Engine, PredictionCovariate, ReplicateOutcome, Scenario, SecondCovariate};
use aftmean::{fit_cox, CoxOptions, DesignData, ObservedRecord};
use rand::Rng;

fn estimates(s: &Scenario) -> Vec<Vec<f64>> {
    Engine::default()
        .replicates(s)
        .unwrap()
        .into_iter()
        .filter_map(|r| match r.outcome {
            Ok(ReplicateOutcome::Estimation { estimate, .. }) => Some(estimate),
            _ => None,
        })
        .collect()
}

#[test]
fn summaries_do_not_depend_on_thread_count() {
    let est = Scenario::table1('c', SecondCovariate::Wide, 2.0, 80, 6, 99).unwrap();
    let pred = Scenario::table2(PredictionCovariate::Normal, Some(0.0), 80, 4, 99).unwrap();
    let (one, three) = (Engine::with_threads(1), Engine::with_threads(3));
    assert_eq!(one.run_estimation(&est).unwrap(), three.run_estimation(&est).unwrap());
    assert_eq!(one.run_prediction(&pred).unwrap(), three.run_prediction(&pred).unwrap());
    assert_eq!(one.replicates(&est).unwrap(), Engine::default().replicates(&est).unwrap());

    let mut a = Vec::new();
    let mut b = Vec::new();
    one.run_prediction(&pred).unwrap().write_csv(&mut a).unwrap();
    three.run_prediction(&pred).unwrap().write_csv(&mut b).unwrap();
    assert_eq!(a, b);
}

#[test]
fn slope_error_shrinks_with_sample_size() {
    let err = |n| {
        let s = Scenario::table1('a', SecondCovariate::Normal, 4.0, n, 40, 7).unwrap();
        let e = estimates(&s);
        e.iter().map(|v| (v[1] - 1.0).abs() + (v[2] - 1.0).abs()).sum::<f64>() / e.len() as f64
    };
    let (small, large) = (err(100), err(400));
    assert!(large < small, "n=100: {small}, n=400: {large}");
    // root-n rate predicts a halving
    assert!(large < 0.75 * small, "n=100: {small}, n=400: {large}");
}

#[test]
fn heavy_censoring_rate_of_scenario_b() {
    let s = Scenario::table1('b', SecondCovariate::Normal, 1.5, 2, 1, 0).unwrap();
    let mut rng = SeedSpec::new(5, 0).rng();
    let m = 200_000;
    let censored = (0..m).filter(|_| !s.laws.sample_subject(&mut rng).record.event).count();
    let rate = censored as f64 / m as f64;
    assert!((rate - 0.82).abs() < 0.015, "{rate}");
}

#[test]
fn cox_recovers_proportional_hazards_slope() {
    // T = X + e0 with e0 min-extreme-value is a Cox model with coefficient -1
    let s = Scenario::table2(PredictionCovariate::Normal, None, 2000, 1, 3).unwrap();
    let mut rng = SeedSpec::new(3, 0).rng();
    let records: Vec<ObservedRecord> = (0..s.n).map(|_| s.laws.sample_subject(&mut rng).record).collect();
    let data = DesignData::from_records(&records).unwrap();
    let fit = fit_cox(&data, &CoxOptions::default()).unwrap();
    assert!((fit.beta[0] + 1.0).abs() < 0.1, "{:?}", fit.beta);
}

#[test]
fn cox_error_does_not_grow_with_later_truncation() {
    let mut prev = f64::INFINITY;
    for tau in [Some(-2.0), Some(-1.0), Some(0.0), Some(1.0), None] {
        let s = Scenario::table2(PredictionCovariate::Normal, tau, 200, 40, 17).unwrap();
        let cox: Vec<f64> = Engine::default()
            .replicates(&s)
            .unwrap()
            .into_iter()
            .filter_map(|r| match r.outcome {
                Ok(ReplicateOutcome::Prediction { cox, .. }) => Some(cox),
                _ => None,
            })
            .collect();
        let mean = cox.iter().sum::<f64>() / cox.len() as f64;
        assert!(mean <= prev * 1.1, "tau {tau:?}: {mean} after {prev}");
        prev = mean;
    }
}

#[test]
fn bootstrap_with_two_resamples_matches_manual_refits() {
    let s = Scenario::table1('a', SecondCovariate::Wide, 4.0, 60, 1, 1).unwrap();
    let mut rng = SeedSpec::new(1, 0).rng();
    let records: Vec<ObservedRecord> = (0..s.n).map(|_| s.laws.sample_subject(&mut rng).record).collect();
    let data = DesignData::from_records(&records).unwrap();
    let opts = FitOptions::default();
    let se = bootstrap_se(&data, 2, 44, &opts).unwrap();

    let refit = |stream| {
        let mut rng = SeedSpec::new(44, stream).rng();
        let idx: Vec<usize> = (0..data.n()).map(|_| rng.random_range(0..data.n())).collect();
        let f = fit_aft(&data.select(&idx), &opts).unwrap();
        let mut v = vec![f.intercept];
        v.extend(f.slopes);
        v
    };
    let (a, b) = (refit(0), refit(1));
    for k in 0..3 {
        let expected = (a[k] - b[k]).abs() / 2f64.sqrt();
        assert!((se[k] - expected).abs() < 1e-12 * (1.0 + expected), "{k}: {} vs {expected}", se[k]);
    }
}

#[test]
fn bootstrap_on_duplicated_points_has_positive_spread() {
    let base = [(1.0, 0.0), (2.5, 1.0), (3.2, 2.0)];
    let mut y = Vec::new();
    let mut rows = Vec::new();
    for _ in 0..4 {
        for (t, x) in base {
            y.push(t);
            rows.push(vec![x]);
        }
    }
    let data = DesignData::new(y, vec![true; 12], rows).unwrap();
    let se = bootstrap_se(&data, 50, 9, &FitOptions::default()).unwrap();
    assert!(se.iter().all(|s| *s > 0.0 && s.is_finite()), "{se:?}");
    assert!(bootstrap_se(&data, 1, 9, &FitOptions::default()).is_err());
}

#[test]
fn tail_is_usually_adequate_under_moderate_censoring() {
    let s = Scenario::table1('a', SecondCovariate::Normal, 4.0, 400, 20, 23).unwrap();
    let t = Engine::default().run_estimation(&s).unwrap();
    assert!(t.tail_adequate_rate.unwrap() >= 0.9, "{t:?}");
}
