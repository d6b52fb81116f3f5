mod common;

use common::{brute_force_c_index, direct_ibs, rng};
use rand::Rng;
use survstrat::metrics::{
    censoring_km, concordance_index, integrated_brier_score, integrated_brier_score_with, kaplan_meier,
    log_rank_test, TimeGrid,
};
use survstrat::tensor::Tensor;

#[test]
fn concordance_equals_pair_enumeration() {
    for s in 0..100 {
        let mut r = rng(s);
        let n = r.random_range(2..=50);
        // coarse values force ties in both times and risks
        let times: Vec<f64> = (0..n).map(|_| r.random_range(1..20) as f64).collect();
        let events: Vec<bool> = (0..n).map(|_| r.random_bool(0.5)).collect();
        let risk: Vec<f64> = (0..n).map(|_| r.random_range(0..10) as f64 / 3.0).collect();
        match brute_force_c_index(&risk, &times, &events) {
            Some(want) => assert_eq!(concordance_index(&risk, &times, &events).unwrap(), want, "instance {s}"),
            None => assert!(concordance_index(&risk, &times, &events).is_err()),
        }
    }
}

#[test]
fn ibs_equals_direct_summation() {
    for s in 0..20 {
        let mut r = rng(1000 + s);
        let n = r.random_range(5..=30);
        let times: Vec<f64> = (0..n).map(|_| r.random_range(0.5..10.0)).collect();
        let events: Vec<bool> = (0..n).map(|_| r.random_bool(0.6)).collect();
        let rates: Vec<f64> = (0..n).map(|_| r.random_range(0.05..0.5)).collect();
        let predict = |i: usize, t: f64| (-rates[i] * t).exp();
        let max = times.iter().cloned().fold(0.0, f64::max);
        let horizon = 0.9 * max;
        let km = censoring_km(&times, &events);
        let got = integrated_brier_score_with(&predict, &times, &events, &km, horizon).unwrap();
        let want = direct_ibs(&predict, &times, &events, horizon);
        assert!((got - want).abs() < 1e-10, "instance {s}: {got} vs {want}");
    }
}

#[test]
fn grid_curves_match_direct_summation() {
    let mut r = rng(7);
    let n = 25;
    let times: Vec<f64> = (0..n).map(|_| r.random_range(0.5..10.0)).collect();
    let events: Vec<bool> = (0..n).map(|_| r.random_bool(0.7)).collect();
    let grid = TimeGrid::new(vec![2.0, 4.0, 6.0, 8.0]).unwrap();
    let mut surv = Tensor::zeros(n, 4);
    for i in 0..n {
        let mut s = 1.0;
        for t in 0..4 {
            s *= r.random_range(0.6..1.0);
            surv.set(i, t, s);
        }
    }
    let km = censoring_km(&times, &events);
    let got = integrated_brier_score(&surv, &grid, &times, &events, &km).unwrap();
    // independent piecewise-linear interpolation
    let predict = |i: usize, t: f64| {
        let knots = [0.0, 2.0, 4.0, 6.0, 8.0];
        let vals = [1.0, surv.get(i, 0), surv.get(i, 1), surv.get(i, 2), surv.get(i, 3)];
        if t >= 8.0 {
            return vals[4];
        }
        let k = (t / 2.0).floor() as usize;
        vals[k] + (vals[k + 1] - vals[k]) * (t - knots[k]) / 2.0
    };
    let want = direct_ibs(&predict, &times, &events, 8.0);
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn product_limit_table() {
    // 6 subjects; events at 2, 4, 4, 7; censored at 3 and 8.
    // t=2: 6 at risk, 1 death -> 5/6
    // t=4: 4 at risk, 2 deaths -> 5/6 * 2/4
    // t=7: 2 at risk, 1 death -> 5/6 * 1/2 * 1/2
    let km = kaplan_meier(&[2.0, 3.0, 4.0, 4.0, 7.0, 8.0], &[true, false, true, true, true, false]);
    assert_eq!(km.times, vec![2.0, 4.0, 7.0]);
    let want = [5.0 / 6.0, 5.0 / 12.0, 5.0 / 24.0];
    for (got, want) in km.survival.iter().zip(want) {
        assert!((got - want).abs() < 1e-15);
    }
    assert_eq!(km.at(8.0), 5.0 / 24.0);
}

#[test]
fn log_rank_observed_minus_expected_table() {
    // A: events at 1, 3. B: event at 2, censored at 4.
    //  t | n_A n_B | d | E_A  | V
    //  1 |  2   2  | 1 | 1/2  | 1/4
    //  2 |  1   2  | 1 | 1/3  | 2/9
    //  3 |  1   1  | 1 | 1/2  | 1/4
    let r = log_rank_test(&[0, 1, 0, 1], &[1.0, 2.0, 3.0, 4.0], &[true, true, true, false]).unwrap();
    let e_a = 0.5 + 1.0 / 3.0 + 0.5;
    let v = 0.25 + 2.0 / 9.0 + 0.25;
    assert_eq!(r.observed, [2.0, 1.0]);
    assert!((r.expected[0] - e_a).abs() < 1e-12);
    assert!((r.expected[1] - (3.0 - e_a)).abs() < 1e-12);
    assert!((r.chi2 - (2.0 - e_a).powi(2) / v).abs() < 1e-12);
    assert!((r.p_value - 0.43276758066778465).abs() < 1e-9);
}
