//! Evaluation statistics: discrete time grid, concordance, IPCW Brier
//! score, Kaplan–Meier and the log-rank test.

mod grid;
mod km;

pub use grid::{build_time_grid, TimeGrid};
pub use km::{censoring_km, chi2_sf_1df, kaplan_meier, log_rank_test, write_curves, LogRank, StepCurve};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Points of the uniform integration grid for the Brier score.
pub const IBS_POINTS: usize = 100;

/// Harrell's concordance: among pairs with `e_i = 1` and `t_i < t_j`, the
/// share where `risk_i > risk_j`, counting risk ties as one half.
pub fn concordance_index(risk: &[f64], times: &[f64], events: &[bool]) -> Result<f64> {
    let n = risk.len();
    if times.len() != n || events.len() != n {
        return Err(Error::Usage("concordance inputs differ in length".into()));
    }
    let mut concordant = 0.0;
    let mut comparable = 0usize;
    for i in (0..n).filter(|&i| events[i]) {
        for j in 0..n {
            if times[i] < times[j] {
                comparable += 1;
                if risk[i] > risk[j] {
                    concordant += 1.0;
                } else if risk[i] == risk[j] {
                    concordant += 0.5;
                }
            }
        }
    }
    if comparable == 0 {
        return Err(Error::UndefinedMetric("no comparable pairs for the concordance index".into()));
    }
    Ok(concordant / comparable as f64)
}

/// Risk score per row: the negated expected event time.
pub fn risk_scores(probs: &Tensor, grid: &TimeGrid) -> Vec<f64> {
    probs.iter_rows().map(|p| -grid.expected_time(p)).collect()
}

/// Graf's inverse-probability-of-censoring weighted Brier score at `t`
/// for arbitrary survival predictions `predict(i, t)`.
pub fn brier_score_at(
    t: f64,
    predict: &dyn Fn(usize, f64) -> f64,
    times: &[f64],
    events: &[bool],
    censoring: &StepCurve,
) -> f64 {
    let g_t = censoring.at(t);
    let mut total = 0.0;
    for i in 0..times.len() {
        let s = predict(i, t);
        if times[i] <= t {
            if events[i] {
                total += s * s / censoring.before(times[i]);
            }
        } else {
            total += (1.0 - s) * (1.0 - s) / g_t;
        }
    }
    total / times.len() as f64
}

/// Brier score integrated by the trapezoid rule over `IBS_POINTS`
/// equally spaced times on `[0, horizon]` and divided by the span. Where
/// the censoring survival reaches zero the grid is cut at the last
/// estimable point.
pub fn integrated_brier_score_with(
    predict: &dyn Fn(usize, f64) -> f64,
    times: &[f64],
    events: &[bool],
    censoring: &StepCurve,
    horizon: f64,
) -> Result<f64> {
    if times.is_empty() || times.len() != events.len() {
        return Err(Error::Usage("Brier score needs equally long, non-empty inputs".into()));
    }
    if !(horizon > 0.0) {
        return Err(Error::Usage(format!("Brier horizon must be positive, got {horizon}")));
    }
    let step = horizon / (IBS_POINTS - 1) as f64;
    let mut points: Vec<f64> = (0..IBS_POINTS).map(|k| k as f64 * step).collect();
    let usable = points.iter().take_while(|&&t| censoring.at(t) > 0.0).count();
    if usable < points.len() {
        log::warn!(
            "censoring distribution reaches zero at t={}; Brier score truncated",
            points[usable]
        );
        points.truncate(usable);
    }
    if points.len() < 2 {
        return Err(Error::UndefinedMetric("Brier score has no estimable time span".into()));
    }
    let scores: Vec<f64> = points
        .iter()
        .map(|&t| brier_score_at(t, predict, times, events, censoring))
        .collect();
    let area: f64 = scores.windows(2).map(|w| 0.5 * (w[0] + w[1]) * step).sum();
    Ok(area / (points[points.len() - 1] - points[0]))
}

/// IBS of discrete survival rows (N×T) interpolated over a time grid,
/// with the horizon at the last grid edge.
pub fn integrated_brier_score(
    survival: &Tensor,
    grid: &TimeGrid,
    times: &[f64],
    events: &[bool],
    censoring: &StepCurve,
) -> Result<f64> {
    if survival.rows() != times.len() || survival.cols() != grid.bins() {
        return Err(Error::Shape {
            op: "integrated_brier_score",
            lhs: survival.shape(),
            rhs: (times.len(), grid.bins()),
        });
    }
    let predict = |i: usize, t: f64| grid.interpolate(survival.row(i), t);
    integrated_brier_score_with(&predict, times, events, censoring, grid.horizon())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concordance_extremes() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let e = [true; 4];
        assert_eq!(concordance_index(&[4.0, 3.0, 2.0, 1.0], &t, &e).unwrap(), 1.0);
        assert_eq!(concordance_index(&[1.0, 2.0, 3.0, 4.0], &t, &e).unwrap(), 0.0);
        assert_eq!(concordance_index(&[1.0; 4], &t, &e).unwrap(), 0.5);
        assert!(matches!(
            concordance_index(&[1.0, 2.0], &t[..2], &[false, false]),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn constant_half_single_patient() {
        let km = censoring_km(&[5.0], &[true]);
        let ibs = integrated_brier_score_with(&|_, _| 0.5, &[5.0], &[true], &km, 10.0).unwrap();
        assert!((ibs - 0.25).abs() < 1e-15);
    }

    #[test]
    fn oracle_predictor_scores_near_zero() {
        let times: Vec<f64> = (1..=20).map(|k| k as f64 * 0.5).collect();
        let events = vec![true; 20];
        let km = censoring_km(&times, &events);
        let predict = |i: usize, t: f64| if t < times[i] { 1.0 } else { 0.0 };
        let ibs = integrated_brier_score_with(&predict, &times, &events, &km, 10.0).unwrap();
        assert!(ibs < 1e-12, "{ibs}");
    }

    #[test]
    fn grid_curves_are_interpolated() {
        let grid = TimeGrid::new(vec![2.0, 4.0]).unwrap();
        let s = Tensor::from_rows(&[[0.5, 0.5]]).unwrap();
        let km = censoring_km(&[10.0], &[true]);
        // S(t) = 1 - t/4 on [0,2], 0.5 after; patient survives the horizon
        let ibs = integrated_brier_score(&s, &grid, &[10.0], &[true], &km).unwrap();
        let step = 4.0 / 99.0;
        let f = |t: f64| {
            let s = if t < 2.0 { 1.0 - t / 4.0 } else { 0.5 };
            (1.0 - s) * (1.0 - s)
        };
        let want: f64 = (0..99).map(|k| 0.5 * (f(k as f64 * step) + f((k + 1) as f64 * step)) * step).sum::<f64>() / 4.0;
        assert!((ibs - want).abs() < 1e-14);
    }
}
