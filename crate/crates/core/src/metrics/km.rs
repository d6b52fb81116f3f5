use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Right-continuous step function with `S(0) = 1`; `times` are the
/// distinct event times where the curve drops.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepCurve {
    pub times: Vec<f64>,
    pub survival: Vec<f64>,
}

impl StepCurve {
    /// `S(t)`.
    pub fn at(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x <= t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }

    /// Left limit `S(t−)`.
    pub fn before(&self, t: f64) -> f64 {
        let k = self.times.partition_point(|&x| x < t);
        if k == 0 {
            1.0
        } else {
            self.survival[k - 1]
        }
    }
}

/// Product-limit estimator under right censoring. Censorings tied with
/// events at the same time count as still at risk.
pub fn kaplan_meier(times: &[f64], events: &[bool]) -> StepCurve {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut at_risk = times.len();
    let mut s = 1.0;
    let mut curve = StepCurve {
        times: Vec::new(),
        survival: Vec::new(),
    };
    let mut k = 0;
    while k < order.len() {
        let t = times[order[k]];
        let mut deaths = 0;
        let mut total = 0;
        while k < order.len() && times[order[k]] == t {
            deaths += events[order[k]] as usize;
            total += 1;
            k += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
            curve.times.push(t);
            curve.survival.push(s);
        }
        at_risk -= total;
    }
    curve
}

/// Kaplan–Meier estimate of the censoring distribution (roles flipped).
pub fn censoring_km(times: &[f64], events: &[bool]) -> StepCurve {
    let flipped: Vec<bool> = events.iter().map(|e| !e).collect();
    kaplan_meier(times, &flipped)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRank {
    pub chi2: f64,
    pub p_value: f64,
    pub observed: [f64; 2],
    pub expected: [f64; 2],
}

/// Upper tail of the χ² distribution with one degree of freedom.
pub fn chi2_sf_1df(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(0.5, x / 2.0)
    }
}

/// Two-sample log-rank test; `groups` holds 0 or 1 per subject.
pub fn log_rank_test(groups: &[usize], times: &[f64], events: &[bool]) -> Result<LogRank> {
    let n = times.len();
    if groups.len() != n || events.len() != n {
        return Err(Error::Usage("log-rank inputs differ in length".into()));
    }
    if let Some(&g) = groups.iter().find(|&&g| g > 1) {
        return Err(Error::Usage(format!("log-rank compares two groups, got label {g}")));
    }
    let sizes = [
        groups.iter().filter(|&&g| g == 0).count(),
        groups.iter().filter(|&&g| g == 1).count(),
    ];
    if sizes.contains(&0) {
        return Err(Error::Usage("log-rank needs two non-empty groups".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut risk = [sizes[0] as f64, sizes[1] as f64];
    let mut observed = [0.0; 2];
    let mut expected = [0.0; 2];
    let mut variance = 0.0;
    let mut k = 0;
    while k < n {
        let t = times[order[k]];
        let mut d = [0.0; 2];
        let mut leaving = [0.0; 2];
        while k < n && times[order[k]] == t {
            let i = order[k];
            if events[i] {
                d[groups[i]] += 1.0;
            }
            leaving[groups[i]] += 1.0;
            k += 1;
        }
        let dt = d[0] + d[1];
        let nt = risk[0] + risk[1];
        if dt > 0.0 {
            for g in 0..2 {
                observed[g] += d[g];
                expected[g] += dt * risk[g] / nt;
            }
            if nt > 1.0 {
                variance += dt * (risk[0] / nt) * (risk[1] / nt) * (nt - dt) / (nt - 1.0);
            }
        }
        risk[0] -= leaving[0];
        risk[1] -= leaving[1];
    }
    let chi2 = if variance > 0.0 {
        (observed[0] - expected[0]).powi(2) / variance
    } else {
        0.0
    };
    Ok(LogRank {
        chi2,
        p_value: chi2_sf_1df(chi2),
        observed,
        expected,
    })
}

/// Writes `time,survival[,group]` rows.
pub fn write_curves<W: Write>(out: W, curves: &[(Option<&str>, &StepCurve)]) -> Result<()> {
    let grouped = curves.iter().any(|(g, _)| g.is_some());
    let mut w = csv::Writer::from_writer(out);
    if grouped {
        w.write_record(["time", "survival", "group"])?;
    } else {
        w.write_record(["time", "survival"])?;
    }
    for (group, curve) in curves {
        let knots = std::iter::once((0.0, 1.0)).chain(curve.times.iter().copied().zip(curve.survival.iter().copied()));
        for (t, s) in knots {
            let mut rec = vec![t.to_string(), s.to_string()];
            if grouped {
                rec.push(group.unwrap_or("").to_string());
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_limit_hand_case() {
        let km = kaplan_meier(&[1.0, 2.0, 3.0], &[true, false, true]);
        assert_eq!(km.times, vec![1.0, 3.0]);
        assert!((km.at(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((km.at(2.5) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(km.at(3.0), 0.0);
        assert_eq!(km.before(1.0), 1.0);
        assert_eq!(km.at(0.5), 1.0);
    }

    #[test]
    fn degenerate_curves() {
        let none = kaplan_meier(&[1.0, 2.0], &[false, false]);
        assert_eq!(none.at(10.0), 1.0);
        let all = kaplan_meier(&[1.0, 1.0, 1.0], &[true, true, true]);
        assert_eq!(all.at(1.0), 0.0);
    }

    #[test]
    fn chi2_tail_at_known_quantile() {
        assert!((chi2_sf_1df(3.841458820694124) - 0.05).abs() < 1e-9);
        assert_eq!(chi2_sf_1df(0.0), 1.0);
    }

    #[test]
    fn log_rank_identical_groups() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let r = log_rank_test(&[0, 0, 1, 1], &[1.0, 2.0, 1.0, 2.0], &[true; 4]).unwrap();
        assert!(r.chi2.abs() < 1e-12);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert!(log_rank_test(&[0, 0, 0, 0], &t, &[true; 4]).is_err());
    }

    #[test]
    fn log_rank_separated_groups() {
        let times: Vec<f64> = (1..=40).map(f64::from).collect();
        let groups: Vec<usize> = (0..40).map(|i| usize::from(i >= 20)).collect();
        let r = log_rank_test(&groups, &times, &[true; 40]).unwrap();
        assert!(r.p_value < 0.01);
        assert!((r.observed[0] + r.observed[1] - 40.0).abs() < 1e-12);
        assert!((r.expected[0] + r.expected[1] - 40.0).abs() < 1e-9);
    }

    #[test]
    fn curve_export() {
        let km = kaplan_meier(&[1.0, 3.0], &[true, true]);
        let mut buf = Vec::new();
        write_curves(&mut buf, &[(Some("1"), &km)]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "time,survival,group\n0,1,1\n1,0.5,1\n3,0,1\n");
    }
}
