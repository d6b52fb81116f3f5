//! Risk-group export for a trained model: latent codes and cluster
//! labels, per-cluster Kaplan–Meier curves, log-rank tests and a ranking
//! of the features that separate the clusters.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::metrics::{kaplan_meier, log_rank_test, write_curves, LogRank, StepCurve};
use crate::tensor::Tensor;
use crate::trainer::TrainedModel;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTest {
    pub cluster_a: usize,
    pub cluster_b: usize,
    pub n_a: usize,
    pub n_b: usize,
    pub chi2: f64,
    pub p_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureShift {
    pub feature: String,
    /// Signed difference `b − a` in pooled standard deviations.
    pub smd: f64,
    pub cluster_a: usize,
    pub cluster_b: usize,
}

#[derive(Clone, Debug)]
pub struct Stratification {
    pub k: usize,
    pub labels: Vec<usize>,
    /// Eval-mode codes per view.
    pub latents: Vec<Tensor>,
    pub curves: Vec<StepCurve>,
    pub tests: Vec<PairTest>,
    /// Sorted by `|smd|`, largest first.
    pub shifts: Vec<FeatureShift>,
}

/// `(mean_b − mean_a) / sqrt((var_a + var_b) / 2)` with population
/// variances; zero when both groups are constant.
pub fn standardized_mean_difference(a: &[f64], b: &[f64]) -> f64 {
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
    };
    let (ma, va) = stats(a);
    let (mb, vb) = stats(b);
    let pooled = ((va + vb) / 2.0).sqrt();
    if pooled > 0.0 {
        (mb - ma) / pooled
    } else {
        0.0
    }
}

/// Groups `data` by the model's routing-view clusters. Pairs with an
/// empty side are left out of the tests and the feature ranking.
pub fn stratify(model: &TrainedModel, data: &SurvivalDataset) -> Result<Stratification> {
    let k = model.clusters.get(model.routing_view).map_or(0, |c| c.k());
    if k < 2 {
        return Err(Error::Usage(format!(
            "the model has {k} cluster(s); stratification needs at least 2"
        )));
    }
    let latents = model.embed(&data.x)?;
    let labels = model.assign(&data.x)?.swap_remove(model.routing_view);
    let members: Vec<Vec<usize>> = (0..k)
        .map(|c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect();
    let curves = members
        .iter()
        .map(|m| {
            let t: Vec<f64> = m.iter().map(|&i| data.time[i]).collect();
            let e: Vec<bool> = m.iter().map(|&i| data.event[i]).collect();
            kaplan_meier(&t, &e)
        })
        .collect();

    let mut tests = Vec::new();
    let mut best: Vec<Option<FeatureShift>> = vec![None; data.num_features()];
    for a in 0..k {
        for b in a + 1..k {
            let (ma, mb) = (&members[a], &members[b]);
            if ma.is_empty() || mb.is_empty() {
                log::warn!("cluster {} is empty; pair ({a}, {b}) skipped", if ma.is_empty() { a } else { b });
                continue;
            }
            let rows: Vec<usize> = ma.iter().chain(mb).copied().collect();
            let groups: Vec<usize> = ma.iter().map(|_| 0).chain(mb.iter().map(|_| 1)).collect();
            let t: Vec<f64> = rows.iter().map(|&i| data.time[i]).collect();
            let e: Vec<bool> = rows.iter().map(|&i| data.event[i]).collect();
            let LogRank { chi2, p_value, .. } = log_rank_test(&groups, &t, &e)?;
            tests.push(PairTest {
                cluster_a: a,
                cluster_b: b,
                n_a: ma.len(),
                n_b: mb.len(),
                chi2,
                p_value,
            });
            for (f, slot) in best.iter_mut().enumerate() {
                let col = |m: &[usize]| m.iter().map(|&i| data.x.get(i, f)).collect::<Vec<_>>();
                let smd = standardized_mean_difference(&col(ma), &col(mb));
                if slot.as_ref().is_none_or(|s| smd.abs() > s.smd.abs()) {
                    *slot = Some(FeatureShift {
                        feature: data.feature_names[f].clone(),
                        smd,
                        cluster_a: a,
                        cluster_b: b,
                    });
                }
            }
        }
    }
    let mut shifts: Vec<FeatureShift> = best.into_iter().flatten().collect();
    shifts.sort_by(|x, y| y.smd.abs().total_cmp(&x.smd.abs()));
    Ok(Stratification {
        k,
        labels,
        latents,
        curves,
        tests,
        shifts,
    })
}

impl Stratification {
    /// The smallest pairwise log-rank p-value.
    pub fn min_p_value(&self) -> Option<f64> {
        self.tests.iter().map(|t| t.p_value).min_by(f64::total_cmp)
    }

    /// `row,cluster,z1_0,…[,z2_0,…]`.
    pub fn write_latents<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["row".to_string(), "cluster".to_string()];
        for (v, z) in self.latents.iter().enumerate() {
            header.extend((0..z.cols()).map(|j| format!("z{}_{j}", v + 1)));
        }
        w.write_record(&header)?;
        for (i, label) in self.labels.iter().enumerate() {
            let mut rec = vec![i.to_string(), label.to_string()];
            for z in &self.latents {
                rec.extend(z.row(i).iter().map(f64::to_string));
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `latents.csv`, `km.csv`, `logrank.csv` and `features.csv`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let create = |name: &str| {
            let p = dir.join(name);
            std::fs::File::create(&p).map_err(|e| Error::file(&p, e))
        };
        self.write_latents(create("latents.csv")?)?;

        let names: Vec<String> = (0..self.k).map(|c| c.to_string()).collect();
        let curves: Vec<(Option<&str>, &StepCurve)> =
            names.iter().map(|n| Some(n.as_str())).zip(&self.curves).collect();
        write_curves(create("km.csv")?, &curves)?;

        let mut w = csv::Writer::from_writer(create("logrank.csv")?);
        for t in &self.tests {
            w.serialize(t)?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_writer(create("features.csv")?);
        w.write_record(["rank", "feature", "smd", "cluster_a", "cluster_b"])?;
        for (r, s) in self.shifts.iter().enumerate() {
            w.write_record([
                (r + 1).to_string(),
                s.feature.clone(),
                s.smd.to_string(),
                s.cluster_a.to_string(),
                s.cluster_b.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smd_hand_case() {
        // means 0 and 2, variances 1 and 1
        let d = standardized_mean_difference(&[-1.0, 1.0], &[1.0, 3.0]);
        assert!((d - 2.0).abs() < 1e-15);
        assert_eq!(standardized_mean_difference(&[1.0, 1.0], &[1.0]), 0.0);
    }
}
