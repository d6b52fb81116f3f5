use serde::{Deserialize, Serialize};

use super::table::{RawColumn, RawTable};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const STD_FLOOR: f64 = 1e-8;

/// Per-column transform fitted on training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTransform {
    Numeric {
        name: String,
        mean: f64,
        std: f64,
        median: f64,
    },
    Categorical {
        name: String,
        categories: Vec<String>,
    },
}

impl ColumnTransform {
    pub fn width(&self) -> usize {
        match self {
            ColumnTransform::Numeric { .. } => 1,
            ColumnTransform::Categorical { categories, .. } => categories.len(),
        }
    }
}

/// Feature matrix with survival targets.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalDataset {
    pub x: Tensor,
    pub time: Vec<f64>,
    pub event: Vec<bool>,
    pub feature_names: Vec<String>,
}

impl SurvivalDataset {
    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.x.cols()
    }

    pub fn events_f64(&self) -> Vec<f64> {
        self.event.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect()
    }

    pub fn select(&self, idx: &[usize]) -> SurvivalDataset {
        SurvivalDataset {
            x: self.x.select_rows(idx),
            time: idx.iter().map(|&i| self.time[i]).collect(),
            event: idx.iter().map(|&i| self.event[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }
}

/// Z-scoring, median imputation and one-hot encoding, fitted on one split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transforms {
    pub columns: Vec<ColumnTransform>,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

impl Transforms {
    /// Fits every column transform on the rows in `train`.
    pub fn fit(table: &RawTable, train: &[usize]) -> Result<Transforms> {
        if train.is_empty() {
            return Err(Error::Usage("cannot fit preprocessing on an empty training split".into()));
        }
        let mut columns = Vec::with_capacity(table.columns.len());
        for (spec, col) in table.schema.columns.iter().zip(&table.columns) {
            let name = spec.name.clone();
            match col {
                RawColumn::Numeric(values) => {
                    let mut observed: Vec<f64> = train.iter().filter_map(|&i| values[i]).collect();
                    if observed.is_empty() {
                        return Err(Error::Data(format!(
                            "column `{name}` has no observed values in the training split"
                        )));
                    }
                    observed.sort_by(f64::total_cmp);
                    let med = median(&observed);
                    // imputed values count toward the moments
                    let filled: Vec<f64> = train.iter().map(|&i| values[i].unwrap_or(med)).collect();
                    let n = filled.len() as f64;
                    let mean = filled.iter().sum::<f64>() / n;
                    let var = filled.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                    let std = var.sqrt();
                    if std < STD_FLOOR {
                        log::warn!("column `{name}` is constant on the training split");
                    }
                    columns.push(ColumnTransform::Numeric {
                        name,
                        mean,
                        std: std.max(STD_FLOOR),
                        median: med,
                    });
                }
                RawColumn::Categorical(values) => {
                    let mut categories: Vec<String> =
                        train.iter().filter_map(|&i| values[i].clone()).collect();
                    categories.sort();
                    categories.dedup();
                    columns.push(ColumnTransform::Categorical { name, categories });
                }
            }
        }
        Ok(Transforms { columns })
    }

    pub fn output_width(&self) -> usize {
        self.columns.iter().map(ColumnTransform::width).sum()
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.output_width());
        for c in &self.columns {
            match c {
                ColumnTransform::Numeric { name, .. } => names.push(name.clone()),
                ColumnTransform::Categorical { name, categories } => {
                    names.extend(categories.iter().map(|cat| format!("{name}={cat}")));
                }
            }
        }
        names
    }

    /// Transforms the selected rows of a table.
    pub fn apply(&self, table: &RawTable, rows: &[usize]) -> Result<SurvivalDataset> {
        if table.columns.len() != self.columns.len() {
            return Err(Error::Data(format!(
                "table has {} feature columns, transforms expect {}",
                table.columns.len(),
                self.columns.len()
            )));
        }
        let width = self.output_width();
        let mut x = Tensor::zeros(rows.len(), width);
        let mut offset = 0;
        let mut unseen = 0usize;
        for (t, col) in self.columns.iter().zip(&table.columns) {
            match (t, col) {
                (ColumnTransform::Numeric { mean, std, median, .. }, RawColumn::Numeric(values)) => {
                    for (r, &i) in rows.iter().enumerate() {
                        let v = values[i].unwrap_or(*median);
                        x.set(r, offset, (v - mean) / std);
                    }
                }
                (ColumnTransform::Categorical { categories, .. }, RawColumn::Categorical(values)) => {
                    for (r, &i) in rows.iter().enumerate() {
                        if let Some(v) = &values[i] {
                            match categories.binary_search(v) {
                                Ok(k) => x.set(r, offset + k, 1.0),
                                Err(_) => unseen += 1,
                            }
                        }
                    }
                }
                _ => {
                    return Err(Error::Data(format!(
                        "column kind mismatch for `{}`",
                        match t {
                            ColumnTransform::Numeric { name, .. } | ColumnTransform::Categorical { name, .. } =>
                                name,
                        }
                    )))
                }
            }
            offset += t.width();
        }
        if unseen > 0 {
            log::warn!("{unseen} categorical values unseen in training were encoded as all zeros");
        }
        Ok(SurvivalDataset {
            x,
            time: rows.iter().map(|&i| table.time[i]).collect(),
            event: rows.iter().map(|&i| table.event[i]).collect(),
            feature_names: self.feature_names(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{ColumnKind, ColumnSpec, Schema};

    fn table(num: Vec<Option<f64>>, cat: Vec<Option<&str>>) -> RawTable {
        let n = num.len();
        RawTable {
            schema: Schema {
                time: "t".into(),
                event: "e".into(),
                columns: vec![
                    ColumnSpec {
                        name: "a".into(),
                        kind: ColumnKind::Numeric,
                    },
                    ColumnSpec {
                        name: "b".into(),
                        kind: ColumnKind::Categorical,
                    },
                ],
            },
            time: vec![1.0; n],
            event: vec![true; n],
            columns: vec![
                RawColumn::Numeric(num),
                RawColumn::Categorical(cat.into_iter().map(|c| c.map(String::from)).collect()),
            ],
            dropped_missing: 0,
            dropped_nonpositive: 0,
        }
    }

    #[test]
    fn z_score_uses_population_std() {
        let t = table(vec![Some(1.0), Some(2.0), Some(3.0)], vec![Some("A"), Some("B"), Some("A")]);
        let tr = Transforms::fit(&t, &[0, 1, 2]).unwrap();
        let d = tr.apply(&t, &[0, 1, 2]).unwrap();
        let s = (2.0f64 / 3.0).sqrt();
        for (r, want) in [-1.0 / s, 0.0, 1.0 / s].iter().enumerate() {
            assert!((d.x.get(r, 0) - want).abs() < 1e-12);
        }
        assert!((d.x.get(0, 0) + 1.2247).abs() < 1e-4);
        assert_eq!(d.feature_names, vec!["a", "b=A", "b=B"]);
        assert_eq!(&d.x.row(0)[1..], &[1.0, 0.0]);
        assert_eq!(&d.x.row(1)[1..], &[0.0, 1.0]);
    }

    #[test]
    fn unseen_category_maps_to_zeros() {
        let t = table(vec![Some(1.0), Some(2.0), Some(3.0)], vec![Some("A"), Some("B"), Some("C")]);
        let tr = Transforms::fit(&t, &[0, 1]).unwrap();
        let d = tr.apply(&t, &[2]).unwrap();
        assert_eq!(&d.x.row(0)[1..], &[0.0, 0.0]);
    }

    #[test]
    fn missing_numeric_imputed_with_train_median() {
        let t = table(vec![Some(1.0), Some(5.0), Some(2.0), None], vec![Some("A"); 4]);
        let tr = Transforms::fit(&t, &[0, 1, 2]).unwrap();
        match &tr.columns[0] {
            ColumnTransform::Numeric { median, .. } => assert_eq!(*median, 2.0),
            _ => unreachable!(),
        }
        let d = tr.apply(&t, &[2, 3]).unwrap();
        assert_eq!(d.x.get(0, 0), d.x.get(1, 0));
    }

    #[test]
    fn constant_column_is_kept_as_zero() {
        let t = table(vec![Some(4.0); 3], vec![Some("A"); 3]);
        let tr = Transforms::fit(&t, &[0, 1, 2]).unwrap();
        let d = tr.apply(&t, &[0, 1, 2]).unwrap();
        assert!(d.x.iter_rows().all(|r| r[0] == 0.0));
    }

    #[test]
    fn fit_ignores_non_training_rows() {
        let mut t = table(vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)], vec![Some("A"), Some("B"), Some("A"), Some("Z")]);
        let before = Transforms::fit(&t, &[0, 1, 2]).unwrap();
        t.columns[0] = RawColumn::Numeric(vec![Some(1.0), Some(2.0), Some(3.0), Some(-1e6)]);
        t.columns[1] = RawColumn::Categorical(vec![Some("A".into()), Some("B".into()), Some("A".into()), Some("Q".into())]);
        assert_eq!(before, Transforms::fit(&t, &[0, 1, 2]).unwrap());
    }
}
