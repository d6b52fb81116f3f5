//! Random hyperparameter search over the five-split protocol.
//!
//! A search space is a TOML file naming a base config and one sampling
//! rule per dotted config key:
//!
//! ```toml
//! base = "gbsg.toml"
//! budget = 50
//!
//! [params]
//! "train.lr" = { log_uniform = [1e-4, 1e-2] }
//! "model.k" = { choice = [2, 3, 4] }
//! "model.siamese" = { choice = [true, false] }
//! "loss.tau" = { uniform = [0.1, 1.0] }
//! "train.pretrain_epochs" = { int_uniform = [10, 100] }
//! ```
//!
//! Every trial trains on all splits. Trials are ranked by the sum of
//! their validation C-index rank (descending) and IBS rank (ascending).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::data::{self, RawTable, SplitSet, NUM_SPLITS};
use crate::error::{Error, Result};
use crate::experiment::run_split;
use crate::trainer::Metrics;

pub const DEFAULT_BUDGET: usize = 50;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Distribution {
    LogUniform([f64; 2]),
    Uniform([f64; 2]),
    IntUniform([i64; 2]),
    Choice(Vec<toml::Value>),
}

impl Distribution {
    fn check(&self, key: &str) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(format!("params.\"{key}\": {msg}")));
        match self {
            Distribution::LogUniform([lo, hi]) if !(*lo > 0.0 && lo <= hi && hi.is_finite()) => {
                bad("log_uniform bounds must satisfy 0 < lo <= hi")
            }
            Distribution::Uniform([lo, hi]) if !(lo <= hi && lo.is_finite() && hi.is_finite()) => {
                bad("uniform bounds must satisfy lo <= hi")
            }
            Distribution::IntUniform([lo, hi]) if lo > hi => bad("int_uniform bounds must satisfy lo <= hi"),
            Distribution::Choice(v) if v.is_empty() => bad("choice needs at least one option"),
            _ => Ok(()),
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> toml::Value {
        match self {
            Distribution::LogUniform([lo, hi]) => {
                let u: f64 = rng.random();
                toml::Value::Float((lo.ln() + u * (hi.ln() - lo.ln())).exp())
            }
            Distribution::Uniform([lo, hi]) => {
                let u: f64 = rng.random();
                toml::Value::Float(lo + u * (hi - lo))
            }
            Distribution::IntUniform([lo, hi]) => toml::Value::Integer(rng.random_range(*lo..=*hi)),
            Distribution::Choice(options) => options[rng.random_range(0..options.len())].clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceFile {
    base: Option<PathBuf>,
    budget: Option<usize>,
    #[serde(default)]
    params: BTreeMap<String, Distribution>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchSpace {
    pub base: ExperimentConfig,
    pub budget: Option<usize>,
    pub params: BTreeMap<String, Distribution>,
}

impl SearchSpace {
    /// Parses a space; `base` paths resolve against `dir`.
    pub fn from_toml_str(text: &str, dir: &Path) -> Result<Self> {
        let file: SpaceFile = toml::from_str(text)?;
        let base = match &file.base {
            Some(p) => ExperimentConfig::load(dir.join(p))?,
            None => ExperimentConfig::default(),
        };
        let space = SearchSpace {
            base,
            budget: file.budget,
            params: file.params,
        };
        space.check()?;
        Ok(space)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml_str(&text, path.parent().unwrap_or_else(|| Path::new(".")))
    }

    fn check(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(Error::Config("search space has no [params]".into()));
        }
        let template = toml::Value::try_from(&self.base)?;
        for (key, dist) in &self.params {
            if key.starts_with("data.") || key == "split" || key == "output_dir" {
                return Err(Error::Config(format!(
                    "params.\"{key}\": data selection and splits cannot be searched"
                )));
            }
            dist.check(key)?;
            let (section, field) = key.split_once('.').unwrap_or(("", key));
            let known = if section.is_empty() {
                template.get(field).is_some()
            } else {
                template.get(section).and_then(|s| s.get(field)).is_some()
            };
            if !known || field.contains('.') {
                return Err(Error::Config(format!("params.\"{key}\": unknown config key")));
            }
        }
        self.base.validate()
    }

    /// Draws `budget` parameter sets in a fixed order from `seed`.
    pub fn sample(&self, budget: usize, seed: u64) -> Vec<BTreeMap<String, toml::Value>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..budget)
            .map(|_| {
                self.params
                    .iter()
                    .map(|(k, d)| (k.clone(), d.sample(&mut rng)))
                    .collect()
            })
            .collect()
    }

    /// The base config with `params` written over it. Inter-view weights
    /// are zeroed when a draw disables the second encoder.
    pub fn materialize(&self, params: &BTreeMap<String, toml::Value>) -> Result<ExperimentConfig> {
        let mut value = toml::Value::try_from(&self.base)?;
        for (key, v) in params {
            let (section, field) = key.split_once('.').unwrap_or(("", key));
            let table = if section.is_empty() {
                value.as_table_mut()
            } else {
                value.get_mut(section).and_then(toml::Value::as_table_mut)
            }
            .ok_or_else(|| Error::Config(format!("params.\"{key}\": unknown config key")))?;
            table.insert(field.to_string(), v.clone());
        }
        let mut cfg: ExperimentConfig = value.try_into()?;
        if !cfg.model.siamese {
            cfg.loss.iviw = 0.0;
            cfg.loss.ivcw = 0.0;
            cfg.model.routing_view = 1;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// How validation metrics are turned into a ranking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Average each metric over splits, then rank.
    AverageThenRank,
    /// Rank within every split, then sum the ranks.
    RankPerSplit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: BTreeMap<String, toml::Value>,
    pub config_hash: String,
    pub validation: Vec<Metrics>,
    pub test: Vec<Metrics>,
    /// Why the trial produced no metrics.
    pub error: Option<String>,
}

impl Trial {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn mean_validation(&self) -> Metrics {
        mean_metrics(&self.validation)
    }
}

fn mean_metrics(m: &[Metrics]) -> Metrics {
    let n = m.len().max(1) as f64;
    Metrics {
        c_index: m.iter().map(|x| x.c_index).sum::<f64>() / n,
        ibs: m.iter().map(|x| x.ibs).sum::<f64>() / n,
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// 1-based ranks with ties sharing their average rank; `descending`
/// gives rank 1 to the largest value.
pub fn average_ranks(values: &[f64], descending: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let c = values[a].total_cmp(&values[b]);
        if descending {
            c.reverse()
        } else {
            c
        }
    });
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub trial: usize,
    pub score: f64,
    pub c_rank: f64,
    pub ibs_rank: f64,
    pub val_c_index: f64,
    pub val_ibs: f64,
}

/// Ranks successful trials, best first. Ties on score go to the higher
/// mean validation C-index, then the earlier trial.
pub fn leaderboard(trials: &[Trial], selection: Selection) -> Vec<LeaderboardRow> {
    let ok: Vec<&Trial> = trials.iter().filter(|t| t.ok()).collect();
    let means: Vec<Metrics> = ok.iter().map(|t| t.mean_validation()).collect();
    let (c_rank, ibs_rank) = match selection {
        Selection::AverageThenRank => (
            average_ranks(&means.iter().map(|m| m.c_index).collect::<Vec<_>>(), true),
            average_ranks(&means.iter().map(|m| m.ibs).collect::<Vec<_>>(), false),
        ),
        Selection::RankPerSplit => {
            let mut c = vec![0.0; ok.len()];
            let mut b = vec![0.0; ok.len()];
            let splits = ok.first().map_or(0, |t| t.validation.len());
            for s in 0..splits {
                let cs: Vec<f64> = ok.iter().map(|t| t.validation[s].c_index).collect();
                let bs: Vec<f64> = ok.iter().map(|t| t.validation[s].ibs).collect();
                for (acc, r) in c.iter_mut().zip(average_ranks(&cs, true)) {
                    *acc += r;
                }
                for (acc, r) in b.iter_mut().zip(average_ranks(&bs, false)) {
                    *acc += r;
                }
            }
            (c, b)
        }
    };
    let mut rows: Vec<LeaderboardRow> = ok
        .iter()
        .enumerate()
        .map(|(i, t)| LeaderboardRow {
            trial: t.index,
            score: c_rank[i] + ibs_rank[i],
            c_rank: c_rank[i],
            ibs_rank: ibs_rank[i],
            val_c_index: means[i].c_index,
            val_ibs: means[i].ibs,
        })
        .collect();
    rows.sort_by(|a, b| {
        a.score
            .total_cmp(&b.score)
            .then(b.val_c_index.total_cmp(&a.val_c_index))
            .then(a.trial.cmp(&b.trial))
    });
    rows
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub winner: usize,
    pub config_hash: String,
    pub selection: Selection,
    pub trials: usize,
    pub failed: usize,
    pub test_c_index_mean: f64,
    pub test_c_index_std: f64,
    pub test_ibs_mean: f64,
    pub test_ibs_std: f64,
}

pub struct Outcome {
    pub trials: Vec<Trial>,
    pub leaderboard: Vec<LeaderboardRow>,
    pub best: ExperimentConfig,
    pub summary: Summary,
}

fn run_trial(
    space: &SearchSpace,
    table: &RawTable,
    splits: &SplitSet,
    index: usize,
    params: BTreeMap<String, toml::Value>,
) -> Trial {
    let mut trial = Trial {
        index,
        params,
        config_hash: String::new(),
        validation: Vec::new(),
        test: Vec::new(),
        error: None,
    };
    let cfg = match space.materialize(&trial.params) {
        Ok(c) => c,
        Err(e) => {
            trial.error = Some(e.to_string());
            return trial;
        }
    };
    trial.config_hash = cfg.hash();
    for split in 1..=NUM_SPLITS {
        match run_split(&cfg, table, splits, split) {
            Ok(run) => {
                trial.validation.push(run.validation);
                trial.test.push(run.test);
            }
            Err(e) => {
                log::warn!("trial {index} failed on split {split}: {e}");
                trial.error = Some(format!("split {split}: {e}"));
                trial.validation.clear();
                trial.test.clear();
                break;
            }
        }
    }
    trial
}

/// Samples `budget` configurations, evaluates them on every split with
/// up to `jobs` trials in flight, and picks the winner on validation
/// metrics. The result does not depend on `jobs`.
pub fn search(space: &SearchSpace, budget: usize, seed: u64, jobs: usize, selection: Selection) -> Result<Outcome> {
    if budget == 0 {
        return Err(Error::Usage("hpo budget must be at least 1".into()));
    }
    let table = data::load_table(&space.base.data)?;
    let splits = data::resolve_splits(&space.base.data, table.len())?;
    let draws = space.sample(budget, seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    let trials: Vec<Trial> = pool.install(|| {
        draws
            .into_par_iter()
            .enumerate()
            .map(|(i, p)| {
                let t = run_trial(space, &table, &splits, i, p);
                log::info!("trial {i} done");
                t
            })
            .collect()
    });
    let board = leaderboard(&trials, selection);
    let top = board
        .first()
        .ok_or_else(|| Error::Numeric(format!("all {budget} trials failed")))?;
    let winner = &trials[top.trial];
    let best = space.materialize(&winner.params)?;
    let cs: Vec<f64> = winner.test.iter().map(|m| m.c_index).collect();
    let bs: Vec<f64> = winner.test.iter().map(|m| m.ibs).collect();
    let (c_mean, c_std) = mean_std(&cs);
    let (b_mean, b_std) = mean_std(&bs);
    let summary = Summary {
        winner: winner.index,
        config_hash: best.hash(),
        selection,
        trials: trials.len(),
        failed: trials.iter().filter(|t| !t.ok()).count(),
        test_c_index_mean: c_mean,
        test_c_index_std: c_std,
        test_ibs_mean: b_mean,
        test_ibs_std: b_std,
    };
    Ok(Outcome {
        trials,
        leaderboard: board,
        best,
        summary,
    })
}

impl Outcome {
    /// `trial,score,c_rank,ibs_rank,val_c_index,val_ibs,params` for the
    /// ranked trials, then failed trials with their error.
    pub fn write_leaderboard<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "score", "c_rank", "ibs_rank", "val_c_index", "val_ibs", "params", "error"])?;
        for row in &self.leaderboard {
            let params = serde_json::to_string(&self.trials[row.trial].params)?;
            w.write_record([
                row.trial.to_string(),
                row.score.to_string(),
                row.c_rank.to_string(),
                row.ibs_rank.to_string(),
                row.val_c_index.to_string(),
                row.val_ibs.to_string(),
                params,
                String::new(),
            ])?;
        }
        for t in self.trials.iter().filter(|t| !t.ok()) {
            let params = serde_json::to_string(&t.params)?;
            let err = t.error.clone().unwrap_or_default();
            w.write_record([t.index.to_string(), String::new(), String::new(), String::new(), String::new(), String::new(), params, err])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `leaderboard.csv`, `best_config.toml` and `summary.toml`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let lb = dir.join("leaderboard.csv");
        self.write_leaderboard(std::fs::File::create(&lb).map_err(|e| Error::file(&lb, e))?)?;
        let best = dir.join("best_config.toml");
        std::fs::write(&best, self.best.to_toml_string()?).map_err(|e| Error::file(&best, e))?;
        let summary = dir.join("summary.toml");
        std::fs::write(&summary, toml::to_string(&self.summary)?).map_err(|e| Error::file(&summary, e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(params: &str) -> Result<SearchSpace> {
        let text = format!("[params]\n{params}\n");
        let mut s: SpaceFile = toml::from_str(&text)?;
        let mut base = ExperimentConfig::default();
        base.data.dataset = Some("whas".into());
        let space = SearchSpace {
            base,
            budget: s.budget.take(),
            params: s.params,
        };
        space.check()?;
        Ok(space)
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[0.7, 0.6, 0.7, 0.5], true), vec![1.5, 3.0, 1.5, 4.0]);
        assert_eq!(average_ranks(&[0.2, 0.1, 0.3], false), vec![2.0, 1.0, 3.0]);
    }

    #[test]
    fn sample_stays_in_bounds_and_is_seeded() {
        let s = space(
            "\"train.lr\" = { log_uniform = [1e-4, 1e-2] }\n\"model.k\" = { int_uniform = [2, 4] }\n\"model.siamese\" = { choice = [true, false] }",
        )
        .unwrap();
        let a = s.sample(30, 7);
        assert_eq!(a, s.sample(30, 7));
        assert_ne!(a, s.sample(30, 8));
        for p in &a {
            let lr = p["train.lr"].as_float().unwrap();
            assert!((1e-4..=1e-2).contains(&lr));
            assert!((2..=4).contains(&p["model.k"].as_integer().unwrap()));
            s.materialize(p).unwrap();
        }
    }

    #[test]
    fn single_encoder_draws_drop_inter_view_weights() {
        let s = space("\"loss.iviw\" = { uniform = [0.5, 1.0] }\n\"model.siamese\" = { choice = [false] }").unwrap();
        let cfg = s.materialize(&s.sample(1, 0)[0]).unwrap();
        assert_eq!(cfg.loss.iviw, 0.0);
    }

    #[test]
    fn bad_spaces_are_rejected() {
        assert!(space("\"train.nope\" = { uniform = [0.0, 1.0] }").is_err());
        assert!(space("\"data.dataset\" = { choice = [\"gbsg\"] }").is_err());
        assert!(space("\"train.lr\" = { log_uniform = [0.0, 1.0] }").is_err());
        assert!(space("\"model.k\" = { choice = [] }").is_err());
        assert!(space("").is_err());
    }

    fn trial(index: usize, val: &[(f64, f64)]) -> Trial {
        Trial {
            index,
            params: BTreeMap::new(),
            config_hash: String::new(),
            validation: val.iter().map(|&(c_index, ibs)| Metrics { c_index, ibs }).collect(),
            test: Vec::new(),
            error: None,
        }
    }

    #[test]
    fn rank_sum_selection() {
        let trials = vec![
            trial(0, &[(0.70, 0.20), (0.70, 0.20)]),
            trial(1, &[(0.72, 0.19), (0.72, 0.19)]),
            trial(2, &[(0.71, 0.18), (0.71, 0.18)]),
            Trial {
                error: Some("boom".into()),
                ..trial(3, &[])
            },
        ];
        let board = leaderboard(&trials, Selection::AverageThenRank);
        assert_eq!(board.len(), 3);
        // 1: 1+2, 2: 2+1 tie on score; higher C wins
        assert_eq!(board.iter().map(|r| r.trial).collect::<Vec<_>>(), vec![1, 2, 0]);
        assert_eq!(board[0].score, 3.0);
    }

    #[test]
    fn per_split_ranking_can_disagree_with_averages() {
        // trial 0 wins one split by a lot, trial 1 wins two by a little
        let trials = vec![
            trial(0, &[(0.90, 0.2), (0.60, 0.2), (0.60, 0.2)]),
            trial(1, &[(0.61, 0.2), (0.61, 0.2), (0.61, 0.2)]),
        ];
        let avg = leaderboard(&trials, Selection::AverageThenRank);
        let per = leaderboard(&trials, Selection::RankPerSplit);
        assert_eq!(avg[0].trial, 0);
        assert_eq!(per[0].trial, 1);
    }

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
