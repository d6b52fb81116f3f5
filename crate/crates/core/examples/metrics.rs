//! Scores a trained model with the C-index and IBS, next to two
//! reference predictors: the training Kaplan–Meier curve for everyone
//! (C-index 0.5 by construction) and an age-only ranking.
//!
//! ```text
//! cargo run --example metrics [dataset]
//! ```

use survstrat::config::ExperimentConfig;
use survstrat::data;
use survstrat::metrics::{censoring_km, concordance_index, integrated_brier_score_with, kaplan_meier};
use survstrat::trainer::fit;

fn main() {
    let mut cfg = ExperimentConfig::default();
    cfg.data.dataset = Some(std::env::args().nth(1).unwrap_or_else(|| "gbsg".into()));
    let table = data::load_table(&cfg.data).unwrap();
    let splits = data::resolve_splits(&cfg.data, table.len()).unwrap();
    let p = data::prepare_split(&table, splits.get(1).unwrap()).unwrap();
    let test = &p.test;

    let model = fit(&cfg, &p.train, Some(&p.val)).unwrap();
    let m = model.evaluate(test).unwrap();
    println!("model         C-index {:.4}  IBS {:.4}", m.c_index, m.ibs);

    let km = kaplan_meier(&p.train.time, &p.train.event);
    let censoring = censoring_km(&p.train.time, &p.train.event);
    let horizon = model.grid.horizon();
    let flat = |_: usize, t: f64| km.at(t);
    let ibs = integrated_brier_score_with(&flat, &test.time, &test.event, &censoring, horizon).unwrap();
    let c = concordance_index(&vec![0.0; test.len()], &test.time, &test.event).unwrap();
    println!("Kaplan-Meier  C-index {c:.4}  IBS {ibs:.4}");

    if let Some(age) = test.feature_names.iter().position(|n| n == "age") {
        let risk: Vec<f64> = test.x.iter_rows().map(|r| r[age]).collect();
        let c = concordance_index(&risk, &test.time, &test.event).unwrap();
        println!("age only      C-index {c:.4}");
    }
}
