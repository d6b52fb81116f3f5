//! Kaplan–Meier curves and a log-rank test for GBSG patients split by
//! hormone therapy.
//!
//! ```text
//! cargo run --example km_logrank
//! ```

use survstrat::config::DataConfig;
use survstrat::data::{self, RawColumn};
use survstrat::metrics::{kaplan_meier, log_rank_test};

fn main() {
    let cfg = DataConfig {
        dataset: Some("gbsg".into()),
        ..Default::default()
    };
    let table = data::load_table(&cfg).unwrap();
    let col = table.schema.columns.iter().position(|c| c.name == "hormone_therapy").unwrap();
    let RawColumn::Categorical(values) = &table.columns[col] else {
        panic!("hormone_therapy is categorical");
    };
    let groups: Vec<usize> = values.iter().map(|v| usize::from(v.as_deref() == Some("yes"))).collect();

    for g in 0..2 {
        let rows: Vec<usize> = (0..table.len()).filter(|&i| groups[i] == g).collect();
        let t: Vec<f64> = rows.iter().map(|&i| table.time[i]).collect();
        let e: Vec<bool> = rows.iter().map(|&i| table.event[i]).collect();
        let km = kaplan_meier(&t, &e);
        // times are in months
        let at = |years: f64| km.at(12.0 * years);
        println!(
            "therapy={g}: n={:4}  S(1y)={:.3}  S(3y)={:.3}  S(5y)={:.3}",
            rows.len(),
            at(1.0),
            at(3.0),
            at(5.0)
        );
    }
    let lr = log_rank_test(&groups, &table.time, &table.event).unwrap();
    println!(
        "log-rank: observed {:?}, expected [{:.1}, {:.1}], chi2 = {:.3}, p = {:.2e}",
        lr.observed, lr.expected[0], lr.expected[1], lr.chi2, lr.p_value
    );
}
