//! Trains on one split and stratifies every patient into latent risk
//! groups: sizes, Kaplan–Meier medians, log-rank tests and the features
//! that separate the groups most.
//!
//! ```text
//! cargo run --release --example stratify [config.toml] [out_dir]
//! ```

use survstrat::config::ExperimentConfig;
use survstrat::data;
use survstrat::experiment::run_split;
use survstrat::stratify::stratify;

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/gbsg.toml").into());
    let cfg = ExperimentConfig::load(&path).unwrap();
    let table = data::load_table(&cfg.data).unwrap();
    let splits = data::resolve_splits(&cfg.data, table.len()).unwrap();
    let run = run_split(&cfg, &table, &splits, cfg.split).unwrap();
    println!("test C-index {:.4}, IBS {:.4}", run.test.c_index, run.test.ibs);

    let rows: Vec<usize> = (0..table.len()).collect();
    let all = run.transforms.apply(&table, &rows).unwrap();
    let s = stratify(&run.model, &all).unwrap();
    for (c, curve) in s.curves.iter().enumerate() {
        let n = s.labels.iter().filter(|&&l| l == c).count();
        let median = curve.times.iter().zip(&curve.survival).find(|(_, &v)| v <= 0.5).map(|(t, _)| *t);
        match median {
            Some(t) => println!("cluster {c}: {n:5} patients, median survival {t:.1}"),
            None => println!("cluster {c}: {n:5} patients, median survival not reached"),
        }
    }
    for t in &s.tests {
        println!("log-rank {} vs {}: chi2 {:.2}, p {:.2e}", t.cluster_a, t.cluster_b, t.chi2, t.p_value);
    }
    for f in s.shifts.iter().take(5) {
        println!("  {:<18} smd {:+.2}", f.feature, f.smd);
    }
    if let Some(dir) = args.next() {
        s.write_dir(&dir).unwrap();
        println!("wrote latents.csv, km.csv, logrank.csv, features.csv to {dir}");
    }
}
