//! Trains on one split and prints the metrics report. The first argument
//! is a bundled dataset name (default settings) or a config file.
//!
//! cargo run --release --example train -- [dataset|config.toml] [split] [epochs.csv]

use survstrat::config::{DataConfig, ExperimentConfig};
use survstrat::data;
use survstrat::experiment::run_split;

fn main() -> survstrat::Result<()> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let dataset = args.next().unwrap_or_else(|| "gbsg".into());
    let split: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1);
    let mut cfg = if dataset.ends_with(".toml") {
        ExperimentConfig::load(&dataset)?
    } else {
        ExperimentConfig {
            data: DataConfig {
                dataset: Some(dataset),
                ..Default::default()
            },
            ..Default::default()
        }
    };
    cfg.split = split;
    let table = data::load_table(&cfg.data)?;
    let splits = data::resolve_splits(&cfg.data, table.len())?;
    let started = std::time::Instant::now();
    let run = run_split(&cfg, &table, &splits, split)?;
    println!("{}", run.report(&cfg, split).to_toml()?);
    if let Some(path) = args.next() {
        let file = std::fs::File::create(&path)?;
        survstrat::trainer::write_epoch_log(file, &run.model.history)?;
    }
    println!("epochs: {}, elapsed: {:.1?}", run.model.history.len(), started.elapsed());
    Ok(())
}
