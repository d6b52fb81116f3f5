//! Five seeded 60/20/20 partitions of a bundled dataset and the
//! preprocessing fitted on the first training split.
//!
//! ```text
//! cargo run --example splits [dataset] [split_seed]
//! ```

use survstrat::config::DataConfig;
use survstrat::data::{self, ColumnTransform};

fn main() {
    let mut args = std::env::args().skip(1);
    let cfg = DataConfig {
        dataset: Some(args.next().unwrap_or_else(|| "metabric".into())),
        split_seed: args.next().map_or(0, |s| s.parse().expect("integer split seed")),
        ..Default::default()
    };
    let table = data::load_table(&cfg).unwrap();
    println!(
        "{} rows ({} dropped for missing targets, {} for non-positive times)",
        table.len(),
        table.dropped_missing,
        table.dropped_nonpositive
    );

    let splits = data::resolve_splits(&cfg, table.len()).unwrap();
    for s in 1..=5 {
        let split = splits.get(s).unwrap();
        let events = |rows: &[usize]| rows.iter().filter(|&&i| table.event[i]).count();
        println!(
            "split {s}: train {} ({} events), val {}, test {}",
            split.train.len(),
            events(&split.train),
            split.val.len(),
            split.test.len()
        );
    }

    let prepared = data::prepare_split(&table, splits.get(1).unwrap()).unwrap();
    println!("features after preprocessing: {}", prepared.train.num_features());
    for c in &prepared.transforms.columns {
        match c {
            ColumnTransform::Numeric { name, mean, std, median } => {
                println!("  {name:<16} standardized (mean {mean:.2}, sd {std:.2}, fill {median:.2})")
            }
            ColumnTransform::Categorical { name, categories } => {
                println!("  {name:<16} one-hot {categories:?}")
            }
        }
    }
}
