//! Random search over a small space, printing the leaderboard and the
//! winner's test metrics across the five splits.
//!
//! ```text
//! cargo run --release --example hpo [space.toml] [budget] [jobs]
//! ```

use survstrat::hpo::{search, SearchSpace, Selection};

const DEFAULT_SPACE: &str = "\
base = \"whas_base.toml\"

[params]
\"train.lr\" = { log_uniform = [3e-4, 3e-3] }
\"model.k\" = { choice = [2, 3] }
\"loss.beta\" = { log_uniform = [0.5, 5.0] }
";

fn main() {
    let mut args = std::env::args().skip(1);
    let space = match args.next() {
        Some(path) => SearchSpace::load(path).unwrap(),
        None => {
            let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/spaces");
            SearchSpace::from_toml_str(DEFAULT_SPACE, &dir).unwrap()
        }
    };
    let budget = args.next().map_or(6, |b| b.parse().expect("integer budget"));
    let jobs = args.next().map_or(2, |j| j.parse().expect("integer job count"));

    let outcome = search(&space, budget, 0, jobs, Selection::AverageThenRank).unwrap();
    println!("{:>5} {:>6} {:>8} {:>8}  params", "trial", "score", "val C", "val IBS");
    for row in &outcome.leaderboard {
        let params = &outcome.trials[row.trial].params;
        println!(
            "{:>5} {:>6} {:>8.4} {:>8.4}  {}",
            row.trial,
            row.score,
            row.val_c_index,
            row.val_ibs,
            serde_json::to_string(params).unwrap()
        );
    }
    let s = &outcome.summary;
    println!(
        "winner {}: test C-index {:.4} ± {:.4}, IBS {:.4} ± {:.4}",
        s.winner, s.test_c_index_mean, s.test_c_index_std, s.test_ibs_mean, s.test_ibs_std
    );
}
