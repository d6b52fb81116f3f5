//! The `survstrat` command line: `train`, `evaluate`, `hpo`, `stratify`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::data::{self, presets, RawTable, Schema, SplitSet};
use crate::error::{Error, Result};
use crate::experiment::{dataset_label, run_split, Report};
use crate::hpo::{self, SearchSpace, Selection};
use crate::metrics::IBS_POINTS;
use crate::stratify::stratify;
use crate::trainer::write_epoch_log;

#[derive(Debug, Parser)]
#[command(name = "survstrat", version, about = "Deep survival models with latent risk groups")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on one split and write checkpoint, epoch log, metrics and split file.
    Train(TrainArgs),
    /// Score a checkpoint on one subset of a split.
    Evaluate(EvaluateArgs),
    /// Random hyperparameter search over all splits.
    Hpo(HpoArgs),
    /// Export latent codes, cluster survival curves, log-rank tests and feature shifts.
    Stratify(StratifyArgs),
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's model seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Split 1..=5; overrides the config.
    #[arg(long)]
    pub split: Option<usize>,
    /// Output directory; defaults to the config's `output_dir`, then `runs/<name>`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Resample training rows with replacement.
    #[arg(long)]
    pub with_replacement: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Subset {
    Train,
    Val,
    Test,
}

impl Subset {
    fn name(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Val => "val",
            Subset::Test => "test",
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// CSV file, or the name of a bundled dataset.
    #[arg(long)]
    pub data: String,
    /// Defaults to the split the checkpoint was trained on.
    #[arg(long)]
    pub split: Option<usize>,
    #[arg(long, value_enum, default_value = "test")]
    pub subset: Subset,
    /// Split file; by default splits are regenerated from the checkpoint's split seed.
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// Also write interpolated survival curves for the subset to this CSV.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HpoArgs {
    #[arg(long)]
    pub space: PathBuf,
    /// Number of sampled configurations; defaults to the space's `budget`, then 50.
    #[arg(long)]
    pub budget: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Rank within every split and sum, instead of ranking split averages.
    #[arg(long)]
    pub rank_per_split: bool,
    #[arg(long, default_value = "hpo")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StratifyArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// CSV file, or the name of a bundled dataset.
    #[arg(long)]
    pub data: String,
    #[arg(long)]
    pub out: PathBuf,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::file(path, e))
}

fn create(path: &Path) -> Result<std::fs::File> {
    std::fs::File::create(path).map_err(|e| Error::file(path, e))
}

/// A CSV path if it exists, otherwise a bundled dataset name.
pub fn load_data(spec: &str, schema: &Schema) -> Result<RawTable> {
    let path = Path::new(spec);
    if path.exists() {
        return data::load_csv(path, schema);
    }
    match presets::preset(spec) {
        Some(p) => match p.csv {
            Some(text) => data::read_csv(text.as_bytes(), schema),
            None => Err(Error::Data(format!("dataset `{spec}` is not bundled; pass a CSV path"))),
        },
        None => Err(Error::file(path, std::io::Error::from(std::io::ErrorKind::NotFound))),
    }
}

pub fn train(args: &TrainArgs) -> Result<Report> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(split) = args.split {
        cfg.split = split;
    }
    if args.with_replacement {
        cfg.data.with_replacement = true;
    }
    cfg.validate()?;
    let out = args
        .out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(&cfg.name));
    let table = data::load_table(&cfg.data)?;
    let splits = data::resolve_splits(&cfg.data, table.len())?;
    let run = run_split(&cfg, &table, &splits, cfg.split)?;
    let report = run.report(&cfg, cfg.split);

    std::fs::create_dir_all(&out).map_err(|e| Error::file(&out, e))?;
    splits.write(out.join("splits.txt"))?;
    write_file(&out.join("config.toml"), &cfg.to_toml_string()?)?;
    write_epoch_log(create(&out.join("epochs.csv"))?, &run.model.history)?;
    write_file(&out.join("metrics.toml"), &report.to_toml()?)?;
    Checkpoint::new(cfg, table.schema.clone(), run.transforms, run.model).save(out.join("checkpoint.json"))?;
    Ok(report)
}

fn evaluation_splits(args: &EvaluateArgs, ckpt: &Checkpoint, n: usize) -> Result<SplitSet> {
    let set = match &args.splits {
        Some(p) => SplitSet::read(p)?,
        None => data::make_splits(n, ckpt.split_seed, ckpt.with_replacement)?,
    };
    set.check(n)?;
    Ok(set)
}

pub fn evaluate(args: &EvaluateArgs) -> Result<Report> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let table = load_data(&args.data, &ckpt.schema)?;
    let split = args.split.unwrap_or(ckpt.split);
    let splits = evaluation_splits(args, &ckpt, table.len())?;
    let s = splits.get(split)?;
    let rows = match args.subset {
        Subset::Train => &s.train,
        Subset::Val => &s.val,
        Subset::Test => &s.test,
    };
    let data = ckpt.prepare(&table, rows)?;
    let metrics = ckpt.model.evaluate(&data)?;
    if let Some(path) = &args.curves {
        let dist = ckpt.model.predict(&data.x)?;
        let grid = &ckpt.model.grid;
        let step = grid.horizon() / (IBS_POINTS - 1) as f64;
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["row", "time", "survival"])?;
        for (i, &row) in rows.iter().enumerate() {
            for k in 0..IBS_POINTS {
                let t = k as f64 * step;
                let s = grid.interpolate(dist.survival.row(i), t);
                w.write_record([row.to_string(), t.to_string(), s.to_string()])?;
            }
        }
        w.flush()?;
    }
    let report = Report {
        dataset: dataset_label(&ckpt.config),
        split,
        subset: args.subset.name().into(),
        c_index: metrics.c_index,
        ibs: metrics.ibs,
        seed: ckpt.config.seed,
        config_hash: ckpt.config.hash(),
        validation: None,
    };
    if let Some(path) = &args.out {
        write_file(path, &report.to_toml()?)?;
    }
    Ok(report)
}

pub fn run_hpo(args: &HpoArgs) -> Result<hpo::Outcome> {
    let space = SearchSpace::load(&args.space)?;
    let budget = args.budget.or(space.budget).unwrap_or(hpo::DEFAULT_BUDGET);
    let selection = if args.rank_per_split {
        Selection::RankPerSplit
    } else {
        Selection::AverageThenRank
    };
    let outcome = hpo::search(&space, budget, args.seed, args.jobs, selection)?;
    outcome.write_dir(&args.out)?;
    let table = data::load_table(&space.base.data)?;
    data::resolve_splits(&space.base.data, table.len())?.write(args.out.join("splits.txt"))?;
    Ok(outcome)
}

pub fn run_stratify(args: &StratifyArgs) -> Result<crate::stratify::Stratification> {
    let ckpt = Checkpoint::load(&args.checkpoint)?;
    let table = load_data(&args.data, &ckpt.schema)?;
    let rows: Vec<usize> = (0..table.len()).collect();
    let data = ckpt.prepare(&table, &rows)?;
    let result = stratify(&ckpt.model, &data)?;
    result.write_dir(&args.out)?;
    Ok(result)
}

/// Runs one parsed command, printing its summary to `out`.
pub fn run<W: Write>(cli: &Cli, mut out: W) -> Result<()> {
    match &cli.command {
        Command::Train(a) => {
            let report = train(a)?;
            write!(out, "{}", report.to_toml()?)?;
        }
        Command::Evaluate(a) => {
            let report = evaluate(a)?;
            if a.out.is_none() {
                write!(out, "{}", report.to_toml()?)?;
            }
        }
        Command::Hpo(a) => {
            let o = run_hpo(a)?;
            let s = &o.summary;
            writeln!(out, "winner: trial {} ({})", s.winner, s.config_hash)?;
            writeln!(out, "trials: {} ({} failed)", s.trials, s.failed)?;
            writeln!(out, "test c_index: {:.4} ± {:.4}", s.test_c_index_mean, s.test_c_index_std)?;
            writeln!(out, "test ibs: {:.4} ± {:.4}", s.test_ibs_mean, s.test_ibs_std)?;
        }
        Command::Stratify(a) => {
            let s = run_stratify(a)?;
            let sizes: Vec<usize> = (0..s.k).map(|c| s.labels.iter().filter(|&&l| l == c).count()).collect();
            writeln!(out, "clusters: {sizes:?}")?;
            for t in &s.tests {
                writeln!(
                    out,
                    "log-rank {} vs {}: chi2 = {:.4}, p = {:.3e}",
                    t.cluster_a, t.cluster_b, t.chi2, t.p_value
                )?;
            }
            if let Some(top) = s.shifts.first() {
                writeln!(out, "top feature: {} (smd {:.3})", top.feature, top.smd)?;
            }
        }
    }
    Ok(())
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli, std::io::stdout().lock()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
