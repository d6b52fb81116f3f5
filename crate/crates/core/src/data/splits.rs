use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::NUM_SPLITS;
use crate::error::{Error, Result};

/// Row indices of one train/validation/test partition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSet {
    pub n: usize,
    pub seed: u64,
    pub with_replacement: bool,
    pub splits: Vec<Split>,
}

/// Train and validation sizes are floored; test takes the remainder.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = n * 3 / 5;
    let val = n / 5;
    (train, val, n - train - val)
}

/// Five independently shuffled 60/20/20 partitions. With replacement,
/// the training rows are a bootstrap resample of the training pool while
/// validation and test stay disjoint from that pool.
pub fn make_splits(n: usize, seed: u64, with_replacement: bool) -> Result<SplitSet> {
    if n < 10 {
        return Err(Error::Usage(format!("need at least 10 rows to split, got {n}")));
    }
    let (n_train, n_val, _) = split_sizes(n);
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let splits = (0..NUM_SPLITS)
        .map(|_| {
            let mut rng = ChaCha8Rng::seed_from_u64(master.next_u64());
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(&mut rng);
            let pool = &idx[..n_train];
            let mut train: Vec<usize> = if with_replacement {
                (0..n_train).map(|_| pool[rng.random_range(0..n_train)]).collect()
            } else {
                pool.to_vec()
            };
            let mut val = idx[n_train..n_train + n_val].to_vec();
            let mut test = idx[n_train + n_val..].to_vec();
            train.sort_unstable();
            val.sort_unstable();
            test.sort_unstable();
            Split { train, val, test }
        })
        .collect();
    Ok(SplitSet {
        n,
        seed,
        with_replacement,
        splits,
    })
}

impl SplitSet {
    /// 1-based split lookup.
    pub fn get(&self, split: usize) -> Result<&Split> {
        if split == 0 || split > self.splits.len() {
            return Err(Error::Usage(format!(
                "split must be in 1..={} (got {split})",
                self.splits.len()
            )));
        }
        Ok(&self.splits[split - 1])
    }

    /// Header comment, then one line per split of `role:index` tokens.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "# n={} seed={} with_replacement={}\n",
            self.n, self.seed, self.with_replacement
        );
        for s in &self.splits {
            let mut line = String::new();
            for (role, idx) in [("train", &s.train), ("val", &s.val), ("test", &s.test)] {
                for i in idx {
                    if !line.is_empty() {
                        line.push(' ');
                    }
                    let _ = write!(line, "{role}:{i}");
                }
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<SplitSet> {
        let mut header = None;
        let mut splits = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut n = None;
                let mut seed = None;
                let mut repl = None;
                for kv in rest.split_whitespace() {
                    match kv.split_once('=') {
                        Some(("n", v)) => n = v.parse::<usize>().ok(),
                        Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                        Some(("with_replacement", v)) => repl = v.parse::<bool>().ok(),
                        _ => {}
                    }
                }
                if let (Some(n), Some(seed), Some(repl)) = (n, seed, repl) {
                    header = Some((n, seed, repl));
                }
                continue;
            }
            let mut s = Split {
                train: Vec::new(),
                val: Vec::new(),
                test: Vec::new(),
            };
            for tok in line.split_whitespace() {
                let bad = || Error::Data(format!("split file line {}: bad token `{tok}`", lineno + 1));
                let (role, i) = tok.split_once(':').ok_or_else(bad)?;
                let i: usize = i.parse().map_err(|_| bad())?;
                match role {
                    "train" => s.train.push(i),
                    "val" => s.val.push(i),
                    "test" => s.test.push(i),
                    _ => return Err(bad()),
                }
            }
            splits.push(s);
        }
        let (n, seed, with_replacement) =
            header.ok_or_else(|| Error::Data("split file is missing its `# n=.. seed=..` header".into()))?;
        let set = SplitSet {
            n,
            seed,
            with_replacement,
            splits,
        };
        set.check(n)?;
        Ok(set)
    }

    /// Index bounds and disjointness against a dataset of `n` rows.
    pub fn check(&self, n: usize) -> Result<()> {
        if self.n != n {
            return Err(Error::Data(format!(
                "split file was made for {} rows but the dataset has {n}",
                self.n
            )));
        }
        if self.splits.len() != NUM_SPLITS {
            return Err(Error::Data(format!(
                "expected {NUM_SPLITS} splits, found {}",
                self.splits.len()
            )));
        }
        for (k, s) in self.splits.iter().enumerate() {
            let mut seen = vec![false; n];
            for &i in s.val.iter().chain(&s.test) {
                if i >= n || seen[i] {
                    return Err(Error::Data(format!("split {}: invalid or repeated index {i}", k + 1)));
                }
                seen[i] = true;
            }
            for &i in &s.train {
                // resampled training rows may repeat each other, never val/test
                if i >= n || seen[i] {
                    return Err(Error::Data(format!("split {}: invalid or overlapping index {i}", k + 1)));
                }
                if !self.with_replacement {
                    seen[i] = true;
                }
            }
        }
        Ok(())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::file(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<SplitSet> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_text(&text)
    }
}
