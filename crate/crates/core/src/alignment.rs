//! Nearest-timestamp pairing of pose labels with CSI frames, and the
//! train/test/validation partition.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignedSample {
    pub label_index: usize,
    pub csi_index: usize,
    pub gap: f64,
}

fn check_sorted(ts: &[f64], what: &'static str) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::invalid(format!("{what} timestamps are empty")));
    }
    for (i, w) in ts.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonMonotonic { what, index: i + 1 });
        }
    }
    Ok(())
}

/// Pairs every label with the CSI frame closest in time; ties go to the
/// earlier frame.
pub fn align_nearest(label_ts: &[f64], csi_ts: &[f64]) -> Result<Vec<AlignedSample>> {
    check_sorted(label_ts, "label")?;
    check_sorted(csi_ts, "frame")?;
    Ok(label_ts
        .iter()
        .enumerate()
        .map(|(label_index, &t)| {
            let after = csi_ts.partition_point(|&c| c < t);
            let mut best = after.min(csi_ts.len() - 1);
            if after > 0 {
                let before = after - 1;
                if (t - csi_ts[before]).abs() <= (csi_ts[best] - t).abs() {
                    best = before;
                }
            }
            AlignedSample {
                label_index,
                csi_index: best,
                gap: (t - csi_ts[best]).abs(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitMode {
    #[default]
    Random,
    /// Contiguous blocks in index order: train, then test, then validation.
    Temporal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train: f64,
    pub test: f64,
    pub val: f64,
    pub seed: u64,
    pub mode: SplitMode,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.7,
            test: 0.2,
            val: 0.1,
            seed: 0,
            mode: SplitMode::Random,
        }
    }
}

impl SplitSpec {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let sum = self.train + self.test + self.val;
        if [self.train, self.test, self.val].iter().any(|r| !(*r > 0.0)) || (sum - 1.0).abs() > 1e-9
        {
            return Err(Error::invalid(format!(
                "split ratios must be positive and sum to 1, got ({}, {}, {})",
                self.train, self.test, self.val
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub val: Vec<usize>,
}

fn floor_share(ratio: f64, n: usize) -> usize {
    // Guard against 0.7 * 90 = 62.999…
    (ratio * n as f64 + 1e-9).floor() as usize
}

pub fn split(n: usize, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    if n < 10 {
        return Err(Error::invalid(format!("split needs at least 10 samples, got {n}")));
    }
    let n_train = floor_share(spec.train, n);
    let n_test = floor_share(spec.test, n);
    let mut order: Vec<usize> = (0..n).collect();
    if spec.mode == SplitMode::Random {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    }
    let val = order.split_off(n_train + n_test);
    let test = order.split_off(n_train);
    Ok(Split {
        train: order,
        test,
        val,
    })
}

impl Split {
    /// Plain-text audit listing: a `# section` header followed by one index
    /// per line, for train, test and val in that order.
    pub fn to_index_file(&self) -> String {
        let mut out = String::new();
        for (name, idx) in [("train", &self.train), ("test", &self.test), ("val", &self.val)] {
            writeln!(out, "# {name}").unwrap();
            for i in idx {
                writeln!(out, "{i}").unwrap();
            }
        }
        out
    }

    pub fn from_index_file(text: &str) -> Result<Self> {
        let mut sections: Vec<(String, Vec<usize>)> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('#') {
                sections.push((name.trim().to_string(), Vec::new()));
                continue;
            }
            let v = line
                .parse()
                .map_err(|_| Error::Malformed(format!("line {}: bad index {line:?}", lineno + 1)))?;
            match sections.last_mut() {
                Some((_, idx)) => idx.push(v),
                None => return Err(Error::Malformed("index before first section".into())),
            }
        }
        let names: Vec<&str> = sections.iter().map(|(n, _)| n.as_str()).collect();
        if names != ["train", "test", "val"] {
            return Err(Error::Malformed(format!("unexpected sections {names:?}")));
        }
        let mut it = sections.into_iter().map(|(_, v)| v);
        Ok(Self {
            train: it.next().unwrap(),
            test: it.next().unwrap(),
            val: it.next().unwrap(),
        })
    }
}
