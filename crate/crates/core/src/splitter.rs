//! Country-stratified train/evaluation split.
//!
//! The shuffle is defined entirely in terms of the ChaCha8 keystream so it can
//! be reproduced outside Rust:
//!
//! 1. Seed a ChaCha8 generator with `seed_from_u64(seed)` and select stream
//!    number `country.index()` (Czech = 0, India = 1, Japan = 2).
//! 2. Sort the stratum's image ids lexicographically.
//! 3. Fisher-Yates from the back: for `i = n-1 … 1`, draw `j` uniformly from
//!    `0..=i` by rejection sampling on `next_u64` (discard values at or above
//!    the largest multiple of `i+1`), then swap `i` and `j`.
//! 4. The first `round_half_up(fraction · n)` ids go to evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Country, Dataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StratumCounts {
    pub total: usize,
    pub train: usize,
    pub eval: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitResult {
    pub train_ids: Vec<String>,
    pub eval_ids: Vec<String>,
    pub seed: u64,
    pub eval_fraction: f64,
    pub strata: BTreeMap<Country, StratumCounts>,
}

/// Number of evaluation images for a stratum of `n` images.
pub fn eval_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64 + 0.5).floor() as usize).min(n)
}

pub fn stratified_split(ds: &Dataset, eval_fraction: f64, seed: u64) -> Result<SplitResult> {
    if !(eval_fraction > 0.0 && eval_fraction < 1.0) {
        return Err(Error::Config(format!(
            "eval fraction must lie strictly between 0 and 1, got {eval_fraction}"
        )));
    }
    if ds.is_empty() {
        return Err(Error::Data("cannot split an empty dataset".into()));
    }
    let mut train_ids = Vec::with_capacity(ds.len());
    let mut eval_ids = Vec::new();
    let mut strata = BTreeMap::new();
    for country in Country::ALL {
        let mut ids: Vec<String> = ds.by_country(country).map(|r| r.image_id.clone()).collect();
        if ids.is_empty() {
            continue;
        }
        ids.sort();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(country.index() as u64);
        shuffle(&mut ids, &mut rng);
        let k = eval_count(ids.len(), eval_fraction);
        strata.insert(
            country,
            StratumCounts {
                total: ids.len(),
                train: ids.len() - k,
                eval: k,
            },
        );
        let train = ids.split_off(k);
        eval_ids.extend(ids);
        train_ids.extend(train);
    }
    train_ids.sort();
    eval_ids.sort();
    Ok(SplitResult {
        train_ids,
        eval_ids,
        seed,
        eval_fraction,
        strata,
    })
}

fn uniform_below(rng: &mut impl RngCore, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let zone = u64::MAX - (u64::MAX % bound);
    loop {
        let v = rng.next_u64();
        if v < zone {
            return v % bound;
        }
    }
}

fn shuffle<T>(items: &mut [T], rng: &mut impl RngCore) {
    for i in (1..items.len()).rev() {
        let j = uniform_below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    seed: u64,
    fraction: f64,
    strata: BTreeMap<String, StratumCounts>,
}

impl SplitResult {
    /// Newline-terminated id list.
    pub fn ids_file(ids: &[String]) -> String {
        let mut out = String::new();
        for id in ids {
            out.push_str(id);
            out.push('\n');
        }
        out
    }

    pub fn sidecar_json(&self) -> String {
        let sidecar = Sidecar {
            seed: self.seed,
            fraction: self.eval_fraction,
            strata: self
                .strata
                .iter()
                .map(|(c, s)| (c.as_str().to_string(), *s))
                .collect(),
        };
        let mut json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        json.push('\n');
        json
    }

    /// Writes `train.txt`, `eval.txt` and `split.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, contents) in [
            ("train.txt", Self::ids_file(&self.train_ids)),
            ("eval.txt", Self::ids_file(&self.eval_ids)),
            ("split.json", self.sidecar_json()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    /// Reads back what [`SplitResult::write_to`] produced.
    pub fn read_from(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
        };
        let ids = |text: String| -> Vec<String> {
            text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect()
        };
        let sidecar: Sidecar = serde_json::from_str(&read("split.json")?)
            .map_err(|e| Error::Data(format!("split.json: {e}")))?;
        let strata = sidecar
            .strata
            .into_iter()
            .map(|(c, s)| Ok((c.parse::<Country>()?, s)))
            .collect::<Result<_>>()?;
        Ok(Self {
            train_ids: ids(read("train.txt")?),
            eval_ids: ids(read("eval.txt")?),
            seed: sidecar.seed,
            eval_fraction: sidecar.fraction,
            strata,
        })
    }
}
