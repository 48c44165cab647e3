use std::io::{BufRead, Write};

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiset::RealMultiset;
use crate::seed::{derive_seed, rng_from_seed};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
}

/// 5:2:2 split keyed on a hash of the pair index only.
pub fn split_of(index: usize) -> Split {
    match derive_seed(0x5EED_5B17, &[index as u64]) % 9 {
        0..=4 => Split::Train,
        5 | 6 => Split::Dev,
        _ => Split::Test,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContainmentPair {
    pub index: usize,
    pub s: RealMultiset,
    pub t: RealMultiset,
    /// `true` when `S` was drawn as a sub-multiset of `T` (before noise).
    pub y: bool,
    pub noise_std: f64,
    pub split: Split,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub num_pairs: usize,
    pub s_size: usize,
    pub t_size: usize,
    pub d: usize,
    pub noise_std: f64,
    pub pos_ratio: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_pairs: 1000,
            s_size: 1,
            t_size: 10,
            d: 4,
            noise_std: 0.0,
            pos_ratio: 0.5,
            seed: 0,
        }
    }
}

fn gaussian_points<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect())
        .collect()
}

/// Positives take `T ~ N(0, I)^{|T|}` and `S` as a uniform sub-multiset drawn
/// without replacement; negatives draw `S` independently. Noise is added to
/// `S` afterwards and does not change the label.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<Vec<ContainmentPair>> {
    if cfg.s_size > cfg.t_size {
        return Err(Error::invalid(format!(
            "|S| = {} exceeds |T| = {}",
            cfg.s_size, cfg.t_size
        )));
    }
    if cfg.d == 0 || !(0.0..=1.0).contains(&cfg.pos_ratio) || !(cfg.noise_std >= 0.0) {
        return Err(Error::invalid("need d >= 1, pos_ratio in [0, 1] and noise_std >= 0"));
    }
    let noise = Normal::new(0.0, cfg.noise_std.max(f64::MIN_POSITIVE)).expect("valid normal");
    let mut rng = rng_from_seed(cfg.seed);
    (0..cfg.num_pairs)
        .map(|index| {
            let y = rng.random::<f64>() < cfg.pos_ratio;
            let t = gaussian_points(cfg.t_size, cfg.d, &mut rng);
            let mut s: Vec<Vec<f64>> = if y {
                sample_indices(&mut rng, cfg.t_size, cfg.s_size)
                    .into_iter()
                    .map(|i| t[i].clone())
                    .collect()
            } else {
                gaussian_points(cfg.s_size, cfg.d, &mut rng)
            };
            if cfg.noise_std > 0.0 {
                for v in s.iter_mut().flatten() {
                    *v += noise.sample(&mut rng);
                }
            }
            Ok(ContainmentPair {
                index,
                s: RealMultiset::new(cfg.d, s)?,
                t: RealMultiset::new(cfg.d, t)?,
                y,
                noise_std: cfg.noise_std,
                split: split_of(index),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct Dataset {
    pub train: Vec<ContainmentPair>,
    pub dev: Vec<ContainmentPair>,
    pub test: Vec<ContainmentPair>,
}

impl Dataset {
    pub fn from_pairs(pairs: Vec<ContainmentPair>) -> Self {
        let mut out = Self::default();
        for p in pairs {
            match p.split {
                Split::Train => out.train.push(p),
                Split::Dev => out.dev.push(p),
                Split::Test => out.test.push(p),
            }
        }
        out
    }
}

pub fn write_jsonl<W: Write>(pairs: &[ContainmentPair], mut w: W) -> Result<()> {
    for p in pairs {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(r: R) -> Result<Vec<ContainmentPair>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Format(format!("dataset line {}: {e}", i + 1)))?,
        );
    }
    Ok(out)
}
