//! Regression of monotone set functions with a MAS network.

use rand::Rng;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{split_of, Split};
use super::model::MasNet;
use super::train::{Optimizer, OptimizerState};
use crate::activation::{relu, tri_eval};
use crate::error::{Error, Result};
use crate::multiset::{sample_unit_sphere, RealMultiset};
use crate::seed::{derived_rng, rng_from_seed};

/// Monotone targets with a closed form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonotoneTarget {
    /// `|S|`.
    Cardinality,
    Constant { value: f64 },
    /// `Σ_j max_{x∈S} TRI(a_j·x + b_j)`, zero on the empty set.
    HatCoverage { a: Vec<Vec<f64>>, b: Vec<f64> },
    /// `Σ_j max_{x∈S} ReLU(a_j·x)`, zero on the empty set.
    ReluMax { a: Vec<Vec<f64>> },
}

fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(p, q)| p * q).sum()
}

impl MonotoneTarget {
    pub fn eval(&self, s: &RealMultiset) -> f64 {
        let max_over = |f: &dyn Fn(&[f64]) -> f64| s.points().iter().map(|x| f(x)).fold(0.0, f64::max);
        match self {
            Self::Cardinality => s.len() as f64,
            Self::Constant { value } => *value,
            Self::HatCoverage { a, b } => a.iter().zip(b).map(|(aj, bj)| max_over(&|x| tri_eval(dot(aj, x) + bj))).sum(),
            Self::ReluMax { a } => a.iter().map(|aj| max_over(&|x| relu(dot(aj, x)))).sum(),
        }
    }

    /// Named target with random directions drawn from `seed`.
    /// Names: `cardinality`, `constant`, `hat_coverage`, `relu_max`.
    pub fn builtin(name: &str, d: usize, seed: u64) -> Result<Self> {
        let mut rng = rng_from_seed(seed);
        let dirs = |rng: &mut crate::seed::Rng| -> Vec<Vec<f64>> { (0..8).map(|_| sample_unit_sphere(d, rng)).collect() };
        match name {
            "cardinality" => Ok(Self::Cardinality),
            "constant" => Ok(Self::Constant { value: 1.0 }),
            "hat_coverage" => {
                let a = dirs(&mut rng);
                let b = (0..a.len()).map(|_| rng.random_range(-0.5..0.5)).collect();
                Ok(Self::HatCoverage { a, b })
            }
            "relu_max" => Ok(Self::ReluMax { a: dirs(&mut rng) }),
            t => Err(Error::invalid(format!(
                "unknown target '{t}', expected cardinality, constant, hat_coverage or relu_max"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSet {
    pub s: RealMultiset,
    pub y: f64,
    pub split: Split,
}

/// Sets of Gaussian points with sizes uniform on `0..=max_size`.
pub fn generate_monotone_dataset(target: &MonotoneTarget, num_sets: usize, max_size: usize, d: usize, seed: u64) -> Result<Vec<LabeledSet>> {
    if d == 0 {
        return Err(Error::invalid("d must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    (0..num_sets)
        .map(|i| {
            let n = rng.random_range(0..=max_size);
            let pts = (0..n).map(|_| (0..d).map(|_| StandardNormal.sample(&mut rng)).collect()).collect();
            let s = RealMultiset::new(d, pts)?;
            Ok(LabeledSet { y: target.eval(&s), s, split: split_of(i) })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub patience: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            epochs: 100,
            batch_size: 32,
            optimizer: Optimizer::default(),
            seed: 0,
            patience: 20,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FitReport {
    /// Training MSE per epoch.
    pub train_mse: Vec<f64>,
    pub dev_mae: Vec<f64>,
    pub best_epoch: usize,
    pub test_mae: f64,
}

/// Mean absolute error of the first output coordinate.
pub fn mean_abs_error(model: &MasNet, sets: &[LabeledSet]) -> Result<f64> {
    if sets.is_empty() {
        return Err(Error::NoData);
    }
    let errs: Vec<f64> = sets
        .par_iter()
        .map(|e| Ok((model.forward(&e.s)?[0] - e.y).abs()))
        .collect::<Result<_>>()?;
    Ok(errs.iter().sum::<f64>() / sets.len() as f64)
}

/// MSE regression on the first output coordinate, early stopping on dev MAE.
pub fn fit_monotone_function(model: &MasNet, data: &[LabeledSet], cfg: &FitConfig) -> Result<(MasNet, FitReport)> {
    if !(cfg.lr > 0.0) || cfg.batch_size == 0 {
        return Err(Error::invalid("need lr > 0 and batch_size >= 1"));
    }
    let part = |sp: Split| -> Vec<LabeledSet> { data.iter().filter(|e| e.split == sp).cloned().collect() };
    let (train, dev, test) = (part(Split::Train), part(Split::Dev), part(Split::Test));
    if train.is_empty() {
        return Err(Error::NoData);
    }
    let select = if dev.is_empty() { &train } else { &dev };
    let mut current = model.clone();
    let mut params = current.flat();
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.lr, params.len());
    let mut report = FitReport::default();
    let mut best = (mean_abs_error(&current, select)?, current.clone(), 0);
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut derived_rng(cfg.seed, &[epoch as u64]));
        let mut sse = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let parts: Vec<(f64, Vec<f64>)> = chunk
                .par_iter()
                .map(|&i| {
                    let cache = current.forward_cached(&train[i].s)?;
                    let r = cache.output[0] - train[i].y;
                    let mut dout = vec![0.0; cache.output.len()];
                    dout[0] = 2.0 * r;
                    let mut g = current.zeros_like();
                    current.backward_set(&cache, &dout, &mut g);
                    Ok((r * r, g.flat()))
                })
                .collect::<Result<_>>()?;
            let mut grad = vec![0.0; params.len()];
            let scale = 1.0 / chunk.len() as f64;
            for (l, g) in parts {
                sse += l;
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += b * scale);
            }
            if !sse.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            opt.step(&mut params, &grad);
            current.load_flat(&params);
        }
        report.train_mse.push(sse / train.len() as f64);
        let mae = mean_abs_error(&current, select)?;
        report.dev_mae.push(mae);
        if mae < best.0 {
            best = (mae, current.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    report.best_epoch = best.2;
    report.test_mae = mean_abs_error(&best.1, if test.is_empty() { select } else { &test })?;
    Ok((best.1, report))
}
