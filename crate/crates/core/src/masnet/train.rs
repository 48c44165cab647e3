use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{ContainmentPair, Dataset};
use super::model::MasNet;
use crate::error::{Error, Result};
use crate::multiset::RealMultiset;
use crate::seed::derived_rng;

/// Which `y = 0` term the hinge loss uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// `min_i [F(S)_i - F(T)_i + δ]₊`, exactly as displayed for the
    /// containment loss. It vanishes as soon as one coordinate has
    /// `F(S)_i ≤ F(T)_i - δ`.
    Verbatim,
    /// `min_i [F(T)_i - F(S)_i + δ]₊`, which vanishes once some coordinate
    /// has `F(S)_i ≥ F(T)_i + δ`, i.e. when the pair is separated.
    Separating,
}

/// Hinge loss and its sparse gradient: `(loss, Some((i, g)))` means
/// `∂loss/∂F(S)_i = g` and `∂loss/∂F(T)_i = -g`.
pub fn hinge_terms(fs: &[f64], ft: &[f64], y: bool, delta: f64, kind: LossKind) -> (f64, Option<(usize, f64)>) {
    let pick = |vals: Vec<f64>, want_max: bool| -> (usize, f64) {
        let mut best = 0;
        for (i, v) in vals.iter().enumerate() {
            if (want_max && *v > vals[best]) || (!want_max && *v < vals[best]) {
                best = i;
            }
        }
        (best, vals[best])
    };
    let diff = |sign: f64| -> Vec<f64> { fs.iter().zip(ft).map(|(s, t)| sign * (s - t) + delta).collect() };
    let (i, u, g) = match (y, kind) {
        (true, _) => {
            let (i, u) = pick(diff(1.0), true);
            (i, u, 1.0)
        }
        (false, LossKind::Verbatim) => {
            let (i, u) = pick(diff(1.0), false);
            (i, u, 1.0)
        }
        (false, LossKind::Separating) => {
            let (i, u) = pick(diff(-1.0), false);
            (i, u, -1.0)
        }
    };
    if u > 0.0 {
        (u, Some((i, g)))
    } else {
        (0.0, None)
    }
}

/// Containment hinge loss with the `y = 0` term exactly as displayed.
pub fn hinge_loss(model: &MasNet, pair: &ContainmentPair, delta: f64) -> Result<f64> {
    hinge_loss_with(model, pair, delta, LossKind::Verbatim)
}

pub fn hinge_loss_with(model: &MasNet, pair: &ContainmentPair, delta: f64, kind: LossKind) -> Result<f64> {
    let fs = model.forward(&pair.s)?;
    let ft = model.forward(&pair.t)?;
    Ok(hinge_terms(&fs, &ft, pair.y, delta, kind).0)
}

/// Loss of one pair; its gradient is added to `grad`.
pub fn pair_gradient(model: &MasNet, pair: &ContainmentPair, delta: f64, kind: LossKind, grad: &mut MasNet) -> Result<f64> {
    let cs = model.forward_cached(&pair.s)?;
    let ct = model.forward_cached(&pair.t)?;
    let (loss, active) = hinge_terms(&cs.output, &ct.output, pair.y, delta, kind);
    if let Some((i, g)) = active {
        let mut d = vec![0.0; cs.output.len()];
        d[i] = g;
        model.backward_set(&cs, &d, grad);
        d[i] = -g;
        model.backward_set(&ct, &d, grad);
    }
    Ok(loss)
}

/// Summed loss and summed gradient over `batch`. Pairs are processed in
/// parallel and reduced in batch order.
pub fn backward(model: &MasNet, batch: &[ContainmentPair], delta: f64, kind: LossKind) -> Result<(f64, Vec<f64>)> {
    let parts: Vec<(f64, Vec<f64>)> = batch
        .par_iter()
        .map(|p| {
            let mut g = model.zeros_like();
            let loss = pair_gradient(model, p, delta, kind, &mut g)?;
            Ok((loss, g.flat()))
        })
        .collect::<Result<_>>()?;
    let mut total = 0.0;
    let mut grad = vec![0.0; model.num_params()];
    for (loss, g) in parts {
        total += loss;
        grad.iter_mut().zip(g).for_each(|(a, b)| *a += b);
    }
    Ok((total, grad))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Self::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

pub(crate) struct OptimizerState {
    kind: Optimizer,
    lr: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl OptimizerState {
    pub(crate) fn new(kind: Optimizer, lr: f64, n: usize) -> Self {
        Self {
            kind,
            lr,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub(crate) fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        match self.kind {
            Optimizer::Sgd => params.iter_mut().zip(grad).for_each(|(p, g)| *p -= self.lr * g),
            Optimizer::Adam { beta1, beta2, eps } => {
                self.t += 1;
                let c1 = 1.0 - beta1.powi(self.t);
                let c2 = 1.0 - beta2.powi(self.t);
                for i in 0..params.len() {
                    self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * grad[i];
                    self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * grad[i] * grad[i];
                    params[i] -= self.lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + eps);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Margin `δ` used during training.
    pub delta: f64,
    /// Slack used when classifying for dev accuracy.
    pub delta_eval: f64,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Epochs without dev-accuracy improvement before stopping.
    pub patience: usize,
    pub loss: LossKind,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            delta_eval: 0.0,
            lr: 1e-3,
            epochs: 50,
            batch_size: 32,
            optimizer: Optimizer::default(),
            seed: 0,
            patience: 10,
            loss: LossKind::Separating,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::invalid("training margin delta must be positive"));
        }
        if !(self.lr > 0.0) || self.batch_size == 0 {
            return Err(Error::invalid("need lr > 0 and batch_size >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_loss: f64,
    pub dev_accuracy: f64,
    /// Whether the monotonicity probe held after this epoch.
    pub monotone_ok: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

fn mean_loss(model: &MasNet, pairs: &[ContainmentPair], cfg: &TrainConfig) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let losses: Vec<f64> = pairs
        .par_iter()
        .map(|p| hinge_loss_with(model, p, cfg.delta, cfg.loss))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / pairs.len() as f64)
}

/// `F(S) ≤ F(T) + 1e-9` for `S` made of the first half of each probe target.
fn monotone_probe(model: &MasNet, probes: &[ContainmentPair]) -> Result<bool> {
    for p in probes {
        let half = p.t.points()[..p.t.len() / 2].to_vec();
        let s = RealMultiset::new(p.t.dim(), half)?;
        let (fs, ft) = (model.forward(&s)?, model.forward(&p.t)?);
        if fs.iter().zip(&ft).any(|(a, b)| *a > b + 1e-9) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Mini-batch training with early stopping on dev accuracy; returns the best
/// model seen. Batch gradients are averaged.
pub fn train(model: &MasNet, data: &Dataset, cfg: &TrainConfig) -> Result<(MasNet, History)> {
    cfg.validate()?;
    let mut history = History::default();
    if cfg.epochs == 0 {
        return Ok((model.clone(), history));
    }
    if data.train.is_empty() {
        return Err(Error::NoData);
    }
    let select = if data.dev.is_empty() { &data.train } else { &data.dev };
    let mut current = model.clone();
    let mut params = current.flat();
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.lr, params.len());
    let mut best = (evaluate_containment(&current, select, cfg.delta_eval)?.accuracy, current.clone(), 0);
    let mut since_best = 0;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let probes: Vec<ContainmentPair> = select.iter().take(8).cloned().collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut derived_rng(cfg.seed, &[epoch as u64]));
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<ContainmentPair> = chunk.iter().map(|&i| data.train[i].clone()).collect();
            let (loss, mut grad) = backward(&current, &batch, cfg.delta, cfg.loss)?;
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            epoch_loss += loss;
            opt.step(&mut params, &grad);
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            current.load_flat(&params);
        }
        let eval = evaluate_containment(&current, select, cfg.delta_eval)?;
        history.epochs.push(EpochRecord {
            epoch,
            train_loss: epoch_loss / data.train.len() as f64,
            dev_loss: mean_loss(&current, &data.dev, cfg)?,
            dev_accuracy: eval.accuracy,
            monotone_ok: monotone_probe(&current, &probes)?,
        });
        if eval.accuracy > best.0 {
            best = (eval.accuracy, current.clone(), epoch);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    history.best_epoch = best.2;
    Ok((best.1, history))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

/// Predicts `S ⊆ T` when `F(S) ≤ F(T) + δ_eval` in every coordinate.
pub fn predict(model: &MasNet, s: &RealMultiset, t: &RealMultiset, delta_eval: f64) -> Result<bool> {
    let (fs, ft) = (model.forward(s)?, model.forward(t)?);
    Ok(fs.iter().zip(&ft).all(|(a, b)| *a <= b + delta_eval))
}

pub fn evaluate_containment(model: &MasNet, pairs: &[ContainmentPair], delta_eval: f64) -> Result<Evaluation> {
    if pairs.is_empty() {
        return Err(Error::NoData);
    }
    let preds: Vec<bool> = pairs
        .par_iter()
        .map(|p| predict(model, &p.s, &p.t, delta_eval))
        .collect::<Result<_>>()?;
    let mut e = Evaluation::default();
    for (p, pred) in pairs.iter().zip(preds) {
        match (p.y, pred) {
            (true, true) => e.tp += 1,
            (false, true) => e.fp += 1,
            (false, false) => e.tn += 1,
            (true, false) => e.fn_ += 1,
        }
    }
    e.accuracy = (e.tp + e.tn) as f64 / pairs.len() as f64;
    // noise-free positives are true sub-multisets, so monotonicity rules out misses
    if delta_eval >= 0.0 && pairs.iter().all(|p| p.noise_std == 0.0) {
        assert_eq!(e.fn_, 0, "false negative on a noise-free positive pair");
    }
    Ok(e)
}
