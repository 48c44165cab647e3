//! Monte Carlo experiments on random weakly-MAS coordinates.
//!
//! Pairs are produced by "graded containment": draw `T`, take `S ⊆ T`, then
//! displace a random non-empty subset of `S` by a scheduled distance `ε` and
//! project back into the ground set. Control pairs skip the displacement.
//! Every (pair, experiment, m) cell draws from its own derived stream, so
//! reports do not depend on the thread count.

use std::fmt::Write as _;

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::activation::{relu, ActivationKind, HatSpec};
use crate::distance::{d_as, default_padding, padded_wasserstein_k};
use crate::error::{Error, Result};
use crate::multiset::{is_subset_real, GroundSpec, RealMultiset};
use crate::seed::{derived_rng, Rng as SeedRng};
use crate::stats::{spearman, wilson, Spearman, Z95};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Hat activation with `(a·x + b)/c` coordinates on a cube.
    HatCube,
    /// `ReLU(a·x + b)` coordinates on the unit sphere.
    ReluSphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub ground: GroundSpec,
    /// Largest multiset cardinality.
    pub k: usize,
    pub m_list: Vec<usize>,
    pub num_pairs: usize,
    /// Extra pairs with `S ⊆ T`.
    pub num_controls: usize,
    pub num_param_draws: usize,
    pub seed: u64,
    pub activation: ActivationKind,
    pub scenario: Scenario,
    /// Displacements are spread evenly over `[epsilon_min, epsilon_max]`.
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    /// Padding point for the padded Wasserstein distance; defaults to
    /// `(3 · norm bound, 0, ..., 0)`.
    pub padding: Option<Vec<f64>>,
    /// Draw every graded pair with `|S| = |T| = k`, so that the displacement
    /// is the only varying ingredient. Otherwise sizes are uniform on `1..=k`.
    pub full_size_pairs: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            ground: GroundSpec::Cube { d: 3, bound: 1.0 },
            k: 4,
            m_list: vec![1, 2, 4, 8, 16],
            num_pairs: 20,
            num_controls: 5,
            num_param_draws: 100_000,
            seed: 0,
            activation: ActivationKind::Hat(HatSpec::unit()),
            scenario: Scenario::HatCube,
            epsilon_min: 0.05,
            epsilon_max: 1.0,
            padding: None,
            full_size_pairs: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.ground.validate()?;
        self.activation.validate()?;
        if self.k < 1 || self.num_pairs < 1 || self.num_param_draws < 1 {
            return Err(Error::invalid("k, num_pairs and num_param_draws must be at least 1"));
        }
        if self.m_list.is_empty() || self.m_list.contains(&0) {
            return Err(Error::invalid("m_list must be non-empty with entries >= 1"));
        }
        if !(self.epsilon_min > 0.0 && self.epsilon_min <= self.epsilon_max) {
            return Err(Error::invalid("need 0 < epsilon_min <= epsilon_max"));
        }
        match (self.scenario, &self.ground) {
            (Scenario::HatCube, GroundSpec::Cube { .. }) | (Scenario::ReluSphere, GroundSpec::Sphere { .. }) => {}
            (Scenario::HatCube, _) => return Err(Error::invalid("hat_cube needs a cube ground set")),
            (Scenario::ReluSphere, _) => return Err(Error::invalid("relu_sphere needs a sphere ground set")),
        }
        if let Some(z) = &self.padding {
            if Some(z.len()) != self.ground.dim() {
                return Err(Error::invalid("padding point has the wrong dimension"));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.ground.dim().unwrap_or(0)
    }

    fn padding_point(&self) -> Vec<f64> {
        self.padding
            .clone()
            .unwrap_or_else(|| default_padding(self.dim(), self.ground.norm_bound().unwrap_or(1.0)))
    }

    fn epsilon(&self, i: usize) -> f64 {
        if self.num_pairs <= 1 {
            return self.epsilon_min;
        }
        let t = i as f64 / (self.num_pairs - 1) as f64;
        self.epsilon_min + t * (self.epsilon_max - self.epsilon_min)
    }
}

// Stream tags for derived seeds.
const PAIRS: u64 = 1;
const CONTROLS: u64 = 2;
const DECAY: u64 = 3;
const SCALAR: u64 = 4;
const SWEEP: u64 = 5;

#[derive(Clone, Debug, Serialize)]
pub struct LabPair {
    pub index: usize,
    pub control: bool,
    pub epsilon: f64,
    pub s: RealMultiset,
    pub t: RealMultiset,
}

fn random_direction(d: usize, rng: &mut SeedRng) -> Vec<f64> {
    crate::multiset::sample_unit_sphere(d, rng)
}

fn draw_nested(cfg: &ExperimentConfig, full: bool, rng: &mut SeedRng) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let (t_size, s_size) = if full {
        (cfg.k, cfg.k)
    } else {
        let t = rng.random_range(1..=cfg.k);
        (t, rng.random_range(1..=t))
    };
    let t: Vec<Vec<f64>> = (0..t_size)
        .map(|_| cfg.ground.sample_point(rng))
        .collect::<Result<_>>()?;
    let s = sample_indices(rng, t_size, s_size)
        .into_iter()
        .map(|i| t[i].clone())
        .collect();
    Ok((s, t))
}

/// Graded-containment pairs followed by the control pairs.
pub fn generate_pairs(cfg: &ExperimentConfig) -> Result<Vec<LabPair>> {
    cfg.validate()?;
    let d = cfg.dim();
    let mut out = Vec::with_capacity(cfg.num_pairs + cfg.num_controls);
    for i in 0..cfg.num_pairs {
        let mut rng = derived_rng(cfg.seed, &[PAIRS, i as u64]);
        let epsilon = cfg.epsilon(i);
        let (s, t) = loop {
            let (mut s, t) = draw_nested(cfg, cfg.full_size_pairs, &mut rng)?;
            let moved = rng.random_range(1..=s.len());
            for idx in sample_indices(&mut rng, s.len(), moved) {
                let u = random_direction(d, &mut rng);
                let p = &mut s[idx];
                p.iter_mut().zip(&u).for_each(|(x, du)| *x += epsilon * du);
                cfg.ground.project(p);
            }
            let s = RealMultiset::new(d, s)?;
            let t = RealMultiset::new(d, t)?;
            if !is_subset_real(&s, &t, 0.0)? {
                break (s, t);
            }
        };
        out.push(LabPair {
            index: i,
            control: false,
            epsilon,
            s,
            t,
        });
    }
    for i in 0..cfg.num_controls {
        let mut rng = derived_rng(cfg.seed, &[CONTROLS, i as u64]);
        let (s, t) = draw_nested(cfg, false, &mut rng)?;
        out.push(LabPair {
            index: cfg.num_pairs + i,
            control: true,
            epsilon: 0.0,
            s: RealMultiset::new(d, s)?,
            t: RealMultiset::new(d, t)?,
        });
    }
    Ok(out)
}

/// Draws single coordinates and evaluates them on flattened point lists.
struct CoordinateSampler {
    d: usize,
    activation: ActivationKind,
    relu_sphere: bool,
}

impl CoordinateSampler {
    fn new(cfg: &ExperimentConfig) -> Self {
        Self {
            d: cfg.dim(),
            activation: cfg.activation.normalized(),
            relu_sphere: cfg.scenario == Scenario::ReluSphere,
        }
    }

    /// Fills `a` with a uniform unit direction and returns `(b, c)`.
    fn draw(&self, rng: &mut SeedRng, a: &mut [f64]) -> (f64, f64) {
        loop {
            for v in a.iter_mut() {
                *v = StandardNormal.sample(rng);
            }
            let n = crate::distance::norm(a);
            if n > 1e-12 {
                a.iter_mut().for_each(|v| *v /= n);
                break;
            }
        }
        let b = rng.random_range(-1.0..=1.0);
        if self.relu_sphere {
            (b, 1.0)
        } else {
            (b, 2.0 * (1.0 - rng.random::<f64>()))
        }
    }

    fn value(&self, a: &[f64], b: f64, c: f64, flat: &[f64]) -> f64 {
        flat.chunks_exact(self.d)
            .map(|x| {
                let t = x.iter().zip(a).map(|(p, q)| p * q).sum::<f64>() + b;
                if self.relu_sphere {
                    relu(t)
                } else {
                    self.activation.eval(t / c)
                }
            })
            .sum()
    }
}

fn flatten(m: &RealMultiset) -> Vec<f64> {
    m.sorted_points().into_iter().flatten().copied().collect()
}

/// Expected positive part and absolute value of `F(S) - F(T)` for one coordinate.
fn scalar_moments(cfg: &ExperimentConfig, pair: &LabPair) -> (f64, f64) {
    let sampler = CoordinateSampler::new(cfg);
    let (fs, ft) = (flatten(&pair.s), flatten(&pair.t));
    let mut rng = derived_rng(cfg.seed, &[SCALAR, pair.index as u64]);
    let mut a = vec![0.0; sampler.d];
    let (mut plus, mut abs) = (0.0, 0.0);
    for _ in 0..cfg.num_param_draws {
        let (b, c) = sampler.draw(&mut rng, &mut a);
        let diff = sampler.value(&a, b, c, &fs) - sampler.value(&a, b, c, &ft);
        plus += diff.max(0.0);
        abs += diff.abs();
    }
    let n = cfg.num_param_draws as f64;
    (plus / n, abs / n)
}

/// Failure counts: draws of `m` coordinates with `F(S) ≤ F(T)` in all of them.
fn failures(cfg: &ExperimentConfig, pair: &LabPair, m: usize) -> u64 {
    let sampler = CoordinateSampler::new(cfg);
    let (fs, ft) = (flatten(&pair.s), flatten(&pair.t));
    let mut rng = derived_rng(cfg.seed, &[DECAY, pair.index as u64, m as u64]);
    let mut a = vec![0.0; sampler.d];
    let mut count = 0;
    for _ in 0..cfg.num_param_draws {
        let dominated = (0..m).all(|_| {
            let (b, c) = sampler.draw(&mut rng, &mut a);
            sampler.value(&a, b, c, &fs) <= sampler.value(&a, b, c, &ft)
        });
        count += u64::from(dominated);
    }
    count
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayRow {
    pub m: usize,
    pub failures: u64,
    pub draws: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// `p̂(1)^m` with the interval `[lo(1)^m, hi(1)^m]`.
    pub predicted: f64,
    pub predicted_lo: f64,
    pub predicted_hi: f64,
    /// Whether the interval for `p̂(m)` meets the propagated interval.
    pub agrees: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct PairReport {
    pub pair: usize,
    pub control: bool,
    pub epsilon: f64,
    pub s: RealMultiset,
    pub t: RealMultiset,
    pub d_as: f64,
    pub w_k: f64,
    pub e_plus: f64,
    pub e_abs: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub decay: Vec<DecayRow>,
}

fn base_report(cfg: &ExperimentConfig, pair: &LabPair, z: &[f64]) -> Result<PairReport> {
    let (e_plus, e_abs) = scalar_moments(cfg, pair);
    Ok(PairReport {
        pair: pair.index,
        control: pair.control,
        epsilon: pair.epsilon,
        s: pair.s.clone(),
        t: pair.t.clone(),
        d_as: d_as(&pair.s, &pair.t)?,
        w_k: padded_wasserstein_k(&pair.s, &pair.t, cfg.k, z)?,
        e_plus,
        e_abs,
        ratio: None,
        decay: Vec::new(),
    })
}

fn reports(cfg: &ExperimentConfig, pairs: &[LabPair]) -> Result<Vec<PairReport>> {
    let z = cfg.padding_point();
    pairs.par_iter().map(|p| base_report(cfg, p, &z)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SeparationReport {
    pub config: ExperimentConfig,
    pub pairs: Vec<PairReport>,
    /// Every non-control `(pair, m)` cell agrees with `p̂(1)^m`.
    pub decay_agreement: bool,
    /// Rank correlation of `d_as` with `p̂(1)` over non-control pairs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spearman_d_as_p1: Option<Spearman>,
}

/// Failure probability of `m` random coordinates, for every `m` in the config.
pub fn run_separation_experiment(cfg: &ExperimentConfig) -> Result<SeparationReport> {
    let pairs = generate_pairs(cfg)?;
    let mut out = reports(cfg, &pairs)?;
    let mut ms = cfg.m_list.clone();
    if !ms.contains(&1) {
        ms.insert(0, 1);
    }
    let cells: Vec<(usize, usize)> = (0..pairs.len())
        .flat_map(|p| ms.iter().map(move |&m| (p, m)))
        .collect();
    let counts: Vec<u64> = cells.par_iter().map(|&(p, m)| failures(cfg, &pairs[p], m)).collect();
    let draws = cfg.num_param_draws as u64;
    for (report, chunk) in out.iter_mut().zip(counts.chunks(ms.len())) {
        let single = chunk[ms.iter().position(|&m| m == 1).expect("m = 1 present")];
        let (lo1, hi1) = wilson(single, draws, Z95);
        let p1 = single as f64 / draws as f64;
        report.decay = ms
            .iter()
            .zip(chunk)
            .filter(|(m, _)| cfg.m_list.contains(m))
            .map(|(&m, &f)| {
                let (ci_lo, ci_hi) = wilson(f, draws, Z95);
                let e = m as i32;
                let (pl, ph) = (lo1.powi(e), hi1.powi(e));
                DecayRow {
                    m,
                    failures: f,
                    draws,
                    p_hat: f as f64 / draws as f64,
                    ci_lo,
                    ci_hi,
                    predicted: p1.powi(e),
                    predicted_lo: pl,
                    predicted_hi: ph,
                    agrees: ci_lo <= ph && pl <= ci_hi,
                }
            })
            .collect();
        if !cfg.m_list.contains(&1) {
            // keep p̂(1) available for the rank statistic
            report.decay.insert(
                0,
                DecayRow {
                    m: 1,
                    failures: single,
                    draws,
                    p_hat: p1,
                    ci_lo: lo1,
                    ci_hi: hi1,
                    predicted: p1,
                    predicted_lo: lo1,
                    predicted_hi: hi1,
                    agrees: true,
                },
            );
        }
    }
    let real: Vec<&PairReport> = out.iter().filter(|r| !r.control).collect();
    let decay_agreement = real.iter().all(|r| r.decay.iter().all(|d| d.agrees));
    let spearman_d_as_p1 = (real.len() >= 3).then(|| {
        let x: Vec<f64> = real.iter().map(|r| r.d_as).collect();
        let y: Vec<f64> = real.iter().map(|r| r.decay[0].p_hat).collect();
        spearman(&x, &y)
    });
    Ok(SeparationReport {
        config: cfg.clone(),
        pairs: out,
        decay_agreement,
        spearman_d_as_p1,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct HolderReport {
    pub config: ExperimentConfig,
    pub pairs: Vec<PairReport>,
    /// Largest `c` with `Ê ≥ c · d_as²` on every non-control pair.
    pub fitted_c: Option<f64>,
    pub spearman: Spearman,
    pub all_positive: bool,
    pub controls_zero: bool,
}

fn holder_summary(cfg: &ExperimentConfig, pairs: Vec<PairReport>) -> HolderReport {
    let real: Vec<&PairReport> = pairs.iter().filter(|r| !r.control).collect();
    let fitted_c = real
        .iter()
        .filter(|r| r.d_as > 0.0)
        .map(|r| r.e_plus / (r.d_as * r.d_as))
        .min_by(f64::total_cmp);
    let x: Vec<f64> = real.iter().map(|r| r.e_plus).collect();
    let y: Vec<f64> = real.iter().map(|r| r.d_as).collect();
    HolderReport {
        config: cfg.clone(),
        spearman: spearman(&x, &y),
        all_positive: real.iter().all(|r| r.e_plus > 0.0),
        controls_zero: pairs.iter().filter(|r| r.control).all(|r| r.e_plus == 0.0 && r.d_as == 0.0),
        fitted_c,
        pairs,
    }
}

/// `Ê[(F(S) - F(T))₊]` against `d_as(S, T)` for single hat coordinates.
pub fn run_holder_experiment(cfg: &ExperimentConfig) -> Result<HolderReport> {
    if cfg.scenario != Scenario::HatCube {
        return Err(Error::invalid("the Hölder experiment uses the hat_cube scenario"));
    }
    let pairs = generate_pairs(cfg)?;
    Ok(holder_summary(cfg, reports(cfg, &pairs)?))
}

/// The same measurement for `ReLU(a·x + b)` coordinates on the sphere; only
/// positivity and the rank trend are checked.
pub fn run_sphere_relu_experiment(cfg: &ExperimentConfig) -> Result<HolderReport> {
    if cfg.scenario != Scenario::ReluSphere {
        return Err(Error::invalid("the sphere experiment uses the relu_sphere scenario"));
    }
    let pairs = generate_pairs(cfg)?;
    Ok(holder_summary(cfg, reports(cfg, &pairs)?))
}

/// Ratios below this padded distance are not reported.
pub const MIN_RATIO_DISTANCE: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct LipschitzReport {
    pub config: ExperimentConfig,
    pub pairs: Vec<PairReport>,
    pub max_ratio: Option<f64>,
}

/// `Ê|F(S) - F(T)|` against the padded Wasserstein distance.
pub fn run_lipschitz_experiment(cfg: &ExperimentConfig) -> Result<LipschitzReport> {
    let pairs = generate_pairs(cfg)?;
    let mut out = reports(cfg, &pairs)?;
    for r in &mut out {
        r.ratio = (r.w_k >= MIN_RATIO_DISTANCE).then(|| r.e_abs / r.w_k);
    }
    let max_ratio = out.iter().filter_map(|r| r.ratio).max_by(f64::total_cmp);
    Ok(LipschitzReport {
        config: cfg.clone(),
        pairs: out,
        max_ratio,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub epsilon: f64,
    pub mean_w_k: f64,
    pub mean_e_abs: f64,
    pub ratio: f64,
}

/// Perturbs every point of `bases` random `k`-sets by `ε` along fixed random
/// directions and reports mean distance, mean `Ê|ΔF|` and their ratio per `ε`.
pub fn lipschitz_perturbation_sweep(cfg: &ExperimentConfig, bases: usize, epsilons: &[f64]) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let d = cfg.dim();
    let z = cfg.padding_point();
    let mut sets = Vec::with_capacity(bases);
    for i in 0..bases {
        let mut rng = derived_rng(cfg.seed, &[SWEEP, i as u64]);
        let t: Vec<Vec<f64>> = (0..cfg.k).map(|_| cfg.ground.sample_point(&mut rng)).collect::<Result<_>>()?;
        let dirs: Vec<Vec<f64>> = (0..cfg.k).map(|_| random_direction(d, &mut rng)).collect();
        sets.push((t, dirs));
    }
    epsilons
        .iter()
        .map(|&eps| {
            let rows: Vec<(f64, f64)> = sets
                .par_iter()
                .enumerate()
                .map(|(i, (t, dirs))| {
                    let s: Vec<Vec<f64>> = t
                        .iter()
                        .zip(dirs)
                        .map(|(p, u)| {
                            let mut q: Vec<f64> = p.iter().zip(u).map(|(x, du)| x + eps * du).collect();
                            cfg.ground.project(&mut q);
                            q
                        })
                        .collect();
                    let pair = LabPair {
                        index: i,
                        control: false,
                        epsilon: eps,
                        s: RealMultiset::new(d, s)?,
                        t: RealMultiset::new(d, t.clone())?,
                    };
                    let w = padded_wasserstein_k(&pair.s, &pair.t, cfg.k, &z)?;
                    Ok((w, scalar_moments(cfg, &pair).1))
                })
                .collect::<Result<_>>()?;
            let n = rows.len() as f64;
            let mean_w_k = rows.iter().map(|r| r.0).sum::<f64>() / n;
            let mean_e_abs = rows.iter().map(|r| r.1).sum::<f64>() / n;
            Ok(SweepRow {
                epsilon: eps,
                mean_w_k,
                mean_e_abs,
                ratio: if mean_w_k > 0.0 { mean_e_abs / mean_w_k } else { 0.0 },
            })
        })
        .collect()
}

pub const CSV_COLUMNS: &str = "pair,m,control,d_as,W_k,p_hat,ci_lo,ci_hi,e_plus,e_abs";

/// One row per `(pair, m)`; pairs without decay rows get a single row with
/// the `m`, `p_hat` and interval columns left empty. The first line echoes
/// the configuration.
pub fn to_csv(cfg: &ExperimentConfig, pairs: &[PairReport]) -> String {
    let mut out = String::new();
    let header = serde_json::to_string(cfg).expect("config serializes");
    let _ = writeln!(out, "# config: {header}");
    let _ = writeln!(out, "{CSV_COLUMNS}");
    for r in pairs {
        if r.decay.is_empty() {
            let _ = writeln!(
                out,
                "{},,{},{},{},,,,{},{}",
                r.pair, r.control, r.d_as, r.w_k, r.e_plus, r.e_abs
            );
        }
        for d in &r.decay {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.pair, d.m, r.control, r.d_as, r.w_k, d.p_hat, d.ci_lo, d.ci_hi, r.e_plus, r.e_abs
            );
        }
    }
    out
}
