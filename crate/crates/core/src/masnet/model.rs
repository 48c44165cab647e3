use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::activation::{hat_grad, hat_eval, relu, tri_derivative, tri_eval, HatSpec};
use crate::error::{Error, Result};
use crate::multiset::RealMultiset;
use crate::seed::rng_from_seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    ReluMas,
    HatMas,
    TriMas,
}

impl Variant {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "relu_mas" | "relu" => Ok(Self::ReluMas),
            "hat_mas" | "hat" => Ok(Self::HatMas),
            "tri_mas" | "tri" => Ok(Self::TriMas),
            t => Err(Error::invalid(format!("unknown variant '{t}', expected relu_mas, hat_mas or tri_mas"))),
        }
    }
}

/// How `β > 0` is obtained from the raw parameter `β₀`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaParam {
    /// `β = |β₀|`.
    Abs,
    /// `β = ELU(β₀; υ) + υ`.
    Elu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Outer {
    Identity,
    /// Layers with weights `|W|`, ReLU between layers, linear output.
    Monotone { hidden: Vec<usize>, out_dim: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub d: usize,
    pub m: usize,
    /// Widths of the ReLU hidden layers of the inner map; empty gives a
    /// single affine layer.
    pub hidden: Vec<usize>,
    pub variant: Variant,
    pub outer: Outer,
    pub beta_param: BetaParam,
    pub upsilon: f64,
    /// Sigmoid temperature for `γ = sigmoid(τ γ₀)`.
    pub tau: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Self::new(4, 16, Variant::HatMas)
    }
}

impl Architecture {
    /// One hidden layer of width `4m`, identity outer map.
    pub fn new(d: usize, m: usize, variant: Variant) -> Self {
        Self {
            d,
            m,
            hidden: vec![4 * m],
            variant,
            outer: Outer::Identity,
            beta_param: BetaParam::Elu,
            upsilon: 0.01,
            tau: 1.0,
        }
    }

    pub fn with_hidden(mut self, hidden: Vec<usize>) -> Self {
        self.hidden = hidden;
        self
    }

    pub fn with_outer(mut self, outer: Outer) -> Self {
        self.outer = outer;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 || self.hidden.contains(&0) {
            return Err(Error::invalid("layer widths must be at least 1"));
        }
        if let Outer::Monotone { hidden, out_dim } = &self.outer {
            if *out_dim == 0 || hidden.contains(&0) {
                return Err(Error::invalid("outer layer widths must be at least 1"));
            }
        }
        if !(self.upsilon > 0.0) || !(self.tau > 0.0) {
            return Err(Error::invalid("upsilon and tau must be positive"));
        }
        Ok(())
    }

    pub fn out_dim(&self) -> usize {
        match &self.outer {
            Outer::Identity => self.m,
            Outer::Monotone { out_dim, .. } => *out_dim,
        }
    }
}

/// Row-major affine layer `z = W h + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            w: vec![0.0; rows * cols],
            b: vec![0.0; rows],
        }
    }

    /// Uniform fan-in initialisation: weights in `±sqrt(6/fan_in)`, biases in `±1/sqrt(fan_in)`.
    fn init<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let wb = (6.0 / cols as f64).sqrt();
        let bb = 1.0 / (cols as f64).sqrt();
        Self {
            rows,
            cols,
            w: (0..rows * cols).map(|_| rng.random_range(-wb..wb)).collect(),
            b: (0..rows).map(|_| rng.random_range(-bb..bb)).collect(),
        }
    }

    fn apply(&self, h: &[f64], abs: bool, out: &mut Vec<f64>) {
        out.clear();
        for r in 0..self.rows {
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            let dot: f64 = if abs {
                row.iter().zip(h).map(|(w, x)| w.abs() * x).sum()
            } else {
                row.iter().zip(h).map(|(w, x)| w * x).sum()
            };
            out.push(dot + self.b[r]);
        }
    }

    /// Accumulates parameter gradients for upstream `dz` and input `h`, and
    /// returns `dh` when requested.
    fn backward(&self, h: &[f64], dz: &[f64], abs: bool, grad: &mut Dense, want_dh: bool) -> Vec<f64> {
        let mut dh = if want_dh { vec![0.0; self.cols] } else { Vec::new() };
        for r in 0..self.rows {
            let g = dz[r];
            if g == 0.0 {
                continue;
            }
            grad.b[r] += g;
            let row = &self.w[r * self.cols..(r + 1) * self.cols];
            let grow = &mut grad.w[r * self.cols..(r + 1) * self.cols];
            for c in 0..self.cols {
                let (w_eff, dw) = if abs {
                    let sign = if row[c] >= 0.0 { 1.0 } else { -1.0 };
                    (row[c].abs(), sign)
                } else {
                    (row[c], 1.0)
                };
                grow[c] += g * h[c] * dw;
                if want_dh {
                    dh[c] += g * w_eff;
                }
            }
        }
        dh
    }
}

/// Raw hat parameters; the usable spec is derived through the reparameterisation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HatParam {
    pub alpha: f64,
    pub beta0: f64,
    pub gamma0: f64,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MasNet {
    pub arch: Architecture,
    pub inner: Vec<Dense>,
    /// One per output coordinate for the hat variant, empty otherwise.
    pub hats: Vec<HatParam>,
    pub outer: Vec<Dense>,
}

/// Intermediate values for one point.
struct PointCache {
    /// Inputs to each inner layer (`x`, then hidden activations).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each inner layer.
    pre: Vec<Vec<f64>>,
}

pub(crate) struct SetCache {
    points: Vec<PointCache>,
    pooled: Vec<f64>,
    outer_inputs: Vec<Vec<f64>>,
    outer_pre: Vec<Vec<f64>>,
    pub(crate) output: Vec<f64>,
}

impl MasNet {
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = rng_from_seed(seed);
        let mut widths = vec![arch.d];
        widths.extend(&arch.hidden);
        widths.push(arch.m);
        let inner = widths.windows(2).map(|w| Dense::init(w[1], w[0], &mut rng)).collect();
        let hats = if arch.variant == Variant::HatMas {
            let alpha = Normal::new(0.0, 1.0).expect("valid normal");
            let beta = Normal::new(1.0, 0.1).expect("valid normal");
            (0..arch.m)
                .map(|_| HatParam {
                    alpha: alpha.sample(&mut rng),
                    beta0: beta.sample(&mut rng),
                    gamma0: 0.0,
                })
                .collect()
        } else {
            Vec::new()
        };
        let outer = match &arch.outer {
            Outer::Identity => Vec::new(),
            Outer::Monotone { hidden, out_dim } => {
                let mut w = vec![arch.m];
                w.extend(hidden);
                w.push(*out_dim);
                w.windows(2).map(|p| Dense::init(p[1], p[0], &mut rng)).collect()
            }
        };
        Ok(Self { arch, inner, hats, outer })
    }

    /// A structurally identical model with every parameter zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            arch: self.arch.clone(),
            inner: self.inner.iter().map(|l| Dense::zeros(l.rows, l.cols)).collect(),
            hats: vec![
                HatParam {
                    alpha: 0.0,
                    beta0: 0.0,
                    gamma0: 0.0
                };
                self.hats.len()
            ],
            outer: self.outer.iter().map(|l| Dense::zeros(l.rows, l.cols)).collect(),
        }
    }

    pub fn d(&self) -> usize {
        self.arch.d
    }

    pub fn out_dim(&self) -> usize {
        self.arch.out_dim()
    }

    fn beta(&self, beta0: f64) -> (f64, f64) {
        match self.arch.beta_param {
            BetaParam::Abs => (beta0.abs(), if beta0 >= 0.0 { 1.0 } else { -1.0 }),
            BetaParam::Elu => {
                let u = self.arch.upsilon;
                if beta0 > 0.0 {
                    (beta0 + u, 1.0)
                } else {
                    (u * beta0.exp(), u * beta0.exp())
                }
            }
        }
    }

    fn gamma(&self, gamma0: f64) -> (f64, f64) {
        // keep γ strictly inside (0, 1) once the sigmoid saturates
        let g = sigmoid(self.arch.tau * gamma0).clamp(1e-9, 1.0 - 1e-9);
        (g, self.arch.tau * g * (1.0 - g))
    }

    /// Effective hat specs, one per output coordinate.
    pub fn hat_specs(&self) -> Vec<HatSpec> {
        self.hats
            .iter()
            .map(|h| HatSpec {
                alpha: h.alpha,
                beta: self.beta(h.beta0).0,
                gamma: self.gamma(h.gamma0).0,
            })
            .collect()
    }

    fn activate(&self, j: usize, z: f64, specs: &[HatSpec]) -> f64 {
        match self.arch.variant {
            Variant::HatMas => hat_eval(&specs[j], z),
            Variant::TriMas => tri_eval(z),
            Variant::ReluMas => relu(z),
        }
    }

    fn point_forward(&self, x: &[f64]) -> PointCache {
        let mut inputs = Vec::with_capacity(self.inner.len());
        let mut pre = Vec::with_capacity(self.inner.len());
        let mut h = x.to_vec();
        for (l, layer) in self.inner.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.rows);
            layer.apply(&h, false, &mut z);
            let next = if l + 1 < self.inner.len() {
                z.iter().map(|v| relu(*v)).collect()
            } else {
                Vec::new()
            };
            inputs.push(std::mem::replace(&mut h, next));
            pre.push(z);
        }
        PointCache { inputs, pre }
    }

    fn check_dim(&self, s: &RealMultiset) -> Result<()> {
        if s.dim() != self.arch.d {
            return Err(Error::DimMismatch {
                expected: self.arch.d,
                found: s.dim(),
            });
        }
        Ok(())
    }

    pub(crate) fn forward_cached(&self, s: &RealMultiset) -> Result<SetCache> {
        self.check_dim(s)?;
        let specs = self.hat_specs();
        let points: Vec<PointCache> = s.sorted_points().iter().map(|x| self.point_forward(x)).collect();
        let mut pooled = vec![0.0; self.arch.m];
        for p in &points {
            let z = p.pre.last().expect("at least one inner layer");
            for (j, acc) in pooled.iter_mut().enumerate() {
                *acc += self.activate(j, z[j], &specs);
            }
        }
        let mut outer_inputs = Vec::with_capacity(self.outer.len());
        let mut outer_pre = Vec::with_capacity(self.outer.len());
        let mut h = pooled.clone();
        for (l, layer) in self.outer.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.rows);
            layer.apply(&h, true, &mut z);
            let next = if l + 1 < self.outer.len() {
                z.iter().map(|v| relu(*v)).collect()
            } else {
                z.clone()
            };
            outer_inputs.push(std::mem::replace(&mut h, next));
            outer_pre.push(z);
        }
        Ok(SetCache {
            points,
            pooled,
            outer_inputs,
            outer_pre,
            output: h,
        })
    }

    /// `M2(Σ_x σ(M1(x)))`, summed in sorted point order.
    pub fn forward(&self, s: &RealMultiset) -> Result<Vec<f64>> {
        Ok(self.forward_cached(s)?.output)
    }

    /// Adds the gradient of `dout · output` to `grad`.
    pub(crate) fn backward_set(&self, cache: &SetCache, dout: &[f64], grad: &mut MasNet) {
        let mut d = dout.to_vec();
        for l in (0..self.outer.len()).rev() {
            if l + 1 < self.outer.len() {
                for (g, z) in d.iter_mut().zip(&cache.outer_pre[l]) {
                    if *z < 0.0 {
                        *g = 0.0;
                    }
                }
            }
            d = self.outer[l].backward(&cache.outer_inputs[l], &d, true, &mut grad.outer[l], true);
        }
        let dpooled = d;
        debug_assert_eq!(dpooled.len(), cache.pooled.len());
        let specs = self.hat_specs();
        let reparam: Vec<(f64, f64)> = self
            .hats
            .iter()
            .map(|h| (self.beta(h.beta0).1, self.gamma(h.gamma0).1))
            .collect();
        let last = self.inner.len() - 1;
        for p in &cache.points {
            let z = &p.pre[last];
            let mut dz: Vec<f64> = Vec::with_capacity(z.len());
            for (j, &zj) in z.iter().enumerate() {
                let up = dpooled[j];
                let local = match self.arch.variant {
                    Variant::HatMas => {
                        let g = hat_grad(&specs[j], zj);
                        if up != 0.0 {
                            let (db, dg) = reparam[j];
                            grad.hats[j].alpha += up * g.dalpha;
                            grad.hats[j].beta0 += up * g.dbeta * db;
                            grad.hats[j].gamma0 += up * g.dgamma * dg;
                        }
                        g.dx
                    }
                    Variant::TriMas => tri_derivative(zj),
                    Variant::ReluMas => {
                        if zj >= 0.0 {
                            1.0
                        } else {
                            0.0
                        }
                    }
                };
                dz.push(up * local);
            }
            for l in (0..self.inner.len()).rev() {
                let dh = self.inner[l].backward(&p.inputs[l], &dz, false, &mut grad.inner[l], l > 0);
                if l > 0 {
                    dz = dh
                        .iter()
                        .zip(&p.pre[l - 1])
                        .map(|(g, z)| if *z >= 0.0 { *g } else { 0.0 })
                        .collect();
                }
            }
        }
    }

    /// All parameters in a fixed order: inner layers, hat parameters, outer layers.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.inner {
            out.extend(&l.w);
            out.extend(&l.b);
        }
        for h in &self.hats {
            out.extend([h.alpha, h.beta0, h.gamma0]);
        }
        for l in &self.outer {
            out.extend(&l.w);
            out.extend(&l.b);
        }
        out
    }

    pub fn load_flat(&mut self, p: &[f64]) {
        let mut it = p.iter().copied();
        let mut fill = |v: &mut [f64]| v.iter_mut().for_each(|x| *x = it.next().expect("parameter count"));
        for l in &mut self.inner {
            fill(&mut l.w);
            fill(&mut l.b);
        }
        for h in &mut self.hats {
            let mut t = [0.0; 3];
            fill(&mut t);
            *h = HatParam {
                alpha: t[0],
                beta0: t[1],
                gamma0: t[2],
            };
        }
        for l in &mut self.outer {
            fill(&mut l.w);
            fill(&mut l.b);
        }
    }

    pub fn num_params(&self) -> usize {
        self.flat().len()
    }

    /// Piece indices of every kinked operation on `s`; equal signatures mean
    /// the model is smooth between the two parameter states.
    pub fn activation_signature(&self, s: &RealMultiset) -> Result<Vec<i8>> {
        let cache = self.forward_cached(s)?;
        let specs = self.hat_specs();
        let mut sig = Vec::new();
        for p in &cache.points {
            for (l, z) in p.pre.iter().enumerate() {
                let last = l + 1 == p.pre.len();
                for (j, &v) in z.iter().enumerate() {
                    sig.push(match (last, self.arch.variant) {
                        (true, Variant::HatMas) => {
                            let sp = &specs[j];
                            let u = v - sp.alpha;
                            if u < 0.0 {
                                0
                            } else if u < sp.gamma * sp.beta {
                                1
                            } else if u < sp.beta {
                                2
                            } else {
                                3
                            }
                        }
                        (true, Variant::TriMas) => {
                            if v < 0.0 {
                                0
                            } else if v < 0.5 {
                                1
                            } else if v < 1.0 {
                                2
                            } else {
                                3
                            }
                        }
                        _ => i8::from(v >= 0.0),
                    });
                }
            }
        }
        for z in cache.outer_pre.iter().take(cache.outer_pre.len().saturating_sub(1)) {
            sig.extend(z.iter().map(|v| i8::from(*v >= 0.0)));
        }
        for l in &self.outer {
            sig.extend(l.w.iter().map(|w| i8::from(*w >= 0.0)));
        }
        if self.arch.beta_param == BetaParam::Elu {
            sig.extend(self.hats.iter().map(|h| i8::from(h.beta0 > 0.0)));
        } else {
            sig.extend(self.hats.iter().map(|h| i8::from(h.beta0 >= 0.0)));
        }
        Ok(sig)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        model.arch.validate()?;
        let fresh = Self::new(model.arch.clone(), 0)?;
        if fresh.num_params() != model.num_params()
            || fresh.inner.iter().zip(&model.inner).any(|(a, b)| a.rows != b.rows || a.cols != b.cols)
        {
            return Err(Error::Format("checkpoint shapes do not match its architecture".into()));
        }
        Ok(model)
    }

    /// SHA-256 of the JSON checkpoint, hex encoded.
    pub fn checkpoint_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_set(rng: &mut crate::seed::Rng, n: usize, d: usize) -> RealMultiset {
        RealMultiset::new(d, (0..n).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()).collect()).unwrap()
    }

    #[test]
    fn empty_set_maps_to_outer_of_zero() {
        let arch = Architecture::new(2, 3, Variant::HatMas).with_outer(Outer::Monotone {
            hidden: vec![4],
            out_dim: 2,
        });
        let net = MasNet::new(arch, 1).unwrap();
        let out = net.forward(&RealMultiset::empty(2).unwrap()).unwrap();
        let mut expect = vec![0.0; 3];
        for (l, layer) in net.outer.iter().enumerate() {
            let mut z = Vec::new();
            layer.apply(&expect, true, &mut z);
            expect = if l + 1 < net.outer.len() { z.iter().map(|v| relu(*v)).collect() } else { z };
        }
        assert_eq!(out, expect);
    }

    #[test]
    fn identity_tri_single_point() {
        let arch = Architecture::new(1, 1, Variant::TriMas).with_hidden(vec![]);
        let mut net = MasNet::new(arch, 0).unwrap();
        net.inner[0].w = vec![1.0];
        net.inner[0].b = vec![0.0];
        assert_eq!(net.forward(&RealMultiset::scalars(&[0.5])).unwrap(), vec![1.0]);
    }

    #[test]
    fn forward_is_monotone_in_the_set() {
        let mut rng = rng_from_seed(2);
        for variant in [Variant::HatMas, Variant::ReluMas, Variant::TriMas] {
            let arch = Architecture::new(3, 8, variant).with_outer(Outer::Monotone {
                hidden: vec![5],
                out_dim: 3,
            });
            let net = MasNet::new(arch, 4).unwrap();
            for _ in 0..200 {
                let s = random_set(&mut rng, 3, 3);
                let extra = random_set(&mut rng, 2, 3);
                let t = s.union(&extra).unwrap();
                let (fs, ft) = (net.forward(&s).unwrap(), net.forward(&t).unwrap());
                assert!(fs.iter().zip(&ft).all(|(a, b)| *a <= b + 1e-9));
            }
        }
    }

    #[test]
    fn flat_round_trip_and_hash() {
        let net = MasNet::new(Architecture::new(2, 4, Variant::HatMas), 3).unwrap();
        let mut other = net.zeros_like();
        other.load_flat(&net.flat());
        assert_eq!(other, net);
        let text = net.to_json();
        assert_eq!(MasNet::from_json(&text).unwrap(), net);
        assert_eq!(net.checkpoint_hash().len(), 64);
        assert_ne!(net.checkpoint_hash(), MasNet::new(Architecture::new(2, 4, Variant::HatMas), 4).unwrap().checkpoint_hash());
    }

    #[test]
    fn reparameterised_hats_are_valid() {
        let mut net = MasNet::new(Architecture::new(2, 4, Variant::HatMas), 3).unwrap();
        net.hats[0].beta0 = -50.0;
        net.hats[1].gamma0 = 40.0;
        for s in net.hat_specs() {
            s.validate().unwrap();
        }
    }

    #[test]
    fn permutation_invariant() {
        let mut rng = rng_from_seed(6);
        let net = MasNet::new(Architecture::new(2, 6, Variant::HatMas), 1).unwrap();
        let s = random_set(&mut rng, 5, 2);
        let rev = RealMultiset::new(2, s.points().iter().rev().cloned().collect()).unwrap();
        assert_eq!(net.forward(&s).unwrap(), net.forward(&rev).unwrap());
    }
}
