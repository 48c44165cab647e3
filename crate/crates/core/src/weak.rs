//! Parametric weakly-MAS set functions on point multisets.
//!
//! `F(S; A, b, c)[j] = Σ_{x ∈ S} σ((a_j · x + b_j) / c_j)` is monotone for any
//! non-negative `σ`; with a hat `σ` and random parameters it also separates
//! every non-subset pair with positive probability. This module also holds
//! the counterexamples showing why monotone activations and attention
//! pooling fail.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::activation::{relu, ActivationKind};
use crate::error::{Error, Result};
use crate::multiset::{is_subset_real, sample_unit_sphere, RealMultiset};
use crate::seed::{rng_from_seed, Rng as SeedRng};

fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(p, q)| p * q).sum()
}

/// One output coordinate: direction `a`, offset `b`, scale `c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coordinate {
    pub a: Vec<f64>,
    pub b: f64,
    pub c: f64,
}

impl Coordinate {
    /// `a` uniform on the sphere, `b` uniform on `[-1, 1]`, `c` uniform on `(0, 2]`.
    pub fn sample<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let a = sample_unit_sphere(d, rng);
        let b = rng.random_range(-1.0..=1.0);
        let c = 2.0 * (1.0 - rng.random::<f64>());
        Self { a, b, c }
    }

    /// `Σ σ((a·x + b)/c)` over `points`, summed in the given order.
    pub fn eval(&self, activation: &ActivationKind, points: &[&[f64]]) -> f64 {
        points
            .iter()
            .map(|x| activation.eval((dot(&self.a, x) + self.b) / self.c))
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakMasParams {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub activation: ActivationKind,
}

impl WeakMasParams {
    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn d(&self) -> usize {
        self.a.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, d) = (self.m(), self.d());
        if m == 0 || d == 0 || self.b.len() != m || self.c.len() != m || self.a.iter().any(|r| r.len() != d) {
            return Err(Error::invalid("parameter shapes are inconsistent"));
        }
        if self.a.iter().any(|r| (crate::distance::norm(r) - 1.0).abs() > 1e-9) {
            return Err(Error::invalid("rows of A must have unit norm"));
        }
        if self.b.iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::invalid("entries of b must lie in [-1, 1]"));
        }
        if self.c.iter().any(|v| !(*v > 0.0 && *v <= 2.0)) {
            return Err(Error::invalid("entries of c must lie in (0, 2]"));
        }
        self.activation.validate()
    }

    pub fn coordinate(&self, j: usize) -> Coordinate {
        Coordinate {
            a: self.a[j].clone(),
            b: self.b[j],
            c: self.c[j],
        }
    }
}

/// Draws `m` independent coordinates in dimension `d`. Hat activations are
/// rescaled to support `[0, 1]`.
pub fn sample_params(d: usize, m: usize, activation: ActivationKind, seed: u64) -> Result<WeakMasParams> {
    if d == 0 || m == 0 {
        return Err(Error::invalid("d and m must be at least 1"));
    }
    activation.validate()?;
    let mut rng = rng_from_seed(seed);
    let mut p = WeakMasParams {
        a: Vec::with_capacity(m),
        b: Vec::with_capacity(m),
        c: Vec::with_capacity(m),
        activation: activation.normalized(),
    };
    for _ in 0..m {
        let co = Coordinate::sample(d, &mut rng);
        p.a.push(co.a);
        p.b.push(co.b);
        p.c.push(co.c);
    }
    Ok(p)
}

pub fn eval_weak_mas(p: &WeakMasParams, s: &RealMultiset) -> Result<Vec<f64>> {
    if s.dim() != p.d() {
        return Err(Error::DimMismatch {
            expected: p.d(),
            found: s.dim(),
        });
    }
    let pts = s.sorted_points();
    Ok((0..p.m())
        .map(|j| {
            pts.iter()
                .map(|x| p.activation.eval((dot(&p.a[j], x) + p.b[j]) / p.c[j]))
                .sum()
        })
        .collect())
}

/// Parameters of `x ↦ ReLU(a1 · ReLU(A2 x + b2) + b1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReluMasParams {
    pub a2: Vec<Vec<f64>>,
    pub b2: [f64; 3],
    pub a1: [f64; 3],
    pub b1: f64,
}

impl ReluMasParams {
    /// `A2 = [a; a; a]`, `b2 = [b+1, b-1, b]`, `a1 = [1, 1, -2]`, `b1 = 0`.
    /// This computes the hat on `[-1, 1]` peaking at 0, that is
    /// `TRI((a·x + b + 1) / 2)`.
    pub fn centered_hat(a: &[f64], b: f64) -> Self {
        Self {
            a2: vec![a.to_vec(), a.to_vec(), a.to_vec()],
            b2: [b + 1.0, b - 1.0, b],
            a1: [1.0, 1.0, -2.0],
            b1: 0.0,
        }
    }

    /// Computes `TRI(a·x + b)` through `ReLU(ReLU(2t) + ReLU(2t-2) - ReLU(4t-2))`.
    pub fn tri(a: &[f64], b: f64) -> Self {
        let scale = |s: f64| a.iter().map(|v| s * v).collect::<Vec<_>>();
        Self {
            a2: vec![scale(2.0), scale(2.0), scale(4.0)],
            b2: [2.0 * b, 2.0 * b - 2.0, 4.0 * b - 2.0],
            a1: [1.0, 1.0, -1.0],
            b1: 0.0,
        }
    }

    pub fn d(&self) -> usize {
        self.a2.first().map_or(0, Vec::len)
    }

    pub fn point(&self, x: &[f64]) -> f64 {
        let hidden: f64 = (0..3)
            .map(|r| self.a1[r] * relu(dot(&self.a2[r], x) + self.b2[r]))
            .sum();
        relu(hidden + self.b1)
    }
}

/// `M2(Σ_x ReLU(a1 · ReLU(A2 x + b2) + b1))` with a monotone scalar `M2`.
pub fn eval_relu_mas(p: &ReluMasParams, s: &RealMultiset, m2: impl Fn(f64) -> f64) -> Result<f64> {
    if p.a2.len() != 3 || p.a2.iter().any(|r| r.len() != s.dim()) {
        return Err(Error::DimMismatch {
            expected: p.d(),
            found: s.dim(),
        });
    }
    Ok(m2(s.sorted_points().iter().map(|x| p.point(x)).sum()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Separator {
    pub coordinate: Coordinate,
    pub margin: f64,
    pub draws: usize,
    pub hits: usize,
    pub hit_rate: f64,
}

/// Monte Carlo search for a single coordinate with `F(S) > F(T)`. All
/// `budget` draws are made so the hit rate is recorded; the first hit is
/// returned.
pub fn find_separator(
    s: &RealMultiset,
    t: &RealMultiset,
    activation: ActivationKind,
    budget: usize,
    seed: u64,
) -> Result<Option<Separator>> {
    if is_subset_real(s, t, 0.0)? {
        return Err(Error::Precondition("S is a sub-multiset of T, nothing to separate".into()));
    }
    let act = activation.normalized();
    let (ps, pt) = (s.sorted_points(), t.sorted_points());
    let mut rng = rng_from_seed(seed);
    let mut first: Option<(Coordinate, f64)> = None;
    let mut hits = 0;
    for _ in 0..budget {
        let co = Coordinate::sample(s.dim(), &mut rng);
        let margin = co.eval(&act, &ps) - co.eval(&act, &pt);
        if margin > 0.0 {
            hits += 1;
            first.get_or_insert((co, margin));
        }
    }
    Ok(first.map(|(coordinate, margin)| Separator {
        coordinate,
        margin,
        draws: budget,
        hits,
        hit_rate: hits as f64 / budget as f64,
    }))
}

/// `S = {(x+y)/2}`, `T = {x, y}`: a non-subset pair that no monotone
/// activation can separate.
pub fn midpoint_witness(x: &[f64], y: &[f64]) -> Result<(RealMultiset, RealMultiset)> {
    if x.len() != y.len() {
        return Err(Error::DimMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x == y {
        return Err(Error::invalid("x and y must differ"));
    }
    let z = x.iter().zip(y).map(|(a, b)| (a + b) / 2.0).collect();
    Ok((
        RealMultiset::new(x.len(), vec![z])?,
        RealMultiset::new(x.len(), vec![x.to_vec(), y.to_vec()])?,
    ))
}

/// Counts draws of a single-layer coordinate (`a` Gaussian, `b` uniform on
/// `[-1, 1]`) for which `σ(a·z + b) > σ(a·x + b) + σ(a·y + b)`.
pub fn midpoint_sweep(x: &[f64], y: &[f64], activation: ActivationKind, draws: usize, seed: u64) -> Result<usize> {
    let (s, t) = midpoint_witness(x, y)?;
    let (ps, pt) = (s.sorted_points(), t.sorted_points());
    let mut rng = rng_from_seed(seed);
    let mut violations = 0;
    for _ in 0..draws {
        let co = Coordinate {
            a: (0..x.len()).map(|_| StandardNormal.sample(&mut rng)).collect(),
            b: rng.random_range(-1.0..=1.0),
            c: 1.0,
        };
        if co.eval(&activation, &ps) > co.eval(&activation, &pt) {
            violations += 1;
        }
    }
    Ok(violations)
}

/// Sum-pooled single-head self-attention, `Σ_i Σ_j α_ij v_j` with
/// `α_ij = softmax_j(q_i · k_j)`, `q = k = W x` and `v = W_V x`.
pub fn attention_pool(w_qk: &[Vec<f64>], w_v: &[Vec<f64>], points: &[Vec<f64>]) -> Vec<f64> {
    let apply = |w: &[Vec<f64>], x: &[f64]| -> Vec<f64> { w.iter().map(|r| dot(r, x)).collect() };
    let q: Vec<Vec<f64>> = points.iter().map(|x| apply(w_qk, x)).collect();
    let v: Vec<Vec<f64>> = points.iter().map(|x| apply(w_v, x)).collect();
    let mut out = vec![0.0; w_v.len()];
    for qi in &q {
        let logits: Vec<f64> = q.iter().map(|kj| dot(qi, kj)).collect();
        let top = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logits.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = weights.iter().sum();
        for (w, vj) in weights.iter().zip(&v) {
            for (o, x) in out.iter_mut().zip(vj) {
                *o += w / total * x;
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct AttentionDemo {
    pub w_qk: Vec<Vec<f64>>,
    pub w_v: Vec<Vec<f64>>,
    pub x1: Vec<f64>,
    pub s: RealMultiset,
    pub t: RealMultiset,
    pub coordinate: usize,
    pub f_s: f64,
    pub f_t: f64,
    /// `e^{|q1|²} / (e^{|q1|²} + 1) + 1/2`, the factor by which `v1` is scaled in `F(T)`.
    pub inflation: f64,
}

fn determinant(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .expect("non-empty range");
        if a[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            a.swap(pivot, col);
            det = -det;
        }
        det *= a[col][col];
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    det
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut SeedRng) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| (0..cols).map(|_| StandardNormal.sample(&mut *rng)).collect())
        .collect()
}

/// Builds an attention layer and a point `x1` with a negative value
/// coordinate, then shows that adding the zero vector to `{x1}` lowers that
/// coordinate of the pooled output.
pub fn set_transformer_nonmonotone_demo(d: usize, seed: u64) -> Result<AttentionDemo> {
    if d == 0 {
        return Err(Error::invalid("d must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let w_qk = loop {
        let w = gaussian_matrix(d, d, &mut rng);
        if determinant(&w).abs() > 1e-6 {
            break w;
        }
    };
    let w_v = gaussian_matrix(d, d, &mut rng);
    let mut x1 = loop {
        let x: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let q: f64 = w_qk.iter().map(|r| dot(r, &x).powi(2)).sum();
        let v_zero = w_v.iter().all(|r| dot(r, &x) == 0.0);
        // keep the inflation factor visibly above 1
        if q > 1e-3 && !v_zero {
            break x;
        }
    };
    if w_v.iter().all(|r| dot(r, &x1) >= 0.0) {
        x1.iter_mut().for_each(|v| *v = -*v);
    }
    set_transformer_nonmonotone_with(w_qk, w_v, x1)
}

/// The same construction with caller-chosen weights and point.
pub fn set_transformer_nonmonotone_with(
    w_qk: Vec<Vec<f64>>,
    w_v: Vec<Vec<f64>>,
    x1: Vec<f64>,
) -> Result<AttentionDemo> {
    let d = x1.len();
    if w_qk.len() != d || w_qk.iter().chain(&w_v).any(|r| r.len() != d) {
        return Err(Error::invalid("weight shapes must match the point dimension"));
    }
    let v1: Vec<f64> = w_v.iter().map(|r| dot(r, &x1)).collect();
    let coordinate = v1
        .iter()
        .position(|v| *v < 0.0)
        .ok_or_else(|| Error::invalid("W_V x1 has no negative coordinate"))?;
    let s = RealMultiset::new(d, vec![x1.clone()])?;
    let t = RealMultiset::new(d, vec![x1.clone(), vec![0.0; d]])?;
    let f_s = attention_pool(&w_qk, &w_v, s.points())[coordinate];
    let f_t = attention_pool(&w_qk, &w_v, t.points())[coordinate];
    let q2: f64 = w_qk.iter().map(|r| dot(r, &x1).powi(2)).sum();
    let inflation = 1.0 / (1.0 + (-q2).exp()) + 0.5;
    Ok(AttentionDemo {
        w_qk,
        w_v,
        x1,
        s,
        t,
        coordinate,
        f_s,
        f_t,
        inflation,
    })
}
