//! Exact MAS embeddings over a finite ground set `[n]`.
//!
//! Linear candidates are non-negative matrices `W` acting on count vectors,
//! `F(S) = W · onehot(S)`. The refuters only need singleton and union values,
//! so they accept any [`SetEmbedding`].

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::multiset::{
    count_multisets, enumerate_multisets_capped, is_subset, multisets_of_size, Multiset,
    DEFAULT_ENUMERATION_CAP,
};
use crate::seed::rng_from_seed;

/// Anything that maps multisets over `[n]` to vectors of a fixed length.
pub trait SetEmbedding: Sync {
    fn dim(&self) -> usize;
    fn ground_size(&self) -> usize;
    fn embed(&self, s: &Multiset) -> Result<Vec<f64>>;
}

/// Wraps a closure as a [`SetEmbedding`].
pub struct FnEmbedding<F> {
    pub dim: usize,
    pub ground_size: usize,
    pub f: F,
}

impl<F: Fn(&Multiset) -> Vec<f64> + Sync> SetEmbedding for FnEmbedding<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn ground_size(&self) -> usize {
        self.ground_size
    }

    fn embed(&self, s: &Multiset) -> Result<Vec<f64>> {
        if s.ground_size() != self.ground_size {
            return Err(Error::GroundMismatch {
                left: s.ground_size(),
                right: self.ground_size,
            });
        }
        Ok((self.f)(s))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix", into = "RawMatrix")]
pub struct EmbeddingMatrix {
    rows: Vec<Vec<f64>>,
    n: usize,
}

#[derive(Serialize, Deserialize)]
struct RawMatrix {
    m: usize,
    n: usize,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<RawMatrix> for EmbeddingMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        if raw.rows.len() != raw.m {
            return Err(Error::Format(format!(
                "embedding declares m = {} but has {} rows",
                raw.m,
                raw.rows.len()
            )));
        }
        if raw.rows.iter().any(|r| r.len() != raw.n) {
            return Err(Error::Format(format!("embedding rows must have length n = {}", raw.n)));
        }
        EmbeddingMatrix::new(raw.rows)
    }
}

impl From<EmbeddingMatrix> for RawMatrix {
    fn from(e: EmbeddingMatrix) -> Self {
        RawMatrix {
            m: e.rows.len(),
            n: e.n,
            rows: e.rows,
        }
    }
}

impl EmbeddingMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n == 0 {
            return Err(Error::invalid("embedding needs m >= 1 and n >= 1"));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("embedding rows differ in length"));
        }
        if rows.iter().flatten().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("embedding weights must be finite and non-negative"));
        }
        Ok(Self { rows, n })
    }

    /// `m` rows with entries uniform on `[0, 1)`.
    pub fn random<R: Rng + ?Sized>(m: usize, n: usize, rng: &mut R) -> Result<Self> {
        Self::new(
            (0..m)
                .map(|_| (0..n).map(|_| rng.random::<f64>()).collect())
                .collect(),
        )
    }

    pub fn m(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Keeps the first `m` rows.
    pub fn truncated(&self, m: usize) -> Result<Self> {
        Self::new(self.rows.iter().take(m).cloned().collect())
    }

    /// Whether every weight is an integer, in which case evaluation is exact.
    pub fn is_integral(&self) -> bool {
        self.rows.iter().flatten().all(|w| w.fract() == 0.0 && *w < 2f64.powi(40))
    }
}

impl SetEmbedding for EmbeddingMatrix {
    fn dim(&self) -> usize {
        self.m()
    }

    fn ground_size(&self) -> usize {
        self.n
    }

    fn embed(&self, s: &Multiset) -> Result<Vec<f64>> {
        if s.ground_size() != self.n {
            return Err(Error::GroundMismatch {
                left: s.ground_size(),
                right: self.n,
            });
        }
        Ok(self
            .rows
            .iter()
            .map(|row| s.iter().map(|(e, c)| row[e] * f64::from(c)).sum())
            .collect())
    }
}

/// The identity matrix: `F(S)` is the count vector of `S`.
pub fn onehot_mas(n: usize) -> Result<EmbeddingMatrix> {
    EmbeddingMatrix::new(
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect(),
    )
}

/// Coordinatewise `a <= b + slack`.
pub fn dominated(a: &[f64], b: &[f64], slack: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| *x <= y + slack)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// `S ⊆ T` but `F(S) ≰ F(T)`.
    Monotonicity,
    /// `F(S) ≤ F(T)` but `S ⊄ T`.
    Separability,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub s: Multiset,
    pub t: Multiset,
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S = {}, T = {}", self.s, self.t)
    }
}

impl Witness {
    /// Re-evaluates `e` and confirms `F(S) ≤ F(T)` while `S ⊄ T`.
    pub fn is_separability_violation(&self, e: &impl SetEmbedding) -> Result<bool> {
        Ok(dominated(&e.embed(&self.s)?, &e.embed(&self.t)?, 0.0) && !is_subset(&self.s, &self.t)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MasVerdict {
    pub is_mas: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub violation_kind: Option<ViolationKind>,
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    /// Added to the right-hand side of every dominance comparison.
    pub slack: f64,
    pub cap: u128,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            slack: 0.0,
            cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

/// Slack recommended for random real matrices, guarding summation rounding only.
pub const ROUNDING_SLACK: f64 = 1e-12;

pub fn verify_mas(e: &impl SetEmbedding, k: usize) -> Result<MasVerdict> {
    verify_mas_with(e, k, VerifyOptions::default())
}

/// Checks every ordered pair of multisets of cardinality at most `k` and
/// reports the first violation, scanning `S` in enumeration order and `T`
/// within it.
pub fn verify_mas_with(e: &impl SetEmbedding, k: usize, opts: VerifyOptions) -> Result<MasVerdict> {
    let sets = enumerate_multisets_capped(e.ground_size(), k, opts.cap)?;
    let images = sets.iter().map(|s| e.embed(s)).collect::<Result<Vec<_>>>()?;
    let found = (0..sets.len()).into_par_iter().find_map_first(|i| {
        (0..sets.len()).find_map(|j| {
            let sub = is_subset(&sets[i], &sets[j]).expect("same ground");
            let dom = dominated(&images[i], &images[j], opts.slack);
            match (sub, dom) {
                (true, false) => Some((i, j, ViolationKind::Monotonicity)),
                (false, true) => Some((i, j, ViolationKind::Separability)),
                _ => None,
            }
        })
    });
    Ok(match found {
        None => MasVerdict {
            is_mas: true,
            witness: None,
            violation_kind: None,
        },
        Some((i, j, kind)) => MasVerdict {
            is_mas: false,
            witness: Some(Witness {
                s: sets[i].clone(),
                t: sets[j].clone(),
            }),
            violation_kind: Some(kind),
        },
    })
}

/// Pairs `({x}, T)` with `|T| = k` and `x` outside the support of `T`.
pub fn extreme_pairs(n: usize, k: usize) -> Result<Vec<(Multiset, Multiset)>> {
    extreme_pairs_capped(n, k, DEFAULT_ENUMERATION_CAP)
}

pub fn extreme_pairs_capped(n: usize, k: usize, cap: u128) -> Result<Vec<(Multiset, Multiset)>> {
    if k >= n {
        return Err(Error::Precondition(format!("extreme pairs need k < n, got k = {k}, n = {n}")));
    }
    // multisets of size k over n - 1 elements: C(n + k - 2, k)
    let per = if k == 0 {
        1
    } else {
        count_multisets(n - 2, k).unwrap_or(u128::MAX)
    };
    let count = per.saturating_mul(n as u128);
    if count > cap {
        return Err(Error::EnumerationTooLarge { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    for x in 0..n {
        let s = Multiset::singleton(n, x)?;
        let others: Vec<usize> = (0..n).filter(|&v| v != x).collect();
        for t in multisets_of_size(n, others, k) {
            out.push((s.clone(), t));
        }
    }
    Ok(out)
}

fn separated_by_some_row(e: &EmbeddingMatrix, x: usize, t: &Multiset) -> bool {
    e.rows()
        .iter()
        .any(|row| row[x] > t.iter().map(|(v, c)| row[v] * f64::from(c)).sum::<f64>())
}

/// Samples `m × n` matrices with i.i.d. uniform `[0, 1)` entries until every
/// extreme pair is separated by some row. Returns the matrix and the number of
/// attempts used.
pub fn random_projection_mas(
    n: usize,
    k: usize,
    m: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<(EmbeddingMatrix, usize)> {
    if m == 0 {
        return Err(Error::Precondition("m must be at least 1".into()));
    }
    let pairs = extreme_pairs(n, k)?;
    let mut rng = rng_from_seed(seed);
    let mut best: Option<(usize, String, String)> = None;
    for attempt in 1..=max_attempts {
        let e = EmbeddingMatrix::random(m, n, &mut rng)?;
        let mut unseparated = 0;
        let mut first = None;
        for (s, t) in &pairs {
            let x = s.elements()[0];
            if !separated_by_some_row(&e, x, t) {
                unseparated += 1;
                first.get_or_insert((s, t));
            }
        }
        match first {
            None => return Ok((e, attempt)),
            Some((s, t)) => {
                if best.as_ref().is_none_or(|b| unseparated < b.0) {
                    best = Some((unseparated, s.to_string(), t.to_string()));
                }
            }
        }
    }
    let (unseparated, s, t) = best.unwrap_or((0, String::new(), String::new()));
    Err(Error::AttemptsExhausted {
        attempts: max_attempts,
        unseparated,
        s,
        t,
    })
}

/// Number of rows suggested by the randomized construction:
/// `⌈(k+2)^(k+2) · ln n⌉`.
pub fn projection_dim(n: usize, k: usize) -> usize {
    ((k as f64 + 2.0).powi(k as i32 + 2) * (n as f64).ln()).ceil() as usize
}

fn singleton_table(e: &impl SetEmbedding) -> Result<Vec<Vec<f64>>> {
    (0..e.ground_size())
        .map(|v| e.embed(&Multiset::singleton(e.ground_size(), v)?))
        .collect()
}

/// Refutation through maximal singletons: with `m <= n - 2` coordinates,
/// two elements `u1, u2` lie outside the per-coordinate maximisers, and
/// `{u2}` is dominated by `{u1}` plus the maximisers of the coordinates
/// where `u2` beats `u1`.
pub fn refute_maximal_singleton(e: &impl SetEmbedding, k: usize) -> Result<Option<Witness>> {
    let (m, n) = (e.dim(), e.ground_size());
    if m + 2 > n {
        return Ok(None);
    }
    let single = singleton_table(e)?;
    let argmax: Vec<usize> = (0..m)
        .map(|i| {
            (0..n).fold(0, |best, v| if single[v][i] > single[best][i] { v } else { best })
        })
        .collect();
    let mut outside = (0..n).filter(|v| !argmax.contains(v));
    let (mut u1, mut u2) = match (outside.next(), outside.next()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Ok(None),
    };
    let ge = (0..m).filter(|&i| single[u1][i] >= single[u2][i]).count();
    if 2 * ge < m {
        std::mem::swap(&mut u1, &mut u2);
    }
    let mut t = Multiset::singleton(n, u1)?;
    let mut added: Vec<usize> = Vec::new();
    for j in 0..m {
        if single[u1][j] < single[u2][j] && !added.contains(&argmax[j]) {
            added.push(argmax[j]);
            t.insert(argmax[j])?;
        }
    }
    if t.cardinality() > k as u64 {
        return Ok(None);
    }
    let w = Witness {
        s: Multiset::singleton(n, u2)?,
        t,
    };
    Ok(if w.is_separability_violation(e)? { Some(w) } else { None })
}

/// Longest subsequence of `idx` that is monotone in `key`: the longer of the
/// non-decreasing and non-increasing ones, preferring non-decreasing on ties.
/// Ties inside each search go to the earliest positions.
fn longest_monotone(idx: &[usize], key: impl Fn(usize) -> f64) -> Vec<usize> {
    let run = |ok: &dyn Fn(f64, f64) -> bool| -> Vec<usize> {
        let len = idx.len();
        let mut dp = vec![1usize; len];
        let mut prev = vec![usize::MAX; len];
        for i in 0..len {
            for j in 0..i {
                if ok(key(idx[j]), key(idx[i])) && dp[j] + 1 > dp[i] {
                    dp[i] = dp[j] + 1;
                    prev[i] = j;
                }
            }
        }
        let Some(end) = (0..len).max_by(|&a, &b| dp[a].cmp(&dp[b]).then(b.cmp(&a))) else {
            return Vec::new();
        };
        let mut out = Vec::new();
        let mut cur = end;
        loop {
            out.push(idx[cur]);
            if prev[cur] == usize::MAX {
                break;
            }
            cur = prev[cur];
        }
        out.reverse();
        out
    };
    let up = run(&|a, b| a <= b);
    let down = run(&|a, b| a >= b);
    if down.len() > up.len() {
        down
    } else {
        up
    }
}

/// Refutation through repeated monotone-subsequence extraction: order the
/// singletons by their first coordinate, then keep a subsequence monotone in
/// each further coordinate. Any three survivors `v1, v2, v3` have `F({v2})`
/// between the other two in every coordinate, so `{v2}` is dominated by
/// `{v1, v3}`.
pub fn refute_erdos_szekeres(e: &impl SetEmbedding) -> Result<Option<Witness>> {
    let (m, n) = (e.dim(), e.ground_size());
    let single = singleton_table(e)?;
    let mut chain: Vec<usize> = (0..n).collect();
    if m > 0 {
        chain.sort_by(|&a, &b| single[a][0].total_cmp(&single[b][0]).then(a.cmp(&b)));
    }
    for i in 1..m {
        if chain.len() < 3 {
            break;
        }
        chain = longest_monotone(&chain, |v| single[v][i]);
    }
    if chain.len() < 3 {
        return Ok(None);
    }
    let w = Witness {
        s: Multiset::singleton(n, chain[1])?,
        t: Multiset::from_elements(n, &[chain[0], chain[2]])?,
    };
    Ok(if w.is_separability_violation(e)? { Some(w) } else { None })
}

/// MAS embedding of sets of at most one point from `[-1, 1]`:
/// `∅ ↦ (-1, -1)` and `{x} ↦ (-x, x)`.
pub fn degenerate_k1_embedding(x: Option<f64>) -> Result<[f64; 2]> {
    match x {
        None => Ok([-1.0, -1.0]),
        Some(x) if (-1.0..=1.0).contains(&x) => Ok([-x, x]),
        Some(x) => Err(Error::invalid(format!("point {x} lies outside [-1, 1]"))),
    }
}

/// A cardinality that may be infinite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extent {
    Finite(u64),
    Infinite,
}

impl Extent {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim() {
            "inf" | "infinity" | "∞" => Ok(Self::Infinite),
            t => t
                .parse()
                .map(Self::Finite)
                .map_err(|_| Error::invalid(format!("expected an integer or 'inf', got '{t}'"))),
        }
    }
}

impl fmt::Display for Extent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::Infinite => f.write_str("inf"),
        }
    }
}

impl Serialize for Extent {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Finite(v) => serializer.serialize_u64(*v),
            Self::Infinite => serializer.serialize_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
    Ten,
}

impl LogBase {
    pub fn log(self, x: f64) -> f64 {
        match self {
            Self::Natural => x.ln(),
            Self::Two => x.log2(),
            Self::Ten => x.log10(),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "e" | "natural" | "ln" => Ok(Self::Natural),
            "2" | "two" => Ok(Self::Two),
            "10" | "ten" => Ok(Self::Ten),
            t => Err(Error::invalid(format!("unknown log base '{t}', expected e, 2 or 10"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    /// Lower and upper bounds that may differ.
    Bounded,
    /// The smallest dimension is known exactly (`lower == upper`).
    Exact,
    /// No MAS embedding into any finite dimension exists.
    Impossible,
}

/// Bounds on the smallest output dimension of a MAS embedding of multisets of
/// cardinality at most `k` over a ground set of size `n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionBounds {
    pub n: Extent,
    pub k: Extent,
    pub status: BoundStatus,
    pub lower: Option<u64>,
    pub upper: Option<u64>,
    /// `max_{ℓ ∈ [k]} min(n - ℓ, ℓk + 2ℓ - ℓ²)`.
    pub refined_lower: Option<u64>,
    /// The same expression at `ℓ = ⌈(k+2)/2⌉`, when that lies in `[k]`.
    pub refined_at_center: Option<u64>,
    pub log_base: LogBase,
}

fn refined_term(n: u64, k: u64, l: u64) -> u64 {
    let quad = (l * k + 2 * l).saturating_sub(l * l);
    n.saturating_sub(l).min(quad)
}

pub fn dimension_bounds(n: Extent, k: Extent, base: LogBase) -> Result<DimensionBounds> {
    let exact = |v: u64| DimensionBounds {
        n,
        k,
        status: BoundStatus::Exact,
        lower: Some(v),
        upper: Some(v),
        refined_lower: None,
        refined_at_center: None,
        log_base: base,
    };
    match (n, k) {
        (Extent::Finite(0), _) => Err(Error::invalid("ground size must be at least 1")),
        (_, Extent::Finite(0)) => Ok(exact(1)),
        (Extent::Infinite, Extent::Finite(1)) => Ok(exact(2)),
        (Extent::Infinite, _) => Ok(DimensionBounds {
            status: BoundStatus::Impossible,
            ..exact(0)
        })
        .map(|b| DimensionBounds {
            lower: None,
            upper: None,
            ..b
        }),
        (Extent::Finite(n), Extent::Infinite) => Ok(DimensionBounds {
            refined_lower: Some(n),
            ..exact(n)
        }),
        (Extent::Finite(nv), Extent::Finite(kv)) => {
            let two_k = if 2 * kv < nv {
                2 * kv
            } else {
                (2 * kv).min(nv.saturating_sub(2))
            };
            let loglog = if kv >= 2 && nv > 3 {
                ((nv as f64).log(3.0).log2().ceil()).max(0.0) as u64
            } else {
                0
            };
            let lower = two_k.max(loglog).max(1).min(nv);
            let upper = if kv >= nv {
                nv
            } else {
                let c = (kv as f64 + 2.0).powf(kv as f64 + 2.0) * base.log(nv as f64);
                if c.is_finite() && c < nv as f64 {
                    (c.ceil() as u64).max(1)
                } else {
                    nv
                }
            };
            let refined = (1..=kv.min(nv)).map(|l| refined_term(nv, kv, l)).max().unwrap_or(0);
            let centre = kv.div_ceil(2) + 1;
            let at_center = (centre <= kv).then(|| refined_term(nv, kv, centre));
            Ok(DimensionBounds {
                n,
                k,
                status: if lower == upper {
                    BoundStatus::Exact
                } else {
                    BoundStatus::Bounded
                },
                lower: Some(lower),
                upper: Some(upper),
                refined_lower: Some(refined),
                refined_at_center: at_center,
                log_base: base,
            })
        }
    }
}

/// One row of the tabulated monotone extension.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtensionRow {
    pub set: Multiset,
    pub image: Vec<f64>,
    pub target: Vec<f64>,
    pub extended: Vec<f64>,
}

/// A monotone map `M` defined on the image of a MAS embedding by
/// `M(F(S)) = f(S)` and extended by `M(v) = max { M(u) : u ≤ v }`.
#[derive(Clone, Debug, Serialize)]
pub struct MonotoneExtension {
    pub rows: Vec<ExtensionRow>,
}

impl MonotoneExtension {
    /// Coordinatewise maximum of `f` over image points dominated by `v`;
    /// `None` when no image point lies below `v`.
    pub fn eval(&self, v: &[f64]) -> Option<Vec<f64>> {
        let mut acc: Option<Vec<f64>> = None;
        for row in self.rows.iter().filter(|r| dominated(&r.image, v, 0.0)) {
            match &mut acc {
                None => acc = Some(row.target.clone()),
                Some(a) => a.iter_mut().zip(&row.target).for_each(|(x, y)| *x = x.max(*y)),
            }
        }
        acc
    }
}

pub fn monotone_extension_demo(
    e: &impl SetEmbedding,
    k: usize,
    f: impl Fn(&Multiset) -> Vec<f64>,
) -> Result<MonotoneExtension> {
    let verdict = verify_mas(e, k)?;
    if let Some(w) = verdict.witness {
        return Err(Error::NotMas(w.to_string()));
    }
    let sets = enumerate_multisets_capped(e.ground_size(), k, DEFAULT_ENUMERATION_CAP)?;
    let values: Vec<Vec<f64>> = sets.iter().map(&f).collect();
    for (i, s) in sets.iter().enumerate() {
        for (j, t) in sets.iter().enumerate() {
            if is_subset(s, t)? && !dominated(&values[i], &values[j], 0.0) {
                return Err(Error::NotMonotone {
                    s: s.to_string(),
                    t: t.to_string(),
                });
            }
        }
    }
    let mut ext = MonotoneExtension {
        rows: sets
            .iter()
            .zip(&values)
            .map(|(s, v)| {
                Ok(ExtensionRow {
                    set: s.clone(),
                    image: e.embed(s)?,
                    target: v.clone(),
                    extended: Vec::new(),
                })
            })
            .collect::<Result<_>>()?,
    };
    let extended: Vec<Vec<f64>> = ext
        .rows
        .iter()
        .map(|r| ext.eval(&r.image).expect("every image point dominates itself"))
        .collect();
    for (row, m) in ext.rows.iter_mut().zip(extended) {
        if m != row.target {
            return Err(Error::NotMas(format!("extension differs from target at {}", row.set)));
        }
        row.extended = m;
    }
    for a in &ext.rows {
        for b in &ext.rows {
            if dominated(&a.image, &b.image, 0.0) && !dominated(&a.extended, &b.extended, 0.0) {
                return Err(Error::NotMas(format!(
                    "extension not monotone between {} and {}",
                    a.set, b.set
                )));
            }
        }
    }
    Ok(ext)
}
