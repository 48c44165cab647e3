//! Discrete and point multisets.
//!
//! [`Multiset`] counts elements of a finite ground set `[n]`; [`RealMultiset`]
//! holds points in `R^d` with repetition. Both serialize as sorted JSON arrays:
//! `[[elem, count], ...]` for discrete multisets and `[[x1, ..., xd], ...]` for
//! point multisets (an empty point multiset is written `{"dim": d, "points": []}`
//! so that its dimension survives a round trip).

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distance::{assignment_solve, euclidean, CostMatrix};
use crate::error::{Error, Result};

/// Default upper bound on the number of multisets [`enumerate_multisets`] produces.
pub const DEFAULT_ENUMERATION_CAP: u128 = 2_000_000;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Multiset {
    counts: BTreeMap<usize, u32>,
    ground_size: usize,
}

impl Multiset {
    pub fn empty(ground_size: usize) -> Self {
        Self {
            counts: BTreeMap::new(),
            ground_size,
        }
    }

    /// Builds a multiset from `(element, multiplicity)` pairs. Zero
    /// multiplicities are dropped; repeated elements accumulate.
    pub fn from_counts(
        ground_size: usize,
        pairs: impl IntoIterator<Item = (usize, u32)>,
    ) -> Result<Self> {
        if ground_size == 0 {
            return Err(Error::invalid("ground size must be at least 1"));
        }
        let mut counts = BTreeMap::new();
        for (elem, count) in pairs {
            if elem >= ground_size {
                return Err(Error::invalid(format!(
                    "element {elem} outside ground set of size {ground_size}"
                )));
            }
            if count > 0 {
                *counts.entry(elem).or_insert(0) += count;
            }
        }
        Ok(Self {
            counts,
            ground_size,
        })
    }

    /// Builds a multiset from a list of elements, one entry per copy.
    pub fn from_elements(ground_size: usize, elems: &[usize]) -> Result<Self> {
        Self::from_counts(ground_size, elems.iter().map(|&e| (e, 1)))
    }

    pub fn singleton(ground_size: usize, elem: usize) -> Result<Self> {
        Self::from_counts(ground_size, [(elem, 1)])
    }

    pub fn ground_size(&self) -> usize {
        self.ground_size
    }

    pub fn count(&self, elem: usize) -> u32 {
        self.counts.get(&elem).copied().unwrap_or(0)
    }

    pub fn cardinality(&self) -> u64 {
        self.counts.values().map(|&c| c as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// `(element, multiplicity)` pairs in increasing element order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.counts.iter().map(|(&e, &c)| (e, c))
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.keys().copied()
    }

    /// Elements with repetition, sorted.
    pub fn elements(&self) -> Vec<usize> {
        self.iter()
            .flat_map(|(e, c)| std::iter::repeat_n(e, c as usize))
            .collect()
    }

    /// Count vector `c_S` of length `ground_size`.
    pub fn count_vector(&self) -> Vec<u32> {
        let mut v = vec![0; self.ground_size];
        for (e, c) in self.iter() {
            v[e] = c;
        }
        v
    }

    pub fn insert(&mut self, elem: usize) -> Result<()> {
        if elem >= self.ground_size {
            return Err(Error::invalid(format!(
                "element {elem} outside ground set of size {}",
                self.ground_size
            )));
        }
        *self.counts.entry(elem).or_insert(0) += 1;
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<[u64; 2]> {
        self.iter().map(|(e, c)| [e as u64, c as u64]).collect()
    }

    pub fn from_json(ground_size: usize, value: &serde_json::Value) -> Result<Self> {
        let pairs: Vec<(usize, u32)> = serde_json::from_value(value.clone())?;
        Self::from_counts(ground_size, pairs)
    }
}

impl fmt::Debug for Multiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Multiset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (e, c)) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}:{c}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for Multiset {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_pairs().serialize(serializer)
    }
}

/// `s ⊆ t`: every multiplicity in `s` is at most the one in `t`.
pub fn is_subset(s: &Multiset, t: &Multiset) -> Result<bool> {
    if s.ground_size != t.ground_size {
        return Err(Error::GroundMismatch {
            left: s.ground_size,
            right: t.ground_size,
        });
    }
    Ok(s.iter().all(|(e, c)| c <= t.count(e)))
}

fn binomial(n: u128, k: u128) -> Option<u128> {
    let k = k.min(n.saturating_sub(k));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of multisets over `[n]` with cardinality at most `k`, i.e. `C(n+k, k)`.
pub fn count_multisets(n: usize, k: usize) -> Option<u128> {
    binomial(n as u128 + k as u128, k as u128)
}

/// All multisets over `[n]` of cardinality at most `k`, by cardinality and
/// then lexicographically by sorted element list.
pub fn enumerate_multisets(n: usize, k: usize) -> Result<Vec<Multiset>> {
    enumerate_multisets_capped(n, k, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_multisets_capped(n: usize, k: usize, cap: u128) -> Result<Vec<Multiset>> {
    if n == 0 {
        return Err(Error::invalid("ground size must be at least 1"));
    }
    let count = count_multisets(n, k).unwrap_or(u128::MAX);
    if count > cap {
        return Err(Error::EnumerationTooLarge { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    for size in 0..=k {
        for combo in (0..n).combinations_with_replacement(size) {
            out.push(Multiset::from_elements(n, &combo)?);
        }
    }
    Ok(out)
}

/// Multisets over `[n]` of cardinality exactly `k`, in lexicographic order.
pub(crate) fn multisets_of_size(
    n: usize,
    elems: Vec<usize>,
    k: usize,
) -> impl Iterator<Item = Multiset> {
    elems
        .into_iter()
        .combinations_with_replacement(k)
        .map(move |combo| Multiset::from_elements(n, &combo).expect("elements drawn from ground"))
}

/// A finite list of points in `R^d`, with repetition.
#[derive(Clone, Debug)]
pub struct RealMultiset {
    points: Vec<Vec<f64>>,
    dim: usize,
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl RealMultiset {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        for p in &points {
            if p.len() != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: p.len(),
                });
            }
        }
        Ok(Self { points, dim })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new())
    }

    /// Infers the dimension from the first point.
    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::invalid("cannot infer dimension of an empty point list"))?;
        Self::new(dim, points)
    }

    /// One-dimensional convenience constructor.
    pub fn scalars(values: &[f64]) -> Self {
        Self {
            points: values.iter().map(|&v| vec![v]).collect(),
            dim: 1,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    /// Points in lexicographic order; the canonical summation order.
    pub fn sorted_points(&self) -> Vec<&[f64]> {
        let mut pts: Vec<&[f64]> = self.points.iter().map(Vec::as_slice).collect();
        pts.sort_by(|a, b| lex_cmp(a, b));
        pts
    }

    pub fn canonical(&self) -> Self {
        Self {
            points: self.sorted_points().into_iter().map(<[f64]>::to_vec).collect(),
            dim: self.dim,
        }
    }

    pub fn push(&mut self, point: Vec<f64>) -> Result<()> {
        if point.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: point.len(),
            });
        }
        self.points.push(point);
        Ok(())
    }

    /// Multiset sum `self ⊎ other`.
    pub fn union(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        Ok(Self {
            points,
            dim: self.dim,
        })
    }
}

impl PartialEq for RealMultiset {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.len() == other.len()
            && self
                .sorted_points()
                .iter()
                .zip(other.sorted_points())
                .all(|(a, b)| lex_cmp(a, b).is_eq())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RealMultisetRepr {
    Points(Vec<Vec<f64>>),
    Tagged { dim: usize, points: Vec<Vec<f64>> },
}

impl Serialize for RealMultiset {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let points: Vec<Vec<f64>> = self.sorted_points().into_iter().map(<[f64]>::to_vec).collect();
        if points.is_empty() {
            RealMultisetRepr::Tagged {
                dim: self.dim,
                points,
            }
            .serialize(serializer)
        } else {
            RealMultisetRepr::Points(points).serialize(serializer)
        }
    }
}

impl<'de> Deserialize<'de> for RealMultiset {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = RealMultisetRepr::deserialize(deserializer)?;
        let built = match repr {
            RealMultisetRepr::Points(points) => RealMultiset::from_points(points),
            RealMultisetRepr::Tagged { dim, points } => RealMultiset::new(dim, points),
        };
        built.map_err(serde::de::Error::custom)
    }
}

pub(crate) fn check_dims(s: &RealMultiset, t: &RealMultiset) -> Result<()> {
    if s.dim != t.dim {
        return Err(Error::DimMismatch {
            expected: s.dim,
            found: t.dim,
        });
    }
    Ok(())
}

/// Containment up to a matching tolerance: every point of `s` is matched to
/// a distinct point of `t` within Euclidean distance `tol`.
pub fn is_subset_real(s: &RealMultiset, t: &RealMultiset, tol: f64) -> Result<bool> {
    check_dims(s, t)?;
    if !(tol >= 0.0) {
        return Err(Error::invalid("tolerance must be non-negative"));
    }
    if s.len() > t.len() {
        return Ok(false);
    }
    if s.is_empty() {
        return Ok(true);
    }
    let costs: Vec<Vec<f64>> = s
        .points()
        .iter()
        .map(|x| {
            t.points()
                .iter()
                .map(|y| if euclidean(x, y) <= tol { 0.0 } else { 1.0 })
                .collect()
        })
        .collect();
    let coupling = assignment_solve(&CostMatrix::new(costs)?)?;
    Ok(coupling.total_cost == 0.0)
}

/// The ground set from which point multisets are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroundSpec {
    Finite { n: usize },
    Cube { d: usize, bound: f64 },
    Sphere { d: usize },
}

impl GroundSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GroundSpec::Finite { n } if n < 1 => Err(Error::invalid("finite ground needs n >= 1")),
            GroundSpec::Cube { d, bound } if d < 1 || !(bound > 0.0) => {
                Err(Error::invalid("cube ground needs d >= 1 and bound > 0"))
            }
            GroundSpec::Sphere { d } if d < 2 => Err(Error::invalid("sphere ground needs d >= 2")),
            _ => Ok(()),
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match *self {
            GroundSpec::Finite { .. } => None,
            GroundSpec::Cube { d, .. } | GroundSpec::Sphere { d } => Some(d),
        }
    }

    /// Supremum of the Euclidean norm over the ground set.
    pub fn norm_bound(&self) -> Option<f64> {
        match *self {
            GroundSpec::Finite { .. } => None,
            GroundSpec::Cube { d, bound } => Some(bound * (d as f64).sqrt()),
            GroundSpec::Sphere { .. } => Some(1.0),
        }
    }

    /// Uniform sample from a continuous ground set.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match *self {
            GroundSpec::Finite { .. } => Err(Error::invalid("finite ground has no point sampler")),
            GroundSpec::Cube { d, bound } => {
                Ok((0..d).map(|_| rng.random_range(-bound..=bound)).collect())
            }
            GroundSpec::Sphere { d } => Ok(sample_unit_sphere(d, rng)),
        }
    }

    /// Maps an arbitrary point back into the ground set (clamping for cubes,
    /// radial projection for spheres).
    pub fn project(&self, point: &mut [f64]) {
        match *self {
            GroundSpec::Finite { .. } => {}
            GroundSpec::Cube { bound, .. } => {
                for x in point.iter_mut() {
                    *x = x.clamp(-bound, bound);
                }
            }
            GroundSpec::Sphere { .. } => {
                let norm = crate::distance::norm(point);
                if norm > 0.0 {
                    for x in point.iter_mut() {
                        *x /= norm;
                    }
                }
            }
        }
    }
}

/// Uniform direction on `S^{d-1}` by normalizing a standard Gaussian vector.
pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = crate::distance::norm(&v);
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
