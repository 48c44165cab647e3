//! Min-cost assignment and the containment distances built on it.
//!
//! [`d_as`] is the asymmetric distance from `S` to the closest same-size
//! sub-multiset of `T` under the earth mover's cost; it vanishes exactly when
//! `S ⊆ T`. [`padded_wasserstein_k`] pads both multisets with a far point to a
//! common size `k` and matches them, which gives a symmetric metric.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::multiset::{check_dims, RealMultiset};

/// Euclidean norm, scaled so that tiny but non-zero vectors never round to 0.
pub fn norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&diff)
}

#[derive(Clone, Debug)]
pub struct CostMatrix {
    costs: Vec<Vec<f64>>,
    cols: usize,
}

impl CostMatrix {
    pub fn new(costs: Vec<Vec<f64>>) -> Result<Self> {
        let cols = costs.first().map_or(0, Vec::len);
        for row in &costs {
            if row.len() != cols {
                return Err(Error::invalid("cost matrix rows differ in length"));
            }
            if row.iter().any(|c| !c.is_finite() || *c < 0.0) {
                return Err(Error::invalid("costs must be finite and non-negative"));
            }
        }
        Ok(Self { costs, cols })
    }

    /// Pairwise Euclidean distances between the points of `s` (rows) and `t` (columns).
    pub fn euclidean(s: &RealMultiset, t: &RealMultiset) -> Result<Self> {
        check_dims(s, t)?;
        let costs = s
            .points()
            .iter()
            .map(|x| t.points().iter().map(|y| euclidean(x, y)).collect())
            .collect();
        Ok(Self {
            costs,
            cols: t.len(),
        })
    }

    pub fn rows(&self) -> usize {
        self.costs.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.costs[row][col]
    }
}

/// An injective map from rows to columns.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Coupling {
    pub map: Vec<usize>,
    pub total_cost: f64,
}

struct Hungarian {
    assignment: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
}

/// Shortest-augmenting-path Hungarian method with potentials, for
/// `rows <= cols`. Potentials are 1-based as in the classic formulation.
fn hungarian(cost: impl Fn(usize, usize) -> f64, n: usize, m: usize) -> Hungarian {
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=m {
        if p[j] > 0 {
            assignment[p[j] - 1] = j - 1;
        }
    }
    Hungarian { assignment, u, v }
}

fn optimum(c: &CostMatrix, rows: &[usize], cols: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let h = hungarian(|i, j| c.get(rows[i], cols[j]), rows.len(), cols.len());
    h.assignment
        .iter()
        .enumerate()
        .map(|(i, &j)| c.get(rows[i], cols[j]))
        .sum()
}

/// Exact minimum-cost injective assignment of rows to columns.
///
/// Among optimal assignments (costs equal within `1e-9` relative) the
/// lexicographically smallest map is returned.
pub fn assignment_solve(c: &CostMatrix) -> Result<Coupling> {
    let (n, m) = (c.rows(), c.cols());
    if n > m {
        return Err(Error::PadOrSwap { rows: n, cols: m });
    }
    if n == 0 {
        return Ok(Coupling {
            map: Vec::new(),
            total_cost: 0.0,
        });
    }
    let h = hungarian(|i, j| c.get(i, j), n, m);
    let best: f64 = h.assignment.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum();
    let eps = 1e-9 * best.abs().max(1.0);

    // Any optimal assignment only uses edges that are tight under the
    // optimal potentials, so a row with a single tight edge is forced.
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (0..m)
                .filter(|&j| c.get(i, j) - h.u[i + 1] - h.v[j + 1] <= eps)
                .collect()
        })
        .collect();
    if tight.iter().all(|t| t.len() == 1) {
        return Ok(Coupling {
            map: h.assignment,
            total_cost: best,
        });
    }

    let mut map = Vec::with_capacity(n);
    let mut used = vec![false; m];
    let mut fixed = 0.0;
    for i in 0..n {
        let rest_rows: Vec<usize> = (i + 1..n).collect();
        let mut chosen = None;
        for &j in &tight[i] {
            if used[j] {
                continue;
            }
            let rest_cols: Vec<usize> = (0..m).filter(|&q| !used[q] && q != j).collect();
            let total = fixed + c.get(i, j) + optimum(c, &rest_rows, &rest_cols);
            if total <= best + eps {
                chosen = Some(j);
                break;
            }
        }
        // The tight set always contains the Hungarian choice; fall back to it
        // only if rounding rejected every candidate.
        let j = chosen.unwrap_or(h.assignment[i]);
        used[j] = true;
        fixed += c.get(i, j);
        map.push(j);
    }
    Ok(Coupling {
        total_cost: fixed,
        map,
    })
}

/// Asymmetric containment distance: the minimum over injective couplings of
/// `Σ ||x_i - y_τ(i)||`. Requires `|S| <= |T|`.
pub fn d_as(s: &RealMultiset, t: &RealMultiset) -> Result<f64> {
    Ok(d_as_coupling(s, t)?.total_cost)
}

pub fn d_as_coupling(s: &RealMultiset, t: &RealMultiset) -> Result<Coupling> {
    check_dims(s, t)?;
    if s.len() > t.len() {
        return Err(Error::invalid(format!(
            "d_as needs |S| <= |T|, got {} > {}",
            s.len(),
            t.len()
        )));
    }
    assignment_solve(&CostMatrix::euclidean(s, t)?)
}

/// Padding point `(3 * bound, 0, ..., 0)` for ground sets of norm at most `bound`.
pub fn default_padding(dim: usize, bound: f64) -> Vec<f64> {
    let mut z = vec![0.0; dim];
    if dim > 0 {
        z[0] = 3.0 * bound;
    }
    z
}

/// Wasserstein distance after padding both multisets to size `k` with copies of `z`.
pub fn padded_wasserstein_k(
    s: &RealMultiset,
    t: &RealMultiset,
    k: usize,
    z: &[f64],
) -> Result<f64> {
    check_dims(s, t)?;
    if z.len() != s.dim() {
        return Err(Error::DimMismatch {
            expected: s.dim(),
            found: z.len(),
        });
    }
    if s.len() > k || t.len() > k {
        return Err(Error::invalid(format!(
            "cardinality exceeds k = {k}: |S| = {}, |T| = {}",
            s.len(),
            t.len()
        )));
    }
    let pad = |m: &RealMultiset| -> Vec<Vec<f64>> {
        let mut pts = m.points().to_vec();
        pts.resize(k, z.to_vec());
        pts
    };
    let (ps, pt) = (pad(s), pad(t));
    let costs = ps
        .iter()
        .map(|x| pt.iter().map(|y| euclidean(x, y)).collect())
        .collect();
    Ok(assignment_solve(&CostMatrix::new(costs)?)?.total_cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiset::is_subset_real;
    use crate::seed::rng_from_seed;
    use rand::Rng;

    /// Exhaustive search over all injections, lexicographic order.
    fn brute_force(c: &CostMatrix) -> (f64, Vec<usize>) {
        fn rec(
            c: &CostMatrix,
            row: usize,
            used: &mut Vec<bool>,
            cur: &mut Vec<usize>,
            acc: f64,
            best: &mut (f64, Vec<usize>),
        ) {
            if row == c.rows() {
                if best.0.is_infinite() || acc < best.0 - 1e-12 * best.0.abs().max(1.0) {
                    *best = (acc, cur.clone());
                }
                return;
            }
            for j in 0..c.cols() {
                if used[j] {
                    continue;
                }
                used[j] = true;
                cur.push(j);
                rec(c, row + 1, used, cur, acc + c.get(row, j), best);
                cur.pop();
                used[j] = false;
            }
        }
        let mut best = (f64::INFINITY, Vec::new());
        rec(c, 0, &mut vec![false; c.cols()], &mut Vec::new(), 0.0, &mut best);
        best
    }

    #[test]
    fn assignment_examples() {
        let c = CostMatrix::new(vec![vec![1.0, 3.0]]).unwrap();
        let a = assignment_solve(&c).unwrap();
        assert_eq!(a.map, vec![0]);
        assert_eq!(a.total_cost, 1.0);

        let c = CostMatrix::new(vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let a = assignment_solve(&c).unwrap();
        assert_eq!(a.map, vec![0, 1]);
        assert_eq!(a.total_cost, 2.0);
    }

    #[test]
    fn assignment_rejects_tall_matrices() {
        let c = CostMatrix::new(vec![vec![1.0], vec![2.0]]).unwrap();
        let err = assignment_solve(&c).unwrap_err();
        assert!(err.to_string().contains("pad or swap"));
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut rng = rng_from_seed(11);
        for trial in 0..1000 {
            let n = rng.random_range(1..=4);
            let m = rng.random_range(n..=6);
            let costs = (0..n)
                .map(|_| (0..m).map(|_| rng.random_range(0.0..10.0)).collect())
                .collect();
            let c = CostMatrix::new(costs).unwrap();
            let got = assignment_solve(&c).unwrap();
            let (best, _) = brute_force(&c);
            assert!((got.total_cost - best).abs() <= 1e-9, "trial {trial}");
            let direct: f64 = got.map.iter().enumerate().map(|(i, &j)| c.get(i, j)).sum();
            assert!((direct - got.total_cost).abs() <= 1e-12);
        }
    }

    #[test]
    fn ties_resolve_to_lexicographically_smallest_map() {
        let mut rng = rng_from_seed(12);
        for _ in 0..300 {
            let n = rng.random_range(1..=4);
            let m = rng.random_range(n..=6);
            // small integer costs force many ties
            let costs = (0..n)
                .map(|_| (0..m).map(|_| rng.random_range(0..3) as f64).collect())
                .collect();
            let c = CostMatrix::new(costs).unwrap();
            let got = assignment_solve(&c).unwrap();
            let (best, lex_first) = brute_force(&c);
            assert_eq!(got.total_cost, best);
            assert_eq!(got.map, lex_first);
        }
    }

    #[test]
    fn d_as_examples() {
        let s = RealMultiset::scalars(&[0.0]);
        let t = RealMultiset::scalars(&[1.0, 3.0]);
        assert_eq!(d_as(&s, &t).unwrap(), 1.0);
        assert_eq!(d_as(&t, &t).unwrap(), 0.0);
        let s = RealMultiset::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let t = RealMultiset::new(2, vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![5.0, 5.0]]).unwrap();
        assert_eq!(d_as(&s, &t).unwrap(), 0.0);
        assert!(d_as(&t, &s).is_err());
    }

    #[test]
    fn d_as_is_asymmetric_and_monotone_in_t() {
        let s = RealMultiset::scalars(&[0.0, 1.0]);
        let t = RealMultiset::scalars(&[0.0, 1.0, 2.0]);
        assert_eq!(d_as(&s, &t).unwrap(), 0.0);
        assert!(padded_wasserstein_k(&t, &s, 3, &[3.0]).unwrap() > 0.0);

        let mut rng = rng_from_seed(5);
        for _ in 0..200 {
            let pts = |rng: &mut crate::seed::Rng, n: usize| {
                RealMultiset::new(2, (0..n).map(|_| vec![rng.random(), rng.random()]).collect())
                    .unwrap()
            };
            let s = pts(&mut rng, 2);
            let t = pts(&mut rng, 3);
            let y = pts(&mut rng, 1);
            let bigger = t.union(&y).unwrap();
            assert!(d_as(&s, &bigger).unwrap() <= d_as(&s, &t).unwrap() + 1e-12);
        }
    }

    #[test]
    fn d_as_zero_iff_exact_subset() {
        let mut rng = rng_from_seed(8);
        for _ in 0..300 {
            let t: Vec<Vec<f64>> = (0..rng.random_range(1..=6))
                .map(|_| vec![rng.random_range(0..3) as f64, rng.random_range(0..3) as f64])
                .collect();
            let s: Vec<Vec<f64>> = (0..rng.random_range(0..=t.len().min(4)))
                .map(|_| vec![rng.random_range(0..3) as f64, rng.random_range(0..3) as f64])
                .collect();
            let s = RealMultiset::new(2, s).unwrap();
            let t = RealMultiset::new(2, t).unwrap();
            let zero = d_as(&s, &t).unwrap() == 0.0;
            assert_eq!(zero, is_subset_real(&s, &t, 0.0).unwrap());
        }
    }

    #[test]
    fn padded_wasserstein_examples() {
        let x = vec![0.2, -0.1];
        let y = vec![0.5, 0.4];
        let z = default_padding(2, 1.0);
        let s = RealMultiset::new(2, vec![x.clone()]).unwrap();
        let t = RealMultiset::new(2, vec![x.clone(), y.clone()]).unwrap();
        assert_eq!(padded_wasserstein_k(&t, &t, 2, &z).unwrap(), 0.0);
        // brute force over the two matchings of {x, z} with {x, y}
        let m1 = euclidean(&x, &x) + euclidean(&z, &y);
        let m2 = euclidean(&x, &y) + euclidean(&z, &x);
        let expect = m1.min(m2);
        assert!((expect - euclidean(&y, &z)).abs() < 1e-15);
        assert!((padded_wasserstein_k(&s, &t, 2, &z).unwrap() - expect).abs() < 1e-12);
        assert!(padded_wasserstein_k(&t, &s, 1, &z).is_err());
    }

    #[test]
    fn padded_wasserstein_is_symmetric() {
        let mut rng = rng_from_seed(9);
        for _ in 0..100 {
            let mk = |rng: &mut crate::seed::Rng| {
                let n = rng.random_range(0..=4);
                RealMultiset::new(3, (0..n).map(|_| (0..3).map(|_| rng.random_range(-0.5..0.5)).collect()).collect())
                    .unwrap()
            };
            let (s, t) = (mk(&mut rng), mk(&mut rng));
            let z = default_padding(3, 1.0);
            let a = padded_wasserstein_k(&s, &t, 4, &z).unwrap();
            let b = padded_wasserstein_k(&t, &s, 4, &z).unwrap();
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn norm_never_rounds_distinct_points_to_zero() {
        assert!(euclidean(&[1e-200], &[0.0]) > 0.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
    }
}
