//! Oracles shared by the integration tests.
#![allow(dead_code)]

use itertools::Itertools;
use mas_core::masnet::{hinge_terms, pair_gradient, Architecture, ContainmentPair, LossKind, MasNet, Outer, Split, Variant};
use mas_core::seed::Rng;
use mas_core::RealMultiset;
use rand::Rng as _;

/// Minimum over all injections `S → T` of the summed Euclidean cost.
pub fn brute_force_d_as(s: &RealMultiset, t: &RealMultiset) -> f64 {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    (0..t.len())
        .permutations(s.len())
        .map(|p| p.iter().enumerate().map(|(i, &j)| dist(&s.points()[i], &t.points()[j])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

pub fn random_points(rng: &mut Rng, n: usize, d: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(lo..hi)).collect()).collect()
}

pub fn random_set(rng: &mut Rng, n: usize, d: usize) -> RealMultiset {
    RealMultiset::new(d, random_points(rng, n, d, -2.0, 2.0)).unwrap()
}

/// Small architectures covering every variant, hidden depth and outer map.
pub fn gradient_architecture(variant: Variant, i: usize) -> Architecture {
    let arch = Architecture::new(3, 4, variant).with_hidden(if i % 2 == 0 { vec![5] } else { vec![] });
    if i % 3 == 0 {
        arch.with_outer(Outer::Monotone { hidden: vec![3], out_dim: 2 })
    } else {
        arch
    }
}

pub enum GradCheck {
    /// Relative error `‖g - g_fd‖ / max(‖g‖, ‖g_fd‖, 1e-8)`.
    Smooth(f64),
    /// A perturbation crossed a kink; the point is not usable.
    Kinked,
}

fn state(model: &MasNet, pair: &ContainmentPair, delta: f64) -> (Vec<i8>, Option<usize>) {
    let mut sig = model.activation_signature(&pair.s).unwrap();
    sig.extend(model.activation_signature(&pair.t).unwrap());
    let fs = model.forward(&pair.s).unwrap();
    let ft = model.forward(&pair.t).unwrap();
    (sig, hinge_terms(&fs, &ft, pair.y, delta, LossKind::Separating).1.map(|a| a.0))
}

/// Compares the analytic hinge-loss gradient with central differences over
/// every parameter. Points where any perturbation changes the piecewise
/// regime are reported as kinked.
pub fn check_gradient(model: &MasNet, pair: &ContainmentPair, delta: f64, h: f64) -> GradCheck {
    let mut g = model.zeros_like();
    pair_gradient(model, pair, delta, LossKind::Separating, &mut g).unwrap();
    let analytic = g.flat();
    let base = model.flat();
    let base_state = state(model, pair, delta);
    let mut fd = Vec::with_capacity(base.len());
    let mut probe = model.clone();
    for i in 0..base.len() {
        let mut eval = |sign: f64| {
            let mut p = base.clone();
            p[i] += sign * h;
            probe.load_flat(&p);
            if state(&probe, pair, delta) != base_state {
                return None;
            }
            let fs = probe.forward(&pair.s).unwrap();
            let ft = probe.forward(&pair.t).unwrap();
            Some(hinge_terms(&fs, &ft, pair.y, delta, LossKind::Separating).0)
        };
        match (eval(1.0), eval(-1.0)) {
            (Some(a), Some(b)) => fd.push((a - b) / (2.0 * h)),
            _ => return GradCheck::Kinked,
        }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff: Vec<f64> = analytic.iter().zip(&fd).map(|(a, b)| a - b).collect();
    GradCheck::Smooth(norm(&diff) / norm(&analytic).max(norm(&fd)).max(1e-8))
}

/// Random labelled pair for gradient checks.
pub fn random_pair(rng: &mut Rng, d: usize) -> ContainmentPair {
    let ns = rng.random_range(1..4);
    let nt = rng.random_range(1..5);
    ContainmentPair {
        index: 0,
        s: random_set(rng, ns, d),
        t: random_set(rng, nt, d),
        y: rng.random_bool(0.5),
        noise_std: 0.0,
        split: Split::Train,
    }
}

/// Worst relative error over `points` smooth random points, and the number
/// of kinked points skipped on the way.
pub fn gradient_suite(variant: Variant, points: usize, seed: u64) -> (f64, usize) {
    let mut rng = mas_core::seed::rng_from_seed(seed);
    let mut worst: f64 = 0.0;
    let (mut done, mut kinked) = (0, 0);
    while done < points {
        let model = MasNet::new(gradient_architecture(variant, done), rng.random()).unwrap();
        let pair = random_pair(&mut rng, 3);
        match check_gradient(&model, &pair, 0.1, 1e-5) {
            GradCheck::Smooth(e) => {
                worst = worst.max(e);
                done += 1;
            }
            GradCheck::Kinked => kinked += 1,
        }
    }
    (worst, kinked)
}
