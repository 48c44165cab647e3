//! Hat activations, TRI and their derivatives.
//!
//! The hat `σ_{α,β,γ}` is written as a sum of three ReLUs,
//!
//! ```text
//! σ(x) = ReLU((x-α)/(γβ)) + ReLU((x-α-β)/((1-γ)β)) - ReLU((x-α-γβ)/(γ(1-γ)β))
//! ```
//!
//! which rises linearly from 0 at `α` to 1 at `α+γβ` and falls back to 0 at
//! `α+β`. Derivatives at kinks are right-hand derivatives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn relu(x: f64) -> f64 {
    x.max(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HatSpec {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl HatSpec {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Result<Self> {
        let spec = Self { alpha, beta, gamma };
        spec.validate()?;
        Ok(spec)
    }

    /// The symmetric hat on `[0, 1]`, i.e. TRI.
    pub fn unit() -> Self {
        Self {
            alpha: 0.0,
            beta: 1.0,
            gamma: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.alpha.is_finite() {
            return Err(Error::invalid("hat alpha must be finite"));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::invalid(format!("hat beta must be positive, got {}", self.beta)));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::invalid(format!("hat gamma must lie in (0, 1), got {}", self.gamma)));
        }
        Ok(())
    }

    pub fn support(&self) -> (f64, f64) {
        (self.alpha, self.alpha + self.beta)
    }

    pub fn peak(&self) -> f64 {
        self.alpha + self.gamma * self.beta
    }
}

enum Piece {
    Rising,
    Falling,
    Outside,
}

fn piece(spec: &HatSpec, x: f64) -> (Piece, f64) {
    let u = x - spec.alpha;
    let p = if !(u >= 0.0) || u >= spec.beta {
        Piece::Outside
    } else if u < spec.gamma * spec.beta {
        Piece::Rising
    } else {
        Piece::Falling
    };
    (p, u)
}

pub fn hat_eval(spec: &HatSpec, x: f64) -> f64 {
    let HatSpec { alpha, beta, gamma } = *spec;
    match piece(spec, x).0 {
        Piece::Outside => 0.0,
        _ => relu(
            relu((x - alpha) / (gamma * beta)) + relu((x - alpha - beta) / ((1.0 - gamma) * beta))
                - relu((x - alpha - gamma * beta) / (gamma * (1.0 - gamma) * beta)),
        ),
    }
}

/// Partial derivatives of the hat with respect to `x`, `α`, `β`, `γ`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct HatGrad {
    pub dx: f64,
    pub dalpha: f64,
    pub dbeta: f64,
    pub dgamma: f64,
}

pub fn hat_grad(spec: &HatSpec, x: f64) -> HatGrad {
    let HatSpec { beta, gamma, .. } = *spec;
    let (p, u) = piece(spec, x);
    match p {
        Piece::Outside => HatGrad::default(),
        Piece::Rising => {
            let s = 1.0 / (gamma * beta);
            HatGrad {
                dx: s,
                dalpha: -s,
                dbeta: -u / (gamma * beta * beta),
                dgamma: -u / (gamma * gamma * beta),
            }
        }
        Piece::Falling => {
            let s = 1.0 / ((1.0 - gamma) * beta);
            HatGrad {
                dx: -s,
                dalpha: s,
                dbeta: u / ((1.0 - gamma) * beta * beta),
                dgamma: (beta - u) / ((1.0 - gamma) * (1.0 - gamma) * beta),
            }
        }
    }
}

/// Triangle with support `[0, 1]` and peak 1 at `1/2`.
pub fn tri_eval(x: f64) -> f64 {
    if !(x > 0.0) || x >= 1.0 {
        0.0
    } else if x < 0.5 {
        2.0 * x
    } else {
        2.0 - 2.0 * x
    }
}

pub fn tri_derivative(x: f64) -> f64 {
    if !(x >= 0.0) || x >= 1.0 {
        0.0
    } else if x < 0.5 {
        2.0
    } else {
        -2.0
    }
}

/// TRI written as a two-layer ReLU network.
pub fn tri_via_relu(x: f64) -> f64 {
    relu(relu(2.0 * x) + relu(2.0 * x - 2.0) - relu(4.0 * x - 2.0))
}

/// Largest absolute difference between [`tri_eval`] and [`tri_via_relu`] on `grid`.
pub fn tri_relu_identity_check(grid: &[f64]) -> f64 {
    grid.iter()
        .map(|&x| (tri_eval(x) - tri_via_relu(x)).abs())
        .fold(0.0, f64::max)
}

/// Checks the defining properties of a hat on a sampled table: non-negative,
/// zero outside `support`, not identically zero, and continuous at grid level
/// (adjacent jumps bounded by `lipschitz_bound` times the step).
pub fn is_hat(xs: &[f64], ys: &[f64], support: (f64, f64), lipschitz_bound: f64) -> bool {
    if xs.len() != ys.len() || xs.is_empty() {
        return false;
    }
    let (lo, hi) = support;
    let nonneg = ys.iter().all(|&y| y >= 0.0);
    let vanishes = xs
        .iter()
        .zip(ys)
        .all(|(&x, &y)| (lo..=hi).contains(&x) || y == 0.0);
    let nonzero = ys.iter().any(|&y| y != 0.0);
    let continuous = xs
        .windows(2)
        .zip(ys.windows(2))
        .all(|(x, y)| (y[1] - y[0]).abs() <= lipschitz_bound * (x[1] - x[0]).abs() + 1e-12);
    nonneg && vanishes && nonzero && continuous
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    Hat(HatSpec),
    Tri,
    Relu,
    /// The hat rescaled to support `[0, 1]`: `t ↦ σ(α + β t)`.
    ScaledHat(HatSpec),
}

impl ActivationKind {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Hat(s) => hat_eval(s, x),
            Self::Tri => tri_eval(x),
            Self::Relu => relu(x),
            Self::ScaledHat(s) => hat_eval(s, s.alpha + s.beta * x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::Hat(s) => hat_grad(s, x).dx,
            Self::Tri => tri_derivative(x),
            Self::Relu => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::ScaledHat(s) => s.beta * hat_grad(s, s.alpha + s.beta * x).dx,
        }
    }

    /// Moves hat supports to `[0, 1]`; other kinds are returned unchanged.
    pub fn normalized(&self) -> Self {
        match self {
            Self::Hat(s) => Self::ScaledHat(*s),
            other => *other,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Hat(s) | Self::ScaledHat(s) => s.validate(),
            _ => Ok(()),
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "tri" => Ok(Self::Tri),
            "relu" => Ok(Self::Relu),
            "hat" => Ok(Self::Hat(HatSpec::unit())),
            other => Err(Error::invalid(format!(
                "unknown activation '{other}', expected tri, relu or hat"
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec() -> impl Strategy<Value = HatSpec> {
        (-3.0..3.0f64, 0.05..4.0f64, 0.05..0.95f64).prop_map(|(a, b, g)| HatSpec::new(a, b, g).unwrap())
    }

    #[test]
    fn hat_examples() {
        let s = HatSpec::unit();
        assert_eq!(hat_eval(&s, 0.5), 1.0);
        assert_eq!(hat_eval(&s, 2.0), 0.0);
        assert_eq!(hat_eval(&s, 0.0), 0.0);
        // the unclamped formula also vanishes to the right of the support
        let raw = |x: f64| relu(x / 0.5) + relu((x - 1.0) / 0.5) - relu((x - 0.5) / 0.25);
        assert_eq!(raw(2.0), 0.0);
    }

    #[test]
    fn hat_grad_examples() {
        let s = HatSpec::unit();
        assert_eq!(hat_grad(&s, 0.25).dx, 2.0);
        assert_eq!(hat_grad(&s, 0.75).dx, -2.0);
        assert_eq!(hat_grad(&s, -0.1), HatGrad::default());
        assert_eq!(hat_grad(&s, 1.1), HatGrad::default());
        // right-hand convention at kinks
        assert_eq!(hat_grad(&s, 0.0).dx, 2.0);
        assert_eq!(hat_grad(&s, 0.5).dx, -2.0);
        assert_eq!(hat_grad(&s, 1.0).dx, 0.0);
    }

    #[test]
    fn tri_examples() {
        assert_eq!(tri_eval(0.5), 1.0);
        assert_eq!(tri_eval(0.0), 0.0);
        assert_eq!(tri_eval(0.25), 0.5);
        assert_eq!(tri_eval(1.0), 0.0);
    }

    #[test]
    fn tri_identity_on_dyadic_grid() {
        let grid: Vec<f64> = (-1024..=2048).map(|k| k as f64 / 1024.0).collect();
        assert_eq!(tri_relu_identity_check(&grid), 0.0);
        assert_eq!(tri_relu_identity_check(&[0.5]), 0.0);
        assert_eq!(tri_relu_identity_check(&[]), 0.0);
    }

    #[test]
    fn is_hat_examples() {
        let xs: Vec<f64> = (0..=400).map(|i| -2.0 + i as f64 * 0.01).collect();
        let hat: Vec<f64> = xs.iter().map(|&x| hat_eval(&HatSpec::unit(), x)).collect();
        assert!(is_hat(&xs, &hat, (0.0, 1.0), 2.0));
        let r: Vec<f64> = xs.iter().map(|&x| relu(x)).collect();
        assert!(!is_hat(&xs, &r, (0.0, 1.0), 2.0));
        let zero = vec![0.0; xs.len()];
        assert!(!is_hat(&xs, &zero, (0.0, 1.0), 2.0));
        let mut jump = hat.clone();
        jump[250] += 0.5;
        assert!(!is_hat(&xs, &jump, (0.0, 1.0), 2.0));
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(HatSpec::new(0.0, 0.0, 0.5).is_err());
        assert!(HatSpec::new(0.0, 1.0, 1.0).is_err());
        assert!(HatSpec::new(0.0, 1.0, 0.0).is_err());
        assert!(HatSpec::new(f64::NAN, 1.0, 0.5).is_err());
    }

    #[test]
    fn scaled_hat_matches_unit_support() {
        let s = HatSpec::new(-2.0, 3.0, 0.25).unwrap();
        let a = ActivationKind::Hat(s).normalized();
        for i in 0..=100 {
            let t = i as f64 / 100.0;
            let direct = hat_eval(&HatSpec::new(0.0, 1.0, 0.25).unwrap(), t);
            assert!((a.eval(t) - direct).abs() < 1e-12);
        }
        assert_eq!(a.eval(-0.1), 0.0);
        assert_eq!(a.eval(1.1), 0.0);
    }

    #[test]
    fn activation_json_roundtrip() {
        for a in [
            ActivationKind::Tri,
            ActivationKind::Relu,
            ActivationKind::Hat(HatSpec::unit()),
            ActivationKind::ScaledHat(HatSpec::unit()),
        ] {
            let s = serde_json::to_string(&a).unwrap();
            assert_eq!(serde_json::from_str::<ActivationKind>(&s).unwrap(), a);
        }
    }

    proptest! {
        #[test]
        fn hat_nonnegative_with_unit_peak(s in spec(), x in -10.0..10.0f64) {
            prop_assert!(hat_eval(&s, x) >= 0.0);
            prop_assert!((hat_eval(&s, s.peak()) - 1.0).abs() < 1e-9);
            let (lo, hi) = s.support();
            if x <= lo || x >= hi {
                prop_assert_eq!(hat_eval(&s, x), 0.0);
            }
        }

        #[test]
        fn tri_is_the_unit_hat(x in -2.0..3.0f64) {
            prop_assert!((tri_eval(x) - hat_eval(&HatSpec::unit(), x)).abs() <= 1e-15);
        }

        #[test]
        fn hat_grad_matches_central_differences(s in spec(), t in -0.2..1.2f64) {
            let x = s.alpha + t * s.beta;
            let kinks = [s.alpha, s.peak(), s.alpha + s.beta];
            prop_assume!(kinks.iter().all(|k| (x - k).abs() > 1e-3));
            // parameter perturbations also move kinks; keep clear of them
            prop_assume!((s.gamma - 0.0).abs() > 1e-3 && (1.0 - s.gamma).abs() > 1e-3);
            let h = 1e-6;
            let f = |a: f64, b: f64, g: f64, x: f64| hat_eval(&HatSpec { alpha: a, beta: b, gamma: g }, x);
            let g = hat_grad(&s, x);
            let fd = [
                (f(s.alpha, s.beta, s.gamma, x + h) - f(s.alpha, s.beta, s.gamma, x - h)) / (2.0 * h),
                (f(s.alpha + h, s.beta, s.gamma, x) - f(s.alpha - h, s.beta, s.gamma, x)) / (2.0 * h),
                (f(s.alpha, s.beta + h, s.gamma, x) - f(s.alpha, s.beta - h, s.gamma, x)) / (2.0 * h),
                (f(s.alpha, s.beta, s.gamma + h, x) - f(s.alpha, s.beta, s.gamma - h, x)) / (2.0 * h),
            ];
            for (an, num) in [g.dx, g.dalpha, g.dbeta, g.dgamma].into_iter().zip(fd) {
                let scale = an.abs().max(num.abs()).max(1.0);
                prop_assert!((an - num).abs() / scale <= 1e-4, "{} vs {}", an, num);
            }
        }
    }
}
