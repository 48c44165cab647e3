//! Monotone-and-separating (MAS) multiset embeddings.
//!
//! A multiset-to-vector map `F` is MAS when `S ⊆ T` holds exactly when
//! `F(S) ≤ F(T)` coordinatewise. This crate contains:
//!
//! * [`multiset`]: discrete and point multisets, containment, enumeration.
//! * [`exact`]: exact MAS embeddings over finite ground sets, a brute-force
//!   verifier, the random-projection construction and constructive refuters.
//! * [`activation`]: hat activations, TRI and their derivatives.
//! * [`weak`]: parametric weakly-MAS set functions and counterexamples for
//!   monotone activations and attention pooling.
//! * [`distance`]: min-cost assignment, the asymmetric containment distance
//!   and the padded Wasserstein distance.
//! * [`lab`]: Monte Carlo experiments on separation probability and stability.
//! * [`masnet`]: a trainable monotone set embedding with a hinge containment loss.
//! * [`index`]: a dominance-scan containment index persisted to disk.

pub mod activation;
pub mod distance;
pub mod error;
pub mod exact;
pub mod index;
pub mod lab;
pub mod masnet;
pub mod multiset;
pub mod seed;
pub mod stats;
pub mod weak;

pub use error::{Error, Result};
pub use multiset::{GroundSpec, Multiset, RealMultiset};
