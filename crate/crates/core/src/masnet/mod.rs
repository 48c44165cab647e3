//! Trainable MAS networks `F(S) = M2(Σ_{x∈S} σ(M1(x)))`.

mod data;
mod fit;
mod model;
mod train;

pub use data::{generate_synthetic, read_jsonl, split_of, write_jsonl, ContainmentPair, Dataset, Split, SyntheticConfig};
pub use fit::{fit_monotone_function, generate_monotone_dataset, mean_abs_error, FitConfig, FitReport, LabeledSet, MonotoneTarget};
pub use model::{Architecture, BetaParam, Dense, HatParam, MasNet, Outer, Variant};
pub use train::{
    backward, evaluate_containment, hinge_loss, hinge_loss_with, hinge_terms, pair_gradient, predict, train, EpochRecord, Evaluation,
    History, LossKind, Optimizer, TrainConfig,
};
