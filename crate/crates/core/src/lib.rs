//! Instance-dependent partial-label learning through an explicit
//! decomposition of how candidate label sets are generated.
//!
//! The correct label of an instance is modelled as a Categorical draw and the
//! incorrect candidates as independent Bernoulli draws. Two networks output
//! the parameters of the conjugate priors (Dirichlet for the main branch,
//! Beta for the auxiliary branch); closed-form posterior means feed a MAP
//! objective whose gradients are derived analytically and checked against
//! finite differences.
//!
//! Module map:
//!
//! - [`data`]: datasets, candidate sets, text / JSON-lines I/O.
//! - [`distributions`]: densities, samplers and conjugate posterior means.
//! - [`generation`]: the candidate-set density and synthetic corruption.
//! - [`network`]: dense scorer with manual backprop, transforms, SGD.
//! - [`objective`]: ML / prior / MAP losses, upper bound, uniform case.
//! - [`trainer`]: the alternating two-network training loop and prior cache.
//! - [`evaluation`]: splits, accuracy and multi-seed aggregation.
//! - [`gradcheck`]: finite-difference verification of every analytic chain.

pub mod data;
pub mod distributions;
pub mod evaluation;
pub mod generation;
pub mod gradcheck;
pub mod network;
pub mod objective;
pub mod rng;
pub mod trainer;

pub use data::{DataError, DataFormat, LogicalVectors, PllDataset};
pub use distributions::{BernoulliVec, BetaParams, DirichletParams, DistError, Simplex};
pub use evaluation::{SeedReport, SplitSpec};
pub use generation::{CorruptionMode, CorruptionReport};
pub use network::{Activation, DenseNet, NetError, SgdState, TransformConfig};
pub use objective::{BoundConfig, LossGrad, PerInstanceLossInput, PosteriorParams, PriorValues};
pub use trainer::{fit, predict, EpochRecord, FitOutput, PriorCache, TrainConfig, TrainError};
