//! Progressive joins driven by scan operators that learn which partitions
//! produce results.
//!
//! Statistical code is generic over [`Real`]; the aliases below fix it to `f64`.

pub mod baselines;
pub mod collab;
pub mod datagen;
pub mod engine;
pub mod osl;
pub mod rosl;
pub mod scalar;
pub mod storage;

pub use scalar::Real;

pub type Estimator = rosl::EstimatorState<f64>;
pub type RoslConfig = rosl::RoslParams<f64>;
pub type RoslRun = rosl::RoslOutput<f64>;
pub type FailureBounds = osl::Bounds<f64>;
pub type BernoulliJoin = datagen::BernoulliMatrix<f64>;
