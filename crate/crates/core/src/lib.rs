//! Exact analysis of estimation in feedforward networks of Bayesian agents.
//!
//! Agents in the first layer observe a common scalar with known precisions;
//! each later agent fuses the estimates it hears into the minimum-variance
//! unbiased combination, and a final aggregator fuses the last layer. All of
//! that algebra is carried out in exact rational arithmetic, so questions
//! like "does this topology lose information?" get exact answers: ideality
//! is a rank condition, not a numerical tolerance.
//!
//! The crate is organized bottom-up:
//!
//! * [`rat`], [`linalg`]: arbitrary-precision rationals and exact linear
//!   algebra (echelon forms with certificate tracking, a modular fast path
//!   for large rank questions).
//! * [`net`]: network description, validation, file I/O.
//! * [`estimation`]: weight propagation, fusion, covariances, the final
//!   estimator, and a Monte Carlo simulator.
//! * [`analysis`]: ideality tests, W-motif search, redundancy reduction,
//!   ring benchmarks, naive weighting.
//! * [`ensemble`]: random-network experiments and sweeps.
//! * [`oracle`]: independent recomputations and exhaustive checks.
//! * [`report`]: the full per-network analysis bundle.

pub mod analysis;
pub mod ensemble;
pub mod estimation;
pub mod linalg;
pub mod net;
pub mod oracle;
pub mod rat;
pub mod report;
pub mod seeding;

pub use analysis::{IdealityVerdict, WMotifWitness};
pub use ensemble::{EnsembleResult, SweepSpec};
pub use estimation::{
    CovarianceMatrix, FinalEstimate, Fusion, SimulationSummary, WeightProfile,
};
pub use linalg::RatMatrix;
pub use net::{
    BoolMat, IsolatedAgent, IsolationKind, LayeredNetwork, PrecisionVector, ValidationReport,
};
pub use oracle::{McOutcome, VerificationReport, VerifyLevel};
pub use rat::Rat;
pub use report::AnalyzeReport;
pub use seeding::{derive_seed, GENERATOR_NAME};
