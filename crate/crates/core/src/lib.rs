//! Tutoring evaluation and preference-optimization toolkit.
//!
//! The pipeline has two halves. The evaluation half loads multiple-choice
//! science corpora, asks tutor backends for explanations, has a student-judge
//! backend rate them against a rubric, and aggregates ratings into category
//! breakdowns. The optimization half turns strong-vs-weak tutor comparisons
//! into a pairwise preference dataset and trains a small differentiable
//! sequence policy against it with the SFT, DPO, ORPO, or SimPO objectives,
//! all with exact analytic gradients verifiable by finite differences.
//!
//! The numeric core ([`policy`], [`losses`], [`trainer`], [`gradcheck`]) is
//! generic over the scalar type via [`scalar::Scalar`]; the pipeline runs on
//! the [`Real`] (f64) aliases below.

pub mod backends;
pub mod corpus;
pub mod digest;
pub mod gradcheck;
pub mod losses;
pub mod orchestration;
pub mod parallel;
pub mod policy;
pub mod prefdata;
pub mod records;
pub mod scalar;
pub mod scoring;
pub mod seeded;
pub mod trainer;

/// Scalar type used by the pipeline.
pub type Real = f64;

/// Policy parameters at pipeline precision.
pub type PolicyParams = policy::PolicyParams<Real>;

/// Loss configuration at pipeline precision.
pub type LossConfig = losses::LossConfig<Real>;

/// Trainer configuration at pipeline precision.
pub type TrainConfig = trainer::TrainConfig<Real>;
