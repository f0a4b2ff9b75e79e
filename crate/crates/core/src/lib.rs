//! Clipped stochastic first-order methods for smooth minimization and
//! variational inequalities under heavy-tailed noise.
//!
//! The crate provides
//! - the clip operator and Monte-Carlo checks of its moment bounds ([`clipping`]),
//! - noise models with a certified bounded `alpha`-th moment ([`noise`]),
//! - test problems with exact solutions and constants ([`problems`]),
//! - closed-form parameter schedules for each method and regime ([`schedules`]),
//! - the methods themselves ([`optimizers`]) and convergence metrics ([`metrics`]),
//! - a seeded multi-trial experiment harness ([`harness`]).

pub mod clipping;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod noise;
pub mod optimizers;
pub mod problem;
pub mod problems;
pub mod rng;
pub mod schedules;
pub mod vector;

pub use clipping::{clip, lemma_bounds, verify_lemma, ClipMomentBounds, ClipMomentEstimate};
pub use error::{Error, Result};
pub use noise::{certify_moment, AdversarialParams, NoiseKind, NoiseModel};
pub use problem::{MinClass, MinProblem, VipClass, VipProblem};
pub use rng::{sample_in_ball, RngStream};
pub use schedules::{Fidelity, LambdaKind, Method, RegimeCase, RestartPlan, Schedule};
pub use vector::DenseVector;
