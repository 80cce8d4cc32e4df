//! Sensitivity estimation for stochastic reaction networks.
//!
//! This crate estimates parameter sensitivities d/dtheta E[f(X_theta(T))]
//! for continuous-time Markov chain reaction networks. It provides two
//! unbiased-by-construction integral-path estimators (one driven by an exact
//! simulation kernel, one by an explicit tau-leap kernel) alongside four
//! coupled finite-difference baselines, plus the shared machinery they all
//! need: a model language with symbolic propensity derivatives, splittable
//! counter-based random streams, exact and tau-leap simulation kernels, and
//! streaming statistics with work-normalized efficiency metrics.

pub mod error;
pub mod estimate;
pub mod exact;
pub mod fd;
pub mod ipa;
pub mod model;
pub mod rng;
pub mod tauleap;
pub mod stats;

/// Which simulation kernel drives a method's paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelKind {
    Exact,
    TauLeap { tau_max: f64 },
}
