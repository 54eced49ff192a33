//! Weighted Kolmogorov distances for heavy-tailed return models.
//!
//! The central object is the weighted distance
//!
//! ```text
//! d(F, G) = sup_t (1 + h(t))^(-q) |F(t) - G(t)|
//! ```
//!
//! where `h` is an exhaustion function comparable to `|t|` at infinity. The
//! crate provides the distance itself (one-sample, two-sample and a
//! rectangle version in two or three dimensions), the analytic models used
//! to stress it (Gaussian, Student-t, Pareto), truncation analytics for the
//! core/tail error bound, the `(beta, q)` rate selector, and the production
//! validation gates (parametric bootstrap, Kupiec tail test, grid-robust
//! statistic, hybrid verdict).
//!
//! The crate is `no_std` and only needs `alloc`. Everything is deterministic:
//! random draws come from keyed ChaCha8 substreams, and all transcendental
//! functions go through `libm`, so identical inputs give bit-identical
//! outputs on every platform. Parallel fan-out is injected through the
//! [`Fanout`] trait; the `wkm` companion crate supplies a rayon backend.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod error;
mod fanout;

pub mod distributions;
pub mod exhaustion;
pub mod experiments;
pub mod metric;
pub mod quad;
pub mod rng;
pub mod special;
pub mod theory;
pub mod validation;

pub use distributions::{DistributionModel, MomentSummary, Sampler, TailIndexInfo};
pub use error::{Error, Result};
pub use experiments::{ConvergenceRow, MetricKind, ScenarioConfig, TailscanRow};
pub use exhaustion::{CustomExhaustion, CustomShape, ExhaustionSpec, WeightConfig};
pub use fanout::{Fanout, Sequential};
pub use metric::{EmpiricalCdf, NormalizedSumSample, WeightedDistanceResult};
pub use rng::{Stream, StreamKey};
pub use theory::{BoundConstants, BoundScan, BoundTerms, LinearFit, RatePlan, TruncationAnalysis};
pub use validation::{BootstrapOutcome, CoreGate, GridRobustResult, KupiecResult, TailPolicy, ValidationPolicy, ValidationVerdict};
