//! Kernel-based reinforcement learning for non-stationary episodic MDPs on
//! metric spaces.
//!
//! The crate provides the full-history agent ([`kerns::KernsAgent`]), the
//! representative-state agent and its stationary and restarting variants
//! ([`rs_kerns`]), a continuous test environment ([`env::BallWorldEnv`]), a
//! regret oracle ([`oracle`]) and the experiment harness behind the
//! `kernrl` binary ([`harness`]).

// negated comparisons such as `!(x > 0.0)` deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod bonus;
pub mod env;
pub mod error;
pub mod harness;
pub mod kernels;
pub mod kerns;
pub mod metric;
pub mod oracle;
pub mod rs_kerns;

pub use agent::{Agent, TransitionRecord};
pub use error::{Error, Result};
pub use kernels::{KernelSpec, SpatialKernel, TemporalKernel};
pub use metric::{ActionId, MetricSpec, Point};
