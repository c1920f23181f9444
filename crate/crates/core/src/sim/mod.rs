//! Deterministic in-process publish/subscribe simulator.
//!
//! Nodes come from a wiring manifest, behaviors from a [`BehaviorRegistry`].
//! A scenario world publishes the obstacle distance and ego speed, reads the
//! brake command and integrates point-mass kinematics. All numerics are
//! generic over [`Scalar`]; the crate root exposes `f64` aliases.

mod behavior;
mod export;
mod physics;
mod scenario;
mod wiring;

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};
use thiserror::Error;

pub use behavior::{Behavior, BehaviorFactory, BehaviorRegistry, Outputs};
pub use export::{messages_jsonl, metrics_json, read_trace_csv, trace_csv, TraceRow};
pub use physics::{braking_decision, ttc_calculate};
pub use scenario::{run_scenario, AebScenario, Message, NodeMetrics, ScenarioTrace, TickRecord, WorldTopics};
pub use wiring::{load_wiring, NodeGraph, NodeSpec, PortSpec, WiringMode};

pub trait Scalar: Float + FromPrimitive + Debug + Display + Send + Sync + 'static {}

impl<T: Float + FromPrimitive + Debug + Display + Send + Sync + 'static> Scalar for T {}

pub(crate) fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("wiring manifest: {0}")]
    Schema(String),
    #[error("node `{node}` subscribes to `{topic}`, which nothing publishes")]
    Dangling { node: String, topic: String },
    #[error("negative distance {0}")]
    NegativeDistance(f64),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("node `{node}`: no behavior registered under `{key}`")]
    UnresolvedBehavior { node: String, key: String },
    #[error("node `{node}` violated its output contract: {message}")]
    Contract { node: String, message: String },
    #[error("node `{node}` failed: {message}")]
    Behavior { node: String, message: String },
    #[error("trace: {0}")]
    Trace(String),
}
