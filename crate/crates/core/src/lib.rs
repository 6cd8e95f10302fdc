//! Differentiable grasp synthesis against signed-distance-field objects.
//!
//! The pipeline: an object is baked into an [`sdf::SdfGrid`]; a kinematic
//! hand ([`hand`]) touches it through a penalty contact model ([`sim`]); the
//! grasp losses ([`loss`]) are minimized with constrained gradient descent
//! ([`opt`]); [`metrics`] scores the result.

pub mod diff;
pub mod math;
pub mod hand;
pub mod sdf;
pub mod sim;
pub mod loss;
pub mod metrics;
pub mod opt;
pub mod cli;
