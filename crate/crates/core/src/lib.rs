//! Fault-tolerant spacecraft attitude tracking with predictable
//! steady-state performance bounds.
//!
//! The crate is organized bottom-up:
//!
//! - [`so3`]: vectors, matrices and unit quaternions.
//! - [`dynamics`]: rigid-body kinematics, Euler dynamics, tracking errors.
//! - [`actuation`]: actuator banks, fault-weighted allocation, saturation.
//! - [`estimation`]: sensor models and observers.
//! - [`controller`]: the continuous sliding-mode tracking law.
//! - [`bounds`]: iterative ultimate-bound prediction.
//! - [`harness`]: scenarios, simulation, Monte Carlo campaigns and export.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Small fixed-size linear algebra reads best with explicit indices.
#![allow(clippy::needless_range_loop)]

pub mod actuation;
pub mod bounds;
pub mod controller;
pub mod dynamics;
pub mod estimation;
pub mod harness;
pub mod profile;
pub mod so3;
pub mod units;

pub use bounds::{predict, BoundTrace, UncertaintyBudget};
pub use controller::{ControllerGains, RobustCoefficients};
pub use so3::{Mat3, UnitQuaternion, Vec3};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/attitude.md")]
    mod attitude {}
    #[doc = include_str!("../../../book/src/actuators.md")]
    mod actuators {}
    #[doc = include_str!("../../../book/src/estimation.md")]
    mod estimation {}
    #[doc = include_str!("../../../book/src/controller.md")]
    mod controller {}
    #[doc = include_str!("../../../book/src/bounds.md")]
    mod bounds {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
