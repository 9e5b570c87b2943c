//! Monotone co-design of vehicle control systems.
//!
//! The crate is organised bottom-up:
//!
//! - [`order`]: posets, antichains, upper sets, Loewner order.
//! - [`codesign`]: design problems with implementations (MDPIs), their
//!   composition, and query solving over co-design diagrams.
//! - [`plant`]: kinematic single-track vehicle, noisy measurements with
//!   intermittent observations, reference paths, extended Kalman filter.
//! - [`control`]: Stanley, pure pursuit, LQR, NMPC lateral control, PID speed
//!   control, and the Monte-Carlo closed-loop harness.
//! - [`design`]: catalogs, controller grids, empirical design problems.
//! - [`av`]: the autonomous-vehicle diagram, queries, sweeps and exports.

// negated comparisons are used on purpose so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod av;
pub mod codesign;
pub mod control;
pub mod design;
pub mod order;
pub mod plant;

pub use order::{
    compare, pareto_min, Antichain, Component, Order, OrderError, PartialOrderOutcome, Point, Poset, SymMatrix,
    UpperSet, Value,
};
