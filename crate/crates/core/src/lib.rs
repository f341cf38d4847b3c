//! Variable-metric quasi-Fejér iterations in finite dimension.
//!
//! The crate provides the building blocks (SPD metrics and schedules, metric
//! projections, metric resolvents and proximity operators), trace-producing
//! solvers (quasi-cyclic feasibility, periodic projections, linear
//! inequalities, proximal point, proximal Landweber), and monitors that turn a
//! finished trace into a machine-checkable certificate of the monotonicity
//! inequalities the iterates were supposed to satisfy.
//!
//! Everything works on dense `f64` vectors and matrices from `nalgebra`.

// `!(x > 0.0)` also rejects NaN, which is what the input checks want.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convex_sets;
pub mod error;
pub mod fejer_monitor;
pub mod generate;
pub mod metric_ops;
pub mod operator_class;
pub mod problem;
pub mod serde_util;
pub mod solvers;
pub mod trace_io;

pub use convex_sets::{distance, intersection_distance, project_euclid, project_metric, ConvexSet};
pub use error::{Error, Result};
pub use fejer_monitor::{check_quasi_fejer, EpsSpec, FejerCertificate, IterateRecord, IterateTrace, Phi};
pub use metric_ops::{
    inverse_order_check, loewner_geq, metric_inner, metric_norm, schedule_limit, schedule_validate,
    Direction, MetricOperator, MetricRule, MetricSchedule, Summable,
};
pub use operator_class::{
    resolvent, resolvent_metric, shifted_sum_resolvent, MonotoneOperator, ProxFunction, ScalarPiece, TOperator,
};
pub use generate::{generate, GenerateKind};
pub use problem::{HypothesisCheck, Overrides, ProblemFile, ProblemKind};
pub use solvers::{
    basis_prox_landweber, feasibility_solve, gamma_schedule_validate, linear_inequalities, periodic_projections,
    prox_landweber, proximal_point, ControlSequence, DataTerm, ErrorInjection, InverseProblem, ParamSchedule,
    RunConfig, StepRegime, StopReason,
};
pub use trace_io::{config_hash, trace_from_jsonl, trace_to_jsonl, write_atomic, RunStatus, RunSummary};

/// Dense column vector used throughout the crate.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
