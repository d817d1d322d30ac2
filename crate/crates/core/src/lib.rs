//! Adaptive-regret online convex optimization: multiplicative weights over
//! full-matrix Adagrad experts living on geometric covering intervals.
//!
//! Everything is generic over the scalar type; the aliases below fix it to
//! `f64` (and a few to `f32`) for callers that do not care.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experts;
pub mod intervals;
pub mod numerics;
pub mod oco;
pub mod offline;
pub mod regret_lab;
pub mod samuel;
pub mod scalar;
pub mod scenarios;
pub mod trace;

pub use experts::{
    run_solo, ExpertConfig, ExpertError, ExpertInstance, ExpertKind, ProjectionMode,
};
pub use intervals::{CoverError, GeometricCover, Interval, IntervalId};
pub use oco::{regret, regret_of_points, Domain, LossFn, OcoError, ProblemParams};
pub use offline::{run_offline, OfflineConfig};
pub use regret_lab::{
    best_fixed, check_trace, diag_bound, min_h_energy, theorem1_bound, CheckConfig, CheckRecord,
    CheckReport, RegretReport, TraceError,
};
pub use samuel::{
    q_count, run, BirthPoint, CombineMode, EtaGrid, MetaError, MetaOptions, MetaState,
};
pub use scalar::Scalar;
pub use scenarios::{Scenario, ScenarioError, ScenarioKind};
pub use trace::{RoundRecord, RunTrace, SlotRecord};

pub type Params = ProblemParams<f64>;
pub type Loss = LossFn<f64>;
pub type Trace = RunTrace<f64>;
pub type State = MetaState<f64>;
pub type Expert = ExpertInstance<f64>;
pub type Matrix = numerics::SymMatrix<f64>;

pub type Params32 = ProblemParams<f32>;
pub type Loss32 = LossFn<f32>;
pub type Trace32 = RunTrace<f32>;
pub type State32 = MetaState<f32>;
