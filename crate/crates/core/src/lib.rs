//! Branch-and-cut laboratory for comparing distance-based cut selection
//! measures on small mixed-integer programs.
//!
//! The optimization core (LP solvers, analytic centers, measures, separation
//! and branch-and-bound) is generic over [`Real`]; the `*F64` and `*F32`
//! aliases below fix the scalar. Regression and benchmarking work in `f64`.

pub mod alt_optima;
pub mod bench;
pub mod bnb;
pub mod cutpipe;
pub mod dominance;
pub mod error;
pub mod features;
pub mod io;
pub mod linalg;
pub mod lp_barrier;
pub mod lp_simplex;
pub mod measures;
pub mod model;
pub mod real;
pub mod regress;

pub use alt_optima::{collect_optima, OptimaSet};
pub use bnb::{branch_and_cut, brute_force_optimum, NodeStats, SolveStatus};
pub use cutpipe::{run_separation, RoundReport, SeparationConfig, SeparationResult};
pub use dominance::{check_consistency, check_dominance, DominanceVerdict, Relation};
pub use error::{Error, Result};
pub use features::{extract_features, FeatureVector};
pub use lp_barrier::{analytic_center, optimal_face_center, BarrierOptions};
pub use lp_simplex::{solve_lp, tableau_row, LpOptions, SimplexState, TableauRow};
pub use measures::{MeasureError, MeasureKind, ScoringContext};
pub use model::{
    is_mip_feasible, violation, BasisStatus, CenterKind, CenterPoint, Cut, CutOrigin, Incumbent,
    IncumbentSource, LpOutcome, LpStatus, MipInstance, RowKind, Tolerances,
};
pub use real::Real;

pub type MipInstanceF64 = MipInstance<f64>;
pub type MipInstanceF32 = MipInstance<f32>;
pub type CutF64 = Cut<f64>;
pub type CutF32 = Cut<f32>;
pub type LpOutcomeF64 = LpOutcome<f64>;
pub type LpOutcomeF32 = LpOutcome<f32>;
pub type CenterPointF64 = CenterPoint<f64>;
pub type CenterPointF32 = CenterPoint<f32>;
pub type OptimaSetF64 = OptimaSet<f64>;
pub type OptimaSetF32 = OptimaSet<f32>;
