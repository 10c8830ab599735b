//! Mixed-integer second-order-cone modelling and solving.
//!
//! [`ir::ProblemIR`] is the solver-neutral problem; [`block`] builds it from
//! name-addressed fragments; [`bnb`] solves it by branch-and-bound over
//! relaxations handled by the interior-point method in [`ipm`].

pub mod block;
pub mod bnb;
pub mod cones;
pub mod dump;
pub mod error;
pub mod ipm;
pub mod ir;
pub mod relax;
pub mod sparse;

pub use block::{assemble, Block, Expr};
pub use bnb::{fix_binaries_and_resolve, solve, solve_with, Extras, SolveOptions, SolveResult, SolveStatus};
pub use error::SolverError;
pub use ir::{Cone, ConeForm, LinExpr, ProblemIR, Sense, VarId, VarKind, Violation, ViolationKind};
