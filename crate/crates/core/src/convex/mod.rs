//! Strongly convex inner programs and their interior-point solver.

pub mod blocktri;
pub mod expr;
pub mod ipm;
pub mod kkt;
pub mod program;
pub mod assemble;

pub use expr::{Expr, Lin};
pub use ipm::{solve_convex, SolveStatus, SolverOptions, SolverResult};
pub use kkt::{check_kkt, KktReport};
pub use program::ConvexProgram;
