//! Feasible sequential linear programming (FSLP) for nonlinear programs with a linear
//! objective and a nonlinear equality map, aimed at time-optimal control problems.
//!
//! All iterates stay feasible. Each outer iteration solves a trust-region LP
//! ([`subproblem`]) and projects its step back onto the feasible set with zero-order
//! feasibility iterations ([`inner`]); the trust region is managed in [`outer`]. LPs are
//! solved by the simplex method in [`lp`]. [`crane`] transcribes a time-optimal overhead
//! crane problem by multiple shooting, [`illustrative`] holds a two-variable test problem,
//! and [`experiments`] runs both and writes CSV logs.
//!
//! ```
//! use fslp::{illustrative, outer};
//!
//! let p = illustrative::problem(0.06);
//! let w0 = illustrative::start_point(&p, 2.0, 10.0).unwrap();
//! let res = outer::solve(&p, &w0, &outer::SolverParams::default()).unwrap();
//! assert_eq!(res.status, outer::SolveStatus::Optimal);
//! assert!((res.final_point[0] + 0.2).abs() < 1e-6);
//! ```

pub mod crane;
pub mod error;
pub mod experiments;
pub mod illustrative;
pub mod inner;
pub mod lp;
pub mod nlp;
pub mod outer;
pub mod subproblem;

pub use error::{FslpError, Result};
