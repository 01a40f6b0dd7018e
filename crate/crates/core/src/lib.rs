//! Transference toolkit for BMO_p and Muckenhoupt A_p on the interval, the
//! line and the circle.
//!
//! * [`measure`]: exact calculus for step functions and atomic distributions.
//! * [`dag`]: lazy homogenize / glue / periodize expressions with exact interval queries.
//! * [`search`]: supremum searches (BMO_p seminorms, A_p and A_inf constants) behind
//!   a registry of objectives and strategies.
//! * [`martingale`]: simple martingales, membership validation, the barycenter lift,
//!   the martingale-to-circle compiler and the staircase factories.
//! * [`constants`]: sharp constants and envelopes.
//! * [`verify`]: seeded verification suites used by the command-line tool.

pub mod constants;
pub mod corpus;
pub mod dag;
pub mod error;
pub mod martingale;
pub mod measure;
pub mod search;
pub mod verify;

pub use error::{Error, Result};
pub use measure::{Atom, DistFunctional, Distribution, Domain, IntervalQuery, MonotoneMap, StepFunction};
