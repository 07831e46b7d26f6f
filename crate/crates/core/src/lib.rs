//! Optimal allocation of limited attention between two biased Poisson news
//! sources before an irreversible decision.
//!
//! The crate solves the continuous-time problem in closed form
//! ([`policy::RegimeSolution`]), checks it against a discrete-time dynamic
//! program ([`oracle`]), simulates individual belief paths ([`dynamics`]) and
//! populations of decision makers ([`population`]), and covers the
//! extensions in [`variants`] and [`gamma`].

pub mod branch;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod gamma;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod policy;
pub mod population;
pub mod variants;

pub use error::{Error, Result};
pub use model::{Action, ModelParams, Regime, State};
