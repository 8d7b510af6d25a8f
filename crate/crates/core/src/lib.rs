//! Certified value bounds for arbitrary policies on Markov decision
//! processes accessed through a generative model.
//!
//! For a policy `pi`, [`uvip`] computes an upper-biased estimate `V_up` of
//! the optimal value; together with `V^pi` it brackets `V*` and yields a
//! computable bound on the suboptimality gap of `pi`.

pub mod dp;
pub mod env;
pub mod error;
pub mod experiments;
pub mod lipschitz;
pub mod manifest;
pub mod mdp;
pub mod policy;
pub mod reinforce;
pub mod rng;
pub mod scripted;
pub mod settings;
pub mod uvip;

pub use error::{Error, Result};
