//! Upper value iteration.
//!
//! Given a policy `pi` with value `V^pi`, the iteration
//!
//! ```text
//! V_{k+1}(x) = E[ max_a { r(x,a) + gamma (V_k(Y^a) - V^pi(Y^a) + (P^a V^pi)(x)) } ],  Y^a ~ P^a(.|x)
//! ```
//!
//! started from `V_0 = r_max / (1 - gamma)` stays above `V*` and converges to
//! an upper solution of the Bellman equation. The term `V^pi(Y) - (P^a V^pi)(x)`
//! has zero conditional mean, so it leaves the fixed point's validity intact
//! while making the inner maximum nearly deterministic when `pi` is close to
//! optimal. `V_up - V^pi` then bounds the suboptimality gap of `pi`.
//!
//! Expectations are replaced by `m2`-sample means, `(P^a V^pi)(x)` by the
//! exact kernel sum or an `m1`-sample mean, and on continuous state spaces
//! `V_k` is carried between iterations by a Lipschitz central interpolant
//! over a fixed design.

mod checks;
mod config;
mod run;
mod sweep;

pub use checks::{
    confidence_interval, martingale_check, martingale_defect, upper_solution_check, variance_profile, z_score,
    Interval,
};
pub use config::{ControlVariate, Coupling, Resampling, UvipConfig};
pub use run::{
    draw_design, uvip_run_continuous, uvip_run_tabular, uvip_run_tabular_with, BoundsReport, BoundsRow,
    ContinuousRun, PolicyValueConfig, PolicyValueMode, ReplicateTrace,
};
pub use sweep::{control_variate_mean, sweep_point, uvip_sweep, Constant, FnValue, StateValue, SweepKey};
