use std::fmt::Write as _;

use log::{debug, warn};

use crate::dp::{mean_stderr, policy_value_exact, sup_diff, Estimate, RolloutEvaluator};
use crate::env::ContinuousModel;
use crate::error::{Error, Result};
use crate::lipschitz::{build_interpolant, Coordinates, DesignSet, Interpolant, LipMode};
use crate::mdp::{GenerativeModel, TabularSampler};
use crate::policy::{Policy, TabularPolicy};
use crate::rng::{stream, Purpose};

use super::config::UvipConfig;
use super::sweep::{uvip_sweep, FnValue, StateValue, SweepKey};

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateTrace {
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm change of the last sweep.
    pub last_change: f64,
    /// Lipschitz estimate after each sweep (interpolated runs only).
    pub lip_sequence: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsRow<S> {
    pub state: S,
    pub v_pi: f64,
    /// Mean over replicates.
    pub v_up: f64,
    pub gap: f64,
    /// Standard error of `v_up` over replicates.
    pub stderr: f64,
    pub replicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport<S> {
    pub rows: Vec<BoundsRow<S>>,
    /// `replicate_values[r][i]`: converged upper value of replicate `r` at point `i`.
    pub replicate_values: Vec<Vec<f64>>,
    pub traces: Vec<ReplicateTrace>,
    pub fingerprint: String,
}

impl<S> BoundsReport<S> {
    fn assemble(states: Vec<S>, v_pi: &[f64], replicate_values: Vec<Vec<f64>>, traces: Vec<ReplicateTrace>, cfg: &UvipConfig) -> Self {
        let reps = replicate_values.len();
        let rows = states
            .into_iter()
            .enumerate()
            .map(|(i, state)| {
                let col: Vec<f64> = replicate_values.iter().map(|r| r[i]).collect();
                let est = mean_stderr(&col);
                BoundsRow { state, v_pi: v_pi[i], v_up: est.mean, gap: est.mean - v_pi[i], stderr: est.stderr, replicates: reps }
            })
            .collect();
        BoundsReport { rows, replicate_values, traces, fingerprint: cfg.fingerprint() }
    }

    pub fn converged(&self) -> bool {
        self.traces.iter().all(|t| t.converged)
    }

    pub fn max_iterations(&self) -> usize {
        self.traces.iter().map(|t| t.iterations).max().unwrap_or(0)
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.gap).collect()
    }

    /// Mean and standard error over replicates of `max_x (v_up_r(x) - v_pi(x))`.
    pub fn max_gap(&self) -> Estimate {
        let per_rep: Vec<f64> = self
            .replicate_values
            .iter()
            .map(|vals| vals.iter().zip(&self.rows).map(|(v, r)| v - r.v_pi).fold(f64::NEG_INFINITY, f64::max))
            .collect();
        mean_stderr(&per_rep)
    }

    /// Mean and standard error over replicates of the state-averaged gap.
    pub fn mean_gap(&self) -> Estimate {
        let n = self.rows.len() as f64;
        let per_rep: Vec<f64> = self
            .replicate_values
            .iter()
            .map(|vals| vals.iter().zip(&self.rows).map(|(v, r)| v - r.v_pi).sum::<f64>() / n)
            .collect();
        mean_stderr(&per_rep)
    }
}

impl<S: Coordinates> BoundsReport<S> {
    /// `state..., v_pi, v_up, gap, stderr`; tabular states use one `state` column.
    pub fn to_csv(&self) -> String {
        let dim = self.rows.first().map_or(1, |r| r.state.coords().len());
        let mut s = String::new();
        if dim == 1 {
            s.push_str("state,");
        } else {
            for k in 0..dim {
                write!(s, "x{k},").unwrap();
            }
        }
        s.push_str("v_pi,v_up,gap,stderr\n");
        for r in &self.rows {
            for c in r.state.coords() {
                write!(s, "{c},").unwrap();
            }
            writeln!(s, "{},{},{},{}", r.v_pi, r.v_up, r.gap, r.stderr).unwrap();
        }
        s
    }
}

/// Runs every replicate of the upper value iteration on `design`.
///
/// `fit` turns the values on the design into the function queried at
/// successors: the identity for tabular runs, the Lipschitz interpolant
/// otherwise.
fn run_replicates<G, C, V, F>(g: &G, v_pi: &C, design: &[G::State], cfg: &UvipConfig, fit: F) -> Result<(Vec<Vec<f64>>, Vec<ReplicateTrace>, Vec<V>)>
where
    G: GenerativeModel,
    C: StateValue<G::State> + ?Sized,
    V: StateValue<G::State>,
    F: Fn(Vec<f64>) -> Result<(V, Option<f64>)>,
{
    cfg.validate()?;
    let upper0 = g.r_max() / (1.0 - g.gamma());
    let mut all_values = Vec::with_capacity(cfg.replicates);
    let mut traces = Vec::with_capacity(cfg.replicates);
    let mut fns = Vec::with_capacity(cfg.replicates);
    for rep in 0..cfg.replicates {
        let mut values = vec![upper0; design.len()];
        let (mut current, _) = fit(values.clone())?;
        let mut trace = ReplicateTrace { iterations: 0, converged: false, last_change: f64::INFINITY, lip_sequence: Vec::new() };
        for k in 1..=cfg.k_max {
            let key = SweepKey { replicate: rep as u64, iteration: k as u64 };
            let next = uvip_sweep(g, v_pi, &current, design, cfg, key);
            trace.last_change = sup_diff(&next, &values);
            trace.iterations = k;
            values = next;
            let (f, lip) = fit(values.clone())?;
            current = f;
            if let Some(l) = lip {
                if cfg.lip_cap.is_some_and(|cap| l > cap) {
                    warn!("replicate {rep}, iteration {k}: Lipschitz estimate {l} exceeds cap {:?}", cfg.lip_cap);
                }
                trace.lip_sequence.push(l);
            }
            if !trace.last_change.is_finite() {
                return Err(Error::InvalidSpec(format!("non-finite sweep change at iteration {k}")));
            }
            if trace.last_change <= cfg.eps_stop {
                trace.converged = true;
                break;
            }
        }
        debug!("replicate {rep}: {} iterations, last change {}", trace.iterations, trace.last_change);
        all_values.push(values);
        traces.push(trace);
        fns.push(current);
    }
    Ok((all_values, traces, fns))
}

/// Tabular UVIP: every state is a design point, `V^pi` is exact, and no
/// interpolation is needed.
pub fn uvip_run_tabular(g: &TabularSampler, pi: &TabularPolicy, cfg: &UvipConfig) -> Result<BoundsReport<usize>> {
    let v_pi = policy_value_exact(g.mdp(), pi)?;
    uvip_run_tabular_with(g, &v_pi, cfg)
}

/// Tabular UVIP against a supplied `V^pi` (or any other control function).
pub fn uvip_run_tabular_with(g: &TabularSampler, v_pi: &[f64], cfg: &UvipConfig) -> Result<BoundsReport<usize>> {
    let n = g.n_states();
    if v_pi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: v_pi.len() });
    }
    let design: Vec<usize> = (0..n).collect();
    let (values, traces, _) = run_replicates(g, v_pi, &design, cfg, |v| Ok((v, None)))?;
    Ok(BoundsReport::assemble(design, v_pi, values, traces, cfg))
}

/// How `V^pi` is supplied to the control variate on continuous models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PolicyValueMode {
    /// Rollout estimates at the design points, Lipschitz-interpolated.
    #[default]
    Interpolated,
    /// Fresh rollouts at every sampled successor.
    Rollout,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyValueConfig {
    pub n_rollouts: usize,
    /// Truncation tolerance; fixes the rollout horizon.
    pub tol: f64,
    pub mode: PolicyValueMode,
}

impl Default for PolicyValueConfig {
    fn default() -> Self {
        PolicyValueConfig { n_rollouts: 20, tol: 1e-3, mode: PolicyValueMode::Interpolated }
    }
}

impl PolicyValueConfig {
    pub fn evaluator<G: GenerativeModel>(&self, g: &G, seed: u64) -> RolloutEvaluator {
        RolloutEvaluator { seed, horizon: g.horizon_for(self.tol), n_rollouts: self.n_rollouts }
    }
}

/// Result of a continuous-state run; keeps each replicate's final
/// interpolant for off-design queries.
#[derive(Debug, Clone)]
pub struct ContinuousRun {
    pub report: BoundsReport<Vec<f64>>,
    pub design: DesignSet<Vec<f64>>,
    pub v_pi_design: Vec<Estimate>,
    pub upper: Vec<Interpolant<Vec<f64>>>,
}

impl ContinuousRun {
    /// Mean and standard error over replicates of the upper value at `x`.
    pub fn upper_at(&self, x: &Vec<f64>) -> Estimate {
        let vals: Vec<f64> = self.upper.iter().map(|f| f.value(x)).collect();
        mean_stderr(&vals)
    }

    /// Mean final Lipschitz constant across replicates.
    pub fn final_lip(&self) -> f64 {
        self.upper.iter().map(|f| f.lip()).sum::<f64>() / self.upper.len() as f64
    }

    pub fn is_design_point(&self, x: &Vec<f64>) -> bool {
        self.design.nearest_distance(x) == 0.0
    }
}

/// Draws the design for a continuous model (shared by all replicates).
pub fn draw_design<G: ContinuousModel>(g: &G, n: usize, seed: u64) -> Result<DesignSet<Vec<f64>>> {
    let mut rng = stream(seed, Purpose::Design, &[n as u64]);
    DesignSet::new((0..n).map(|_| g.sample_state(&mut rng)).collect())
}

/// Approximate UVIP on a continuous model: fixed design, per-iteration
/// central interpolant with re-estimated Lipschitz constant.
pub fn uvip_run_continuous<G, P>(g: &G, pi: &P, cfg: &UvipConfig, pv: &PolicyValueConfig) -> Result<ContinuousRun>
where
    G: ContinuousModel,
    P: Policy<Vec<f64>>,
{
    cfg.validate()?;
    let design = draw_design(g, cfg.n_design, cfg.seed)?;
    let evaluator = pv.evaluator(g, cfg.seed);
    let v_pi_design: Vec<Estimate> = {
        use rayon::prelude::*;
        design.points.par_iter().map(|x| evaluator.estimate(g, pi, x)).collect()
    };
    let v_pi: Vec<f64> = v_pi_design.iter().map(|e| e.mean).collect();
    let fit = |v: Vec<f64>| {
        let f = build_interpolant(design.clone(), v, LipMode::Estimated)?;
        let l = f.lip();
        Ok((f, Some(l)))
    };
    let (values, traces, upper) = match pv.mode {
        PolicyValueMode::Interpolated => {
            let v_pi_fn = build_interpolant(design.clone(), v_pi.clone(), LipMode::Estimated)?;
            run_replicates(g, &v_pi_fn, &design.points, cfg, fit)?
        }
        PolicyValueMode::Rollout => {
            let v_pi_fn = FnValue(|y: &Vec<f64>| evaluator.estimate(g, pi, y).mean);
            run_replicates(g, &v_pi_fn, &design.points, cfg, fit)?
        }
    };
    let report = BoundsReport::assemble(design.points.clone(), &v_pi, values, traces, cfg);
    Ok(ContinuousRun { report, design, v_pi_design, upper })
}
