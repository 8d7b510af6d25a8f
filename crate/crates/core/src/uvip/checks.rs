use statrs::distribution::{ContinuousCDF, Normal};

use crate::dp::policy_value_exact;
use crate::error::{Error, Result};
use crate::mdp::{TabularMdp, TabularSampler};
use crate::policy::TabularPolicy;

use super::config::UvipConfig;
use super::run::{uvip_run_tabular, BoundsReport, ContinuousRun};

/// `max_x [(M T_P v)(x) - v(x)]`; a value `<= 0` certifies an upper solution.
pub fn upper_solution_check(m: &TabularMdp, v_up: &[f64]) -> Result<f64> {
    let tv = m.bellman_q(v_up)?.max_per_state();
    Ok(tv.iter().zip(v_up).map(|(t, v)| t - v).fold(f64::NEG_INFINITY, f64::max))
}

/// `max_{x,a} |sum_y P(y|x,a) Phi(y)|` with
/// `Phi(y) = V^pi(y) - (P^a V^pi)(x) - shift`.
pub fn martingale_defect(m: &TabularMdp, v_pi: &[f64], shift: f64) -> Result<f64> {
    let pv = m.kernel_apply(v_pi)?;
    let mut worst = 0.0_f64;
    for x in 0..m.n_states() {
        for a in 0..m.n_actions() {
            let center = pv.get(x, a) + shift;
            let s: f64 = m.row(x, a).iter().zip(v_pi).map(|(p, v)| p * (v - center)).sum();
            worst = worst.max(s.abs());
        }
    }
    Ok(worst)
}

/// Exact kernel check that the control variate has zero conditional mean.
pub fn martingale_check(m: &TabularMdp, pi: &TabularPolicy) -> Result<f64> {
    let v_pi = policy_value_exact(m, pi)?;
    martingale_defect(m, &v_pi, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

/// One-sided normal quantile `z` with `P(Z > z) = delta`.
pub fn z_score(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidSpec(format!("confidence level delta = {delta} outside (0, 1)")));
    }
    Ok(Normal::standard().inverse_cdf(1.0 - delta))
}

/// `[v_pi, mean v_up + z(delta) stderr]` at each design point of a report.
pub fn confidence_interval<S>(report: &BoundsReport<S>, delta: f64) -> Result<Vec<Interval>> {
    let reps = report.replicate_values.len();
    if reps < 2 {
        return Err(Error::TooFewReplicates { needed: 2, got: reps });
    }
    let z = z_score(delta)?;
    Ok(report
        .rows
        .iter()
        .map(|r| Interval { lower: r.v_pi, upper: r.v_up + z * r.stderr })
        .collect())
}

impl ContinuousRun {
    /// Interval at an arbitrary state. Off the design, the upper end is
    /// inflated by `L * covering_radius`.
    pub fn interval_at(&self, x: &Vec<f64>, v_pi: f64, delta: f64, covering_radius: f64) -> Result<Interval> {
        if self.upper.len() < 2 {
            return Err(Error::TooFewReplicates { needed: 2, got: self.upper.len() });
        }
        let z = z_score(delta)?;
        let up = self.upper_at(x);
        let inflation = if self.is_design_point(x) { 0.0 } else { self.final_lip() * covering_radius };
        Ok(Interval { lower: v_pi, upper: up.mean + z * up.stderr + inflation })
    }
}

/// Sample variance over `n_reps` independent runs of the converged upper
/// value at each state.
pub fn variance_profile(g: &TabularSampler, pi: &TabularPolicy, cfg: &UvipConfig, n_reps: usize) -> Result<Vec<f64>> {
    if n_reps < 10 {
        return Err(Error::TooFewReplicates { needed: 10, got: n_reps });
    }
    let report = uvip_run_tabular(g, pi, &UvipConfig { replicates: n_reps, ..cfg.clone() })?;
    Ok(report.rows.iter().map(|r| r.stderr * r.stderr * n_reps as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{value_iteration, ViOptions};
    use crate::env::{make_chain, toy_mdp, ChainSpec};

    #[test]
    fn upper_solution_examples() {
        let m = make_chain(&ChainSpec::default()).unwrap();
        let top = vec![m.r_max() / (1.0 - m.gamma()); 10];
        assert!(upper_solution_check(&m, &top).unwrap() <= 0.0);
        let star = value_iteration(&m, 1e-12, &ViOptions::default()).unwrap().v;
        assert!(upper_solution_check(&m, &star).unwrap().abs() <= 1e-9);
        let below: Vec<f64> = star.iter().map(|v| v - 1.0).collect();
        assert!((upper_solution_check(&m, &below).unwrap() - (1.0 - m.gamma())).abs() < 1e-9);
    }

    #[test]
    fn martingale_identity_and_linearity() {
        let m = make_chain(&ChainSpec::default()).unwrap();
        let pi = TabularPolicy::uniform(10, 2);
        assert!(martingale_check(&m, &pi).unwrap() <= 1e-10);
        let v = policy_value_exact(&m, &pi).unwrap();
        let d = martingale_defect(&m, &v, 0.25).unwrap();
        assert!((d - 0.25).abs() < 1e-10);
        assert!(martingale_check(&toy_mdp(), &TabularPolicy::constant(2, 2, 0).unwrap()).unwrap() <= 1e-10);
    }

    #[test]
    fn intervals_need_two_replicates() {
        let g = toy_mdp().to_generative().unwrap();
        let pi = TabularPolicy::constant(2, 2, 0).unwrap();
        let cfg = UvipConfig { m1: 2, m2: 2, replicates: 1, eps_stop: 1e-12, ..Default::default() };
        let one = uvip_run_tabular(&g, &pi, &cfg).unwrap();
        assert!(matches!(confidence_interval(&one, 0.05), Err(Error::TooFewReplicates { .. })));
        let two = uvip_run_tabular(&g, &pi, &UvipConfig { replicates: 2, ..cfg }).unwrap();
        for iv in confidence_interval(&two, 0.05).unwrap() {
            assert_eq!(iv.lower, 0.0);
            assert!((iv.upper - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn z_scores() {
        assert!((z_score(0.5).unwrap()).abs() < 1e-12);
        assert!((z_score(0.05).unwrap() - 1.6448536269514722).abs() < 1e-9);
        assert!(z_score(0.0).is_err());
    }
}
