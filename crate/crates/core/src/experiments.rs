//! Command implementations behind the CLI. Each command writes its outputs
//! and a run manifest into one directory and returns the numbers it wrote,
//! so tests can drive the same code paths.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use rand::Rng;
use rayon::prelude::*;

use crate::dp::{
    bellman_residual, greedy_policy, mean_stderr, policy_value_exact, value_iteration, Estimate, ViOptions,
};
use crate::env::{
    make_acrobot, make_cartpole, make_chain, make_frozen_lake, make_garnet, toy_mdp, ContinuousModel, GarnetSpec,
};
use crate::error::{Error, Result};
use crate::lipschitz::{covering_radius_indexed, default_probe_size, uniform_probe, Coordinates};
use crate::manifest::ManifestBuilder;
use crate::mdp::{TabularMdp, TabularSampler};
use crate::policy::{Policy, TabularPolicy};
use crate::reinforce::{reinforce_tabular, ReinforceConfig};
use crate::rng::{stream, Purpose};
use crate::scripted::{ld_cartpole_policy, random_uniform, ScriptedPolicy, UniformPolicy};
use crate::settings::{EnvSpec, ExperimentConfig, PolicySource, ReinforceSettings, SnapshotIndex};
use crate::uvip::{
    martingale_check, uvip_run_continuous, uvip_run_tabular, BoundsReport, ContinuousRun, UvipConfig,
};

/// Environment variable naming the default output directory.
pub const OUT_DIR_VAR: &str = "UVIP_OUT_DIR";

pub fn default_out_dir() -> PathBuf {
    std::env::var_os(OUT_DIR_VAR).map_or_else(|| PathBuf::from("out"), PathBuf::from)
}

pub fn tabular_mdp(spec: &EnvSpec) -> Result<TabularMdp> {
    match spec {
        EnvSpec::Toy => Ok(toy_mdp()),
        EnvSpec::Chain(c) => make_chain(c),
        EnvSpec::Garnet(g) => make_garnet(g),
        EnvSpec::FrozenLake { gamma } => make_frozen_lake().with_gamma(*gamma),
        EnvSpec::File(p) => TabularMdp::from_text(&std::fs::read_to_string(p)?),
        EnvSpec::CartPole(_) | EnvSpec::Acrobot(_) => Err(Error::NotTabular),
    }
}

/// Policies over continuous states that configs can name.
#[derive(Debug, Clone)]
pub enum BoxPolicy {
    Scripted(ScriptedPolicy),
    Random(UniformPolicy),
    Constant { action: usize, n_actions: usize },
}

impl Policy<Vec<f64>> for BoxPolicy {
    fn n_actions(&self) -> usize {
        match self {
            BoxPolicy::Scripted(p) => Policy::<Vec<f64>>::n_actions(p),
            BoxPolicy::Random(p) => Policy::<Vec<f64>>::n_actions(p),
            BoxPolicy::Constant { n_actions, .. } => *n_actions,
        }
    }

    fn act(&self, x: &Vec<f64>, u: f64) -> usize {
        match self {
            BoxPolicy::Scripted(p) => p.act(x, u),
            BoxPolicy::Random(p) => p.act(x, u),
            BoxPolicy::Constant { action, .. } => *action,
        }
    }

    fn is_deterministic(&self) -> bool {
        !matches!(self, BoxPolicy::Random(_))
    }
}

fn box_policy(src: &PolicySource, env: &EnvSpec, n_actions: usize) -> Result<BoxPolicy> {
    match src {
        PolicySource::Scripted(name) if name == "ld_cartpole" => match env {
            EnvSpec::CartPole(_) => Ok(BoxPolicy::Scripted(ld_cartpole_policy())),
            _ => Err(Error::InvalidSpec("ld_cartpole only applies to cartpole".into())),
        },
        PolicySource::Random => Ok(BoxPolicy::Random(random_uniform(n_actions)?)),
        PolicySource::Constant(a) if *a < n_actions => Ok(BoxPolicy::Constant { action: *a, n_actions }),
        PolicySource::Constant(a) => Err(Error::ActionOutOfRange { action: *a, count: n_actions }),
        other => Err(Error::InvalidSpec(format!("policy {other:?} is not available on {}", env.name()))),
    }
}

/// A tabular policy with the label used in file names and summaries.
#[derive(Debug, Clone)]
pub struct LabelledPolicy {
    pub label: String,
    /// VI iteration or REINFORCE episode count; 0 for fixed policies.
    pub index: usize,
    pub policy: TabularPolicy,
}

fn vi_snapshot_policies(m: &TabularMdp, eps: f64, schedule: &[SnapshotIndex]) -> Result<Vec<LabelledPolicy>> {
    let k_final = value_iteration(m, eps, &ViOptions::default())?.iterations;
    let mut ks: Vec<usize> = schedule
        .iter()
        .map(|s| match s {
            SnapshotIndex::At(k) => (*k).clamp(1, k_final),
            SnapshotIndex::Mid => (k_final / 2).max(1),
            SnapshotIndex::Final => k_final,
        })
        .collect();
    ks.sort_unstable();
    ks.dedup();
    let vi = value_iteration(m, eps, &ViOptions { snapshots: ks, ..Default::default() })?;
    Ok(vi
        .snapshots
        .iter()
        .map(|s| LabelledPolicy { label: format!("vi_{}", s.k), index: s.k, policy: greedy_policy(&s.q) })
        .collect())
}

fn reinforce_policies(g: &TabularSampler, r: &ReinforceSettings, seed: u64) -> Result<Vec<LabelledPolicy>> {
    let cfg = ReinforceConfig {
        episodes: r.episodes,
        lr: r.lr,
        horizon: r.horizon,
        start_state: r.start,
        snapshots: r.snapshots.clone(),
    };
    let mut rng = stream(seed, Purpose::Policy, &[]);
    Ok(reinforce_tabular(g, &cfg, &mut rng)?
        .into_iter()
        .map(|(ep, policy)| LabelledPolicy { label: format!("reinforce_{ep}"), index: ep, policy })
        .collect())
}

/// Resolves the configured policy source into one or more tabular policies.
pub fn tabular_policies(cfg: &ExperimentConfig, g: &TabularSampler) -> Result<Vec<LabelledPolicy>> {
    let m = g.mdp();
    let fixed = |label: &str, policy| Ok(vec![LabelledPolicy { label: label.into(), index: 0, policy }]);
    match &cfg.policy {
        PolicySource::Greedy => {
            let vi = value_iteration(m, cfg.vi_eps, &ViOptions::default())?;
            fixed("greedy", greedy_policy(&vi.q))
        }
        PolicySource::ViSnapshots(s) => vi_snapshot_policies(m, cfg.vi_eps, s),
        PolicySource::Reinforce(r) => reinforce_policies(g, r, cfg.uvip.seed),
        PolicySource::Constant(a) => fixed("constant", TabularPolicy::constant(m.n_states(), m.n_actions(), *a)?),
        PolicySource::Random => fixed("random", TabularPolicy::uniform(m.n_states(), m.n_actions())),
        PolicySource::File(p) => fixed("file", TabularPolicy::from_text(&std::fs::read_to_string(p)?, m.n_actions())?),
        PolicySource::Scripted(name) => Err(Error::InvalidSpec(format!("scripted policy `{name}` needs a box environment"))),
    }
}

fn manifest(cfg: &ExperimentConfig, out: &Path, command: &str) -> Result<ManifestBuilder> {
    ManifestBuilder::new(out, command, cfg.emit(), cfg.uvip.fingerprint())
}

fn vector_csv(header: &str, v: &[f64]) -> String {
    let mut s = format!("state,{header}\n");
    for (x, val) in v.iter().enumerate() {
        writeln!(s, "{x},{val}").unwrap();
    }
    s
}

#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub v_star: Vec<f64>,
    pub policy: TabularPolicy,
    pub iterations: usize,
    pub residual: f64,
}

/// Value iteration to `vi_eps`; writes `v_star.csv`, `q_star.csv`,
/// `policy.txt` and `mdp.txt`.
pub fn cmd_solve(cfg: &ExperimentConfig, out: &Path) -> Result<SolveOutput> {
    let m = tabular_mdp(&cfg.env)?;
    let mut mf = manifest(cfg, out, "solve")?;
    let vi = mf.stage("value_iteration", || value_iteration(&m, cfg.vi_eps, &ViOptions::default()))?;
    let policy = greedy_policy(&vi.q);
    let residual = bellman_residual(&m, &vi.v)?;
    mf.write("v_star.csv", vector_csv("v", &vi.v).as_bytes())?;
    let mut q = String::from("state");
    for a in 0..m.n_actions() {
        write!(q, ",a{a}").unwrap();
    }
    q.push('\n');
    for x in 0..m.n_states() {
        let row: Vec<String> = vi.q.row(x).iter().map(|v| v.to_string()).collect();
        writeln!(q, "{x},{}", row.join(",")).unwrap();
    }
    mf.write("q_star.csv", q.as_bytes())?;
    mf.write("policy.txt", policy.to_text().as_bytes())?;
    mf.write("mdp.txt", m.to_text().as_bytes())?;
    mf.note("iterations", vi.iterations);
    mf.note("bellman_residual", residual);
    mf.finish()?;
    Ok(SolveOutput { v_star: vi.v, policy, iterations: vi.iterations, residual })
}

/// `V^pi`: exact on tabular models, rollout estimates at the design points
/// otherwise. Writes `v_pi.csv`.
pub fn cmd_evaluate(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<Estimate>> {
    let mut mf = manifest(cfg, out, "evaluate")?;
    let est = match &cfg.env {
        EnvSpec::CartPole(s) => evaluate_box(&make_cartpole(s)?, cfg, &mut mf)?,
        EnvSpec::Acrobot(s) => evaluate_box(&make_acrobot(s)?, cfg, &mut mf)?,
        _ => {
            let g = tabular_mdp(&cfg.env)?.to_generative()?;
            let pi = last_policy(cfg, &g)?;
            let v = mf.stage("policy_value_exact", || policy_value_exact(g.mdp(), &pi.policy))?;
            mf.write("v_pi.csv", vector_csv("v_pi", &v).as_bytes())?;
            v.into_iter().map(|mean| Estimate { mean, stderr: 0.0 }).collect()
        }
    };
    mf.finish()?;
    Ok(est)
}

fn last_policy(cfg: &ExperimentConfig, g: &TabularSampler) -> Result<LabelledPolicy> {
    tabular_policies(cfg, g)?.pop().ok_or(Error::InvalidSpec("policy schedule is empty".into()))
}

fn evaluate_box<G: ContinuousModel>(g: &G, cfg: &ExperimentConfig, mf: &mut ManifestBuilder) -> Result<Vec<Estimate>> {
    let pi = box_policy(&cfg.policy, &cfg.env, g.actions().count)?;
    let design = crate::uvip::draw_design(g, cfg.uvip.n_design, cfg.uvip.seed)?;
    let ev = cfg.vpi.evaluator(g, cfg.uvip.seed);
    let est: Vec<Estimate> = mf.stage("rollouts", || design.points.par_iter().map(|x| ev.estimate(g, &pi, x)).collect());
    let dim = g.state_space().dim();
    let mut s = String::new();
    for k in 0..dim {
        write!(s, "x{k},").unwrap();
    }
    s.push_str("v_pi,stderr\n");
    for (x, e) in design.points.iter().zip(&est) {
        for c in x {
            write!(s, "{c},").unwrap();
        }
        writeln!(s, "{},{}", e.mean, e.stderr).unwrap();
    }
    mf.write("v_pi.csv", s.as_bytes())?;
    Ok(est)
}

#[derive(Debug, Clone)]
pub struct UvipOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub max_gap: Estimate,
    pub mean_gap: Estimate,
    pub csv: String,
}

impl UvipOutcome {
    fn from_report<S: Coordinates>(r: &BoundsReport<S>) -> Self {
        UvipOutcome {
            converged: r.converged(),
            iterations: r.max_iterations(),
            max_gap: r.max_gap(),
            mean_gap: r.mean_gap(),
            csv: r.to_csv(),
        }
    }
}

/// Certifies the configured policy (the last one for schedules); writes
/// `bounds.csv`. `converged` is false when any replicate hit `k_max`.
pub fn cmd_uvip(cfg: &ExperimentConfig, out: &Path) -> Result<UvipOutcome> {
    let mut mf = manifest(cfg, out, "uvip")?;
    let outcome = match &cfg.env {
        EnvSpec::CartPole(s) => uvip_box(&make_cartpole(s)?, cfg, &mut mf)?,
        EnvSpec::Acrobot(s) => uvip_box(&make_acrobot(s)?, cfg, &mut mf)?,
        _ => {
            let g = tabular_mdp(&cfg.env)?.to_generative()?;
            let pi = mf.stage("policy", || last_policy(cfg, &g))?;
            let report = mf.stage("uvip", || uvip_run_tabular(&g, &pi.policy, &cfg.uvip))?;
            mf.note("policy", &pi.label);
            UvipOutcome::from_report(&report)
        }
    };
    mf.write("bounds.csv", outcome.csv.as_bytes())?;
    mf.note("converged", outcome.converged);
    mf.note("iterations", outcome.iterations);
    mf.note("max_gap", outcome.max_gap.mean);
    mf.finish()?;
    Ok(outcome)
}

fn uvip_box<G: ContinuousModel>(g: &G, cfg: &ExperimentConfig, mf: &mut ManifestBuilder) -> Result<UvipOutcome> {
    let pi = box_policy(&cfg.policy, &cfg.env, g.actions().count)?;
    let run = mf.stage("uvip", || uvip_run_continuous(g, &pi, &cfg.uvip, &cfg.vpi))?;
    mf.note("final_lip", run.final_lip());
    Ok(UvipOutcome::from_report(&run.report))
}

#[derive(Debug, Clone)]
pub struct Figure1Row {
    pub label: String,
    pub index: usize,
    pub mean_gap: Estimate,
    pub max_gap: Estimate,
    pub converged: bool,
}

/// Certifies every policy of the schedule (plus REINFORCE snapshots when
/// configured); writes `gap_<label>.csv` per snapshot and `summary.csv`.
pub fn cmd_figure1(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<Figure1Row>> {
    let g = tabular_mdp(&cfg.env)?.to_generative()?;
    let mut mf = manifest(cfg, out, "figure1")?;
    let mut policies = mf.stage("policies", || tabular_policies(cfg, &g))?;
    if let Some(r) = &cfg.reinforce {
        if !matches!(cfg.policy, PolicySource::Reinforce(_)) {
            policies.extend(mf.stage("reinforce", || reinforce_policies(&g, r, cfg.uvip.seed))?);
        }
    }
    let mut rows = Vec::new();
    let mut summary = String::from("label,index,mean_gap,mean_gap_stderr,max_gap,max_gap_stderr,converged\n");
    for p in &policies {
        info!("certifying {}", p.label);
        let report = mf.stage(&format!("uvip_{}", p.label), || uvip_run_tabular(&g, &p.policy, &cfg.uvip))?;
        mf.write(&format!("gap_{}.csv", p.label), report.to_csv().as_bytes())?;
        let row = Figure1Row {
            label: p.label.clone(),
            index: p.index,
            mean_gap: report.mean_gap(),
            max_gap: report.max_gap(),
            converged: report.converged(),
        };
        writeln!(
            summary,
            "{},{},{},{},{},{},{}",
            row.label, row.index, row.mean_gap.mean, row.mean_gap.stderr, row.max_gap.mean, row.max_gap.stderr, row.converged
        )
        .unwrap();
        rows.push(row);
    }
    mf.write("summary.csv", summary.as_bytes())?;
    mf.finish()?;
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub state: Vec<f64>,
    pub v_pi: Estimate,
    pub v_up: Estimate,
    /// `L * covering radius`, added off the design.
    pub inflation: f64,
}

#[derive(Debug, Clone)]
pub struct Figure3Output {
    pub rows: Vec<TrajectoryRow>,
    /// Trajectory-averaged `v_up - v_pi`; the standard error combines the
    /// replicate spread of `v_up` with the rollout error of `v_pi`.
    pub mean_gap: Estimate,
    pub covering_radius: f64,
    pub converged: bool,
}

/// Runs UVIP on a box environment, then follows one trajectory of the policy
/// for up to `trajectory_steps` non-terminal states and reports the bounds
/// along it in `trajectory.csv`.
pub fn cmd_figure3(cfg: &ExperimentConfig, out: &Path) -> Result<Figure3Output> {
    let mut mf = manifest(cfg, out, "figure3")?;
    let res = match &cfg.env {
        EnvSpec::CartPole(s) => figure3_box(&make_cartpole(s)?, cfg, &mut mf)?,
        EnvSpec::Acrobot(s) => figure3_box(&make_acrobot(s)?, cfg, &mut mf)?,
        _ => return Err(Error::NotBox),
    };
    mf.note("mean_gap", res.mean_gap.mean);
    mf.note("mean_gap_stderr", res.mean_gap.stderr);
    mf.finish()?;
    Ok(res)
}

/// States of one trajectory, stopping before the first absorbing state.
pub fn sample_trajectory<G: ContinuousModel, P: Policy<Vec<f64>>>(g: &G, pi: &P, steps: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, Purpose::Trajectory, &[]);
    let noise = g.noise();
    let mut xi = vec![0.0; noise.dim];
    let mut s = g.initial_state(&mut rng);
    let mut states = Vec::with_capacity(steps);
    while states.len() < steps && !g.is_terminal(&s) {
        let a = pi.act(&s, rng.gen());
        noise.fill(&mut rng, &mut xi);
        let next = g.step(&s, a, &xi);
        states.push(std::mem::replace(&mut s, next));
    }
    states
}

fn figure3_box<G: ContinuousModel>(g: &G, cfg: &ExperimentConfig, mf: &mut ManifestBuilder) -> Result<Figure3Output> {
    let pi = box_policy(&cfg.policy, &cfg.env, g.actions().count)?;
    let run: ContinuousRun = mf.stage("uvip", || uvip_run_continuous(g, &pi, &cfg.uvip, &cfg.vpi))?;
    let rho = mf.stage("covering_radius", || -> Result<f64> {
        let mut rng = stream(cfg.uvip.seed, Purpose::Probe, &[run.design.len() as u64]);
        let probe = uniform_probe(g.state_space(), default_probe_size(run.design.len()), &mut rng)?;
        covering_radius_indexed(&run.design, &probe)
    })?;
    let states = sample_trajectory(g, &pi, cfg.trajectory_steps, cfg.uvip.seed);
    let ev = cfg.vpi.evaluator(g, cfg.uvip.seed);
    let lip = run.final_lip();
    let rows: Vec<TrajectoryRow> = states
        .par_iter()
        .map(|x| TrajectoryRow {
            v_pi: ev.estimate(g, &pi, x),
            v_up: run.upper_at(x),
            inflation: if run.is_design_point(x) { 0.0 } else { lip * rho },
            state: x.clone(),
        })
        .collect();

    let t = rows.len().max(1) as f64;
    let vpi_mean = rows.iter().map(|r| r.v_pi.mean).sum::<f64>() / t;
    let vpi_se = rows.iter().map(|r| r.v_pi.stderr.powi(2)).sum::<f64>().sqrt() / t;
    let per_rep: Vec<f64> = run
        .upper
        .iter()
        .map(|f| rows.iter().map(|r| f.value(&r.state)).sum::<f64>() / t - vpi_mean)
        .collect();
    let rep = mean_stderr(&per_rep);
    let mean_gap = Estimate { mean: rep.mean, stderr: (rep.stderr.powi(2) + vpi_se.powi(2)).sqrt() };

    let dim = g.state_space().dim();
    let mut s = String::from("t,");
    for k in 0..dim {
        write!(s, "x{k},").unwrap();
    }
    s.push_str("v_pi,v_pi_stderr,v_up,v_up_stderr,inflation,upper_bound,gap\n");
    for (i, r) in rows.iter().enumerate() {
        write!(s, "{i},").unwrap();
        for c in &r.state {
            write!(s, "{c},").unwrap();
        }
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.v_pi.mean,
            r.v_pi.stderr,
            r.v_up.mean,
            r.v_up.stderr,
            r.inflation,
            r.v_up.mean + r.inflation,
            r.v_up.mean - r.v_pi.mean
        )
        .unwrap();
    }
    mf.write("trajectory.csv", s.as_bytes())?;
    mf.write("bounds.csv", run.report.to_csv().as_bytes())?;
    mf.note("final_lip", lip);
    mf.note("covering_radius", rho);
    Ok(Figure3Output { rows, mean_gap, covering_radius: rho, converged: run.report.converged() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub check: String,
    pub env: String,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckRow {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

/// `max_k (|V_{k+1} - V*| - gamma |V_k - V*|)` and `max_{k,x} (V*(x) - V_k(x))`
/// for value iteration started at `r_max / (1 - gamma)`.
pub fn vi_contraction_profile(m: &TabularMdp, v_star: &[f64], iterations: usize) -> Result<(f64, f64)> {
    let top = vec![m.r_max() / (1.0 - m.gamma()); m.n_states()];
    let vi = value_iteration(m, 1e-300, &ViOptions { init: Some(top), keep_all: true, max_iter: Some(iterations), ..Default::default() })?;
    let dist = |v: &[f64]| v.iter().zip(v_star).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
    let excess = vi
        .iterates
        .windows(2)
        .map(|w| dist(&w[1]) - m.gamma() * dist(&w[0]))
        .fold(f64::NEG_INFINITY, f64::max);
    let below = vi
        .iterates
        .iter()
        .flat_map(|v| v.iter().zip(v_star).map(|(x, y)| y - x))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((excess, below))
}

/// Invariant suite over the built-in tabular environments; writes
/// `checks.csv`.
pub fn cmd_check(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<CheckRow>> {
    let envs: Vec<(&str, TabularMdp)> = vec![
        ("toy", toy_mdp()),
        ("chain", make_chain(&Default::default())?),
        ("garnet", make_garnet(&GarnetSpec::default())?),
        ("frozen_lake", make_frozen_lake()),
    ];
    let mut mf = manifest(cfg, out, "check")?;
    let mut rows = Vec::new();
    let mut push = |check: &str, env: &str, value: f64, tolerance: f64| {
        rows.push(CheckRow { check: check.into(), env: env.into(), value, tolerance })
    };
    for (name, m) in &envs {
        let vi = value_iteration(m, 1e-12, &ViOptions::default())?;
        let uniform = TabularPolicy::uniform(m.n_states(), m.n_actions());
        push("martingale_uniform", name, martingale_check(m, &uniform)?, 1e-10);
        push("martingale_greedy", name, martingale_check(m, &greedy_policy(&vi.q))?, 1e-10);
        push("bellman_residual", name, bellman_residual(m, &vi.v)?, 1e-9);
        let (excess, below) = vi_contraction_profile(m, &vi.v, 50)?;
        push("vi_contraction", name, excess, 1e-9);
        push("vi_monotone_upper", name, below, 1e-9);
    }
    let toy = toy_mdp().to_generative()?;
    let quick = UvipConfig { m1: 5, m2: 5, replicates: 2, ..cfg.uvip.clone() };
    let optimal = uvip_run_tabular(&toy, &TabularPolicy::constant(2, 2, 1)?, &quick)?;
    push("optimal_collapse", "toy", optimal.gaps().iter().fold(0.0_f64, |a, g| a.max(g.abs())), 0.0);

    let chain = make_chain(&Default::default())?.to_generative()?;
    let small = UvipConfig { m1: 200, m2: 200, replicates: 5, ..cfg.uvip.clone() };
    let r = uvip_run_tabular(&chain, &TabularPolicy::uniform(10, 2), &small)?;
    let worst = r.rows.iter().map(|row| row.v_pi - row.v_up - 3.0 * row.stderr).fold(f64::NEG_INFINITY, f64::max);
    push("gap_nonnegative", "chain", worst, 1e-12);

    let mut s = String::from("check,env,value,tolerance,pass\n");
    for r in &rows {
        writeln!(s, "{},{},{},{},{}", r.check, r.env, r.value, r.tolerance, r.passed()).unwrap();
    }
    mf.write("checks.csv", s.as_bytes())?;
    mf.note("all_passed", rows.iter().all(CheckRow::passed));
    mf.finish()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::ChainSpec;
    use crate::mdp::GenerativeModel;

    fn small(env: EnvSpec, policy: PolicySource) -> ExperimentConfig {
        ExperimentConfig {
            env,
            policy,
            uvip: UvipConfig { m1: 20, m2: 20, replicates: 2, k_max: 30, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn snapshot_schedule_resolves_mid_and_final() {
        let m = make_chain(&ChainSpec::default()).unwrap();
        let k = value_iteration(&m, 1e-10, &ViOptions::default()).unwrap().iterations;
        let ps = vi_snapshot_policies(&m, 1e-10, &[SnapshotIndex::At(1), SnapshotIndex::Mid, SnapshotIndex::Final]).unwrap();
        let idx: Vec<usize> = ps.iter().map(|p| p.index).collect();
        assert_eq!(idx, vec![1, k / 2, k]);
        let one = vi_snapshot_policies(&m, 1e-10, &[SnapshotIndex::Final]).unwrap();
        assert_eq!(one.len(), 1);
    }

    #[test]
    fn solve_writes_verified_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(EnvSpec::Chain(ChainSpec::default()), PolicySource::Greedy);
        let out = cmd_solve(&cfg, dir.path()).unwrap();
        assert!(out.residual <= 1e-9);
        crate::manifest::RunManifest::load_verified(dir.path()).unwrap();
        let cp = small(EnvSpec::CartPole(Default::default()), PolicySource::Random);
        assert!(matches!(cmd_solve(&cp, dir.path()), Err(Error::NotTabular)));
    }

    #[test]
    fn figure3_rejects_tabular_env() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(EnvSpec::Toy, PolicySource::Greedy);
        assert!(matches!(cmd_figure3(&cfg, dir.path()), Err(Error::NotBox)));
    }

    #[test]
    fn box_policies_by_name() {
        let cp = EnvSpec::CartPole(Default::default());
        assert!(box_policy(&PolicySource::Scripted("ld_cartpole".into()), &cp, 2).is_ok());
        assert!(box_policy(&PolicySource::Scripted("ld_cartpole".into()), &EnvSpec::Acrobot(Default::default()), 3).is_err());
        assert!(box_policy(&PolicySource::Constant(3), &cp, 2).is_err());
        assert!(box_policy(&PolicySource::Greedy, &cp, 2).is_err());
    }

    #[test]
    fn trajectory_stops_before_absorption() {
        let g = make_cartpole(&Default::default()).unwrap();
        let lazy = BoxPolicy::Constant { action: 0, n_actions: 2 };
        let states = sample_trajectory(&g, &lazy, 500, 3);
        assert!(!states.is_empty() && states.len() < 500);
        assert!(states.iter().all(|s| !g.is_terminal(s)));
        assert_eq!(sample_trajectory(&g, &lazy, 1, 3).len(), 1);
    }
}
