//! Experiment configuration files.
//!
//! A flat `key = value` format with dotted sections:
//!
//! ```text
//! # Chain, Table-1 sample sizes
//! env = chain
//! env.length = 10
//! env.noise_p = 0.1
//! policy = vi_snapshots
//! policy.snapshots = 1, mid, final
//! uvip.m1 = 1000
//! uvip.m2 = 1000
//! seed = 7
//! ```
//!
//! Blank lines and `#` comments are ignored. Unknown keys are errors.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::env::{AcrobotSpec, CartPoleSpec, ChainSpec, GarnetSpec};
use crate::error::{Error, Result};
use crate::uvip::{PolicyValueConfig, PolicyValueMode, UvipConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum EnvSpec {
    Toy,
    Chain(ChainSpec),
    Garnet(GarnetSpec),
    FrozenLake { gamma: f64 },
    CartPole(CartPoleSpec),
    Acrobot(AcrobotSpec),
    /// Tabular MDP in the text format.
    File(PathBuf),
}

impl EnvSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EnvSpec::Toy => "toy",
            EnvSpec::Chain(_) => "chain",
            EnvSpec::Garnet(_) => "garnet",
            EnvSpec::FrozenLake { .. } => "frozen_lake",
            EnvSpec::CartPole(_) => "cartpole",
            EnvSpec::Acrobot(_) => "acrobot",
            EnvSpec::File(_) => "file",
        }
    }

    pub fn is_tabular(&self) -> bool {
        !matches!(self, EnvSpec::CartPole(_) | EnvSpec::Acrobot(_))
    }
}

/// A value-iteration snapshot index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SnapshotIndex {
    At(usize),
    /// Half the converged iteration count.
    Mid,
    Final,
}

impl fmt::Display for SnapshotIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnapshotIndex::At(k) => write!(f, "{k}"),
            SnapshotIndex::Mid => f.write_str("mid"),
            SnapshotIndex::Final => f.write_str("final"),
        }
    }
}

impl FromStr for SnapshotIndex {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mid" => Ok(SnapshotIndex::Mid),
            "final" => Ok(SnapshotIndex::Final),
            _ => s.parse().map(SnapshotIndex::At).map_err(|_| format!("bad snapshot index `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReinforceSettings {
    pub episodes: usize,
    pub lr: f64,
    pub horizon: usize,
    pub start: usize,
    pub snapshots: Vec<usize>,
}

impl Default for ReinforceSettings {
    fn default() -> Self {
        ReinforceSettings { episodes: 2000, lr: 0.1, horizon: 100, start: 0, snapshots: vec![2000] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PolicySource {
    /// Greedy with respect to the converged `Q*`.
    Greedy,
    ViSnapshots(Vec<SnapshotIndex>),
    Reinforce(ReinforceSettings),
    /// The same action everywhere.
    Constant(usize),
    /// `ld_cartpole`.
    Scripted(String),
    Random,
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvSpec,
    pub policy: PolicySource,
    /// Also certifies REINFORCE snapshots in `figure1`.
    pub reinforce: Option<ReinforceSettings>,
    pub uvip: UvipConfig,
    pub vpi: PolicyValueConfig,
    pub vi_eps: f64,
    /// Trajectory length for `figure3`.
    pub trajectory_steps: usize,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            env: EnvSpec::Chain(ChainSpec::default()),
            policy: PolicySource::Greedy,
            reinforce: None,
            uvip: UvipConfig::default(),
            vpi: PolicyValueConfig::default(),
            vi_eps: 1e-10,
            trajectory_steps: 50,
            output: None,
        }
    }
}

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(Error::Parse { line: i + 1, msg: format!("expected `key = value`, got `{line}`") })?;
            let key = k.trim().to_string();
            let value = v.trim().trim_matches('"').to_string();
            if map.insert(key.clone(), (value, i + 1)).is_some() {
                return Err(Error::Parse { line: i + 1, msg: format!("duplicate key `{key}`") });
            }
        }
        Ok(Entries { map })
    }

    fn take_raw(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.remove(key)
    }

    fn take<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        match self.take_raw(key) {
            None => Ok(default),
            Some((v, line)) => v.parse().map_err(|e| Error::Config { key: key.into(), msg: format!("line {line}: {e}") }),
        }
    }

    fn take_list<T: FromStr>(&mut self, key: &str, default: Vec<T>) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        match self.take_raw(key) {
            None => Ok(default),
            Some((v, line)) => v
                .split(',')
                .map(|t| t.trim())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse().map_err(|e| Error::Config { key: key.into(), msg: format!("line {line}: {e}") }))
                .collect(),
        }
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((key, (_, line))) => Err(Error::Config { key, msg: format!("line {line}: unknown key") }),
        }
    }
}

fn parse_env(e: &mut Entries) -> Result<EnvSpec> {
    let kind: String = e.take("env", "chain".to_string())?;
    Ok(match kind.as_str() {
        "toy" => EnvSpec::Toy,
        "chain" => {
            let d = ChainSpec::default();
            EnvSpec::Chain(ChainSpec {
                length: e.take("env.length", d.length)?,
                noise_p: e.take("env.noise_p", d.noise_p)?,
                terminal_reward: e.take("env.terminal_reward", d.terminal_reward)?,
                step_reward: e.take("env.step_reward", d.step_reward)?,
                gamma: e.take("env.gamma", d.gamma)?,
            })
        }
        "garnet" => {
            let d = GarnetSpec::default();
            EnvSpec::Garnet(GarnetSpec {
                n_states: e.take("env.n_states", d.n_states)?,
                n_actions: e.take("env.n_actions", d.n_actions)?,
                branching: e.take("env.branching", d.branching)?,
                seed: e.take("env.seed", d.seed)?,
                boost_fraction: e.take("env.boost_fraction", d.boost_fraction)?,
                boost_factor: e.take("env.boost_factor", d.boost_factor)?,
                gamma: e.take("env.gamma", d.gamma)?,
            })
        }
        "frozen_lake" => EnvSpec::FrozenLake { gamma: e.take("env.gamma", crate::env::FROZEN_LAKE_GAMMA)? },
        "cartpole" => {
            let d = CartPoleSpec::default();
            EnvSpec::CartPole(CartPoleSpec {
                angle_noise_std: e.take("env.angle_noise_std", d.angle_noise_std)?,
                force_mag: e.take("env.force_mag", d.force_mag)?,
                tau: e.take("env.tau", d.tau)?,
                max_velocity: e.take("env.max_velocity", d.max_velocity)?,
                max_angular_velocity: e.take("env.max_angular_velocity", d.max_angular_velocity)?,
                gamma: e.take("env.gamma", d.gamma)?,
                ..d
            })
        }
        "acrobot" => {
            let d = AcrobotSpec::default();
            EnvSpec::Acrobot(AcrobotSpec {
                torque_noise: e.take("env.torque_noise", d.torque_noise)?,
                dt: e.take("env.dt", d.dt)?,
                gamma: e.take("env.gamma", d.gamma)?,
                ..d
            })
        }
        "file" => {
            let (p, line) = e
                .take_raw("env.path")
                .ok_or(Error::Config { key: "env.path".into(), msg: "required for env = file".into() })?;
            let _ = line;
            EnvSpec::File(PathBuf::from(p))
        }
        other => return Err(Error::Config { key: "env".into(), msg: format!("unknown environment `{other}`") }),
    })
}

fn parse_reinforce(e: &mut Entries, prefix: &str) -> Result<ReinforceSettings> {
    let d = ReinforceSettings::default();
    let episodes = e.take(&format!("{prefix}.episodes"), d.episodes)?;
    Ok(ReinforceSettings {
        episodes,
        lr: e.take(&format!("{prefix}.lr"), d.lr)?,
        horizon: e.take(&format!("{prefix}.horizon"), d.horizon)?,
        start: e.take(&format!("{prefix}.start"), d.start)?,
        snapshots: e.take_list(&format!("{prefix}.snapshots"), vec![episodes])?,
    })
}

fn parse_policy(e: &mut Entries) -> Result<PolicySource> {
    let kind: String = e.take("policy", "greedy".to_string())?;
    Ok(match kind.as_str() {
        "greedy" => PolicySource::Greedy,
        "vi_snapshots" => PolicySource::ViSnapshots(e.take_list(
            "policy.snapshots",
            vec![SnapshotIndex::At(1), SnapshotIndex::Mid, SnapshotIndex::Final],
        )?),
        "reinforce" => PolicySource::Reinforce(parse_reinforce(e, "policy")?),
        "constant" => PolicySource::Constant(e.take("policy.action", 0)?),
        "random" => PolicySource::Random,
        "ld_cartpole" => PolicySource::Scripted(kind),
        "file" => {
            let (p, _) = e
                .take_raw("policy.path")
                .ok_or(Error::Config { key: "policy.path".into(), msg: "required for policy = file".into() })?;
            PolicySource::File(PathBuf::from(p))
        }
        other => return Err(Error::Config { key: "policy".into(), msg: format!("unknown policy `{other}`") }),
    })
}

fn parse_vpi_mode(s: &str) -> std::result::Result<PolicyValueMode, String> {
    match s {
        "interpolated" => Ok(PolicyValueMode::Interpolated),
        "rollout" => Ok(PolicyValueMode::Rollout),
        _ => Err(format!("unknown mode `{s}` (expected interpolated or rollout)")),
    }
}

fn vpi_mode_name(m: PolicyValueMode) -> &'static str {
    match m {
        PolicyValueMode::Interpolated => "interpolated",
        PolicyValueMode::Rollout => "rollout",
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let d = ExperimentConfig::default();
        let env = parse_env(&mut e)?;
        let policy = parse_policy(&mut e)?;
        let reinforce = if e.take("reinforce", false)? { Some(parse_reinforce(&mut e, "reinforce")?) } else { None };
        let u = &d.uvip;
        let lip_cap: f64 = e.take("uvip.lip_cap", f64::INFINITY)?;
        let uvip = UvipConfig {
            m1: e.take("uvip.m1", u.m1)?,
            m2: e.take("uvip.m2", u.m2)?,
            n_design: e.take("uvip.n_design", u.n_design)?,
            eps_stop: e.take("uvip.eps", u.eps_stop)?,
            k_max: e.take("uvip.k_max", u.k_max)?,
            coupling: e.take("uvip.coupling", u.coupling)?,
            resampling: e.take("uvip.resampling", u.resampling)?,
            control_variate: e.take("uvip.control_variate", u.control_variate)?,
            replicates: e.take("uvip.replicates", u.replicates)?,
            seed: e.take("seed", u.seed)?,
            lip_cap: lip_cap.is_finite().then_some(lip_cap),
        };
        let vpi_mode = match e.take_raw("vpi.mode") {
            None => d.vpi.mode,
            Some((v, line)) => parse_vpi_mode(&v).map_err(|m| Error::Config { key: "vpi.mode".into(), msg: format!("line {line}: {m}") })?,
        };
        let vpi = PolicyValueConfig {
            n_rollouts: e.take("vpi.rollouts", d.vpi.n_rollouts)?,
            tol: e.take("vpi.tol", d.vpi.tol)?,
            mode: vpi_mode,
        };
        let cfg = ExperimentConfig {
            env,
            policy,
            reinforce,
            uvip,
            vpi,
            vi_eps: e.take("vi.eps", d.vi_eps)?,
            trajectory_steps: e.take("figure3.steps", d.trajectory_steps)?,
            output: e.take_raw("output").map(|(p, _)| PathBuf::from(p)),
        };
        e.finish()?;
        cfg.uvip.validate().map_err(|err| Error::Config { key: "uvip".into(), msg: err.to_string() })?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Canonical text form; `parse(emit(c)) == c`.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| writeln!(s, "{k} = {v}").unwrap();
        kv("env", &self.env.name());
        match &self.env {
            EnvSpec::Toy => {}
            EnvSpec::Chain(c) => {
                kv("env.length", &c.length);
                kv("env.noise_p", &c.noise_p);
                kv("env.terminal_reward", &c.terminal_reward);
                kv("env.step_reward", &c.step_reward);
                kv("env.gamma", &c.gamma);
            }
            EnvSpec::Garnet(g) => {
                kv("env.n_states", &g.n_states);
                kv("env.n_actions", &g.n_actions);
                kv("env.branching", &g.branching);
                kv("env.seed", &g.seed);
                kv("env.boost_fraction", &g.boost_fraction);
                kv("env.boost_factor", &g.boost_factor);
                kv("env.gamma", &g.gamma);
            }
            EnvSpec::FrozenLake { gamma } => kv("env.gamma", gamma),
            EnvSpec::CartPole(c) => {
                kv("env.angle_noise_std", &c.angle_noise_std);
                kv("env.force_mag", &c.force_mag);
                kv("env.tau", &c.tau);
                kv("env.max_velocity", &c.max_velocity);
                kv("env.max_angular_velocity", &c.max_angular_velocity);
                kv("env.gamma", &c.gamma);
            }
            EnvSpec::Acrobot(a) => {
                kv("env.torque_noise", &a.torque_noise);
                kv("env.dt", &a.dt);
                kv("env.gamma", &a.gamma);
            }
            EnvSpec::File(p) => kv("env.path", &p.display()),
        }
        let list = |v: &[usize]| v.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ");
        match &self.policy {
            PolicySource::Greedy => kv("policy", &"greedy"),
            PolicySource::ViSnapshots(ks) => {
                kv("policy", &"vi_snapshots");
                let ks: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
                kv("policy.snapshots", &ks.join(", "));
            }
            PolicySource::Reinforce(r) => {
                kv("policy", &"reinforce");
                kv("policy.episodes", &r.episodes);
                kv("policy.lr", &r.lr);
                kv("policy.horizon", &r.horizon);
                kv("policy.start", &r.start);
                kv("policy.snapshots", &list(&r.snapshots));
            }
            PolicySource::Constant(a) => {
                kv("policy", &"constant");
                kv("policy.action", a);
            }
            PolicySource::Scripted(name) => kv("policy", name),
            PolicySource::Random => kv("policy", &"random"),
            PolicySource::File(p) => {
                kv("policy", &"file");
                kv("policy.path", &p.display());
            }
        }
        if let Some(r) = &self.reinforce {
            kv("reinforce", &true);
            kv("reinforce.episodes", &r.episodes);
            kv("reinforce.lr", &r.lr);
            kv("reinforce.horizon", &r.horizon);
            kv("reinforce.start", &r.start);
            kv("reinforce.snapshots", &list(&r.snapshots));
        }
        let u = &self.uvip;
        kv("uvip.m1", &u.m1);
        kv("uvip.m2", &u.m2);
        kv("uvip.n_design", &u.n_design);
        kv("uvip.eps", &u.eps_stop);
        kv("uvip.k_max", &u.k_max);
        kv("uvip.coupling", &u.coupling);
        kv("uvip.resampling", &u.resampling);
        kv("uvip.control_variate", &u.control_variate);
        kv("uvip.replicates", &u.replicates);
        if let Some(cap) = u.lip_cap {
            kv("uvip.lip_cap", &cap);
        }
        kv("vpi.rollouts", &self.vpi.n_rollouts);
        kv("vpi.tol", &self.vpi.tol);
        kv("vpi.mode", &vpi_mode_name(self.vpi.mode));
        kv("vi.eps", &self.vi_eps);
        kv("figure3.steps", &self.trajectory_steps);
        if let Some(o) = &self.output {
            kv("output", &o.display());
        }
        kv("seed", &u.seed);
        s
    }
}
