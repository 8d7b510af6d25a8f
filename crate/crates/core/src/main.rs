use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use uvip::experiments::{cmd_check, cmd_evaluate, cmd_figure1, cmd_figure3, cmd_solve, cmd_uvip, default_out_dir};
use uvip::settings::{ExperimentConfig, PolicySource};
use uvip::uvip::{Coupling, Resampling};
use uvip::{Error, Result};

/// Exit status when some replicate stopped at `k_max` instead of converging.
const EXIT_NOT_CONVERGED: u8 = 2;
/// Exit status when `check` finds a violated invariant.
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(name = "uvip", version, about = "Upper value iteration: certified suboptimality bounds for MDP policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Value iteration on a tabular environment: V*, Q* and the greedy policy.
    Solve(Common),
    /// Value of the configured policy.
    Evaluate(Common),
    /// Upper value iteration for the configured policy; writes bounds.csv.
    Uvip(Common),
    /// Certify a schedule of VI (and REINFORCE) snapshots.
    Figure1(Common),
    /// Bounds along one trajectory on a continuous environment.
    Figure3(Common),
    /// Run the invariant suite.
    Check(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config file (key = value).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to $UVIP_OUT_DIR, then ./out.
    #[arg(long, alias = "output")]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    /// toy, chain, garnet, frozen_lake, cartpole or acrobot (default parameters).
    #[arg(long)]
    env: Option<String>,
    /// Policy name (greedy, random, ld_cartpole) or a tabular policy file.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    m1: Option<usize>,
    #[arg(long)]
    m2: Option<usize>,
    #[arg(long)]
    n_design: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    k_max: Option<usize>,
    #[arg(long)]
    coupling: Option<Coupling>,
    #[arg(long)]
    resampling: Option<Resampling>,
    #[arg(long)]
    replicates: Option<usize>,
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(name) = &self.env {
            cfg.env = ExperimentConfig::parse(&format!("env = {name}\n"))?.env;
        }
        if let Some(p) = &self.policy {
            let path = PathBuf::from(p);
            cfg.policy = if path.is_file() {
                PolicySource::File(path)
            } else {
                ExperimentConfig::parse(&format!("policy = {p}\n"))?.policy
            };
        }
        let u = &mut cfg.uvip;
        macro_rules! set {
            ($($field:ident => $target:expr),+) => {$(
                if let Some(v) = self.$field { $target = v; }
            )+};
        }
        set!(m1 => u.m1, m2 => u.m2, n_design => u.n_design, eps => u.eps_stop, k_max => u.k_max,
             coupling => u.coupling, resampling => u.resampling, replicates => u.replicates, seed => u.seed);
        u.validate()?;
        if let Some(out) = &self.out {
            cfg.output = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (Command::Solve(c)
    | Command::Evaluate(c)
    | Command::Uvip(c)
    | Command::Figure1(c)
    | Command::Figure3(c)
    | Command::Check(c)) = &cli.command;
    if let Some(n) = c.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidSpec(format!("thread pool: {e}")))?;
    }
    let cfg = c.resolve()?;
    let out = cfg.output.clone().unwrap_or_else(default_out_dir);
    match &cli.command {
        Command::Solve(_) => {
            let s = cmd_solve(&cfg, &out)?;
            println!("solved in {} iterations, residual {:e}", s.iterations, s.residual);
        }
        Command::Evaluate(_) => {
            let v = cmd_evaluate(&cfg, &out)?;
            println!("evaluated {} states", v.len());
        }
        Command::Uvip(_) => {
            let o = cmd_uvip(&cfg, &out)?;
            println!("max gap {} (stderr {}), {} iterations", o.max_gap.mean, o.max_gap.stderr, o.iterations);
            if !o.converged {
                eprintln!("warning: stopped at k_max before the sweep change fell below eps");
                return Ok(ExitCode::from(EXIT_NOT_CONVERGED));
            }
        }
        Command::Figure1(_) => {
            for r in cmd_figure1(&cfg, &out)? {
                println!("{:<16} max gap {:.6} +- {:.6}  mean gap {:.6}", r.label, r.max_gap.mean, r.max_gap.stderr, r.mean_gap.mean);
            }
        }
        Command::Figure3(_) => {
            let f = cmd_figure3(&cfg, &out)?;
            println!("{} states, mean gap {} +- {}", f.rows.len(), f.mean_gap.mean, f.mean_gap.stderr);
        }
        Command::Check(_) => {
            let rows = cmd_check(&cfg, &out)?;
            let mut ok = true;
            for r in &rows {
                println!("{} {:<20} {:<12} {:e}", if r.passed() { "PASS" } else { "FAIL" }, r.check, r.env, r.value);
                ok &= r.passed();
            }
            if !ok {
                return Ok(ExitCode::from(EXIT_CHECK_FAILED));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
