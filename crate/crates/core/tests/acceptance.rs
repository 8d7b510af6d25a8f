//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and fails the target if any criterion fails.
//!
//! Ground truth comes from independent computations: hand-derived values on
//! the toy MDP and exact linear solves for `V*` (the value of the greedy
//! policy of a converged `Q`), never from the UVIP code under test.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use uvip::dp::{greedy_policy, mean_stderr, policy_value_exact, value_iteration, ViOptions};
use uvip::env::{make_chain, make_frozen_lake, make_garnet, toy_mdp, CartPoleSpec, ChainSpec, GarnetSpec};
use uvip::experiments::{cmd_figure1, cmd_figure3, cmd_uvip, Figure1Row};
use uvip::lipschitz::{build_interpolant, covering_radius_indexed, grid_probe, sample_design_uniform, LipMode};
use uvip::mdp::{StateSpace, TabularMdp};
use uvip::policy::TabularPolicy;
use uvip::rng::{stream, Purpose};
use uvip::settings::{EnvSpec, ExperimentConfig, PolicySource, ReinforceSettings, SnapshotIndex};
use uvip::uvip::{martingale_check, uvip_run_tabular, variance_profile, UvipConfig};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// `V*` as the exact value of the greedy policy of a converged `Q`.
fn v_star(m: &TabularMdp) -> Vec<f64> {
    let vi = value_iteration(m, 1e-12, &ViOptions::default()).unwrap();
    policy_value_exact(m, &greedy_policy(&vi.q)).unwrap()
}

fn tabular_envs() -> Vec<(&'static str, TabularMdp)> {
    vec![
        ("toy", toy_mdp()),
        ("chain", make_chain(&ChainSpec::default()).unwrap()),
        ("garnet", make_garnet(&GarnetSpec::default()).unwrap()),
        ("frozen_lake", make_frozen_lake()),
    ]
}

fn uvip_cfg(m: usize, replicates: usize) -> UvipConfig {
    UvipConfig { m1: m, m2: m, replicates, ..Default::default() }
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn toy_csvs() -> (String, String) {
    let g = toy_mdp().to_generative().unwrap();
    let cfg = uvip_cfg(10, 3);
    let opt = uvip_run_tabular(&g, &TabularPolicy::constant(2, 2, 1).unwrap(), &cfg).unwrap();
    let lazy = uvip_run_tabular(&g, &TabularPolicy::constant(2, 2, 0).unwrap(), &cfg).unwrap();
    (opt.to_csv(), lazy.to_csv())
}

fn c1_toy_collapse() -> Outcome {
    let g = toy_mdp().to_generative().unwrap();
    let cfg = uvip_cfg(10, 3);
    let opt = uvip_run_tabular(&g, &TabularPolicy::constant(2, 2, 1).unwrap(), &cfg).unwrap();
    let lazy = uvip_run_tabular(&g, &TabularPolicy::constant(2, 2, 0).unwrap(), &cfg).unwrap();
    let collapsed = opt.rows.iter().all(|r| r.gap == 0.0 && r.stderr == 0.0);
    let lazy_err = lazy.rows.iter().map(|r| (r.v_up - 2.0).abs()).fold(0.0, f64::max);
    outcome(collapsed && lazy_err <= 1e-9, format!("optimal gap exactly 0: {collapsed}; always-a0 |v_up - 2| = {lazy_err:.1e}"))
}

fn c2_martingale() -> Outcome {
    let mut worst = 0.0_f64;
    for (_, m) in tabular_envs() {
        let q = value_iteration(&m, 1e-10, &ViOptions::default()).unwrap().q;
        for pi in [TabularPolicy::uniform(m.n_states(), m.n_actions()), greedy_policy(&q)] {
            worst = worst.max(martingale_check(&m, &pi).unwrap());
        }
    }
    outcome(worst <= 1e-10, format!("max defect {worst:.2e} over toy, chain, garnet, frozen_lake (tol 1e-10)"))
}

fn upper_bound_violations(m: &TabularMdp, cfg: &UvipConfig) -> (usize, f64, String) {
    let g = m.to_generative().unwrap();
    let star = v_star(m);
    let mut bad = 0;
    let mut worst = f64::NEG_INFINITY;
    let mut csv = String::new();
    for pi in [TabularPolicy::uniform(m.n_states(), m.n_actions()), TabularPolicy::constant(m.n_states(), m.n_actions(), 0).unwrap()] {
        let r = uvip_run_tabular(&g, &pi, cfg).unwrap();
        for (row, s) in r.rows.iter().zip(&star) {
            let margin = s - 3.0 * row.stderr - row.v_up;
            worst = worst.max(margin);
            bad += (margin > 0.0) as usize;
        }
        csv.push_str(&r.to_csv());
    }
    (bad, worst, csv)
}

fn c3_upper_bound() -> (Outcome, String) {
    let chain = make_chain(&ChainSpec::default()).unwrap();
    let garnet = make_garnet(&GarnetSpec::default()).unwrap();
    let (b1, w1, csv1) = upper_bound_violations(&chain, &uvip_cfg(1000, 20));
    let (b2, w2, csv2) = upper_bound_violations(&garnet, &uvip_cfg(3000, 20));
    (
        outcome(
            b1 + b2 == 0,
            format!("violations chain {b1}, garnet {b2}; worst (V* - 3se - v_up): chain {w1:.3e}, garnet {w2:.3e}"),
        ),
        csv1 + &csv2,
    )
}

fn figure1_cfg(env: EnvSpec, reinforce: Option<ReinforceSettings>) -> ExperimentConfig {
    ExperimentConfig {
        env,
        policy: PolicySource::ViSnapshots(vec![SnapshotIndex::At(1), SnapshotIndex::Mid, SnapshotIndex::Final]),
        reinforce,
        uvip: uvip_cfg(1000, 10),
        ..Default::default()
    }
}

fn nonincreasing(rows: &[&Figure1Row]) -> bool {
    rows.windows(2).all(|w| {
        let se = (w[0].max_gap.stderr.powi(2) + w[1].max_gap.stderr.powi(2)).sqrt();
        w[1].max_gap.mean <= w[0].max_gap.mean + 3.0 * se
    })
}

fn c4_c5_figure1(dir: &Path) -> (Outcome, Outcome) {
    let mut ok4 = true;
    let mut detail4 = Vec::new();
    let mut fl_rows = Vec::new();
    let reinforce = ReinforceSettings { episodes: 2000, lr: 0.1, horizon: 100, start: 0, snapshots: vec![2000] };
    for (name, env, m) in [
        ("chain", EnvSpec::Chain(ChainSpec::default()), make_chain(&ChainSpec::default()).unwrap()),
        ("frozen_lake", EnvSpec::FrozenLake { gamma: 0.9 }, make_frozen_lake()),
    ] {
        let extra = (name == "frozen_lake").then(|| reinforce.clone());
        let rows = cmd_figure1(&figure1_cfg(env, extra), &dir.join(name)).unwrap();
        let vi: Vec<&Figure1Row> = rows.iter().filter(|r| r.label.starts_with("vi_")).collect();
        let last = vi.last().unwrap();
        let limit = 0.05 * m.r_max() / (1.0 - m.gamma());
        let mono = nonincreasing(&vi);
        ok4 &= mono && last.max_gap.mean <= limit && vi.len() == 3;
        let gaps: Vec<String> = vi.iter().map(|r| format!("{}={:.4}", r.label, r.max_gap.mean)).collect();
        detail4.push(format!("{name}: {} (final limit {limit:.3}, nonincreasing {mono})", gaps.join(" ")));
        if name == "frozen_lake" {
            fl_rows = rows;
        }
    }
    let vi_final = fl_rows.iter().filter(|r| r.label.starts_with("vi_")).next_back().unwrap();
    let rf = fl_rows.iter().find(|r| r.label.starts_with("reinforce_")).unwrap();
    let se = (vi_final.max_gap.stderr.powi(2) + rf.max_gap.stderr.powi(2)).sqrt();
    let diff = rf.max_gap.mean - vi_final.max_gap.mean;
    (
        outcome(ok4, detail4.join("; ")),
        outcome(
            diff > 3.0 * se,
            format!("reinforce max gap {:.4}, VI final {:.4}, difference {diff:.4} vs 3se {:.4}", rf.max_gap.mean, vi_final.max_gap.mean, 3.0 * se),
        ),
    )
}

fn c6_interpolation() -> Outcome {
    let fns: [(&str, fn(&[f64]) -> f64); 5] = [
        ("sin", |x| x.iter().map(|v| (3.0 * v).sin()).sum()),
        ("abs", |x| x.iter().map(|v| (v - 0.3).abs()).sum()),
        ("norm", |x| x.iter().map(|v| (v - 0.5).powi(2)).sum::<f64>().sqrt()),
        ("gauss", |x| (-x.iter().map(|v| v * v).sum::<f64>()).exp()),
        ("hat", |x| x.iter().map(|v| 1.0 - (2.0 * v - 1.0).abs()).product()),
    ];
    let mut ok = true;
    let mut worst_ratio = 0.0_f64;
    for d in [1, 2] {
        let space = StateSpace::new_box(vec![0.0; d], vec![1.0; d]).unwrap();
        let mut rng = stream(5, Purpose::Design, &[d as u64]);
        let design = sample_design_uniform(200, &space, &mut rng).unwrap();
        let probe = grid_probe(&space, if d == 1 { 20_001 } else { 301 }).unwrap();
        let rho = covering_radius_indexed(&design, &probe).unwrap();
        for (name, f) in &fns {
            let values: Vec<f64> = design.points.iter().map(|x| f(x)).collect();
            let interp = build_interpolant(design.clone(), values.clone(), LipMode::Estimated).unwrap();
            let exact = design.points.iter().zip(&values).all(|(x, v)| interp.value(x) == *v);
            let err = probe.iter().map(|x| (f(x) - interp.value(x)).abs()).fold(0.0, f64::max);
            let bound = interp.lip() * rho;
            if !(exact && err <= bound + 1e-12) {
                ok = false;
                eprintln!("  interpolation d={d} {name}: exact {exact}, error {err:.3e} > bound {bound:.3e}");
            }
            worst_ratio = worst_ratio.max(err / bound);
        }
    }
    outcome(ok, format!("exact at design; worst error / (L rho) = {worst_ratio:.3}"))
}

fn c7_covering_rate() -> Outcome {
    let ns = [100usize, 1000, 10_000];
    let mut ok = true;
    let mut slopes = Vec::new();
    for d in [1usize, 2] {
        let space = StateSpace::new_box(vec![0.0; d], vec![1.0; d]).unwrap();
        let probe = grid_probe(&space, if d == 1 { 200_001 } else { 801 }).unwrap();
        let mut logs = Vec::new();
        for &n in &ns {
            let radii: Vec<f64> = (0..20u64)
                .map(|seed| {
                    let mut rng = stream(seed, Purpose::Design, &[n as u64, d as u64]);
                    let design = sample_design_uniform(n, &space, &mut rng).unwrap();
                    covering_radius_indexed(&design, &probe).unwrap()
                })
                .collect();
            logs.push(((n as f64).ln(), mean_stderr(&radii).mean.ln()));
        }
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / 3.0;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / 3.0;
        let slope = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / logs.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
        ok &= (slope + 1.0 / d as f64).abs() <= 0.2;
        slopes.push(format!("d={d}: slope {slope:.3} (target {:.3})", -1.0 / d as f64));
    }
    outcome(ok, slopes.join(", "))
}

fn c8_variance() -> Outcome {
    let m = make_chain(&ChainSpec::default()).unwrap();
    let g = m.to_generative().unwrap();
    let greedy = greedy_policy(&value_iteration(&m, 1e-10, &ViOptions::default()).unwrap().q);
    let cfg = uvip_cfg(1000, 1);
    let vg = variance_profile(&g, &greedy, &cfg, 30).unwrap();
    let vr = variance_profile(&g, &TabularPolicy::uniform(10, 2), &cfg, 30).unwrap();
    let hits = vg.iter().zip(&vr).filter(|(a, b)| a <= b).count();
    let frac = hits as f64 / vg.len() as f64;
    outcome(frac >= 0.8, format!("greedy variance <= random at {hits}/{} states", vg.len()))
}

fn figure3_cfg(policy: PolicySource) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        env: EnvSpec::CartPole(CartPoleSpec::default()),
        policy,
        uvip: UvipConfig { m1: 50, m2: 50, n_design: 300, replicates: 5, k_max: 60, ..Default::default() },
        trajectory_steps: 50,
        ..Default::default()
    };
    cfg.vpi.n_rollouts = 100;
    cfg
}

fn c9_cartpole(dir: &Path) -> Outcome {
    let ld = cmd_figure3(&figure3_cfg(PolicySource::Scripted("ld_cartpole".into())), &dir.join("ld")).unwrap();
    let rnd = cmd_figure3(&figure3_cfg(PolicySource::Random), &dir.join("random")).unwrap();
    let se = (ld.mean_gap.stderr.powi(2) + rnd.mean_gap.stderr.powi(2)).sqrt();
    let diff = rnd.mean_gap.mean - ld.mean_gap.mean;
    outcome(
        diff > 3.0 * se,
        format!(
            "mean gap LD {:.4} ({} states), random {:.4} ({} states); difference {diff:.4} vs 3se {:.4}",
            ld.mean_gap.mean,
            ld.rows.len(),
            rnd.mean_gap.mean,
            rnd.rows.len(),
            3.0 * se
        ),
    )
}

fn c10_contraction() -> Outcome {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_below = f64::NEG_INFINITY;
    for (_, m) in tabular_envs() {
        let star = v_star(&m);
        let dist = |v: &[f64]| v.iter().zip(&star).fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        let top = vec![m.r_max() / (1.0 - m.gamma()); m.n_states()];
        for init in [None, Some(top.clone())] {
            let from_top = init.is_some();
            let vi = value_iteration(&m, 1e-300, &ViOptions { init, keep_all: true, max_iter: Some(200), ..Default::default() }).unwrap();
            for w in vi.iterates.windows(2) {
                worst_excess = worst_excess.max(dist(&w[1]) - m.gamma() * dist(&w[0]));
            }
            if from_top {
                for v in &vi.iterates {
                    for (x, s) in v.iter().zip(&star) {
                        worst_below = worst_below.max(s - x);
                    }
                }
            }
        }
    }
    // V* is itself only accurate to ~1e-12, hence the 1e-9 slack
    outcome(
        worst_excess <= 1e-9 && worst_below <= 1e-9,
        format!("max (|V_k+1 - V*| - gamma |V_k - V*|) = {worst_excess:.2e}; max (V* - V_k) from top = {worst_below:.2e}"),
    )
}

fn c11_determinism(dir: &Path, toy_ref: &(String, String), c3_ref: &str) -> Outcome {
    let threads = 3;
    let toy = in_pool(threads, toy_csvs);
    let c3 = in_pool(threads, || {
        let chain = make_chain(&ChainSpec::default()).unwrap();
        let garnet = make_garnet(&GarnetSpec::default()).unwrap();
        upper_bound_violations(&chain, &uvip_cfg(1000, 20)).2 + &upper_bound_violations(&garnet, &uvip_cfg(3000, 20)).2
    });
    let cfg = ExperimentConfig {
        env: EnvSpec::CartPole(CartPoleSpec::default()),
        policy: PolicySource::Scripted("ld_cartpole".into()),
        uvip: UvipConfig { m1: 10, m2: 10, n_design: 60, replicates: 2, k_max: 10, ..Default::default() },
        ..Default::default()
    };
    let files: Vec<Vec<u8>> = [1, threads]
        .iter()
        .map(|&t| {
            let out = dir.join(format!("threads_{t}"));
            in_pool(t, || cmd_uvip(&cfg, &out)).unwrap();
            std::fs::read(out.join("bounds.csv")).unwrap()
        })
        .collect();
    let same_toy = &toy == toy_ref;
    let same_c3 = c3 == c3_ref;
    let same_box = files[0] == files[1];
    outcome(
        same_toy && same_c3 && same_box,
        format!("1 vs {threads} threads byte-identical: criterion 1 {same_toy}, criterion 3 {same_c3}, cartpole bounds.csv {same_box}"),
    )
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().unwrap();
    let mut results: Vec<(usize, &str, Outcome, Duration, Duration)> = Vec::new();
    let mut run = |id: usize, name: &'static str, budget: u64, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let el = t.elapsed();
        let line = (id, name, o, el, Duration::from_secs(budget));
        print_line(&line);
        results.push(line);
    };

    let mut toy_ref = (String::new(), String::new());
    let mut c3_ref = String::new();
    run(1, "toy-MDP exact collapse", 1, &mut || {
        toy_ref = in_pool(1, toy_csvs);
        in_pool(1, c1_toy_collapse)
    });
    run(2, "martingale identity", 5, &mut || c2_martingale());
    run(3, "upper-bound property (chain, garnet)", 120, &mut || {
        let (o, csv) = in_pool(1, c3_upper_bound);
        c3_ref = csv;
        o
    });
    let mut c5 = None;
    run(4, "figure-1 snapshot gaps (chain, frozen_lake)", 180, &mut || {
        let (o4, o5) = c4_c5_figure1(&dir.path().join("figure1"));
        c5 = Some(o5);
        o4
    });
    run(5, "REINFORCE suboptimality signal (frozen_lake)", 300, &mut || c5.take().unwrap());
    run(6, "interpolation exactness and error bound", 30, &mut || c6_interpolation());
    run(7, "covering-radius rate", 60, &mut || c7_covering_rate());
    run(8, "variance shrinkage near optimality (chain)", 240, &mut || c8_variance());
    run(9, "cartpole policy ranking (LD vs random)", 300, &mut || c9_cartpole(&dir.path().join("figure3")));
    run(10, "VI contraction and monotone upper iterates", 10, &mut || c10_contraction());
    run(11, "determinism across thread counts", 300, &mut || c11_determinism(&dir.path().join("det"), &toy_ref, &c3_ref));

    let failed = results.iter().filter(|r| !passed(r)).count();
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn passed(r: &(usize, &str, Outcome, Duration, Duration)) -> bool {
    r.2.pass && r.3 <= r.4
}

fn print_line(r: &(usize, &str, Outcome, Duration, Duration)) {
    let (id, name, o, el, budget) = r;
    let timing = if el <= budget { String::new() } else { " OVER BUDGET".to_string() };
    println!(
        "criterion {id:>2} {}: {name}; {} [{:.2}s / {}s{timing}]",
        if passed(r) { "PASS" } else { "FAIL" },
        o.detail,
        el.as_secs_f64(),
        budget.as_secs()
    );
}
