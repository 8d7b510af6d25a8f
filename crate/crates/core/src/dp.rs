//! Exact dynamic programming on tabular MDPs and Monte Carlo policy
//! evaluation on generative models.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::lipschitz::Coordinates;
use crate::mdp::{GenerativeModel, QTable, TabularMdp};
use crate::policy::{Policy, TabularPolicy};
use crate::rng::{key_of_slice, stream, Purpose, Stream};

/// Above this size the exact evaluation switches to fixed-point iteration.
pub const DIRECT_SOLVE_LIMIT: usize = 2000;

#[derive(Debug, Clone, Default)]
pub struct ViOptions {
    /// `V_0`; zero when absent.
    pub init: Option<Vec<f64>>,
    /// Iteration indices `k >= 1` whose `(V_k, Q_k)` are kept.
    pub snapshots: Vec<usize>,
    /// Keep every iterate `V_0, V_1, ...`.
    pub keep_all: bool,
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub k: usize,
    pub v: Vec<f64>,
    pub q: QTable,
}

#[derive(Debug, Clone)]
pub struct ViResult {
    pub v: Vec<f64>,
    pub q: QTable,
    pub iterations: usize,
    pub snapshots: Vec<Snapshot>,
    /// Every iterate including `V_0` when `keep_all` is set.
    pub iterates: Vec<Vec<f64>>,
}

/// `Q_k = r + gamma P V_{k-1}`, `V_k = max_a Q_k`, until `|V_k - V_{k-1}| <= eps`.
pub fn value_iteration(m: &TabularMdp, eps: f64, opts: &ViOptions) -> Result<ViResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidSpec(format!("eps must be positive, got {eps}")));
    }
    let n = m.n_states();
    let mut v = match &opts.init {
        Some(v0) if v0.len() != n => return Err(Error::DimensionMismatch { expected: n, got: v0.len() }),
        Some(v0) => v0.clone(),
        None => vec![0.0; n],
    };
    let mut iterates = Vec::new();
    if opts.keep_all {
        iterates.push(v.clone());
    }
    let mut snapshots = Vec::new();
    let max_iter = opts.max_iter.unwrap_or(usize::MAX);
    let mut k = 0;
    loop {
        k += 1;
        let q = m.bellman_q(&v)?;
        let next = q.max_per_state();
        let change = sup_diff(&next, &v);
        v = next;
        if opts.keep_all {
            iterates.push(v.clone());
        }
        if opts.snapshots.contains(&k) {
            snapshots.push(Snapshot { k, v: v.clone(), q: q.clone() });
        }
        if change <= eps || k >= max_iter {
            return Ok(ViResult { v, q, iterations: k, snapshots, iterates });
        }
    }
}

pub(crate) fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Lowest-index argmax per state.
pub fn greedy_policy(q: &QTable) -> TabularPolicy {
    let actions = (0..q.n_states)
        .map(|x| {
            let row = q.row(x);
            let mut best = 0;
            for (a, &val) in row.iter().enumerate() {
                if val > row[best] {
                    best = a;
                }
            }
            best
        })
        .collect();
    TabularPolicy::Deterministic { actions, n_actions: q.n_actions }
}

/// `(r_pi, P_pi)` for a tabular policy.
fn policy_chain(m: &TabularMdp, pi: &TabularPolicy) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.n_states();
    if pi.n_states() != n {
        return Err(Error::DimensionMismatch { expected: n, got: pi.n_states() });
    }
    if Policy::<usize>::n_actions(pi) != m.n_actions() {
        return Err(Error::DimensionMismatch { expected: m.n_actions(), got: Policy::<usize>::n_actions(pi) });
    }
    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n * n];
    for x in 0..n {
        for a in 0..m.n_actions() {
            let w = pi.prob(x, a);
            if w == 0.0 {
                continue;
            }
            r[x] += w * m.reward(x, a);
            for (y, py) in m.row(x, a).iter().enumerate() {
                p[x * n + y] += w * py;
            }
        }
    }
    Ok((r, p))
}

/// Solves `V = r_pi + gamma P_pi V`.
pub fn policy_value_exact(m: &TabularMdp, pi: &TabularPolicy) -> Result<Vec<f64>> {
    let n = m.n_states();
    let (r, p) = policy_chain(m, pi)?;
    let g = m.gamma();
    if n > DIRECT_SOLVE_LIMIT {
        let mut v = vec![0.0; n];
        loop {
            let next: Vec<f64> = (0..n).map(|x| r[x] + g * crate::mdp::dot(&p[x * n..(x + 1) * n], &v)).collect();
            let change = sup_diff(&next, &v);
            v = next;
            if change <= 1e-12 {
                return Ok(v);
            }
        }
    }
    let a = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i == j)) - g * p[i * n + j]);
    let sol = a
        .lu()
        .solve(&DVector::from_vec(r))
        .ok_or_else(|| Error::InvalidSpec("singular policy evaluation system".into()))?;
    Ok(sol.iter().copied().collect())
}

/// `max_x |V(x) - max_a {r(x, a) + gamma (P^a V)(x)}|`.
pub fn bellman_residual(m: &TabularMdp, v: &[f64]) -> Result<f64> {
    let tv = m.bellman_q(v)?.max_per_state();
    Ok(sup_diff(&tv, v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

/// One truncated discounted return from `x`.
pub fn rollout_return<G, P>(g: &G, pi: &P, x: &G::State, horizon: usize, rng: &mut Stream) -> f64
where
    G: GenerativeModel,
    P: Policy<G::State> + ?Sized,
{
    let noise = g.noise();
    let mut xi = vec![0.0; noise.dim];
    let mut s = x.clone();
    let (mut ret, mut disc) = (0.0, 1.0);
    for _ in 0..horizon {
        if g.is_terminal(&s) {
            break;
        }
        let a = pi.act(&s, rng.gen());
        ret += disc * g.reward(&s, a);
        noise.fill(rng, &mut xi);
        s = g.step(&s, a, &xi);
        disc *= g.gamma();
    }
    ret
}

/// Mean and standard error of `n_rollouts` truncated returns. The
/// truncation bias is at most `gamma^horizon r_max / (1 - gamma)`.
pub fn policy_value_rollout<G, P>(g: &G, pi: &P, x: &G::State, horizon: usize, n_rollouts: usize, rng: &mut Stream) -> Result<Estimate>
where
    G: GenerativeModel,
    P: Policy<G::State> + ?Sized,
{
    if horizon == 0 || n_rollouts == 0 {
        return Err(Error::InvalidSpec("rollouts need horizon >= 1 and n_rollouts >= 1".into()));
    }
    let returns: Vec<f64> = (0..n_rollouts).map(|_| rollout_return(g, pi, x, horizon, rng)).collect();
    Ok(mean_stderr(&returns))
}

pub fn mean_stderr(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return Estimate { mean, stderr: 0.0 };
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate { mean, stderr: (var / n).sqrt() }
}

/// Rollout estimator with a stream keyed by the state itself, so the same
/// state always gets the same estimate regardless of call order.
#[derive(Debug, Clone, Copy)]
pub struct RolloutEvaluator {
    pub seed: u64,
    pub horizon: usize,
    pub n_rollouts: usize,
}

impl RolloutEvaluator {
    pub fn estimate<G, P>(&self, g: &G, pi: &P, x: &G::State) -> Estimate
    where
        G: GenerativeModel,
        G::State: Coordinates,
        P: Policy<G::State> + ?Sized,
    {
        if g.is_terminal(x) {
            return Estimate { mean: 0.0, stderr: 0.0 };
        }
        let mut rng = stream(self.seed, Purpose::Rollout, &[key_of_slice(&x.coords())]);
        let returns: Vec<f64> = (0..self.n_rollouts).map(|_| rollout_return(g, pi, x, self.horizon, &mut rng)).collect();
        mean_stderr(&returns)
    }
}
