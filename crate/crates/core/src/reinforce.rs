//! Tabular softmax REINFORCE, used to produce learned (and typically
//! suboptimal) policies for certification.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{GenerativeModel, StateSpace};
use crate::policy::{sample_row, TabularPolicy};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq)]
pub struct ReinforceConfig {
    pub episodes: usize,
    pub lr: f64,
    /// Episode length cap; episodes also end on absorbing states.
    pub horizon: usize,
    pub start_state: usize,
    /// Episode counts after which the policy is recorded (0 = initial).
    pub snapshots: Vec<usize>,
}

fn softmax_row(theta: &[f64]) -> Vec<f64> {
    let max = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = theta.iter().map(|t| (t - max).exp()).collect();
    let z: f64 = e.iter().sum();
    let mut p: Vec<f64> = e.iter().map(|v| v / z).collect();
    // keep the row sum within the policy tolerance
    let drift = 1.0 - p.iter().sum::<f64>();
    let imax = p.iter().enumerate().fold(0, |b, (i, v)| if *v > p[b] { i } else { b });
    p[imax] += drift;
    p
}

fn snapshot(theta: &[Vec<f64>]) -> TabularPolicy {
    TabularPolicy::Stochastic { probs: theta.iter().map(|t| softmax_row(t)).collect() }
}

/// Monte Carlo policy gradient with return-to-go and a running-mean
/// baseline. Returns `(episode count, policy)` for each requested snapshot.
pub fn reinforce_tabular<G>(g: &G, cfg: &ReinforceConfig, rng: &mut Stream) -> Result<Vec<(usize, TabularPolicy)>>
where
    G: GenerativeModel<State = usize>,
{
    let n_states = match g.state_space() {
        StateSpace::Tabular { count } => *count,
        StateSpace::Box { .. } => return Err(Error::NotTabular),
    };
    if cfg.start_state >= n_states || cfg.horizon == 0 {
        return Err(Error::InvalidSpec("reinforce needs a valid start state and horizon >= 1".into()));
    }
    let na = g.actions().count;
    let gamma = g.gamma();
    let noise = g.noise();
    let mut xi = vec![0.0; noise.dim];
    let mut theta = vec![vec![0.0; na]; n_states];
    let mut out = Vec::new();
    if cfg.snapshots.contains(&0) {
        out.push((0, snapshot(&theta)));
    }
    let (mut baseline, mut n_seen) = (0.0, 0.0);
    let mut episode: Vec<(usize, usize, f64)> = Vec::with_capacity(cfg.horizon);
    for ep in 1..=cfg.episodes {
        episode.clear();
        let mut s = cfg.start_state;
        for _ in 0..cfg.horizon {
            if g.is_terminal(&s) {
                break;
            }
            let a = sample_row(&softmax_row(&theta[s]), rng.gen());
            let r = g.reward(&s, a);
            noise.fill(rng, &mut xi);
            episode.push((s, a, r));
            s = g.step(&s, a, &xi);
        }
        let mut ret = 0.0;
        for &(s, a, r) in episode.iter().rev() {
            ret = r + gamma * ret;
            n_seen += 1.0;
            baseline += (ret - baseline) / n_seen;
            let adv = ret - baseline;
            let p = softmax_row(&theta[s]);
            for (b, t) in theta[s].iter_mut().enumerate() {
                let indicator = if b == a { 1.0 } else { 0.0 };
                *t += cfg.lr * adv * (indicator - p[b]);
            }
        }
        if cfg.snapshots.contains(&ep) {
            out.push((ep, snapshot(&theta)));
        }
    }
    Ok(out)
}
