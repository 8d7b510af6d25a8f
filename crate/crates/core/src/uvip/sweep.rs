use rayon::prelude::*;

use crate::lipschitz::{Interpolant, Metric};
use crate::mdp::GenerativeModel;
use crate::rng::{stream, Purpose, Stream};

use super::config::{ControlVariate, Coupling, Resampling, UvipConfig};

/// A value function that can be evaluated at arbitrary states.
pub trait StateValue<S>: Sync {
    fn value(&self, x: &S) -> f64;
}

impl StateValue<usize> for Vec<f64> {
    #[inline]
    fn value(&self, x: &usize) -> f64 {
        self[*x]
    }
}

impl StateValue<usize> for [f64] {
    #[inline]
    fn value(&self, x: &usize) -> f64 {
        self[*x]
    }
}

impl<S: Metric + Sync> StateValue<S> for Interpolant<S> {
    #[inline]
    fn value(&self, x: &S) -> f64 {
        Interpolant::value(self, x)
    }
}

/// Wraps a closure as a [`StateValue`].
pub struct FnValue<F>(pub F);

impl<S, F: Fn(&S) -> f64 + Sync> StateValue<S> for FnValue<F> {
    fn value(&self, x: &S) -> f64 {
        (self.0)(x)
    }
}

/// Same value everywhere.
#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl<S> StateValue<S> for Constant {
    fn value(&self, _x: &S) -> f64 {
        self.0
    }
}

/// Addresses the noise substream of one sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepKey {
    pub replicate: u64,
    pub iteration: u64,
}

impl SweepKey {
    pub fn stream_for(&self, cfg: &UvipConfig, point: usize) -> Stream {
        let iteration = match cfg.resampling {
            Resampling::FreshPerIteration => self.iteration,
            Resampling::Frozen => 0,
        };
        stream(cfg.seed, Purpose::Sweep, &[self.replicate, iteration, point as u64])
    }
}

/// Values of absorbing states are known to be zero; everything else goes
/// through `f`.
#[inline]
fn eval<G, V>(g: &G, f: &V, y: &G::State) -> f64
where
    G: GenerativeModel,
    V: StateValue<G::State> + ?Sized,
{
    if g.is_terminal(y) {
        0.0
    } else {
        f.value(y)
    }
}

/// `M1^{-1} sum_l V^pi(psi(x, a, xi_l))` over the supplied noise block.
pub fn control_variate_mean<G, C>(g: &G, v_pi: &C, x: &G::State, a: usize, xi_block: &[Vec<f64>]) -> f64
where
    G: GenerativeModel,
    C: StateValue<G::State> + ?Sized,
{
    let total: f64 = xi_block.iter().map(|xi| eval(g, v_pi, &g.step(x, a, xi))).sum();
    total / xi_block.len() as f64
}

/// One upper-value update at design point `x`:
/// `M2^{-1} sum_j max_a { r(x,a) + gamma (V_k(Y_j^a) - V^pi(Y_j^a) + Vbar^a) }`.
pub fn sweep_point<G, C, V>(g: &G, v_pi: &C, current: &V, x: &G::State, cfg: &UvipConfig, rng: &mut Stream) -> f64
where
    G: GenerativeModel,
    C: StateValue<G::State> + ?Sized,
    V: StateValue<G::State> + ?Sized,
{
    let na = g.actions().count;
    let gamma = g.gamma();
    let noise = g.noise();
    let draws_per_sample = match cfg.coupling {
        Coupling::SharedNoise => 1,
        Coupling::Independent => na,
    };
    let mut xi = vec![0.0; noise.dim * draws_per_sample];
    let xi_for = |a: usize| -> std::ops::Range<usize> {
        let k = if draws_per_sample == 1 { 0 } else { a };
        k * noise.dim..(k + 1) * noise.dim
    };

    let mut vbar = vec![0.0; na];
    let exact = match cfg.control_variate {
        ControlVariate::Exact => (0..na)
            .map(|a| g.expectation(x, a, &|y| eval(g, v_pi, y)))
            .collect::<Option<Vec<f64>>>(),
        ControlVariate::Sampled => None,
    };
    match exact {
        Some(v) => vbar = v,
        None => {
            for _ in 0..cfg.m1 {
                for chunk in xi.chunks_exact_mut(noise.dim) {
                    noise.fill(rng, chunk);
                }
                for (a, acc) in vbar.iter_mut().enumerate() {
                    *acc += eval(g, v_pi, &g.step(x, a, &xi[xi_for(a)]));
                }
            }
            vbar.iter_mut().for_each(|v| *v /= cfg.m1 as f64);
        }
    }

    let rewards: Vec<f64> = (0..na).map(|a| g.reward(x, a)).collect();
    let mut total = 0.0;
    for _ in 0..cfg.m2 {
        for chunk in xi.chunks_exact_mut(noise.dim) {
            noise.fill(rng, chunk);
        }
        let mut best = f64::NEG_INFINITY;
        for a in 0..na {
            let y = g.step(x, a, &xi[xi_for(a)]);
            let (vk, vp) = if g.is_terminal(&y) { (0.0, 0.0) } else { (current.value(&y), v_pi.value(&y)) };
            best = best.max(rewards[a] + gamma * (vk - vp + vbar[a]));
        }
        total += best;
    }
    total / cfg.m2 as f64
}

/// Applies [`sweep_point`] at every design point. Each point draws from its
/// own keyed stream, so the result does not depend on the thread count.
pub fn uvip_sweep<G, C, V>(g: &G, v_pi: &C, current: &V, design: &[G::State], cfg: &UvipConfig, key: SweepKey) -> Vec<f64>
where
    G: GenerativeModel,
    C: StateValue<G::State> + ?Sized,
    V: StateValue<G::State> + ?Sized,
{
    design
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            if g.is_terminal(x) {
                return 0.0;
            }
            let mut rng = key.stream_for(cfg, i);
            sweep_point(g, v_pi, current, x, cfg, &mut rng)
        })
        .collect()
}
