//! Hand-written evaluation subjects for continuous environments.

use crate::env::{PUSH_LEFT, PUSH_RIGHT};
use crate::policy::Policy;

/// A named pure decision rule on coordinate states.
#[derive(Clone, Copy)]
pub struct ScriptedPolicy {
    pub name: &'static str,
    pub n_actions: usize,
    rule: fn(&[f64]) -> usize,
}

impl std::fmt::Debug for ScriptedPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScriptedPolicy").field("name", &self.name).finish()
    }
}

impl ScriptedPolicy {
    pub fn new(name: &'static str, n_actions: usize, rule: fn(&[f64]) -> usize) -> Self {
        ScriptedPolicy { name, n_actions, rule }
    }

    pub fn decide(&self, x: &[f64]) -> usize {
        (self.rule)(x)
    }
}

impl Policy<Vec<f64>> for ScriptedPolicy {
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn act(&self, x: &Vec<f64>, _u: f64) -> usize {
        (self.rule)(x)
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

/// Push right iff `3 theta + theta_dot > 0` on `(x, x_dot, theta, theta_dot)`.
pub fn ld_cartpole(state: &[f64]) -> usize {
    if 3.0 * state[2] + state[3] > 0.0 {
        PUSH_RIGHT
    } else {
        PUSH_LEFT
    }
}

pub fn ld_cartpole_policy() -> ScriptedPolicy {
    ScriptedPolicy::new("ld_cartpole", 2, ld_cartpole)
}

/// Uniform over actions, fresh draw at every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UniformPolicy {
    pub count: usize,
}

pub fn random_uniform(count: usize) -> crate::Result<UniformPolicy> {
    if count == 0 {
        return Err(crate::Error::InvalidSpec("uniform policy needs at least one action".into()));
    }
    Ok(UniformPolicy { count })
}

impl<S> Policy<S> for UniformPolicy {
    fn n_actions(&self) -> usize {
        self.count
    }

    fn act(&self, _x: &S, u: f64) -> usize {
        ((u * self.count as f64) as usize).min(self.count - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_cartpole, CartPoleSpec};
    use crate::mdp::GenerativeModel;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    #[test]
    fn ld_rule_signs() {
        assert_eq!(ld_cartpole(&[0.0, 0.0, 0.1, 0.0]), PUSH_RIGHT);
        assert_eq!(ld_cartpole(&[0.0, 0.0, -0.1, 0.0]), PUSH_LEFT);
        assert_eq!(ld_cartpole(&[0.0, 0.0, 0.1, -0.4]), PUSH_LEFT);
    }

    #[test]
    fn uniform_frequencies() {
        let p = random_uniform(2).unwrap();
        let mut rng = stream(4, Purpose::Policy, &[]);
        let n = 100_000;
        let right = (0..n).filter(|_| Policy::<usize>::act(&p, &0, rng.gen()) == 1).count();
        assert!((right as f64 / n as f64 - 0.5).abs() < 0.01);
        let one = random_uniform(1).unwrap();
        assert!((0..100).all(|_| Policy::<usize>::act(&one, &0, rng.gen()) == 0));
        assert!(random_uniform(0).is_err());
    }

    #[test]
    fn ld_survives_noiseless_cartpole() {
        let m = make_cartpole(&CartPoleSpec { angle_noise_std: 0.0, ..Default::default() }).unwrap();
        let policy = ld_cartpole_policy();
        for start in [[0.0, 0.0, 0.02, 0.0], [0.03, -0.02, -0.04, 0.05], [-0.05, 0.05, 0.01, -0.03]] {
            let mut s = start.to_vec();
            for _ in 0..200 {
                assert!(!m.is_terminal(&s));
                s = m.step(&s, policy.act(&s, 0.0), &[0.0]);
            }
        }
    }
}
