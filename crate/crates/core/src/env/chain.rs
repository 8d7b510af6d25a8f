use crate::error::{Error, Result};
use crate::mdp::TabularMdp;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;

/// Linear chain with absorbing ends; actions `left`/`right`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainSpec {
    pub length: usize,
    /// Probability of replacing the chosen action by a uniform one.
    pub noise_p: f64,
    pub terminal_reward: f64,
    pub step_reward: f64,
    pub gamma: f64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        ChainSpec { length: 10, noise_p: 0.1, terminal_reward: 10.0, step_reward: 1.0, gamma: 0.8 }
    }
}

/// Rewards are expected over the move: entering an end pays
/// `terminal_reward`, any other move pays `step_reward`. End states are
/// absorbing with reward 0.
pub fn make_chain(spec: &ChainSpec) -> Result<TabularMdp> {
    let n = spec.length;
    if n < 3 {
        return Err(Error::InvalidSpec(format!("chain length {n} < 3")));
    }
    if !(0.0..1.0).contains(&spec.noise_p) {
        return Err(Error::InvalidSpec(format!("chain noise {} outside [0, 1)", spec.noise_p)));
    }
    let mut kernel = vec![0.0; n * 2 * n];
    let mut reward = vec![0.0; n * 2];
    let terminal = |y: usize| y == 0 || y == n - 1;
    for x in 0..n {
        for a in [LEFT, RIGHT] {
            let row = &mut kernel[(x * 2 + a) * n..(x * 2 + a + 1) * n];
            if terminal(x) {
                row[x] = 1.0;
                continue;
            }
            let intended = 1.0 - spec.noise_p / 2.0;
            let (p_left, p_right) = if a == LEFT { (intended, 1.0 - intended) } else { (1.0 - intended, intended) };
            row[x - 1] += p_left;
            row[x + 1] += p_right;
            let mut r = 0.0;
            for (y, p) in [(x - 1, p_left), (x + 1, p_right)] {
                r += p * if terminal(y) { spec.terminal_reward } else { spec.step_reward };
            }
            reward[x * 2 + a] = r;
        }
    }
    TabularMdp::new(n, 2, kernel, reward, spec.gamma)
}
