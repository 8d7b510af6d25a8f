//! Benchmark environments. Tabular ones build a [`TabularMdp`]; continuous
//! ones implement [`GenerativeModel`] over coordinate vectors.

mod acrobot;
mod cartpole;
mod chain;
mod frozen_lake;
mod garnet;

pub use acrobot::{make_acrobot, Acrobot, AcrobotSpec};
pub use cartpole::{make_cartpole, CartPole, CartPoleSpec};
pub use cartpole::{PUSH_LEFT, PUSH_RIGHT};
pub use chain::{make_chain, ChainSpec};
pub use frozen_lake::{make_frozen_lake, FROZEN_LAKE_MAP, GAMMA as FROZEN_LAKE_GAMMA};
pub use garnet::{make_garnet, GarnetSpec};

use crate::lipschitz::uniform_point;
use crate::mdp::{GenerativeModel, StateSpace, TabularMdp};
use crate::rng::Stream;

/// Continuous-state models expose how to draw design and start states.
pub trait ContinuousModel: GenerativeModel<State = Vec<f64>> {
    /// A design point; uniform over the state box unless overridden.
    fn sample_state(&self, rng: &mut Stream) -> Vec<f64> {
        match self.state_space() {
            StateSpace::Box { lower, upper } => uniform_point(lower, upper, rng),
            StateSpace::Tabular { .. } => unreachable!("continuous model with tabular space"),
        }
    }

    /// Episode start state.
    fn initial_state(&self, rng: &mut Stream) -> Vec<f64>;
}

/// Two states, two deterministic actions: `a0` goes to state 0 with reward 0,
/// `a1` goes to state 1 with reward 1; discount 0.5. `V* = 2` everywhere.
pub fn toy_mdp() -> TabularMdp {
    #[rustfmt::skip]
    let kernel = vec![
        1.0, 0.0,   0.0, 1.0,
        1.0, 0.0,   0.0, 1.0,
    ];
    TabularMdp::new(2, 2, kernel, vec![0.0, 1.0, 0.0, 1.0], 0.5).expect("toy MDP is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_is_deterministic() {
        let m = toy_mdp();
        assert!(m.validate().is_empty());
        assert_eq!(m.prob(0, 1, 1), 1.0);
        assert_eq!(m.prob(1, 0, 0), 1.0);
        assert_eq!(m.reward(1, 1), 1.0);
    }
}
