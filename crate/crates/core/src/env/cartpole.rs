use rand::Rng;

use crate::env::ContinuousModel;
use crate::mdp::{ActionSet, GenerativeModel, NoiseSpec, StateSpace};
use crate::rng::Stream;

pub const PUSH_LEFT: usize = 0;
pub const PUSH_RIGHT: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct CartPoleSpec {
    pub gravity: f64,
    pub mass_cart: f64,
    pub mass_pole: f64,
    /// Half the pole length.
    pub half_length: f64,
    pub force_mag: f64,
    pub tau: f64,
    /// Std of the Gaussian kick added to the angle after every step.
    pub angle_noise_std: f64,
    pub x_threshold: f64,
    pub theta_threshold: f64,
    /// Velocity half-widths of the design box.
    pub max_velocity: f64,
    pub max_angular_velocity: f64,
    pub gamma: f64,
}

impl Default for CartPoleSpec {
    fn default() -> Self {
        CartPoleSpec {
            gravity: 9.8,
            mass_cart: 1.0,
            mass_pole: 0.1,
            half_length: 0.5,
            force_mag: 10.0,
            tau: 0.02,
            angle_noise_std: 0.02,
            x_threshold: 2.4,
            theta_threshold: 12.0 * std::f64::consts::PI / 180.0,
            max_velocity: 2.0,
            max_angular_velocity: 3.0,
            gamma: 0.9,
        }
    }
}

/// Cart-pole with state `(x, x_dot, theta, theta_dot)` and Euler steps.
/// Leaving the position or angle bounds is absorbing with reward 0; every
/// other step pays 1.
#[derive(Debug, Clone)]
pub struct CartPole {
    spec: CartPoleSpec,
    space: StateSpace,
}

pub fn make_cartpole(spec: &CartPoleSpec) -> crate::Result<CartPole> {
    if !(spec.tau > 0.0) || spec.angle_noise_std < 0.0 || !(0.0..1.0).contains(&spec.gamma) {
        return Err(crate::Error::InvalidSpec("cartpole needs tau > 0, noise >= 0, gamma in [0, 1)".into()));
    }
    let s = spec;
    let space = StateSpace::new_box(
        vec![-s.x_threshold, -s.max_velocity, -s.theta_threshold, -s.max_angular_velocity],
        vec![s.x_threshold, s.max_velocity, s.theta_threshold, s.max_angular_velocity],
    )?;
    Ok(CartPole { spec: spec.clone(), space })
}

impl CartPole {
    pub fn spec(&self) -> &CartPoleSpec {
        &self.spec
    }

    /// Noiseless Euler step.
    pub fn integrate(&self, s: &[f64], a: usize) -> [f64; 4] {
        let p = &self.spec;
        let [x, x_dot, theta, theta_dot] = [s[0], s[1], s[2], s[3]];
        let force = if a == PUSH_RIGHT { p.force_mag } else { -p.force_mag };
        let total_mass = p.mass_cart + p.mass_pole;
        let pole_ml = p.mass_pole * p.half_length;
        let (sin, cos) = theta.sin_cos();
        let temp = (force + pole_ml * theta_dot * theta_dot * sin) / total_mass;
        let theta_acc =
            (p.gravity * sin - cos * temp) / (p.half_length * (4.0 / 3.0 - p.mass_pole * cos * cos / total_mass));
        let x_acc = temp - pole_ml * theta_acc * cos / total_mass;
        [
            x + p.tau * x_dot,
            x_dot + p.tau * x_acc,
            theta + p.tau * theta_dot,
            theta_dot + p.tau * theta_acc,
        ]
    }
}

impl GenerativeModel for CartPole {
    type State = Vec<f64>;

    fn state_space(&self) -> &StateSpace {
        &self.space
    }

    fn actions(&self) -> ActionSet {
        ActionSet { count: 2 }
    }

    fn noise(&self) -> NoiseSpec {
        NoiseSpec::normal(1)
    }

    fn gamma(&self) -> f64 {
        self.spec.gamma
    }

    fn r_max(&self) -> f64 {
        1.0
    }

    fn reward(&self, x: &Vec<f64>, _a: usize) -> f64 {
        if self.is_terminal(x) {
            0.0
        } else {
            1.0
        }
    }

    fn step(&self, x: &Vec<f64>, a: usize, xi: &[f64]) -> Vec<f64> {
        if self.is_terminal(x) {
            return x.clone();
        }
        let mut next = self.integrate(x, a);
        next[2] += self.spec.angle_noise_std * xi[0];
        next.to_vec()
    }

    fn is_terminal(&self, x: &Vec<f64>) -> bool {
        x[0].abs() > self.spec.x_threshold || x[2].abs() > self.spec.theta_threshold
    }
}

impl ContinuousModel for CartPole {
    fn initial_state(&self, rng: &mut Stream) -> Vec<f64> {
        (0..4).map(|_| rng.gen_range(-0.05..0.05)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn upright_equilibrium_without_force_or_noise() {
        let m = make_cartpole(&CartPoleSpec { force_mag: 0.0, angle_noise_std: 0.0, ..Default::default() }).unwrap();
        let mut s = vec![0.0; 4];
        for t in 0..500 {
            s = m.step(&s, t % 2, &[0.3]);
        }
        assert_eq!(s, vec![0.0; 4]);
        assert!(!m.is_terminal(&s));
    }

    #[test]
    fn unit_reward_until_absorbed() {
        let m = make_cartpole(&CartPoleSpec::default()).unwrap();
        let mut s = vec![0.0, 0.0, 0.05, 0.0];
        let mut steps = 0;
        while !m.is_terminal(&s) {
            assert_eq!(m.reward(&s, PUSH_LEFT), 1.0);
            s = m.step(&s, PUSH_LEFT, &[0.0]);
            steps += 1;
            assert!(steps < 1000);
        }
        assert_eq!(m.reward(&s, PUSH_LEFT), 0.0);
        assert_eq!(m.step(&s, PUSH_RIGHT, &[1.0]), s);
        assert_eq!(m.gamma(), 0.9);
    }

    #[test]
    fn angle_noise_only_touches_angle() {
        let spec = CartPoleSpec::default();
        let m = make_cartpole(&spec).unwrap();
        let s = vec![0.1, 0.2, 0.01, -0.1];
        let a = m.step(&s, PUSH_RIGHT, &[0.0]);
        let b = m.step(&s, PUSH_RIGHT, &[1.0]);
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1], b[1]);
        assert_eq!(a[3], b[3]);
        assert!((b[2] - a[2] - spec.angle_noise_std).abs() < 1e-15);
    }
}
