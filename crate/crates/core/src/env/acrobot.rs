use std::f64::consts::PI;

use rand::Rng;

use crate::env::ContinuousModel;
use crate::mdp::{ActionSet, GenerativeModel, NoiseSpec, StateSpace};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq)]
pub struct AcrobotSpec {
    pub link_length_1: f64,
    pub link_mass_1: f64,
    pub link_mass_2: f64,
    pub link_com_1: f64,
    pub link_com_2: f64,
    pub link_moi: f64,
    pub gravity: f64,
    pub dt: f64,
    pub max_vel_1: f64,
    pub max_vel_2: f64,
    /// Half-width of the uniform torque disturbance.
    pub torque_noise: f64,
    pub gamma: f64,
}

impl Default for AcrobotSpec {
    fn default() -> Self {
        AcrobotSpec {
            link_length_1: 1.0,
            link_mass_1: 1.0,
            link_mass_2: 1.0,
            link_com_1: 0.5,
            link_com_2: 0.5,
            link_moi: 1.0,
            gravity: 9.8,
            dt: 0.2,
            max_vel_1: 4.0 * PI,
            max_vel_2: 9.0 * PI,
            torque_noise: 1.0,
            gamma: 0.9,
        }
    }
}

/// Two-link swing-up. Observation `(cos t1, sin t1, cos t2, sin t2, w1, w2)`;
/// actions apply torque `-1, 0, +1` plus uniform noise. Reaching the height
/// line is absorbing with reward 0, every other step pays -1.
#[derive(Debug, Clone)]
pub struct Acrobot {
    spec: AcrobotSpec,
    space: StateSpace,
}

pub fn make_acrobot(spec: &AcrobotSpec) -> crate::Result<Acrobot> {
    if !(spec.dt > 0.0) || spec.torque_noise < 0.0 || !(0.0..1.0).contains(&spec.gamma) {
        return Err(crate::Error::InvalidSpec("acrobot needs dt > 0, noise >= 0, gamma in [0, 1)".into()));
    }
    let space = StateSpace::new_box(
        vec![-1.0, -1.0, -1.0, -1.0, -spec.max_vel_1, -spec.max_vel_2],
        vec![1.0, 1.0, 1.0, 1.0, spec.max_vel_1, spec.max_vel_2],
    )?;
    Ok(Acrobot { spec: spec.clone(), space })
}

fn wrap(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w == -PI {
        PI
    } else {
        w
    }
}

impl Acrobot {
    pub fn spec(&self) -> &AcrobotSpec {
        &self.spec
    }

    pub fn nominal_torque(a: usize) -> f64 {
        a as f64 - 1.0
    }

    /// Torque actually applied for action `a` under noise `u ~ U[0, 1)`.
    pub fn applied_torque(&self, a: usize, u: f64) -> f64 {
        Self::nominal_torque(a) + self.spec.torque_noise * (2.0 * u - 1.0)
    }

    pub fn observe(angles: &[f64; 4]) -> Vec<f64> {
        let (s1, c1) = angles[0].sin_cos();
        let (s2, c2) = angles[1].sin_cos();
        vec![c1, s1, c2, s2, angles[2], angles[3]]
    }

    pub fn angles(obs: &[f64]) -> [f64; 4] {
        [obs[1].atan2(obs[0]), obs[3].atan2(obs[2]), obs[4], obs[5]]
    }

    fn derivs(&self, s: &[f64; 4], torque: f64) -> [f64; 4] {
        let p = &self.spec;
        let (m1, m2, l1, lc1, lc2) = (p.link_mass_1, p.link_mass_2, p.link_length_1, p.link_com_1, p.link_com_2);
        let (i1, i2, g) = (p.link_moi, p.link_moi, p.gravity);
        let [t1, t2, w1, w2] = *s;
        let d1 = m1 * lc1 * lc1 + m2 * (l1 * l1 + lc2 * lc2 + 2.0 * l1 * lc2 * t2.cos()) + i1 + i2;
        let d2 = m2 * (lc2 * lc2 + l1 * lc2 * t2.cos()) + i2;
        let phi2 = m2 * lc2 * g * (t1 + t2 - PI / 2.0).cos();
        let phi1 = -m2 * l1 * lc2 * w2 * w2 * t2.sin() - 2.0 * m2 * l1 * lc2 * w2 * w1 * t2.sin()
            + (m1 * lc1 + m2 * l1) * g * (t1 - PI / 2.0).cos()
            + phi2;
        let acc2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * w1 * w1 * t2.sin() - phi2)
            / (m2 * lc2 * lc2 + i2 - d2 * d2 / d1);
        let acc1 = -(d2 * acc2 + phi1) / d1;
        [w1, w2, acc1, acc2]
    }

    /// One RK4 step of the link dynamics under constant torque.
    pub fn integrate(&self, s: &[f64; 4], torque: f64) -> [f64; 4] {
        let h = self.spec.dt;
        let add = |a: &[f64; 4], k: &[f64; 4], c: f64| [a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2], a[3] + c * k[3]];
        let k1 = self.derivs(s, torque);
        let k2 = self.derivs(&add(s, &k1, h / 2.0), torque);
        let k3 = self.derivs(&add(s, &k2, h / 2.0), torque);
        let k4 = self.derivs(&add(s, &k3, h), torque);
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out[0] = wrap(out[0]);
        out[1] = wrap(out[1]);
        out[2] = out[2].clamp(-self.spec.max_vel_1, self.spec.max_vel_1);
        out[3] = out[3].clamp(-self.spec.max_vel_2, self.spec.max_vel_2);
        out
    }
}

impl GenerativeModel for Acrobot {
    type State = Vec<f64>;

    fn state_space(&self) -> &StateSpace {
        &self.space
    }

    fn actions(&self) -> ActionSet {
        ActionSet { count: 3 }
    }

    fn noise(&self) -> NoiseSpec {
        NoiseSpec::uniform(1)
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
            -1.0
        }
    }

    fn step(&self, x: &Vec<f64>, a: usize, xi: &[f64]) -> Vec<f64> {
        if self.is_terminal(x) {
            return x.clone();
        }
        let next = self.integrate(&Self::angles(x), self.applied_torque(a, xi[0]));
        Self::observe(&next)
    }

    /// Tip above the height line: `-cos t1 - cos(t1 + t2) > 1`.
    fn is_terminal(&self, x: &Vec<f64>) -> bool {
        let (c1, s1, c2, s2) = (x[0], x[1], x[2], x[3]);
        // cos(t1 + t2) = c1 c2 - s1 s2
        -c1 - (c1 * c2 - s1 * s2) > 1.0
    }
}

impl ContinuousModel for Acrobot {
    fn sample_state(&self, rng: &mut Stream) -> Vec<f64> {
        let angles = [
            rng.gen_range(-PI..PI),
            rng.gen_range(-PI..PI),
            rng.gen_range(-self.spec.max_vel_1..self.spec.max_vel_1),
            rng.gen_range(-self.spec.max_vel_2..self.spec.max_vel_2),
        ];
        Self::observe(&angles)
    }

    fn initial_state(&self, rng: &mut Stream) -> Vec<f64> {
        let angles = [0; 4].map(|_| rng.gen_range(-0.1..0.1));
        Self::observe(&angles)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};

    #[test]
    fn encoding_stays_on_unit_circles() {
        let m = make_acrobot(&AcrobotSpec::default()).unwrap();
        let mut rng = stream(1, Purpose::Trajectory, &[]);
        let mut s = m.initial_state(&mut rng);
        for t in 0..300 {
            for k in [0, 2] {
                assert!((s[k] * s[k] + s[k + 1] * s[k + 1] - 1.0).abs() < 1e-9);
            }
            if !m.is_terminal(&s) {
                assert_eq!(m.reward(&s, t % 3), -1.0);
            }
            s = m.step(&s, t % 3, &[rng.gen()]);
        }
    }

    #[test]
    fn applied_torque_within_noise_band() {
        let m = make_acrobot(&AcrobotSpec::default()).unwrap();
        for a in 0..3 {
            let nominal = Acrobot::nominal_torque(a);
            for u in [0.0, 0.25, 0.5, 0.999_999] {
                let t = m.applied_torque(a, u);
                assert!(t >= nominal - 1.0 && t <= nominal + 1.0);
            }
        }
        assert_eq!(m.applied_torque(2, 0.5), 1.0);
    }

    #[test]
    fn resting_state_is_not_terminal_and_top_is() {
        let m = make_acrobot(&AcrobotSpec::default()).unwrap();
        assert!(!m.is_terminal(&Acrobot::observe(&[0.0; 4])));
        assert!(m.is_terminal(&Acrobot::observe(&[PI, 0.0, 0.0, 0.0])));
        let top = Acrobot::observe(&[PI, 0.0, 0.0, 0.0]);
        assert_eq!(m.reward(&top, 1), 0.0);
        assert_eq!(m.step(&top, 0, &[0.1]), top);
    }
}
