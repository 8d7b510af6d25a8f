use rand::seq::index::sample;
use rand::Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::mdp::TabularMdp;
use crate::rng::{stream, Purpose};

/// Random MDP `<n_states, n_actions, branching>`.
#[derive(Debug, Clone, PartialEq)]
pub struct GarnetSpec {
    pub n_states: usize,
    pub n_actions: usize,
    pub branching: usize,
    pub seed: u64,
    /// Share of `(x, a)` pairs whose reward is boosted.
    pub boost_fraction: f64,
    pub boost_factor: f64,
    pub gamma: f64,
}

impl Default for GarnetSpec {
    fn default() -> Self {
        GarnetSpec {
            n_states: 20,
            n_actions: 5,
            branching: 2,
            seed: 0,
            boost_fraction: 0.1,
            boost_factor: 5.0,
            gamma: 0.9,
        }
    }
}

/// Each row puts flat-Dirichlet mass on `branching` distinct successors.
/// Rewards start `U[0, 1]`; a random `boost_fraction` of pairs is scaled by
/// `boost_factor`, so `|r| <= boost_factor`.
pub fn make_garnet(spec: &GarnetSpec) -> Result<TabularMdp> {
    let GarnetSpec { n_states: ns, n_actions: na, branching: nb, .. } = *spec;
    if ns == 0 || na == 0 || nb == 0 {
        return Err(Error::InvalidSpec("garnet sizes must be positive".into()));
    }
    if nb > ns {
        return Err(Error::InvalidSpec(format!("branching {nb} exceeds state count {ns}")));
    }
    if !(spec.boost_fraction > 0.0 && spec.boost_fraction < 1.0) || !(spec.boost_factor > 1.0) {
        return Err(Error::InvalidSpec("garnet boost needs fraction in (0,1) and factor > 1".into()));
    }
    let mut rng = stream(spec.seed, Purpose::Environment, &[ns as u64, na as u64, nb as u64]);
    let mut kernel = vec![0.0; ns * na * ns];
    for pair in 0..ns * na {
        let succ = sample(&mut rng, ns, nb);
        let w: Vec<f64> = (0..nb).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = w.iter().sum();
        let row = &mut kernel[pair * ns..(pair + 1) * ns];
        for (y, wi) in succ.iter().zip(&w) {
            row[y] = wi / total;
        }
    }
    let mut reward: Vec<f64> = (0..ns * na).map(|_| rng.gen::<f64>()).collect();
    let n_boost = ((spec.boost_fraction * (ns * na) as f64).round() as usize).max(1);
    for i in sample(&mut rng, ns * na, n_boost) {
        reward[i] *= spec.boost_factor;
    }
    TabularMdp::new(ns, na, kernel, reward, spec.gamma)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_have_exactly_branching_support() {
        for seed in 0..5 {
            let m = make_garnet(&GarnetSpec { seed, ..Default::default() }).unwrap();
            assert!(m.validate().is_empty());
            for x in 0..20 {
                for a in 0..5 {
                    let row = m.row(x, a);
                    assert_eq!(row.iter().filter(|&&p| p > 0.0).count(), 2);
                    assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
                }
            }
            assert!(m.r_max() <= 5.0);
        }
    }

    #[test]
    fn tiny_garnet_is_two_point() {
        let m = make_garnet(&GarnetSpec { n_states: 2, n_actions: 1, branching: 2, seed: 3, ..Default::default() }).unwrap();
        assert!(m.validate().is_empty());
        assert!(m.row(0, 0).iter().all(|&p| p > 0.0));
    }

    #[test]
    fn deterministic_in_seed() {
        let s = GarnetSpec { seed: 42, ..Default::default() };
        assert_eq!(make_garnet(&s).unwrap(), make_garnet(&s).unwrap());
        assert_ne!(make_garnet(&s).unwrap(), make_garnet(&GarnetSpec { seed: 43, ..s }).unwrap());
    }

    #[test]
    fn branching_larger_than_states_rejected() {
        assert!(make_garnet(&GarnetSpec { n_states: 2, branching: 3, ..Default::default() }).is_err());
    }
}
