use crate::mdp::TabularMdp;

/// The standard 4x4 map: `S` start, `F` frozen, `H` hole, `G` goal.
pub const FROZEN_LAKE_MAP: [&str; 4] = ["SFFF", "FHFH", "FFFH", "HFFG"];

pub const GOAL_REWARD: f64 = 10.0;
pub const GAMMA: f64 = 0.9;

const LEFT: usize = 0;
const DOWN: usize = 1;
const RIGHT: usize = 2;
const UP: usize = 3;

fn cell(s: usize) -> u8 {
    FROZEN_LAKE_MAP[s / 4].as_bytes()[s % 4]
}

fn shift(s: usize, dir: usize) -> usize {
    let (r, c) = (s / 4, s % 4);
    let (r, c) = match dir {
        LEFT => (r, c.saturating_sub(1)),
        DOWN => ((r + 1).min(3), c),
        RIGHT => (r, (c + 1).min(3)),
        UP => (r.saturating_sub(1), c),
        _ => unreachable!(),
    };
    r * 4 + c
}

/// Slippery 4x4 lake: the intended move and both perpendicular moves each
/// happen with probability 1/3; walls leave the agent in place. Holes and
/// the goal are absorbing; entering the goal pays 10.
pub fn make_frozen_lake() -> TabularMdp {
    let (ns, na) = (16, 4);
    let mut kernel = vec![0.0; ns * na * ns];
    let mut reward = vec![0.0; ns * na];
    for s in 0..ns {
        for a in 0..na {
            let row = &mut kernel[(s * na + a) * ns..(s * na + a + 1) * ns];
            if matches!(cell(s), b'H' | b'G') {
                row[s] = 1.0;
                continue;
            }
            for dir in [(a + 3) % 4, a, (a + 1) % 4] {
                let y = shift(s, dir);
                row[y] += 1.0 / 3.0;
                if cell(y) == b'G' {
                    reward[s * na + a] += GOAL_REWARD / 3.0;
                }
            }
        }
    }
    // repeated additions of 1/3 can land one ulp away from 1
    for row in kernel.chunks_exact_mut(ns) {
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= sum);
    }
    TabularMdp::new(ns, na, kernel, reward, GAMMA).expect("frozen lake kernel is stochastic")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stochastic_rows_and_absorbing_cells() {
        let m = make_frozen_lake();
        assert!(m.validate().is_empty());
        for s in [5, 7, 11, 12, 15] {
            assert!(m.is_absorbing(s), "state {s}");
        }
        assert_eq!(m.r_max(), 10.0 / 3.0);
    }

    #[test]
    fn goal_pays_ten_and_holes_nothing() {
        let m = make_frozen_lake();
        // state 14 moving right: right lands on goal, up/down do not
        assert!((m.reward(14, RIGHT) - 10.0 * m.prob(14, RIGHT, 15)).abs() < 1e-12);
        assert!((m.prob(14, RIGHT, 15) - 1.0 / 3.0).abs() < 1e-12);
        // state 4 moving right can fall into hole 5 with no reward
        assert!(m.prob(4, RIGHT, 5) > 0.0);
        assert_eq!(m.reward(4, RIGHT), 0.0);
    }

    #[test]
    fn wall_move_from_start_keeps_mass() {
        // start corner, LEFT: slips are UP (wall), LEFT (wall), DOWN -> 4
        let m = make_frozen_lake();
        assert!((m.prob(0, LEFT, 0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((m.prob(0, LEFT, 4) - 1.0 / 3.0).abs() < 1e-12);
        assert!((m.prob(0, UP, 0) - 2.0 / 3.0).abs() < 1e-12);
    }
}
