//! Policies: the trait UVIP evaluates against, and tabular policies with
//! their text format.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A Markov policy over states `S`.
pub trait Policy<S>: Sync {
    fn n_actions(&self) -> usize;

    /// Action at `x` given a uniform draw `u in [0, 1)`. Deterministic
    /// policies ignore `u`.
    fn act(&self, x: &S, u: f64) -> usize;

    fn is_deterministic(&self) -> bool {
        false
    }
}

/// Inverse CDF over a probability row.
pub fn sample_row(row: &[f64], u: f64) -> usize {
    let mut c = 0.0;
    for (a, p) in row.iter().enumerate() {
        c += p;
        if u < c {
            return a;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TabularPolicy {
    Deterministic { actions: Vec<usize>, n_actions: usize },
    Stochastic { probs: Vec<Vec<f64>> },
}

impl TabularPolicy {
    pub fn deterministic(actions: Vec<usize>, n_actions: usize) -> Result<Self> {
        if let Some(&a) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(Error::ActionOutOfRange { action: a, count: n_actions });
        }
        Ok(TabularPolicy::Deterministic { actions, n_actions })
    }

    pub fn stochastic(probs: Vec<Vec<f64>>) -> Result<Self> {
        let m = probs.first().map_or(0, Vec::len);
        for (x, row) in probs.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if row.len() != m || row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidSpec(format!("policy row {x} is not a distribution over {m} actions")));
            }
        }
        Ok(TabularPolicy::Stochastic { probs })
    }

    pub fn constant(n_states: usize, n_actions: usize, a: usize) -> Result<Self> {
        Self::deterministic(vec![a; n_states], n_actions)
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        TabularPolicy::Stochastic { probs: vec![vec![1.0 / n_actions as f64; n_actions]; n_states] }
    }

    pub fn n_states(&self) -> usize {
        match self {
            TabularPolicy::Deterministic { actions, .. } => actions.len(),
            TabularPolicy::Stochastic { probs } => probs.len(),
        }
    }

    pub fn prob(&self, x: usize, a: usize) -> f64 {
        match self {
            TabularPolicy::Deterministic { actions, .. } => f64::from(u8::from(actions[x] == a)),
            TabularPolicy::Stochastic { probs } => probs[x][a],
        }
    }

    pub fn to_text(&self) -> String {
        match self {
            TabularPolicy::Deterministic { actions, .. } => {
                let mut s = format!("policy deterministic {}\n", actions.len());
                for a in actions {
                    writeln!(s, "{a}").unwrap();
                }
                s
            }
            TabularPolicy::Stochastic { probs } => {
                let m = probs.first().map_or(0, Vec::len);
                let mut s = format!("policy stochastic {} {}\n", probs.len(), m);
                for row in probs {
                    let cells: Vec<String> = row.iter().map(f64::to_string).collect();
                    writeln!(s, "{}", cells.join(" ")).unwrap();
                }
                s
            }
        }
    }

    /// Parses the text format. Deterministic files do not record the action
    /// count, so the caller supplies it.
    pub fn from_text(text: &str, n_actions: usize) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty policy".into() })?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let num = |t: &str, line| t.parse::<usize>().map_err(|_| Error::Parse { line, msg: format!("bad count `{t}`") });
        match h.as_slice() {
            ["policy", "deterministic", n] => {
                let n = num(n, hl)?;
                let actions = lines.map(|(l, t)| num(t, l)).collect::<Result<Vec<_>>>()?;
                if actions.len() != n {
                    return Err(Error::Parse { line: hl, msg: format!("expected {n} actions, got {}", actions.len()) });
                }
                Self::deterministic(actions, n_actions)
            }
            ["policy", "stochastic", n, m] => {
                let (n, m) = (num(n, hl)?, num(m, hl)?);
                let mut probs = Vec::with_capacity(n);
                for (l, t) in lines {
                    let row = t
                        .split_whitespace()
                        .map(|v| v.parse::<f64>().map_err(|_| Error::Parse { line: l, msg: format!("bad probability `{v}`") }))
                        .collect::<Result<Vec<_>>>()?;
                    if row.len() != m {
                        return Err(Error::Parse { line: l, msg: format!("expected {m} entries") });
                    }
                    probs.push(row);
                }
                if probs.len() != n {
                    return Err(Error::Parse { line: hl, msg: format!("expected {n} rows, got {}", probs.len()) });
                }
                if m != n_actions {
                    return Err(Error::DimensionMismatch { expected: n_actions, got: m });
                }
                Self::stochastic(probs)
            }
            _ => Err(Error::Parse { line: hl, msg: "expected `policy deterministic <n>` or `policy stochastic <n> <m>`".into() }),
        }
    }
}

impl Policy<usize> for TabularPolicy {
    fn n_actions(&self) -> usize {
        match self {
            TabularPolicy::Deterministic { n_actions, .. } => *n_actions,
            TabularPolicy::Stochastic { probs } => probs.first().map_or(0, Vec::len),
        }
    }

    fn act(&self, x: &usize, u: f64) -> usize {
        match self {
            TabularPolicy::Deterministic { actions, .. } => actions[*x],
            TabularPolicy::Stochastic { probs } => sample_row(&probs[*x], u),
        }
    }

    fn is_deterministic(&self) -> bool {
        matches!(self, TabularPolicy::Deterministic { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let d = TabularPolicy::deterministic(vec![0, 1, 1, 0], 2).unwrap();
        assert_eq!(TabularPolicy::from_text(&d.to_text(), 2).unwrap(), d);
        let s = TabularPolicy::stochastic(vec![vec![0.25, 0.75], vec![1.0, 0.0]]).unwrap();
        assert_eq!(TabularPolicy::from_text(&s.to_text(), 2).unwrap(), s);
    }

    #[test]
    fn rejects_bad_rows_and_indices() {
        assert!(TabularPolicy::deterministic(vec![2], 2).is_err());
        assert!(TabularPolicy::stochastic(vec![vec![0.5, 0.6]]).is_err());
        assert!(TabularPolicy::from_text("policy deterministic 2\n0\n", 2).is_err());
        assert!(TabularPolicy::from_text("policy wat\n", 2).is_err());
    }

    #[test]
    fn sampling_rows() {
        let row = [0.2, 0.0, 0.8];
        assert_eq!(sample_row(&row, 0.1), 0);
        assert_eq!(sample_row(&row, 0.2), 2);
        assert_eq!(sample_row(&row, 0.999_999_999), 2);
        let p = TabularPolicy::uniform(3, 4);
        assert_eq!(p.act(&1, 0.6), 2);
        assert_eq!(p.prob(0, 3), 0.25);
    }
}
