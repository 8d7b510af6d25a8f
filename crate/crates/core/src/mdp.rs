//! MDP abstractions: state/action spaces, the reparametrized generative
//! model, explicit tabular kernels and the operators built on them.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::lipschitz::Metric;
use crate::rng::Stream;

/// Tolerance on kernel row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum StateSpace {
    Tabular { count: usize },
    Box { lower: Vec<f64>, upper: Vec<f64> },
}

impl StateSpace {
    pub fn tabular(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidSpec("tabular state space needs at least one state".into()));
        }
        Ok(StateSpace::Tabular { count })
    }

    pub fn new_box(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::InvalidSpec("box bounds must be nonempty and of equal length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(Error::InvalidSpec("box needs lower < upper componentwise".into()));
        }
        Ok(StateSpace::Box { lower, upper })
    }

    pub fn dim(&self) -> usize {
        match self {
            StateSpace::Tabular { .. } => 1,
            StateSpace::Box { lower, .. } => lower.len(),
        }
    }

    pub fn is_tabular(&self) -> bool {
        matches!(self, StateSpace::Tabular { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActionSet {
    pub count: usize,
}

impl ActionSet {
    pub fn new(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidSpec("action set must be nonempty".into()));
        }
        Ok(ActionSet { count })
    }

    pub fn check(&self, a: usize) -> Result<()> {
        if a < self.count {
            Ok(())
        } else {
            Err(Error::ActionOutOfRange { action: a, count: self.count })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseDist {
    /// Uniform on `[0, 1)^dim`.
    Uniform,
    StandardNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoiseSpec {
    pub dim: usize,
    pub dist: NoiseDist,
}

impl NoiseSpec {
    pub fn uniform(dim: usize) -> Self {
        NoiseSpec { dim, dist: NoiseDist::Uniform }
    }

    pub fn normal(dim: usize) -> Self {
        NoiseSpec { dim, dist: NoiseDist::StandardNormal }
    }

    /// Fills `out` (length `dim`) with one noise vector.
    pub fn fill(&self, rng: &mut Stream, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        match self.dist {
            NoiseDist::Uniform => out.iter_mut().for_each(|v| *v = rng.gen::<f64>()),
            NoiseDist::StandardNormal => out.iter_mut().for_each(|v| *v = rng.sample(StandardNormal)),
        }
    }

    pub fn sample(&self, rng: &mut Stream) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        self.fill(rng, &mut v);
        v
    }
}

/// A simulator `Y = psi(x, a, xi)` with reward `r(x, a)` and discount.
///
/// This is the only interface the upper value iteration needs. Tabular
/// models use `usize` states, box models use coordinate vectors.
pub trait GenerativeModel: Sync {
    type State: Clone + Send + Sync + Metric;

    fn state_space(&self) -> &StateSpace;
    fn actions(&self) -> ActionSet;
    fn noise(&self) -> NoiseSpec;
    fn gamma(&self) -> f64;
    /// Bound on `|reward|`.
    fn r_max(&self) -> f64;
    fn reward(&self, x: &Self::State, a: usize) -> f64;

    /// `psi(x, a, xi)` without argument checks.
    fn step(&self, x: &Self::State, a: usize, xi: &[f64]) -> Self::State;

    /// Absorbing zero-reward states, whose value under every policy is 0.
    fn is_terminal(&self, _x: &Self::State) -> bool {
        false
    }

    /// Exact `sum_y P(y | x, a) f(y)` when the kernel is known.
    fn expectation(&self, _x: &Self::State, _a: usize, _f: &dyn Fn(&Self::State) -> f64) -> Option<f64> {
        None
    }

    fn transition(&self, x: &Self::State, a: usize, xi: &[f64]) -> Result<Self::State> {
        self.actions().check(a)?;
        let dim = self.noise().dim;
        if xi.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: xi.len() });
        }
        Ok(self.step(x, a, xi))
    }

    /// Horizon `H` such that the discounted tail after `H` steps is at most `tol`.
    fn horizon_for(&self, tol: f64) -> usize {
        horizon_for(self.gamma(), self.r_max(), tol)
    }
}

/// Smallest `H` with `gamma^H * r_max / (1 - gamma) <= tol`.
pub fn horizon_for(gamma: f64, r_max: f64, tol: f64) -> usize {
    if gamma <= 0.0 || r_max <= 0.0 {
        return 1;
    }
    let h = (tol * (1.0 - gamma) / r_max).ln() / gamma.ln();
    (h.ceil().max(1.0)) as usize
}

/// Action-value table indexed `(x, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    pub n_states: usize,
    pub n_actions: usize,
    pub data: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        QTable { n_states, n_actions, data: vec![0.0; n_states * n_actions] }
    }

    #[inline]
    pub fn get(&self, x: usize, a: usize) -> f64 {
        self.data[x * self.n_actions + a]
    }

    #[inline]
    pub fn set(&mut self, x: usize, a: usize, v: f64) {
        self.data[x * self.n_actions + a] = v;
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.data[x * self.n_actions..(x + 1) * self.n_actions]
    }

    /// `max_a Q(x, a)` per state.
    pub fn max_per_state(&self) -> Vec<f64> {
        (0..self.n_states)
            .map(|x| self.row(x).iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }
}

/// A kernel row that is not a probability distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct RowViolation {
    pub state: usize,
    pub action: usize,
    pub sum: f64,
    pub has_negative: bool,
}

/// Explicit finite MDP: `kernel[(x, a, y)]`, `reward[(x, a)]`, discount.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    kernel: Vec<f64>,
    reward: Vec<f64>,
    gamma: f64,
}

impl TabularMdp {
    /// Checked constructor; rejects non-stochastic rows.
    pub fn new(n_states: usize, n_actions: usize, kernel: Vec<f64>, reward: Vec<f64>, gamma: f64) -> Result<Self> {
        let m = Self::from_parts(n_states, n_actions, kernel, reward, gamma)?;
        let violations = m.validate();
        if let Some(v) = violations.first() {
            return Err(Error::InvalidKernel(violations.len(), v.state, v.action));
        }
        Ok(m)
    }

    /// Shape-checked constructor that does not validate row sums.
    pub fn from_parts(n_states: usize, n_actions: usize, kernel: Vec<f64>, reward: Vec<f64>, gamma: f64) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidSpec("need at least one state and one action".into()));
        }
        if kernel.len() != n_states * n_actions * n_states {
            return Err(Error::DimensionMismatch { expected: n_states * n_actions * n_states, got: kernel.len() });
        }
        if reward.len() != n_states * n_actions {
            return Err(Error::DimensionMismatch { expected: n_states * n_actions, got: reward.len() });
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidSpec(format!("discount {gamma} outside [0, 1)")));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidSpec("non-finite reward".into()));
        }
        Ok(TabularMdp { n_states, n_actions, kernel, reward, gamma })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidSpec(format!("discount {gamma} outside [0, 1)")));
        }
        self.gamma = gamma;
        Ok(self)
    }

    #[inline]
    pub fn row(&self, x: usize, a: usize) -> &[f64] {
        let s = (x * self.n_actions + a) * self.n_states;
        &self.kernel[s..s + self.n_states]
    }

    #[inline]
    pub fn prob(&self, x: usize, a: usize, y: usize) -> f64 {
        self.row(x, a)[y]
    }

    #[inline]
    pub fn reward(&self, x: usize, a: usize) -> f64 {
        self.reward[x * self.n_actions + a]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.reward
    }

    pub fn r_max(&self) -> f64 {
        self.reward.iter().fold(0.0_f64, |m, r| m.max(r.abs()))
    }

    /// Every row that is negative somewhere or does not sum to one.
    pub fn validate(&self) -> Vec<RowViolation> {
        let mut out = Vec::new();
        for x in 0..self.n_states {
            for a in 0..self.n_actions {
                let row = self.row(x, a);
                let sum: f64 = row.iter().sum();
                let has_negative = row.iter().any(|&p| p < 0.0 || !p.is_finite());
                if has_negative || (sum - 1.0).abs() > ROW_SUM_TOL {
                    out.push(RowViolation { state: x, action: a, sum, has_negative });
                }
            }
        }
        out
    }

    /// `(P^a V)(x)` for every `(x, a)`.
    pub fn kernel_apply(&self, v: &[f64]) -> Result<QTable> {
        if v.len() != self.n_states {
            return Err(Error::DimensionMismatch { expected: self.n_states, got: v.len() });
        }
        let mut q = QTable::zeros(self.n_states, self.n_actions);
        for x in 0..self.n_states {
            for a in 0..self.n_actions {
                q.set(x, a, dot(self.row(x, a), v));
            }
        }
        Ok(q)
    }

    /// `r(x, a) + gamma (P^a V)(x)`.
    pub fn bellman_q(&self, v: &[f64]) -> Result<QTable> {
        let mut q = self.kernel_apply(v)?;
        for (qv, r) in q.data.iter_mut().zip(&self.reward) {
            *qv = r + self.gamma * *qv;
        }
        Ok(q)
    }

    /// Zero-reward states that every action maps to themselves.
    pub fn is_absorbing(&self, x: usize) -> bool {
        (0..self.n_actions).all(|a| self.reward(x, a) == 0.0 && self.prob(x, a, x) == 1.0)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("tabular {} {} {}\n", self.n_states, self.n_actions, self.gamma);
        for x in 0..self.n_states {
            for a in 0..self.n_actions {
                write!(s, "{} {} {}", x, a, self.reward(x, a)).unwrap();
                for p in self.row(x, a) {
                    write!(s, " {p}").unwrap();
                }
                s.push('\n');
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty input".into() })?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 || h[0] != "tabular" {
            return Err(Error::Parse { line: hl, msg: "expected `tabular <nstates> <nactions> <gamma>`".into() });
        }
        let n_states: usize = parse_tok(h[1], hl)?;
        let n_actions: usize = parse_tok(h[2], hl)?;
        let gamma: f64 = parse_tok(h[3], hl)?;
        let mut kernel = vec![f64::NAN; n_states * n_actions * n_states];
        let mut reward = vec![f64::NAN; n_states * n_actions];
        let mut seen = vec![false; n_states * n_actions];
        for (ln, line) in lines {
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != 3 + n_states {
                return Err(Error::Parse { line: ln, msg: format!("expected {} fields, got {}", 3 + n_states, toks.len()) });
            }
            let x: usize = parse_tok(toks[0], ln)?;
            let a: usize = parse_tok(toks[1], ln)?;
            if x >= n_states || a >= n_actions {
                return Err(Error::Parse { line: ln, msg: format!("pair ({x}, {a}) out of range") });
            }
            let idx = x * n_actions + a;
            if seen[idx] {
                return Err(Error::Parse { line: ln, msg: format!("duplicate pair ({x}, {a})") });
            }
            seen[idx] = true;
            reward[idx] = parse_tok(toks[2], ln)?;
            for (y, t) in toks[3..].iter().enumerate() {
                kernel[idx * n_states + y] = parse_tok(t, ln)?;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Parse {
                line: 0,
                msg: format!("missing row for pair ({}, {})", missing / n_actions, missing % n_actions),
            });
        }
        TabularMdp::new(n_states, n_actions, kernel, reward, gamma)
    }

    /// Inverse-CDF generative model over a scalar uniform noise.
    pub fn to_generative(&self) -> Result<TabularSampler> {
        TabularSampler::new(Arc::new(self.clone()))
    }
}

fn parse_tok<T: std::str::FromStr>(tok: &str, line: usize) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse { line, msg: format!("cannot parse `{tok}`") })
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Generative view of a [`TabularMdp`]: `psi(x, a, xi)` is the smallest `y`
/// whose cumulative kernel mass exceeds `xi`, with `xi ~ U[0, 1)`.
///
/// One scalar `xi` can be shared across actions (common random numbers).
#[derive(Debug, Clone)]
pub struct TabularSampler {
    mdp: Arc<TabularMdp>,
    space: StateSpace,
    /// Per `(x, a)`: range into `succ`/`cum`.
    offsets: Vec<usize>,
    succ: Vec<usize>,
    cum: Vec<f64>,
    prob: Vec<f64>,
    absorbing: Vec<bool>,
}

impl TabularSampler {
    pub fn new(mdp: Arc<TabularMdp>) -> Result<Self> {
        let violations = mdp.validate();
        if let Some(v) = violations.first() {
            return Err(Error::InvalidKernel(violations.len(), v.state, v.action));
        }
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let mut offsets = Vec::with_capacity(ns * na + 1);
        let (mut succ, mut cum, mut prob) = (Vec::new(), Vec::new(), Vec::new());
        offsets.push(0);
        for x in 0..ns {
            for a in 0..na {
                let mut c = 0.0;
                for (y, &p) in mdp.row(x, a).iter().enumerate() {
                    if p > 0.0 {
                        c += p;
                        succ.push(y);
                        cum.push(c);
                        prob.push(p);
                    }
                }
                offsets.push(succ.len());
            }
        }
        let absorbing = (0..ns).map(|x| mdp.is_absorbing(x)).collect();
        Ok(TabularSampler {
            space: StateSpace::Tabular { count: ns },
            mdp,
            offsets,
            succ,
            cum,
            prob,
            absorbing,
        })
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn shared_mdp(&self) -> Arc<TabularMdp> {
        Arc::clone(&self.mdp)
    }

    pub fn n_states(&self) -> usize {
        self.mdp.n_states()
    }

    #[inline]
    fn range(&self, x: usize, a: usize) -> std::ops::Range<usize> {
        let i = x * self.mdp.n_actions() + a;
        self.offsets[i]..self.offsets[i + 1]
    }

    /// Inverse CDF at `u`.
    #[inline]
    pub fn successor(&self, x: usize, a: usize, u: f64) -> usize {
        let r = self.range(x, a);
        let cum = &self.cum[r.clone()];
        let succ = &self.succ[r];
        for (c, &y) in cum.iter().zip(succ) {
            if *c > u {
                return y;
            }
        }
        // rounding left the total mass slightly below u
        *succ.last().expect("stochastic row has a positive entry")
    }
}

impl GenerativeModel for TabularSampler {
    type State = usize;

    fn state_space(&self) -> &StateSpace {
        &self.space
    }

    fn actions(&self) -> ActionSet {
        ActionSet { count: self.mdp.n_actions() }
    }

    fn noise(&self) -> NoiseSpec {
        NoiseSpec::uniform(1)
    }

    fn gamma(&self) -> f64 {
        self.mdp.gamma()
    }

    fn r_max(&self) -> f64 {
        self.mdp.r_max()
    }

    #[inline]
    fn reward(&self, x: &usize, a: usize) -> f64 {
        self.mdp.reward(*x, a)
    }

    #[inline]
    fn step(&self, x: &usize, a: usize, xi: &[f64]) -> usize {
        self.successor(*x, a, xi[0])
    }

    fn is_terminal(&self, x: &usize) -> bool {
        self.absorbing[*x]
    }

    fn expectation(&self, x: &usize, a: usize, f: &dyn Fn(&usize) -> f64) -> Option<f64> {
        let r = self.range(*x, a);
        Some(self.succ[r.clone()].iter().zip(&self.prob[r]).map(|(y, p)| p * f(y)).sum())
    }

    fn transition(&self, x: &usize, a: usize, xi: &[f64]) -> Result<usize> {
        if *x >= self.n_states() {
            return Err(Error::DimensionMismatch { expected: self.n_states(), got: *x });
        }
        self.actions().check(a)?;
        if xi.len() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: xi.len() });
        }
        Ok(self.step(x, a, xi))
    }
}
