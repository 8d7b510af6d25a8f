use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// How successor noise is shared between actions at one sample index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Coupling {
    /// One `xi_j` drives the successors of every action.
    #[default]
    SharedNoise,
    Independent,
}

/// Whether successor samples are redrawn every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    #[default]
    FreshPerIteration,
    /// Samples drawn once and reused by every iteration.
    Frozen,
}

/// How `(P^a V^pi)(x)` is obtained inside the control variate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ControlVariate {
    /// Kernel-weighted sum when the model exposes its kernel, otherwise the
    /// `m1`-sample mean.
    #[default]
    Exact,
    /// Always the `m1`-sample mean.
    Sampled,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $name),+ })
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($ty::$variant),)+
                    _ => Err(Error::InvalidSpec(format!(
                        concat!("unknown ", stringify!($ty), " `{}` (expected one of: ", $($name, " "),+, ")"),
                        s
                    ))),
                }
            }
        }
    };
}

text_enum!(Coupling { SharedNoise => "shared", Independent => "independent" });
text_enum!(Resampling { FreshPerIteration => "fresh", Frozen => "frozen" });
text_enum!(ControlVariate { Exact => "exact", Sampled => "sampled" });

#[derive(Debug, Clone, PartialEq)]
pub struct UvipConfig {
    /// Samples for the control-variate mean.
    pub m1: usize,
    /// Samples for the outer expectation.
    pub m2: usize,
    /// Design size for continuous models (tabular runs use every state).
    pub n_design: usize,
    pub eps_stop: f64,
    pub k_max: usize,
    pub coupling: Coupling,
    pub resampling: Resampling,
    pub control_variate: ControlVariate,
    pub replicates: usize,
    pub seed: u64,
    /// Warn when a per-iteration Lipschitz estimate exceeds this.
    pub lip_cap: Option<f64>,
}

impl Default for UvipConfig {
    fn default() -> Self {
        UvipConfig {
            m1: 1000,
            m2: 1000,
            n_design: 1500,
            eps_stop: 1e-3,
            k_max: 200,
            coupling: Coupling::default(),
            resampling: Resampling::default(),
            control_variate: ControlVariate::default(),
            replicates: 10,
            seed: 0,
            lip_cap: None,
        }
    }
}

impl UvipConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.m1 == 0 || self.m2 == 0 {
            return bad("m1 and m2 must be >= 1");
        }
        if self.n_design == 0 {
            return bad("n_design must be >= 1");
        }
        if !(self.eps_stop > 0.0) {
            return bad("eps_stop must be > 0");
        }
        if self.k_max == 0 {
            return bad("k_max must be >= 1");
        }
        if self.replicates == 0 {
            return bad("replicates must be >= 1");
        }
        Ok(())
    }

    /// Short stable hash of every field.
    pub fn fingerprint(&self) -> String {
        use sha1::{Digest, Sha1};
        let digest = Sha1::digest(format!("{self:?}").as_bytes());
        hex::encode(&digest[..8])
    }
}
