//! The (N, K, beta, v) system model: source behaviors, honest or
//! equivocating, and the transcripts they induce at the encoders.

use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::GeneratorMatrix;
use crate::field::{Fe, Field};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("{got} adversaries exceed the bound beta = {beta}")]
    TooManyAdversaries { got: usize, beta: usize },
    #[error("encoder index {0} out of range")]
    NodeOutOfRange(usize),
    #[error("invalid behavior: {0}")]
    InvalidBehavior(String),
    #[error("invalid transcript: {0}")]
    InvalidTranscript(String),
}

/// `min(N, K + 2 beta (v - 1))`: the fewest encoders from which a linear
/// code can always recover every honest message.
pub fn linear_threshold(n: usize, k: usize, beta: usize, v: usize) -> usize {
    n.min(k + 2 * beta * v.saturating_sub(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SystemConfig {
    pub n: usize,
    pub k: usize,
    pub beta: usize,
    pub v: usize,
    pub field: Field,
}

impl SystemConfig {
    pub fn new(n: usize, k: usize, beta: usize, v: usize, field: Field) -> Result<Self, SystemError> {
        if !(1 <= beta && beta < k && k <= n) {
            return Err(SystemError::InvalidConfig(format!(
                "need 1 <= beta < K <= N, got N = {n}, K = {k}, beta = {beta}"
            )));
        }
        if v == 0 {
            return Err(SystemError::InvalidConfig("v must be at least 1".into()));
        }
        Ok(SystemConfig { n, k, beta, v, field })
    }

    /// Number of honest sources when the adversary is at full strength.
    pub fn h(&self) -> usize {
        self.k - self.beta
    }

    pub fn t_star(&self) -> usize {
        linear_threshold(self.n, self.k, self.beta, self.v)
    }

    /// True when `N >= K + 2 beta (v - 1)`, i.e. the threshold does not depend on N.
    pub fn in_first_regime(&self) -> bool {
        self.n >= self.k + 2 * self.beta * (self.v - 1)
    }

    pub fn matches_code(&self, gm: &GeneratorMatrix) -> bool {
        gm.n() == self.n && gm.k() == self.k && gm.field() == &self.field
    }
}

/// What every source sends to every encoder: `rows[k][n]` is the symbol
/// source `k` hands to encoder `n`.
///
/// `adversary_set` is ground truth kept for test oracles; the decoder never
/// sees it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceBehavior {
    pub adversary_set: BTreeSet<usize>,
    pub rows: Vec<Vec<Fe>>,
}

impl SourceBehavior {
    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn n(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn is_adversary(&self, k: usize) -> bool {
        self.adversary_set.contains(&k)
    }

    /// The message of an honest source; `None` for adversaries.
    pub fn honest_message(&self, k: usize) -> Option<Fe> {
        (!self.is_adversary(k)).then(|| self.rows[k][0])
    }

    pub fn distinct_values(&self, k: usize) -> usize {
        self.rows[k].iter().collect::<BTreeSet<_>>().len()
    }

    /// Shape checks that need no configuration: rectangular grid, adversary
    /// indices in range, honest rows constant.
    pub fn check_shape(&self) -> Result<(), SystemError> {
        let n = self.n();
        if self.rows.is_empty() || n == 0 {
            return Err(SystemError::InvalidBehavior("empty assignment grid".into()));
        }
        if let Some(k) = self.rows.iter().position(|r| r.len() != n) {
            return Err(SystemError::InvalidBehavior(format!("row {k} is ragged")));
        }
        if let Some(&a) = self.adversary_set.iter().find(|&&a| a >= self.k()) {
            return Err(SystemError::InvalidBehavior(format!(
                "adversary index {a} out of range"
            )));
        }
        for k in (0..self.k()).filter(|&k| !self.is_adversary(k)) {
            if self.rows[k].iter().any(|&x| x != self.rows[k][0]) {
                return Err(SystemError::InvalidBehavior(format!(
                    "honest source {k} sends more than one message"
                )));
            }
        }
        Ok(())
    }

    /// Full model check against a configuration, including the `v` bound.
    pub fn validate(&self, cfg: &SystemConfig) -> Result<(), SystemError> {
        self.check_shape()?;
        if self.k() != cfg.k || self.n() != cfg.n {
            return Err(SystemError::InvalidBehavior(format!(
                "grid is {}x{} but the system is K = {}, N = {}",
                self.k(),
                self.n(),
                cfg.k,
                cfg.n
            )));
        }
        if self.adversary_set.len() > cfg.beta {
            return Err(SystemError::TooManyAdversaries {
                got: self.adversary_set.len(),
                beta: cfg.beta,
            });
        }
        let p = cfg.field.modulus();
        if self.rows.iter().flatten().any(|x| x.value() >= p) {
            return Err(SystemError::InvalidBehavior(format!(
                "symbol outside GF({p})"
            )));
        }
        for &a in &self.adversary_set {
            let d = self.distinct_values(a);
            if d > cfg.v {
                return Err(SystemError::InvalidBehavior(format!(
                    "adversary {a} sends {d} distinct symbols, more than v = {}",
                    cfg.v
                )));
            }
        }
        Ok(())
    }
}

/// Every source honest: encoder `n` receives `messages[k]` from source `k`.
pub fn behavior_honest(cfg: &SystemConfig, messages: &[Fe]) -> Result<SourceBehavior, SystemError> {
    if messages.len() != cfg.k {
        return Err(SystemError::InvalidBehavior(format!(
            "{} messages for K = {}",
            messages.len(),
            cfg.k
        )));
    }
    Ok(SourceBehavior {
        adversary_set: BTreeSet::new(),
        rows: messages.iter().map(|&m| vec![m; cfg.n]).collect(),
    })
}

/// Honest sources send `honest_messages[k]`; each adversary draws up to `v`
/// uniform symbols and hands every encoder one of them, chosen uniformly.
/// Entries of `honest_messages` at adversary positions are ignored.
pub fn behavior_random_adversarial(
    cfg: &SystemConfig,
    honest_messages: &[Fe],
    adversary_set: &BTreeSet<usize>,
    seed: u64,
) -> Result<SourceBehavior, SystemError> {
    if adversary_set.len() > cfg.beta {
        return Err(SystemError::TooManyAdversaries {
            got: adversary_set.len(),
            beta: cfg.beta,
        });
    }
    let mut b = behavior_honest(cfg, honest_messages)?;
    if let Some(&a) = adversary_set.iter().find(|&&a| a >= cfg.k) {
        return Err(SystemError::InvalidBehavior(format!(
            "adversary index {a} out of range"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for &a in adversary_set {
        let versions: Vec<Fe> = (0..cfg.v).map(|_| cfg.field.random(&mut rng)).collect();
        b.rows[a] = (0..cfg.n)
            .map(|_| versions[rng.gen_range(0..cfg.v)])
            .collect();
    }
    b.adversary_set = adversary_set.clone();
    Ok(b)
}

/// Uniform random adversary set of size `beta`, uniform honest messages,
/// random equivocation. Convenience for experiments.
pub fn random_trial_behavior(cfg: &SystemConfig, seed: u64) -> SourceBehavior {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let messages: Vec<Fe> = (0..cfg.k).map(|_| cfg.field.random(&mut rng)).collect();
    let adversaries: BTreeSet<usize> = index::sample(&mut rng, cfg.k, cfg.beta).into_iter().collect();
    behavior_random_adversarial(cfg, &messages, &adversaries, rng.gen())
        .expect("sizes are consistent by construction")
}

/// Coded symbols observed at a subset of encoders.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transcript {
    pub node_set: Vec<usize>,
    pub values: Vec<Fe>,
}

impl Transcript {
    pub fn len(&self) -> usize {
        self.node_set.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_set.is_empty()
    }

    pub fn validate(&self, n: usize, field: &Field) -> Result<(), SystemError> {
        if self.node_set.len() != self.values.len() {
            return Err(SystemError::InvalidTranscript(format!(
                "{} nodes but {} values",
                self.node_set.len(),
                self.values.len()
            )));
        }
        if let Some(&bad) = self.node_set.iter().find(|&&i| i >= n) {
            return Err(SystemError::NodeOutOfRange(bad));
        }
        if self.node_set.iter().collect::<BTreeSet<_>>().len() != self.node_set.len() {
            return Err(SystemError::InvalidTranscript("repeated encoder index".into()));
        }
        if self.values.iter().any(|x| x.value() >= field.modulus()) {
            return Err(SystemError::InvalidTranscript(format!(
                "value outside GF({})",
                field.modulus()
            )));
        }
        Ok(())
    }
}

/// `y_n = sum_k G[n][k] * rows[k][n]` for each `n` in `node_set`.
pub fn encode_transcript(
    gm: &GeneratorMatrix,
    behavior: &SourceBehavior,
    node_set: &[usize],
) -> Result<Transcript, SystemError> {
    behavior.check_shape()?;
    if behavior.k() != gm.k() || behavior.n() != gm.n() {
        return Err(SystemError::InvalidBehavior(format!(
            "grid is {}x{} but the code is {}x{}",
            behavior.k(),
            behavior.n(),
            gm.k(),
            gm.n()
        )));
    }
    if let Some(&bad) = node_set.iter().find(|&&i| i >= gm.n()) {
        return Err(SystemError::NodeOutOfRange(bad));
    }
    let f = gm.field();
    if behavior.rows.iter().flatten().any(|x| x.value() >= f.modulus()) {
        return Err(SystemError::InvalidBehavior(format!("symbol outside GF({})", f.modulus())));
    }
    let g = gm.matrix();
    let values = node_set
        .iter()
        .map(|&n| {
            (0..gm.k()).fold(Fe::ZERO, |acc, k| {
                f.add(acc, f.mul(g[(n, k)], behavior.rows[k][n]))
            })
        })
        .collect();
    Ok(Transcript {
        node_set: node_set.to_vec(),
        values,
    })
}
