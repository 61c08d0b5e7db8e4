//! Exhaustive feasibility decoding.
//!
//! The decoder guesses which `beta` sources are adversarial and, for each of
//! them, how the observed encoders split into groups that received the same
//! version. Every guess yields a linear system over GF(p); consistent systems
//! are "feasible scenarios", and the values they pin for presumed-honest
//! sources become the estimates.
//!
//! Partitions are enumerated unlabeled (restricted growth strings with at most
//! `v` blocks), one variable per nonempty block. A labeled enumeration of all
//! `v^t` assignments describes the same solution sets on presumed-honest
//! coordinates; the test suite checks this.

use std::collections::BTreeSet;

use itertools::Itertools;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::GeneratorMatrix;
use crate::field::{self, Fe, FieldMatrix};
use crate::system::{SourceBehavior, SystemConfig, Transcript};

/// Default cap on the number of scenario systems a single decode may solve.
pub const DEFAULT_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("transcript does not match the code: {0}")]
    TranscriptMismatch(String),
    #[error("decoding needs {needed} scenario solves, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodeMode {
    /// First feasible scenario to pin a coordinate wins.
    #[default]
    Fast,
    /// Examine every feasible scenario and report disagreements.
    Strict,
}

impl std::str::FromStr for DecodeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fast" => Ok(DecodeMode::Fast),
            "strict" => Ok(DecodeMode::Strict),
            other => Err(format!("unknown decode mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecodeOptions {
    pub mode: DecodeMode,
    pub budget: u64,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            mode: DecodeMode::Fast,
            budget: DEFAULT_BUDGET,
        }
    }
}

impl DecodeOptions {
    pub fn strict() -> Self {
        DecodeOptions {
            mode: DecodeMode::Strict,
            ..Default::default()
        }
    }
}

/// Set partition of transcript positions `0..t`, as a restricted growth
/// string: `labels[0] = 0` and each label is at most one more than the
/// largest label before it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    labels: Vec<usize>,
    blocks: usize,
}

impl Partition {
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn block_count(&self) -> usize {
        self.blocks
    }

    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.blocks];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Canonical partition induced by equal values (first occurrence order).
    pub fn from_values<T: PartialEq>(values: &[T]) -> Partition {
        let mut reps: Vec<&T> = Vec::new();
        let labels = values
            .iter()
            .map(|x| match reps.iter().position(|r| *r == x) {
                Some(i) => i,
                None => {
                    reps.push(x);
                    reps.len() - 1
                }
            })
            .collect();
        Partition {
            labels,
            blocks: reps.len(),
        }
    }
}

/// Streams the set partitions of `t` items into at most `v` blocks in
/// lexicographic restricted-growth order.
pub struct Partitions {
    labels: Vec<usize>,
    /// `prefix_max[i]` = max(labels[..=i])
    prefix_max: Vec<usize>,
    v: usize,
    done: bool,
}

pub fn enumerate_partitions(t: usize, v: usize) -> Partitions {
    Partitions {
        labels: vec![0; t],
        prefix_max: vec![0; t],
        v,
        done: t == 0 || v == 0,
    }
}

impl Iterator for Partitions {
    type Item = Partition;

    fn next(&mut self) -> Option<Partition> {
        if self.done {
            return None;
        }
        let t = self.labels.len();
        let current = Partition {
            labels: self.labels.clone(),
            blocks: self.prefix_max[t - 1] + 1,
        };
        // advance: rightmost position that can still be incremented
        let mut i = t - 1;
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            let cap = (self.prefix_max[i - 1] + 1).min(self.v - 1);
            if self.labels[i] < cap {
                self.labels[i] += 1;
                self.prefix_max[i] = self.prefix_max[i - 1].max(self.labels[i]);
                for j in i + 1..t {
                    self.labels[j] = 0;
                    self.prefix_max[j] = self.prefix_max[i];
                }
                break;
            }
            i -= 1;
        }
        Some(current)
    }
}

/// `sum_{j=1..v} S(t, j)`: how many partitions [`enumerate_partitions`] yields.
pub fn partition_count(t: usize, v: usize) -> u128 {
    if t == 0 {
        return 0;
    }
    // S(n, j) = j S(n-1, j) + S(n-1, j-1)
    let mut row = vec![0u128; v + 1];
    row[0] = 1;
    for _ in 0..t {
        for j in (1..=v).rev() {
            row[j] = (j as u128)
                .saturating_mul(row[j])
                .saturating_add(row[j - 1]);
        }
        row[0] = 0;
    }
    row[1..].iter().fold(0u128, |a, &b| a.saturating_add(b))
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Scenario systems a decode over `t` encoders solves.
pub fn scenario_count(k: usize, beta: usize, v: usize, t: usize) -> u128 {
    let per_adversary = partition_count(t, v);
    (0..beta).fold(binomial(k, beta), |acc, _| acc.saturating_mul(per_adversary))
}

/// One consistent guess: the presumed adversaries, how each splits the
/// transcript, and the resulting solution space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioSolution {
    pub adversaries: Vec<usize>,
    /// Per presumed adversary, the version label of each transcript position.
    pub labels: Vec<Vec<usize>>,
    /// Per source: `Some(x)` when presumed honest and pinned.
    pub pinned_honest: Vec<Option<Fe>>,
    /// Presumed-honest sources whose value is not determined.
    pub unpinned_honest: Vec<usize>,
    layout: VarLayout,
    particular: Vec<Fe>,
    nullspace: Vec<Vec<Fe>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct VarLayout {
    /// Variable index of each presumed-honest source (None for adversaries).
    honest_var: Vec<Option<usize>>,
    /// First variable of each presumed adversary's version block.
    adversary_offset: Vec<usize>,
    vars: usize,
    t: usize,
}

impl ScenarioSolution {
    /// Symbol each source sent to each transcript position under solution `x`.
    fn assignments_for(&self, x: &[Fe]) -> Vec<Vec<Fe>> {
        let k = self.layout.honest_var.len();
        let t = self.layout.t;
        (0..k)
            .map(|src| match self.layout.honest_var[src] {
                Some(var) => vec![x[var]; t],
                None => {
                    let j = self.adversaries.iter().position(|&a| a == src).unwrap();
                    self.labels[j]
                        .iter()
                        .map(|&l| x[self.layout.adversary_offset[j] + l])
                        .collect()
                }
            })
            .collect()
    }

    /// A concrete solution: the particular one (free variables zero).
    pub fn particular_solution(&self) -> FeasibleSolution {
        self.materialize(&self.particular)
    }

    /// Two solutions of this scenario that differ on source `k`, when `k` is
    /// presumed honest and unpinned.
    pub fn split_on(&self, k: usize, field: &field::Field) -> Option<(FeasibleSolution, FeasibleSolution)> {
        let var = self.layout.honest_var.get(k).copied().flatten()?;
        let dir = self.nullspace.iter().find(|n| !n[var].is_zero())?;
        let other: Vec<Fe> = self
            .particular
            .iter()
            .zip(dir)
            .map(|(&a, &b)| field.add(a, b))
            .collect();
        Some((self.materialize(&self.particular), self.materialize(&other)))
    }

    fn materialize(&self, x: &[Fe]) -> FeasibleSolution {
        let honest_values = self
            .layout
            .honest_var
            .iter()
            .map(|v| v.map(|var| x[var]))
            .collect();
        FeasibleSolution {
            adversaries: self.adversaries.clone(),
            honest_values,
            assignments: self.assignments_for(x),
        }
    }

    /// Rebuilds a full source behavior over `n` encoders from a concrete
    /// solution; encoders outside the transcript get each source's first symbol.
    pub fn to_behavior(&self, node_set: &[usize], n: usize) -> SourceBehavior {
        let sol = self.particular_solution();
        let rows = sol
            .assignments
            .iter()
            .map(|row| {
                let mut full = vec![row[0]; n];
                for (i, &node) in node_set.iter().enumerate() {
                    full[node] = row[i];
                }
                full
            })
            .collect();
        SourceBehavior {
            adversary_set: self.adversaries.iter().copied().collect(),
            rows,
        }
    }
}

/// A single point in a scenario's solution space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeasibleSolution {
    pub adversaries: Vec<usize>,
    /// Per source: the value when presumed honest, `null` for presumed adversaries.
    pub honest_values: Vec<Option<Fe>>,
    /// `assignments[k][i]`: symbol source `k` sent to the i-th transcript encoder.
    pub assignments: Vec<Vec<Fe>>,
}

/// Two feasible solutions disagreeing on a source both presume honest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ambiguity {
    /// Every presumed-honest coordinate on which feasible solutions disagree.
    pub coordinates: BTreeSet<usize>,
    /// Coordinate the witness pair disagrees on.
    pub coordinate: usize,
    pub first: FeasibleSolution,
    pub second: FeasibleSolution,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeResult {
    /// `null` stands for an undetermined (bottom) estimate.
    pub estimates: Vec<Option<Fe>>,
    pub feasible_count: u64,
    /// Scenario systems solved.
    pub scenarios: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ambiguity: Option<Ambiguity>,
}

/// Solves one scenario: `adversaries[j]` sends version `labels[j][i]` to the
/// i-th transcript encoder, with `versions[j]` version variables. Returns
/// `None` when the system is inconsistent.
pub fn solve_scenario(
    gm: &GeneratorMatrix,
    transcript: &Transcript,
    adversaries: &[usize],
    labels: &[Vec<usize>],
    versions: &[usize],
) -> Option<ScenarioSolution> {
    let k = gm.k();
    let t = transcript.len();
    let mut honest_var = vec![None; k];
    let mut next = 0;
    for src in (0..k).filter(|s| !adversaries.contains(s)) {
        honest_var[src] = Some(next);
        next += 1;
    }
    let mut adversary_offset = Vec::with_capacity(adversaries.len());
    for &count in versions {
        adversary_offset.push(next);
        next += count;
    }
    let layout = VarLayout {
        honest_var,
        adversary_offset,
        vars: next,
        t,
    };

    let g = gm.matrix();
    let mut a = FieldMatrix::zeros(t, layout.vars);
    for (i, &node) in transcript.node_set.iter().enumerate() {
        for (src, var) in layout.honest_var.iter().enumerate() {
            if let Some(var) = var {
                a[(i, *var)] = g[(node, src)];
            }
        }
        for (j, &adv) in adversaries.iter().enumerate() {
            a[(i, layout.adversary_offset[j] + labels[j][i])] = g[(node, adv)];
        }
    }
    let out = field::solve(gm.field(), &a, &transcript.values).expect("system is square in rows");
    let particular = out.particular.clone()?;

    let mut pinned_honest = vec![None; k];
    let mut unpinned_honest = Vec::new();
    for (src, var) in layout.honest_var.iter().enumerate() {
        if let Some(var) = *var {
            if out.is_pinned(var) {
                pinned_honest[src] = Some(particular[var]);
            } else {
                unpinned_honest.push(src);
            }
        }
    }
    Some(ScenarioSolution {
        adversaries: adversaries.to_vec(),
        labels: labels.to_vec(),
        pinned_honest,
        unpinned_honest,
        layout,
        particular,
        nullspace: out.nullspace_basis,
    })
}

fn check_inputs(
    gm: &GeneratorMatrix,
    transcript: &Transcript,
    cfg: &SystemConfig,
) -> Result<(), DecodeError> {
    if !cfg.matches_code(gm) {
        return Err(DecodeError::TranscriptMismatch(format!(
            "configuration (N={}, K={}) does not match the {}x{} code",
            cfg.n,
            cfg.k,
            gm.n(),
            gm.k()
        )));
    }
    transcript
        .validate(gm.n(), gm.field())
        .map_err(|e| DecodeError::TranscriptMismatch(e.to_string()))?;
    if transcript.is_empty() {
        return Err(DecodeError::TranscriptMismatch("empty transcript".into()));
    }
    Ok(())
}

/// Every feasible scenario in canonical order: presumed adversary sets
/// lexicographic, then partition tuples in restricted-growth order (first
/// adversary most significant).
pub fn feasible_scenarios(
    gm: &GeneratorMatrix,
    transcript: &Transcript,
    cfg: &SystemConfig,
    budget: u64,
) -> Result<(Vec<ScenarioSolution>, u64), DecodeError> {
    check_inputs(gm, transcript, cfg)?;
    let t = transcript.len();
    let needed = scenario_count(cfg.k, cfg.beta, cfg.v, t);
    if needed > budget as u128 {
        return Err(DecodeError::BudgetExceeded { needed, budget });
    }
    let adversary_sets: Vec<Vec<usize>> = (0..cfg.k).combinations(cfg.beta).collect();
    let partitions: Vec<Partition> = enumerate_partitions(t, cfg.v).collect();
    let per_set = (partitions.len() as u64).pow(cfg.beta as u32);
    let total = adversary_sets.len() as u64 * per_set;

    let solutions = (0..total)
        .into_par_iter()
        .filter_map(|idx| {
            let adversaries = &adversary_sets[(idx / per_set) as usize];
            let mut rem = idx % per_set;
            let mut chosen = vec![0usize; cfg.beta];
            for slot in chosen.iter_mut().rev() {
                *slot = (rem % partitions.len() as u64) as usize;
                rem /= partitions.len() as u64;
            }
            let labels: Vec<Vec<usize>> =
                chosen.iter().map(|&p| partitions[p].labels.clone()).collect();
            let versions: Vec<usize> = chosen.iter().map(|&p| partitions[p].blocks).collect();
            solve_scenario(gm, transcript, adversaries, &labels, &versions)
        })
        .collect();
    Ok((solutions, total))
}

/// Feasibility decoding over the encoders in `transcript`.
pub fn decode(
    gm: &GeneratorMatrix,
    transcript: &Transcript,
    cfg: &SystemConfig,
    opts: DecodeOptions,
) -> Result<DecodeResult, DecodeError> {
    let (solutions, scenarios) = feasible_scenarios(gm, transcript, cfg, opts.budget)?;
    let k = cfg.k;
    let mut estimates: Vec<Option<Fe>> = vec![None; k];
    for sol in &solutions {
        for (est, pinned) in estimates.iter_mut().zip(&sol.pinned_honest) {
            if est.is_none() {
                *est = *pinned;
            }
        }
    }
    let ambiguity = match opts.mode {
        DecodeMode::Fast => None,
        DecodeMode::Strict => find_ambiguity(&solutions, gm),
    };
    Ok(DecodeResult {
        estimates,
        feasible_count: solutions.len() as u64,
        scenarios,
        ambiguity,
    })
}

fn find_ambiguity(solutions: &[ScenarioSolution], gm: &GeneratorMatrix) -> Option<Ambiguity> {
    let k = gm.k();
    let mut first_seen: Vec<Option<(Fe, &ScenarioSolution)>> = vec![None; k];
    let mut coordinates = BTreeSet::new();
    let mut witness: Option<(usize, FeasibleSolution, FeasibleSolution)> = None;

    for sol in solutions {
        for &src in &sol.unpinned_honest {
            coordinates.insert(src);
            if witness.is_none() {
                let (a, b) = sol.split_on(src, gm.field()).expect("unpinned has a null direction");
                witness = Some((src, a, b));
            }
        }
        for (src, pinned) in sol.pinned_honest.iter().enumerate() {
            let Some(val) = *pinned else { continue };
            match first_seen[src] {
                None => first_seen[src] = Some((val, sol)),
                Some((prev, prev_sol)) if prev != val => {
                    coordinates.insert(src);
                    if witness.is_none() {
                        witness = Some((
                            src,
                            prev_sol.particular_solution(),
                            sol.particular_solution(),
                        ));
                    }
                }
                Some(_) => {}
            }
        }
    }
    witness.map(|(coordinate, first, second)| Ambiguity {
        coordinates,
        coordinate,
        first,
        second,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateStatus {
    Correct,
    Missing,
    Wrong,
}

/// Estimates checked against ground truth, for honest sources only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthReport {
    /// `(source, status)` for every truly honest source.
    pub honest: Vec<(usize, EstimateStatus)>,
    /// Honest sources whose estimate is missing or wrong.
    pub failures: Vec<usize>,
    /// Honest sources on which strict mode found disagreement.
    pub ambiguous_honest: Vec<usize>,
}

impl TruthReport {
    pub fn all_correct(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn any_wrong(&self) -> bool {
        self.honest.iter().any(|(_, s)| *s == EstimateStatus::Wrong)
    }
}

pub fn verify_against_truth(result: &DecodeResult, behavior: &SourceBehavior) -> TruthReport {
    let honest: Vec<(usize, EstimateStatus)> = (0..behavior.k())
        .filter_map(|k| {
            let truth = behavior.honest_message(k)?;
            let status = match result.estimates.get(k).copied().flatten() {
                None => EstimateStatus::Missing,
                Some(x) if x == truth => EstimateStatus::Correct,
                Some(_) => EstimateStatus::Wrong,
            };
            Some((k, status))
        })
        .collect();
    let failures = honest
        .iter()
        .filter(|(_, s)| *s != EstimateStatus::Correct)
        .map(|(k, _)| *k)
        .collect();
    let ambiguous_honest = result
        .ambiguity
        .as_ref()
        .map(|a| {
            a.coordinates
                .iter()
                .copied()
                .filter(|&k| !behavior.is_adversary(k))
                .collect()
        })
        .unwrap_or_default();
    TruthReport {
        honest,
        failures,
        ambiguous_honest,
    }
}
