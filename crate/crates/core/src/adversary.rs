//! Worst-case equivocation: the machinery that builds two source behaviors
//! which agree on every observed coded symbol below the threshold while
//! disagreeing on an honest message.
//!
//! The adversary controls `beta` sources. For each it fixes version chains
//! `x^(1), z^(1), x^(2), z^(2), ...` and assigns encoder groups so that
//! group `g` (1-based) sees `x^(floor(g/2)+1)` in setup one and
//! `z^(ceil(g/2))` in setup two. Writing `w_g = z^(ceil(g/2)) - x^(floor(g/2)+1)`
//! turns "both setups give the same codeword" into a homogeneous block
//! system `[B* | D] [w; delta] = 0` with one more unknown than equations.

use std::collections::BTreeSet;

use itertools::Itertools;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codebook::{converse_selections, CodebookError, GeneratorMatrix};
use crate::field::{self, Fe, Field, FieldMatrix};
use crate::system::{encode_transcript, SourceBehavior, SystemConfig};

/// Selections tried by [`converse_attack`] before giving up.
pub const MAX_SELECTION_ATTEMPTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precondition {
    /// Row count or parameters outside the supported range.
    Shape,
    /// The whole matrix must have column rank beta.
    FullRank,
    /// At most h - 1 rows may be entirely zero.
    ZeroRows,
    /// Every h + beta rows must have column rank beta.
    SubsetRank,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("precondition {0:?} violated: {1}")]
    PreconditionViolated(Precondition, String),
    #[error("row partition could not be repaired to full rank")]
    RepairFailed,
    #[error("every nullspace vector leaves the honest messages unchanged")]
    NullspaceDeltaZero,
    #[error("configuration does not match the code: {0}")]
    ConfigMismatch(String),
    #[error("attack construction failed verification: {0}")]
    Unverified(String),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
}

/// The `2v - 1` differences `c_{i,j} = a_i - b_j` with `j in {i, i+1}` and
/// the integer combinations expressing every other `c_{i,j}` through them.
///
/// Basis element `g` (0-based) is the pair `(ceil((g+1)/2), floor((g+1)/2) + 1)`
/// in 1-based indices, i.e. `(1,1), (1,2), (2,2), (2,3), ...`. This is also
/// the ordering of the attack's `w` blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffBasis {
    v: usize,
    basis: Vec<(usize, usize)>,
}

pub fn diff_basis(v: usize) -> DiffBasis {
    assert!(v >= 1, "need at least one version");
    // even g -> (g/2, g/2), odd g -> (g/2, g/2 + 1), 0-based
    let basis = (0..2 * v - 1).map(|g| (g / 2, g / 2 + g % 2)).collect();
    DiffBasis { v, basis }
}

impl DiffBasis {
    pub fn v(&self) -> usize {
        self.v
    }

    /// Basis pairs `(i, j)`, 0-based.
    pub fn basis(&self) -> &[(usize, usize)] {
        &self.basis
    }

    fn index_of(&self, pair: (usize, usize)) -> usize {
        let (i, j) = pair;
        debug_assert!(j == i || j == i + 1);
        2 * i + (j - i)
    }

    /// Coefficients in {-1, 0, 1} with `c_{i,j} = sum_g coeff[g] * basis[g]`
    /// (0-based `i`, `j`).
    pub fn decompose(&self, i: usize, j: usize) -> Vec<i8> {
        assert!(i < self.v && j < self.v, "pair out of range");
        let mut coeff = vec![0i8; self.basis.len()];
        if j == i || j == i + 1 {
            coeff[self.index_of((i, j))] = 1;
        } else if j > i + 1 {
            // (c_{i,i+1} + ... + c_{j-1,j}) - (c_{i+1,i+1} + ... + c_{j-1,j-1})
            for m in i..j {
                coeff[self.index_of((m, m + 1))] += 1;
            }
            for m in i + 1..j {
                coeff[self.index_of((m, m))] -= 1;
            }
        } else {
            // (c_{i,i} + ... + c_{j,j}) - (c_{i-1,i} + ... + c_{j,j+1})
            for m in j..=i {
                coeff[self.index_of((m, m))] += 1;
            }
            for m in j..i {
                coeff[self.index_of((m, m + 1))] -= 1;
            }
        }
        coeff
    }

    /// Evaluates `sum_g coeff[g] * (a_{i_g} - b_{j_g})` over `field`.
    pub fn combine(&self, field: &Field, coeff: &[i8], a: &[Fe], b: &[Fe]) -> Fe {
        coeff
            .iter()
            .zip(&self.basis)
            .fold(Fe::ZERO, |acc, (&c, &(i, j))| {
                let d = field.sub(a[i], b[j]);
                match c {
                    0 => acc,
                    c if c > 0 => (0..c).fold(acc, |s, _| field.add(s, d)),
                    c => (0..-c).fold(acc, |s, _| field.sub(s, d)),
                }
            })
    }
}

/// Group sizes for `t` rows: `h + beta - 1`, then `beta` each, the last
/// group possibly short when `t` falls between full layouts.
pub fn group_sizes(t: usize, h: usize, beta: usize) -> Vec<usize> {
    let first = h + beta - 1;
    let mut sizes = vec![first.min(t)];
    let mut rem = t.saturating_sub(first);
    while rem > 0 {
        let s = rem.min(beta);
        sizes.push(s);
        rem -= s;
    }
    sizes
}

/// Row groups of `E`, group 0 being the large one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowPartition {
    pub groups: Vec<Vec<usize>>,
    /// Whether the exchange step had to fix group 0.
    pub repaired: bool,
}

fn rank_of(field: &Field, e: &FieldMatrix, rows: &[usize]) -> usize {
    let cols: Vec<usize> = (0..e.cols()).collect();
    field::rank(field, &e.select(rows, &cols).expect("indices in range"))
}

fn block_full_rank(field: &Field, e: &FieldMatrix, rows: &[usize]) -> bool {
    rank_of(field, e, rows) == rows.len().min(e.cols())
}

/// Checks the three requirements on `E` (t x beta).
pub fn check_partition_preconditions(
    field: &Field,
    e: &FieldMatrix,
    h: usize,
    beta: usize,
    v: usize,
) -> Result<(), AdversaryError> {
    let t = e.rows();
    let max_t = h + 2 * beta * v - beta - 1;
    if e.cols() != beta || h == 0 || beta == 0 || v == 0 || t + 1 < h + beta || t > max_t {
        return Err(AdversaryError::PreconditionViolated(
            Precondition::Shape,
            format!(
                "E is {}x{}; need beta = {beta} columns and {} <= rows <= {max_t}",
                t,
                e.cols(),
                h + beta - 1
            ),
        ));
    }
    if field::rank(field, e) != beta {
        return Err(AdversaryError::PreconditionViolated(
            Precondition::FullRank,
            "E does not have full column rank".into(),
        ));
    }
    let zero_rows = (0..t).filter(|&r| e.is_zero_row(r)).count();
    if zero_rows > h - 1 {
        return Err(AdversaryError::PreconditionViolated(
            Precondition::ZeroRows,
            format!("{zero_rows} zero rows, at most {} allowed", h - 1),
        ));
    }
    if t >= h + beta {
        if let Some(bad) = (0..t)
            .combinations(h + beta)
            .find(|rows| rank_of(field, e, rows) != beta)
        {
            return Err(AdversaryError::PreconditionViolated(
                Precondition::SubsetRank,
                format!("rows {bad:?} are rank deficient"),
            ));
        }
    }
    Ok(())
}

/// Greedily takes `count` rows among `candidates` that are independent.
fn pick_independent(field: &Field, e: &FieldMatrix, candidates: &[usize], count: usize) -> Option<Vec<usize>> {
    let mut chosen = Vec::with_capacity(count);
    for &r in candidates {
        if chosen.len() == count {
            break;
        }
        chosen.push(r);
        if rank_of(field, e, &chosen) < chosen.len() {
            chosen.pop();
        }
    }
    (chosen.len() == count).then_some(chosen)
}

/// Splits the rows of `E` into groups of sizes [`group_sizes`], each of full
/// rank. Groups after the first are extracted greedily from the leading
/// `h + beta` remaining rows; if the leftover first group is rank deficient,
/// one row is exchanged with the second group.
pub fn partition_full_rank(
    field: &Field,
    e: &FieldMatrix,
    h: usize,
    beta: usize,
    v: usize,
) -> Result<RowPartition, AdversaryError> {
    check_partition_preconditions(field, e, h, beta, v)?;
    let t = e.rows();
    let sizes = group_sizes(t, h, beta);
    let mut remaining: Vec<usize> = (0..t).collect();
    let mut later = Vec::with_capacity(sizes.len() - 1);
    for &size in &sizes[1..] {
        let window: Vec<usize> = remaining.iter().copied().take(h + beta).collect();
        let picked = pick_independent(field, e, &window, size).ok_or_else(|| {
            AdversaryError::PreconditionViolated(
                Precondition::SubsetRank,
                format!("no {size} independent rows among {window:?}"),
            )
        })?;
        remaining.retain(|r| !picked.contains(r));
        later.push(picked);
    }
    let mut groups = Vec::with_capacity(sizes.len());
    groups.push(remaining);
    groups.extend(later);

    if block_full_rank(field, e, &groups[0]) {
        return Ok(RowPartition { groups, repaired: false });
    }
    if groups.len() < 2 {
        return Err(AdversaryError::RepairFailed);
    }
    if let Some(fixed) = exchange_repair(field, e, &groups) {
        return Ok(RowPartition { groups: fixed, repaired: true });
    }
    Err(AdversaryError::RepairFailed)
}

/// Swaps one row `r*` of the deficient first group with a row `r^` of the
/// second. `r*` is a nonzero row outside a maximal independent subset of the
/// first group; `r^` is chosen so that `r*` is independent of the rest of the
/// second group. Falls back to trying every pair if that choice fails.
fn exchange_repair(field: &Field, e: &FieldMatrix, groups: &[Vec<usize>]) -> Option<Vec<Vec<usize>>> {
    let first = &groups[0];
    let second = &groups[1];
    let rank1 = rank_of(field, e, first);
    let core = pick_independent(field, e, first, rank1)?;

    let try_swap = |r_star: usize, r_hat: usize| -> Option<Vec<Vec<usize>>> {
        let g1: Vec<usize> = first.iter().map(|&r| if r == r_star { r_hat } else { r }).collect();
        let g2: Vec<usize> = second.iter().map(|&r| if r == r_hat { r_star } else { r }).collect();
        (block_full_rank(field, e, &g1) && block_full_rank(field, e, &g2)).then(|| {
            let mut out = groups.to_vec();
            out[0] = g1;
            out[1] = g2;
            out
        })
    };

    let preferred = first
        .iter()
        .copied()
        .filter(|r| !core.contains(r) && !e.is_zero_row(*r));
    for r_star in preferred {
        for &r_hat in second {
            let rest: Vec<usize> = second.iter().copied().filter(|&r| r != r_hat).chain([r_star]).collect();
            if rank_of(field, e, &rest) == rest.len().min(e.cols()) {
                if let Some(out) = try_swap(r_star, r_hat) {
                    return Some(out);
                }
            }
        }
    }
    first
        .iter()
        .cartesian_product(second)
        .find_map(|(&a, &b)| try_swap(a, b))
}

/// Two source behaviors with identical transcripts on `node_set` whose
/// honest messages differ by `delta`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackInstance {
    #[serde(rename = "T")]
    pub node_set: Vec<usize>,
    pub setup1: SourceBehavior,
    pub setup2: SourceBehavior,
    /// `setup2 - setup1` on the honest sources, in ascending source order.
    pub delta: Vec<Fe>,
    /// `w[g][j]`: version difference of adversary `j` on encoder group `g`.
    pub w: Vec<Vec<Fe>>,
    pub adversary_set: Vec<usize>,
    pub honest_set: Vec<usize>,
    /// Encoder indices of each group.
    pub groups: Vec<Vec<usize>>,
    pub v: usize,
}

impl AttackInstance {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("attack serializes")
    }
}

/// Builds the block system `[C_1 .. C_G | D]` for encoder groups `groups`.
fn block_system(gm: &GeneratorMatrix, groups: &[Vec<usize>], adversaries: &[usize], honest: &[usize]) -> FieldMatrix {
    let beta = adversaries.len();
    let rows: usize = groups.iter().map(Vec::len).sum();
    let mut b = FieldMatrix::zeros(rows, beta * groups.len() + honest.len());
    let g = gm.matrix();
    let delta_off = beta * groups.len();
    let mut r = 0;
    for (gi, group) in groups.iter().enumerate() {
        for &node in group {
            for (j, &a) in adversaries.iter().enumerate() {
                b[(r, gi * beta + j)] = g[(node, a)];
            }
            for (j, &hk) in honest.iter().enumerate() {
                b[(r, delta_off + j)] = g[(node, hk)];
            }
            r += 1;
        }
    }
    b
}

/// Constructs a pair of indistinguishable setups at `t* - 1` encoders.
pub fn converse_attack(gm: &GeneratorMatrix, cfg: &SystemConfig, seed: u64) -> Result<AttackInstance, AdversaryError> {
    if !cfg.matches_code(gm) {
        return Err(AdversaryError::ConfigMismatch(format!(
            "configuration (N={}, K={}) against a {}x{} code",
            cfg.n,
            cfg.k,
            gm.n(),
            gm.k()
        )));
    }
    let mut last_err = AdversaryError::Codebook(CodebookError::SelectionImpossible);
    for sel in converse_selections(gm, cfg.beta, cfg.v)?.take(MAX_SELECTION_ATTEMPTS) {
        match attack_on_selection(gm, cfg, &sel.rows, &sel.cols, seed) {
            Ok(a) => return Ok(a),
            Err(e) => {
                log::debug!("selection rows={:?} cols={:?} rejected: {e}", sel.rows, sel.cols);
                last_err = e;
            }
        }
    }
    Err(last_err)
}

fn attack_on_selection(
    gm: &GeneratorMatrix,
    cfg: &SystemConfig,
    rows: &[usize],
    adversaries: &[usize],
    seed: u64,
) -> Result<AttackInstance, AdversaryError> {
    let f = gm.field();
    let (beta, h, v) = (cfg.beta, cfg.h(), cfg.v);
    let honest: Vec<usize> = (0..cfg.k).filter(|k| !adversaries.contains(k)).collect();

    let e = gm.matrix().select(rows, adversaries).expect("selection in range");
    let partition = partition_full_rank(f, &e, h, beta, v)?;
    let groups: Vec<Vec<usize>> = partition
        .groups
        .iter()
        .map(|g| g.iter().map(|&i| rows[i]).collect())
        .collect();

    let b = block_system(gm, &groups, adversaries, &honest);
    let delta_off = beta * groups.len();
    let null = field::nullspace(f, &b);
    let sol = null
        .into_iter()
        .find(|n| n[delta_off..].iter().any(|x| !x.is_zero()))
        .ok_or(AdversaryError::NullspaceDeltaZero)?;
    let w: Vec<Vec<Fe>> = (0..groups.len()).map(|gi| sol[gi * beta..(gi + 1) * beta].to_vec()).collect();
    let delta = sol[delta_off..].to_vec();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let honest_msgs: Vec<Fe> = honest.iter().map(|_| f.random(&mut rng)).collect();

    let mut setup1 = vec![Vec::new(); cfg.k];
    let mut setup2 = vec![Vec::new(); cfg.k];
    for (j, &hk) in honest.iter().enumerate() {
        setup1[hk] = vec![honest_msgs[j]; cfg.n];
        setup2[hk] = vec![f.add(honest_msgs[j], delta[j]); cfg.n];
    }
    for (j, &a) in adversaries.iter().enumerate() {
        // version chain: z^(i) = x^(i) + w_{2i-1}, x^(i+1) = z^(i) - w_{2i}
        let mut xs = vec![f.random(&mut rng)];
        let mut zs = Vec::new();
        for (gi, wg) in w.iter().enumerate() {
            if gi % 2 == 0 {
                zs.push(f.add(xs[gi / 2], wg[j]));
            } else {
                xs.push(f.sub(zs[gi / 2], wg[j]));
            }
        }
        let mut row1 = vec![xs[0]; cfg.n];
        let mut row2 = vec![zs[0]; cfg.n];
        for (gi, group) in groups.iter().enumerate() {
            for &node in group {
                row1[node] = xs[gi.div_ceil(2)];
                row2[node] = zs[gi / 2];
            }
        }
        if xs.iter().collect::<BTreeSet<_>>().len() < xs.len() || zs.iter().collect::<BTreeSet<_>>().len() < zs.len() {
            log::debug!("adversary {a}: version collision in constructed chain");
        }
        setup1[a] = row1;
        setup2[a] = row2;
    }

    let adversary_set: BTreeSet<usize> = adversaries.iter().copied().collect();
    let mut node_set: Vec<usize> = rows.to_vec();
    node_set.sort_unstable();
    let attack = AttackInstance {
        node_set,
        setup1: SourceBehavior { adversary_set: adversary_set.clone(), rows: setup1 },
        setup2: SourceBehavior { adversary_set, rows: setup2 },
        delta,
        w,
        adversary_set: adversaries.to_vec(),
        honest_set: honest,
        groups,
        v,
    };
    if !verify_attack(gm, &attack) {
        return Err(AdversaryError::Unverified("re-encoding disagrees".into()));
    }
    Ok(attack)
}

/// Independent check of an attack: both setups are valid behaviors with at
/// most `v` versions per adversary, they encode identically on `T`, and the
/// honest messages differ by a nonzero `delta`.
pub fn verify_attack(gm: &GeneratorMatrix, attack: &AttackInstance) -> bool {
    let f = gm.field();
    let (s1, s2) = (&attack.setup1, &attack.setup2);
    let adversaries: BTreeSet<usize> = attack.adversary_set.iter().copied().collect();
    let honest: Vec<usize> = (0..gm.k()).filter(|k| !adversaries.contains(k)).collect();
    let shape_ok = s1.check_shape().is_ok()
        && s2.check_shape().is_ok()
        && [s1, s2].iter().all(|b| {
            b.k() == gm.k() && b.n() == gm.n() && b.rows.iter().flatten().all(|x| x.value() < f.modulus())
        })
        && attack.v >= 1
        && s1.adversary_set == adversaries
        && s2.adversary_set == adversaries
        && attack.honest_set == honest
        && attack.delta.len() == honest.len()
        && attack.delta.iter().all(|d| d.value() < f.modulus());
    if !shape_ok {
        return false;
    }
    let within_v = |b: &SourceBehavior| adversaries.iter().all(|&a| b.distinct_values(a) <= attack.v);
    if !within_v(s1) || !within_v(s2) {
        return false;
    }
    if attack.delta.iter().all(|d| d.is_zero()) {
        return false;
    }
    let shifted = honest.iter().zip(&attack.delta).all(|(&k, &d)| {
        match (s1.honest_message(k), s2.honest_message(k)) {
            (Some(x), Some(y)) => f.sub(y, x) == d,
            _ => false,
        }
    });
    if !shifted {
        return false;
    }
    match (
        encode_transcript(gm, s1, &attack.node_set),
        encode_transcript(gm, s2, &attack.node_set),
    ) {
        (Ok(y1), Ok(y2)) => y1 == y2,
        _ => false,
    }
}
