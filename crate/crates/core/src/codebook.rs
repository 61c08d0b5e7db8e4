//! Generator matrices: random linear, systematic-plus-random, and
//! Reed-Solomon (Vandermonde) codes, plus the structural queries the attack
//! construction needs (MDS check, zero patterns, row/column selection).

use std::collections::BTreeSet;

use itertools::Itertools;
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::field::{self, Fe, Field, FieldError, FieldMatrix};
use crate::system::linear_threshold;

/// Re-draw attempts in [`generate_mds`] before giving up.
pub const MDS_RETRIES: u64 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodebookError {
    #[error("bad dimensions: {0}")]
    BadDimensions(String),
    #[error("evaluation points are not distinct")]
    DuplicatePoints,
    #[error("no row/column selection satisfies the converse requirements")]
    SelectionImpossible,
    #[error("no MDS code found after {0} attempts")]
    MdsRetriesExhausted(u64),
    #[error("invalid generator matrix: {0}")]
    Invalid(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CodeKind {
    Random,
    Systematic,
    ReedSolomon,
}

impl CodeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CodeKind::Random => "random",
            CodeKind::Systematic => "systematic",
            CodeKind::ReedSolomon => "reed_solomon",
        }
    }
}

impl std::fmt::Display for CodeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CodeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "random" => Ok(CodeKind::Random),
            "systematic" => Ok(CodeKind::Systematic),
            "reed_solomon" | "rs" => Ok(CodeKind::ReedSolomon),
            other => Err(format!("unknown code kind `{other}`")),
        }
    }
}

/// The N x K coefficient matrix of a linear code: encoder `n` stores
/// `sum_k G[n][k] * x_{n,k}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorMatrixJson", into = "GeneratorMatrixJson")]
pub struct GeneratorMatrix {
    field: Field,
    kind: CodeKind,
    matrix: FieldMatrix,
    rs_points: Option<Vec<Fe>>,
}

impl GeneratorMatrix {
    /// Wraps an arbitrary matrix as a code, checking only that no row is zero
    /// and that the kind-specific shape holds.
    pub fn new(
        field: Field,
        kind: CodeKind,
        matrix: FieldMatrix,
        rs_points: Option<Vec<Fe>>,
    ) -> Result<Self, CodebookError> {
        let gm = GeneratorMatrix {
            field,
            kind,
            matrix,
            rs_points,
        };
        gm.validate()?;
        Ok(gm)
    }

    fn validate(&self) -> Result<(), CodebookError> {
        let (n, k) = (self.n(), self.k());
        if k == 0 || n < k {
            return Err(CodebookError::BadDimensions(format!("N = {n}, K = {k}")));
        }
        if let Some(r) = (0..n).find(|&r| self.matrix.is_zero_row(r)) {
            return Err(CodebookError::Invalid(format!("row {r} is zero")));
        }
        match self.kind {
            CodeKind::Systematic => {
                for r in 0..k {
                    for c in 0..k {
                        let want = if r == c { Fe::ONE } else { Fe::ZERO };
                        if self.matrix[(r, c)] != want {
                            return Err(CodebookError::Invalid(format!(
                                "systematic row {r} is not the identity pattern"
                            )));
                        }
                    }
                }
            }
            CodeKind::ReedSolomon => {
                let pts = self.rs_points.as_ref().ok_or_else(|| {
                    CodebookError::Invalid("reed_solomon code without rs_points".into())
                })?;
                if pts.len() != n {
                    return Err(CodebookError::Invalid(format!(
                        "{} rs_points for {n} rows",
                        pts.len()
                    )));
                }
                if pts.iter().collect::<BTreeSet<_>>().len() != n {
                    return Err(CodebookError::DuplicatePoints);
                }
                for (r, &l) in pts.iter().enumerate() {
                    for c in 0..k {
                        if self.matrix[(r, c)] != self.field.pow(l, c as u64) {
                            return Err(CodebookError::Invalid(format!(
                                "entry ({r}, {c}) is not a power of its evaluation point"
                            )));
                        }
                    }
                }
            }
            CodeKind::Random => {}
        }
        if self.kind != CodeKind::ReedSolomon && self.rs_points.is_some() {
            return Err(CodebookError::Invalid(
                "rs_points given for a non reed_solomon code".into(),
            ));
        }
        Ok(())
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn kind(&self) -> CodeKind {
        self.kind
    }

    pub fn matrix(&self) -> &FieldMatrix {
        &self.matrix
    }

    pub fn rs_points(&self) -> Option<&[Fe]> {
        self.rs_points.as_deref()
    }

    /// Number of encoding nodes.
    pub fn n(&self) -> usize {
        self.matrix.rows()
    }

    /// Number of source nodes.
    pub fn k(&self) -> usize {
        self.matrix.cols()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("generator matrix serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CodebookError> {
        serde_json::from_str(s).map_err(|e| CodebookError::Invalid(e.to_string()))
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorMatrixJson {
    p: u64,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    kind: CodeKind,
    rows: Vec<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rs_points: Option<Vec<u64>>,
}

impl From<GeneratorMatrix> for GeneratorMatrixJson {
    fn from(g: GeneratorMatrix) -> Self {
        GeneratorMatrixJson {
            p: g.field.modulus(),
            n: g.n(),
            k: g.k(),
            kind: g.kind,
            rows: g
                .matrix
                .to_rows()
                .into_iter()
                .map(|r| r.into_iter().map(Fe::value).collect())
                .collect(),
            rs_points: g.rs_points.map(|p| p.into_iter().map(Fe::value).collect()),
        }
    }
}

impl TryFrom<GeneratorMatrixJson> for GeneratorMatrix {
    type Error = CodebookError;

    fn try_from(j: GeneratorMatrixJson) -> Result<Self, Self::Error> {
        let field = Field::new(j.p)?;
        if j.rows.len() != j.n || j.rows.iter().any(|r| r.len() != j.k) {
            return Err(CodebookError::BadDimensions(format!(
                "declared {}x{} but rows do not match",
                j.n, j.k
            )));
        }
        let conv = |v: &[u64]| -> Result<Vec<Fe>, FieldError> {
            v.iter().map(|&x| field.checked_elem(x)).collect()
        };
        let rows = j
            .rows
            .iter()
            .map(|r| conv(r))
            .collect::<Result<Vec<_>, _>>()?;
        let rs_points = j.rs_points.as_deref().map(conv).transpose()?;
        GeneratorMatrix::new(field, j.kind, FieldMatrix::from_rows(rows)?, rs_points)
    }
}

fn check_dims(n: usize, k: usize) -> Result<(), CodebookError> {
    if k == 0 || n < k {
        return Err(CodebookError::BadDimensions(format!(
            "need N >= K >= 1, got N = {n}, K = {k}"
        )));
    }
    Ok(())
}

fn random_row(field: &Field, k: usize, rng: &mut ChaCha8Rng) -> Vec<Fe> {
    loop {
        let row: Vec<Fe> = (0..k).map(|_| field.random(rng)).collect();
        if row.iter().any(|x| !x.is_zero()) {
            return row;
        }
    }
}

/// Every entry drawn independently and uniformly from GF(p).
pub fn gen_random_linear(
    field: &Field,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<GeneratorMatrix, CodebookError> {
    check_dims(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..n).map(|_| random_row(field, k, &mut rng)).collect();
    GeneratorMatrix::new(*field, CodeKind::Random, FieldMatrix::from_rows(rows)?, None)
}

/// Identity on the first K rows (encoder n stores x_{n,n}); remaining rows random.
pub fn gen_systematic(
    field: &Field,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<GeneratorMatrix, CodebookError> {
    check_dims(n, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = FieldMatrix::identity(k).to_rows();
    rows.extend((k..n).map(|_| random_row(field, k, &mut rng)));
    GeneratorMatrix::new(
        *field,
        CodeKind::Systematic,
        FieldMatrix::from_rows(rows)?,
        None,
    )
}

/// Vandermonde code `G[n][k] = points[n]^k`. Without explicit points, N
/// distinct points are sampled uniformly from the field using `seed`.
pub fn gen_reed_solomon(
    field: &Field,
    n: usize,
    k: usize,
    points: Option<&[Fe]>,
    seed: u64,
) -> Result<GeneratorMatrix, CodebookError> {
    check_dims(n, k)?;
    let pts: Vec<Fe> = match points {
        Some(p) => {
            if p.len() != n {
                return Err(CodebookError::BadDimensions(format!(
                    "{} evaluation points for N = {n}",
                    p.len()
                )));
            }
            if p.iter().collect::<BTreeSet<_>>().len() != n {
                return Err(CodebookError::DuplicatePoints);
            }
            p.to_vec()
        }
        None => {
            let p = field.modulus();
            if (n as u64) > p {
                return Err(CodebookError::BadDimensions(format!(
                    "cannot draw {n} distinct points from GF({p})"
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            index::sample(&mut rng, p as usize, n)
                .into_iter()
                .map(|i| field.elem(i as u64))
                .collect()
        }
    };
    let rows = pts
        .iter()
        .map(|&l| (0..k).map(|c| field.pow(l, c as u64)).collect())
        .collect();
    GeneratorMatrix::new(
        *field,
        CodeKind::ReedSolomon,
        FieldMatrix::from_rows(rows)?,
        Some(pts),
    )
}

pub fn generate(
    kind: CodeKind,
    field: &Field,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<GeneratorMatrix, CodebookError> {
    match kind {
        CodeKind::Random => gen_random_linear(field, n, k, seed),
        CodeKind::Systematic => gen_systematic(field, n, k, seed),
        CodeKind::ReedSolomon => gen_reed_solomon(field, n, k, None, seed),
    }
}

/// Generates a code and re-draws with `seed + 1, seed + 2, ...` until it is
/// MDS, at most [`MDS_RETRIES`] times.
pub fn generate_mds(
    kind: CodeKind,
    field: &Field,
    n: usize,
    k: usize,
    seed: u64,
) -> Result<GeneratorMatrix, CodebookError> {
    for attempt in 0..MDS_RETRIES {
        let gm = generate(kind, field, n, k, seed.wrapping_add(attempt))?;
        if is_mds(&gm) {
            return Ok(gm);
        }
        log::warn!("{kind} code (N={n}, K={k}, seed={}) is not MDS; re-drawing", seed.wrapping_add(attempt));
    }
    Err(CodebookError::MdsRetriesExhausted(MDS_RETRIES))
}

/// Every K x K row submatrix is nonsingular (exhaustive over all subsets).
pub fn is_mds(gm: &GeneratorMatrix) -> bool {
    let cols: Vec<usize> = (0..gm.k()).collect();
    (0..gm.n()).combinations(gm.k()).all(|rows| {
        field::submatrix_nonsingular(gm.field(), gm.matrix(), &rows, &cols)
            .expect("square by construction")
    })
}

/// Which rows touch a single source and where each column vanishes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportProfile {
    pub univariate_rows: BTreeSet<usize>,
    /// `zero_pattern[c]` holds the rows whose entry in column `c` is zero.
    pub zero_pattern: Vec<BTreeSet<usize>>,
}

pub fn support_profile(gm: &GeneratorMatrix) -> SupportProfile {
    let m = gm.matrix();
    let univariate_rows = (0..m.rows())
        .filter(|&r| m.row(r).iter().filter(|x| !x.is_zero()).count() == 1)
        .collect();
    let zero_pattern = (0..m.cols())
        .map(|c| (0..m.rows()).filter(|&r| m[(r, c)].is_zero()).collect())
        .collect();
    SupportProfile {
        univariate_rows,
        zero_pattern,
    }
}

/// Encoders and adversary columns chosen for the converse attack.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConverseSelection {
    /// Encoder indices, ascending; `t* - 1` of them.
    pub rows: Vec<usize>,
    /// Source indices the adversary will control, ascending; `beta` of them.
    pub cols: Vec<usize>,
}

fn selection_ok(
    profile: &SupportProfile,
    rows: &[usize],
    cols: &[usize],
    max_zero_rows: usize,
    max_univariate: usize,
) -> bool {
    let zero_on_all = |r: &usize| cols.iter().all(|&c| profile.zero_pattern[c].contains(r));
    rows.iter().filter(|r| zero_on_all(r)).count() <= max_zero_rows
        && rows
            .iter()
            .filter(|r| profile.univariate_rows.contains(r))
            .count()
            <= max_univariate
}

/// All admissible selections, greedy candidates first, then an exhaustive
/// sweep over row subsets. May repeat a greedy candidate in the tail.
pub fn converse_selections(
    gm: &GeneratorMatrix,
    beta: usize,
    v: usize,
) -> Result<impl Iterator<Item = ConverseSelection> + '_, CodebookError> {
    let (n, k) = (gm.n(), gm.k());
    if beta == 0 || beta >= k || v == 0 {
        return Err(CodebookError::BadDimensions(format!(
            "need 1 <= beta < K and v >= 1, got beta = {beta}, K = {k}, v = {v}"
        )));
    }
    let t = linear_threshold(n, k, beta, v) - 1;
    let h = k - beta;
    let profile = support_profile(gm);
    let max_zero = h - 1;
    let max_univariate = k - 1;

    let profile_g = profile.clone();
    let greedy = (0..k).combinations(beta).filter_map(move |cols| {
        let zero_on_all =
            |r: usize| cols.iter().all(|&c| profile_g.zero_pattern[c].contains(&r));
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&r| (zero_on_all(r), profile_g.univariate_rows.contains(&r), r));
        let mut rows: Vec<usize> = order.into_iter().take(t).collect();
        rows.sort_unstable();
        selection_ok(&profile_g, &rows, &cols, max_zero, max_univariate)
            .then_some(ConverseSelection { rows, cols })
    });

    let exhaustive = (0..n)
        .combinations(t)
        .cartesian_product((0..k).combinations(beta).collect::<Vec<_>>())
        .filter(move |(rows, cols)| selection_ok(&profile, rows, cols, max_zero, max_univariate))
        .map(|(rows, cols)| ConverseSelection { rows, cols });

    Ok(greedy.chain(exhaustive))
}

/// Picks `t* - 1` encoders holding at most K-1 univariate rows and `beta`
/// source columns on which at most `h - 1` of those encoders vanish entirely.
pub fn select_converse_rows_and_columns(
    gm: &GeneratorMatrix,
    beta: usize,
    v: usize,
) -> Result<ConverseSelection, CodebookError> {
    converse_selections(gm, beta, v)?
        .next()
        .ok_or(CodebookError::SelectionImpossible)
}
