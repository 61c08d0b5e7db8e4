//! Achievability and converse sweeps over `(N, K, beta, v, t)` grids.
//!
//! Seed protocol: every random draw derives from `master_seed` through
//! [`derive_seed`]`(master, stream, index)`. Codes use stream
//! `config_index * kinds + kind_index` with index [`CODE_INDEX`]; trials use
//! stream `row_index` (position in the output) with index `trial`. Each derived
//! seed feeds `ChaCha8Rng::seed_from_u64`.

use std::path::Path;
use std::time::Instant;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{converse_attack, verify_attack};
use crate::codebook::{generate_mds, CodeKind, GeneratorMatrix};
use crate::decoder::{decode, scenario_count, verify_against_truth, DecodeMode, DecodeOptions, DecodeResult, DEFAULT_BUDGET};
use crate::field::{Field, DEFAULT_MODULUS};
use crate::system::{encode_transcript, random_trial_behavior, SourceBehavior, SystemConfig};

/// Trial index reserved for code generation.
pub const CODE_INDEX: u64 = u64::MAX;

pub const CSV_HEADER: &str = "N,K,beta,v,kind,t,trials,honest_correct,ambiguous,undetermined,failures,wall_ms";

const SEED_PROTOCOL: &str = "splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index) -> ChaCha8Rng::seed_from_u64; \
codes: stream = config_index * kinds + kind_index, index = 2^64-1; trials: stream = row_index, index = trial";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment spec: {0}")]
    InvalidSpec(String),
    #[error("I/O failure on {path}: {source}")]
    IoFailure {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Random adversarial behavior, random encoder subsets.
    Achievability,
    /// Constructed indistinguishable setups.
    Converse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCell {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub beta: usize,
    pub v: usize,
}

/// Encoder counts to test, either literal or as offsets from the threshold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TRange {
    Absolute(Vec<usize>),
    Relative(Vec<i64>),
}

fn default_strict_every() -> u64 {
    10
}

fn default_budget() -> u64 {
    DEFAULT_BUDGET
}

fn default_prime() -> u64 {
    DEFAULT_MODULUS
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: ExperimentKind,
    pub cells: Vec<GridCell>,
    pub t: TRange,
    pub kinds: Vec<CodeKind>,
    pub trials: u64,
    pub master_seed: u64,
    #[serde(default = "default_budget")]
    pub budget: u64,
    #[serde(default = "default_prime")]
    pub prime: u64,
    /// Every `strict_every`-th achievability trial decodes in strict mode.
    #[serde(default = "default_strict_every")]
    pub strict_every: u64,
    /// Record wall-clock time; off keeps output byte-reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

impl ExperimentSpec {
    /// The desk-scale achievability grid: `N = t* + 2` for four small cells,
    /// random and Reed-Solomon codes, at `t* - 1` and `t*`.
    pub fn default_sweep(master_seed: u64) -> Self {
        let cells = [(3, 1, 2), (4, 1, 2), (3, 1, 3), (4, 2, 2)]
            .into_iter()
            .map(|(k, beta, v)| GridCell { n: k + 2 * beta * (v - 1) + 2, k, beta, v })
            .collect();
        ExperimentSpec {
            experiment: ExperimentKind::Achievability,
            cells,
            t: TRange::Relative(vec![-1, 0]),
            kinds: vec![CodeKind::Random, CodeKind::ReedSolomon],
            trials: 10,
            master_seed,
            budget: DEFAULT_BUDGET,
            prime: DEFAULT_MODULUS,
            strict_every: 10,
            timing: false,
            output: None,
        }
    }

    pub fn from_json(s: &str) -> Result<Self, ExperimentError> {
        let spec: ExperimentSpec = serde_json::from_str(s)?;
        spec.plan()?;
        Ok(spec)
    }

    pub fn field(&self) -> Result<Field, ExperimentError> {
        Field::new(self.prime).map_err(|e| ExperimentError::InvalidSpec(e.to_string()))
    }

    /// Output rows in grid order: cell, then kind, then t.
    pub fn plan(&self) -> Result<Vec<PlannedRow>, ExperimentError> {
        let field = self.field()?;
        if self.cells.is_empty() || self.kinds.is_empty() {
            return Err(ExperimentError::InvalidSpec("empty grid".into()));
        }
        if self.strict_every == 0 {
            return Err(ExperimentError::InvalidSpec("strict_every must be positive".into()));
        }
        let mut rows = Vec::new();
        for (ci, cell) in self.cells.iter().enumerate() {
            let cfg = SystemConfig::new(cell.n, cell.k, cell.beta, cell.v, field)
                .map_err(|e| ExperimentError::InvalidSpec(format!("cell {ci}: {e}")))?;
            let ts: Vec<usize> = match &self.t {
                TRange::Absolute(ts) => ts.clone(),
                TRange::Relative(offs) => offs
                    .iter()
                    .map(|&o| {
                        usize::try_from(cfg.t_star() as i64 + o)
                            .map_err(|_| ExperimentError::InvalidSpec(format!("cell {ci}: t* {o:+} is negative")))
                    })
                    .collect::<Result<_, _>>()?,
            };
            for (kind_index, &kind) in self.kinds.iter().enumerate() {
                for &t in &ts {
                    if t == 0 || t > cell.n {
                        return Err(ExperimentError::InvalidSpec(format!("cell {ci}: t = {t} outside 1..={}", cell.n)));
                    }
                    rows.push(PlannedRow {
                        cfg,
                        kind,
                        t,
                        code_stream: (ci * self.kinds.len() + kind_index) as u64,
                    });
                }
            }
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PlannedRow {
    pub cfg: SystemConfig,
    pub kind: CodeKind,
    pub t: usize,
    pub code_stream: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellResult {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub beta: usize,
    pub v: usize,
    pub kind: CodeKind,
    pub t: usize,
    pub trials: u64,
    pub honest_correct: u64,
    pub ambiguous: u64,
    pub undetermined: u64,
    pub failures: u64,
    pub wall_ms: u64,
    /// Scenario systems solved across all trials.
    pub scenario_solves: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// The CSV columns of a [`CellResult`], in order.
#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "K")]
    k: usize,
    beta: usize,
    v: usize,
    kind: CodeKind,
    t: usize,
    trials: u64,
    honest_correct: u64,
    ambiguous: u64,
    undetermined: u64,
    failures: u64,
    wall_ms: u64,
}

impl From<&CellResult> for CsvRow {
    fn from(r: &CellResult) -> Self {
        CsvRow {
            n: r.n,
            k: r.k,
            beta: r.beta,
            v: r.v,
            kind: r.kind,
            t: r.t,
            trials: r.trials,
            honest_correct: r.honest_correct,
            ambiguous: r.ambiguous,
            undetermined: r.undetermined,
            failures: r.failures,
            wall_ms: r.wall_ms,
        }
    }
}

impl From<CsvRow> for CellResult {
    fn from(r: CsvRow) -> Self {
        CellResult {
            n: r.n,
            k: r.k,
            beta: r.beta,
            v: r.v,
            kind: r.kind,
            t: r.t,
            trials: r.trials,
            honest_correct: r.honest_correct,
            ambiguous: r.ambiguous,
            undetermined: r.undetermined,
            failures: r.failures,
            wall_ms: r.wall_ms,
            scenario_solves: 0,
            note: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Correct,
    Ambiguous,
    Undetermined,
    Failure,
}

/// Classifies a decode against the behavior that produced the transcript.
fn classify(result: &DecodeResult, truth: &SourceBehavior) -> Outcome {
    let report = verify_against_truth(result, truth);
    if !report.ambiguous_honest.is_empty() {
        Outcome::Ambiguous
    } else if report.all_correct() {
        Outcome::Correct
    } else if report.any_wrong() {
        Outcome::Failure
    } else {
        Outcome::Undetermined
    }
}

fn aggregate(row: &PlannedRow, outcomes: &[(Outcome, u64)], start: Instant, timing: bool, note: Option<String>) -> CellResult {
    let count = |o: Outcome| outcomes.iter().filter(|(x, _)| *x == o).count() as u64;
    CellResult {
        n: row.cfg.n,
        k: row.cfg.k,
        beta: row.cfg.beta,
        v: row.cfg.v,
        kind: row.kind,
        t: row.t,
        trials: outcomes.len() as u64,
        honest_correct: count(Outcome::Correct),
        ambiguous: count(Outcome::Ambiguous),
        undetermined: count(Outcome::Undetermined),
        failures: count(Outcome::Failure),
        wall_ms: if timing { start.elapsed().as_millis() as u64 } else { 0 },
        scenario_solves: outcomes.iter().map(|(_, s)| s).sum(),
        note,
    }
}

fn cell_code(spec: &ExperimentSpec, row: &PlannedRow) -> Result<GeneratorMatrix, String> {
    let seed = derive_seed(spec.master_seed, row.code_stream, CODE_INDEX);
    generate_mds(row.kind, &row.cfg.field, row.cfg.n, row.cfg.k, seed).map_err(|e| e.to_string())
}

/// Runs `trial` for every trial of every row, or records the row as failed
/// when its code or budget check fails.
fn run_rows<F>(spec: &ExperimentSpec, trial: F) -> Result<Vec<CellResult>, ExperimentError>
where
    F: Fn(&GeneratorMatrix, &PlannedRow, u64, u64) -> (Outcome, u64) + Sync,
{
    let rows = spec.plan()?;
    let mut results = Vec::with_capacity(rows.len());
    for (ri, row) in rows.iter().enumerate() {
        let start = Instant::now();
        let needed = scenario_count(row.cfg.k, row.cfg.beta, row.cfg.v, row.t);
        let prepared = if needed > spec.budget as u128 {
            Err(format!("budget exceeded: {needed} scenario solves per trial, budget {}", spec.budget))
        } else {
            cell_code(spec, row)
        };
        let result = match prepared {
            Ok(gm) => {
                let outcomes: Vec<(Outcome, u64)> = (0..spec.trials)
                    .into_par_iter()
                    .map(|i| trial(&gm, row, i, derive_seed(spec.master_seed, ri as u64, i)))
                    .collect();
                aggregate(row, &outcomes, start, spec.timing, None)
            }
            Err(note) => {
                log::warn!("row {ri}: {note}");
                let outcomes = vec![(Outcome::Failure, 0); spec.trials as usize];
                aggregate(row, &outcomes, start, spec.timing, Some(note))
            }
        };
        results.push(result);
    }
    Ok(results)
}

/// Random adversarial behavior decoded from a random `t`-subset of encoders.
pub fn run_achievability(spec: &ExperimentSpec) -> Result<Vec<CellResult>, ExperimentError> {
    let strict_every = spec.strict_every;
    let budget = spec.budget;
    run_rows(spec, |gm, row, trial, seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let behavior = random_trial_behavior(&row.cfg, rng.gen());
        let mut node_set = sample(&mut rng, row.cfg.n, row.t).into_vec();
        node_set.sort_unstable();
        let mode = if trial % strict_every == strict_every - 1 {
            DecodeMode::Strict
        } else {
            DecodeMode::Fast
        };
        decode_and_classify(gm, row, &behavior, &node_set, DecodeOptions { mode, budget })
    })
}

fn decode_and_classify(
    gm: &GeneratorMatrix,
    row: &PlannedRow,
    behavior: &SourceBehavior,
    node_set: &[usize],
    opts: DecodeOptions,
) -> (Outcome, u64) {
    let transcript = match encode_transcript(gm, behavior, node_set) {
        Ok(t) => t,
        Err(e) => {
            log::warn!("encoding failed: {e}");
            return (Outcome::Failure, 0);
        }
    };
    match decode(gm, &transcript, &row.cfg, opts) {
        Ok(result) => (classify(&result, behavior), result.scenarios),
        Err(e) => {
            log::warn!("decode failed: {e}");
            (Outcome::Failure, 0)
        }
    }
}

/// Constructed attack at `t* - 1` encoders, observed on `t` of them: a prefix
/// of the attack's node set, extended by the remaining encoders in ascending
/// order (which receive setup one's symbols). Decoded in strict mode against
/// setup one.
pub fn run_converse(spec: &ExperimentSpec) -> Result<Vec<CellResult>, ExperimentError> {
    let budget = spec.budget;
    run_rows(spec, |gm, row, _trial, seed| {
        let attack = match converse_attack(gm, &row.cfg, seed) {
            Ok(a) => a,
            Err(e) => {
                log::warn!("attack construction failed: {e}");
                return (Outcome::Failure, 0);
            }
        };
        if !verify_attack(gm, &attack) {
            log::warn!("attack failed verification");
            return (Outcome::Failure, 0);
        }
        let node_set = observed_nodes(&attack.node_set, row.cfg.n, row.t);
        decode_and_classify(gm, row, &attack.setup1, &node_set, DecodeOptions { mode: DecodeMode::Strict, budget })
    })
}

/// First `t` encoders of `base` followed by the encoders outside it.
pub fn observed_nodes(base: &[usize], n: usize, t: usize) -> Vec<usize> {
    let mut nodes: Vec<usize> = base
        .iter()
        .copied()
        .chain((0..n).filter(|i| !base.contains(i)))
        .take(t)
        .collect();
    nodes.sort_unstable();
    nodes
}

pub fn run(spec: &ExperimentSpec) -> Result<Vec<CellResult>, ExperimentError> {
    match spec.experiment {
        ExperimentKind::Achievability => run_achievability(spec),
        ExperimentKind::Converse => run_converse(spec),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

/// JSON results document; CSV carries the records only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub master_seed: Option<u64>,
    pub seed_protocol: String,
    pub results: Vec<CellResult>,
}

pub fn render_results(results: &[CellResult], format: OutputFormat, master_seed: Option<u64>) -> String {
    match format {
        OutputFormat::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            w.write_record(CSV_HEADER.split(',')).expect("in-memory write");
            for r in results {
                w.serialize(CsvRow::from(r)).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
        }
        OutputFormat::Json => {
            let doc = ResultsDocument {
                master_seed,
                seed_protocol: SEED_PROTOCOL.to_string(),
                results: results.to_vec(),
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("results serialize");
            s.push('\n');
            s
        }
    }
}

pub fn emit_results(
    results: &[CellResult],
    format: OutputFormat,
    path: &Path,
    master_seed: Option<u64>,
) -> Result<(), ExperimentError> {
    std::fs::write(path, render_results(results, format, master_seed)).map_err(|source| ExperimentError::IoFailure {
        path: path.display().to_string(),
        source,
    })
}

/// Parses a CSV results file back into records. `scenario_solves` and `note`
/// are not part of the CSV and come back as zero and `None`.
pub fn parse_csv(text: &str) -> Result<Vec<CellResult>, ExperimentError> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| ExperimentError::InvalidSpec(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(ExperimentError::InvalidSpec("unexpected CSV header".into()));
    }
    rdr.deserialize::<CsvRow>()
        .map(|r| r.map(CellResult::from).map_err(|e| ExperimentError::InvalidSpec(e.to_string())))
        .collect()
}
