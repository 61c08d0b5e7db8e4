//! Byzantine-resilient linear coding over GF(p) for sources that may
//! equivocate: codes, a feasibility decoder, worst-case attack construction
//! and experiment sweeps that locate the recovery threshold
//! `t* = min(N, K + 2 beta (v - 1))`.

pub mod adversary;
pub mod codebook;
pub mod decoder;
pub mod experiments;
pub mod field;
pub mod system;

pub use adversary::{converse_attack, diff_basis, partition_full_rank, verify_attack, AttackInstance, DiffBasis};
pub use codebook::{generate_mds, is_mds, CodeKind, GeneratorMatrix};
pub use decoder::{decode, DecodeMode, DecodeOptions, DecodeResult};
pub use experiments::{run, CellResult, ExperimentSpec, OutputFormat};
pub use field::{Fe, Field, FieldMatrix};
pub use system::{encode_transcript, SourceBehavior, SystemConfig, Transcript};
