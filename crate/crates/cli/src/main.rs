use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use equivocode::codebook::{generate, generate_mds, CodeKind, GeneratorMatrix};
use equivocode::decoder::{decode, DecodeMode, DecodeOptions, DEFAULT_BUDGET};
use equivocode::experiments::{self, ExperimentSpec, OutputFormat};
use equivocode::field::{Field, DEFAULT_MODULUS};
use equivocode::system::{encode_transcript, SourceBehavior, SystemConfig, Transcript};
use equivocode::{converse_attack, verify_attack};

#[derive(Parser)]
#[command(name = "equivocode", version, about = "Codes, decoding and equivocation attacks over GF(p)")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Field modulus (prime, at least 2^16).
    #[arg(long, global = true)]
    prime: Option<u64>,
    /// Seed for code generation and attacks; master seed for sweeps.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Maximum scenario systems per decode.
    #[arg(long, global = true)]
    budget: Option<u64>,
    /// Output format: json, or csv for sweep results.
    #[arg(long, global = true)]
    format: Option<OutputFormat>,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Emit a generator matrix as JSON.
    GenCode {
        #[arg(long = "n")]
        n: usize,
        #[arg(long = "k")]
        k: usize,
        #[arg(long, default_value = "random")]
        kind: CodeKind,
        /// Skip the MDS check and re-draw loop.
        #[arg(long)]
        no_mds_check: bool,
    },
    /// Emit a pair of indistinguishable setups at one encoder below the threshold.
    Attack {
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        beta: usize,
        #[arg(long)]
        versions: usize,
    },
    /// Encode a source behavior at a set of encoders into a transcript.
    Encode {
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        behavior: PathBuf,
        /// Comma-separated encoder indices.
        #[arg(long, value_delimiter = ',', required = true)]
        nodes: Vec<usize>,
    },
    /// Decode a transcript.
    Decode {
        #[arg(long)]
        code: PathBuf,
        #[arg(long)]
        transcript: PathBuf,
        #[arg(long)]
        beta: usize,
        #[arg(long)]
        versions: usize,
        #[arg(long, default_value = "fast")]
        mode: DecodeMode,
    },
    /// Run an experiment sweep described by a JSON spec file.
    Sweep {
        /// Spec file; omit with --default-grid.
        spec: Option<PathBuf>,
        /// Use the built-in desk-scale grid.
        #[arg(long, conflicts_with = "spec")]
        default_grid: bool,
        /// Record wall-clock time per cell.
        #[arg(long)]
        timing: bool,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_code(path: &Path) -> Result<GeneratorMatrix> {
    GeneratorMatrix::from_json(&read(path)?).with_context(|| format!("parsing code {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json_only(format: Option<OutputFormat>) -> Result<()> {
    if format == Some(OutputFormat::Csv) {
        bail!("csv output is only available for sweep");
    }
    Ok(())
}

fn config_for(gm: &GeneratorMatrix, beta: usize, versions: usize, prime: Option<u64>) -> Result<SystemConfig> {
    if let Some(p) = prime {
        if p != gm.field().modulus() {
            bail!("--prime {p} disagrees with the code's modulus {}", gm.field().modulus());
        }
    }
    Ok(SystemConfig::new(gm.n(), gm.k(), beta, versions, *gm.field())?)
}

fn run(cli: Cli) -> Result<()> {
    let g = cli.global;
    let out = g.out.as_deref();
    match cli.command {
        Command::GenCode { n, k, kind, no_mds_check } => {
            json_only(g.format)?;
            let field = Field::new(g.prime.unwrap_or(DEFAULT_MODULUS))?;
            let seed = g.seed.unwrap_or(0);
            let gm = if no_mds_check {
                generate(kind, &field, n, k, seed)?
            } else {
                generate_mds(kind, &field, n, k, seed)?
            };
            emit(out, &(gm.to_json() + "\n"))
        }
        Command::Attack { code, beta, versions } => {
            json_only(g.format)?;
            let gm = load_code(&code)?;
            let cfg = config_for(&gm, beta, versions, g.prime)?;
            let attack = converse_attack(&gm, &cfg, g.seed.unwrap_or(0))?;
            if !verify_attack(&gm, &attack) {
                bail!("constructed attack failed verification");
            }
            emit(out, &(attack.to_json() + "\n"))
        }
        Command::Encode { code, behavior, nodes } => {
            json_only(g.format)?;
            let gm = load_code(&code)?;
            let b: SourceBehavior = serde_json::from_str(&read(&behavior)?).context("parsing behavior")?;
            let t = encode_transcript(&gm, &b, &nodes)?;
            emit(out, &(serde_json::to_string_pretty(&t)? + "\n"))
        }
        Command::Decode { code, transcript, beta, versions, mode } => {
            json_only(g.format)?;
            let gm = load_code(&code)?;
            let cfg = config_for(&gm, beta, versions, g.prime)?;
            let t: Transcript = serde_json::from_str(&read(&transcript)?).context("parsing transcript")?;
            t.validate(gm.n(), gm.field())?;
            let opts = DecodeOptions { mode, budget: g.budget.unwrap_or(DEFAULT_BUDGET) };
            let result = decode(&gm, &t, &cfg, opts)?;
            emit(out, &(serde_json::to_string_pretty(&result)? + "\n"))
        }
        Command::Sweep { spec, default_grid, timing } => {
            let mut s = match (spec, default_grid) {
                (Some(path), _) => ExperimentSpec::from_json(&read(&path)?)
                    .with_context(|| format!("parsing spec {}", path.display()))?,
                (None, true) => ExperimentSpec::default_sweep(g.seed.unwrap_or(0)),
                (None, false) => bail!("sweep needs a spec file or --default-grid"),
            };
            if let Some(seed) = g.seed {
                s.master_seed = seed;
            }
            if let Some(p) = g.prime {
                s.prime = p;
            }
            if let Some(b) = g.budget {
                s.budget = b;
            }
            s.timing |= timing;
            let results = experiments::run(&s)?;
            let format = g.format.unwrap_or_default();
            match out.map(Path::to_path_buf).or(s.output.as_ref().map(PathBuf::from)) {
                Some(path) => Ok(experiments::emit_results(&results, format, &path, Some(s.master_seed))?),
                None => emit(None, &experiments::render_results(&results, format, Some(s.master_seed))),
            }
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
