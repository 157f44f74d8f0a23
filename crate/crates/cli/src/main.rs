//! `loopforge` command-line experiments. Every command writes one data file
//! at `--out` and its manifest at `<out>.manifest.json`.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use loopforge::BoundaryConvention;

#[derive(Parser, Serialize, Debug)]
#[command(name = "loopforge", version, about = "Loop-erased walks, loop soups and their couplings on Z^d")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    Open,
    Closed,
}

impl From<Convention> for BoundaryConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Open => BoundaryConvention::Open,
            Convention::Closed => BoundaryConvention::Closed,
        }
    }
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct Common {
    #[arg(long, default_value_t = 3)]
    pub dim: usize,
    #[arg(long, default_value_t = 16.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.25)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub eta: f64,
    #[arg(long, default_value_t = 1.2)]
    pub theta: f64,
    #[arg(long, default_value_t = 100)]
    pub samples: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; defaults to LOOPFORGE_THREADS, then the hardware count.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Convention::Open)]
    pub convention: Convention,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// LERW samples from the origin to the ball exit, as JSONL paths.
    SampleLerw {
        #[command(flatten)]
        common: Common,
    },
    /// Random walk loop soup rooted on the bounding cube of the ball, as JSONL loops.
    SampleSoup {
        #[command(flatten)]
        common: Common,
        /// Largest half-length; default keeps the expected omitted count below 0.01.
        #[arg(long)]
        max_half_length: Option<usize>,
    },
    /// Brownian loop soup on the cube of side 2R+1, as JSONL loops.
    SampleBrownianSoup {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 16)]
        max_half_length: usize,
        #[arg(long, default_value_t = 6)]
        levels: u32,
        /// Also include loops of duration in [min_duration, r_d].
        #[arg(long)]
        min_duration: Option<f64>,
    },
    /// Per-site inclusion frequencies of decomposed traces against the exact oracle, as CSV.
    VerifyDecomposition {
        #[command(flatten)]
        common: Common,
    },
    /// Coupled walk and Brownian soups; one CSV row per realisation.
    CoupleSoups {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 8)]
        scale: usize,
        #[arg(long, default_value_t = 8)]
        levels: u32,
        #[arg(long)]
        max_half_length: Option<usize>,
    },
    /// Coupled discrete and Brownian bridges; one CSV row per pair.
    CoupleBridge {
        #[command(flatten)]
        common: Common,
        /// Bridge lengths.
        #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024")]
        steps: Vec<usize>,
        #[arg(long, default_value_t = 12)]
        levels: u32,
    },
    /// Growth exponent of LERW length against radius, as CSV.
    EstimateBeta {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        radii: Vec<i64>,
    },
    /// Escape probabilities Es(m, n) with n = --radius in Z^3, as CSV.
    EstimateEscape {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
        ms: Vec<i64>,
        /// Outer radius factor, one of 4, 8, 16.
        #[arg(long, default_value_t = 4)]
        k: i64,
    },
    /// Quasi-loop frequencies of LERW in Z^3, or quasi-loop centers of paths read from --input.
    ScanQuasiloops {
        #[command(flatten)]
        common: Common,
        /// Values of epsilon; defaults to --epsilon.
        #[arg(long, value_delimiter = ',')]
        epsilons: Vec<f64>,
        /// The exponent M in eps^M n.
        #[arg(long, default_value_t = 2)]
        exponent: u32,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Hittability scan of LERW in Z^3, as CSV.
    Hittability {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 32)]
        inner_samples: u64,
        #[arg(long, default_value_t = 16)]
        max_points: usize,
    },
    /// Box-counting dimension of rescaled LERW samples or of paths read from --input.
    BoxDimension {
        #[command(flatten)]
        common: Common,
        /// Scales run from 2^-scale_from to 2^-scale_to.
        #[arg(long, default_value_t = 2)]
        scale_from: i32,
        #[arg(long, default_value_t = 7)]
        scale_to: i32,
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Cut points of stopped walks and their containment in the loop erasure, as CSV.
    CutPoints {
        #[command(flatten)]
        common: Common,
    },
    /// Exact return probabilities against the local limit expansion, as CSV.
    LcltCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 64)]
        max_n: usize,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::SampleLerw { common }
            | Command::SampleSoup { common, .. }
            | Command::SampleBrownianSoup { common, .. }
            | Command::VerifyDecomposition { common }
            | Command::CoupleSoups { common, .. }
            | Command::CoupleBridge { common, .. }
            | Command::EstimateBeta { common, .. }
            | Command::EstimateEscape { common, .. }
            | Command::ScanQuasiloops { common, .. }
            | Command::Hittability { common, .. }
            | Command::BoxDimension { common, .. }
            | Command::CutPoints { common }
            | Command::LcltCheck { common, .. } => common,
        }
    }
}

fn resolve_threads(flag: Option<usize>) -> Result<usize, String> {
    if let Some(t) = flag {
        return if t == 0 { Err("--threads must be at least 1".into()) } else { Ok(t) };
    }
    if let Ok(v) = std::env::var("LOOPFORGE_THREADS") {
        return match v.trim().parse::<usize>() {
            Ok(t) if t > 0 => Ok(t),
            _ => Err(format!("LOOPFORGE_THREADS = {v:?} is not a positive integer")),
        };
    }
    Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let common = cli.command.common().clone();
    let threads = match resolve_threads(common.threads) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    };
    let started = output::unix_millis();
    let result = pool.install(|| commands::execute(&cli.command));
    if let Err(e) = result {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let flags = serde_json::to_value(&cli.command).expect("flags serialize");
    let name = flags.as_object().and_then(|o| o.keys().next().cloned()).unwrap_or_default();
    let manifest = output::Manifest {
        command: name.clone(),
        flags: flags[&name].clone(),
        seed: common.seed,
        threads,
        build_id: env!("LOOPFORGE_BUILD_ID"),
        started_unix_ms: started,
        finished_unix_ms: output::unix_millis(),
    };
    if let Err(e) = manifest.write(&common.out) {
        eprintln!("error: writing manifest: {e}");
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
