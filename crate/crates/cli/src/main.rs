//! `vecfield` command-line tool.
//!
//! Exit codes: 0 success, 1 internal error, 2 invalid input.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use vecfield::eval::{ChamferMetric, ViewSpec};
use vecfield::mc::OrientationRule;
use vecfield::FieldKind;

#[derive(Debug, Parser)]
#[command(
    name = "vecfield",
    version,
    about = "Vector-field implicit surfaces: fields, extraction, fitting, evaluation"
)]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true, env = "VECFIELD_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a field of a mesh on a regular grid and write a VFG1 grid file
    Field(FieldArgs),
    /// Extract a triangle mesh from a grid file (path chosen by field kind)
    Extract(ExtractArgs),
    /// Train an auto-decoder on a set of shapes
    Fit(FitArgs),
    /// Fit a code to observations of one shape and extract the result
    Complete(CompleteArgs),
    /// Reconstruct a set of shapes and report Chamfer distances
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct FieldArgs {
    /// Input mesh (.obj or .ply) or a procedural shape name
    pub mesh: String,
    /// Field to sample
    #[arg(long, default_value = "vt")]
    pub kind: FieldKind,
    /// Grid vertices per axis over [-1, 1]^3
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(2..=512))]
    pub res: u32,
    /// Output grid file
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a plain-text dump of the grid
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// Scale and center the mesh into [-1, 1]^3 first
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    /// Input grid file (VFG1)
    pub grid: PathBuf,
    /// Output OBJ file
    #[arg(long)]
    pub out: PathBuf,
    /// Divergence threshold marking surface cells (vector grids)
    #[arg(long, default_value_t = -1.5, allow_negative_numbers = true)]
    pub threshold: f64,
    /// Orientation rule between neighboring cells (vector grids)
    #[arg(long, default_value = "alignment")]
    pub rule: OrientationRule,
    /// Only use cells below the threshold, no band extension (vector grids)
    #[arg(long)]
    pub no_band: bool,
    /// Write the surface-cell mask as run-length text (vector grids)
    #[arg(long)]
    pub cells: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training shapes: mesh files or procedural names
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub shapes: Vec<String>,
    /// Representation to learn (overrides the config file)
    #[arg(long)]
    pub kind: Option<FieldKind>,
    /// Training config as key=value lines
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Number of epochs (overrides the config file)
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Random seed (overrides the config file)
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output checkpoint (VFM1)
    #[arg(long)]
    pub out: PathBuf,
    /// Loss trace file (default: checkpoint path with .loss.txt)
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Scale and center each mesh into [-1, 1]^3 first
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Args)]
pub struct CompleteArgs {
    /// Trained checkpoint (VFM1)
    #[arg(long)]
    pub model: PathBuf,
    /// Shape to observe: mesh file or procedural name
    #[arg(long)]
    pub shape: String,
    /// Observe only what is visible from this view (V1..V8); whole surface if absent
    #[arg(long)]
    pub view: Option<ViewSpec>,
    /// Code optimization iterations
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    /// Gaussian noise on observation coordinates
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Surface samples drawn before the visibility filter
    #[arg(long, default_value_t = 8000)]
    pub samples: usize,
    /// Grid vertices per axis for extraction
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(2..=512))]
    pub res: u32,
    /// Chamfer sample count against the observed shape
    #[arg(long, default_value_t = 30000)]
    pub points: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output OBJ file
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TaskArg {
    Reconstruct,
    Complete,
    Noise,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Shapes: mesh files or procedural names
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub shapes: Vec<String>,
    /// Representations to evaluate
    #[arg(long, value_delimiter = ',', default_value = "vt,dvt,sdf,udf")]
    pub kinds: Vec<FieldKind>,
    #[arg(long, value_enum, default_value = "reconstruct")]
    pub task: TaskArg,
    /// View for the complete task
    #[arg(long, default_value = "V1")]
    pub view: ViewSpec,
    /// Noise levels for the noise task
    #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.05,0.1")]
    pub sigma: Vec<f64>,
    /// Trained checkpoints, one per kind; exact oracle grids when absent
    #[arg(long, value_delimiter = ',')]
    pub models: Vec<PathBuf>,
    /// Code optimization iterations (with --models)
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u32).range(2..=512))]
    pub res: u32,
    /// Chamfer samples per mesh
    #[arg(long, default_value_t = 30000)]
    pub points: usize,
    /// Chamfer resamplings averaged
    #[arg(long, default_value_t = 3)]
    pub resamplings: usize,
    /// Metric shown in the table (the CSV has both)
    #[arg(long, default_value = "euclidean")]
    pub metric: ChamferMetric,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write per-shape results as CSV
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub normalize: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    let result = std::panic::catch_unwind(|| match &cli.command {
        Command::Field(a) => commands::field(a),
        Command::Extract(a) => commands::extract(a),
        Command::Fit(a) => commands::fit(a),
        Command::Complete(a) => commands::complete(a),
        Command::Eval(a) => commands::eval(a),
    });
    match result {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
        Err(_) => ExitCode::from(1),
    }
}
