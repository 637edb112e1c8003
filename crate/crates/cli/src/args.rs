use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fades_core::ElementPrecision;

#[derive(Debug, Parser)]
#[command(
    name = "fades",
    version,
    about = "Benchmark and validation harness for the fused sparse/dense matmul engine"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute every (config, sparsity) cell, verify against the oracle and model its cycles.
    Run(RunArgs),
    /// Model cycles over a sparsity grid without executing.
    Sweep(SweepArgs),
    /// Price precision switches of a layer plan under DFX, VFX and FR.
    Reconfig(ReconfigArgs),
    /// Write a random matrix in the binary container format.
    Gen(GenArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PrecisionArg {
    Int8,
    F32,
}

impl From<PrecisionArg> for ElementPrecision {
    fn from(p: PrecisionArg) -> Self {
        match p {
            PrecisionArg::Int8 => ElementPrecision::Int8,
            PrecisionArg::F32 => ElementPrecision::Float32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Options shared by `run` and `sweep`. Flags override a `--spec` file.
#[derive(Debug, Clone, Args)]
pub struct CellArgs {
    /// JSON bench spec.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Problem shape `N,M,P`.
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<[usize; 3]>,
    #[arg(long, value_enum)]
    pub precision: Option<PrecisionArg>,
    /// Comma-separated zero fractions of A.
    #[arg(long, value_delimiter = ',')]
    pub sparsity: Vec<f64>,
    /// Core counts to try.
    #[arg(long, value_delimiter = ',')]
    pub cores: Vec<usize>,
    /// PE counts to try.
    #[arg(long, value_delimiter = ',')]
    pub pes: Vec<usize>,
    /// Parallel row pipelines to try.
    #[arg(long, value_delimiter = ',')]
    pub pr: Vec<usize>,
    /// Write C column-major.
    #[arg(long)]
    pub trans: bool,
    /// Requantize int8 outputs.
    #[arg(long)]
    pub scale: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Zero point subtracted from B.
    #[arg(long, allow_hyphen_values = true)]
    pub zero_point: Option<i8>,
    /// Machine parameters JSON for the cycle model.
    #[arg(long)]
    pub machine_params: Option<PathBuf>,
    /// Report directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Format printed to stdout; both formats are always written to `--out`.
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub cells: CellArgs,
    /// Timed executions per cell.
    #[arg(long)]
    pub repeat: Option<usize>,
    /// Load A from a matrix file instead of generating it.
    #[arg(long, requires = "b_file")]
    pub a_file: Option<PathBuf>,
    #[arg(long, requires = "a_file")]
    pub b_file: Option<PathBuf>,
    /// Quantization parameters JSON, used with `--scale`.
    #[arg(long)]
    pub quant: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub cells: CellArgs,
}

#[derive(Debug, Args)]
pub struct ReconfigArgs {
    /// JSON plan: a list of precision tags, or `{"layers": [{"precision", "compute_s"}]}`.
    #[arg(
        long,
        conflicts_with = "alternate",
        required_unless_present = "alternate"
    )]
    pub plan: Option<PathBuf>,
    /// Use an alternating int8/float plan with this many layers.
    #[arg(long)]
    pub alternate: Option<usize>,
    /// Compute time per layer for `--alternate`, in seconds.
    #[arg(long, default_value_t = 0.0)]
    pub layer_time: f64,
    #[arg(long)]
    pub reconfig_params: Option<PathBuf>,
    /// Largest acceptable share of total time spent reconfiguring.
    #[arg(long, default_value_t = 0.1)]
    pub budget: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long, value_enum, default_value = "int8")]
    pub precision: PrecisionArg,
    #[arg(long, default_value_t = 0.0)]
    pub sparsity: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Store as CSR instead of dense.
    #[arg(long)]
    pub csr: bool,
    #[arg(long, short)]
    pub output: PathBuf,
}

fn parse_shape(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [n, m, p] = parts.as_slice() else {
        return Err(format!("expected N,M,P, got {s:?}"));
    };
    let dim = |x: &str| x.parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok([dim(n)?, dim(m)?, dim(p)?])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_parsing() {
        assert_eq!(parse_shape("1024,1024,49").unwrap(), [1024, 1024, 49]);
        assert!(parse_shape("1,2").is_err());
        assert!(parse_shape("1,x,3").is_err());
    }

    #[test]
    fn lists_and_negative_zero_point() {
        let cli = Cli::try_parse_from([
            "fades",
            "run",
            "--shape",
            "8,8,8",
            "--pes",
            "8,32",
            "--sparsity",
            "0,0.9",
            "--zero-point",
            "-7",
        ])
        .unwrap();
        let Command::Run(r) = cli.command else {
            panic!()
        };
        assert_eq!(r.cells.pes, vec![8, 32]);
        assert_eq!(r.cells.sparsity, vec![0.0, 0.9]);
        assert_eq!(r.cells.zero_point, Some(-7));
    }
}
