mod args;
mod bench_spec;
mod reconfig;
mod report;
mod run;
mod sweep;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use fades_core::io::{save_csr, save_dense};
use fades_core::{generate_matrix, CsrMatrix};

use crate::args::{Cli, Command, GenArgs};

const EXIT_USAGE: u8 = 1;
const EXIT_MISMATCH: u8 = 2;

fn gen(args: &GenArgs) -> Result<()> {
    let m = generate_matrix(
        args.rows,
        args.cols,
        args.precision.into(),
        args.sparsity,
        args.seed,
    )?;
    if args.csr {
        save_csr(&args.output, &CsrMatrix::from_dense(&m))
    } else {
        save_dense(&args.output, &m)
    }
    .with_context(|| format!("writing {}", args.output.display()))?;
    println!(
        "{}x{} {} matrix, {} non-zeros -> {}",
        args.rows,
        args.cols,
        m.precision(),
        m.count_nonzero(),
        args.output.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(a) => run::run(a).map(|ok| {
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_MISMATCH)
            }
        }),
        Command::Sweep(a) => sweep::sweep(a).map(|_| ExitCode::SUCCESS),
        Command::Reconfig(a) => reconfig::reconfig(a).map(|_| ExitCode::SUCCESS),
        Command::Gen(a) => gen(a).map(|_| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(EXIT_USAGE)
    })
}
