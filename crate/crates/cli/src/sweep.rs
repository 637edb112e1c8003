//! `sweep`: modeled cycles over a sparsity grid, no execution.

use anyhow::Result;
use fades_core::{estimate_cycles, generate_matrix, MachineParams, StageTrace, Workload};
use serde::Serialize;

use crate::args::SweepArgs;
use crate::bench_spec::{load_machine_params, BenchSpec, DEFAULT_SWEEP};
use crate::report::{self, SCHEMA_VERSION};

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub cores: usize,
    pub pes: usize,
    pub pr: usize,
    pub sparsity: f64,
    pub nnz: u64,
    pub total_cycles: f64,
    pub time_s: f64,
    pub bottleneck: Option<String>,
    /// Cycles over the same configuration with dense `A`.
    pub relative_to_dense: f64,
    /// Time over the first configuration's at the same sparsity.
    pub relative_to_first_config: f64,
}

#[derive(Serialize)]
struct SweepReport<'a> {
    schema_version: u32,
    command: &'static str,
    spec: &'a BenchSpec,
    machine_params: &'a MachineParams,
    /// Among CSR cells (sparsity > 0), cycles never increase with sparsity.
    monotone: bool,
    /// Every cell at sparsity 0.5 or above is no slower than dense.
    crossover_holds: bool,
    cells: &'a [SweepRow],
}

pub fn sweep(args: &SweepArgs) -> Result<()> {
    let spec = BenchSpec::resolve(&args.cells, None, &DEFAULT_SWEEP)?;
    let mp = load_machine_params(args.cells.machine_params.as_deref())?;
    let [n, m, p] = spec.shape;

    let workloads: Vec<Workload> = spec
        .sparsities
        .iter()
        .enumerate()
        .map(|(si, &s)| -> Result<Workload> {
            // like `run`, a fully dense A is streamed as packed words
            if s == 0.0 {
                return Ok(Workload::dense(n, m, p, spec.precision));
            }
            let a = generate_matrix(n, m, spec.precision, s, spec.a_seed(si))?;
            Ok(Workload::sparse(m, p, spec.precision, a.row_nnz()))
        })
        .collect::<Result<_>>()?;
    let dense = Workload::dense(n, m, p, spec.precision);

    let mut rows = Vec::new();
    let mut first_times = Vec::new();
    let (mut monotone, mut crossover_holds) = (true, true);
    for (ci, cell) in spec.configs.iter().enumerate() {
        let cfg = cell.accelerator(spec.precision);
        let dense_cycles =
            estimate_cycles(&StageTrace::predict(&dense, &cfg)?, &cfg, &mp)?.total_cycles;
        let mut prev: Option<(f64, f64)> = None;
        for (si, (w, &s)) in workloads.iter().zip(&spec.sparsities).enumerate() {
            let r = estimate_cycles(&StageTrace::predict(w, &cfg)?, &cfg, &mp)?;
            if ci == 0 {
                first_times.push(r.wall_time_s);
            }
            if s > 0.0 {
                if let Some((ps, pc)) = prev {
                    if s >= ps && r.total_cycles > pc {
                        monotone = false;
                    }
                }
                prev = Some((s, r.total_cycles));
            }
            if s >= 0.5 && r.total_cycles > dense_cycles {
                crossover_holds = false;
                eprintln!(
                    "warning: ({},{}) at sparsity {s} models {:.3}x the dense cycles",
                    cell.cores,
                    cell.pes,
                    r.total_cycles / dense_cycles
                );
            }
            rows.push(SweepRow {
                cores: cell.cores,
                pes: cell.pes,
                pr: cell.pr,
                sparsity: s,
                nnz: w.total_nnz(),
                total_cycles: r.total_cycles,
                time_s: r.wall_time_s,
                bottleneck: r.dominant_bottleneck().map(|b| b.to_string()),
                relative_to_dense: r.total_cycles / dense_cycles,
                relative_to_first_config: r.wall_time_s / first_times[si],
            });
        }
    }

    let report = SweepReport {
        schema_version: SCHEMA_VERSION,
        command: "sweep",
        spec: &spec,
        machine_params: &mp,
        monotone,
        crossover_holds,
        cells: &rows,
    };
    let written = report::write_report(&spec.out_dir(), "sweep", &report, &rows)?;
    report::print(&written, args.cells.format);
    if !monotone {
        eprintln!("warning: modeled cycles increase with sparsity for some configuration");
    }
    Ok(())
}
