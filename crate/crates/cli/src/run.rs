//! `run`: execute cells, check them against the brute-force oracle, model them.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use fades_core::io::{load_matrix, StoredMatrix};
use fades_core::quant::quantize_multiplier;
use fades_core::reference::{reference_gemm_f64, reference_int8, Elements32};
use fades_core::{
    estimate_cycles, generate_matrix, AOperand, ChannelQuant, CsrMatrix, DenseMatrix,
    ElementPrecision, Engine, MachineParams, OutputMatrix, QuantParams, ScaleParams, TilePlan,
};
use serde::Serialize;

use crate::args::RunArgs;
use crate::bench_spec::{load_machine_params, BenchSpec, CellConfig};
use crate::report::{self, SCHEMA_VERSION};

#[derive(Debug, Serialize)]
pub struct CellRow {
    pub cores: usize,
    pub pes: usize,
    pub pr: usize,
    pub trans: bool,
    pub scale: bool,
    pub sparsity: f64,
    pub zero_fraction: f64,
    pub a_repr: &'static str,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub tiles: usize,
    pub last_tile_width: usize,
    #[serde(rename = "match")]
    pub matched: bool,
    pub mismatches: usize,
    pub words_read_a: u64,
    pub words_read_idx: u64,
    pub words_loaded_b: u64,
    pub mac_ops: u64,
    pub results_scaled: u64,
    pub words_written_c: u64,
    /// Modeled figures are withheld for cells that failed verification.
    pub modeled_cycles: Option<f64>,
    pub modeled_time_s: Option<f64>,
    pub bottleneck: Option<String>,
}

#[derive(Serialize)]
struct RunReport<'a> {
    schema_version: u32,
    command: &'static str,
    spec: &'a BenchSpec,
    machine_params: &'a MachineParams,
    all_match: bool,
    cells: &'a [CellRow],
}

#[derive(Serialize)]
struct CellTiming {
    cell: usize,
    runs: usize,
    min_s: f64,
    mean_s: f64,
}

struct Operands {
    a: DenseMatrix,
    csr: Option<CsrMatrix>,
    b: DenseMatrix,
}

fn generated(spec: &BenchSpec, si: usize) -> Result<Operands> {
    let [n, m, p] = spec.shape;
    let sparsity = spec.sparsities[si];
    let a = generate_matrix(n, m, spec.precision, sparsity, spec.a_seed(si))?;
    let b = generate_matrix(m, p, spec.precision, 0.0, spec.b_seed())?;
    let csr = (sparsity > 0.0).then(|| CsrMatrix::from_dense(&a));
    Ok(Operands { a, csr, b })
}

fn from_files(args: &RunArgs) -> Result<Operands> {
    let (Some(ap), Some(bp)) = (&args.a_file, &args.b_file) else {
        bail!("both --a-file and --b-file are required");
    };
    let b = load_matrix(bp)
        .with_context(|| format!("loading {}", bp.display()))?
        .into_dense();
    Ok(
        match load_matrix(ap).with_context(|| format!("loading {}", ap.display()))? {
            StoredMatrix::Dense(a) => Operands { a, csr: None, b },
            StoredMatrix::Csr(c) => Operands {
                a: c.to_dense(),
                csr: Some(c),
                b,
            },
        },
    )
}

/// Same scale on every channel, sized so random int8 sums land mid-range.
fn default_quant(n: usize, m: usize, zero_point_rhs: i8) -> QuantParams {
    let (qm, shift) = quantize_multiplier(1.0 / (256.0 * (m as f64).sqrt()));
    QuantParams::uniform(n, ChannelQuant { qm, shift, bias: 0 }, zero_point_rhs, 0)
}

/// Counts elements that disagree with the oracle.
fn verify(
    out: &OutputMatrix,
    a: &DenseMatrix,
    b: &DenseMatrix,
    zp: i8,
    qp: Option<&QuantParams>,
) -> usize {
    let out = out.to_row_major();
    match a.precision() {
        ElementPrecision::Int8 => {
            let expect: Vec<u32> = match reference_int8(a, b, zp, qp) {
                Elements32::Int8(v) => v.iter().map(|&x| x as u8 as u32).collect(),
                Elements32::Int32(v) => v.iter().map(|&x| x as u32).collect(),
            };
            out.data
                .to_bits()
                .iter()
                .zip(&expect)
                .filter(|(x, y)| x != y)
                .count()
        }
        ElementPrecision::Float32 => {
            let (vals, mags) = reference_gemm_f64(a, b, zp as f32);
            // forward error bound of an m-term f32 dot product plus the subtraction and product roundings
            let gamma = (a.cols() + 3) as f64 * f64::from(f32::EPSILON) / 2.0 * 1.01;
            let got = out.as_f32().expect("float output");
            got.iter()
                .zip(vals.iter().zip(&mags))
                .filter(|(&g, (&v, &mag))| (g as f64 - v).abs() > gamma * mag)
                .count()
        }
    }
}

pub fn run(args: &RunArgs) -> Result<bool> {
    let mut spec = BenchSpec::resolve(&args.cells, args.repeat, &[0.0])?;
    let file_operands = match args.a_file {
        Some(_) => {
            let ops = from_files(args)?;
            spec.shape = [ops.a.rows(), ops.a.cols(), ops.b.cols()];
            spec.precision = ops.a.precision();
            spec.sparsities = vec![ops.a.zero_fraction()];
            spec.validate()?;
            Some(ops)
        }
        None => None,
    };
    let mp = load_machine_params(args.cells.machine_params.as_deref())?;
    let quant_file = match &args.quant {
        Some(p) => Some(QuantParams::from_json(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?),
        None => None,
    };
    let mut rows = Vec::new();
    let mut timings = Vec::new();
    for si in 0..spec.sparsities.len() {
        let generated_ops;
        let ops = match &file_operands {
            Some(o) => o,
            None => {
                generated_ops = generated(&spec, si)?;
                &generated_ops
            }
        };
        for cfg in &spec.configs {
            let (row, timing) =
                run_cell(&spec, si, cfg, ops, quant_file.as_ref(), &mp, rows.len())?;
            rows.push(row);
            timings.push(timing);
        }
    }

    let all_match = rows.iter().all(|r| r.matched);
    let report = RunReport {
        schema_version: SCHEMA_VERSION,
        command: "run",
        spec: &spec,
        machine_params: &mp,
        all_match,
        cells: &rows,
    };
    let dir = spec.out_dir();
    let written = report::write_report(&dir, "run", &report, &rows)?;
    let mut timing_json = serde_json::to_string_pretty(&timings)?;
    timing_json.push('\n');
    report::write_atomic(&dir.join("timing.json"), timing_json.as_bytes())?;
    report::print(&written, args.cells.format);
    for r in rows.iter().filter(|r| !r.matched) {
        eprintln!(
            "mismatch: cores={} pes={} pr={} sparsity={} -> {} elements differ",
            r.cores, r.pes, r.pr, r.sparsity, r.mismatches
        );
    }
    Ok(all_match)
}

fn run_cell(
    spec: &BenchSpec,
    si: usize,
    cell: &CellConfig,
    ops: &Operands,
    quant_file: Option<&QuantParams>,
    mp: &MachineParams,
    index: usize,
) -> Result<(CellRow, CellTiming)> {
    let cfg = cell.accelerator(spec.precision);
    let engine = Engine::new(cfg.clone())?;
    let [n, m, p] = spec.shape;
    let default_qp;
    let qp = match (cfg.scaling_active(), quant_file) {
        (false, _) => None,
        (true, Some(q)) => Some(q),
        (true, None) => {
            default_qp = default_quant(n, m, spec.zero_point_rhs);
            Some(&default_qp)
        }
    };
    let scale = match qp {
        Some(q) => ScaleParams::PerChannel(q),
        None => ScaleParams::Bypass {
            zero_point_rhs: spec.zero_point_rhs,
        },
    };
    let operand = match &ops.csr {
        Some(c) => AOperand::Csr(c),
        None => AOperand::Dense(&ops.a),
    };

    let mut times = Vec::with_capacity(spec.repeat);
    let mut last = None;
    for _ in 0..spec.repeat {
        let t0 = Instant::now();
        let exec = engine.execute(operand, &ops.b, scale)?;
        times.push(t0.elapsed().as_secs_f64());
        last = Some(exec);
    }
    let exec = last.expect("repeat >= 1");
    let mismatches = verify(&exec.output, &ops.a, &ops.b, scale.zero_point_rhs(), qp);
    let matched = mismatches == 0;
    let modeled = if matched {
        Some(estimate_cycles(&exec.trace, &cfg, mp)?)
    } else {
        None
    };
    let plan = TilePlan::new(p, cfg.pes);
    let totals = exec.trace.totals();
    let row = CellRow {
        cores: cell.cores,
        pes: cell.pes,
        pr: cell.pr,
        trans: cell.trans,
        scale: cfg.scaling_active(),
        sparsity: spec.sparsities[si],
        zero_fraction: ops.a.zero_fraction(),
        a_repr: if operand.is_sparse() { "csr" } else { "dense" },
        n,
        m,
        p,
        tiles: plan.tile_count,
        last_tile_width: plan.last_tile_width,
        matched,
        mismatches,
        words_read_a: totals.words_read_a,
        words_read_idx: totals.words_read_idx,
        words_loaded_b: totals.words_loaded_b,
        mac_ops: totals.mac_ops,
        results_scaled: totals.results_scaled,
        words_written_c: totals.words_written_c,
        modeled_cycles: modeled.as_ref().map(|r| r.total_cycles),
        modeled_time_s: modeled.as_ref().map(|r| r.wall_time_s),
        bottleneck: modeled
            .as_ref()
            .and_then(|r| r.dominant_bottleneck())
            .map(|s| s.to_string()),
    };
    let timing = CellTiming {
        cell: index,
        runs: times.len(),
        min_s: times.iter().copied().fold(f64::INFINITY, f64::min),
        mean_s: times.iter().sum::<f64>() / times.len() as f64,
    };
    Ok((row, timing))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_check_flags_large_errors_only() {
        let a = generate_matrix(4, 50, ElementPrecision::Float32, 0.0, 1).unwrap();
        let b = generate_matrix(50, 3, ElementPrecision::Float32, 0.0, 2).unwrap();
        let out = fades_core::execute(
            &fades_core::AcceleratorConfig::new(1, 2, ElementPrecision::Float32),
            AOperand::Dense(&a),
            &b,
            ScaleParams::default(),
        )
        .unwrap()
        .output;
        assert_eq!(verify(&out, &a, &b, 0, None), 0);
        let mut bad = out.clone();
        if let fades_core::OutputData::Float32(v) = &mut bad.data {
            v[0] += 1.0;
        }
        assert_eq!(verify(&bad, &a, &b, 0, None), 1);
    }

    #[test]
    fn default_quant_keeps_outputs_inside_the_range() {
        let a = generate_matrix(16, 256, ElementPrecision::Int8, 0.0, 1).unwrap();
        let b = generate_matrix(256, 16, ElementPrecision::Int8, 0.0, 2).unwrap();
        let qp = default_quant(16, 256, 0);
        let Elements32::Int8(v) = reference_int8(&a, &b, 0, Some(&qp)) else {
            panic!()
        };
        let saturated = v.iter().filter(|&&x| x == i8::MIN || x == i8::MAX).count();
        assert!(saturated < v.len() / 10, "{saturated} of {}", v.len());
    }
}
