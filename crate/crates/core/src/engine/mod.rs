//! Dataflow engine: configuration, tiling, the four stages and execution.
//!
//! Each core owns a contiguous block of `A` rows and walks the column tiles
//! of `B` in order. For every tile, Stage 1 loads the tile and streams the
//! core's rows, Stage 2 accumulates on `width` PEs, Stage 3 requantizes and
//! Stage 4 writes the tile's columns of `C`.

mod config;
mod output;
mod split;
pub mod stages;
mod tiling;
mod trace;

use std::ops::Range;
use std::sync::mpsc::{sync_channel, Receiver, SyncSender};
use std::sync::Arc;

pub use config::{AcceleratorConfig, EngineMode};
pub use output::{OutputData, OutputLayout, OutputMatrix};
pub use split::{split_rows as split_across_cores, CoreAssignment};
pub use tiling::TilePlan;
pub use trace::{CoreTrace, StageCounters, StageTrace, TileTrace, Workload};

use self::stages::{
    merge_blocks, AEvent, BTile, ComputeCounters, ComputeStage, OutputKind, RawRow, ReadCounters,
    ReadStage, ScaleCounters, ScaleStage, ScaledRow, TileAssembler,
};
use crate::error::{Error, Result};
use crate::matrix::{CsrMatrix, DenseMatrix, ElementPrecision};
use crate::quant::QuantParams;

/// The `A` operand in either streaming representation.
#[derive(Debug, Clone, Copy)]
pub enum AOperand<'a> {
    Dense(&'a DenseMatrix),
    Csr(&'a CsrMatrix),
}

impl<'a> AOperand<'a> {
    pub fn rows(&self) -> usize {
        match self {
            AOperand::Dense(m) => m.rows(),
            AOperand::Csr(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            AOperand::Dense(m) => m.cols(),
            AOperand::Csr(m) => m.cols(),
        }
    }

    pub fn precision(&self) -> ElementPrecision {
        match self {
            AOperand::Dense(m) => m.precision(),
            AOperand::Csr(m) => m.precision(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, AOperand::Csr(_))
    }

    fn repr(&self) -> &'static str {
        match self {
            AOperand::Dense(_) => "dense",
            AOperand::Csr(_) => "CSR",
        }
    }

    /// Workload description for trace prediction.
    pub fn workload(&self, p: usize) -> Workload {
        match self {
            AOperand::Dense(m) => Workload::dense(m.rows(), m.cols(), p, m.precision()),
            AOperand::Csr(m) => Workload::sparse(m.cols(), p, m.precision(), m.row_nnz()),
        }
    }
}

impl<'a> From<&'a DenseMatrix> for AOperand<'a> {
    fn from(m: &'a DenseMatrix) -> Self {
        AOperand::Dense(m)
    }
}

impl<'a> From<&'a CsrMatrix> for AOperand<'a> {
    fn from(m: &'a CsrMatrix) -> Self {
        AOperand::Csr(m)
    }
}

/// What Stage 3 does with accumulators.
#[derive(Debug, Clone, Copy)]
pub enum ScaleParams<'a> {
    /// Forward raw sums. The zero point is still subtracted from `B`.
    Bypass { zero_point_rhs: i8 },
    /// Requantize int8 accumulators, one channel per row of `A`.
    PerChannel(&'a QuantParams),
}

impl ScaleParams<'_> {
    pub fn zero_point_rhs(&self) -> i8 {
        match self {
            ScaleParams::Bypass { zero_point_rhs } => *zero_point_rhs,
            ScaleParams::PerChannel(q) => q.zero_point_rhs,
        }
    }
}

impl Default for ScaleParams<'_> {
    fn default() -> Self {
        ScaleParams::Bypass { zero_point_rhs: 0 }
    }
}

/// How stages are mapped onto host threads. Results are identical.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Schedule {
    /// All stages of a core interleaved on the calling thread, cores in turn.
    #[default]
    Sequential,
    /// One thread per stage per core, joined by queues of `fifo_depth` batches.
    Pipelined,
}

#[derive(Debug, Clone)]
pub struct Execution {
    pub output: OutputMatrix,
    pub trace: StageTrace,
}

/// A configured accelerator instance.
#[derive(Debug, Clone)]
pub struct Engine {
    cfg: AcceleratorConfig,
}

const ROWS_PER_BATCH: usize = 16;
const INT8_MAX_DEPTH: usize = 65536;

struct Job<'a> {
    cfg: &'a AcceleratorConfig,
    a: AOperand<'a>,
    b: &'a DenseMatrix,
    quant: Option<&'a QuantParams>,
    zp: i8,
    plan: TilePlan,
    kind: OutputKind,
}

impl Engine {
    pub fn new(cfg: AcceleratorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &AcceleratorConfig {
        &self.cfg
    }

    pub fn execute(
        &self,
        a: AOperand<'_>,
        b: &DenseMatrix,
        scale: ScaleParams<'_>,
    ) -> Result<Execution> {
        self.execute_scheduled(a, b, scale, Schedule::Sequential)
    }

    pub fn execute_scheduled(
        &self,
        a: AOperand<'_>,
        b: &DenseMatrix,
        scale: ScaleParams<'_>,
        schedule: Schedule,
    ) -> Result<Execution> {
        let job = self.prepare(a, b, scale)?;
        let assignments = split_across_cores(a.rows(), self.cfg.cores);
        let results: Vec<(OutputMatrix, CoreTrace)> = match schedule {
            Schedule::Sequential => assignments
                .iter()
                .map(|c| run_core_sequential(&job, c))
                .collect(),
            Schedule::Pipelined => std::thread::scope(|s| {
                let handles: Vec<_> = assignments
                    .iter()
                    .map(|c| {
                        let job = &job;
                        s.spawn(move || run_core_pipelined(job, c))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("core thread panicked"))
                    .collect()
            }),
        };
        let (blocks, cores): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        let layout = if self.cfg.trans {
            OutputLayout::ColumnMajor
        } else {
            OutputLayout::RowMajor
        };
        let output = merge_blocks(blocks, a.rows(), b.cols(), layout, job.kind);
        let trace = StageTrace {
            precision: self.cfg.precision,
            sparse_a: a.is_sparse(),
            n: a.rows(),
            m: a.cols(),
            p: b.cols(),
            pes: self.cfg.pes,
            parallel_rows: self.cfg.parallel_rows,
            cores,
        };
        Ok(Execution { output, trace })
    }

    fn prepare<'a>(
        &'a self,
        a: AOperand<'a>,
        b: &'a DenseMatrix,
        scale: ScaleParams<'a>,
    ) -> Result<Job<'a>> {
        let cfg = &self.cfg;
        let mode_ok = match cfg.mode {
            EngineMode::GemmOnly => !a.is_sparse(),
            EngineMode::SpmmOnly => a.is_sparse(),
            EngineMode::Fused => true,
        };
        if !mode_ok {
            return Err(Error::ModeMismatch {
                mode: cfg.mode,
                repr: a.repr(),
            });
        }
        for found in [a.precision(), b.precision()] {
            if found != cfg.precision {
                return Err(Error::PrecisionMismatch {
                    expected: cfg.precision,
                    found,
                });
            }
        }
        if a.cols() != b.rows() {
            return Err(Error::ShapeMismatch(format!(
                "A is {}x{} but B is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        if a.rows() == 0 || a.cols() == 0 || b.cols() == 0 {
            return Err(Error::ShapeMismatch(
                "all dimensions must be at least 1".into(),
            ));
        }
        if cfg.precision == ElementPrecision::Int8 && a.cols() > INT8_MAX_DEPTH {
            return Err(Error::OverflowGuard { m: a.cols() });
        }
        let quant = match (scale, cfg.scaling_active()) {
            (ScaleParams::PerChannel(q), true) => {
                q.validate()?;
                if q.channels.len() != a.rows() {
                    return Err(Error::InvalidQuantParams(format!(
                        "{} channels for {} rows of A",
                        q.channels.len(),
                        a.rows()
                    )));
                }
                Some(q)
            }
            (ScaleParams::Bypass { .. }, true) => return Err(Error::MissingQuantParams),
            (ScaleParams::PerChannel(_), false) => return Err(Error::UnexpectedQuantParams),
            (ScaleParams::Bypass { .. }, false) => None,
        };
        let kind = match (cfg.precision, quant.is_some()) {
            (ElementPrecision::Float32, _) => OutputKind::Float32,
            (ElementPrecision::Int8, true) => OutputKind::Int8,
            (ElementPrecision::Int8, false) => OutputKind::Int32,
        };
        Ok(Job {
            cfg,
            a,
            b,
            quant,
            zp: scale.zero_point_rhs(),
            plan: TilePlan::new(b.cols(), cfg.pes),
            kind,
        })
    }
}

/// Runs `a × b` on a fresh engine with the sequential schedule.
pub fn execute(
    cfg: &AcceleratorConfig,
    a: AOperand<'_>,
    b: &DenseMatrix,
    scale: ScaleParams<'_>,
) -> Result<Execution> {
    Engine::new(cfg.clone())?.execute(a, b, scale)
}

fn tile_trace(
    columns: &Range<usize>,
    rows: usize,
    read: ReadCounters,
    compute: ComputeCounters,
    scale: ScaleCounters,
    written: u64,
) -> TileTrace {
    TileTrace {
        col_begin: columns.start,
        width: columns.len(),
        rows,
        counters: StageCounters {
            words_read_a: read.words_read_a,
            words_read_idx: read.words_read_idx,
            words_loaded_b: read.words_loaded_b,
            mac_ops: compute.mac_ops,
            lanes_active: compute.lanes_active,
            results_scaled: scale.results_scaled,
            words_written_c: written,
        },
        a_value_words: read.a_value_words,
        issue_slots: compute.issue_slots,
        results_forwarded: scale.results_forwarded,
    }
}

fn core_trace(core: &CoreAssignment, tiles: Vec<TileTrace>) -> CoreTrace {
    CoreTrace {
        core_id: core.core_id,
        row_begin: core.rows.start,
        row_end: core.rows.end,
        tiles,
    }
}

fn run_core_sequential(job: &Job<'_>, core: &CoreAssignment) -> (OutputMatrix, CoreTrace) {
    let reader = ReadStage::new(job.a);
    let m = job.a.cols();
    let mut asm = TileAssembler::new(core.rows.clone(), job.plan.p, job.cfg.trans);
    let mut tiles = Vec::with_capacity(job.plan.tile_count);
    let mut events = Vec::new();
    for columns in job.plan.tiles() {
        let tile = BTile::load(job.b, columns.clone());
        let mut read = ReadCounters {
            words_loaded_b: tile.words.len() as u64,
            ..Default::default()
        };
        let mut compute = ComputeStage::new(
            &tile,
            m,
            job.zp,
            job.cfg.fadd_latency,
            job.cfg.parallel_rows,
            core.rows.start,
        );
        let mut scale = ScaleStage::new(job.quant);
        let written_before = asm.words_written;
        for row in core.rows.clone() {
            events.clear();
            reader.read_row(row, &mut events, &mut read);
            for &ev in &events {
                if let Some(raw) = compute.push(ev) {
                    asm.write(columns.clone(), &scale.process(raw));
                }
            }
        }
        tiles.push(tile_trace(
            &columns,
            core.rows.len(),
            read,
            compute.counters,
            scale.counters,
            asm.words_written - written_before,
        ));
    }
    (asm.finish(job.kind), core_trace(core, tiles))
}

enum ReadMsg {
    Begin(Arc<BTile>),
    Events(Vec<AEvent>),
    End(ReadCounters),
}

enum ComputeMsg {
    Begin(Range<usize>),
    Rows(Vec<RawRow>),
    End(ReadCounters, ComputeCounters),
}

enum ScaleMsg {
    Begin(Range<usize>),
    Rows(Vec<ScaledRow>),
    End(ReadCounters, ComputeCounters, ScaleCounters),
}

fn run_core_pipelined(job: &Job<'_>, core: &CoreAssignment) -> (OutputMatrix, CoreTrace) {
    let depth = job.cfg.fifo_depth;
    let (tx1, rx1) = sync_channel::<ReadMsg>(depth);
    let (tx2, rx2) = sync_channel::<ComputeMsg>(depth);
    let (tx3, rx3) = sync_channel::<ScaleMsg>(depth);
    std::thread::scope(|s| {
        s.spawn(|| stage1_thread(job, core, tx1));
        s.spawn(|| stage2_thread(job, core, rx1, tx2));
        s.spawn(|| stage3_thread(job, rx2, tx3));
        stage4_loop(job, core, rx3)
    })
}

fn stage1_thread(job: &Job<'_>, core: &CoreAssignment, tx: SyncSender<ReadMsg>) {
    let reader = ReadStage::new(job.a);
    for columns in job.plan.tiles() {
        let tile = Arc::new(BTile::load(job.b, columns));
        let mut read = ReadCounters {
            words_loaded_b: tile.words.len() as u64,
            ..Default::default()
        };
        if tx.send(ReadMsg::Begin(tile)).is_err() {
            return;
        }
        let rows: Vec<usize> = core.rows.clone().collect();
        for chunk in rows.chunks(ROWS_PER_BATCH) {
            let mut events = Vec::new();
            for &row in chunk {
                reader.read_row(row, &mut events, &mut read);
            }
            if tx.send(ReadMsg::Events(events)).is_err() {
                return;
            }
        }
        if tx.send(ReadMsg::End(read)).is_err() {
            return;
        }
    }
}

fn stage2_thread(
    job: &Job<'_>,
    core: &CoreAssignment,
    rx: Receiver<ReadMsg>,
    tx: SyncSender<ComputeMsg>,
) {
    let m = job.a.cols();
    // The stage borrows its tile, so one is built per tile.
    while let Ok(msg) = rx.recv() {
        let ReadMsg::Begin(tile) = msg else {
            unreachable!("tile must begin before events")
        };
        if tx.send(ComputeMsg::Begin(tile.columns.clone())).is_err() {
            return;
        }
        let mut stage = ComputeStage::new(
            &tile,
            m,
            job.zp,
            job.cfg.fadd_latency,
            job.cfg.parallel_rows,
            core.rows.start,
        );
        loop {
            match rx.recv() {
                Ok(ReadMsg::Events(events)) => {
                    let rows: Vec<RawRow> =
                        events.into_iter().filter_map(|ev| stage.push(ev)).collect();
                    if tx.send(ComputeMsg::Rows(rows)).is_err() {
                        return;
                    }
                }
                Ok(ReadMsg::End(read)) => {
                    let counters = std::mem::take(&mut stage.counters);
                    if tx.send(ComputeMsg::End(read, counters)).is_err() {
                        return;
                    }
                    break;
                }
                Ok(ReadMsg::Begin(_)) => unreachable!("nested tile"),
                Err(_) => return,
            }
        }
    }
}

fn stage3_thread(job: &Job<'_>, rx: Receiver<ComputeMsg>, tx: SyncSender<ScaleMsg>) {
    let mut stage = ScaleStage::new(job.quant);
    while let Ok(msg) = rx.recv() {
        let out = match msg {
            ComputeMsg::Begin(cols) => {
                stage = ScaleStage::new(job.quant);
                ScaleMsg::Begin(cols)
            }
            ComputeMsg::Rows(rows) => {
                ScaleMsg::Rows(rows.into_iter().map(|r| stage.process(r)).collect())
            }
            ComputeMsg::End(read, compute) => {
                ScaleMsg::End(read, compute, std::mem::take(&mut stage.counters))
            }
        };
        if tx.send(out).is_err() {
            return;
        }
    }
}

fn stage4_loop(
    job: &Job<'_>,
    core: &CoreAssignment,
    rx: Receiver<ScaleMsg>,
) -> (OutputMatrix, CoreTrace) {
    let mut asm = TileAssembler::new(core.rows.clone(), job.plan.p, job.cfg.trans);
    let mut tiles = Vec::with_capacity(job.plan.tile_count);
    let mut columns = 0..0;
    let mut written_before = 0;
    while let Ok(msg) = rx.recv() {
        match msg {
            ScaleMsg::Begin(cols) => {
                columns = cols;
                written_before = asm.words_written;
            }
            ScaleMsg::Rows(rows) => {
                for r in &rows {
                    asm.write(columns.clone(), r);
                }
            }
            ScaleMsg::End(read, compute, scale) => tiles.push(tile_trace(
                &columns,
                core.rows.len(),
                read,
                compute,
                scale,
                asm.words_written - written_before,
            )),
        }
    }
    (asm.finish(job.kind), core_trace(core, tiles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::generate_matrix;
    use crate::quant::ChannelQuant;
    use crate::reference::reference_gemm_i32;

    fn int8_cfg(cores: usize, pes: usize) -> AcceleratorConfig {
        AcceleratorConfig::new(cores, pes, ElementPrecision::Int8)
    }

    #[test]
    fn identity_reproduces_b() {
        let n = 6;
        let mut eye = vec![0i8; n * n];
        (0..n).for_each(|i| eye[i * n + i] = 1);
        let a = DenseMatrix::from_i8(n, n, eye).unwrap();
        let b = generate_matrix(n, 9, ElementPrecision::Int8, 0.0, 3).unwrap();
        let out = execute(
            &int8_cfg(1, 4),
            AOperand::Dense(&a),
            &b,
            ScaleParams::default(),
        )
        .unwrap();
        let expect: Vec<i32> = b.as_i8().unwrap().iter().map(|&x| x as i32).collect();
        assert_eq!(out.output.as_i32().unwrap(), expect.as_slice());
    }

    #[test]
    fn two_by_two_examples() {
        let run = |a: Vec<i8>, b: Vec<i8>, zp: i8| {
            let a = DenseMatrix::from_i8(2, 2, a).unwrap();
            let b = DenseMatrix::from_i8(2, 2, b).unwrap();
            let scale = ScaleParams::Bypass { zero_point_rhs: zp };
            let out = execute(&int8_cfg(1, 2), AOperand::Dense(&a), &b, scale).unwrap();
            out.output.as_i32().unwrap().to_vec()
        };
        assert_eq!(run(vec![1, 0, 0, 1], vec![3, -4, 5, 6], 0), [3, -4, 5, 6]);
        assert_eq!(run(vec![1, 2, 0, -1], vec![1; 4], 1), [0; 4]);
    }

    #[test]
    fn zero_point_cancels_constant_b() {
        let a = generate_matrix(5, 7, ElementPrecision::Int8, 0.3, 1).unwrap();
        let b = DenseMatrix::from_i8(7, 3, vec![-7; 21]).unwrap();
        let out = execute(
            &int8_cfg(1, 2),
            AOperand::Dense(&a),
            &b,
            ScaleParams::Bypass { zero_point_rhs: -7 },
        )
        .unwrap();
        assert!(out.output.as_i32().unwrap().iter().all(|&v| v == 0));
    }

    #[test]
    fn transposed_write_is_a_permutation() {
        let a = generate_matrix(7, 11, ElementPrecision::Int8, 0.5, 4).unwrap();
        let b = generate_matrix(11, 33, ElementPrecision::Int8, 0.0, 5).unwrap();
        let plain = execute(
            &int8_cfg(1, 32),
            AOperand::Dense(&a),
            &b,
            ScaleParams::default(),
        )
        .unwrap();
        let cfg = AcceleratorConfig {
            trans: true,
            ..int8_cfg(2, 32)
        };
        let trans = execute(&cfg, AOperand::Dense(&a), &b, ScaleParams::default()).unwrap();
        assert_eq!(trans.output.layout, OutputLayout::ColumnMajor);
        let (p, t) = (
            plain.output.as_i32().unwrap(),
            trans.output.as_i32().unwrap(),
        );
        for i in 0..7 {
            for j in 0..33 {
                assert_eq!(t[j * 7 + i], p[i * 33 + j]);
            }
        }
        assert_eq!(plain.trace.tile_count(), 2);
        assert_eq!(plain.trace.cores[0].tiles[1].width, 1);
    }

    #[test]
    fn cores_and_schedules_agree() {
        let a = generate_matrix(10, 20, ElementPrecision::Int8, 0.6, 8).unwrap();
        let b = generate_matrix(20, 13, ElementPrecision::Int8, 0.0, 9).unwrap();
        let csr = CsrMatrix::from_dense(&a);
        let one = execute(
            &int8_cfg(1, 4),
            AOperand::Dense(&a),
            &b,
            ScaleParams::default(),
        )
        .unwrap();
        let engine = Engine::new(AcceleratorConfig {
            parallel_rows: 2,
            ..int8_cfg(4, 4)
        })
        .unwrap();
        for schedule in [Schedule::Sequential, Schedule::Pipelined] {
            for op in [AOperand::Dense(&a), AOperand::Csr(&csr)] {
                let four = engine
                    .execute_scheduled(op, &b, ScaleParams::default(), schedule)
                    .unwrap();
                assert!(four.output.bit_identical(&one.output));
                assert_eq!(
                    four.trace,
                    StageTrace::predict(&op.workload(13), engine.config()).unwrap()
                );
            }
        }
        assert_eq!(
            one.output.as_i32().unwrap(),
            reference_gemm_i32(&a, &b, 0).as_slice()
        );
    }

    #[test]
    fn rejects_invalid_calls() {
        let a = generate_matrix(4, 4, ElementPrecision::Int8, 0.0, 1).unwrap();
        let b = generate_matrix(4, 4, ElementPrecision::Int8, 0.0, 2).unwrap();
        let csr = CsrMatrix::from_dense(&a);
        let gemm = AcceleratorConfig {
            mode: EngineMode::GemmOnly,
            ..int8_cfg(1, 4)
        };
        assert!(matches!(
            execute(&gemm, AOperand::Csr(&csr), &b, ScaleParams::default()),
            Err(Error::ModeMismatch { .. })
        ));
        let spmm = AcceleratorConfig {
            mode: EngineMode::SpmmOnly,
            ..int8_cfg(1, 4)
        };
        assert!(matches!(
            execute(&spmm, AOperand::Dense(&a), &b, ScaleParams::default()),
            Err(Error::ModeMismatch { .. })
        ));
        let scaled = AcceleratorConfig {
            scale: true,
            ..int8_cfg(1, 4)
        };
        assert!(matches!(
            execute(&scaled, AOperand::Dense(&a), &b, ScaleParams::default()),
            Err(Error::MissingQuantParams)
        ));
        let qp = QuantParams::uniform(
            3,
            ChannelQuant {
                qm: 1 << 30,
                shift: 0,
                bias: 0,
            },
            0,
            0,
        );
        assert!(execute(
            &scaled,
            AOperand::Dense(&a),
            &b,
            ScaleParams::PerChannel(&qp)
        )
        .is_err());
        let bf = generate_matrix(4, 4, ElementPrecision::Float32, 0.0, 2).unwrap();
        assert!(matches!(
            execute(
                &int8_cfg(1, 4),
                AOperand::Dense(&a),
                &bf,
                ScaleParams::default()
            ),
            Err(Error::PrecisionMismatch { .. })
        ));
        let b5 = generate_matrix(5, 4, ElementPrecision::Int8, 0.0, 2).unwrap();
        assert!(matches!(
            execute(
                &int8_cfg(1, 4),
                AOperand::Dense(&a),
                &b5,
                ScaleParams::default()
            ),
            Err(Error::ShapeMismatch(_))
        ));
        let deep = DenseMatrix::zeros(1, 65537, ElementPrecision::Int8);
        let deep_b = DenseMatrix::zeros(65537, 1, ElementPrecision::Int8);
        assert!(matches!(
            execute(
                &int8_cfg(1, 4),
                AOperand::Dense(&deep),
                &deep_b,
                ScaleParams::default()
            ),
            Err(Error::OverflowGuard { .. })
        ));
    }

    #[test]
    fn float_ignores_scale_flag() {
        let a = generate_matrix(3, 5, ElementPrecision::Float32, 0.0, 1).unwrap();
        let b = generate_matrix(5, 2, ElementPrecision::Float32, 0.0, 2).unwrap();
        let cfg = AcceleratorConfig {
            scale: true,
            ..AcceleratorConfig::new(1, 2, ElementPrecision::Float32)
        };
        let out = execute(&cfg, AOperand::Dense(&a), &b, ScaleParams::default()).unwrap();
        assert!(out.output.as_f32().is_some());
        assert_eq!(out.trace.totals().results_scaled, 0);
    }
}
