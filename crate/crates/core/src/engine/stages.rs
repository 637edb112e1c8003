//! The four dataflow stages.
//!
//! Stage 1 loads a B tile and streams `A` row by row, Stage 2 multiplies the
//! stream against the tile on `width` PEs, Stage 3 requantizes (or forwards)
//! each finished row, and Stage 4 places rows into `C`. Each stage is a
//! plain state machine so the same code runs fused on one thread or split
//! across threads joined by bounded queues.

use std::ops::Range;

use super::output::{OutputData, OutputLayout, OutputMatrix};
use super::AOperand;
use crate::matrix::packing::lane_i8;
use crate::matrix::{CsrMatrix, DenseMatrix, ElementPrecision, Elements};
use crate::quant::{requantize, QuantParams, RawAccumulator};

/// One item of the `A` stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AEvent {
    /// GEMM: packed word of `row` holding columns `k_base..k_base + lanes`.
    Word {
        row: usize,
        k_base: usize,
        word: u32,
    },
    /// SPMM: a non-zero with its column index, read together. `value` is the
    /// lane payload (sign byte for int8, IEEE bits for float).
    Element {
        row: usize,
        col: u32,
        value: u32,
    },
    RowEnd {
        row: usize,
    },
}

/// Stage-1 counters for one tile.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ReadCounters {
    pub words_loaded_b: u64,
    pub words_read_a: u64,
    pub words_read_idx: u64,
    pub a_value_words: u64,
}

enum Source<'a> {
    Dense {
        words: Vec<u32>,
        words_per_row: usize,
    },
    Csr(&'a CsrMatrix),
}

/// Stage 1. Owns the packed view of `A` that is re-streamed for every tile.
pub struct ReadStage<'a> {
    source: Source<'a>,
    lanes: usize,
}

impl<'a> ReadStage<'a> {
    pub fn new(a: AOperand<'a>) -> Self {
        let lanes = a.precision().lanes();
        let source = match a {
            AOperand::Dense(m) => {
                let words_per_row = m.cols().div_ceil(lanes);
                let mut words = Vec::with_capacity(words_per_row * m.rows());
                for i in 0..m.rows() {
                    words.extend_from_slice(m.pack_row(i).words());
                }
                Source::Dense {
                    words,
                    words_per_row,
                }
            }
            AOperand::Csr(m) => Source::Csr(m),
        };
        Self { source, lanes }
    }

    /// Appends the events of `row`, terminated by `RowEnd`, and tallies them.
    pub fn read_row(&self, row: usize, out: &mut Vec<AEvent>, counters: &mut ReadCounters) {
        match &self.source {
            Source::Dense {
                words,
                words_per_row,
            } => {
                let base = row * words_per_row;
                for (w, &word) in words[base..base + words_per_row].iter().enumerate() {
                    out.push(AEvent::Word {
                        row,
                        k_base: w * self.lanes,
                        word,
                    });
                }
                counters.words_read_a += *words_per_row as u64;
                counters.a_value_words += *words_per_row as u64;
            }
            Source::Csr(m) => {
                let range = m.row_range(row);
                let nnz = range.len() as u64;
                let values = m.values();
                for k in range {
                    out.push(AEvent::Element {
                        row,
                        col: m.col_idx()[k],
                        value: values.bits_at(k),
                    });
                }
                counters.words_read_a += nnz;
                counters.words_read_idx += nnz;
                counters.a_value_words += nnz.div_ceil(self.lanes as u64);
            }
        }
        out.push(AEvent::RowEnd { row });
    }

    pub fn stream(&self, rows: Range<usize>) -> impl Iterator<Item = AEvent> + '_ {
        let mut scratch = ReadCounters::default();
        rows.flat_map(move |row| {
            let mut buf = Vec::new();
            self.read_row(row, &mut buf, &mut scratch);
            buf
        })
    }
}

/// Events Stage 1 emits for `rows` of `A` (identical for every tile).
pub fn stage1_read(a: AOperand<'_>, rows: Range<usize>) -> Vec<AEvent> {
    ReadStage::new(a).stream(rows).collect()
}

/// On-chip B tile: `word_rows × width` words, row-major.
///
/// Int8 packs four consecutive `k` into the lanes of one word per column so
/// one A word meets one B word; SPMM reads a single lane. Float stores one
/// `k` per word row.
#[derive(Debug, Clone)]
pub struct BTile {
    pub precision: ElementPrecision,
    pub columns: Range<usize>,
    pub width: usize,
    pub word_rows: usize,
    pub words: Vec<u32>,
}

impl BTile {
    pub fn load(b: &DenseMatrix, columns: Range<usize>) -> Self {
        let (m, p) = (b.rows(), b.cols());
        let width = columns.len();
        let precision = b.precision();
        let lanes = precision.lanes();
        let word_rows = m.div_ceil(lanes);
        let mut words = vec![0u32; word_rows * width];
        match b.data() {
            Elements::Int8(v) => {
                for k in 0..m {
                    let (w, z) = (k / 4, k % 4);
                    for (j, col) in columns.clone().enumerate() {
                        words[w * width + j] |= (v[k * p + col] as u8 as u32) << (8 * z);
                    }
                }
            }
            Elements::Float32(v) => {
                for k in 0..m {
                    for (j, col) in columns.clone().enumerate() {
                        words[k * width + j] = v[k * p + col].to_bits();
                    }
                }
            }
        }
        Self {
            precision,
            columns,
            width,
            word_rows,
            words,
        }
    }

    #[inline]
    fn word_row(&self, w: usize) -> &[u32] {
        &self.words[w * self.width..(w + 1) * self.width]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawValues {
    Int(Vec<i32>),
    Float(Vec<f32>),
}

/// Accumulators of one `A` row against one tile, one per active PE.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub row: usize,
    pub values: RawValues,
}

/// Stage-2 counters for one tile.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComputeCounters {
    pub mac_ops: u64,
    pub lanes_active: u64,
    /// Issue cycles per row pipeline.
    pub issue_slots: Vec<u64>,
}

/// Stage 2 for one tile.
///
/// Int8 accumulates exactly in int32. Float keeps `fadd_latency` partial
/// sums per PE, rotating to the next partial on every event, and folds them
/// in ascending order when the row ends.
pub struct ComputeStage<'t> {
    tile: &'t BTile,
    m: usize,
    zp: i32,
    fadd_latency: usize,
    lanes: usize,
    row_base: usize,
    acc: Vec<i32>,
    partials: Vec<f32>,
    slot: usize,
    row_elements: u64,
    row_words: u64,
    pub counters: ComputeCounters,
}

impl<'t> ComputeStage<'t> {
    /// `row_base` is the first row of the owning core; row pipelines are
    /// assigned by `(row - row_base) % parallel_rows`.
    pub fn new(
        tile: &'t BTile,
        m: usize,
        zero_point_rhs: i8,
        fadd_latency: usize,
        parallel_rows: usize,
        row_base: usize,
    ) -> Self {
        let width = tile.width;
        let float = tile.precision == ElementPrecision::Float32;
        Self {
            tile,
            m,
            zp: zero_point_rhs as i32,
            fadd_latency,
            lanes: tile.precision.lanes(),
            row_base,
            acc: if float { Vec::new() } else { vec![0; width] },
            partials: if float {
                vec![0.0; width * fadd_latency]
            } else {
                Vec::new()
            },
            slot: 0,
            row_elements: 0,
            row_words: 0,
            counters: ComputeCounters {
                issue_slots: vec![0; parallel_rows],
                ..Default::default()
            },
        }
    }

    /// Consumes one event; returns the finished row at `RowEnd`.
    pub fn push(&mut self, ev: AEvent) -> Option<RawRow> {
        match ev {
            AEvent::Word { k_base, word, .. } => {
                self.row_words += 1;
                let width = self.tile.width as u64;
                self.counters.mac_ops += width * self.lanes as u64;
                self.counters.lanes_active += width * (self.m - k_base).min(self.lanes) as u64;
                if self.tile.precision == ElementPrecision::Int8 {
                    self.mac_word_i8(k_base / 4, word);
                } else {
                    self.mac_f32(k_base, f32::from_bits(word));
                }
                None
            }
            AEvent::Element { col, value, .. } => {
                self.row_elements += 1;
                let width = self.tile.width as u64;
                self.counters.mac_ops += width;
                self.counters.lanes_active += width;
                if self.tile.precision == ElementPrecision::Int8 {
                    self.mac_element_i8(col as usize, value as u8 as i8);
                } else {
                    self.mac_f32(col as usize, f32::from_bits(value));
                }
                None
            }
            AEvent::RowEnd { row } => Some(self.finish_row(row)),
        }
    }

    #[inline]
    fn mac_word_i8(&mut self, word_row: usize, a_word: u32) {
        let a = [0, 1, 2, 3].map(|z| lane_i8(a_word, z) as i32);
        let zp = self.zp;
        for (acc, &bw) in self.acc.iter_mut().zip(self.tile.word_row(word_row)) {
            let mut s = 0i32;
            for (z, &av) in a.iter().enumerate() {
                s += av * (lane_i8(bw, z) as i32 - zp);
            }
            *acc = acc.wrapping_add(s);
        }
    }

    #[inline]
    fn mac_element_i8(&mut self, col: usize, a: i8) {
        let (w, z) = (col / 4, col % 4);
        let (a, zp) = (a as i32, self.zp);
        for (acc, &bw) in self.acc.iter_mut().zip(self.tile.word_row(w)) {
            *acc = acc.wrapping_add(a * (lane_i8(bw, z) as i32 - zp));
        }
    }

    #[inline]
    fn mac_f32(&mut self, k: usize, a: f32) {
        let zp = self.zp as f32;
        let width = self.tile.width;
        let part = &mut self.partials[self.slot * width..(self.slot + 1) * width];
        for (acc, &bw) in part.iter_mut().zip(self.tile.word_row(k)) {
            *acc += a * (f32::from_bits(bw) - zp);
        }
        self.slot = (self.slot + 1) % self.fadd_latency;
    }

    fn finish_row(&mut self, row: usize) -> RawRow {
        let pipeline = (row - self.row_base) % self.counters.issue_slots.len();
        // int8 CSR events group up to four non-zeros per cycle on the lane MACs
        let slots = self.row_words + self.row_elements.div_ceil(self.lanes as u64);
        self.counters.issue_slots[pipeline] += slots;
        self.row_words = 0;
        self.row_elements = 0;

        let values = if self.tile.precision == ElementPrecision::Int8 {
            let out = self.acc.clone();
            self.acc.iter_mut().for_each(|a| *a = 0);
            RawValues::Int(out)
        } else {
            let width = self.tile.width;
            let mut out = self.partials[..width].to_vec();
            for p in 1..self.fadd_latency {
                for (o, &v) in out
                    .iter_mut()
                    .zip(&self.partials[p * width..(p + 1) * width])
                {
                    *o += v;
                }
            }
            self.partials.iter_mut().for_each(|v| *v = 0.0);
            self.slot = 0;
            RawValues::Float(out)
        };
        RawRow { row, values }
    }
}

/// Runs Stage 2 over a complete event stream.
pub fn stage2_compute(
    events: impl IntoIterator<Item = AEvent>,
    tile: &BTile,
    m: usize,
    zero_point_rhs: i8,
    fadd_latency: usize,
) -> Vec<RawRow> {
    let mut stage = ComputeStage::new(tile, m, zero_point_rhs, fadd_latency, 1, 0);
    events.into_iter().filter_map(|ev| stage.push(ev)).collect()
}

/// Output values of one row of one tile after Stage 3.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaledValues {
    Int8(Vec<i8>),
    Int32(Vec<i32>),
    Float32(Vec<f32>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaledRow {
    pub row: usize,
    pub values: ScaledValues,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScaleCounters {
    pub results_scaled: u64,
    pub results_forwarded: u64,
}

/// Stage 3: requantizes int8 accumulators with the row's channel parameters,
/// or forwards raw values untouched.
pub struct ScaleStage<'q> {
    quant: Option<&'q QuantParams>,
    pub counters: ScaleCounters,
}

impl<'q> ScaleStage<'q> {
    pub fn new(quant: Option<&'q QuantParams>) -> Self {
        Self {
            quant,
            counters: ScaleCounters::default(),
        }
    }

    pub fn process(&mut self, raw: RawRow) -> ScaledRow {
        let n = match &raw.values {
            RawValues::Int(v) => v.len(),
            RawValues::Float(v) => v.len(),
        } as u64;
        self.counters.results_forwarded += n;
        let values = match (raw.values, self.quant) {
            (RawValues::Int(v), Some(qp)) => {
                self.counters.results_scaled += n;
                ScaledValues::Int8(
                    v.into_iter()
                        .map(|acc| requantize(RawAccumulator(acc), raw.row, qp))
                        .collect(),
                )
            }
            (RawValues::Int(v), None) => ScaledValues::Int32(v),
            (RawValues::Float(v), _) => ScaledValues::Float32(v),
        };
        ScaledRow {
            row: raw.row,
            values,
        }
    }
}

/// Stage 4 for one core: places tile rows into the core's block of `C`.
pub struct TileAssembler {
    rows: Range<usize>,
    p: usize,
    layout: OutputLayout,
    data: Option<OutputData>,
    pub words_written: u64,
}

impl TileAssembler {
    pub fn new(rows: Range<usize>, p: usize, trans: bool) -> Self {
        Self {
            rows,
            p,
            layout: if trans {
                OutputLayout::ColumnMajor
            } else {
                OutputLayout::RowMajor
            },
            data: None,
            words_written: 0,
        }
    }

    /// Writes `scaled` into columns `columns` of its row.
    pub fn write(&mut self, columns: Range<usize>, scaled: &ScaledRow) {
        let n_local = self.rows.len();
        let len = n_local * self.p;
        let data = self.data.get_or_insert_with(|| match &scaled.values {
            ScaledValues::Int8(_) => OutputData::Int8(vec![0; len]),
            ScaledValues::Int32(_) => OutputData::Int32(vec![0; len]),
            ScaledValues::Float32(_) => OutputData::Float32(vec![0.0; len]),
        });
        let i = scaled.row - self.rows.start;
        let (p, layout) = (self.p, self.layout);
        let at = move |j: usize| match layout {
            OutputLayout::RowMajor => i * p + j,
            OutputLayout::ColumnMajor => j * n_local + i,
        };
        macro_rules! place {
            ($dst:expr, $src:expr) => {{
                for (off, &v) in $src.iter().enumerate() {
                    $dst[at(columns.start + off)] = v;
                }
                $src.len()
            }};
        }
        let written = match (data, &scaled.values) {
            (OutputData::Int8(d), ScaledValues::Int8(s)) => place!(d, s),
            (OutputData::Int32(d), ScaledValues::Int32(s)) => place!(d, s),
            (OutputData::Float32(d), ScaledValues::Float32(s)) => place!(d, s),
            _ => panic!("mixed output kinds within one execution"),
        };
        self.words_written += written as u64;
    }

    pub fn finish(self, kind: OutputKind) -> OutputMatrix {
        let len = self.rows.len() * self.p;
        OutputMatrix {
            rows: self.rows.len(),
            cols: self.p,
            layout: self.layout,
            data: self.data.unwrap_or_else(|| kind.zeros(len)),
        }
    }
}

/// Element kind of `C`, needed when a block receives no rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputKind {
    Int8,
    Int32,
    Float32,
}

impl OutputKind {
    pub(crate) fn zeros(self, len: usize) -> OutputData {
        match self {
            OutputKind::Int8 => OutputData::Int8(vec![0; len]),
            OutputKind::Int32 => OutputData::Int32(vec![0; len]),
            OutputKind::Float32 => OutputData::Float32(vec![0.0; len]),
        }
    }
}

/// Assembles a stream of `(tile columns, row)` pairs covering rows `0..n`.
pub fn stage4_write(
    stream: impl IntoIterator<Item = (Range<usize>, ScaledRow)>,
    n: usize,
    p: usize,
    trans: bool,
    kind: OutputKind,
) -> OutputMatrix {
    let mut asm = TileAssembler::new(0..n, p, trans);
    for (cols, row) in stream {
        asm.write(cols, &row);
    }
    asm.finish(kind)
}

/// Stitches per-core row blocks (in core order) into the full `C`.
pub(crate) fn merge_blocks(
    blocks: Vec<OutputMatrix>,
    n: usize,
    p: usize,
    layout: OutputLayout,
    kind: OutputKind,
) -> OutputMatrix {
    if blocks.len() == 1 {
        return blocks.into_iter().next().expect("one block");
    }
    let mut data = kind.zeros(n * p);
    let mut row0 = 0;
    for block in &blocks {
        for i in 0..block.rows {
            for j in 0..p {
                let dst = match layout {
                    OutputLayout::RowMajor => (row0 + i) * p + j,
                    OutputLayout::ColumnMajor => j * n + row0 + i,
                };
                data.copy_from(dst, &block.data, block.index(i, j));
            }
        }
        row0 += block.rows;
    }
    OutputMatrix {
        rows: n,
        cols: p,
        layout,
        data,
    }
}
