//! Per-stage event counts recorded during execution, and their closed-form
//! prediction from shapes and per-row non-zero counts.

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::config::AcceleratorConfig;
use super::split::split_rows;
use super::tiling::TilePlan;
use crate::error::{Error, Result};
use crate::matrix::ElementPrecision;

/// Event counts of the four stages. `words_read_a` counts packed words for
/// dense `A` and non-zero values for CSR; `words_written_c` counts output
/// elements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounters {
    pub words_read_a: u64,
    pub words_read_idx: u64,
    pub words_loaded_b: u64,
    pub mac_ops: u64,
    pub lanes_active: u64,
    pub results_scaled: u64,
    pub words_written_c: u64,
}

impl AddAssign<&StageCounters> for StageCounters {
    fn add_assign(&mut self, o: &StageCounters) {
        self.words_read_a += o.words_read_a;
        self.words_read_idx += o.words_read_idx;
        self.words_loaded_b += o.words_loaded_b;
        self.mac_ops += o.mac_ops;
        self.lanes_active += o.lanes_active;
        self.results_scaled += o.results_scaled;
        self.words_written_c += o.words_written_c;
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileTrace {
    pub col_begin: usize,
    pub width: usize,
    pub rows: usize,
    pub counters: StageCounters,
    /// `A` value traffic in packed words; CSR values pack `lanes` per word.
    pub a_value_words: u64,
    /// Compute issue cycles, one entry per row pipeline.
    pub issue_slots: Vec<u64>,
    pub results_forwarded: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreTrace {
    pub core_id: usize,
    pub row_begin: usize,
    pub row_end: usize,
    pub tiles: Vec<TileTrace>,
}

impl CoreTrace {
    pub fn totals(&self) -> StageCounters {
        let mut t = StageCounters::default();
        for tile in &self.tiles {
            t += &tile.counters;
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageTrace {
    pub precision: ElementPrecision,
    pub sparse_a: bool,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub pes: usize,
    pub parallel_rows: usize,
    pub cores: Vec<CoreTrace>,
}

/// Problem description sufficient to predict a trace without running it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub precision: ElementPrecision,
    /// Per-row non-zero counts when `A` is streamed as CSR.
    pub row_nnz: Option<Vec<u32>>,
}

impl Workload {
    pub fn dense(n: usize, m: usize, p: usize, precision: ElementPrecision) -> Self {
        Self {
            n,
            m,
            p,
            precision,
            row_nnz: None,
        }
    }

    pub fn sparse(m: usize, p: usize, precision: ElementPrecision, row_nnz: Vec<u32>) -> Self {
        Self {
            n: row_nnz.len(),
            m,
            p,
            precision,
            row_nnz: Some(row_nnz),
        }
    }

    /// CSR workload whose rows each hold `round(m * (1 - sparsity))` non-zeros.
    pub fn uniform_sparse(
        n: usize,
        m: usize,
        p: usize,
        precision: ElementPrecision,
        sparsity: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&sparsity) {
            return Err(Error::InvalidSparsity(sparsity));
        }
        let per_row = (m as f64 * (1.0 - sparsity)).round() as u32;
        Ok(Self::sparse(m, p, precision, vec![per_row; n]))
    }

    pub fn total_nnz(&self) -> u64 {
        match &self.row_nnz {
            Some(r) => r.iter().map(|&x| x as u64).sum(),
            None => (self.n * self.m) as u64,
        }
    }
}

impl StageTrace {
    /// Counts an execution of `w` under `cfg` must produce.
    pub fn predict(w: &Workload, cfg: &AcceleratorConfig) -> Result<StageTrace> {
        cfg.validate()?;
        if let Some(r) = &w.row_nnz {
            if r.len() != w.n {
                return Err(Error::ShapeMismatch(format!(
                    "{} row counts for {} rows",
                    r.len(),
                    w.n
                )));
            }
            if let Some(bad) = r.iter().find(|&&x| x as usize > w.m) {
                return Err(Error::ShapeMismatch(format!(
                    "row has {bad} non-zeros but only {} columns",
                    w.m
                )));
            }
        }
        if w.p == 0 {
            return Err(Error::ShapeMismatch("p must be at least 1".into()));
        }
        let lanes = w.precision.lanes() as u64;
        let m = w.m as u64;
        let words_per_row = m.div_ceil(lanes);
        let scaled = cfg.scaling_active() && w.precision == cfg.precision;
        let plan = TilePlan::new(w.p, cfg.pes);

        let cores = split_rows(w.n, cfg.cores)
            .into_iter()
            .map(|a| {
                let rows = a.rows.len() as u64;
                // (values, value words, issue slots per pipeline)
                let mut nnz = 0u64;
                let mut value_words = 0u64;
                let mut slots = vec![0u64; cfg.parallel_rows];
                for (local, row) in a.rows.clone().enumerate() {
                    let (v, vw) = match &w.row_nnz {
                        Some(r) => (r[row] as u64, (r[row] as u64).div_ceil(lanes)),
                        None => (words_per_row, words_per_row),
                    };
                    nnz += v;
                    value_words += vw;
                    slots[local % cfg.parallel_rows] += vw;
                }
                let tiles = plan
                    .tiles()
                    .map(|cols| {
                        let width = cols.len() as u64;
                        let (mac_ops, lanes_active, idx) = match &w.row_nnz {
                            Some(_) => (nnz * width, nnz * width, nnz),
                            None => (rows * words_per_row * lanes * width, rows * m * width, 0),
                        };
                        TileTrace {
                            col_begin: cols.start,
                            width: cols.len(),
                            rows: rows as usize,
                            counters: StageCounters {
                                words_read_a: nnz,
                                words_read_idx: idx,
                                words_loaded_b: words_per_row * width,
                                mac_ops,
                                lanes_active,
                                results_scaled: if scaled { rows * width } else { 0 },
                                words_written_c: rows * width,
                            },
                            a_value_words: value_words,
                            issue_slots: slots.clone(),
                            results_forwarded: rows * width,
                        }
                    })
                    .collect();
                CoreTrace {
                    core_id: a.core_id,
                    row_begin: a.rows.start,
                    row_end: a.rows.end,
                    tiles,
                }
            })
            .collect();

        Ok(StageTrace {
            precision: w.precision,
            sparse_a: w.row_nnz.is_some(),
            n: w.n,
            m: w.m,
            p: w.p,
            pes: cfg.pes,
            parallel_rows: cfg.parallel_rows,
            cores,
        })
    }

    pub fn totals(&self) -> StageCounters {
        let mut t = StageCounters::default();
        for c in &self.cores {
            t += &c.totals();
        }
        t
    }

    pub fn tile_count(&self) -> usize {
        self.cores.first().map_or(0, |c| c.tiles.len())
    }

    /// Checks internal consistency: core blocks partition `0..n`, every core
    /// sees the same tiles covering `0..p`, and counts agree with the shape.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InconsistentTrace(msg));
        if self.cores.is_empty() {
            return bad("no cores".into());
        }
        if self.pes == 0 || self.parallel_rows == 0 {
            return bad("pes and parallel_rows must be positive".into());
        }
        let lanes = self.precision.lanes() as u64;
        let word_rows = (self.m as u64).div_ceil(lanes);
        let mut next_row = 0;
        for core in &self.cores {
            if core.row_begin != next_row || core.row_end < core.row_begin {
                return bad(format!(
                    "core {} rows {}..{} do not continue at {next_row}",
                    core.core_id, core.row_begin, core.row_end
                ));
            }
            next_row = core.row_end;
            let rows = core.row_end - core.row_begin;
            let mut next_col = 0;
            for tile in &core.tiles {
                if tile.col_begin != next_col || tile.width == 0 || tile.width > self.pes {
                    return bad(format!(
                        "core {} tile at column {} width {}",
                        core.core_id, tile.col_begin, tile.width
                    ));
                }
                next_col += tile.width;
                if tile.rows != rows {
                    return bad(format!(
                        "core {} tile rows {} != {rows}",
                        core.core_id, tile.rows
                    ));
                }
                if tile.issue_slots.len() != self.parallel_rows {
                    return bad(format!(
                        "{} issue slot entries for {} row pipelines",
                        tile.issue_slots.len(),
                        self.parallel_rows
                    ));
                }
                let c = &tile.counters;
                let cells = (rows * tile.width) as u64;
                if c.words_written_c != cells
                    || tile.results_forwarded != cells
                    || c.results_scaled > cells
                {
                    return bad(format!(
                        "core {} tile at column {} output counts disagree with {rows}x{}",
                        core.core_id, tile.col_begin, tile.width
                    ));
                }
                if c.words_loaded_b != word_rows * tile.width as u64 {
                    return bad(format!(
                        "B load of {} words, expected {}",
                        c.words_loaded_b,
                        word_rows * tile.width as u64
                    ));
                }
                if self.sparse_a && c.words_read_idx != c.words_read_a {
                    return bad("sparse index and value reads differ".into());
                }
                if !self.sparse_a && c.words_read_idx != 0 {
                    return bad("dense operand reported index reads".into());
                }
            }
            if next_col != self.p {
                return bad(format!(
                    "core {} tiles cover {next_col} of {} columns",
                    core.core_id, self.p
                ));
            }
        }
        if next_row != self.n {
            return bad(format!("cores cover {next_row} of {} rows", self.n));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_prediction_counts() {
        let cfg = AcceleratorConfig::new(1, 32, ElementPrecision::Int8);
        let t =
            StageTrace::predict(&Workload::dense(4, 10, 49, ElementPrecision::Int8), &cfg).unwrap();
        assert_eq!(t.tile_count(), 2);
        let tot = t.totals();
        // 3 words per row, 4 rows, 2 tiles
        assert_eq!(tot.words_read_a, 24);
        assert_eq!(tot.words_loaded_b, 3 * 49);
        assert_eq!(tot.lanes_active, 4 * 10 * 49);
        assert_eq!(tot.mac_ops, 4 * 12 * 49);
        assert_eq!(tot.words_written_c, 4 * 49);
        t.validate().unwrap();
    }

    #[test]
    fn sparse_issue_slots_split_by_row_parity() {
        let cfg = AcceleratorConfig {
            parallel_rows: 2,
            ..AcceleratorConfig::new(1, 4, ElementPrecision::Int8)
        };
        let w = Workload::sparse(16, 4, ElementPrecision::Int8, vec![5, 1, 8, 0]);
        let t = StageTrace::predict(&w, &cfg).unwrap();
        assert_eq!(t.cores[0].tiles[0].issue_slots, vec![2 + 2, 1]);
        assert_eq!(t.cores[0].tiles[0].a_value_words, 2 + 1 + 2);
        assert_eq!(t.totals().words_read_idx, 14);
    }

    #[test]
    fn validate_catches_gaps() {
        let cfg = AcceleratorConfig::new(2, 32, ElementPrecision::Float32);
        let mut t =
            StageTrace::predict(&Workload::dense(10, 8, 40, ElementPrecision::Float32), &cfg)
                .unwrap();
        t.validate().unwrap();
        t.cores[1].row_begin += 1;
        assert!(t.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let cfg = AcceleratorConfig::default();
        let t =
            StageTrace::predict(&Workload::dense(3, 3, 3, ElementPrecision::Int8), &cfg).unwrap();
        assert_eq!(StageTrace::from_json(&t.to_json().unwrap()).unwrap(), t);
    }
}
