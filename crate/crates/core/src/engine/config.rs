use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ElementPrecision;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineMode {
    GemmOnly,
    SpmmOnly,
    /// Accepts dense or CSR `A` and dispatches per call.
    Fused,
}

/// Compile-time shape of the accelerator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AcceleratorConfig {
    /// Independent cores, each taking a contiguous block of `A` rows (1..=4).
    pub cores: usize,
    /// Processing elements per core; also the B tile width (2..=256, power of two).
    pub pes: usize,
    /// Rows of `A` in flight per core (1..=2).
    pub parallel_rows: usize,
    pub mode: EngineMode,
    /// Write `C` column-major.
    pub trans: bool,
    /// Enable int8 requantization. Ignored for float, which always forwards raw sums.
    pub scale: bool,
    pub precision: ElementPrecision,
    /// Interleaved float partial accumulators per PE.
    pub fadd_latency: usize,
    /// Capacity of each inter-stage queue, in row batches.
    pub fifo_depth: usize,
}

impl Default for AcceleratorConfig {
    fn default() -> Self {
        Self {
            cores: 1,
            pes: 32,
            parallel_rows: 1,
            mode: EngineMode::Fused,
            trans: false,
            scale: false,
            precision: ElementPrecision::Int8,
            fadd_latency: 6,
            fifo_depth: 8,
        }
    }
}

impl AcceleratorConfig {
    pub fn new(cores: usize, pes: usize, precision: ElementPrecision) -> Self {
        Self {
            cores,
            pes,
            precision,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(1..=4).contains(&self.cores) {
            return bad(format!("cores = {} outside 1..=4", self.cores));
        }
        if !(2..=256).contains(&self.pes) || !self.pes.is_power_of_two() {
            return bad(format!(
                "pes = {} must be a power of two in 2..=256",
                self.pes
            ));
        }
        if !(1..=2).contains(&self.parallel_rows) {
            return bad(format!(
                "parallel_rows = {} outside 1..=2",
                self.parallel_rows
            ));
        }
        if self.fadd_latency == 0 {
            return bad("fadd_latency must be at least 1".into());
        }
        if self.fifo_depth == 0 {
            return bad("fifo_depth must be at least 1".into());
        }
        Ok(())
    }

    /// Whether Stage 3 actually requantizes.
    pub fn scaling_active(&self) -> bool {
        self.scale && self.precision == ElementPrecision::Int8
    }

    pub fn total_pes(&self) -> usize {
        self.cores * self.pes
    }
}
