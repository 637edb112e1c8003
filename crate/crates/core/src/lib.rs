//! Functional simulator and performance model of a fused sparse/dense
//! matrix-multiply dataflow engine.
//!
//! The engine multiplies a weight matrix `A` (N×M, streamed raw or as CSR)
//! with an activation matrix `B` (M×P, buffered in column tiles) through a
//! four-stage read / compute / scale / write pipeline. Int8 results are
//! bit-exact with the TFLite per-channel requantization pipeline; float
//! results use a fixed interleaved partial-sum order and are deterministic.
//!
//! The [`perf`] module turns an execution's [`StageTrace`] into modeled
//! cycles and prices precision switches between int8 and float datapaths.

pub mod engine;
pub mod error;
pub mod io;
pub mod matrix;
pub mod perf;
pub mod quant;
pub mod reference;

pub use engine::{
    execute, split_across_cores, AOperand, AcceleratorConfig, CoreAssignment, Engine, EngineMode,
    Execution, OutputData, OutputLayout, OutputMatrix, ScaleParams, Schedule, StageCounters,
    StageTrace, TilePlan, Workload,
};
pub use error::{Error, Result};
pub use matrix::{
    generate_matrix, CsrMatrix, DenseMatrix, ElementPrecision, Elements, PackedWordView,
};
pub use perf::{
    breakeven_analysis, compare_multicore, estimate_cycles, reconfig_cost, MachineParams,
    PerfReport, ReconfigParams, ReconfigStrategy,
};
pub use quant::{requantize, rounding_rshift, srdhm, ChannelQuant, QuantParams, RawAccumulator};
