//! Analytical performance model over execution traces, and the cost of
//! switching the datapath between int8 and float.

mod cycles;
mod reconfig;

pub use cycles::{
    compare_multicore, estimate_cycles, CorePerf, MachineParams, MulticoreComparison,
    MulticoreEntry, PerfReport, Stage, TilePerf,
};
pub use reconfig::{
    breakeven_analysis, reconfig_cost, BreakevenEntry, BreakevenReport, ReconfigCost,
    ReconfigParams, ReconfigStrategy, SwitchEvent,
};
