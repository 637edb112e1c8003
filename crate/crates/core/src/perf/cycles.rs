use std::fmt;

use serde::{Deserialize, Serialize};

use crate::engine::{AcceleratorConfig, StageTrace, TileTrace, Workload};
use crate::error::{Error, Result};

/// Throughputs and clock of the modeled machine. Rates are words (or
/// results) per cycle per core.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MachineParams {
    pub clock_hz: f64,
    /// Packed `A` value words per cycle.
    pub a_value_words_per_cycle: f64,
    /// CSR column indices per cycle, read concurrently with values.
    pub a_index_words_per_cycle: f64,
    pub b_load_words_per_cycle: f64,
    pub scale_results_per_cycle: f64,
    pub write_results_per_cycle: f64,
    /// Fixed part of the per-tile fill; the float adder latency is added on top.
    pub fill_base_cycles: f64,
    /// Fraction of peak achieved, in (0, 1].
    pub efficiency: f64,
    /// Shared B port slowdown per additional core; 0 means independent ports.
    pub b_port_contention: f64,
}

impl Default for MachineParams {
    fn default() -> Self {
        Self {
            clock_hz: 200e6,
            a_value_words_per_cycle: 4.0,
            a_index_words_per_cycle: 4.0,
            b_load_words_per_cycle: 1.0,
            scale_results_per_cycle: 1.0,
            write_results_per_cycle: 1.0,
            fill_base_cycles: 64.0,
            efficiency: 1.0,
            b_port_contention: 0.0,
        }
    }
}

impl MachineParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("clock_hz", self.clock_hz),
            ("a_value_words_per_cycle", self.a_value_words_per_cycle),
            ("a_index_words_per_cycle", self.a_index_words_per_cycle),
            ("b_load_words_per_cycle", self.b_load_words_per_cycle),
            ("scale_results_per_cycle", self.scale_results_per_cycle),
            ("write_results_per_cycle", self.write_results_per_cycle),
            ("efficiency", self.efficiency),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        if self.efficiency > 1.0 {
            return Err(Error::InvalidParams(format!(
                "efficiency = {} exceeds 1",
                self.efficiency
            )));
        }
        for (name, v) in [
            ("fill_base_cycles", self.fill_base_cycles),
            ("b_port_contention", self.b_port_contention),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} = {v} must be non-negative"
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mp: MachineParams = serde_json::from_str(s)?;
        mp.validate()?;
        Ok(mp)
    }

    pub fn fill_cycles(&self, cfg: &AcceleratorConfig) -> f64 {
        self.fill_base_cycles + cfg.fadd_latency as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Read,
    Compute,
    Scale,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Read => "read",
            Stage::Compute => "compute",
            Stage::Scale => "scale",
            Stage::Write => "write",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TilePerf {
    pub col_begin: usize,
    pub width: usize,
    /// B tile load followed by the `A` stream.
    pub read: f64,
    pub b_load: f64,
    pub compute: f64,
    pub scale: f64,
    pub write: f64,
    pub fill: f64,
    pub cycles: f64,
    pub bottleneck: Stage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorePerf {
    pub core_id: usize,
    pub read: f64,
    pub compute: f64,
    pub scale: f64,
    pub write: f64,
    pub fill: f64,
    pub cycles: f64,
    pub tiles: Vec<TilePerf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub cores: Vec<CorePerf>,
    pub total_cycles: f64,
    pub clock_hz: f64,
    pub efficiency: f64,
    pub wall_time_s: f64,
    pub reconfig_overhead_s: f64,
    pub switches_count: usize,
}

impl PerfReport {
    /// Attaches a reconfiguration overhead to the report.
    pub fn with_reconfig(mut self, overhead_s: f64, switches: usize) -> Self {
        self.reconfig_overhead_s = overhead_s;
        self.switches_count = switches;
        self
    }

    pub fn total_time_s(&self) -> f64 {
        self.wall_time_s + self.reconfig_overhead_s
    }

    /// Stage most often limiting a tile, ties resolved in pipeline order.
    pub fn dominant_bottleneck(&self) -> Option<Stage> {
        let mut counts = [0usize; 4];
        for t in self.cores.iter().flat_map(|c| &c.tiles) {
            counts[t.bottleneck as usize] += 1;
        }
        let best = counts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
        if *best.1 == 0 {
            return None;
        }
        Some([Stage::Read, Stage::Compute, Stage::Scale, Stage::Write][best.0])
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per (core, tile).
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "core,col_begin,width,read,b_load,compute,scale,write,fill,cycles,bottleneck\n",
        );
        for c in &self.cores {
            for t in &c.tiles {
                s.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{}\n",
                    c.core_id,
                    t.col_begin,
                    t.width,
                    t.read,
                    t.b_load,
                    t.compute,
                    t.scale,
                    t.write,
                    t.fill,
                    t.cycles,
                    t.bottleneck
                ));
            }
        }
        s
    }
}

fn tile_perf(t: &TileTrace, mp: &MachineParams, b_rate: f64, fill: f64) -> TilePerf {
    let c = &t.counters;
    let b_load = c.words_loaded_b as f64 / b_rate;
    let a_stream = (t.a_value_words as f64 / mp.a_value_words_per_cycle)
        .max(c.words_read_idx as f64 / mp.a_index_words_per_cycle);
    let read = b_load + a_stream;
    let compute = t.issue_slots.iter().copied().max().unwrap_or(0) as f64;
    let scale = t.results_forwarded as f64 / mp.scale_results_per_cycle;
    let write = c.words_written_c as f64 / mp.write_results_per_cycle;
    let (bottleneck, peak) = [
        (Stage::Read, read),
        (Stage::Compute, compute),
        (Stage::Scale, scale),
        (Stage::Write, write),
    ]
    .into_iter()
    .fold((Stage::Read, f64::NEG_INFINITY), |acc, s| {
        if s.1 > acc.1 {
            s
        } else {
            acc
        }
    });
    TilePerf {
        col_begin: t.col_begin,
        width: t.width,
        read,
        b_load,
        compute,
        scale,
        write,
        fill,
        cycles: peak + fill,
        bottleneck,
    }
}

/// Models the cycles of a traced execution: stages of one tile overlap, so
/// a tile costs its slowest stage plus a fill; tiles of a core run back to
/// back and cores run in parallel.
pub fn estimate_cycles(
    trace: &StageTrace,
    cfg: &AcceleratorConfig,
    mp: &MachineParams,
) -> Result<PerfReport> {
    mp.validate()?;
    cfg.validate()?;
    trace.validate()?;
    if trace.pes != cfg.pes
        || trace.parallel_rows != cfg.parallel_rows
        || trace.cores.len() != cfg.cores
    {
        return Err(Error::InconsistentTrace(format!(
            "trace recorded cores={} pes={} pr={}, configuration has cores={} pes={} pr={}",
            trace.cores.len(),
            trace.pes,
            trace.parallel_rows,
            cfg.cores,
            cfg.pes,
            cfg.parallel_rows
        )));
    }
    let b_rate = mp.b_load_words_per_cycle / (1.0 + mp.b_port_contention * (cfg.cores - 1) as f64);
    let fill = mp.fill_cycles(cfg);
    let cores: Vec<CorePerf> = trace
        .cores
        .iter()
        .map(|core| {
            let tiles: Vec<TilePerf> = core
                .tiles
                .iter()
                .map(|t| tile_perf(t, mp, b_rate, fill))
                .collect();
            let sum = |f: fn(&TilePerf) -> f64| tiles.iter().map(f).sum::<f64>();
            CorePerf {
                core_id: core.core_id,
                read: sum(|t| t.read),
                compute: sum(|t| t.compute),
                scale: sum(|t| t.scale),
                write: sum(|t| t.write),
                fill: sum(|t| t.fill),
                cycles: sum(|t| t.cycles),
                tiles,
            }
        })
        .collect();
    let total_cycles = cores.iter().map(|c| c.cycles).fold(0.0, f64::max);
    Ok(PerfReport {
        cores,
        total_cycles,
        clock_hz: mp.clock_hz,
        efficiency: mp.efficiency,
        wall_time_s: total_cycles / (mp.clock_hz * mp.efficiency),
        reconfig_overhead_s: 0.0,
        switches_count: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticoreEntry {
    pub cores: usize,
    pub pes: usize,
    pub total_cycles: f64,
    pub time_s: f64,
    /// This configuration's time over the first configuration's.
    pub relative_to_first: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MulticoreComparison {
    pub entries: Vec<MulticoreEntry>,
}

impl MulticoreComparison {
    /// Time of configuration `i` over configuration `j`.
    pub fn ratio(&self, i: usize, j: usize) -> f64 {
        self.entries[i].time_s / self.entries[j].time_s
    }
}

/// Models `workload` under each configuration. All configurations must
/// provide the same total PE count.
pub fn compare_multicore(
    workload: &Workload,
    cfgs: &[AcceleratorConfig],
    mp: &MachineParams,
) -> Result<MulticoreComparison> {
    let Some(first) = cfgs.first() else {
        return Ok(MulticoreComparison {
            entries: Vec::new(),
        });
    };
    if let Some(c) = cfgs.iter().find(|c| c.total_pes() != first.total_pes()) {
        return Err(Error::InvalidParams(format!(
            "configurations differ in total PEs: {} vs {}",
            c.total_pes(),
            first.total_pes()
        )));
    }
    let mut entries = Vec::with_capacity(cfgs.len());
    for cfg in cfgs {
        let cfg = AcceleratorConfig {
            precision: workload.precision,
            ..cfg.clone()
        };
        let trace = StageTrace::predict(workload, &cfg)?;
        let report = estimate_cycles(&trace, &cfg, mp)?;
        entries.push(MulticoreEntry {
            cores: cfg.cores,
            pes: cfg.pes,
            total_cycles: report.total_cycles,
            time_s: report.wall_time_s,
            relative_to_first: 0.0,
        });
    }
    let base = entries[0].time_s;
    for e in &mut entries {
        e.relative_to_first = e.time_s / base;
    }
    Ok(MulticoreComparison { entries })
}
