//! `reconfig`: switch overheads and breakeven points of a precision plan.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use fades_core::{
    breakeven_analysis, reconfig_cost, ElementPrecision, ReconfigParams, ReconfigStrategy,
};
use serde::{Deserialize, Serialize};

use crate::args::ReconfigArgs;
use crate::report::{self, SCHEMA_VERSION};

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct Layer {
    pub precision: ElementPrecision,
    #[serde(default)]
    pub compute_s: f64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PlanFile {
    Tags(Vec<ElementPrecision>),
    Layers { layers: Vec<Layer> },
}

#[derive(Debug, Serialize)]
pub struct StrategyRow {
    pub strategy: ReconfigStrategy,
    pub switches: usize,
    pub per_switch_s: f64,
    pub total_overhead_s: f64,
    pub bitstream_bytes: f64,
    pub compute_s: f64,
    pub overhead_fraction: f64,
    pub breakeven_compute_per_switch_s: f64,
    pub within_budget: bool,
}

#[derive(Serialize)]
struct ReconfigReport<'a> {
    schema_version: u32,
    command: &'static str,
    params: &'a ReconfigParams,
    budget: f64,
    layers: &'a [Layer],
    strategies: &'a [StrategyRow],
}

pub fn load_plan(path: &PathBuf) -> Result<Vec<Layer>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let plan: PlanFile = serde_json::from_str(&text)
        .with_context(|| format!("malformed plan {}", path.display()))?;
    Ok(match plan {
        PlanFile::Tags(tags) => tags
            .into_iter()
            .map(|precision| Layer {
                precision,
                compute_s: 0.0,
            })
            .collect(),
        PlanFile::Layers { layers } => layers,
    })
}

pub fn alternating(n: usize, compute_s: f64) -> Vec<Layer> {
    (0..n)
        .map(|i| Layer {
            precision: if i % 2 == 0 {
                ElementPrecision::Int8
            } else {
                ElementPrecision::Float32
            },
            compute_s,
        })
        .collect()
}

pub fn reconfig(args: &ReconfigArgs) -> Result<()> {
    let layers = match (&args.plan, args.alternate) {
        (Some(p), _) => load_plan(p)?,
        (None, Some(n)) => alternating(n, args.layer_time),
        (None, None) => bail!("give --plan or --alternate"),
    };
    if layers.is_empty() {
        bail!("plan has no layers");
    }
    let params = match &args.reconfig_params {
        Some(p) => ReconfigParams::from_json(
            &std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        )?,
        None => ReconfigParams::default(),
    };
    let plan: Vec<ElementPrecision> = layers.iter().map(|l| l.precision).collect();
    let times: Vec<f64> = layers.iter().map(|l| l.compute_s).collect();
    let breakeven = breakeven_analysis(&times, &plan, &params, args.budget)?;
    let rows = breakeven
        .entries
        .iter()
        .map(|e| {
            let cost = reconfig_cost(&plan, &params.with_strategy(e.strategy))?;
            Ok(StrategyRow {
                strategy: e.strategy,
                switches: cost.switches,
                per_switch_s: cost.per_switch_s,
                total_overhead_s: cost.total_overhead_s,
                bitstream_bytes: cost.bitstream_bytes,
                compute_s: e.compute_s,
                overhead_fraction: e.overhead_fraction,
                breakeven_compute_per_switch_s: e.breakeven_compute_per_switch_s,
                within_budget: e.within_budget,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = ReconfigReport {
        schema_version: SCHEMA_VERSION,
        command: "reconfig",
        params: &params,
        budget: args.budget,
        layers: &layers,
        strategies: &rows,
    };
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("fades-out"));
    let written = report::write_report(&dir, "reconfig", &report, &rows)?;
    report::print(&written, args.format);
    Ok(())
}
