use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::ElementPrecision;

/// How the datapath changes precision between layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ReconfigStrategy {
    /// Partial reconfiguration of the compute region.
    #[serde(rename = "DFX", alias = "dfx")]
    Dfx,
    /// Both datapaths resident; switching is a mode register write.
    #[serde(rename = "VFX", alias = "vfx")]
    Vfx,
    /// Full device reconfiguration.
    #[serde(rename = "FR", alias = "fr")]
    Fr,
}

impl ReconfigStrategy {
    pub const ALL: [ReconfigStrategy; 3] = [
        ReconfigStrategy::Dfx,
        ReconfigStrategy::Vfx,
        ReconfigStrategy::Fr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ReconfigStrategy::Dfx => "DFX",
            ReconfigStrategy::Vfx => "VFX",
            ReconfigStrategy::Fr => "FR",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconfigParams {
    pub strategy: ReconfigStrategy,
    pub partial_bitstream_bytes: f64,
    pub full_bitstream_bytes: f64,
    pub partial_time_s: f64,
    pub full_time_s: f64,
}

impl Default for ReconfigParams {
    fn default() -> Self {
        Self {
            strategy: ReconfigStrategy::Dfx,
            partial_bitstream_bytes: 9e6,
            full_bitstream_bytes: 25e6,
            partial_time_s: 0.030,
            full_time_s: 0.200,
        }
    }
}

impl ReconfigParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("partial_bitstream_bytes", self.partial_bitstream_bytes),
            ("full_bitstream_bytes", self.full_bitstream_bytes),
            ("partial_time_s", self.partial_time_s),
            ("full_time_s", self.full_time_s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        if self.partial_bitstream_bytes >= self.full_bitstream_bytes {
            return Err(Error::InvalidParams(
                "partial bitstream must be smaller than the full one".into(),
            ));
        }
        if self.partial_time_s >= self.full_time_s {
            return Err(Error::InvalidParams(
                "partial reconfiguration must be faster than full".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let rp: ReconfigParams = serde_json::from_str(s)?;
        rp.validate()?;
        Ok(rp)
    }

    pub fn with_strategy(&self, strategy: ReconfigStrategy) -> Self {
        Self {
            strategy,
            ..self.clone()
        }
    }

    /// Seconds and bitstream bytes per precision switch.
    pub fn per_switch(&self) -> (f64, f64) {
        match self.strategy {
            ReconfigStrategy::Dfx => (self.partial_time_s, self.partial_bitstream_bytes),
            ReconfigStrategy::Vfx => (0.0, 0.0),
            ReconfigStrategy::Fr => (self.full_time_s, self.full_bitstream_bytes),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    /// Index of the layer that needs the new precision.
    pub layer: usize,
    pub from: ElementPrecision,
    pub to: ElementPrecision,
    pub overhead_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconfigCost {
    pub strategy: ReconfigStrategy,
    pub switches: usize,
    pub per_switch_s: f64,
    pub total_overhead_s: f64,
    pub bitstream_bytes: f64,
    pub breakdown: Vec<SwitchEvent>,
}

/// Overhead of running the layers of `plan` in order, switching precision
/// wherever consecutive layers differ.
pub fn reconfig_cost(plan: &[ElementPrecision], rp: &ReconfigParams) -> Result<ReconfigCost> {
    rp.validate()?;
    if plan.is_empty() {
        return Err(Error::InvalidParams("precision plan is empty".into()));
    }
    let (per_switch_s, bytes) = rp.per_switch();
    let breakdown: Vec<SwitchEvent> = plan
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0] != w[1])
        .map(|(i, w)| SwitchEvent {
            layer: i + 1,
            from: w[0],
            to: w[1],
            overhead_s: per_switch_s,
        })
        .collect();
    let switches = breakdown.len();
    Ok(ReconfigCost {
        strategy: rp.strategy,
        switches,
        per_switch_s,
        total_overhead_s: switches as f64 * per_switch_s,
        bitstream_bytes: switches as f64 * bytes,
        breakdown,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakevenEntry {
    pub strategy: ReconfigStrategy,
    pub per_switch_s: f64,
    /// Compute time needed between switches for the overhead to stay within budget.
    pub breakeven_compute_per_switch_s: f64,
    pub switches: usize,
    pub compute_s: f64,
    pub overhead_s: f64,
    /// Overhead over total (compute + overhead) time.
    pub overhead_fraction: f64,
    pub within_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakevenReport {
    pub budget: f64,
    pub entries: Vec<BreakevenEntry>,
}

/// For each strategy, the compute time per switch at which reconfiguration
/// takes exactly `budget` of the total, and whether `plan` with the given
/// per-layer compute times stays within it.
pub fn breakeven_analysis(
    layer_times: &[f64],
    plan: &[ElementPrecision],
    rp: &ReconfigParams,
    budget: f64,
) -> Result<BreakevenReport> {
    if !(budget > 0.0 && budget < 1.0) {
        return Err(Error::InvalidParams(format!(
            "budget {budget} must lie in (0, 1)"
        )));
    }
    if layer_times.len() != plan.len() {
        return Err(Error::InvalidParams(format!(
            "{} layer times for {} layers",
            layer_times.len(),
            plan.len()
        )));
    }
    if let Some(t) = layer_times.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::InvalidParams(format!(
            "layer time {t} is not a non-negative number"
        )));
    }
    let compute_s: f64 = layer_times.iter().sum();
    let entries = ReconfigStrategy::ALL
        .iter()
        .map(|&s| {
            let cost = reconfig_cost(plan, &rp.with_strategy(s))?;
            let o = cost.per_switch_s;
            let total = compute_s + cost.total_overhead_s;
            let overhead_fraction = if total > 0.0 {
                cost.total_overhead_s / total
            } else {
                0.0
            };
            Ok(BreakevenEntry {
                strategy: s,
                per_switch_s: o,
                breakeven_compute_per_switch_s: o / budget - o,
                switches: cost.switches,
                compute_s,
                overhead_s: cost.total_overhead_s,
                overhead_fraction,
                within_budget: overhead_fraction <= budget,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BreakevenReport { budget, entries })
}
