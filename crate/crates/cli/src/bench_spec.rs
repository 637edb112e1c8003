use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use fades_core::{AcceleratorConfig, ElementPrecision, MachineParams};
use serde::{Deserialize, Serialize};

use crate::args::CellArgs;

pub const DEFAULT_SWEEP: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellConfig {
    pub cores: usize,
    pub pes: usize,
    #[serde(default = "one")]
    pub pr: usize,
    #[serde(default)]
    pub trans: bool,
    #[serde(default)]
    pub scale: bool,
}

fn one() -> usize {
    1
}

impl CellConfig {
    pub fn accelerator(&self, precision: ElementPrecision) -> AcceleratorConfig {
        AcceleratorConfig {
            parallel_rows: self.pr,
            trans: self.trans,
            scale: self.scale,
            ..AcceleratorConfig::new(self.cores, self.pes, precision)
        }
    }
}

/// A benchmark description: one shape, every config crossed with every sparsity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSpec {
    pub shape: [usize; 3],
    pub precision: ElementPrecision,
    pub sparsities: Vec<f64>,
    pub configs: Vec<CellConfig>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "one")]
    pub repeat: usize,
    #[serde(default)]
    pub zero_point_rhs: i8,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_seed() -> u64 {
    1
}

impl BenchSpec {
    fn defaults(sparsities: &[f64]) -> Self {
        Self {
            shape: [64, 64, 64],
            precision: ElementPrecision::Int8,
            sparsities: sparsities.to_vec(),
            configs: vec![CellConfig {
                cores: 1,
                pes: 32,
                pr: 1,
                trans: false,
                scale: false,
            }],
            seed: 1,
            repeat: 1,
            zero_point_rhs: 0,
            out: None,
        }
    }

    /// Spec file (if any) overlaid with command-line flags.
    pub fn resolve(
        args: &CellArgs,
        repeat: Option<usize>,
        default_sparsities: &[f64],
    ) -> Result<Self> {
        let mut spec = match &args.spec {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("parsing bench spec {}", path.display()))?
            }
            None => Self::defaults(default_sparsities),
        };
        if let Some(shape) = args.shape {
            spec.shape = shape;
        }
        if let Some(p) = args.precision {
            spec.precision = p.into();
        }
        if !args.sparsity.is_empty() {
            spec.sparsities = args.sparsity.clone();
        }
        if let Some(seed) = args.seed {
            spec.seed = seed;
        }
        if let Some(r) = repeat {
            spec.repeat = r;
        }
        if let Some(zp) = args.zero_point {
            spec.zero_point_rhs = zp;
        }
        if args.out.is_some() {
            spec.out = args.out.clone();
        }
        let overrides = !args.cores.is_empty()
            || !args.pes.is_empty()
            || !args.pr.is_empty()
            || args.trans
            || args.scale;
        if overrides || args.spec.is_none() {
            let pick = |v: &[usize], d: usize| if v.is_empty() { vec![d] } else { v.to_vec() };
            let mut configs = Vec::new();
            for &cores in &pick(&args.cores, 1) {
                for &pes in &pick(&args.pes, 32) {
                    for &pr in &pick(&args.pr, 1) {
                        configs.push(CellConfig {
                            cores,
                            pes,
                            pr,
                            trans: args.trans,
                            scale: args.scale,
                        });
                    }
                }
            }
            spec.configs = configs;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.shape.iter().position(|&d| d == 0) {
            bail!(
                "shape dimension {} is 0; every dimension must be at least 1",
                ["N", "M", "P"][d]
            );
        }
        if self.sparsities.is_empty() {
            bail!("no sparsity values given");
        }
        if let Some(s) = self.sparsities.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            bail!("sparsity {s} is outside [0, 1]");
        }
        if self.configs.is_empty() {
            bail!("no accelerator configurations given");
        }
        if self.repeat == 0 {
            bail!("repeat must be at least 1");
        }
        for c in &self.configs {
            c.accelerator(self.precision).validate()?;
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("fades-out"))
    }

    /// Seed for A at sparsity index `i`; shared by every config so cells compare like for like.
    pub fn a_seed(&self, i: usize) -> u64 {
        self.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(i as u64 + 1)
    }

    pub fn b_seed(&self) -> u64 {
        self.seed
            .wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
            .wrapping_add(0xB)
    }
}

pub fn load_machine_params(path: Option<&Path>) -> Result<MachineParams> {
    match path {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            Ok(MachineParams::from_json(&text)?)
        }
        None => Ok(MachineParams::default()),
    }
}
