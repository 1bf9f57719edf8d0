//! Pipeline configuration: one JSON document with a default for every field.
//!
//! Values are layered as defaults, then the `--config` file, then `--set`
//! overrides such as `graph.theta_iou=0.3` or `lattice.degrees=[1,1,1]`.

use std::path::{Path, PathBuf};

use ffd_recon::graph::GraphParams;
use ffd_recon::mesh::ShapeFamily;
use ffd_recon::pose::AdmmParams;
use ffd_recon::refine::RefineParams;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub paths: Paths,
    pub lattice: LatticeConfig,
    pub graph: GraphParams,
    pub admm: AdmmParams,
    pub refine: RefineParams,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            paths: Paths::default(),
            lattice: LatticeConfig::default(),
            graph: GraphParams::default(),
            admm: AdmmParams::default(),
            refine: RefineParams::default(),
            synth: SynthConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// `<id>.obj` plus `<id>.csv` anchors per model.
    pub models: PathBuf,
    /// Manifest file; sidecar meshes and warps go next to it.
    pub graph: PathBuf,
    /// One directory per test image.
    pub instances: PathBuf,
    /// Per-instance results, mirroring `instances`.
    pub out: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            models: "models".into(),
            graph: "graph/graph.json".into(),
            instances: "instances".into(),
            out: "out".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LatticeConfig {
    /// Bernstein degrees `l, m, n`; `[3, 3, 3]` gives 64 control points.
    pub degrees: [usize; 3],
    /// Lattice padding as a fraction of the bounding box.
    pub margin: f64,
}

impl Default for LatticeConfig {
    fn default() -> Self {
        Self {
            degrees: [3, 3, 3],
            margin: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub family: ShapeFamily,
    /// Family parameters around which members are drawn; empty picks a
    /// built-in shape for the family.
    pub base: Vec<f64>,
    /// Each parameter is scaled by a uniform factor in `1 ± spread`.
    pub spread: f64,
    pub models: usize,
    pub instances: usize,
    pub resolution: usize,
    pub image_size: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            family: ShapeFamily::Box,
            base: Vec::new(),
            spread: 0.3,
            models: 6,
            instances: 2,
            resolution: 4,
            image_size: 128,
        }
    }
}

impl SynthConfig {
    pub fn base_params(&self) -> Vec<f64> {
        if !self.base.is_empty() {
            return self.base.clone();
        }
        match self.family {
            ShapeFamily::Box => vec![1.0, 0.7, 0.5],
            ShapeFamily::Ellipsoid => vec![0.5, 0.4, 0.3],
            ShapeFamily::LBracket => vec![1.0, 1.0, 0.6, 0.15],
        }
    }
}

impl PipelineConfig {
    /// Defaults, then `file`, then each `key.path=value` override.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut doc = serde_json::to_value(Self::default())?;
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Input(format!("cannot read config {}: {e}", path.display()))
            })?;
            let user: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Input(format!("config {}: {e}", path.display())))?;
            merge(&mut doc, user);
        }
        for item in overrides {
            apply_override(&mut doc, item)?;
        }
        let cfg: Self =
            serde_json::from_value(doc).map_err(|e| CliError::Input(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |m: &str| Err(CliError::Input(format!("config: {m}")));
        let g = &self.graph;
        if !(g.theta_dist > 0.0 && g.theta_iou > 0.0 && g.theta > 0.0) {
            return bad("graph thresholds must be positive");
        }
        if self.lattice.degrees.contains(&0) {
            return bad("lattice degrees must be >= 1");
        }
        if !(self.lattice.margin >= 0.0) {
            return bad("lattice margin must be >= 0");
        }
        if !(self.admm.rho > 0.0 && self.admm.gamma >= 0.0) {
            return bad("admm needs rho > 0 and gamma >= 0");
        }
        if !(self.refine.mu >= 0.0 && self.refine.gamma >= 0.0) {
            return bad("refine mu and gamma must be >= 0");
        }
        if self.synth.base_params().len() != self.synth.family.param_count() {
            return bad("synth.base has the wrong number of parameters for the family");
        }
        if !(0.0..1.0).contains(&self.synth.spread) {
            return bad("synth.spread must be in [0, 1)");
        }
        Ok(())
    }
}

/// Recursive object merge; anything else in `patch` replaces `doc`.
fn merge(doc: &mut Value, patch: Value) {
    match (doc, patch) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in b {
                match a.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        a.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// `a.b.c=value`, where `value` is JSON or else taken as a bare string.
fn apply_override(doc: &mut Value, item: &str) -> CliResult<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| CliError::Input(format!("override {item:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut slot = doc;
    for part in key.split('.') {
        slot = slot
            .as_object_mut()
            .and_then(|o| o.get_mut(part))
            .ok_or_else(|| CliError::Input(format!("unknown config key {key:?}")))?;
    }
    *slot = value;
    Ok(())
}
