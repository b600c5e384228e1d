//! Experiment configuration: a JSON document merged over per-experiment
//! defaults, with `key.sub=value` overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::couple::KCut;
use crate::error::{Error, Result};
use crate::paths::BmConfig;
use crate::quad::GridSpec;
use crate::tol::Tolerances;

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "CIRCSINE_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Heatkernel,
    CoupleDiag,
    Spectrum,
    Converge,
    Betadep,
    Figure,
    Validate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Heatkernel => "heatkernel",
            Experiment::CoupleDiag => "couple-diag",
            Experiment::Spectrum => "spectrum",
            Experiment::Converge => "converge",
            Experiment::Betadep => "betadep",
            Experiment::Figure => "figure",
            Experiment::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Circ,
    Sine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Replica `r` uses seed `seed + r`.
    pub seed: u64,
    pub replicas: usize,
    /// Single-step coupling replicas (`couple-diag`).
    pub step_replicas: usize,
    pub workers: usize,
    pub beta: f64,
    /// Extra inverse temperatures (`spectrum` on the Sine operator).
    pub betas: Vec<f64>,
    /// `|4/beta - 4/beta_1|` offsets (`betadep`).
    pub deltas: Vec<f64>,
    pub n: Vec<usize>,
    pub operator: Operator,
    /// Also solve Circ spectra by Nyström (`spectrum`).
    pub nystrom: bool,
    /// Eigenvalues `lambda_k` with `-window <= k <= window + 1`.
    pub window: usize,
    pub grid: GridSpec,
    pub k_cut: KCut,
    pub bm: BmConfig,
    pub tol: Tolerances,
    /// Heat-kernel times.
    pub t_grid: Vec<f64>,
    pub r_points: usize,
    /// Beta parameter of the single-step check.
    pub gamma: f64,
    /// Monte Carlo standard errors allowed by statistical checks.
    pub confidence: f64,
    /// Significance level of goodness-of-fit checks.
    pub alpha: f64,
    pub out_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            seed: 1,
            replicas: 50,
            step_replicas: 10_000,
            workers: 1,
            beta: 2.0,
            betas: vec![],
            deltas: vec![],
            n: vec![],
            operator: Operator::Circ,
            nystrom: true,
            window: crate::spectrum::DEFAULT_WINDOW,
            grid: GridSpec { uniform_panels: 512, nodes_per_panel: 4, panels_per_decade: 4 },
            k_cut: KCut::default(),
            bm: BmConfig::default(),
            tol: Tolerances::DEFAULT,
            t_grid: vec![],
            r_points: 200,
            gamma: 10.0,
            confidence: 3.0,
            alpha: 0.01,
            out_dir: PathBuf::from("out"),
        };
        match experiment {
            Experiment::Heatkernel => c.t_grid = vec![0.05, 0.1, 0.2, 0.5, 1.0],
            Experiment::CoupleDiag => {
                c.n = vec![64];
                c.replicas = 2000;
            }
            Experiment::Spectrum => {
                c.n = vec![8];
                c.replicas = 20;
                c.betas = vec![1.0, 2.0, 4.0];
                c.grid = GridSpec { uniform_panels: 256, nodes_per_panel: 8, panels_per_decade: 4 };
            }
            Experiment::Converge => c.n = vec![16, 32, 64, 128, 256, 512],
            Experiment::Betadep => c.deltas = vec![1e-3, 3e-3, 1e-2, 3e-2, 0.1, 0.3],
            Experiment::Figure => {
                c.n = vec![64];
                c.replicas = 1;
            }
            Experiment::Validate => c.replicas = 100,
        }
        c
    }

    /// Defaults, then the JSON document (if any), then the overrides. A run
    /// manifest is accepted in place of a config document.
    pub fn load(experiment: Experiment, file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut v = serde_json::to_value(Self::defaults(experiment)).expect("config serializes");
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
            let mut doc: Value = serde_json::from_str(&text)
                .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
            if doc.get("config_hash").is_some() {
                doc = doc["config"].take();
            }
            merge(&mut v, doc);
        }
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        v["experiment"] = serde_json::to_value(experiment).unwrap();
        let cfg: Self = serde_json::from_value(v).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.beta > 0.0) || self.betas.iter().any(|b| !(*b > 0.0)) {
            return bad("beta must be positive".into());
        }
        if self.n.contains(&0) || self.n.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("n must be positive and strictly increasing, got {:?}", self.n));
        }
        if self.workers == 0 || self.window == 0 || self.r_points == 0 {
            return bad("workers, window and r_points must be positive".into());
        }
        if self.grid.uniform_panels == 0 || self.grid.nodes_per_panel == 0 {
            return bad("grid panels and nodes must be positive".into());
        }
        if !(self.confidence > 0.0) || !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("confidence must be positive and alpha in (0, 1)".into());
        }
        if self.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
            return bad("deltas must lie in (0, 1)".into());
        }
        match self.experiment {
            Experiment::Heatkernel => {
                if self.t_grid.is_empty() {
                    return bad("empty t grid".into());
                }
                if self.t_grid.iter().any(|t| !(*t > 0.0 && *t <= 1.0)) {
                    return bad("heat-kernel times must lie in (0, 1]".into());
                }
            }
            Experiment::Betadep if self.deltas.is_empty() => return bad("empty delta list".into()),
            Experiment::Figure if self.n.len() != 1 => return bad("figure takes a single n".into()),
            Experiment::CoupleDiag | Experiment::Spectrum | Experiment::Converge if self.n.is_empty() => {
                return bad("empty n list".into())
            }
            _ => {}
        }
        if self.replicas == 0 && self.experiment != Experiment::Heatkernel {
            return bad("zero replicas".into());
        }
        if self.experiment == Experiment::CoupleDiag && !(self.gamma >= 1.5) {
            return bad("gamma must be at least 3/2".into());
        }
        Ok(())
    }

    /// Output directory, with the environment override applied.
    pub fn resolved_out_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.out_dir.clone(),
        }
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.replicas as u64).map(move |r| self.seed.wrapping_add(r))
    }

    /// SHA-256 of the canonical JSON form, excluding the output directory.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).unwrap();
        v.as_object_mut().unwrap().remove("out_dir");
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

/// Applies `a.b.c=value`; the value is parsed as JSON and taken as a string
/// otherwise.
pub fn apply_override(v: &mut Value, spec: &str) -> Result<()> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::InvalidArgument(format!("override `{spec}` is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = v;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::InvalidArgument(format!("`{key}`: `{part}` is not inside an object")))?;
        if !obj.contains_key(*part) {
            return Err(Error::InvalidArgument(format!("unknown config key `{key}`")));
        }
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.get_mut(*part).unwrap();
    }
    unreachable!()
}
