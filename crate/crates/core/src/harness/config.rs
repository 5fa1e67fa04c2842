//! Experiment configuration: a single TOML file, overridable from the
//! command line with dotted key paths, hashed for reproducibility.

use crate::error::{Error, Result};
use crate::hypocoercivity::HypoConstants;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSection,
    pub physics: PhysicsSection,
    #[serde(default)]
    pub stepper: StepperSection,
    #[serde(default)]
    pub hypo: HypoSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub ly: f64,
    pub ny: usize,
    pub kmax: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PhysicsSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    /// "auto" or a fixed step
    #[serde(default = "default_dt")]
    pub dt: DtSpec,
    /// 0 derives the horizon from the experiment kind
    #[serde(default)]
    pub t_end: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_dt() -> DtSpec {
    DtSpec::Named("auto".into())
}

fn default_samples() -> usize {
    400
}

impl Default for StepperSection {
    fn default() -> Self {
        StepperSection {
            dt: default_dt(),
            t_end: 0.0,
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DtSpec {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypoSection {
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_epsilon() -> f64 {
    0.02
}

impl Default for HypoSection {
    fn default() -> Self {
        HypoSection {
            epsilon: default_epsilon(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    LinearDecay,
    FunctionalAudit,
    Identities,
    SemigroupIntegrals,
    ScalingSweep,
    NonlinearThreshold,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::LinearDecay => "linear-decay",
            ExperimentKind::FunctionalAudit => "functional-audit",
            ExperimentKind::Identities => "identities",
            ExperimentKind::SemigroupIntegrals => "semigroup-integrals",
            ExperimentKind::ScalingSweep => "scaling-sweep",
            ExperimentKind::NonlinearThreshold => "nonlinear-threshold",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: ExperimentKind,
    /// x-band for single-mode experiments
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps0_list: Option<Vec<f64>>,
    /// shear component of the threshold datum, fraction of non-shear
    #[serde(default)]
    pub shear_fraction: f64,
    /// physical x-grid; 0 = 4 kmax
    #[serde(default)]
    pub nx: usize,
    /// horizon in units of the relevant decay timescale
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    /// times at which the identity audit runs; empty = defaults
    #[serde(default)]
    pub audit_times: Vec<f64>,
    /// write trajectory checkpoints (nonlinear experiments)
    #[serde(default)]
    pub checkpoints: bool,
}

fn default_horizon() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: String,
}

fn default_dir() -> String {
    "out".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir() }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    /// FNV-1a over the canonical serialization.
    pub fn hash(&self) -> String {
        let text = self.to_toml();
        let mut h: u64 = 0xcbf29ce484222325;
        for b in text.as_bytes() {
            h ^= *b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
        format!("{h:016x}")
    }

    /// Apply one `key=value` override with a dotted key path.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, raw) = spec
            .split_once('=')
            .ok_or_else(|| Error::config(spec, "override must be key=value"))?;
        let mut value: toml::Value = toml::Value::try_from(&*self)
            .map_err(|e| Error::config("config", e.to_string()))?;
        let parts: Vec<&str> = path.split('.').collect();
        let mut cursor = &mut value;
        for part in &parts[..parts.len() - 1] {
            let table = cursor
                .as_table_mut()
                .ok_or_else(|| Error::config(path, "path does not address a table"))?;
            cursor = table
                .entry(part.to_string())
                .or_insert(toml::Value::Table(Default::default()));
        }
        let table = cursor
            .as_table_mut()
            .ok_or_else(|| Error::config(path, "path does not address a table"))?;
        let parsed: toml::Value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|t| t.get("v").cloned())
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        table.insert(parts.last().unwrap().to_string(), parsed);
        *self = value
            .try_into()
            .map_err(|e| Error::config(path, e.to_string()))?;
        Ok(())
    }

    /// Viscosity list: nu_list when present, else the single nu. Duplicates
    /// are removed (first occurrence wins) with a warning.
    pub fn nu_values(&self, warnings: &mut Vec<String>) -> Result<Vec<f64>> {
        let list = match (&self.physics.nu_list, self.physics.nu) {
            (Some(list), _) => list.clone(),
            (None, Some(nu)) => vec![nu],
            (None, None) => {
                return Err(Error::config(
                    "physics.nu",
                    "either nu or nu_list is required",
                ))
            }
        };
        if list.is_empty() {
            return Err(Error::config("physics.nu_list", "empty viscosity list"));
        }
        let mut out: Vec<f64> = Vec::new();
        for v in list {
            if out.contains(&v) {
                warnings.push(format!("duplicate nu = {v} removed"));
            } else {
                out.push(v);
            }
        }
        Ok(out)
    }

    pub fn nx_physical(&self) -> usize {
        if self.experiment.nx == 0 {
            4 * self.grid.kmax
        } else {
            self.experiment.nx
        }
    }

    /// Structural validation with field paths; collects non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.grid.ny < 8 {
            return Err(Error::config("grid.ny", "need at least 8 interior points"));
        }
        if self.grid.kmax < 1 {
            return Err(Error::config("grid.kmax", "need kmax >= 1"));
        }
        if !(self.grid.ly > 0.0) {
            return Err(Error::config("grid.ly", "need ly > 0"));
        }
        let nus = self.nu_values(&mut warnings)?;
        for nu in &nus {
            if !(*nu > 0.0 && *nu < 1.0) {
                return Err(Error::config("physics.nu", format!("need 0 < nu < 1, got {nu}")));
            }
        }
        if let DtSpec::Named(name) = &self.stepper.dt {
            if name != "auto" {
                return Err(Error::config(
                    "stepper.dt",
                    format!("expected \"auto\" or a number, got {name:?}"),
                ));
            }
        }
        if let DtSpec::Fixed(dt) = self.stepper.dt {
            if !(dt > 0.0) {
                return Err(Error::config("stepper.dt", "dt must be positive"));
            }
        }
        HypoConstants::new(self.hypo.epsilon)
            .map_err(|e| Error::config("hypo.epsilon", e.to_string()))?;
        match self.experiment.kind {
            ExperimentKind::LinearDecay
            | ExperimentKind::FunctionalAudit
            | ExperimentKind::Identities => {
                let k = self.experiment.k.unwrap_or(1);
                if k > self.grid.kmax {
                    return Err(Error::config("experiment.k", "k exceeds grid.kmax"));
                }
                if k == 0 && self.experiment.kind == ExperimentKind::FunctionalAudit {
                    return Err(Error::config(
                        "experiment.k",
                        "functional audit needs k >= 1",
                    ));
                }
            }
            ExperimentKind::ScalingSweep => {
                if nus.len() < 4 {
                    return Err(Error::config(
                        "physics.nu_list",
                        "scaling sweep needs >= 4 viscosities",
                    ));
                }
            }
            ExperimentKind::SemigroupIntegrals => {}
            ExperimentKind::NonlinearThreshold => {
                let nx = self.nx_physical();
                let min = 3 * self.grid.kmax + 1;
                if nx < min {
                    return Err(Error::config(
                        "experiment.nx",
                        format!("2/3-rule needs nx >= {min}, got {nx}"),
                    ));
                }
                if self.experiment.eps0.is_none() && self.experiment.eps0_list.is_none() {
                    return Err(Error::config(
                        "experiment.eps0",
                        "nonlinear threshold needs eps0 or eps0_list",
                    ));
                }
            }
        }
        Ok(warnings)
    }

    pub fn eps0_values(&self) -> Vec<f64> {
        match (&self.experiment.eps0_list, self.experiment.eps0) {
            (Some(list), _) => list.clone(),
            (None, Some(e)) => vec![e],
            (None, None) => vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
seed = 7
[grid]
ly = 10.0
ny = 512
kmax = 16
[physics]
nu = 1e-3
[experiment]
kind = "linear-decay"
k = 1
"#,
        )
        .unwrap()
    }

    #[test]
    fn roundtrips_bit_exactly() {
        let cfg = sample();
        let text = cfg.to_toml();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(text, back.to_toml());
        assert_eq!(cfg.hash(), back.hash());
    }

    #[test]
    fn overrides_navigate_dotted_paths() {
        let mut cfg = sample();
        cfg.apply_override("physics.nu=1e-4").unwrap();
        assert_eq!(cfg.physics.nu, Some(1e-4));
        cfg.apply_override("grid.ny=256").unwrap();
        assert_eq!(cfg.grid.ny, 256);
        cfg.apply_override("experiment.kind=functional-audit").unwrap();
        assert_eq!(cfg.experiment.kind, ExperimentKind::FunctionalAudit);
        assert!(cfg.apply_override("nonsense").is_err());
    }

    #[test]
    fn epsilon_out_of_range_is_rejected_at_validation() {
        let mut cfg = sample();
        cfg.experiment.kind = ExperimentKind::FunctionalAudit;
        cfg.hypo.epsilon = 0.05;
        match cfg.validate() {
            Err(Error::Config { path, .. }) => assert_eq!(path, "hypo.epsilon"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn empty_nu_list_is_rejected() {
        let mut cfg = sample();
        cfg.physics.nu = None;
        cfg.physics.nu_list = Some(vec![]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn duplicate_nu_removed_with_warning() {
        let mut cfg = sample();
        cfg.physics.nu = None;
        cfg.physics.nu_list = Some(vec![1e-3, 1e-3, 1e-4]);
        let mut warnings = Vec::new();
        let nus = cfg.nu_values(&mut warnings).unwrap();
        assert_eq!(nus, vec![1e-3, 1e-4]);
        assert_eq!(warnings.len(), 1);
    }

    #[test]
    fn alias_guard_checked_for_nonlinear() {
        let mut cfg = sample();
        cfg.experiment.kind = ExperimentKind::NonlinearThreshold;
        cfg.experiment.eps0 = Some(0.01);
        cfg.experiment.nx = 16; // < 3*16+1
        assert!(cfg.validate().is_err());
        cfg.experiment.nx = 0; // auto = 64
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn hash_changes_with_content() {
        let a = sample();
        let mut b = sample();
        b.seed = 8;
        assert_ne!(a.hash(), b.hash());
    }
}
