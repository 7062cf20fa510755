//! Run configuration: one TOML file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub inputs: Inputs,
    pub thresholds: ThresholdConfig,
    pub targets: TargetConfig,
    pub geo: GeoConfig,
    pub fig2: Fig2Config,
    pub output_dir: Option<PathBuf>,
    /// Reserved; every stage is deterministic.
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Inputs {
    pub occupations: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    pub cbp: Option<PathBuf>,
    pub density: Option<PathBuf>,
    pub national_sizes: Option<PathBuf>,
    pub concordance: Option<PathBuf>,
    pub industry_names: Option<PathBuf>,
    /// Sector exclusion list; hospitals and clinics are excluded when unset.
    pub exclusions: Option<PathBuf>,
    pub region_groups: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MissingContextPolicy {
    #[default]
    Error,
    FailClosed,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdConfig {
    pub cutoff: f64,
    pub frequent_level: u8,
    pub proximity_level: u8,
    pub missing_context: MissingContextPolicy,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            cutoff: 62.5,
            frequent_level: 4,
            proximity_level: 3,
            missing_context: MissingContextPolicy::Error,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub contact_share: f64,
    pub elasticity: f64,
    pub fixed_eps: Option<f64>,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            contact_share: 0.5,
            elasticity: 0.04,
            fixed_eps: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DensitySourceConfig {
    #[default]
    Population,
    Employment,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GeoConfig {
    /// Employment of a 1000+ plant when the national distribution has none.
    pub open_bin_size: f64,
    pub density_source: DensitySourceConfig,
}

impl Default for GeoConfig {
    fn default() -> Self {
        Self {
            open_bin_size: 1500.0,
            density_source: DensitySourceConfig::Population,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Fig2Config {
    pub chi: f64,
    pub eps: f64,
    pub contact_cap: f64,
    pub telecom_cost: Option<f64>,
    pub min_density: f64,
    pub max_density: f64,
    pub points: usize,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Self {
            chi: 0.5,
            eps: 0.5,
            contact_cap: 2.0,
            telecom_cost: Some(0.16),
            min_density: 1.0,
            max_density: 1000.0,
            points: 200,
        }
    }
}

/// A configuration file whose relative paths resolve against its own directory.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub config: RunConfig,
    pub base: PathBuf,
}

/// Problems the user can fix: bad flags, config values or missing files.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

impl Loaded {
    pub fn read(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self {
                config: RunConfig::default(),
                base: PathBuf::from("."),
            });
        };
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, base })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Resolved path of a required input, which must exist.
    pub fn input(&self, name: &str, value: &Option<PathBuf>) -> anyhow::Result<PathBuf> {
        let p = value
            .as_ref()
            .ok_or_else(|| usage(format!("inputs.{name} is not set")))?;
        self.existing(name, p)
    }

    pub fn optional_input(&self, name: &str, value: &Option<PathBuf>) -> anyhow::Result<Option<PathBuf>> {
        value.as_ref().map(|p| self.existing(name, p)).transpose()
    }

    fn existing(&self, name: &str, p: &Path) -> anyhow::Result<PathBuf> {
        let full = self.resolve(p);
        if !full.is_file() {
            bail!(usage(format!("inputs.{name}: {} does not exist", full.display())));
        }
        Ok(full)
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(self.config.output_dir.as_deref().unwrap_or(Path::new("out")))
    }

    /// Range checks on thresholds and targets.
    pub fn validate(&self) -> anyhow::Result<()> {
        let c = &self.config;
        let t = &c.thresholds;
        if !(0.0..=100.0).contains(&t.cutoff) {
            bail!(usage(format!("thresholds.cutoff {} must lie in [0, 100]", t.cutoff)));
        }
        for (name, v) in [("frequent_level", t.frequent_level), ("proximity_level", t.proximity_level)] {
            if !(1..=5).contains(&v) {
                bail!(usage(format!("thresholds.{name} {v} must lie in 1..=5")));
            }
        }
        let share = c.targets.contact_share;
        if !(share > 0.0 && share <= 1.0) {
            bail!(usage(format!("targets.contact_share {share} must lie in (0, 1]")));
        }
        if !(c.targets.elasticity > 0.0 && c.targets.elasticity.is_finite()) {
            bail!(usage(format!("targets.elasticity {} must be > 0", c.targets.elasticity)));
        }
        if let Some(eps) = c.targets.fixed_eps {
            if !(eps > 0.0 && eps.is_finite()) {
                bail!(usage(format!("targets.fixed_eps {eps} must be > 0")));
            }
        }
        if !(c.geo.open_bin_size >= 1000.0 && c.geo.open_bin_size.is_finite()) {
            bail!(usage(format!("geo.open_bin_size {} must be at least 1000", c.geo.open_bin_size)));
        }
        Ok(())
    }

    /// Short hash of the effective configuration, written into every output.
    pub fn hash(&self) -> anyhow::Result<String> {
        let text = toml::to_string(&self.config).context("serializing config")?;
        let digest = Sha256::digest(text.as_bytes());
        Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
    }
}
