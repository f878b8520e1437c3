//! Run manifest: a TOML file describing one full attack run.
//!
//! Every section has defaults, so an empty file is a valid (in-process) run.
//! The completed copy written next to the outputs has `seed` resolved and an
//! `[artifacts]` table listing what was produced; feeding it back replays the run.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use apilab_core::attacks::{EvasionMode, HyperParams};
use apilab_core::gan::GanConfig;
use apilab_core::nn::TrainConfig;
use apilab_core::oracle::TargetSpec;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    /// Master seed; stage seeds are derived from it. `None` until resolved.
    pub seed: Option<u64>,
    pub fixture: FixtureSection,
    pub target: TargetSection,
    pub oracle: OracleSection,
    pub split: SplitSection,
    pub attack: AttackSection,
    pub train: TrainConfig,
    pub gan: GanConfig,
    pub evasion: EvasionSection,
    /// Output files of a completed run, relative to the output directory. Ignored on input.
    pub artifacts: BTreeMap<String, String>,
}

impl Default for RunManifest {
    fn default() -> Self {
        Self {
            command: "attack".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: None,
            fixture: FixtureSection::default(),
            target: TargetSection::default(),
            oracle: OracleSection::default(),
            split: SplitSection::default(),
            attack: AttackSection::default(),
            train: TrainConfig {
                epochs: 100,
                learning_rate: 0.5,
                ..TrainConfig::default()
            },
            gan: GanConfig::desk_scale(),
            evasion: EvasionSection::default(),
            artifacts: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureSection {
    /// Existing make-fixtures output directory; when unset the fixture is generated.
    pub dir: Option<PathBuf>,
    pub target_documents: usize,
    pub holdout_documents: usize,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for FixtureSection {
    fn default() -> Self {
        Self {
            dir: None,
            target_documents: 2000,
            holdout_documents: 7000,
            vocab_size: 50,
            seed: 2017,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    /// Existing target file; when unset the target is trained on the fixture.
    pub path: Option<PathBuf>,
    pub spec: TargetSpec,
    pub threshold: f64,
}

impl Default for TargetSection {
    fn default() -> Self {
        Self {
            path: None,
            spec: TargetSpec::NaiveBayes,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleMode {
    /// Calls the service directly.
    InProcess,
    /// Starts a local HTTP server for the run and queries it over the loopback.
    Spawn,
    /// Queries an already running server at `endpoint`.
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleSection {
    pub mode: OracleMode,
    pub endpoint: Option<String>,
    pub limit: u64,
    pub window_seconds: u64,
    /// Separate quota for labelling the test split (in-process and spawn modes).
    pub eval_limit: u64,
}

impl Default for OracleSection {
    fn default() -> Self {
        Self {
            mode: OracleMode::InProcess,
            endpoint: None,
            limit: 1000,
            window_seconds: 86_400,
            eval_limit: 1000,
        }
    }
}

/// Sizes of the consecutive holdout slices, in this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub test: usize,
    pub pool: usize,
    pub causative_candidates: usize,
    pub evasion_candidates: usize,
    pub causative_eval: usize,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            test: 500,
            pool: 1500,
            causative_candidates: 1000,
            evasion_candidates: 1000,
            causative_eval: 3000,
        }
    }
}

impl SplitSection {
    pub fn total(&self) -> usize {
        self.test + self.pool + self.causative_candidates + self.evasion_candidates + self.causative_eval
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackSection {
    pub query_budget: usize,
    pub threshold: f64,
    /// Real samples used for the augmentation sweep (a prefix of the exfiltrated set).
    pub sweep_real: usize,
    pub augmentation_sizes: Vec<usize>,
    /// Hyperparameters of the sweep substitute.
    pub sweep_hyperparams: HyperParams,
    pub grid: Vec<HyperParams>,
    pub causative_p: f64,
    /// Random-flip draws averaged for the causative baseline.
    pub causative_random_draws: usize,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            query_budget: 1000,
            threshold: 0.5,
            sweep_real: 100,
            augmentation_sizes: vec![0, 50, 100, 150, 200, 300],
            sweep_hyperparams: HyperParams::exploratory(),
            grid: vec![
                HyperParams::exploratory(),
                HyperParams {
                    minibatch_size: 10,
                    ..HyperParams::exploratory()
                },
                HyperParams {
                    hidden_layers: 1,
                    ..HyperParams::exploratory()
                },
                HyperParams::augmented(),
            ],
            causative_p: 10.0,
            causative_random_draws: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvasionSection {
    pub mode: EvasionMode,
    pub size: usize,
}

impl Default for EvasionSection {
    fn default() -> Self {
        Self {
            mode: EvasionMode::MaxError,
            size: 100,
        }
    }
}

impl RunManifest {
    /// Parses a manifest; keys it leaves out take their default values, at any depth.
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let bad = |e: &dyn std::fmt::Display| CliError::Manifest(e.to_string());
        let user: toml::Table = toml::from_str(text).map_err(|e| bad(&e))?;
        let mut merged = toml::Table::try_from(Self::default()).map_err(|e| bad(&e))?;
        merge(&mut merged, user, &mut Vec::new());
        toml::Value::Table(merged).try_into().map_err(|e| bad(&e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut manifest = Self::from_toml(&text)?;
        // Relative input paths are relative to the manifest's directory.
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(dir) = &mut manifest.fixture.dir {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
        if let Some(p) = &mut manifest.target.path {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(manifest)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Manifest(m.to_string()));
        if self.attack.query_budget == 0 {
            return bad("attack.query_budget must be at least 1");
        }
        if self.attack.query_budget > self.split.pool {
            return bad("attack.query_budget exceeds split.pool");
        }
        if self.attack.sweep_real == 0 || self.attack.sweep_real > self.attack.query_budget {
            return bad("attack.sweep_real must lie in 1..=query_budget");
        }
        if !(self.attack.threshold > 0.0 && self.attack.threshold < 1.0) {
            return bad("attack.threshold must lie strictly between 0 and 1");
        }
        if !(self.attack.causative_p > 0.0 && self.attack.causative_p <= 100.0) {
            return bad("attack.causative_p must lie in (0, 100]");
        }
        if self.attack.causative_random_draws == 0 {
            return bad("attack.causative_random_draws must be at least 1");
        }
        if self.attack.grid.is_empty() {
            return bad("attack.grid is empty");
        }
        if self.oracle.mode == OracleMode::Remote && self.oracle.endpoint.is_none() {
            return bad("oracle.mode = \"remote\" needs oracle.endpoint");
        }
        if self.oracle.window_seconds == 0 {
            return bad("oracle.window_seconds must be positive");
        }
        if self.split.test == 0 || self.split.causative_eval == 0 {
            return bad("split.test and split.causative_eval must be positive");
        }
        self.gan.validate()?;
        self.train.validate()?;
        Ok(())
    }

    /// Stage seed `k` derived from the master seed.
    pub fn stage_seed(&self, k: u64) -> u64 {
        self.seed
            .expect("seed resolved before running")
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(k)
    }
}

/// Tagged enums: a user table here replaces the default instead of merging into it.
const REPLACED_TABLES: [&[&str]; 2] = [&["target", "spec"], &["evasion", "mode"]];

fn merge(base: &mut toml::Table, user: toml::Table, path: &mut Vec<String>) {
    for (key, value) in user {
        path.push(key.clone());
        let replace = REPLACED_TABLES.iter().any(|p| p.iter().eq(path.iter()));
        match (base.get_mut(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) if !replace => merge(b, u, path),
            (_, value) => {
                base.insert(key, value);
            }
        }
        path.pop();
    }
}

/// `flag`, else `file`, else a fresh random seed.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> u64 {
    flag.or(file).unwrap_or_else(rand::random)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_manifest_is_the_default() {
        let m = RunManifest::from_toml("").unwrap();
        assert_eq!(m, RunManifest::default());
        m.validate().unwrap();
    }

    #[test]
    fn round_trips_through_toml() {
        let mut m = RunManifest { seed: Some(42), ..RunManifest::default() };
        m.artifacts.insert("sweep".into(), "sweep.txt".into());
        m.evasion.mode = EvasionMode::Targeted { from: apilab_core::Label::One, to: apilab_core::Label::Two };
        assert_eq!(RunManifest::from_toml(&m.to_toml()).unwrap(), m);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(RunManifest::from_toml("bogus = 1").is_err());
        let m = RunManifest::from_toml("[attack]\nquery_budget = 0").unwrap();
        assert!(m.validate().is_err());
        let m = RunManifest::from_toml("[oracle]\nmode = \"remote\"").unwrap();
        assert!(m.validate().is_err());
    }

    #[test]
    fn partial_sections_keep_other_defaults() {
        let m = RunManifest::from_toml("[train]\nepochs = 7\n[oracle]\nmode = \"spawn\"").unwrap();
        assert_eq!(m.train.epochs, 7);
        assert_eq!(m.train.learning_rate, RunManifest::default().train.learning_rate);
        assert_eq!(m.oracle.mode, OracleMode::Spawn);
        assert_eq!(m.oracle.limit, 1000);
        let m = RunManifest::from_toml("[evasion.mode]\nmode = \"targeted\"\nfrom = 1\nto = 2").unwrap();
        assert_eq!(m.evasion.mode, EvasionMode::Targeted { from: apilab_core::Label::One, to: apilab_core::Label::Two });
        assert!(RunManifest::from_toml("[train]\nbogus = 1").is_err());
    }

    #[test]
    fn flag_seed_wins_over_file_seed() {
        assert_eq!(resolve_seed(Some(1), Some(2)), 1);
        assert_eq!(resolve_seed(None, Some(2)), 2);
    }
}
