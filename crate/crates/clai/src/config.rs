//! User configuration and on-disk locations.

use std::path::{Path, PathBuf};

use clai_core::events::DEFAULT_SKILL_TIMEOUT_MS;
use clai_core::orchestration::{
    OrchestratorMode, PreferenceError, PreferenceOrder, WarmStartError, WarmStartProfile,
    DEFAULT_ALPHA,
};
use serde::{Deserialize, Serialize};

/// Threshold applied by the max and threshold orchestrators until feedback
/// moves it. A distance-2 fixit suggestion (0.6) clears it; a translation
/// with a defaulted slot (0.5) does not.
pub const DEFAULT_THRESHOLD: f64 = 0.6;

/// Free bandit slots reserved for skills registered after the bandit was
/// first created.
pub const SPARE_BANDIT_SLOTS: usize = 4;

pub const BUILTIN_SKILLS: [&str; 5] = ["fixit", "manx", "nlc2cmd", "howdoi", "helpme"];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write config {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("unknown orchestrator `{0}`")]
    Orchestrator(String),
    #[error(transparent)]
    WarmStart(#[from] WarmStartError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalSkillConfig {
    pub name: String,
    pub entry: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_ms: u64,
}

/// A warm-start profile written either as a name (`"ignore-skill:manx"`) or
/// as an object (`{"profile":"ignore-skill","skills":["manx"]}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WarmStartSetting {
    Name(String),
    Profile(WarmStartProfile),
}

impl WarmStartSetting {
    pub fn profile(&self) -> Result<WarmStartProfile, WarmStartError> {
        match self {
            Self::Name(name) => WarmStartProfile::parse(name),
            Self::Profile(p) => Ok(p.clone()),
        }
    }
}

fn default_timeout() -> u64 {
    DEFAULT_SKILL_TIMEOUT_MS
}

fn default_active() -> Vec<String> {
    BUILTIN_SKILLS.iter().map(|s| s.to_string()).collect()
}

fn default_orchestrator() -> String {
    OrchestratorMode::Max.as_str().to_string()
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

fn default_warm_start() -> Option<WarmStartSetting> {
    Some(WarmStartSetting::Name("max-orchestrator".to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_active")]
    pub active_skills: Vec<String>,
    #[serde(default = "default_orchestrator")]
    pub orchestrator: String,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_warm_start")]
    pub warm_start: Option<WarmStartSetting>,
    #[serde(default)]
    pub auto_execute: bool,
    #[serde(default = "default_timeout")]
    pub skill_timeout_ms: u64,
    /// Pairs `[preferred, other]` for the preference orchestrator.
    #[serde(default)]
    pub preferences: Vec<(String, String)>,
    #[serde(default)]
    pub external_skills: Vec<ExternalSkillConfig>,
    #[serde(default = "default_alpha")]
    pub bandit_alpha: f64,
    /// Plain-text man pages, one file per command. Defaults to the bundled set.
    #[serde(default)]
    pub man_dir: Option<PathBuf>,
    /// Q&A posts as JSON lines. Defaults to the bundled set.
    #[serde(default)]
    pub qa_path: Option<PathBuf>,
    /// Extra fixit tables (JSON `FixRules`) replacing the shipped ones.
    #[serde(default)]
    pub fix_rules_path: Option<PathBuf>,
    /// nlc2cmd templates (JSON list of `CommandTemplate`) replacing the shipped table.
    #[serde(default)]
    pub templates_path: Option<PathBuf>,
    /// Where the journal, bandit state and model cache live.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let config: Self = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_owned(),
            source,
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Like [`Config::load`], but a missing file yields the defaults.
    pub fn load_or_default(path: &Path) -> Result<Self, ConfigError> {
        if path.exists() {
            Self::load(path)
        } else {
            Ok(Self::default())
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        let write = |source| ConfigError::Write {
            path: path.to_owned(),
            source,
        };
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(write)?;
        }
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text + "\n").map_err(write)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.mode()?;
        self.warm_start_profile()?;
        self.preference_order()?;
        Ok(())
    }

    pub fn mode(&self) -> Result<OrchestratorMode, ConfigError> {
        self.orchestrator
            .parse()
            .map_err(|_| ConfigError::Orchestrator(self.orchestrator.clone()))
    }

    pub fn warm_start_profile(&self) -> Result<Option<WarmStartProfile>, ConfigError> {
        Ok(self
            .warm_start
            .as_ref()
            .map(WarmStartSetting::profile)
            .transpose()?)
    }

    pub fn preference_order(&self) -> Result<PreferenceOrder, ConfigError> {
        Ok(PreferenceOrder::new(self.preferences.clone())?)
    }

    pub fn man_dir(&self) -> PathBuf {
        self.man_dir
            .clone()
            .unwrap_or_else(|| fixture_dir().join("man"))
    }

    pub fn qa_path(&self) -> PathBuf {
        self.qa_path
            .clone()
            .unwrap_or_else(|| fixture_dir().join("qa.jsonl"))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data_dir.clone().unwrap_or_else(default_data_dir)
    }

    pub fn journal_path(&self) -> PathBuf {
        self.data_dir().join("journal.jsonl")
    }

    pub fn bandit_path(&self) -> PathBuf {
        self.data_dir().join("bandit.json")
    }

    pub fn model_cache_dir(&self) -> PathBuf {
        self.data_dir().join("models")
    }
}

/// The corpora shipped with the crate.
pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn home() -> PathBuf {
    std::env::var_os("HOME")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."))
}

pub fn default_config_path() -> PathBuf {
    std::env::var_os("XDG_CONFIG_HOME")
        .map(PathBuf::from)
        .unwrap_or_else(|| home().join(".config"))
        .join("clai")
        .join("config.json")
}

pub fn default_data_dir() -> PathBuf {
    std::env::var_os("XDG_DATA_HOME")
        .map(PathBuf::from)
        .unwrap_or_else(|| home().join(".local").join("share"))
        .join("clai")
}
