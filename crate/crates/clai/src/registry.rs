//! Registered skills and their activation lifecycle.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clai_core::events::{EventError, SkillDescriptor, SkillKind};
use clai_core::intercept::SkillCatalog;
use clai_core::skills::Skill;

use crate::dispatch::ActiveSkill;
use crate::external::{ExternalError, ExternalSkill};

/// Builds an in-process skill. Called on every activation, so expensive
/// setup (corpus loading, model building) happens then and not at startup.
pub type SkillFactory = Arc<dyn Fn() -> Result<Arc<dyn Skill>, String> + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("duplicate skill: {0}")]
    Duplicate(String),
    #[error("unknown skill: {0}")]
    Unknown(String),
    #[error(transparent)]
    Invalid(#[from] EventError),
    #[error("{name}: {source}")]
    External { name: String, source: ExternalError },
    #[error("{name}: activation failed: {reason}")]
    Activation { name: String, reason: String },
}

enum Source {
    Factory(SkillFactory),
    Process { entry: PathBuf, args: Vec<String> },
}

struct Entry {
    descriptor: SkillDescriptor,
    source: Source,
    instance: Option<Arc<dyn Skill>>,
    process: Option<Arc<ExternalSkill>>,
}

/// Summary row for `clai skills`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkillListing {
    pub name: String,
    pub kind: SkillKind,
    pub active: bool,
}

#[derive(Default)]
pub struct Registry {
    entries: Vec<Entry>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list()
            .entries(self.entries.iter().map(|e| &e.descriptor))
            .finish()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    fn insert(
        &mut self,
        mut descriptor: SkillDescriptor,
        source: Source,
    ) -> Result<(), RegistryError> {
        descriptor.validate()?;
        if self.find(&descriptor.name).is_some() {
            return Err(RegistryError::Duplicate(descriptor.name));
        }
        descriptor.active = false;
        self.entries.push(Entry {
            descriptor,
            source,
            instance: None,
            process: None,
        });
        Ok(())
    }

    /// Registers an in-process skill, inactive.
    pub fn register(
        &mut self,
        descriptor: SkillDescriptor,
        factory: SkillFactory,
    ) -> Result<(), RegistryError> {
        if descriptor.kind != SkillKind::InProcess {
            return Err(RegistryError::Activation {
                name: descriptor.name,
                reason: "not an in-process skill".into(),
            });
        }
        self.insert(descriptor, Source::Factory(factory))
    }

    /// Registers an external skill, inactive. The executable is only looked
    /// at when the skill is activated.
    pub fn register_external(
        &mut self,
        descriptor: SkillDescriptor,
        args: Vec<String>,
    ) -> Result<(), RegistryError> {
        descriptor.validate()?;
        let entry = PathBuf::from(descriptor.entry.clone().unwrap_or_default());
        self.insert(descriptor, Source::Process { entry, args })
    }

    fn find(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.descriptor.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.find(name).is_some()
    }

    pub fn is_active(&self, name: &str) -> Option<bool> {
        self.find(name).map(|i| self.entries[i].descriptor.active)
    }

    pub fn descriptor(&self, name: &str) -> Option<&SkillDescriptor> {
        self.find(name).map(|i| &self.entries[i].descriptor)
    }

    pub fn names(&self) -> Vec<String> {
        self.entries
            .iter()
            .map(|e| e.descriptor.name.clone())
            .collect()
    }

    pub fn list(&self) -> Vec<SkillListing> {
        self.entries
            .iter()
            .map(|e| SkillListing {
                name: e.descriptor.name.clone(),
                kind: e.descriptor.kind,
                active: e.descriptor.active,
            })
            .collect()
    }

    /// Starts the skill. Activating an active skill does nothing.
    pub fn activate(&mut self, name: &str) -> Result<(), RegistryError> {
        let idx = self
            .find(name)
            .ok_or_else(|| RegistryError::Unknown(name.to_string()))?;
        let entry = &mut self.entries[idx];
        if entry.descriptor.active {
            return Ok(());
        }
        match &entry.source {
            Source::Factory(factory) => {
                let skill = factory().map_err(|reason| RegistryError::Activation {
                    name: name.to_string(),
                    reason,
                })?;
                entry.instance = Some(skill);
            }
            Source::Process { entry: path, args } => {
                let timeout = Duration::from_millis(entry.descriptor.timeout_ms);
                let skill = ExternalSkill::start(name, path, args, timeout).map_err(|source| {
                    RegistryError::External {
                        name: name.to_string(),
                        source,
                    }
                })?;
                let skill = Arc::new(skill);
                entry.process = Some(Arc::clone(&skill));
                entry.instance = Some(skill);
            }
        }
        entry.descriptor.active = true;
        Ok(())
    }

    /// Stops the skill; an external skill's process is terminated once no
    /// in-flight event holds it any more.
    pub fn deactivate(&mut self, name: &str) -> Result<(), RegistryError> {
        let idx = self
            .find(name)
            .ok_or_else(|| RegistryError::Unknown(name.to_string()))?;
        let entry = &mut self.entries[idx];
        entry.descriptor.active = false;
        entry.instance = None;
        entry.process = None;
        Ok(())
    }

    /// Active skills in registration order.
    pub fn active(&self) -> Vec<ActiveSkill> {
        self.entries
            .iter()
            .filter(|e| e.descriptor.active)
            .filter_map(|e| {
                e.instance.as_ref().map(|skill| ActiveSkill {
                    name: e.descriptor.name.clone(),
                    skill: Arc::clone(skill),
                    timeout_ms: e.descriptor.timeout_ms,
                })
            })
            .collect()
    }

    pub fn active_skill(&self, name: &str) -> Option<ActiveSkill> {
        self.active().into_iter().find(|s| s.name == name)
    }

    /// Deactivates external skills that crashed after their restart and
    /// returns their names.
    pub fn reap_dead(&mut self) -> Vec<String> {
        let dead: Vec<String> = self
            .entries
            .iter()
            .filter(|e| e.process.as_ref().is_some_and(|p| p.is_dead()))
            .map(|e| e.descriptor.name.clone())
            .collect();
        for name in &dead {
            let _ = self.deactivate(name);
        }
        dead
    }
}

impl SkillCatalog for Registry {
    fn skill_status(&self, name: &str) -> Option<bool> {
        self.is_active(name)
    }
}
