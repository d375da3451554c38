//! Core of the clai shell assistant.
//!
//! Everything here needs only an allocator: event types, interception of
//! typed lines, the orchestrators, TF-IDF retrieval and the logic of the
//! built-in skills. Processes, files and clocks live in the `clai` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod edit;
pub mod events;
pub mod intercept;
pub mod linalg;
pub mod orchestration;
pub mod profile;
pub mod retrieval;
pub mod skills;

pub use events::{
    Action, ActionSequence, DecisionRecord, EventError, FeedbackEvent, Phase, SkillConfidence,
    SkillDescriptor, SkillKind, SkillResponse, TerminalState, UserResponse, NOOP,
};
pub use intercept::{
    intercept, Directive, DirectiveKind, InterceptError, MetaCommand, SkillCatalog,
};
pub use orchestration::{Orchestrator, OrchestratorChoice, OrchestratorMode};
pub use skills::{Skill, SkillError};
