//! The clai shell wrapper: everything that touches processes, files and
//! the terminal, around the logic in `clai-core`.

pub mod builtins;
pub mod config;
pub mod dispatch;
pub mod external;
pub mod ingest;
pub mod journal;
pub mod known;
pub mod profiler;
pub mod protocol;
pub mod registry;
pub mod session;
pub mod shell;
pub mod store;

pub use config::Config;
pub use dispatch::{dispatch, ActiveSkill};
pub use registry::Registry;
pub use session::{LineOutcome, PipelineOutcome, Session, SessionIo, Storage};
pub use shell::{ExecutionOutcome, Shell};
