//! The set of commands the user can run.

use std::ffi::OsStr;
use std::path::Path;

use clai_core::skills::KnownCommands;

#[cfg(unix)]
fn is_executable(path: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    path.metadata()
        .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
        .unwrap_or(false)
}

#[cfg(not(unix))]
fn is_executable(path: &Path) -> bool {
    path.is_file()
}

/// Executables on a search path (in `PATH` syntax) plus shell builtins.
/// Unreadable directories are skipped.
pub fn scan_path(search_path: &OsStr) -> KnownCommands {
    let mut known = KnownCommands::new(std::iter::empty::<String>());
    for dir in std::env::split_paths(search_path) {
        let Ok(entries) = std::fs::read_dir(&dir) else {
            continue;
        };
        for entry in entries.flatten() {
            let path = entry.path();
            if let Some(name) = path.file_name().and_then(OsStr::to_str) {
                if is_executable(&path) {
                    known.insert(name);
                }
            }
        }
    }
    known
}

/// [`scan_path`] over the current `PATH`.
pub fn scan_env_path() -> KnownCommands {
    scan_path(&std::env::var_os("PATH").unwrap_or_default())
}
