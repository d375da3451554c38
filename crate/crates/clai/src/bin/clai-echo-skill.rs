//! Reference external skill: answers `echo-ai <text>` with `echo <text>`.

use std::io::{BufRead, Write};

fn main() {
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if stdout
            .write_all(clai::protocol::echo_handle(&line).as_bytes())
            .and_then(|_| stdout.flush())
            .is_err()
        {
            break;
        }
    }
}
