use std::io::{BufRead, BufReader};
use std::process::{Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use log::info;

use crate::model::RunStatus;

/// Work units reported by the workload. Never decreases.
#[derive(Debug, Default)]
pub struct WorkCounter {
    completed: AtomicU64,
}

impl WorkCounter {
    pub fn observe(&self, n: u64) {
        self.completed.fetch_max(n, Ordering::SeqCst);
    }

    pub fn get(&self) -> u64 {
        self.completed.load(Ordering::SeqCst)
    }
}

/// Parses a `work_units=<n>` progress line.
pub fn parse_progress(line: &str) -> Option<u64> {
    line.trim().strip_prefix("work_units=")?.trim().parse().ok()
}

/// Runs `command` to completion, feeding progress lines into `counter`.
/// Other stdout lines are logged under the `workload` target.
pub(crate) fn run_workload(command: &[String], counter: Arc<WorkCounter>) -> RunStatus {
    let Some((program, args)) = command.split_first() else {
        return RunStatus::Failed {
            exit_code: None,
            reason: "empty workload command".into(),
        };
    };
    let mut child = match Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .spawn()
    {
        Ok(c) => c,
        Err(e) => {
            return RunStatus::Failed {
                exit_code: None,
                reason: format!("cannot start `{program}`: {e}"),
            }
        }
    };
    let stdout = child.stdout.take().expect("stdout is piped");
    let reader = std::thread::spawn(move || {
        for line in BufReader::new(stdout).lines().map_while(Result::ok) {
            match parse_progress(&line) {
                Some(n) => counter.observe(n),
                None => info!(target: "workload", "{line}"),
            }
        }
    });
    let status = child.wait();
    let _ = reader.join();
    match status {
        Ok(s) if s.success() => RunStatus::Completed,
        Ok(s) => RunStatus::Failed {
            exit_code: s.code(),
            reason: describe(s),
        },
        Err(e) => RunStatus::Failed {
            exit_code: None,
            reason: format!("waiting for workload: {e}"),
        },
    }
}

fn describe(status: ExitStatus) -> String {
    match status.code() {
        Some(c) => format!("workload exited with status {c}"),
        None => "workload terminated by signal".into(),
    }
}
