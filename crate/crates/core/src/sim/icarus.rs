// SPDX-License-Identifier: Apache-2.0

//! Icarus Verilog harness: compile with `iverilog`, run with `vvp`.

use std::env;
use std::ffi::OsString;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::Duration;

use wait_timeout::ChildExt;

use super::{InfrastructureError, PassCountProtocol, SampleSlot, Simulator};
use crate::domain::{CodeSample, Task, TestOutcome};

#[derive(Debug, Clone)]
pub struct IcarusConfig {
    /// `iverilog` executable; a bare name is looked up on `PATH`.
    pub iverilog: PathBuf,
    pub extra_flags: Vec<String>,
    pub timeout: Duration,
    pub scratch_root: PathBuf,
    pub protocol: PassCountProtocol,
}

impl IcarusConfig {
    pub fn new(scratch_root: impl Into<PathBuf>) -> Self {
        Self {
            iverilog: PathBuf::from("iverilog"),
            extra_flags: vec!["-g2012".into()],
            timeout: Duration::from_secs(60),
            scratch_root: scratch_root.into(),
            protocol: PassCountProtocol::default(),
        }
    }
}

#[derive(Debug)]
pub struct IcarusSimulator {
    iverilog: PathBuf,
    vvp: PathBuf,
    config: IcarusConfig,
}

/// Resolve an executable the way a shell would.
pub fn find_executable(name: &Path) -> Option<PathBuf> {
    if name.components().count() > 1 {
        return name.is_file().then(|| name.to_path_buf());
    }
    let path: OsString = env::var_os("PATH")?;
    env::split_paths(&path).map(|dir| dir.join(name)).find(|p| p.is_file())
}

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with('.') {
        format!("_{s}")
    } else {
        s
    }
}

enum Run {
    Finished { status: ExitStatus, output: String },
    TimedOut { output: String },
}

fn run_with_timeout(cmd: &mut Command, timeout: Duration) -> std::io::Result<Run> {
    let mut child = cmd.stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn()?;
    let mut stdout = child.stdout.take().expect("piped");
    let mut stderr = child.stderr.take().expect("piped");
    let out_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let err_reader = thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });
    let status = child.wait_timeout(timeout)?;
    let timed_out = status.is_none();
    if timed_out {
        let _ = child.kill();
        let _ = child.wait();
    }
    let mut output = out_reader.join().unwrap_or_default();
    output.push_str(&err_reader.join().unwrap_or_default());
    Ok(match status {
        Some(status) => Run::Finished { status, output },
        None => Run::TimedOut { output },
    })
}

impl IcarusSimulator {
    /// Locate `iverilog` and its sibling `vvp`.
    pub fn new(config: IcarusConfig) -> Result<Self, InfrastructureError> {
        let iverilog = find_executable(&config.iverilog)
            .ok_or_else(|| InfrastructureError(format!("{} not found", config.iverilog.display())))?;
        let sibling = iverilog.with_file_name("vvp");
        let vvp = if sibling.is_file() {
            sibling
        } else {
            find_executable(Path::new("vvp")).ok_or_else(|| InfrastructureError("vvp not found".into()))?
        };
        Ok(Self { iverilog, vvp, config })
    }

    pub fn sample_dir(&self, task: &Task, slot: SampleSlot) -> PathBuf {
        self.config.scratch_root.join(sanitize(&task.id)).join(slot.index.to_string())
    }
}

impl Simulator for IcarusSimulator {
    fn run_testbench(&self, code: &CodeSample, task: &Task, slot: SampleSlot) -> Result<TestOutcome, InfrastructureError> {
        let dir = self.sample_dir(task, slot);
        let infra = |what: &str, e: std::io::Error| InfrastructureError(format!("{what} {}: {e}", dir.display()));
        fs::create_dir_all(&dir).map_err(|e| infra("creating", e))?;
        fs::write(dir.join("candidate.v"), &code.verilog_src).map_err(|e| infra("writing candidate in", e))?;
        fs::write(dir.join("tb.v"), &task.testbench_src).map_err(|e| infra("writing testbench in", e))?;
        let log_path = dir.join("sim.out");

        let mut compile = Command::new(&self.iverilog);
        compile
            .current_dir(&dir)
            .args(&self.config.extra_flags)
            .args(["-o", "sim.vvp", "candidate.v", "tb.v"]);
        let compiled = run_with_timeout(&mut compile, self.config.timeout).map_err(|e| infra("running iverilog in", e))?;
        match compiled {
            Run::Finished { status, output } if !status.success() => {
                let _ = fs::write(&log_path, output);
                return Ok(TestOutcome::compile_error());
            }
            Run::TimedOut { output } => {
                let _ = fs::write(&log_path, output);
                return Ok(TestOutcome::compile_error());
            }
            Run::Finished { .. } => {}
        }

        let mut sim = Command::new(&self.vvp);
        sim.current_dir(&dir).args(["-n", "sim.vvp"]);
        let ran = run_with_timeout(&mut sim, self.config.timeout).map_err(|e| infra("running vvp in", e))?;
        let (outcome, output) = match ran {
            Run::TimedOut { output } => (TestOutcome::timeout(), output),
            Run::Finished { status, output } => (self.config.protocol.outcome(&output, status.success()), output),
        };
        fs::write(&log_path, output).map_err(|e| infra("writing log in", e))?;
        Ok(outcome)
    }
}
