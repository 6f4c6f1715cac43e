//! Bridge to the external CAD script runner.
//!
//! The runner is a separate process speaking one JSON object per line: a
//! [`RunRequest`] on stdin, a [`RunResult`] on stdout. Exit code 2 means the
//! runner could not understand a request. Results can also be served from a
//! [`ResultStore`] keyed by the script's SHA-256, which is how experiments
//! are re-scored without executing anything.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{read_json, write_json};
use crate::error::{Error, Result};
use crate::geometry::GeometryArtifact;

/// Why a generated script failed: malformed response or syntax (I),
/// misuse of the CAD API (II), or a geometry-kernel error (III).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FailureClass {
    TypeI,
    TypeII,
    TypeIII,
}

impl FailureClass {
    pub const ALL: [FailureClass; 3] = [FailureClass::TypeI, FailureClass::TypeII, FailureClass::TypeIII];
}

impl std::fmt::Display for FailureClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FailureClass::TypeI => "TypeI",
            FailureClass::TypeII => "TypeII",
            FailureClass::TypeIII => "TypeIII",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Fail,
}

/// How the runner samples the solid it finds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub surface_points: usize,
    pub edge_points: usize,
    pub voxel_resolution: usize,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            surface_points: 4096,
            edge_points: 1024,
            voxel_resolution: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRequest {
    pub id: String,
    pub code: String,
    /// Wall-clock limit in seconds.
    pub timeout: f64,
    pub seed: u64,
    pub sampling: SamplingConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_class: Option<FailureClass>,
    #[serde(default)]
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact: Option<GeometryArtifact>,
    /// Sidecar file holding the artifact, used instead of `artifact`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub artifact_path: Option<PathBuf>,
    pub wall_time: f64,
}

impl RunResult {
    pub fn ok(artifact: GeometryArtifact, wall_time: f64) -> Self {
        RunResult {
            status: RunStatus::Ok,
            failure_class: None,
            message: String::new(),
            artifact: Some(artifact),
            artifact_path: None,
            wall_time,
        }
    }

    pub fn fail(class: FailureClass, message: impl Into<String>, wall_time: f64) -> Self {
        RunResult {
            status: RunStatus::Fail,
            failure_class: Some(class),
            message: message.into(),
            artifact: None,
            artifact_path: None,
            wall_time,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RunStatus::Ok
    }

    /// `ok` carries an artifact and no class; `fail` carries a class.
    pub fn validate(&self) -> Result<()> {
        match self.status {
            RunStatus::Ok if self.failure_class.is_some() => {
                Err(Error::Runner("ok result carries a failure class".into()))
            }
            RunStatus::Ok if self.artifact.is_none() && self.artifact_path.is_none() => {
                Err(Error::Runner("ok result without an artifact".into()))
            }
            RunStatus::Fail if self.failure_class.is_none() => {
                Err(Error::Runner("failed result without a failure class".into()))
            }
            _ => Ok(()),
        }
    }

    /// Replace a sidecar reference with the inlined artifact. Relative paths
    /// resolve against `base`.
    pub fn inline_artifact(mut self, base: &Path) -> Result<Self> {
        self.validate()?;
        if self.artifact.is_none() {
            if let Some(rel) = self.artifact_path.take() {
                self.artifact = Some(GeometryArtifact::load(&base.join(rel))?);
            }
        }
        Ok(self)
    }
}

/// Hex SHA-256 of a script, the key for stored results.
pub fn code_hash(code: &str) -> String {
    hex::encode(Sha256::digest(code.as_bytes()))
}

/// Anything that turns a script into a [`RunResult`]. Implementations return
/// results with the artifact inlined.
pub trait ScriptRunner: Send + Sync {
    fn run(&self, request: &RunRequest) -> Result<RunResult>;
}

/// Results on disk as `<code sha256>.json`; artifacts either inline or as
/// sidecars relative to the store directory.
#[derive(Debug, Clone)]
pub struct ResultStore {
    dir: PathBuf,
}

impl ResultStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResultStore { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, code: &str) -> PathBuf {
        self.dir.join(format!("{}.json", code_hash(code)))
    }

    pub fn get(&self, code: &str) -> Result<Option<RunResult>> {
        let path = self.path_for(code);
        if !path.exists() {
            return Ok(None);
        }
        let result: RunResult = read_json(&path)?;
        result.inline_artifact(&self.dir).map(Some)
    }

    pub fn put(&self, code: &str, result: &RunResult) -> Result<PathBuf> {
        result.validate()?;
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path_for(code);
        write_json(&path, result)?;
        Ok(path)
    }
}

impl ScriptRunner for ResultStore {
    fn run(&self, request: &RunRequest) -> Result<RunResult> {
        self.get(&request.code)?
            .ok_or_else(|| Error::Runner(format!("no stored result for script {}", code_hash(&request.code))))
    }
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

impl Worker {
    fn exchange(&mut self, line: &str) -> Result<String> {
        let sent = self
            .stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.write_all(b"\n"))
            .and_then(|_| self.stdin.flush());
        let mut reply = String::new();
        let read = match sent {
            Ok(()) => self.stdout.read_line(&mut reply),
            Err(e) => Err(e),
        };
        match read {
            Ok(n) if n > 0 => Ok(reply),
            _ => {
                let status = self.child.wait().ok().and_then(|s| s.code());
                Err(match status {
                    Some(2) => Error::Runner("runner rejected the request (protocol error)".into()),
                    Some(code) => Error::Runner(format!("runner exited with status {code}")),
                    None => Error::Runner("runner terminated without a reply".into()),
                })
            }
        }
    }
}

/// A pool of long-lived runner processes, spawned on demand. Each request
/// holds one process for its round trip, so concurrency is bounded by the
/// callers.
pub struct SubprocessRunner {
    program: String,
    args: Vec<String>,
    artifact_root: PathBuf,
    idle: Mutex<Vec<Worker>>,
}

impl SubprocessRunner {
    /// `command[0]` is the program; sidecar paths in replies resolve against
    /// `artifact_root`.
    pub fn new(command: &[String], artifact_root: impl Into<PathBuf>) -> Result<Self> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Config("runner command is empty".into()))?;
        Ok(SubprocessRunner {
            program: program.clone(),
            args: args.to_vec(),
            artifact_root: artifact_root.into(),
            idle: Mutex::new(Vec::new()),
        })
    }

    fn spawn(&self) -> Result<Worker> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Runner(format!("cannot start {}: {e}", self.program)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Worker { child, stdin, stdout })
    }
}

impl ScriptRunner for SubprocessRunner {
    fn run(&self, request: &RunRequest) -> Result<RunResult> {
        let idle = self.idle.lock().expect("runner pool").pop();
        let mut worker = match idle {
            Some(w) => w,
            None => self.spawn()?,
        };
        let line = serde_json::to_string(request)?;
        // a worker that failed mid-exchange is dropped, not returned
        let reply = worker.exchange(&line)?;
        self.idle.lock().expect("runner pool").push(worker);
        let result: RunResult = serde_json::from_str(reply.trim_end())
            .map_err(|e| Error::Runner(format!("malformed runner reply: {e}")))?;
        result.inline_artifact(&self.artifact_root)
    }
}

impl Drop for SubprocessRunner {
    fn drop(&mut self) {
        if let Ok(workers) = self.idle.get_mut() {
            for mut w in workers.drain(..) {
                drop(w.stdin);
                let _ = w.child.wait();
            }
        }
    }
}
