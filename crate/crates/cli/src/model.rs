//! Models run as child processes.
//!
//! The child receives the parameters on stdin, one per line, and must print
//! one CSV row of outputs per sampling time on stdout. The sampling times are
//! also passed in the `TSINFER_TIMES` environment variable, comma-separated.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use nalgebra::DMatrix;
use tsinfer::{Error, ForwardModel};

use crate::data::format_f64;

/// Counts failed evaluations shared between the model and the command.
#[derive(Debug, Default)]
pub struct FailureCounter {
    count: AtomicUsize,
    cap: usize,
    last: Mutex<Option<String>>,
}

impl FailureCounter {
    pub fn new(cap: usize) -> Self {
        Self {
            cap,
            ..Self::default()
        }
    }

    pub fn count(&self) -> usize {
        self.count.load(Ordering::SeqCst)
    }

    pub fn exceeded(&self) -> bool {
        self.count() > self.cap
    }

    fn record(&self, reason: &str) {
        self.count.fetch_add(1, Ordering::SeqCst);
        *self.last.lock().unwrap_or_else(|p| p.into_inner()) = Some(reason.to_string());
    }

    pub fn summary(&self) -> String {
        let last = self.last.lock().unwrap_or_else(|p| p.into_inner()).clone().unwrap_or_default();
        format!("{} failed evaluations (cap {}); last: {last}", self.count(), self.cap)
    }
}

#[derive(Debug)]
pub struct ExternalModel {
    program: String,
    args: Vec<String>,
    dir: PathBuf,
    n_parameters: usize,
    n_outputs: usize,
    failures: Arc<FailureCounter>,
}

impl ExternalModel {
    /// `command` is split on whitespace; the child runs in `dir`.
    pub fn new(command: &str, dir: PathBuf, n_parameters: usize, n_outputs: usize, failures: Arc<FailureCounter>) -> Option<Self> {
        let mut words = command.split_whitespace().map(str::to_string);
        let program = words.next()?;
        Some(Self {
            program,
            args: words.collect(),
            dir,
            n_parameters,
            n_outputs,
            failures,
        })
    }

    fn call(&self, parameters: &[f64], times: &[f64]) -> Result<DMatrix<f64>, String> {
        let joined: Vec<String> = times.iter().map(|t| format_f64(*t)).collect();
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .current_dir(&self.dir)
            .env("TSINFER_TIMES", joined.join(","))
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| format!("cannot start '{}': {e}", self.program))?;
        let input: String = parameters.iter().map(|p| format_f64(*p) + "\n").collect();
        if let Some(mut stdin) = child.stdin.take() {
            // a child that exits without reading is reported by its status below
            let _ = stdin.write_all(input.as_bytes());
        }
        let output = child.wait_with_output().map_err(|e| format!("waiting for model: {e}"))?;
        if !output.status.success() {
            let stderr = String::from_utf8_lossy(&output.stderr);
            let first = stderr.lines().next().unwrap_or("").trim();
            return Err(format!("model exited with {}: {first}", output.status));
        }
        self.parse(&output.stdout, times.len())
    }

    fn parse(&self, stdout: &[u8], n_times: usize) -> Result<DMatrix<f64>, String> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(stdout);
        let mut values = DMatrix::zeros(n_times, self.n_outputs);
        let mut rows = 0;
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| format!("model output row {}: {e}", i + 1))?;
            if i >= n_times {
                return Err(format!("model printed more than {n_times} rows"));
            }
            if record.len() != self.n_outputs {
                return Err(format!(
                    "model output row {} has {} values, expected {}",
                    i + 1,
                    record.len(),
                    self.n_outputs
                ));
            }
            for (j, field) in record.iter().enumerate() {
                values[(i, j)] = field
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| format!("model output row {}: '{field}' is not a finite number", i + 1))?;
            }
            rows += 1;
        }
        if rows != n_times {
            return Err(format!("model printed {rows} rows for {n_times} times"));
        }
        Ok(values)
    }
}

impl ForwardModel for ExternalModel {
    fn n_parameters(&self) -> usize {
        self.n_parameters
    }

    fn n_outputs(&self) -> usize {
        self.n_outputs
    }

    fn simulate(&self, parameters: &[f64], times: &[f64]) -> tsinfer::Result<DMatrix<f64>> {
        let fail = |reason: String| Error::Evaluation {
            parameters: parameters.to_vec(),
            reason,
        };
        // past the cap, stop spawning and let the run wind down
        if self.failures.exceeded() {
            return Err(fail("failure cap reached".into()));
        }
        self.call(parameters, times).map_err(|reason| {
            self.failures.record(&reason);
            fail(reason)
        })
    }
}
