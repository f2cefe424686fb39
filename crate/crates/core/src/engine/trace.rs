use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use crate::error::{Error, Result};

/// Line-delimited JSON sink for per-generation progress records. Cloning
/// shares the underlying file.
#[derive(Clone)]
pub struct TraceWriter {
    label: String,
    out: Arc<Mutex<BufWriter<File>>>,
}

#[derive(Serialize)]
struct TraceLine<'a> {
    run: &'a str,
    algorithm: &'a str,
    generation: usize,
    front0_size: usize,
    best_objectives: &'a [f64],
}

impl TraceWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(TraceWriter {
            label: String::new(),
            out: Arc::new(Mutex::new(BufWriter::new(file))),
        })
    }

    /// Same sink, different run label.
    pub fn labeled(&self, label: impl Into<String>) -> Self {
        TraceWriter {
            label: label.into(),
            out: Arc::clone(&self.out),
        }
    }

    pub(crate) fn record(&self, algorithm: &str, generation: usize, front0_size: usize, best: &[f64]) {
        let line = TraceLine {
            run: &self.label,
            algorithm,
            generation,
            front0_size,
            best_objectives: best,
        };
        let mut out = self.out.lock().expect("trace lock poisoned");
        // Tracing is diagnostics only; a failed write must not abort a run.
        if serde_json::to_writer(&mut *out, &line).is_ok() {
            let _ = out.write_all(b"\n");
        }
    }

    pub fn flush(&self) {
        if let Ok(mut out) = self.out.lock() {
            let _ = out.flush();
        }
    }
}

impl std::fmt::Debug for TraceWriter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TraceWriter").field("label", &self.label).finish()
    }
}
