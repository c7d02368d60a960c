use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::Failure;

/// Everything that determines a run's output. Identical manifests give
/// byte-identical output; thread count is deliberately absent.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub params: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

pub struct Run {
    manifest: RunManifest,
    started: Option<Instant>,
}

impl Run {
    pub fn new(subcommand: &'static str, params: &impl Serialize, record_time: bool) -> Self {
        let params = serde_json::to_value(params).unwrap_or(Value::Null);
        Run {
            manifest: RunManifest {
                tool: "maxplus-tails",
                version: env!("CARGO_PKG_VERSION"),
                subcommand,
                params,
                wall_time_s: None,
            },
            started: record_time.then(Instant::now),
        }
    }

    fn stamp(&mut self) {
        if let Some(t) = self.started {
            self.manifest.wall_time_s = Some(t.elapsed().as_secs_f64());
        }
    }

    /// Prints `{"manifest": …, "result": …}` to stdout.
    pub fn emit(&mut self, result: &impl Serialize) -> Result<(), Failure> {
        self.stamp();
        #[derive(Serialize)]
        struct Doc<'a, T> {
            manifest: &'a RunManifest,
            result: &'a T,
        }
        let text = serde_json::to_string_pretty(&Doc { manifest: &self.manifest, result })
            .map_err(|e| Failure::estimation(format!("cannot serialize result: {e}")))?;
        let mut out = std::io::stdout().lock();
        match writeln!(out, "{text}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                Err(Failure::estimation(format!("cannot write to stdout: {e}")))
            }
            _ => Ok(()),
        }
    }

    /// CSV with the manifest on a leading `#` line.
    pub fn write_csv(&mut self, path: &Path, header: &str, rows: &[String]) -> Result<(), Failure> {
        self.stamp();
        let mut text = String::new();
        let manifest = serde_json::to_string(&self.manifest).unwrap_or_default();
        let _ = writeln!(text, "# manifest: {manifest}");
        let _ = writeln!(text, "{header}");
        for r in rows {
            let _ = writeln!(text, "{r}");
        }
        std::fs::write(path, text).map_err(|e| Failure {
            code: crate::EXIT_VALIDATION,
            message: format!("cannot write {}: {e}", path.display()),
        })
    }
}
