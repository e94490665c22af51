//! Summary documents and CSV tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::CliError;

/// One asserted inequality or bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    /// Short identifier, stable across runs.
    pub name: String,
    /// The statement being checked.
    pub anchor: String,
    /// What `value` measures.
    pub statistic: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    /// Passes iff `value ≤ tolerance`.
    pub fn at_most(name: &str, anchor: &str, statistic: &str, value: f64, tolerance: f64) -> Check {
        Check::new(name, anchor, statistic, value, tolerance, value <= tolerance)
    }

    /// Passes iff `value ≥ tolerance`.
    pub fn at_least(name: &str, anchor: &str, statistic: &str, value: f64, tolerance: f64) -> Check {
        Check::new(name, anchor, statistic, value, tolerance, value >= tolerance)
    }

    pub fn new(name: &str, anchor: &str, statistic: &str, value: f64, tolerance: f64, passed: bool) -> Check {
        Check {
            name: name.into(),
            anchor: anchor.into(),
            statistic: statistic.into(),
            value,
            tolerance,
            passed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub seed: u64,
    pub wall_time_s: f64,
    pub config: ExperimentConfig,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }
}

/// Output directory and the artifacts written to it.
pub struct Reporter {
    dir: PathBuf,
    artifacts: Vec<String>,
    checks: Vec<Check>,
    metrics: BTreeMap<String, f64>,
}

impl Reporter {
    pub fn new(dir: &Path) -> Result<Reporter, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Reporter {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            checks: Vec::new(),
            metrics: BTreeMap::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn check(&mut self, check: Check) {
        if check.passed {
            log::info!(
                "PASS {}: {} = {:e} (tol {:e})",
                check.name,
                check.statistic,
                check.value,
                check.tolerance
            );
        } else {
            log::warn!(
                "FAIL {}: {} = {:e} (tol {:e})",
                check.name,
                check.statistic,
                check.value,
                check.tolerance
            );
        }
        self.checks.push(check);
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    /// Write a CSV table; every row must match the header width.
    pub fn table(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.artifact(name);
        Ok(())
    }

    /// Write a text artifact.
    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        fs::write(self.path(name), body)?;
        self.artifact(name);
        Ok(())
    }

    /// Record an artifact written directly to [`Reporter::path`].
    pub fn artifact(&mut self, name: &str) {
        self.artifacts.push(name.into());
    }

    /// Write `summary.json`; an empty check list is a configuration error.
    pub fn finish(mut self, config: &ExperimentConfig, wall_time_s: f64) -> Result<Summary, CliError> {
        if self.checks.is_empty() {
            return Err(CliError::Config("experiment produced no checks".into()));
        }
        self.artifacts.push("summary.json".into());
        let summary = Summary {
            tool: "conelab".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            kind: config.kind.map_or("unknown", |k| k.label()).into(),
            seed: config.seed,
            wall_time_s,
            config: config.clone(),
            checks: self.checks,
            metrics: self.metrics,
            artifacts: self.artifacts,
        };
        fs::write(self.dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        Ok(summary)
    }
}

/// Row cell formatting with shortest round-trip floats.
pub fn cell(v: impl std::fmt::Display) -> String {
    v.to_string()
}
