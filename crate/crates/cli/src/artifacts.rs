//! Output files. Every artifact carries the parameter echo, mode, seed and
//! configuration hash; all except `timings.json` are byte-identical on rerun.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::Context;
use poisson_disorder::model::ModelSpec;
use poisson_disorder::solver::{Grid, ValueFunction};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

pub const VALUE_FUNCTION_FILE: &str = "value_function.json";

/// Self-description embedded in every JSON artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model: ModelSpec,
    pub mode: String,
    pub seed: u64,
    pub config_sha256: String,
    pub tool_version: String,
}

impl Provenance {
    pub fn of(cfg: &RunConfig) -> Self {
        Provenance {
            model: cfg.model.clone(),
            mode: cfg.model.mode.tag().to_string(),
            seed: cfg.seed,
            config_sha256: cfg.content_hash(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// `#`-prefixed header lines for delimited tables.
    pub fn csv_header(&self) -> String {
        let m = &self.model;
        format!(
            "# alpha={} beta={} lambda={} c={} pi1={} pi2={}\n# mode={} seed={}\n# config_sha256={}\n",
            m.alpha, m.beta, m.lambda, m.c, m.pi1, m.pi2, self.mode, self.seed, self.config_sha256
        )
    }
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let tmp = path.with_extension(format!(
        "{}.tmp",
        path.extension().and_then(|e| e.to_str()).unwrap_or("")
    ));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("renaming onto {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Header block followed by a CSV body.
pub fn write_csv<F>(path: &Path, prov: &Provenance, fill: F) -> anyhow::Result<()>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> anyhow::Result<()>,
{
    let mut buf = prov.csv_header().into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        fill(&mut w)?;
        w.flush()?;
    }
    write_atomic(path, &buf)
}

pub fn prepare_out(dir: &Path) -> anyhow::Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
    Ok(dir.to_path_buf())
}

/// Solved stages `v₁, …, v_K` on their common grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValueFunctionArtifact {
    pub provenance: Provenance,
    pub eps_stop: f64,
    pub dt: f64,
    pub t_max: f64,
    pub grid: Grid,
    pub stages: Vec<Vec<f64>>,
}

impl ValueFunctionArtifact {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|_| {
            CliError::MissingArtifact(format!(
                "{} not found; run `solve` with the same --out first",
                path.display()
            ))
        })?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::MissingArtifact(format!("{} is unreadable: {e}", path.display())))
    }

    pub fn value_functions(&self) -> Result<Vec<ValueFunction>, CliError> {
        let grid = Arc::new(self.grid.clone().reindexed());
        self.stages
            .iter()
            .enumerate()
            .map(|(n, v)| ValueFunction::from_values(grid.clone(), v.clone(), n + 1))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::MissingArtifact(format!("stored value function is invalid: {e}")))
    }
}
