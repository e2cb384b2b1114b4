//! Artifact writers: sample CSVs, metadata, reports and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use evoflow_core::simulate::SampleSet;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::AppError;
use crate::format::sig12;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const SAMPLES_HEADER: &str = "path_index,terminal_radius,sup_radius,stopped_flag";

/// `sup_radius` is empty when suprema were not recorded.
pub fn samples_csv(s: &SampleSet) -> String {
    let mut out = String::with_capacity(32 * s.len() + 64);
    out.push_str(SAMPLES_HEADER);
    out.push('\n');
    for (i, r) in s.terminal_radii.iter().enumerate() {
        let sup = s.sup_radii.as_ref().map(|v| sig12(v[i])).unwrap_or_default();
        let flag = u8::from(s.stopped_flags[i]);
        out.push_str(&format!("{i},{},{sup},{flag}\n", sig12(*r)));
    }
    out
}

pub fn pretty_json<T: Serialize>(value: &T) -> Result<String, AppError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub manifest_version: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    /// Fully resolved config; `sim.seed` is always set.
    pub config: RunConfig,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &RunConfig, seed: u64, workers: usize) -> Self {
        let mut config = config.clone();
        config.sim.seed = Some(seed);
        Self {
            manifest_version: MANIFEST_VERSION,
            tool: "evoflow".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config,
            workers,
            wall_clock_seconds: 0.0,
            outputs: Vec::new(),
        }
    }
}

/// Output directory that records what it wrote.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, AppError> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, AppError> {
        let path = self.root.join(name);
        fs::write(&path, contents)?;
        self.written.push(name.to_string());
        Ok(path)
    }

    /// Writes the manifest last so it lists every other output.
    pub fn finish(self, mut manifest: Manifest) -> Result<PathBuf, AppError> {
        manifest.outputs = self.written;
        let path = self.root.join(MANIFEST_FILE);
        fs::write(&path, pretty_json(&manifest)?)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_csv_layout() {
        let mut s = SampleSet::from_radii(vec![1.0, 2.0 / 3.0], 1.0);
        s.stopped_flags[1] = true;
        assert_eq!(
            samples_csv(&s),
            "path_index,terminal_radius,sup_radius,stopped_flag\n0,1,,0\n1,0.666666666667,,1\n"
        );
        s.sup_radii = Some(vec![1.5, 0.7]);
        assert!(samples_csv(&s).ends_with("1,0.666666666667,0.7,1\n"));
    }

    #[test]
    fn manifest_pins_the_seed() {
        let cfg = RunConfig::from_json(r#"{"schema_version": 1, "model": {"dim": 2}}"#).unwrap();
        let m = Manifest::new("verify", &cfg, 77, 4);
        assert_eq!(m.config.sim.seed, Some(77));
        let text = pretty_json(&m).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(back.resolve_seed(None).unwrap(), 77);
    }
}
