//! Artifact staging: files accumulate under the output directory and are
//! removed again if the task fails, so failed runs leave no partial outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub struct OutputStage {
    dir: PathBuf,
    created: Vec<PathBuf>,
    started: Instant,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool_version: &'static str,
    subcommand: &'a str,
    config_hash: String,
    seed: Option<u64>,
    threads: usize,
    wall_time_s: f64,
    artifacts: Vec<String>,
}

impl OutputStage {
    pub fn new(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf(), created: Vec::new(), started: Instant::now() })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .with_context(|| format!("cannot write artifact {}", path.display()))?;
        self.created.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut body = serde_json::to_vec_pretty(value)?;
        body.push(b'\n');
        self.write(name, &body)
    }

    /// Writes `manifest.json` recording provenance for the finished run.
    pub fn finish(
        mut self,
        subcommand: &str,
        config_bytes: &[u8],
        seed: Option<u64>,
        threads: usize,
    ) -> Result<Vec<PathBuf>> {
        let manifest = Manifest {
            tool_version: env!("CARGO_PKG_VERSION"),
            subcommand,
            config_hash: format!("sha256:{:x}", Sha256::digest(config_bytes)),
            seed,
            threads,
            wall_time_s: self.started.elapsed().as_secs_f64(),
            artifacts: self
                .created
                .iter()
                .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
                .collect(),
        };
        let mut body = serde_json::to_vec_pretty(&manifest)?;
        body.push(b'\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, body)
            .with_context(|| format!("cannot write manifest {}", path.display()))?;
        self.created.push(path);
        Ok(std::mem::take(&mut self.created))
    }

    /// Removes everything written so far (failure path).
    pub fn discard(self) {
        for path in &self.created {
            let _ = std::fs::remove_file(path);
        }
    }
}

/// Six significant digits, plain decimal inside a sane range and scientific
/// notation outside it. Integers in CSV columns print as integers.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exponent) {
        let decimals = (5 - exponent).max(0) as usize;
        format!("{:.*}", decimals, x)
    } else {
        format!("{:.5e}", x)
    }
}

#[cfg(test)]
mod tests {
    use super::sig6;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(9.6), "9.60000");
        assert_eq!(sig6(96000.0), "96000.0");
        assert_eq!(sig6(1202124.0), "1.20212e6");
        assert_eq!(sig6(0.0625), "0.0625000");
        assert_eq!(sig6(-0.5727), "-0.572700");
        assert_eq!(sig6(0.0), "0.00000");
    }
}
