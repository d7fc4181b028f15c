use super::HarnessError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub name: String,
    /// What the artifact holds: field, ladder, certificate, report, masks, log, verdict.
    pub role: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTime {
    pub stage: String,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub problem: String,
    pub op: String,
    pub config_hash: String,
    pub toolkit_version: String,
    pub artifacts: Vec<ArtifactEntry>,
    /// Excluded from `checksum`.
    pub stages: Vec<StageTime>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    /// Digest over everything except wall-clock times.
    pub fn checksum(&self) -> String {
        let mut s = format!("{}\n{}\n{}\n{}\n", self.problem, self.op, self.config_hash, self.toolkit_version);
        for a in &self.artifacts {
            s.push_str(&format!("{} {} {} {}\n", a.name, a.role, a.sha256, a.bytes));
        }
        sha256_hex(s.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Artifact(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Artifact(format!("{}: {e}", path.display())))
    }

    pub fn artifact(&self, role: &str) -> Option<&ArtifactEntry> {
        self.artifacts.iter().find(|a| a.role == role)
    }
}

/// Collects artifacts in a run directory; the manifest is written last.
pub(crate) struct Outputs {
    pub dir: PathBuf,
    artifacts: Vec<ArtifactEntry>,
    stages: Vec<StageTime>,
    clock: Instant,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Result<Self, HarnessError> {
        std::fs::create_dir_all(&dir)?;
        // a stale manifest must not describe a partial rerun
        let _ = std::fs::remove_file(dir.join(MANIFEST_NAME));
        Ok(Outputs { dir, artifacts: Vec::new(), stages: Vec::new(), clock: Instant::now() })
    }

    pub fn write(&mut self, name: &str, role: &str, contents: &str) -> Result<(), HarnessError> {
        std::fs::write(self.dir.join(name), contents)?;
        self.artifacts.push(ArtifactEntry {
            name: name.to_string(),
            role: role.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len(),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, role: &str, value: &T) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| HarnessError::Artifact(e.to_string()))?;
        self.write(name, role, &(text + "\n"))
    }

    pub fn stage(&mut self, name: &str) {
        let ms = self.clock.elapsed().as_secs_f64() * 1e3;
        self.stages.push(StageTime { stage: name.to_string(), wall_ms: ms });
        self.clock = Instant::now();
    }

    pub fn finish(self, problem: &str, op: &str, config_hash: String) -> Result<RunManifest, HarnessError> {
        let m = RunManifest {
            problem: problem.to_string(),
            op: op.to_string(),
            config_hash,
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            artifacts: self.artifacts,
            stages: self.stages,
        };
        let text = serde_json::to_string_pretty(&m).map_err(|e| HarnessError::Artifact(e.to_string()))?;
        let tmp = self.dir.join(format!("{MANIFEST_NAME}.tmp"));
        std::fs::write(&tmp, text + "\n")?;
        std::fs::rename(&tmp, self.dir.join(MANIFEST_NAME))?;
        Ok(m)
    }
}
