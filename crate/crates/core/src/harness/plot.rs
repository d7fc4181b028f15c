use super::manifest::{sha256_hex, ArtifactEntry, RunManifest};
use super::HarnessError;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlotSelector {
    /// `k,sup_residual` from a stored ladder.
    Ladder,
    /// `T,R` from a quasibound certificate.
    Ratio,
    /// Values along the positive real axis (disk) or the diagonal (toric).
    Radial,
    /// Outline nodes of each hull mask.
    Masks,
    /// Envelope iteration log.
    Log,
}

impl FromStr for PlotSelector {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| HarnessError::Schema(format!("unknown plot selector {s:?}")))
    }
}

fn run_dir(manifest_path: &Path) -> PathBuf {
    manifest_path.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn read_artifact(dir: &Path, a: &ArtifactEntry) -> Result<String, HarnessError> {
    std::fs::read_to_string(dir.join(&a.name)).map_err(|e| HarnessError::Artifact(format!("{}: {e}", a.name)))
}

fn need<'a>(m: &'a RunManifest, role: &str) -> Result<&'a ArtifactEntry, HarnessError> {
    m.artifact(role).ok_or_else(|| HarnessError::Artifact(format!("run {} has no {role} artifact", m.problem)))
}

fn field_rows(text: &str) -> Vec<(f64, f64, String)> {
    text.lines()
        .skip(3)
        .filter_map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            Some((c.get(1)?.parse().ok()?, c.get(2)?.parse().ok()?, c.get(3)?.to_string()))
        })
        .collect()
}

fn decode_runs(v: &serde_json::Value, n: usize) -> Result<Vec<bool>, HarnessError> {
    let mut mask = vec![false; n];
    let runs = v.as_array().ok_or_else(|| HarnessError::Artifact("mask runs".into()))?;
    for r in runs {
        let s = r[0].as_u64().unwrap_or(0) as usize;
        let len = r[1].as_u64().unwrap_or(0) as usize;
        if s + len > n {
            return Err(HarnessError::Artifact("mask run out of range".into()));
        }
        mask[s..s + len].iter_mut().for_each(|b| *b = true);
    }
    Ok(mask)
}

/// Masks per level, in schedule order.
fn load_masks(text: &str) -> Result<Vec<(f64, Vec<bool>)>, HarnessError> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| HarnessError::Artifact(e.to_string()))?;
    let n = v["nodes"].as_u64().ok_or_else(|| HarnessError::Artifact("masks: node count".into()))? as usize;
    let levels = v["levels"].as_array().ok_or_else(|| HarnessError::Artifact("masks: levels".into()))?;
    levels.iter().map(|l| Ok((l["L"].as_f64().unwrap_or(f64::NAN), decode_runs(&l["runs"], n)?))).collect()
}

/// Writes `plot_<selector>.csv` next to the manifest and returns its path.
pub fn emit_plotdata(manifest_path: &Path, what: PlotSelector) -> Result<Vec<PathBuf>, HarnessError> {
    let m = RunManifest::load(manifest_path)?;
    let dir = run_dir(manifest_path);
    let (name, body) = match what {
        PlotSelector::Ladder => ("plot_ladder.csv", read_artifact(&dir, need(&m, "ladder")?)?),
        PlotSelector::Ratio => ("plot_ratio.csv", read_artifact(&dir, need(&m, "ratio")?)?),
        PlotSelector::Log => ("plot_log.csv", read_artifact(&dir, need(&m, "log")?)?),
        PlotSelector::Radial => {
            let text = read_artifact(&dir, need(&m, "field")?)?;
            let toric = text.lines().nth(1).is_some_and(|l| l.starts_with("toric"));
            let mut rows: Vec<(f64, String)> = field_rows(&text)
                .into_iter()
                .filter(|(x, y, _)| if toric { (x - y).abs() < 1e-12 } else { y.abs() < 1e-12 && *x >= 0.0 })
                .map(|(x, _, v)| (x, v))
                .collect();
            rows.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut s = String::from(if toric { "x,value\n" } else { "r,value\n" });
            for (x, v) in rows {
                s.push_str(&format!("{x:e},{v}\n"));
            }
            ("plot_radial.csv", s)
        }
        PlotSelector::Masks => {
            let text = read_artifact(&dir, need(&m, "masks")?)?;
            let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| HarnessError::Artifact(e.to_string()))?;
            let mut s = String::from("L,node,x,y\n");
            for level in v["levels"].as_array().into_iter().flatten() {
                for p in level["outline"].as_array().into_iter().flatten() {
                    s.push_str(&format!("{},{},{:e},{:e}\n", level["L"], p[0], p[1].as_f64().unwrap_or(f64::NAN), p[2].as_f64().unwrap_or(f64::NAN)));
                }
            }
            ("plot_masks.csv", s)
        }
    };
    let path = dir.join(name);
    std::fs::write(&path, body)?;
    Ok(vec![path])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checksum: String,
    pub artifacts_checked: usize,
    /// Names of the invariants that were re-checked.
    pub invariants: Vec<String>,
}

fn csv_column(text: &str, col: usize) -> Vec<f64> {
    text.lines().skip(1).filter_map(|l| l.split(',').nth(col)?.parse().ok()).collect()
}

/// Re-hashes every artifact and re-checks the invariants their roles carry.
pub fn verify(manifest_path: &Path) -> Result<VerifyReport, HarnessError> {
    let m = RunManifest::load(manifest_path)?;
    let dir = run_dir(manifest_path);
    let mut invariants = Vec::new();
    for a in &m.artifacts {
        let bytes = std::fs::read(dir.join(&a.name)).map_err(|e| HarnessError::Artifact(format!("{}: {e}", a.name)))?;
        if sha256_hex(&bytes) != a.sha256 || bytes.len() != a.bytes {
            return Err(HarnessError::Verify(format!("{} does not match its checksum", a.name)));
        }
        let text = String::from_utf8_lossy(&bytes);
        match a.role.as_str() {
            "ladder" => {
                let r = csv_column(&text, 1);
                if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(HarnessError::Verify(format!("{}: residuals must be finite and nonnegative", a.name)));
                }
                invariants.push(format!("{}: residuals finite", a.name));
            }
            "ratio" => {
                let r = csv_column(&text, 1);
                if r.windows(2).any(|w| w[1] < w[0]) {
                    return Err(HarnessError::Verify(format!("{}: R(T) decreases", a.name)));
                }
                invariants.push(format!("{}: R nondecreasing", a.name));
            }
            "masks" => {
                let masks = load_masks(&text)?;
                let nested = masks.windows(2).all(|w| w[1].1.iter().zip(&w[0].1).all(|(&b, &a)| !b || a));
                if !nested {
                    return Err(HarnessError::Verify(format!("{}: masks are not nested", a.name)));
                }
                invariants.push(format!("{}: masks nested", a.name));
            }
            _ => {}
        }
    }
    Ok(VerifyReport { checksum: m.checksum(), artifacts_checked: m.artifacts.len(), invariants })
}
