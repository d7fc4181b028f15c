use super::HarnessError;
use crate::grid::{DomainSpec, Grid2D, ToricFace};
use crate::hull::{DEFAULT_LEVELS, THETA, THETA_DEEP};
use crate::xreal::XReal;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    Poisson,
    DiskL1Characterization,
    Witness,
    Extremal,
    MaSolve,
    MaLadder,
    HullEstimate,
    MaximalDichotomy,
}

/// Closed-form data family; parameters are optional and checked per id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expr {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DataFamily {
    Cos,
    LogDistance,
    NeglogAlpha(f64),
    AffineX,
    Quadratic,
    ExpSum,
}

impl Expr {
    pub fn family(&self) -> Result<DataFamily, HarnessError> {
        Ok(match self.id.as_str() {
            "cos" => DataFamily::Cos,
            "log-distance" => DataFamily::LogDistance,
            "neglog-alpha" => {
                let a = self.alpha.ok_or_else(|| HarnessError::Schema("neglog-alpha needs alpha".into()))?;
                if !(a > 0.0 && a < 1.0) {
                    return Err(HarnessError::Schema(format!("alpha {a} not in (0, 1)")));
                }
                DataFamily::NeglogAlpha(a)
            }
            "affine-x" => DataFamily::AffineX,
            "quadratic" => DataFamily::Quadratic,
            "exp-sum" => DataFamily::ExpSum,
            other => return Err(HarnessError::UnknownExpression(other.to_string())),
        })
    }
}

impl DataFamily {
    /// Value at a boundary node with parameter `t` and position `(x, y)`.
    pub fn eval(&self, t: f64, x: f64, y: f64) -> XReal {
        let v = match *self {
            DataFamily::Cos => t.cos(),
            DataFamily::LogDistance => {
                let d = (x - 1.0).hypot(y);
                if d == 0.0 {
                    return XReal::NegInf;
                }
                d.ln()
            }
            DataFamily::NeglogAlpha(a) => -(-x).max(0.0).powf(a),
            DataFamily::AffineX => x,
            DataFamily::Quadratic => 0.5 * (x * x + y * y),
            DataFamily::ExpSum => (2.0 * x).exp() + (2.0 * y).exp(),
        };
        XReal::Finite(v)
    }

    /// Monge-Ampere density that makes the family an exact solution, where known.
    pub fn density(&self, x: f64, y: f64) -> Option<f64> {
        match self {
            DataFamily::AffineX => Some(0.0),
            DataFamily::Quadratic => Some(1.0),
            DataFamily::ExpSum => Some(16.0 * (2.0 * x + 2.0 * y).exp()),
            _ => None,
        }
    }
}

/// Boundary set selector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    None,
    /// Boundary parameter in `[from, to)`.
    Arc { from: f64, to: f64 },
    /// The `x = -X` window face.
    FaceX,
    /// Curve nodes with parameter in `[from, to)`.
    CurveArc { from: f64, to: f64 },
    Node { index: usize },
}

impl SetSpec {
    pub fn mask(&self, g: &Grid2D) -> Result<Vec<bool>, HarnessError> {
        let face = |i: usize| g.lattice().and_then(|l| l.face[i]);
        Ok(match self {
            SetSpec::None => vec![false; g.boundary.len()],
            SetSpec::Arc { from, to } => g.boundary_param.iter().map(|t| t >= from && t < to).collect(),
            SetSpec::FaceX | SetSpec::CurveArc { .. } if g.lattice().is_none() => {
                return Err(HarnessError::Schema("face and curve sets need the toric domain".into()))
            }
            SetSpec::FaceX => g.boundary.iter().map(|&i| face(i) == Some(ToricFace::X)).collect(),
            SetSpec::CurveArc { from, to } => g
                .boundary
                .iter()
                .zip(&g.boundary_param)
                .map(|(&i, t)| face(i) == Some(ToricFace::Curve) && t >= from && t < to)
                .collect(),
            SetSpec::Node { index } => {
                if *index >= g.boundary.len() {
                    return Err(HarnessError::Schema(format!("boundary node {index} out of range")));
                }
                (0..g.boundary.len()).map(|p| p == *index).collect()
            }
        })
    }
}

fn default_set() -> SetSpec {
    SetSpec::None
}
fn default_penalty() -> f64 {
    10.0
}
fn default_levels_l() -> Vec<f64> {
    DEFAULT_LEVELS.to_vec()
}
fn default_theta() -> f64 {
    THETA
}
fn default_theta_deep() -> f64 {
    THETA_DEEP
}
fn default_probes() -> usize {
    8
}
fn default_out() -> PathBuf {
    PathBuf::from("pplab-out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "tol_env")]
    pub env: f64,
    #[serde(default = "tol_ma")]
    pub ma: f64,
}

fn tol_env() -> f64 {
    crate::envelope::TOL_ENV
}
fn tol_ma() -> f64 {
    crate::toric::TOL_MA
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { env: tol_env(), ma: tol_ma() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: String,
    pub op: Operation,
    pub domain: DomainSpec,
    pub phi: Expr,
    #[serde(default = "default_set")]
    pub e_phi: SetSpec,
    /// Density family for Monge-Ampere runs; defaults to the exact density of `phi` or zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Expr>,
    /// Truncation levels (ladders, k levels of the dichotomy).
    #[serde(default)]
    pub levels: Vec<f64>,
    #[serde(default = "default_levels_l")]
    pub penalty_levels: Vec<f64>,
    #[serde(default = "default_penalty")]
    pub penalty: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_theta_deep")]
    pub theta_deep: f64,
    #[serde(default = "default_probes")]
    pub probes: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| HarnessError::Schema(e.to_string()))?;
        cfg.phi.family()?;
        if let Some(mu) = &cfg.mu {
            mu.family()?;
        }
        if cfg.problem.is_empty() || cfg.problem.contains(['/', '\\']) || cfg.problem.starts_with('.') {
            return Err(HarnessError::Schema(format!("problem id {:?} is not a plain name", cfg.problem)));
        }
        if cfg.levels.iter().any(|l| !l.is_finite()) || cfg.penalty_levels.iter().any(|l| !l.is_finite()) {
            return Err(HarnessError::Schema("levels must be finite".into()));
        }
        Ok(cfg)
    }

    /// Canonical JSON used for the config hash.
    pub fn canonical(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        serde_json::to_string(&c).expect("config serializes")
    }
}
