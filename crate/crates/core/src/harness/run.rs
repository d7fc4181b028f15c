use super::config::{DataFamily, Operation, RunConfig};
use super::manifest::{sha256_hex, Outputs, RunManifest};
use super::HarnessError;
use crate::disk::{
    adaptive_levels, build_majorant, check_quasibounded, nonuniqueness_witness, poisson_solve, truncation_ladder, MAX_TERMS,
};
use crate::envelope::{delta_bpp, is_bpluripolar, relative_extremal, ConeConstraint, EnvelopeResult};
use crate::grid::{build_grid, field_to_csv, BoundaryTrace, Grid2D, GridFunction, Layout};
use crate::hull::{continuity_region, outline, hull_closure_check, propagating_set_with, HullEstimate};
use crate::maximal::{dichotomy, harmonic_majorant, maximal_envelope};
use crate::toric::{
    lower_truncation_ladder, solve_dirichlet_bounded, Init, MAProblem, MaOptions, MeasureDensity,
};
use crate::xreal::XReal;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub dir: PathBuf,
    /// Human-readable lines for stdout (the dichotomy verdict line among them).
    pub summary: Vec<String>,
}

/// Runs into `$PPLAB_OUT/<problem>` or `<output_dir>/<problem>`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, HarnessError> {
    let base = std::env::var_os("PPLAB_OUT").map(PathBuf::from).unwrap_or_else(|| cfg.output_dir.clone());
    run_in(cfg, &base)
}

fn cone_for(g: &Grid2D) -> ConeConstraint {
    match g.layout {
        Layout::Polar(_) => ConeConstraint::subharmonic(),
        Layout::Lattice(_) => ConeConstraint::toric(),
    }
}

fn need_disk(g: &Grid2D, op: &str) -> Result<(), HarnessError> {
    match g.layout {
        Layout::Polar(_) => Ok(()),
        Layout::Lattice(_) => Err(HarnessError::Schema(format!("{op} runs on the disk or annulus"))),
    }
}

fn need_toric(g: &Grid2D, op: &str) -> Result<(), HarnessError> {
    match g.layout {
        Layout::Lattice(_) => Ok(()),
        Layout::Polar(_) => Err(HarnessError::Schema(format!("{op} runs on the toric domain"))),
    }
}

fn rle(mask: &[bool]) -> Vec<[usize; 2]> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < mask.len() {
        if mask[i] {
            let s = i;
            while i < mask.len() && mask[i] {
                i += 1;
            }
            runs.push([s, i - s]);
        } else {
            i += 1;
        }
    }
    runs
}

fn log_csv(r: &EnvelopeResult) -> String {
    r.log_csv()
}

fn density(cfg: &RunConfig, fam: &DataFamily, g: &Arc<Grid2D>) -> Result<MeasureDensity, HarnessError> {
    let dens = match &cfg.mu {
        Some(mu) => {
            let m = mu.family()?;
            if m.density(0.0, 0.0).is_none() {
                return Err(HarnessError::Schema(format!("{} has no density form", mu.id)));
            }
            m
        }
        None => *fam,
    };
    if dens.density(0.0, 0.0).is_none() {
        return Ok(MeasureDensity::zero(g.clone()));
    }
    Ok(MeasureDensity::from_fn(g.clone(), |x, y| dens.density(x, y).unwrap_or(0.0))?)
}

fn nearest_interior(g: &Grid2D, x: f64, y: f64) -> usize {
    g.interior
        .iter()
        .copied()
        .min_by(|&a, &b| {
            let da = (g.nodes[a].x - x).hypot(g.nodes[a].y - y);
            let db = (g.nodes[b].x - x).hypot(g.nodes[b].y - y);
            da.total_cmp(&db).then(a.cmp(&b))
        })
        .expect("grid has interior nodes")
}

pub fn run_in(cfg: &RunConfig, base: &Path) -> Result<RunOutcome, HarnessError> {
    let fam = cfg.phi.family()?;
    let g = build_grid(cfg.domain)?;
    let config_hash = sha256_hex(cfg.canonical().as_bytes());
    let dir = base.join(&cfg.problem);
    let mut out = Outputs::new(dir.clone())?;
    let mut summary = Vec::new();
    let phi = BoundaryTrace::from_fn(g.clone(), |t, x, y| fam.eval(t, x, y));
    let mask = cfg.e_phi.mask(&g)?;
    out.stage("setup");
    match cfg.op {
        Operation::Poisson => {
            need_disk(&g, "poisson")?;
            let u = poisson_solve(&phi)?;
            out.stage("poisson");
            out.write("solution.csv", "field", &field_to_csv(&u, "solution"))?;
        }
        Operation::DiskL1Characterization => {
            need_disk(&g, "disk-l1-characterization")?;
            let p = g.polar().expect("polar");
            let base_node = p.shell_node(p.n_radial - 1, p.n_angular / 2);
            let levels = if cfg.levels.is_empty() {
                let n = &g.nodes[base_node];
                adaptive_levels(&phi, (n.x, n.y), MAX_TERMS)?
            } else {
                cfg.levels.clone()
            };
            let ladder = truncation_ladder(&phi, &levels)?;
            out.stage("ladder");
            let u = poisson_solve(&phi)?;
            let cert = build_majorant(&u, &ladder, base_node)?;
            let rep = check_quasibounded(&u, &cert)?;
            out.stage("certificate");
            out.write("solution.csv", "field", &field_to_csv(&u, "solution"))?;
            out.write("ladder.csv", "ladder", &ladder.residual_csv())?;
            out.write("majorant.csv", "majorant", &field_to_csv(&cert.v, "majorant"))?;
            out.write_json(
                "certificate.json",
                "certificate",
                &json!({ "v": "majorant.csv", "table": cert.table, "gauge": cert.gauge, "selected": cert.selected, "base": cert.base }),
            )?;
            let mut ratio = String::from("T,R\n");
            for (t, r) in &rep.ratio_curve {
                ratio.push_str(&format!("{t:e},{r:e}\n"));
            }
            out.write("ratio.csv", "ratio", &ratio)?;
            out.write_json(
                "quasibound.json",
                "report",
                &json!({ "passed": rep.passed, "violations": rep.violations.len(), "ratio_monotone": rep.ratio_monotone, "ratio_curve": rep.ratio_curve }),
            )?;
            let deepest = rep.ratio_curve.last().map(|r| r.1).unwrap_or(f64::NAN);
            summary.push(format!("quasibounded: {}, deepest R: {deepest:.4}", rep.passed));
        }
        Operation::Witness => {
            need_disk(&g, "witness")?;
            let w = nonuniqueness_witness(&phi.clone().with_exceptional(&mask)?)?;
            out.stage("witness");
            out.write("first.csv", "field", &field_to_csv(&w.first, "first"))?;
            out.write("second.csv", "second", &field_to_csv(&w.second, "second"))?;
            out.write_json("witness.json", "report", &json!({ "center_gap": w.center_gap, "boundary_limit_gap": w.boundary_limit_gap }))?;
            summary.push(format!("witness gap at 0: {:.12}", w.center_gap));
        }
        Operation::Extremal => {
            let cone = cone_for(&g);
            let w = relative_extremal(&mask, &g, &cone)?;
            let (bpp, ev) = is_bpluripolar(&mask, &g, &cone)?;
            out.stage("extremal");
            out.write("extremal.csv", "field", &field_to_csv(&w.field, "extremal"))?;
            out.write("envelope_log.csv", "log", &log_csv(&w))?;
            out.write_json(
                "extremal.json",
                "report",
                &json!({ "bpluripolar": bpp, "evidence": ev, "delta": delta_bpp(&g), "iterations": w.iterations, "final_update": w.final_update }),
            )?;
            summary.push(format!("b-pluripolar: {bpp}, evidence: {ev:e}"));
        }
        Operation::MaSolve => {
            need_toric(&g, "ma-solve")?;
            let mu = density(cfg, &fam, &g)?;
            let opts = MaOptions { tol: cfg.tolerances.ma, ..MaOptions::default() };
            let s = crate::toric::solve_dirichlet_with(&phi, &mu, Init::ConvexHull, opts)?;
            out.stage("ma-solve");
            let err = g
                .interior
                .iter()
                .map(|&i| {
                    let n = &g.nodes[i];
                    (s.field.field.values[i].to_f64() - fam.eval(0.0, n.x, n.y).to_f64()).abs()
                })
                .fold(0.0, f64::max);
            out.write("solution.csv", "field", &field_to_csv(&s.field.field, "solution"))?;
            let mut hist = String::from("k,sup_residual\n");
            for (k, r) in s.history.iter().enumerate() {
                hist.push_str(&format!("{k},{r:e}\n"));
            }
            out.write("history.csv", "ladder", &hist)?;
            out.write_json(
                "ma.json",
                "report",
                &json!({ "iterations": s.iterations, "residual": s.residual, "error_vs_phi": err, "total_mass": mu.total_mass,
                         "monotonicity_violation": s.field.monotonicity_violation }),
            )?;
            summary.push(format!("ma residual {:e}, sup |u - phi| {err:e}", s.residual));
        }
        Operation::MaLadder => {
            need_toric(&g, "ma-ladder")?;
            if cfg.levels.is_empty() {
                return Err(HarnessError::Schema("ma-ladder needs levels".into()));
            }
            let mu = density(cfg, &fam, &g)?;
            let deepest = cfg.levels.iter().cloned().fold(0.0, f64::max);
            let minorant = match fam {
                DataFamily::NeglogAlpha(_) => GridFunction::from_fn(g.clone(), |x, _| XReal::Finite(x - 1.0)),
                _ => GridFunction::constant(g.clone(), XReal::Finite(-deepest)),
            };
            let prob = MAProblem::new(phi.clone(), mu.clone())?.with_minorant(minorant);
            let ladder = lower_truncation_ladder(&prob, &cfg.levels)?;
            out.stage("ladder");
            let data = phi.map(|v| v.max(XReal::Finite(-deepest)));
            let other = solve_dirichlet_bounded(&data, &mu, Init::BoundaryMax)?;
            let agreement = other.field.field.sup_diff(&ladder.limit);
            out.stage("second-init");
            out.write("limit.csv", "field", &field_to_csv(&ladder.limit, "limit"))?;
            out.write("ladder.csv", "ladder", &ladder.residual_csv())?;
            out.write_json("ladder.json", "report", &json!({ "levels": ladder.levels, "steps": ladder.steps, "init_agreement": agreement }))?;
            summary.push(format!("ladder residual {:e}, init agreement {agreement:e}", ladder.residual));
        }
        Operation::HullEstimate => {
            let cone = cone_for(&g);
            let est = propagating_set_with(&mask, &g, &cone, &cfg.penalty_levels, cfg.theta, cfg.theta_deep)?;
            let closure = hull_closure_check(&est);
            out.stage("hull");
            let u = maximal_envelope(&phi, &harmonic_majorant(&phi)?, &cone)?;
            let cont = continuity_region(&u, &est, 10.0)?;
            out.stage("continuity");
            let masks: Vec<_> = est.levels.iter().zip(&est.masks).map(|(l, m)| {
                let edge: Vec<_> = outline(&g, m).into_iter().map(|i| json!([i, g.nodes[i].x, g.nodes[i].y])).collect();
                json!({ "L": l, "runs": rle(m), "outline": edge })
            }).collect();
            out.write_json(
                "masks.json",
                "masks",
                &json!({ "nodes": g.len(), "levels": masks, "limit": rle(&est.limit), "deep": rle(&est.deep), "nested": est.is_nested(),
                         "limit_nodes": HullEstimate::count(&est.limit) }),
            )?;
            out.write_json("closure.json", "report", &closure)?;
            out.write_json("continuity.json", "continuity", &cont)?;
            summary.push(format!("hull closure: {}, hausdorff {} cells", closure.passed, closure.hausdorff_cells));
        }
        Operation::MaximalDichotomy => {
            let top = phi.values.iter().filter(|v| v.is_finite()).map(|v| v.to_f64()).fold(0.0, f64::max);
            let v = GridFunction::constant(g.clone(), XReal::Finite(top + 1.0));
            let probe = match g.layout {
                Layout::Polar(_) => nearest_interior(&g, 0.0, 0.0),
                Layout::Lattice(_) => nearest_interior(&g, -1.0, -1.0),
            };
            let ks = if cfg.levels.is_empty() { vec![1.0, 2.0, 4.0, 8.0] } else { cfg.levels.clone() };
            let r = dichotomy(&phi, &mask, cfg.penalty, &v, &ks, probe, cfg.probes, cfg.seed)?;
            out.stage("dichotomy");
            out.write("solution.csv", "field", &field_to_csv(&r.solution, "solution"))?;
            if let Some(s) = &r.second {
                out.write("second.csv", "second", &field_to_csv(s, "second"))?;
            }
            if let Some(m) = &r.maximality {
                out.write_json("maximality.json", "maximality", m)?;
            }
            let line = r.verdict.line();
            out.write("verdict.txt", "verdict", &format!("{line}\n"))?;
            summary.push(line);
        }
    }
    let manifest = out.finish(&cfg.problem, &serde_json::to_value(cfg.op).expect("op").as_str().unwrap_or("op").to_string(), config_hash)?;
    Ok(RunOutcome { manifest, dir, summary })
}
