use std::path::Path;
use std::process::Command;

fn pplab(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pplab")).args(args).env("PPLAB_OUT", out).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const POISSON: &str = r#"{"problem": "p", "op": "poisson", "domain": {"kind": "unit-disk", "nx": 32, "ny": 16, "n_boundary": 64}, "phi": {"id": "cos"}}"#;

#[test]
fn run_plot_verify_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(tmp.path(), "p.json", POISSON);
    let r = pplab(&["run", &cfg], tmp.path());
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let manifest = tmp.path().join("p").join("manifest.json");
    let m = manifest.to_str().unwrap();
    let plot = pplab(&["plot", m, "--what=radial"], tmp.path());
    assert!(plot.status.success());
    let table = std::fs::read_to_string(tmp.path().join("p/plot_radial.csv")).unwrap();
    // radial profile of Re z along the positive axis
    for line in table.lines().skip(1) {
        let (r, v) = line.split_once(',').unwrap();
        let (r, v): (f64, f64) = (r.parse().unwrap(), v.parse().unwrap());
        assert!((r - v).abs() < 1e-8, "{line}");
    }
    assert_eq!(pplab(&["verify", m], tmp.path()).status.code(), Some(0));
    std::fs::write(tmp.path().join("p/solution.csv"), "tampered\n").unwrap();
    assert_eq!(pplab(&["verify", m], tmp.path()).status.code(), Some(1));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let unknown = write(tmp.path(), "u.json", &POISSON.replace("\"cos\"", "\"sinh\""));
    assert_eq!(pplab(&["run", &unknown], tmp.path()).status.code(), Some(3));
    let schema = write(tmp.path(), "s.json", &POISSON.replace("\"op\"", "\"operation\""));
    assert_eq!(pplab(&["run", &schema], tmp.path()).status.code(), Some(2));
    // arc with no harmonic measure to speak of: the witness precondition fails in the solver
    let solver = write(
        tmp.path(),
        "w.json",
        r#"{"problem": "w", "op": "witness", "domain": {"kind": "unit-disk", "nx": 32, "ny": 16, "n_boundary": 64}, "phi": {"id": "cos"}, "e_phi": {"kind": "node", "index": 3}}"#,
    );
    assert_eq!(pplab(&["run", &solver], tmp.path()).status.code(), Some(4));
    assert!(!tmp.path().join("w/manifest.json").exists());
    let ok = write(tmp.path(), "p.json", POISSON);
    assert!(pplab(&["run", &ok], tmp.path()).status.success());
    let m = tmp.path().join("p/manifest.json");
    assert_eq!(pplab(&["plot", m.to_str().unwrap(), "--what=masks"], tmp.path()).status.code(), Some(4));
}
