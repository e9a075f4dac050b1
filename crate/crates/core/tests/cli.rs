use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rnoid::app::{RunConfig, TEMPLATE};
use rnoid::Error;

fn rnoid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rnoid")).args(args).env_remove("RNOID_CACHE").output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const TRIANGLE: &str = "[polygon]\nedges = [[1.0, 0.0], [-0.5, 0.8660254037844386], [-0.5, -0.8660254037844386]]\n[solver]\nh = 0.2\n";

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        let cfg = RunConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        cfg.polygon().unwrap();
        n += 1;
    }
    assert!(n >= 5);
    // the template spells out the defaults
    let t = RunConfig::from_toml(TEMPLATE).unwrap();
    let minimal = RunConfig::from_toml(
        "[polygon]\nedges = [[1.0, 0.0], [-0.5, 0.8660254037844386], [-0.5, -0.8660254037844386]]\n",
    )
    .unwrap();
    assert_eq!(t, minimal);
    assert_eq!(t.hash(), minimal.hash());
}

#[test]
fn config_errors_are_config_errors() {
    let bad = [
        "",
        "[polygon]\n",
        "[polygon]\nedges = [[1.0, 0.0]]\nstar = [3, 1]\n",
        "[polygon]\nstar = [3, 1]\n[solver]\nh = -0.1\n",
        "[polygon]\nstar = [3, 1]\n[solver]\nsmoothing = 2\n",
        "[polygon]\nstar = [3, 1]\n[solver]\nm = 10.0\nschedule = [[20.0, 8.0, 0.2]]\n",
        "[polygon]\nstar = [3, 1]\n[solver]\nh = 0.1\nschedule = [[5.0, 8.0, 0.05]]\n",
        "[polygon]\nstar = [3, 1]\n[period]\nsamples = 0\n",
        "[polygon\nstar = [3, 1]\n",
    ];
    for text in bad {
        assert!(matches!(RunConfig::from_toml(text), Err(Error::ConfigError(_))), "{text:?}");
    }
    let ok = "[polygon]\nstar = [3, 1]\n[solver]\nm = 10.0\nh = 0.1\nschedule = [[2.0, 8.0, 0.2], [5.0, 8.0, 0.1]]\n";
    assert!(RunConfig::from_toml(ok).is_ok());
    // not a valid star, found when the polygon is built
    let cfg = RunConfig::from_toml("[polygon]\nstar = [4, 2]\n").unwrap();
    assert!(matches!(cfg.polygon(), Err(Error::InvalidStar { .. })));
}

#[test]
fn hash_follows_content_not_layout() {
    let a = RunConfig::from_toml(TRIANGLE).unwrap();
    let b = RunConfig::from_toml(&format!("# comment\n{TRIANGLE}\n[output]\ncache = true\n")).unwrap();
    assert_eq!(a.hash(), b.hash());
    let c = RunConfig::from_toml(&TRIANGLE.replace("0.2", "0.25")).unwrap();
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 16);
}

#[test]
fn malformed_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "[polygon]\nedges = [[1.0, 0.0], [0.0, 1.0]]\nwidth = 3\n");
    let out = rnoid(&["mesh", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error ConfigError:"), "{err}");
    let missing = rnoid(&["mesh", "--config", dir.path().join("none.toml").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
    let unknown = rnoid(&["smooth", "--config", cfg.to_str().unwrap()]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn other_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    // edges that do not close
    let cfg = write(dir.path(), "open.toml", "[polygon]\nedges = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]\n");
    let out = rnoid(&["mesh", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error ClosureViolation:"), "{err}");
    // star command without a star polygon
    let cfg = write(dir.path(), "tri.toml", TRIANGLE);
    let out = rnoid(&["star", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mesh_and_solve_write_headed_deterministic_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = write(dir.path(), "tri.toml", TRIANGLE);
    let hash = RunConfig::load(&cfg_path).unwrap().hash();
    let mut runs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("o{k}"));
        let mut bytes = Vec::new();
        for cmd in ["mesh", "solve"] {
            let o = rnoid(&[cmd, "--config", cfg_path.to_str().unwrap(), "--out", out.to_str().unwrap(), "--jobs", "2"]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        }
        for name in ["mesh.txt", "field.txt", "schedule.csv"] {
            let text = fs::read_to_string(out.join(name)).unwrap();
            assert!(text.lines().next().unwrap().ends_with(&format!("config {hash}")), "{name}");
            bytes.push(text);
        }
        runs.push(bytes);
    }
    assert_eq!(runs[0], runs[1]);
    let mesh = rnoid::domain::read_mesh(&runs[0][0]).unwrap();
    assert!(!mesh.nodes.is_empty());
    let field = &runs[0][1];
    assert!(field.lines().nth(1).unwrap().starts_with("c -"));
    assert_eq!(field.lines().count(), mesh.nodes.len() + 2);
}

#[test]
fn star_command_reports_checks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "tri.toml", "[polygon]\nstar = [3, 1]\n[solver]\nh = 0.15\n");
    let o = rnoid(&["star", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = fs::read_to_string(dir.path().join("validate.txt")).unwrap();
    for name in ["period_norm", "closure_gap", "flux_norm_rel", "flux_angle_deg", "total_curvature_rel"] {
        assert!(report.lines().any(|l| l.starts_with(name)), "{name}");
    }
    let line = report.lines().find(|l| l.starts_with("period_norm")).unwrap();
    assert!(line.ends_with("PASS"));
    assert!(fs::read_to_string(dir.path().join("surface.txt")).unwrap().lines().any(|l| l.starts_with("f ")));
}
