use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fracbubble_cli::output::sha256_hex;
use fracbubble_core::bubble::{alpha_ns, BubblePoint};
use fracbubble_core::field::io::read_raw;
use fracbubble_core::{Grid64, Params64};
use serde_json::Value;

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("fracbubble-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn config_file(dir: &Path, json: &str) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, json).unwrap();
    p
}

fn run(args: &[&str], config: Option<&Path>, out: &Path, threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fracbubble"));
    c.args(args).arg("--out").arg(out).env_remove("FRACBUBBLE_THREADS");
    if let Some(p) = config {
        c.arg("--config").arg(p);
    }
    if let Some(t) = threads {
        c.env("FRACBUBBLE_THREADS", t);
    }
    c.output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const BASE: &str = r#""n":1,"s":0.2,"q":1.5,"eps":0.01"#;

#[test]
fn config_errors_exit_3() {
    let d = scratch("cfg");
    let cases = [
        ("nonpositive", format!(r#"{{{BASE},"weight":{{"bumps":[{{"c":[0],"r":1,"a":-1,"k":2}}]}}}}"#)),
        (
            "sublinear_sign_changing",
            r#"{"n":1,"s":0.2,"q":0.5,"weight":{"bumps":[{"c":[-3],"r":1,"a":1,"k":2},{"c":[3],"r":1,"a":-1,"k":2}]}}"#.to_string(),
        ),
        ("malformed", "{ not json".to_string()),
        ("unknown_field", format!(r#"{{{BASE},"weight":{{"bumps":[{{"c":[0],"r":1,"a":1,"k":2}}]}},"bogus":1}}"#)),
        ("order", r#"{"n":1,"s":0.3,"q":1.0,"weight":{"bumps":[{"c":[0],"r":1,"a":1,"k":2}]}}"#.to_string()),
    ];
    for (name, json) in cases {
        let dir = d.join(name);
        std::fs::create_dir_all(&dir).unwrap();
        let cfg = config_file(&dir, &json);
        let o = run(&["landscape"], Some(&cfg), &dir.join("out"), None);
        assert_eq!(o.status.code(), Some(3), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let o = run(&["verify"], None, &d.join("t"), Some("zero"));
    assert_eq!(o.status.code(), Some(3));
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn coarse_grid_fails_checks_with_exit_1() {
    let d = scratch("coarse");
    for (size, failing) in [(32usize, "bubble.residual"), (64, "landscape.grid_consistency")] {
        let cfg = config_file(&d, &format!(r#"{{{BASE},"weight":{{"bumps":[{{"c":[0],"r":1,"a":1,"k":2}}]}},"grid":{{"N":{size}}}}}"#));
        let out = d.join(format!("n{size}"));
        let o = run(&["verify"], Some(&cfg), &out, None);
        assert_eq!(o.status.code(), Some(1));
        let report = read_json(&out.join("verify.json"));
        let failed: Vec<&str> = report["checks"].as_array().unwrap().iter().filter(|c| c["pass"] == false).map(|c| c["name"].as_str().unwrap()).collect();
        assert!(failed.contains(&failing), "N={size}: failed {failed:?}");
        assert_eq!(report["pass"], false);
    }
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn list_prints_checks() {
    let d = scratch("list");
    let o = run(&["verify", "--list"], None, &d.join("o"), None);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let names: Vec<&str> = text.lines().collect();
    assert_eq!(names, fracbubble_cli::commands::verify::CHECKS);
    assert!(!d.join("o").exists());
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn manifest_matches_files() {
    let d = scratch("manifest");
    let out = d.join("o");
    let o = run(&["landscape"], None, &out, Some("2"));
    assert_eq!(o.status.code(), Some(0));
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["command"], "landscape");
    assert_eq!(m["threads"], 2);
    let files = m["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["path"].as_str().unwrap()).collect();
    assert_eq!(names, ["landscape.csv", "slab.json", "critical_points.json"]);
    for f in files {
        let bytes = std::fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_hex(&bytes));
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, bytes.len());
    }
    let digest = fracbubble_cli::RunConfig::default().digest();
    assert_eq!(m["config_digest"].as_str().unwrap(), digest);
    let csv = std::fs::read_to_string(out.join("landscape.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "mu,xi_1,gamma,dgamma_dmu,dgamma_dxi_1");
    assert_eq!(csv.lines().count(), 1 + 25 * 41);
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn output_is_independent_of_thread_count() {
    let d = scratch("threads");
    let hashes = |t: &str| {
        let out = d.join(format!("t{t}"));
        assert_eq!(run(&["asymptotics"], None, &out, Some(t)).status.code(), Some(0));
        let m = read_json(&out.join("manifest.json"));
        m["files"].clone()
    };
    assert_eq!(hashes("1"), hashes("4"));
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn zero_eps_snapshot_is_the_bubble() {
    let d = scratch("eps0");
    let cfg = config_file(
        &d,
        &format!(r#"{{{BASE},"weight":{{"bumps":[{{"c":[0],"r":1,"a":1,"k":2}}]}},"grid":{{"N":512}},"sweeps":{{"solve":{{"eps_list":[0.0],"law_eps":[1e-3,1e-2]}}}}}}"#),
    );
    let out = d.join("o");
    let o = run(&["solve"], Some(&cfg), &out, None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let meta = read_json(&out.join("solution_max_0.json"));
    let g = &meta["grid"];
    let grid = Grid64::with_center(1, &[g["center"][0].as_f64().unwrap()], g["L"].as_f64().unwrap(), g["N"].as_u64().unwrap() as usize).unwrap();
    let p = Params64::validate(1, 0.2, 1.5, 0.0).unwrap();
    let z = BubblePoint::new(&p, alpha_ns(&p).unwrap(), meta["mu"].as_f64().unwrap(), vec![meta["xi"][0].as_f64().unwrap()]).unwrap().sample(&grid);
    let u = read_raw(&std::fs::read(out.join("solution_max_0.f64")).unwrap());
    let diff = u.iter().zip(z.values()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(diff <= 1e-13 * z.sup_norm(), "{diff:e}");
    let newton = std::fs::read_to_string(out.join("newton_max_0.csv")).unwrap();
    assert_eq!(newton.lines().next().unwrap(), "iter,residual,sup_w,alpha_mu,alpha_xi_1");
    let _ = std::fs::remove_dir_all(&d);
}

#[test]
fn regularity_reports_audit_as_data() {
    let d = scratch("reg");
    let out = d.join("o");
    let o = run(&["regularity"], None, &out, None);
    assert_eq!(o.status.code(), Some(0));
    let r = read_json(&out.join("regularity.json"));
    assert_eq!(r["audit"]["status"], "insufficient_levels");
    assert_eq!(r["trace"]["converged"], true);
    assert!((r["growth"]["theta"].as_f64().unwrap() - 5.0 / 3.0).abs() < 1e-12);
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "k,A_k,U_k,measure");
    assert_eq!(trace.lines().count(), 42);
    assert!(trace.lines().nth(1).unwrap().starts_with("0,"));
    let cfg = config_file(&d, &format!(r#"{{{BASE},"weight":{{"bumps":[{{"c":[0],"r":1,"a":1,"k":2}}]}},"sweeps":{{"regularity":{{"terms":[{{"gamma":9}}]}}}}}}"#));
    assert_eq!(run(&["regularity"], Some(&cfg), &d.join("bad"), None).status.code(), Some(3));
    let _ = std::fs::remove_dir_all(&d);
}
