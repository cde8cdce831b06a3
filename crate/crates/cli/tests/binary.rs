use std::process::Command;

fn annulus(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_annulus")).args(args).output().unwrap()
}

#[test]
fn return_map_prints_json() {
    let out = annulus(&["return-map", "--delta", "0.5", "--r", "0.2", "--omega", "0.3", "--beta", "-0.1"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["class"]["tag"], "returns");
    assert_eq!(v["residuals"].as_array().unwrap().len(), 4);
}

#[test]
fn inadmissible_parameters_exit_with_two() {
    let out = annulus(&["cones", "--delta", "0.5", "--r", "0.6"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("admissible"));
}

#[test]
fn missing_config_exits_with_one() {
    let out = annulus(&["scan", "--config", "/nonexistent/scan.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(annulus(&["portrait", "--delta", "0.5"]).status.code(), Some(2));
}

#[test]
fn portrait_writes_csv_svg_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("p");
    let out = annulus(&["portrait", "--delta", "0.3", "--r", "0.5", "--orbits", "4", "--iters", "50", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(out_dir.join("portrait.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 51);
    assert!(std::fs::read_to_string(out_dir.join("portrait.svg")).unwrap().starts_with("<svg"));
    assert!(out_dir.join("portrait.json").exists());
}

#[test]
fn scan_prints_the_digest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("scan.json");
    std::fs::write(
        &cfg,
        r#"{"delta_grid":[0.8],"r_grid":[0.001,0.002],"tasks":["normals"],"seed":1,"workers":2,"output_dir":"unused"}"#,
    )
    .unwrap();
    let run = |sub: &str| {
        let o = dir.path().join(sub);
        let out = annulus(&["scan", "--config", cfg.to_str().unwrap(), "--output-dir", o.to_str().unwrap()]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        String::from_utf8(out.stdout).unwrap()
    };
    let a = run("a");
    assert_eq!(a.trim().len(), 64);
    assert_eq!(a, run("b"));
}
