use std::path::Path;

use annulus_cli::scan::{digest_dir, run_scan, ScanConfig, Task, TaskOptions};

fn config(out: &Path, workers: usize) -> ScanConfig {
    ScanConfig {
        delta_grid: vec![0.75, 0.8, 0.85],
        r_grid: vec![1e-4, 5e-4, 1e-3],
        tasks: vec![Task::Cones],
        seed: 42,
        workers,
        output_dir: out.to_path_buf(),
        options: TaskOptions { cone_samples: 500, ..Default::default() },
    }
}

#[test]
fn cones_grid_writes_every_cell() {
    let dir = tempfile::tempdir().unwrap();
    let index = run_scan(&config(dir.path(), 3)).unwrap();
    assert_eq!(index.cells.len(), 9);
    for (k, c) in index.cells.iter().enumerate() {
        assert_eq!(c.index, k);
        assert_eq!(c.status[0].1, "ok", "{c:?}");
        assert!(dir.path().join(format!("cells/cell_{k:04}.json")).exists());
    }
    assert!(dir.path().join("index.json").exists());
}

#[test]
fn scans_are_reproducible_across_worker_counts() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let mut ca = config(a.path(), 4);
    ca.tasks = vec![Task::Cones, Task::Portrait, Task::Normals];
    let mut cb = ca.clone();
    cb.output_dir = b.path().to_path_buf();
    cb.workers = 1;
    let ia = run_scan(&ca).unwrap();
    let ib = run_scan(&cb).unwrap();
    assert_eq!(ia.digest, ib.digest);
    // the index embeds the output directory, the cells do not
    assert_eq!(digest_dir(&a.path().join("cells")).unwrap(), digest_dir(&b.path().join("cells")).unwrap());
}

#[test]
fn inadmissible_cells_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 2);
    cfg.delta_grid = vec![0.5];
    cfg.r_grid = vec![0.2, 0.6];
    cfg.tasks = vec![Task::Cones, Task::Portrait];
    let index = run_scan(&cfg).unwrap();
    let st: Vec<_> = index.cells.iter().map(|c| c.status.iter().map(|s| s.1.as_str()).collect::<Vec<_>>()).collect();
    assert_eq!(st, vec![vec!["skipped", "ok"], vec!["skipped", "skipped"]]);
    let body = std::fs::read_to_string(dir.path().join("cells/cell_0001.json")).unwrap();
    assert!(body.contains("admissible"), "{body}");
}

#[test]
fn config_reads_from_json_with_default_options() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scan.json");
    std::fs::write(
        &path,
        r#"{"delta_grid":[0.8],"r_grid":[0.001],"tasks":["cones","tangency"],"seed":1,"workers":2,"output_dir":"out"}"#,
    )
    .unwrap();
    let cfg = ScanConfig::from_file(&path).unwrap();
    assert_eq!(cfg.options, TaskOptions::default());
    assert_eq!(cfg.tasks, vec![Task::Cones, Task::Tangency]);
}

#[test]
fn empty_grid_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config(dir.path(), 1);
    cfg.r_grid.clear();
    let e = run_scan(&cfg).unwrap_err();
    assert_eq!(annulus_cli::exit_code(&e), 2);
}
