//! Parameter scans over a `(delta, r)` grid.
//!
//! Cells are independent. Each writes its own report, and the index lists the
//! cells in grid order with a SHA-256 digest of every file, so two runs of one
//! configuration can be compared by digest alone.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use annulus::phase::Params;
use annulus::tangency::{branch_at, tangent_normal, PointFamily, TangencyConfig};
use annulus::{Error, Execution};

use crate::commands;
use crate::output::{ensure_dir, to_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Cones,
    Normals,
    Strips,
    Tangency,
    Portrait,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TaskOptions {
    pub cone_samples: usize,
    pub m_max: usize,
    pub min_points: usize,
    pub portrait_orbits: usize,
    pub portrait_iters: usize,
    pub tangency_p_over_q: (u32, u32),
    pub tangency_m_max: usize,
}

impl Default for TaskOptions {
    fn default() -> Self {
        TaskOptions {
            cone_samples: 2000,
            m_max: 12,
            min_points: 5,
            portrait_orbits: 20,
            portrait_iters: 200,
            tangency_p_over_q: (1, 3),
            tangency_m_max: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub delta_grid: Vec<f64>,
    pub r_grid: Vec<f64>,
    pub tasks: Vec<Task>,
    pub seed: u64,
    pub workers: usize,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub options: TaskOptions,
}

impl ScanConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.delta_grid.is_empty() || self.r_grid.is_empty() {
            bail!(Error::Precondition("empty parameter grid".into()));
        }
        if self.workers == 0 {
            bail!(Error::Precondition("workers must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Ok { report: Value },
    Skipped { reason: String },
    Failed { error: String },
}

impl Outcome {
    fn status(&self) -> &'static str {
        match self {
            Outcome::Ok { .. } => "ok",
            Outcome::Skipped { .. } => "skipped",
            Outcome::Failed { .. } => "failed",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CellReport {
    pub index: usize,
    pub delta: f64,
    pub r: f64,
    pub results: Vec<(Task, Outcome)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IndexEntry {
    pub index: usize,
    pub delta: f64,
    pub r: f64,
    pub status: Vec<(Task, String)>,
    pub files: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanIndex {
    pub config: ScanConfig,
    pub cells: Vec<IndexEntry>,
    /// Digest of the per-file digests in grid order.
    pub digest: String,
}

pub fn sha256(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn report<T: Serialize>(r: annulus::Result<T>) -> Outcome {
    match r {
        Ok(v) => match serde_json::to_value(v) {
            Ok(report) => Outcome::Ok { report },
            Err(e) => Outcome::Failed { error: e.to_string() },
        },
        Err(e) if e.is_precondition() => Outcome::Skipped { reason: e.to_string() },
        Err(e) => Outcome::Failed { error: e.to_string() },
    }
}

#[derive(Serialize)]
struct BranchSummary {
    pullback_m: usize,
    min_beta: f64,
    min_omega: f64,
    interior_min: bool,
    l0_crossings: usize,
    arc_disjoint_from_l0: bool,
}

fn tangency_cell(p: &Params, opts: &TaskOptions) -> annulus::Result<BranchSummary> {
    let (pn, qn) = opts.tangency_p_over_q;
    let t = tangent_normal(pn, qn, opts.tangency_m_max)
        .ok_or_else(|| Error::Precondition(format!("no tangent normal point of {pn}/{qn}")))?;
    if p.delta <= t.delta {
        return Err(Error::Precondition(format!("delta = {} is not above {}", p.delta, t.delta)));
    }
    let family = PointFamily::fixed(p.delta, 0.0, 0)?;
    let b = branch_at(&family, p.r, &TangencyConfig::new(t.m))?;
    Ok(BranchSummary {
        pullback_m: t.m,
        min_beta: b.min.point.beta,
        min_omega: b.min.point.omega,
        interior_min: b.interior_min,
        l0_crossings: b.l0_crossings,
        arc_disjoint_from_l0: b.arc_disjoint_from_l0,
    })
}

/// Runs one cell. Extra files (portrait CSV) are returned with their names.
fn run_cell(cfg: &ScanConfig, index: usize, delta: f64, r: f64) -> (CellReport, Vec<(String, String)>) {
    let opts = &cfg.options;
    // cells already run on the scan pool
    let exec = Execution::Sequential;
    let mut extra = Vec::new();
    let params = Params::new(delta, r);
    let results = cfg
        .tasks
        .iter()
        .map(|&task| {
            let p = match &params {
                Ok(p) => p,
                Err(e) => return (task, Outcome::Skipped { reason: e.to_string() }),
            };
            let outcome = match task {
                Task::Cones if !p.in_cone_regime() => Outcome::Skipped {
                    reason: format!("cone estimates need delta^2 > 1/2 and r < (delta - delta^2)/4, got {p:?}"),
                },
                Task::Cones => report(commands::cones(p, opts.cone_samples, cfg.seed, exec)),
                Task::Normals => report(commands::normals(delta, opts.m_max, Some(opts.min_points))),
                Task::Strips => report(commands::strips(p, opts.m_max, opts.min_points, None, exec).map(|s| s.report)),
                Task::Tangency => report(tangency_cell(p, opts)),
                Task::Portrait => {
                    let port = commands::portrait(p, opts.portrait_orbits, opts.portrait_iters, cfg.seed, exec);
                    match port.csv() {
                        Ok(csv) => {
                            extra.push((format!("cell_{index:04}_portrait.csv"), csv));
                            report(Ok(port.report))
                        }
                        Err(e) => Outcome::Failed { error: e.to_string() },
                    }
                }
            };
            (task, outcome)
        })
        .collect();
    (CellReport { index, delta, r, results }, extra)
}

fn map_cells<T: Send>(workers: usize, n: usize, f: impl Fn(usize) -> T + Sync + Send) -> Result<Vec<T>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
        Ok(pool.install(|| (0..n).into_par_iter().map(f).collect()))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = workers;
        Ok((0..n).map(f).collect())
    }
}

pub fn run_scan(cfg: &ScanConfig) -> Result<ScanIndex> {
    cfg.validate()?;
    let cells_dir = cfg.output_dir.join("cells");
    ensure_dir(&cells_dir)?;
    let grid: Vec<(f64, f64)> = cfg.delta_grid.iter().flat_map(|&d| cfg.r_grid.iter().map(move |&r| (d, r))).collect();
    let written = map_cells(cfg.workers, grid.len(), |k| -> Result<IndexEntry> {
        let (delta, r) = grid[k];
        let (cell, extra) = run_cell(cfg, k, delta, r);
        let mut files = Vec::new();
        let name = format!("cell_{k:04}.json");
        let body = to_json(&cell)?;
        fs::write(cells_dir.join(&name), &body)?;
        files.push((format!("cells/{name}"), sha256(body.as_bytes())));
        for (name, body) in extra {
            fs::write(cells_dir.join(&name), &body)?;
            files.push((format!("cells/{name}"), sha256(body.as_bytes())));
        }
        let status = cell.results.iter().map(|(t, o)| (*t, o.status().to_string())).collect();
        Ok(IndexEntry { index: k, delta, r, status, files })
    })?;
    let cells = written.into_iter().collect::<Result<Vec<_>>>()?;
    let mut h = Sha256::new();
    for c in &cells {
        for (name, d) in &c.files {
            h.update(name.as_bytes());
            h.update(d.as_bytes());
        }
    }
    let index = ScanIndex { config: cfg.clone(), cells, digest: hex::encode(h.finalize()) };
    fs::write(cfg.output_dir.join("index.json"), to_json(&index)?)?;
    Ok(index)
}

/// Digest of a whole output directory: relative paths and contents in sorted order.
pub fn digest_dir(root: &Path) -> Result<String> {
    let mut h = Sha256::new();
    for e in WalkDir::new(root).sort_by_file_name() {
        let e = e?;
        if e.file_type().is_file() {
            let rel = e.path().strip_prefix(root)?.to_string_lossy().replace('\\', "/");
            h.update(rel.as_bytes());
            h.update(fs::read(e.path())?);
        }
    }
    Ok(hex::encode(h.finalize()))
}
