use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use shapeopt::mesh::{read_native, write_atomic, write_native, write_vtk, VtkField};
use shapeopt::optimize::{run, OptHistory, Status, THRESHOLDS};
use shapeopt::shape::{fd_check, random_smooth_field, FdReport};
use shapeopt::{Method, NodalField, ShapeFunctional, TriMesh};

use crate::bench::{build, initial_mesh};
use crate::config::RunConfig;
use crate::with_problem;

pub const HISTORY_FILE: &str = "history.csv";
pub const INITIAL_MESH_FILE: &str = "initial.mesh";
pub const FD_REL_TOL: f64 = 1e-4;
pub const FD_MIN_ORDER: f64 = 1.8;
pub const FD_STEPS: [f64; 3] = [1e-3, 1e-4, 1e-5];

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: Status,
    pub iterations: usize,
    pub final_cost: f64,
    pub state_solves: usize,
    pub adjoint_solves: usize,
    pub elapsed: Duration,
}

impl std::fmt::Display for RunSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "status={} iterations={} cost={:.10e} state_solves={} adjoint_solves={} time={:.1}s",
            self.status,
            self.iterations,
            self.final_cost,
            self.state_solves,
            self.adjoint_solves,
            self.elapsed.as_secs_f64()
        )
    }
}

impl RunSummary {
    fn new(h: &OptHistory, elapsed: Duration) -> Self {
        Self {
            status: h.status.clone(),
            iterations: h.iterations(),
            final_cost: h.final_cost(),
            state_solves: h.state_solves(),
            adjoint_solves: h.adjoint_solves(),
            elapsed,
        }
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub initial: TriMesh,
    pub mesh: TriMesh,
    pub history: OptHistory,
    pub summary: RunSummary,
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_state_vtk<P: ShapeFunctional>(problem: &P, mesh: &TriMesh, path: &Path) -> Result<()> {
    let fields: Vec<(String, NodalField)> = match problem.solve_state(mesh) {
        Ok(s) => problem.state_fields(mesh, &s),
        Err(e) => {
            log::warn!("no state fields for {}: {e}", path.display());
            Vec::new()
        }
    };
    let regions: Vec<f64> = (0..mesh.n_triangles())
        .map(|t| mesh.region_names().iter().position(|r| r == mesh.region_name(t)).unwrap_or(0) as f64)
        .collect();
    let mut vtk: Vec<VtkField<'_>> = fields.iter().map(|(n, f)| VtkField::Point(n, f)).collect();
    vtk.push(VtkField::Cell("region", &regions));
    write_vtk(path, mesh, &vtk).with_context(|| format!("writing {}", path.display()))
}

/// Optimizes from `mesh0` without touching the file system, apart from the
/// EIT measurement cache in `cache_dir`.
pub fn optimize(cfg: &RunConfig, mesh0: &TriMesh, cache_dir: Option<&Path>, record_coords: bool) -> Result<RunOutput> {
    let mut opts = cfg.run_options()?;
    opts.record_coords = record_coords;
    let bench = build(cfg, mesh0, cache_dir)?;
    let start = Instant::now();
    let (mesh, history) = with_problem!(&bench, p => run(p, mesh0, &opts))?;
    let summary = RunSummary::new(&history, start.elapsed());
    Ok(RunOutput { initial: mesh0.clone(), mesh, history, summary })
}

/// One optimization run: writes the configuration, history, initial and
/// final meshes and VTK files, and a summary line into `cfg.out`.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    create_dir(&cfg.out)?;
    write_atomic(cfg.out.join("config.txt"), cfg.to_kv())?;
    let mesh0 = initial_mesh(cfg)?;
    write_native(cfg.out.join(INITIAL_MESH_FILE), &mesh0)?;
    let out = optimize(cfg, &mesh0, Some(&cfg.out), false)?;
    write_atomic(cfg.out.join(HISTORY_FILE), out.history.to_csv())?;
    write_native(cfg.out.join("final.mesh"), &out.mesh)?;
    let bench = build(cfg, &mesh0, Some(&cfg.out))?;
    with_problem!(&bench, p => {
        write_state_vtk(p, &mesh0, &cfg.out.join("initial.vtk"))?;
        write_state_vtk(p, &out.mesh, &cfg.out.join("final.vtk"))?;
    });
    write_atomic(cfg.out.join("summary.txt"), format!("{}\n", out.summary))?;
    Ok(out)
}

/// One row of a comparison table.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub method: Method,
    pub outcome: std::result::Result<CompareEntry, String>,
}

#[derive(Debug, Clone)]
pub struct CompareEntry {
    pub thresholds: [Option<usize>; 6],
    pub summary: RunSummary,
    pub history: OptHistory,
}

#[derive(Debug, Clone)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
}

fn threshold_label(t: f64) -> String {
    let s = format!("{t:e}");
    let (m, e) = s.split_once('e').unwrap_or((&s, "0"));
    format!("{m}e{e}")
}

impl CompareTable {
    pub fn header() -> Vec<String> {
        let mut h = vec!["method".to_string()];
        h.extend(THRESHOLDS.iter().map(|t| format!("it_{}", threshold_label(*t))));
        h.push("state_solves".into());
        h.push("adjoint_solves".into());
        h
    }

    fn cells(row: &CompareRow) -> Vec<String> {
        let mut c = vec![row.method.to_string()];
        match &row.outcome {
            Ok(e) => {
                c.extend(e.thresholds.iter().map(|k| k.map_or("-".to_string(), |k| k.to_string())));
                c.push(e.summary.state_solves.to_string());
                c.push(e.summary.adjoint_solves.to_string());
            }
            Err(_) => c.extend(std::iter::repeat_n("-".to_string(), 8)),
        }
        c
    }

    pub fn to_csv(&self) -> String {
        let mut s = Self::header().join(",");
        s.push('\n');
        for r in &self.rows {
            s += &Self::cells(r).join(",");
            s.push('\n');
        }
        s
    }

    pub fn to_text(&self) -> String {
        let mut rows = vec![Self::header()];
        rows.extend(self.rows.iter().map(Self::cells));
        let widths: Vec<usize> =
            (0..rows[0].len()).map(|j| rows.iter().map(|r| r[j].chars().count()).max().unwrap_or(0)).collect();
        let mut s = String::new();
        for r in &rows {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(j, (c, w))| if j == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
                .collect();
            s += line.join("  ").trim_end();
            s.push('\n');
        }
        for r in &self.rows {
            match &r.outcome {
                Ok(e) => {
                    let _ = writeln!(s, "{}: {}", r.method, e.summary);
                }
                Err(msg) => {
                    let _ = writeln!(s, "{}: error: {msg}", r.method);
                }
            }
        }
        s
    }
}

fn method_dir(out: &Path, m: Method) -> PathBuf {
    out.join(m.to_string())
}

/// Runs every method from the same initial mesh file. Rows run on up to
/// `jobs` threads; each writes its history into `out/<method>/`. A failing
/// row is reported in the table without stopping the others.
pub fn cmd_compare(cfg: &RunConfig, methods: &[Method], jobs: usize) -> Result<CompareTable> {
    if methods.is_empty() {
        bail!("compare needs at least one method");
    }
    cfg.validate()?;
    create_dir(&cfg.out)?;
    write_atomic(cfg.out.join("config.txt"), cfg.to_kv())?;
    let mesh_path = cfg.out.join(INITIAL_MESH_FILE);
    write_native(&mesh_path, &initial_mesh(cfg)?)?;
    if cfg.problem == crate::config::ProblemKind::Eit {
        // synthesize the shared measurement file before the rows start
        crate::bench::eit_measurements(cfg, Some(&cfg.out))?;
    }

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<CompareRow>>> = Mutex::new(vec![None; methods.len()]);
    let row = |method: Method| -> std::result::Result<CompareEntry, String> {
        let inner = || -> Result<CompareEntry> {
            let mut c = cfg.clone();
            c.method = method;
            let dir = method_dir(&cfg.out, method);
            create_dir(&dir)?;
            let mesh0 = read_native(&mesh_path)?;
            let out = optimize(&c, &mesh0, Some(&cfg.out), false)?;
            write_atomic(dir.join(HISTORY_FILE), out.history.to_csv())?;
            write_atomic(dir.join("summary.txt"), format!("{}\n", out.summary))?;
            Ok(CompareEntry {
                thresholds: out.history.threshold_iterations(),
                summary: out.summary,
                history: out.history,
            })
        };
        inner().map_err(|e| format!("{e:#}"))
    };
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, methods.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&method) = methods.get(i) else { break };
                let outcome = row(method);
                if let Err(e) = &outcome {
                    log::error!("{method}: {e}");
                }
                results.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(CompareRow { method, outcome });
            });
        }
    });
    let rows = results
        .into_inner()
        .unwrap_or_else(|e| e.into_inner())
        .into_iter()
        .map(|r| r.ok_or_else(|| anyhow!("comparison worker panicked")))
        .collect::<Result<Vec<_>>>()?;
    let table = CompareTable { rows };
    write_atomic(cfg.out.join("compare.csv"), table.to_csv())?;
    write_atomic(cfg.out.join("compare.txt"), table.to_text())?;
    Ok(table)
}

/// Finite-difference check of one seeded field.
#[derive(Debug)]
pub struct FieldCheck {
    pub seed: u64,
    pub report: std::result::Result<FdReport, String>,
}

impl FieldCheck {
    /// Relative error at the smallest step within tolerance and, when at
    /// least two steps were taken, observed order at least 1.8.
    pub fn passed(&self) -> bool {
        let Ok(r) = &self.report else { return false };
        let Some(last) = r.rows.iter().min_by(|a, b| a.t.total_cmp(&b.t)) else { return false };
        let order_ok = r.rows.len() < 2 || r.observed_order().is_some_and(|o| o >= FD_MIN_ORDER);
        last.rel_error <= FD_REL_TOL && order_ok
    }
}

#[derive(Debug)]
pub struct DerivativeCheck {
    pub fields: Vec<FieldCheck>,
    pub elapsed: Duration,
}

impl DerivativeCheck {
    pub fn passed(&self) -> bool {
        !self.fields.is_empty() && self.fields.iter().all(FieldCheck::passed)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for f in &self.fields {
            let verdict = if f.passed() { "pass" } else { "FAIL" };
            let _ = writeln!(s, "field seed={} {verdict}", f.seed);
            match &f.report {
                Ok(r) => {
                    let order = r.observed_order().map_or("-".into(), |o| format!("{o:.3}"));
                    let _ = write!(s, "{r}");
                    let _ = writeln!(s, "observed order {order}");
                }
                Err(e) => {
                    let _ = writeln!(s, "error: {e}");
                }
            }
            s.push('\n');
        }
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "{verdict}: {} fields, tolerance {FD_REL_TOL:e}, minimum order {FD_MIN_ORDER}",
            self.fields.len()
        );
        s
    }
}

/// Compares the assembled shape derivative with central differences along
/// `n_fields` seeded random fields (seeds `cfg.seed`, `cfg.seed + 1`, ...).
pub fn check_derivative(
    cfg: &RunConfig,
    n_fields: usize,
    steps: &[f64],
    cache_dir: Option<&Path>,
) -> Result<DerivativeCheck> {
    let mesh = initial_mesh(cfg)?;
    let bench = build(cfg, &mesh, cache_dir)?;
    let start = Instant::now();
    let fields = with_problem!(&bench, p => {
        (0..n_fields as u64)
            .map(|i| {
                let seed = cfg.seed + i;
                let report = random_smooth_field(&mesh, seed, p.fixed_tags(), |x| p.test_field_weight(x))
                    .and_then(|v| fd_check(p, &mesh, &v, steps))
                    .map_err(|e| e.to_string());
                FieldCheck { seed, report }
            })
            .collect::<Vec<_>>()
    });
    Ok(DerivativeCheck { fields, elapsed: start.elapsed() })
}

/// `check-derivative`: writes `fd_report.txt` into `cfg.out`.
pub fn cmd_check_derivative(cfg: &RunConfig, n_fields: usize, steps: &[f64]) -> Result<DerivativeCheck> {
    cfg.validate()?;
    create_dir(&cfg.out)?;
    let check = check_derivative(cfg, n_fields, steps, Some(&cfg.out))?;
    write_atomic(cfg.out.join("fd_report.txt"), check.to_text())?;
    Ok(check)
}

/// Size, quality and boundary tags of a mesh.
pub fn mesh_info(mesh: &TriMesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "nodes      {}", mesh.n_nodes());
    let _ = writeln!(s, "triangles  {}", mesh.n_triangles());
    let _ = writeln!(s, "area       {:.12}", mesh.total_area());
    let _ = writeln!(s, "min angle  {:.3} deg", mesh.min_angle_deg());
    for r in mesh.region_names() {
        let _ = writeln!(s, "region {r:<10} area {:.12}", mesh.region_area(r));
    }
    for tag in mesh.tag_names() {
        let facets = mesh.facets_with_tag(tag).count();
        let nodes = mesh.nodes_on_tags(&[tag]).iter().filter(|b| **b).count();
        let _ = writeln!(s, "tag {tag:<10} {facets} facets, {nodes} nodes");
    }
    s
}

/// `mesh-info` for a mesh file, or for the generated initial mesh of `cfg`.
pub fn cmd_mesh_info(cfg: &RunConfig, path: Option<&Path>) -> Result<String> {
    let mesh = match path {
        Some(p) if p.extension().is_some_and(|e| e == "msh") => shapeopt::mesh::read_gmsh2(p)?,
        Some(p) => read_native(p)?,
        None => initial_mesh(cfg)?,
    };
    Ok(mesh_info(&mesh))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_labels() {
        assert_eq!(
            CompareTable::header().join(","),
            "method,it_1e-1,it_5e-2,it_1e-2,it_5e-3,it_1e-3,it_5e-4,state_solves,adjoint_solves"
        );
    }
}
