//! On-disk formats: CSV tables with a header row and the JSON run manifest.
//!
//! Quadrotor columns are indexed by the node the vehicle sits on, link
//! columns by link number `1..=n`. Rotation matrices are written row-major as
//! `R{j}.{row}{col}` with 1-based indices.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use flexhose::flatness::DesiredPoint;
use flexhose::geometry::{Mat3, Vec3};
use flexhose::linearization::{state_label, Layout, LinearizedSystem};
use flexhose::sim::{BenchmarkRow, LogRecord};
use flexhose::SystemParams;

use crate::config::Config;
use crate::CliError;

/// Bumped whenever a column is added, removed or renamed.
pub const SCHEMA_VERSION: u32 = 1;

const AXES: [&str; 3] = ["x", "y", "z"];

fn vec_cols(name: &str) -> impl Iterator<Item = String> + '_ {
    AXES.iter().map(move |a| format!("{name}.{a}"))
}

fn mat_cols(name: &str) -> impl Iterator<Item = String> + '_ {
    (1..=3).flat_map(move |r| (1..=3).map(move |c| format!("{name}.{r}{c}")))
}

/// Shortest text that parses back to the same `f64`, in exponent form for
/// very small or very large magnitudes.
pub fn num(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

fn push_vec(rec: &mut Vec<String>, v: &Vec3) {
    rec.extend(v.iter().map(|x| num(*x)));
}

fn push_mat(rec: &mut Vec<String>, m: &Mat3) {
    for r in 0..3 {
        for c in 0..3 {
            rec.push(num(m[(r, c)]));
        }
    }
}

/// Column names of the simulation log.
pub fn log_header(params: &SystemParams) -> Vec<String> {
    let n = params.n();
    let nodes = params.attachments();
    let mut h = vec!["t".to_string()];
    h.extend(vec_cols("x0"));
    h.extend(vec_cols("v0"));
    for i in 1..=n {
        h.extend(vec_cols(&format!("q{i}")));
    }
    for i in 1..=n {
        h.extend(vec_cols(&format!("w{i}")));
    }
    h.extend((1..=n).map(|i| format!("psi_q{i}")));
    for k in &nodes {
        h.extend(mat_cols(&format!("R{k}")));
    }
    h.extend(nodes.iter().map(|k| format!("psi_R{k}")));
    h.extend(nodes.iter().map(|k| format!("f{k}")));
    for k in &nodes {
        h.extend(vec_cols(&format!("M{k}")));
    }
    h.extend(["energy.T", "energy.U", "energy.total"].map(String::from));
    h.extend(["defect.qnorm", "defect.qw", "defect.orth"].map(String::from));
    h
}

pub fn log_row(rec: &LogRecord) -> Vec<String> {
    let s = &rec.state;
    let mut row = vec![num(rec.t)];
    push_vec(&mut row, &s.x0);
    push_vec(&mut row, &s.v0);
    s.q.iter().for_each(|q| push_vec(&mut row, q));
    s.omega.iter().for_each(|w| push_vec(&mut row, w));
    row.extend(rec.psi_q.iter().map(|x| num(*x)));
    s.rot.iter().for_each(|r| push_mat(&mut row, r));
    row.extend(rec.psi_r.iter().map(|x| num(*x)));
    row.extend(rec.input.thrust.iter().map(|x| num(*x)));
    rec.input.moment.iter().for_each(|m| push_vec(&mut row, m));
    row.extend([rec.energy.kinetic, rec.energy.potential, rec.energy.total].map(num));
    row.extend([rec.defects.qnorm, rec.defects.qw, rec.defects.orth].map(num));
    row
}

/// Column names of the planned trajectory: the full desired state and
/// input, the link tensions and the dynamics residual.
pub fn plan_header(params: &SystemParams) -> Vec<String> {
    let n = params.n();
    let nodes = params.attachments();
    let mut h = vec!["t".to_string()];
    h.extend(vec_cols("x0"));
    h.extend(vec_cols("v0"));
    for i in 1..=n {
        h.extend(vec_cols(&format!("q{i}")));
    }
    for i in 1..=n {
        h.extend(vec_cols(&format!("w{i}")));
    }
    for k in &nodes {
        h.extend(mat_cols(&format!("R{k}")));
    }
    for k in &nodes {
        h.extend(vec_cols(&format!("W{k}")));
    }
    h.extend(nodes.iter().map(|k| format!("f{k}")));
    for k in &nodes {
        h.extend(vec_cols(&format!("M{k}")));
    }
    for i in 1..=n {
        h.extend(vec_cols(&format!("T{i}")));
    }
    h.push("residual".into());
    h
}

pub fn plan_row(p: &DesiredPoint, residual: f64) -> Vec<String> {
    let s = &p.state;
    let mut row = vec![num(p.t)];
    push_vec(&mut row, &s.x0);
    push_vec(&mut row, &s.v0);
    s.q.iter().for_each(|q| push_vec(&mut row, q));
    s.omega.iter().for_each(|w| push_vec(&mut row, w));
    s.rot.iter().for_each(|r| push_mat(&mut row, r));
    s.ang_vel.iter().for_each(|w| push_vec(&mut row, w));
    row.extend(p.input.thrust.iter().map(|x| num(*x)));
    p.input.moment.iter().for_each(|m| push_vec(&mut row, m));
    p.tensions.iter().for_each(|t| push_vec(&mut row, t));
    row.push(num(residual));
    row
}

pub const LINEARIZATION_HEADER: [&str; 7] = ["t", "matrix", "row", "col", "row_label", "col_label", "value"];

/// Name of input column `c`, e.g. `df10` or `dM0.z`.
pub fn input_label(params: &SystemParams, c: usize) -> String {
    let nodes = params.attachments();
    let nq = nodes.len();
    if c < nq {
        format!("df{}", nodes[c])
    } else {
        format!("dM{}.{}", nodes[(c - nq) / 3], AXES[(c - nq) % 3])
    }
}

/// Nonzero entries of `A`, `B` and the constraint matrix `C` at every
/// sample, row-major within each matrix.
pub fn linearization_rows(params: &SystemParams, sys: &LinearizedSystem) -> Vec<Vec<String>> {
    let lay = Layout::new(params);
    flexhose::linearization::dump_entries(sys)
        .into_iter()
        .map(|(t, name, r, c, v)| {
            let (rl, cl) = match name {
                "A" => (state_label(&lay, r), state_label(&lay, c)),
                "B" => (state_label(&lay, r), input_label(params, c)),
                _ => (format!("c{r}"), state_label(&lay, c)),
            };
            vec![num(t), name.to_string(), r.to_string(), c.to_string(), rl, cl, num(v)]
        })
        .collect()
}

pub const BENCHMARK_HEADER: [&str; 2] = ["n", "wall_seconds"];

pub fn benchmark_row(row: &BenchmarkRow) -> Vec<String> {
    vec![row.n.to_string(), num(row.wall_seconds)]
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Writes `header` then `rows`.
pub fn write_csv<H, R>(path: &Path, header: &[H], rows: R) -> Result<(), CliError>
where
    H: AsRef<str>,
    R: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header.iter().map(AsRef::as_ref)).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Record of one invocation. Passing it back as `--config` re-runs the
/// command with the same resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool_version: String,
    pub command: String,
    pub config_path: PathBuf,
    /// The configuration after command-line overrides.
    pub config: Config,
    pub seed: u64,
    pub outputs: Vec<PathBuf>,
    pub wall_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diverged: Option<bool>,
}

impl RunManifest {
    pub fn new(command: &str, config_path: &Path, config: &Config) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_path: config_path.to_path_buf(),
            config: config.clone(),
            seed: config.scenario.seed,
            outputs: Vec::new(),
            wall_seconds: 0.0,
            diverged: None,
        }
    }

    /// Writes `manifest.json` in `dir` through a temporary file and a
    /// rename, so a reader never sees a partial manifest.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join("manifest.json");
        let tmp = dir.join(".manifest.json.tmp");
        let text = serde_json::to_string_pretty(self).map_err(|e| io_err(&path, e))?;
        fs::write(&tmp, text + "\n").map_err(|e| io_err(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}
