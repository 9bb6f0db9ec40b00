//! Config text, snapshot tables, run manifests, reports and figure data.
//!
//! Config files are `key = value` lines; `#` starts a comment. Tables are
//! tab-separated with a header row and 17 significant digits.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnostics::{derived_fields, InvariantReport};
use crate::ensemble::{EnsembleState, SimConfig, SpatialGrid, Tolerances, WeightFunction};
use crate::error::{Error, Result};
use crate::numerics::{interpolate, StencilOrder};
use crate::quantum::SnapshotSeries;

const KEYS: &[&str] = &[
    "mass",
    "hbar",
    "c",
    "weight.kind",
    "weight.a",
    "weight.kappa",
    "grid.min",
    "grid.max",
    "grid.n",
    "time.final",
    "time.dt",
    "time.every",
    "stencil.order",
    "tol.residual",
    "tol.invariant",
    "tol.interp",
    "init.boost",
];

/// Parses and validates a config file.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    let mut entries: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: line_no, message: format!("expected `key = value`, got `{line}`") })?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(Error::Parse { line: line_no, message: format!("unknown key `{key}`") });
        }
        if value.is_empty() {
            return Err(Error::Parse { line: line_no, message: format!("empty value for `{key}`") });
        }
        if entries.insert(key, (line_no, value)).is_some() {
            return Err(Error::Parse { line: line_no, message: format!("duplicate key `{key}`") });
        }
    }

    let num = |key: &str| -> Result<Option<f64>> {
        entries
            .get(key)
            .map(|&(line, v)| {
                v.parse::<f64>().map_err(|_| Error::Parse { line, message: format!("`{key}`: `{v}` is not a number") })
            })
            .transpose()
    };
    let required = |key: &str| -> Result<f64> { num(key)?.ok_or_else(|| Error::config(key, "is required")) };
    let count = |key: &str| -> Result<Option<usize>> {
        entries
            .get(key)
            .map(|&(line, v)| {
                v.parse::<usize>()
                    .map_err(|_| Error::Parse { line, message: format!("`{key}`: `{v}` is not a whole number") })
            })
            .transpose()
    };

    let weight = match entries.get("weight.kind").map(|&(line, v)| (line, v)) {
        None => return Err(Error::config("weight.kind", "is required")),
        Some((_, "gaussian")) => WeightFunction::Gaussian { a: required("weight.a")? },
        Some((_, "exponential")) => WeightFunction::Exponential { kappa: required("weight.kappa")? },
        Some((_, "uniform")) => WeightFunction::Uniform,
        Some((line, other)) => {
            return Err(Error::Parse { line, message: format!("weight.kind `{other}` is not gaussian, exponential or uniform") })
        }
    };
    let unused = match weight {
        WeightFunction::Gaussian { .. } => ["weight.kappa"].as_slice(),
        WeightFunction::Exponential { .. } => ["weight.a"].as_slice(),
        WeightFunction::Uniform => ["weight.a", "weight.kappa"].as_slice(),
    };
    for key in unused {
        if let Some(&(line, _)) = entries.get(key) {
            return Err(Error::Parse { line, message: format!("`{key}` does not apply to weight.kind = {}", weight.name()) });
        }
    }

    let n = count("grid.n")?.ok_or_else(|| Error::config("grid.n", "is required"))?;
    let grid = SpatialGrid::new(required("grid.min")?, required("grid.max")?, n)
        .map_err(|e| Error::config("grid", e.to_string()))?;
    let stencil_order = match count("stencil.order")? {
        None => StencilOrder::Fourth,
        Some(p) => StencilOrder::from_accuracy(p).ok_or_else(|| Error::config("stencil.order", format!("must be 2 or 4, got {p}")))?,
    };
    let defaults = Tolerances::default();
    let mut config = SimConfig::new(required("c")?, weight, grid, required("time.final")?);
    config.mass = num("mass")?.unwrap_or(1.0);
    config.hbar = num("hbar")?.unwrap_or(1.0);
    config.dt = num("time.dt")?.unwrap_or(config.dt);
    config.snapshot_every = num("time.every")?.unwrap_or(config.snapshot_every);
    config.stencil_order = stencil_order;
    config.tolerances = Tolerances {
        residual: num("tol.residual")?.unwrap_or(defaults.residual),
        invariant: num("tol.invariant")?.unwrap_or(defaults.invariant),
        interp: num("tol.interp")?.unwrap_or(defaults.interp),
    };
    config.boost = num("init.boost")?.unwrap_or(0.0);
    config.validate()?;
    Ok(config)
}

/// Config text that parses back to an identical `SimConfig`.
pub fn format_config(config: &SimConfig) -> String {
    let mut lines = vec![
        format!("mass = {}", config.mass),
        format!("hbar = {}", config.hbar),
        format!("c = {}", config.c),
        format!("weight.kind = {}", config.weight.name()),
    ];
    match config.weight {
        WeightFunction::Gaussian { a } => lines.push(format!("weight.a = {a}")),
        WeightFunction::Exponential { kappa } => lines.push(format!("weight.kappa = {kappa}")),
        WeightFunction::Uniform => {}
    }
    lines.extend([
        format!("grid.min = {}", config.grid.c_min()),
        format!("grid.max = {}", config.grid.c_max()),
        format!("grid.n = {}", config.grid.len()),
        format!("time.final = {}", config.t_final),
        format!("time.dt = {}", config.dt),
        format!("time.every = {}", config.snapshot_every),
        format!("stencil.order = {}", config.stencil_order.accuracy()),
        format!("tol.residual = {}", config.tolerances.residual),
        format!("tol.invariant = {}", config.tolerances.invariant),
        format!("tol.interp = {}", config.tolerances.interp),
        format!("init.boost = {}", config.boost),
    ]);
    lines.join("\n") + "\n"
}

pub const SNAPSHOT_COLUMNS: [&str; 11] = ["T", "C", "t", "x", "u0", "u1", "gamma", "Q", "tau_T", "beta", "rho_star"];

/// One snapshot table as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotTable {
    pub tau: f64,
    pub c_label: Vec<f64>,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub u0: Vec<f64>,
    pub u1: Vec<f64>,
    pub gamma: Vec<f64>,
    pub q: Vec<f64>,
    pub tau_t: Vec<f64>,
    pub beta: Vec<f64>,
    pub rho_star: Vec<f64>,
}

impl SnapshotTable {
    pub fn state(&self) -> Result<EnsembleState> {
        EnsembleState::new(self.tau, self.t.clone(), self.x.clone(), self.u0.clone(), self.u1.clone())
    }

    fn columns(&self) -> [&Vec<f64>; 10] {
        [&self.c_label, &self.t, &self.x, &self.u0, &self.u1, &self.gamma, &self.q, &self.tau_t, &self.beta, &self.rho_star]
    }

    pub fn file_name(&self) -> String {
        snapshot_file_name(self.tau)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = SNAPSHOT_COLUMNS.join("\t");
        out.push('\n');
        for i in 0..self.c_label.len() {
            out.push_str(&format!("{:.16e}", self.tau));
            for col in self.columns() {
                out.push_str(&format!("\t{:.16e}", col[i]));
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l).unwrap_or("");
        if header.split('\t').ne(SNAPSHOT_COLUMNS) {
            return Err(Error::Parse { line: 1, message: format!("unexpected header `{header}`") });
        }
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); SNAPSHOT_COLUMNS.len()];
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != SNAPSHOT_COLUMNS.len() {
                return Err(Error::Parse { line: idx + 1, message: format!("expected {} fields, got {}", SNAPSHOT_COLUMNS.len(), fields.len()) });
            }
            for (col, field) in cols.iter_mut().zip(fields) {
                col.push(field.parse().map_err(|_| Error::Parse { line: idx + 1, message: format!("`{field}` is not a number") })?);
            }
        }
        let mut it = cols.into_iter();
        let taus = it.next().unwrap_or_default();
        let tau = *taus.first().ok_or_else(|| Error::Parse { line: 2, message: "table has no rows".into() })?;
        if let Some(pos) = taus.iter().position(|&v| v.to_bits() != tau.to_bits()) {
            return Err(Error::Parse { line: pos + 2, message: "T differs within one table".into() });
        }
        let mut next = || it.next().unwrap_or_default();
        Ok(Self {
            tau,
            c_label: next(),
            t: next(),
            x: next(),
            u0: next(),
            u1: next(),
            gamma: next(),
            q: next(),
            tau_t: next(),
            beta: next(),
            rho_star: next(),
        })
    }
}

pub fn snapshot_file_name(tau: f64) -> String {
    format!("snap_T{tau:011.6}.tsv")
}

/// Tables for every snapshot; ρ* uses `weight`.
pub fn tables_from_series(series: &SnapshotSeries, weight: &WeightFunction, c: f64) -> Vec<SnapshotTable> {
    series
        .snapshots
        .iter()
        .map(|s| {
            let d = derived_fields(&s.state, &s.geometry, weight, &series.grid, c);
            SnapshotTable {
                tau: s.tau(),
                c_label: series.grid.nodes().to_vec(),
                t: s.state.t.clone(),
                x: s.state.x.clone(),
                u0: s.state.u0.clone(),
                u1: s.state.u1.clone(),
                gamma: s.geometry.gamma.clone(),
                q: s.quantum.q.clone(),
                tau_t: s.quantum.tau_t.clone(),
                beta: d.beta,
                rho_star: d.rho_star,
            }
        })
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes one table per snapshot into `dir`; returns the file names in order.
pub fn write_snapshots(tables: &[SnapshotTable], dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut names = Vec::with_capacity(tables.len());
    for table in tables {
        let name = table.file_name();
        if names.contains(&name) {
            return Err(Error::SeriesMismatch(format!("two snapshots map to {name}")));
        }
        write_file(&dir.join(&name), &table.to_tsv())?;
        names.push(name);
    }
    Ok(names)
}

/// Reads every `snap_T*.tsv` in `dir`, ordered by T.
pub fn read_snapshots(dir: &Path) -> Result<Vec<SnapshotTable>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("snap_T") && n.ends_with(".tsv"))
        })
        .collect();
    paths.sort();
    let mut tables = paths
        .iter()
        .map(|p| read_file(p).and_then(|text| SnapshotTable::from_tsv(&text).map_err(|e| annotate(p, e))))
        .collect::<Result<Vec<_>>>()?;
    tables.sort_by(|a, b| a.tau.total_cmp(&b.tau));
    Ok(tables)
}

fn annotate(path: &Path, e: Error) -> Error {
    match e {
        Error::Parse { line, message } => Error::Parse { line, message: format!("{}: {message}", path.display()) },
        other => other,
    }
}

/// Everything needed to rerun or re-verify a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: SimConfig,
    /// What produced the snapshots, e.g. `simulate` or `analytic inertial`.
    pub source: String,
    pub code_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub snapshots: Vec<(f64, String)>,
    /// (name, max_violation, pass)
    pub invariants: Vec<(String, f64, String)>,
}

pub const MANIFEST_FILE: &str = "manifest.tsv";

impl RunManifest {
    pub fn new(config: SimConfig, source: impl Into<String>) -> Self {
        Self {
            config,
            source: source.into(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: unix_now(),
            finished_unix: f64::NAN,
            snapshots: Vec::new(),
            invariants: Vec::new(),
        }
    }

    pub fn set_invariants(&mut self, report: &InvariantReport) {
        self.invariants =
            report.rows.iter().map(|r| (r.name.to_string(), r.max_violation, r.verdict.to_string())).collect();
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("code_version\t{}\n", self.code_version));
        out.push_str(&format!("source\t{}\n", self.source));
        out.push_str(&format!("started_unix\t{}\n", self.started_unix));
        out.push_str(&format!("finished_unix\t{}\n", self.finished_unix));
        for line in format_config(&self.config).lines() {
            if let Some((k, v)) = line.split_once(" = ") {
                out.push_str(&format!("config\t{k}\t{v}\n"));
            }
        }
        for (tau, name) in &self.snapshots {
            out.push_str(&format!("snapshot\t{tau:.16e}\t{name}\n"));
        }
        for (name, value, pass) in &self.invariants {
            out.push_str(&format!("invariant\t{name}\t{value:.6e}\t{pass}\n"));
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut config_text = String::new();
        let mut m = RunManifest {
            config: SimConfig::gaussian_baseline(1.0),
            source: String::new(),
            code_version: String::new(),
            started_unix: f64::NAN,
            finished_unix: f64::NAN,
            snapshots: Vec::new(),
            invariants: Vec::new(),
        };
        for (idx, line) in text.lines().enumerate() {
            let bad = |message: String| Error::Parse { line: idx + 1, message };
            let parts: Vec<&str> = line.split('\t').collect();
            let number = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number")));
            match parts.as_slice() {
                [] | [""] => {}
                ["code_version", v] => m.code_version = v.to_string(),
                ["source", v] => m.source = v.to_string(),
                ["started_unix", v] => m.started_unix = number(v)?,
                ["finished_unix", v] => m.finished_unix = number(v)?,
                ["config", k, v] => config_text.push_str(&format!("{k} = {v}\n")),
                ["snapshot", tau, name] => m.snapshots.push((number(tau)?, name.to_string())),
                ["invariant", name, value, pass] => m.invariants.push((name.to_string(), number(value)?, pass.to_string())),
                _ => return Err(bad(format!("unrecognized manifest line `{line}`"))),
            }
        }
        m.config = parse_config(&config_text)?;
        Ok(m)
    }

    pub fn write(&mut self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        write_file(&path, &self.to_tsv())?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        Self::from_tsv(&read_file(&path)?).map_err(|e| annotate(&path, e))
    }
}

pub fn unix_now() -> f64 {
    std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(f64::NAN)
}

pub fn write_report(report: &InvariantReport, path: &Path) -> Result<()> {
    write_file(path, &report.to_tsv())
}

/// Zeros of the cubic interpolant of `values`, one per sign change between nodes.
pub fn interpolant_zeros(values: &[f64], grid: &SpatialGrid) -> Result<Vec<f64>> {
    let nodes = grid.nodes();
    let mut zeros = Vec::new();
    for i in 0..values.len() - 1 {
        let (a, b) = (values[i], values[i + 1]);
        if a == 0.0 {
            zeros.push(nodes[i]);
            continue;
        }
        if a * b >= 0.0 {
            continue;
        }
        let (mut lo, mut hi) = (nodes[i], nodes[i + 1]);
        let mut f_lo = a;
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let f_mid = interpolate(values, grid, mid)?;
            if f_mid == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if (f_mid < 0.0) == (f_lo < 0.0) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        zeros.push(0.5 * (lo + hi));
    }
    if values.last() == Some(&0.0) {
        zeros.push(nodes[nodes.len() - 1]);
    }
    Ok(zeros)
}

/// Plot data: trajectory and simultaneity polylines, γ(C) and Q(C) curve
/// families, and the zeros of Q per slice.
pub fn write_figure_data(tables: &[SnapshotTable], grid: &SpatialGrid, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut traj = String::from("C\tT\tt\tx\n");
    for i in 0..grid.len() {
        for tb in tables {
            traj.push_str(&format!("{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\n", tb.c_label[i], tb.tau, tb.t[i], tb.x[i]));
        }
        traj.push('\n');
    }
    let mut simul = String::from("T\tC\tt\tx\n");
    let mut gamma = String::from("T\tC\tgamma\n");
    let mut q = String::from("T\tC\tQ\n");
    let mut zeros = String::from("T\tC_zero\n");
    for tb in tables {
        for i in 0..grid.len() {
            simul.push_str(&format!("{:.16e}\t{:.16e}\t{:.16e}\t{:.16e}\n", tb.tau, tb.c_label[i], tb.t[i], tb.x[i]));
            gamma.push_str(&format!("{:.16e}\t{:.16e}\t{:.16e}\n", tb.tau, tb.c_label[i], tb.gamma[i]));
            q.push_str(&format!("{:.16e}\t{:.16e}\t{:.16e}\n", tb.tau, tb.c_label[i], tb.q[i]));
        }
        simul.push('\n');
        gamma.push('\n');
        q.push('\n');
        for z in interpolant_zeros(&tb.q, grid)? {
            zeros.push_str(&format!("{:.16e}\t{:.16e}\n", tb.tau, z));
        }
    }
    let files = [
        ("trajectories.tsv", traj),
        ("simultaneity.tsv", simul),
        ("gamma_curves.tsv", gamma),
        ("q_curves.tsv", q),
        ("q_zeros.tsv", zeros),
    ];
    let mut paths = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        write_file(&path, &body)?;
        paths.push(path);
    }
    Ok(paths)
}
