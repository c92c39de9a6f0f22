use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};

use super::config::RunConfig;
use crate::error::{Error, Result};

/// Headered CSV file.
pub struct Csv {
    w: csv::Writer<File>,
}

impl Csv {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        let mut w = csv::Writer::from_writer(File::create(path)?);
        w.write_record(header).map_err(csv_error)?;
        Ok(Self { w })
    }

    pub fn row(&mut self, cells: &[String]) -> Result<()> {
        self.w.write_record(cells).map_err(csv_error)
    }

    pub fn finish(mut self) -> Result<()> {
        self.w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Cell formatting: floats in shortest round-trip scientific notation.
pub trait Cell {
    fn cell(&self) -> String;
}

impl Cell for f64 {
    fn cell(&self) -> String {
        format!("{self:e}")
    }
}

macro_rules! display_cell {
    ($($t:ty),*) => {$(
        impl Cell for $t {
            fn cell(&self) -> String {
                self.to_string()
            }
        }
    )*};
}

display_cell!(usize, u64, bool, String, &str);

impl<T: Cell> Cell for &T {
    fn cell(&self) -> String {
        (*self).cell()
    }
}

/// Builds a CSV row from cells of mixed types.
#[macro_export]
#[doc(hidden)]
macro_rules! csv_row {
    ($($v:expr),* $(,)?) => { vec![$($crate::cli::Cell::cell(&$v)),*] };
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `"<="`, `"<"`, `">="` or `"finite"`.
    pub relation: &'static str,
    pub limit: f64,
    pub pass: bool,
}

/// Artifacts and checks collected by one subcommand.
#[derive(Debug)]
pub struct Report {
    pub command: &'static str,
    pub out: PathBuf,
    pub files: Vec<String>,
    pub checks: Vec<Check>,
    pub summary: Map<String, Value>,
}

impl Report {
    pub fn new(command: &'static str, out: &Path) -> Result<Self> {
        std::fs::create_dir_all(out)?;
        Ok(Self {
            command,
            out: out.to_path_buf(),
            files: Vec::new(),
            checks: Vec::new(),
            summary: Map::new(),
        })
    }

    /// Path inside the output directory, recorded as an artifact.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.out.join(name)
    }

    pub fn csv(&mut self, name: &str, header: &[&str]) -> Result<Csv> {
        let path = self.file(name);
        Csv::create(&path, header)
    }

    pub fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary.insert(key.to_string(), json!(value));
    }

    pub fn check_at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, "<=", limit, value <= limit);
    }

    pub fn check_below(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, "<", limit, value < limit);
    }

    pub fn check_at_least(&mut self, name: &str, value: f64, limit: f64) {
        self.push(name, value, ">=", limit, value >= limit);
    }

    pub fn check_finite(&mut self, name: &str, value: f64) {
        self.push(name, value, "finite", f64::INFINITY, value.is_finite());
    }

    fn push(&mut self, name: &str, value: f64, relation: &'static str, limit: f64, pass: bool) {
        self.checks.push(Check {
            name: name.to_string(),
            value,
            relation,
            limit,
            pass,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// Writes `metadata.json` and the resolved `config.toml` for replay.
    pub fn finish(&mut self, config: &RunConfig) -> Result<()> {
        self.files
            .extend(["config.toml".to_string(), "metadata.json".to_string()]);
        let toml_text = toml::to_string(config).expect("config serializes");
        std::fs::write(self.out.join("config.toml"), toml_text)?;
        let meta = json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "decisions": decisions(),
            "files": self.files,
            "checks": self.checks,
            "summary": self.summary,
            "passed": self.passed(),
        });
        let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        std::fs::write(self.out.join("metadata.json"), text + "\n")?;
        Ok(())
    }
}

fn decisions() -> Value {
    json!({
        "mesh": "uniform right-triangle P1 mesh, coefficients and loads at centroids",
        "dirichlet": "boundary rows eliminated",
        "linear_solver": "Jacobi-preconditioned conjugate gradients",
        "sampling": "uniform parameters, ChaCha8 stream per sample index",
        "pod_eigensolver": "cyclic Jacobi on the mass-weighted correlation matrix",
        "energy_rule": "smallest K with 1 - sqrt(tail/total) >= eta",
        "grid_map": "tensor grid, not-a-knot cubic spline per axis (multilinear on request), clamped outside the box",
        "legendre_map": "total-degree orthonormal Legendre, least squares by pivoted QR",
        "knn_map": "kd-tree neighbours, local linear least squares",
        "resnet": "tanh residual blocks, Adam, inputs scaled to [-1, 1]",
        "galerkin": "dense Cholesky on K x K reduced systems",
        "sensing": "pivoted QR on Phi^T (M = K) or Phi Phi^T (M > K)",
        "test_seed": "run seed + 0x7e57",
    })
}
