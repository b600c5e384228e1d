//! Experiment drivers behind the command line subcommands. Each returns a
//! [`Report`] of checks, CSV tables and figures; writing them out is left to
//! the caller.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use crate::config::{Experiment, ExperimentConfig};
use crate::dirac::{make_spec, DiracSpec, ResolventKernel, SinePath};
use crate::error::Result;
use crate::hgeom::BoundaryPt;
use crate::paths::HypBm;
use crate::quad::Grid;

pub mod betadep;
pub mod converge;
pub mod couple_diag;
pub mod figure;
pub mod heatkernel;
pub mod spectral;
pub mod validate;

/// Version of every CSV layout written by the drivers.
pub const CSV_SCHEMA: u32 = 1;

/// One pass/fail line.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    /// Parameter the check was run at, empty if none.
    pub param: String,
    pub statistic: f64,
    pub bound: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `statistic <= bound`.
    pub fn at_most(name: &str, param: impl ToString, statistic: f64, bound: f64) -> Check {
        Check { name: name.into(), param: param.to_string(), statistic, bound, passed: statistic <= bound }
    }

    /// Passes when `statistic >= bound`.
    pub fn at_least(name: &str, param: impl ToString, statistic: f64, bound: f64) -> Check {
        Check { name: name.into(), param: param.to_string(), statistic, bound, passed: statistic >= bound }
    }

    /// Passes when `statistic > bound`; used for p-values.
    pub fn above(name: &str, param: impl ToString, statistic: f64, bound: f64) -> Check {
        Check { name: name.into(), param: param.to_string(), statistic, bound, passed: statistic > bound }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// File stem of the CSV.
    pub name: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&'static str]) -> Table {
        Table { name: name.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    /// Adds a row; decimal cells longer than 20 characters are rewritten in
    /// exponent form.
    pub fn push(&mut self, mut row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        for cell in &mut row {
            if cell.contains('.') && !cell.contains('e') {
                if let Ok(x) = cell.parse::<f64>() {
                    if x != 0.0 && x.abs() < 1e-4 {
                        *cell = num(x);
                    }
                }
            }
        }
        self.rows.push(row);
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# schema={CSV_SCHEMA}")?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.columns)?;
        for r in &self.rows {
            csv.write_record(r)?;
        }
        csv.flush()
    }

    /// Values of one column.
    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

/// Shortest round-trip form, in exponent notation outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

/// Row of the standard check table.
pub fn checks_table(name: &str, checks: &[Check]) -> Table {
    let mut t = Table::new(name, &["check", "param", "statistic", "bound", "pass"]);
    for c in checks {
        t.push(vec![c.name.clone(), c.param.clone(), num(c.statistic), num(c.bound), c.passed.to_string()]);
    }
    t
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicaStatus {
    pub seed: u64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ReplicaStatus {
    pub fn from_result<T>(seed: u64, r: &Result<T>) -> ReplicaStatus {
        ReplicaStatus { seed, ok: r.is_ok(), error: r.as_ref().err().map(|e| e.to_string()) }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub experiment: Experiment,
    pub checks: Vec<Check>,
    pub tables: Vec<Table>,
    /// `(file name, svg document)`.
    pub figures: Vec<(String, String)>,
    pub replicas: Vec<ReplicaStatus>,
    /// Set when a computation failed outright.
    pub numerical_failure: bool,
}

/// Above this fraction of failed replicas a run counts as a numerical failure.
pub const MAX_FAILED_FRACTION: f64 = 0.1;

impl Report {
    pub fn new(experiment: Experiment) -> Report {
        Report { experiment, checks: vec![], tables: vec![], figures: vec![], replicas: vec![], numerical_failure: false }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_fraction(&self) -> f64 {
        if self.replicas.is_empty() {
            return 0.0;
        }
        self.replicas.iter().filter(|r| !r.ok).count() as f64 / self.replicas.len() as f64
    }

    pub fn check<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Check> + 'a {
        self.checks.iter().filter(move |c| c.name == name)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    fn finish_replicas(&mut self) {
        if self.failed_fraction() > MAX_FAILED_FRACTION {
            self.numerical_failure = true;
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.experiment {
        Experiment::Heatkernel => heatkernel::run(cfg),
        Experiment::CoupleDiag => couple_diag::run(cfg),
        Experiment::Spectrum => spectral::run(cfg),
        Experiment::Converge => converge::run(cfg),
        Experiment::Betadep => betadep::run(cfg),
        Experiment::Figure => figure::run(cfg),
        Experiment::Validate => validate::run(cfg),
    }
}

/// Maps `f` over `items` on up to `workers` threads; results keep the input
/// order.
pub fn par_map<I: Sync, T: Send>(workers: usize, items: &[I], f: impl Fn(&I) -> T + Sync) -> Vec<T> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let out: Mutex<Vec<Option<T>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let v = f(&items[i]);
                out.lock().unwrap()[i] = Some(v);
            });
        }
    });
    out.into_inner().unwrap().into_iter().map(|v| v.unwrap()).collect()
}

/// Kernel support `[0, T]` for the Sine operator at `beta`: the exponent rule
/// `(1 - T)^{1 + min(2/beta, 1)} = 1e-6`.
pub fn truncation_point(beta: f64) -> f64 {
    let e = 1.0 + (2.0 / beta).min(1.0);
    1.0 - 1e-6f64.powf(1.0 / e)
}

/// Dirac data `(inf, eta1)` of a Sine or coupled Circ operator.
pub fn brownian_spec(eta1: BoundaryPt) -> Result<DiracSpec> {
    make_spec(BoundaryPt::INFINITY, eta1)
}

pub fn sine_kernel(bm: &mut HypBm, beta: f64, spec: &DiracSpec, grid: Grid) -> Result<ResolventKernel> {
    ResolventKernel::build(spec, &mut SinePath { bm, beta }, grid)
}
