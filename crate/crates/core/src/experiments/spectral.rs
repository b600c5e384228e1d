use std::f64::consts::PI;

use rand_chacha::ChaCha8Rng;

use crate::config::{Experiment, ExperimentConfig, Operator};
use crate::dirac::{make_spec, PathEval, PiecewisePath, ResolventKernel};
use crate::error::Result;
use crate::paths::{boundary_limit, sample_walk, HypBm};
use crate::rng::stream;
use crate::spectrum::{
    circular_ensemble_rejection, detect_period, eigs_nystrom, eigs_transfer, folded_gap, folded_gap_cdf_beta2,
    match_and_compare, SpectrumResult, SPECTRUM_CSV_HEADER,
};
use crate::stats::{ks_one_sample, ks_two_sample, mean_and_stderr};

use super::{brownian_spec, checks_table, par_map, sine_kernel, truncation_point, Check, Report, ReplicaStatus, Table};

/// `|k|` range of the dual-method comparison.
pub const COMPARE_K: i64 = 5;

/// Relative agreement required between the two methods.
pub const DUAL_METHOD_TOL: f64 = 1e-3;

/// Eigenvalues entering the mean-spacing check: `|k| <= LLN_K`.
pub const LLN_K: usize = 20;

/// Allowed relative deviation of the mean spacing from `2 pi`.
pub const LLN_TOL: f64 = 0.1;

/// Rejection-sampler stream tag.
const REJECTION_DOMAIN: u64 = 0x524a_4354;

/// Window large enough to expose `n` full periods of a Circ spectrum.
fn period_window(n: usize, window: usize) -> usize {
    window.max(n + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircReplica {
    pub seed: u64,
    pub n: usize,
    pub transfer: SpectrumResult,
    pub nystrom: Option<SpectrumResult>,
    pub period: Option<(usize, f64)>,
}

/// Transfer-matrix spectrum of an independent Beta walk and optionally its
/// Nyström spectrum on the configured grid.
pub fn circ_replica(cfg: &ExperimentConfig, seed: u64, n: usize, nystrom: bool) -> Result<CircReplica> {
    let walk = sample_walk(seed, n, cfg.beta)?;
    let spec = make_spec(crate::hgeom::BoundaryPt::INFINITY, walk.end)?;
    let mut path = PiecewisePath { points: walk.points };
    let transfer = eigs_transfer(&spec, &path, period_window(n, cfg.window))?;
    let period = detect_period(&transfer, 1e-7);
    let nystrom = if nystrom {
        let grid = cfg.grid.build(1.0, &path.breakpoints());
        let k = ResolventKernel::build(&spec, &mut path, grid)?;
        Some(eigs_nystrom(&k, cfg.window)?)
    } else {
        None
    };
    Ok(CircReplica { seed, n, transfer, nystrom, period })
}

pub fn sine_spectrum(cfg: &ExperimentConfig, seed: u64, beta: f64) -> Result<SpectrumResult> {
    let mut bm = HypBm::new(seed, cfg.bm);
    let eta1 = boundary_limit(&mut bm, cfg.tol.boundary_y)?;
    let spec = brownian_spec(eta1.eta)?;
    let grid = cfg.grid.build(truncation_point(beta), &[]);
    let k = sine_kernel(&mut bm, beta, &spec, grid)?;
    eigs_nystrom(&k, cfg.window)
}

fn spectrum_table() -> Table {
    let cols: Vec<&'static str> = SPECTRUM_CSV_HEADER.split(',').collect();
    Table::new("spectrum", &cols)
}

fn push_spectrum(t: &mut Table, s: &SpectrumResult, n: usize, beta: f64, seed: u64) {
    let mut buf = Vec::new();
    s.write_csv_rows(&mut buf, n, beta, seed).expect("in-memory write");
    for line in String::from_utf8(buf).unwrap().lines() {
        t.push(line.split(',').map(String::from).collect());
    }
}

/// Folded gap statistics of the operator spectra against rejection samples
/// of the circular ensemble at `n = 2`.
pub fn gap_law_checks(cfg: &ExperimentConfig, reps: &[CircReplica], report: &mut Report) {
    let gaps: Vec<f64> = reps.iter().filter_map(|r| r.period.map(|(_, p)| folded_gap(&r.transfer, p))).collect();
    let mut rng: ChaCha8Rng = stream(cfg.seed, &[REJECTION_DOMAIN]);
    let reference: Vec<f64> = (0..gaps.len())
        .map(|_| {
            let th = circular_ensemble_rejection(&mut rng, 2, cfg.beta);
            let psi = (th[1] - th[0]).rem_euclid(2.0 * PI);
            psi.min(2.0 * PI - psi)
        })
        .collect();
    let ks = ks_two_sample(&gaps, &reference);
    report.checks.push(Check::above("gap_law_ks", cfg.beta, ks.p_value, cfg.alpha));
    if cfg.beta == 2.0 {
        let exact = ks_one_sample(&gaps, folded_gap_cdf_beta2);
        report.checks.push(Check::above("gap_law_exact_ks", cfg.beta, exact.p_value, cfg.alpha));
    }
}

fn run_circ(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let mut spectra = spectrum_table();
    let mut compare = Table::new("spectrum_compare", &["seed", "n", "k", "lambda_transfer", "lambda_nystrom", "rel_diff"]);
    let mut periods = Table::new("spectrum_period", &["seed", "n", "index_shift", "period", "period_over_2pi_n"]);
    let seeds: Vec<u64> = cfg.seeds().collect();
    for &n in &cfg.n {
        let nystrom = cfg.nystrom;
        let results = par_map(cfg.workers, &seeds, |&s| circ_replica(cfg, s, n, nystrom));
        let mut ok = Vec::new();
        let mut max_rel = 0.0f64;
        let mut missing_period = 0;
        for (s, r) in seeds.iter().zip(results) {
            report.replicas.push(ReplicaStatus::from_result(*s, &r));
            let Ok(rep) = r else { continue };
            push_spectrum(&mut spectra, &rep.transfer, n, cfg.beta, *s);
            match rep.period {
                Some((shift, p)) => periods.push(vec![
                    s.to_string(),
                    n.to_string(),
                    shift.to_string(),
                    p.to_string(),
                    (p / (2.0 * PI * n as f64)).to_string(),
                ]),
                None => missing_period += 1,
            }
            if let Some(ny) = &rep.nystrom {
                push_spectrum(&mut spectra, ny, n, cfg.beta, *s);
                for row in match_and_compare(&rep.transfer, ny).rows.iter().filter(|r| r.k.abs() <= COMPARE_K) {
                    max_rel = max_rel.max(row.rel_diff);
                    compare.push(vec![
                        s.to_string(),
                        n.to_string(),
                        row.k.to_string(),
                        row.lambda_a.to_string(),
                        row.lambda_b.to_string(),
                        row.rel_diff.to_string(),
                    ]);
                }
            }
            ok.push(rep);
        }
        if nystrom {
            report.checks.push(Check::at_most("dual_method_rel_diff", n, max_rel, DUAL_METHOD_TOL));
        }
        report.checks.push(Check::at_most("period_undetected", n, missing_period as f64, 0.0));
        if let Some(ratio) = periods.column("period_over_2pi_n") {
            let dev = ratio.iter().map(|r| (r.parse::<f64>().unwrap() - 1.0).abs()).fold(0.0, f64::max);
            report.checks.push(Check::at_most("period_over_2pi_n_deviation", n, dev, 1e-6));
        }
        if n == 2 {
            gap_law_checks(cfg, &ok, report);
        }
    }
    report.tables.push(spectra);
    report.tables.push(compare);
    report.tables.push(periods);
    Ok(())
}

fn run_sine(cfg: &ExperimentConfig, report: &mut Report) -> Result<()> {
    let mut spectra = spectrum_table();
    let mut spacing = Table::new("spectrum_spacing", &["beta", "seed", "mean_spacing"]);
    let seeds: Vec<u64> = cfg.seeds().collect();
    let betas = if cfg.betas.is_empty() { vec![cfg.beta] } else { cfg.betas.clone() };
    let m = LLN_K.min(cfg.window);
    for &beta in &betas {
        let results = par_map(cfg.workers, &seeds, |&s| sine_spectrum(cfg, s, beta));
        let mut values = Vec::new();
        for (s, r) in seeds.iter().zip(results) {
            report.replicas.push(ReplicaStatus::from_result(*s, &r));
            let Ok(sp) = r else { continue };
            push_spectrum(&mut spectra, &sp, 0, beta, *s);
            let v = sp.mean_spacing(m);
            spacing.push(vec![beta.to_string(), s.to_string(), v.to_string()]);
            values.push(v);
        }
        let (mean, _) = mean_and_stderr(&values);
        report.checks.push(Check::at_most("lln_spacing_rel_dev", beta, (mean / (2.0 * PI) - 1.0).abs(), LLN_TOL));
    }
    report.tables.push(spectra);
    report.tables.push(spacing);
    Ok(())
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(Experiment::Spectrum);
    match cfg.operator {
        Operator::Circ => run_circ(cfg, &mut report)?,
        Operator::Sine => run_sine(cfg, &mut report)?,
    }
    report.finish_replicas();
    report.tables.insert(0, checks_table("spectrum_checks", &report.checks));
    Ok(report)
}
