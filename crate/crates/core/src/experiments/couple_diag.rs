use crate::config::{Experiment, ExperimentConfig};
use crate::couple::{
    build_tau_array, clock_report, coupled_pair, deviation_report, disk_radius_sq, fixed_step_time, single_step,
    Regime, TauOptions,
};
use crate::dist::StepLawY;
use crate::error::Result;
use crate::hgeom::HPoint;
use crate::paths::HypBm;
use crate::rng::{Role, RngStreams};
use crate::stats::ks_one_sample;

use super::{checks_table, par_map, Check, Report, ReplicaStatus, Table};

/// Replicas used for the path-deviation tables.
pub const DEVIATION_REPLICAS: usize = 20;

pub const DEVIATION_TIMES: [f64; 7] = [0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 0.99];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSample {
    /// Squared disk radius of the endpoint around the start.
    pub xi: f64,
    pub sigma: f64,
    pub exact: bool,
}

pub fn single_step_sample(cfg: &ExperimentConfig, seed: u64) -> Result<StepSample> {
    let mut bm = HypBm::new(seed, cfg.bm);
    let u = RngStreams::new(seed).uniform(0, Role::Coupling);
    let s = single_step(&mut bm, 0.0, cfg.gamma, u, cfg.tol.hit_time)?;
    Ok(StepSample { xi: disk_radius_sq(s.endpoint, HPoint::I), sigma: s.sigma, exact: s.exact })
}

/// Checks on the single-step coupling at `cfg.gamma`.
pub fn single_step_checks(cfg: &ExperimentConfig, report: &mut Report) {
    let gamma = cfg.gamma;
    let seeds: Vec<u64> = (0..cfg.step_replicas as u64).map(|r| cfg.seed.wrapping_add(r)).collect();
    let results = par_map(cfg.workers, &seeds, |&s| single_step_sample(cfg, s));
    let ok: Vec<StepSample> = results.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
    let failed = results.len() - ok.len();
    if failed as f64 > super::MAX_FAILED_FRACTION * results.len() as f64 {
        report.numerical_failure = true;
    }
    let xi: Vec<f64> = ok.iter().map(|s| s.xi).collect();
    let ks = ks_one_sample(&xi, |x| 1.0 - (1.0 - x.clamp(0.0, 1.0)).powf(gamma));
    let m = ok.len() as f64;
    let p_exact = ok.iter().filter(|s| s.exact).count() as f64 / m;
    let stderr = (p_exact * (1.0 - p_exact) / m).sqrt();
    let t0 = fixed_step_time(gamma);
    let violations = ok.iter().filter(|s| s.sigma < t0).count();
    report.checks.push(Check::above("step_radius_ks", gamma, ks.p_value, cfg.alpha));
    report.checks.push(Check::at_least(
        "step_exact_fraction",
        gamma,
        p_exact,
        1.0 - 3.0 / gamma - cfg.confidence * stderr,
    ));
    report.checks.push(Check::at_most("step_sigma_violations", gamma, violations as f64, 0.0));
    report.checks.push(Check::at_most("step_failed_replicas", gamma, failed as f64, 0.0));
}

/// Per-step-index step lengths over the replicas of one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkSteps {
    pub n: usize,
    /// `lengths[k]` for `k = 1..n`, entry 0 empty.
    pub lengths: Vec<Vec<f64>>,
    pub regimes: Vec<Option<Regime>>,
    pub statuses: Vec<ReplicaStatus>,
}

pub fn walk_steps(cfg: &ExperimentConfig, n: usize) -> WalkSteps {
    let seeds: Vec<u64> = cfg.seeds().collect();
    let opts = TauOptions { k_cut: cfg.k_cut, hit_tol: cfg.tol.hit_time };
    let results = par_map(cfg.workers, &seeds, |&s| {
        let mut bm = HypBm::new(s, cfg.bm);
        build_tau_array(&mut bm, &RngStreams::new(s), n, cfg.beta, &opts)
    });
    let mut lengths = vec![Vec::with_capacity(seeds.len()); n];
    let mut regimes = vec![None; n];
    let mut statuses = Vec::with_capacity(seeds.len());
    for (s, r) in seeds.iter().zip(&results) {
        statuses.push(ReplicaStatus::from_result(*s, r));
        if let Ok(tau) = r {
            for k in 1..n {
                lengths[k].push(tau.step_lengths[k]);
            }
            regimes.clone_from(&tau.regimes);
        }
    }
    WalkSteps { n, lengths, regimes, statuses }
}

/// Per-`k` Kolmogorov–Smirnov p-values of the step lengths against their
/// Beta step laws, and the probability-integral transforms of all steps.
pub fn walk_step_tests(steps: &WalkSteps, beta: f64) -> Result<(Vec<(usize, f64, f64)>, Vec<f64>)> {
    let mut per_k = Vec::new();
    let mut pit = Vec::new();
    for k in 1..steps.n {
        let law = StepLawY::new(0.5 * beta * k as f64)?;
        let cdf = |r: f64| law.cdf(r).unwrap_or(f64::NAN);
        let ks = ks_one_sample(&steps.lengths[k], cdf);
        per_k.push((k, ks.statistic, ks.p_value));
        pit.extend(steps.lengths[k].iter().map(|&r| cdf(r)));
    }
    Ok((per_k, pit))
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(Experiment::CoupleDiag);
    single_step_checks(cfg, &mut report);

    let mut steps_table = Table::new("walk_steps", &["n", "k", "gamma", "regime", "ks_statistic", "p_value"]);
    for &n in &cfg.n {
        let steps = walk_steps(cfg, n);
        report.replicas.extend(steps.statuses.iter().cloned());
        let (per_k, pit) = walk_step_tests(&steps, cfg.beta)?;
        for &(k, d, p) in &per_k {
            let regime = match steps.regimes[k] {
                Some(Regime::Coupled) => "coupled",
                Some(Regime::Hitting) => "hitting",
                None => "",
            };
            steps_table.push(vec![
                n.to_string(),
                k.to_string(),
                (0.5 * cfg.beta * k as f64).to_string(),
                regime.into(),
                d.to_string(),
                p.to_string(),
            ]);
        }
        let pooled = ks_one_sample(&pit, |u| u.clamp(0.0, 1.0));
        report.checks.push(Check::above("walk_pooled_ks", n, pooled.p_value, cfg.alpha));
        if !per_k.is_empty() {
            let min_p = per_k.iter().map(|r| r.2).fold(1.0, f64::min);
            report.checks.push(Check::above("walk_min_p", n, min_p, cfg.alpha / per_k.len() as f64));
        }
    }
    report.tables.push(steps_table);

    let mut dev = Table::new("deviation", &["seed", "n", "t", "deviation", "envelope", "ratio"]);
    let mut clock = Table::new("clock", &["seed", "n", "k", "tau", "clock", "deviation", "envelope"]);
    let opts = TauOptions { k_cut: cfg.k_cut, hit_tol: cfg.tol.hit_time };
    let mut max_ratio = 0.0f64;
    for seed in cfg.seeds().take(DEVIATION_REPLICAS) {
        for &n in &cfg.n {
            let mut bm = HypBm::new(seed, cfg.bm);
            let pair = match coupled_pair(&mut bm, &RngStreams::new(seed), n, cfg.beta, &opts, cfg.tol.boundary_y) {
                Ok(p) => p,
                Err(_) => continue,
            };
            for r in deviation_report(&pair, &mut bm, &DEVIATION_TIMES)? {
                max_ratio = max_ratio.max(r.ratio);
                dev.push(vec![
                    seed.to_string(),
                    n.to_string(),
                    r.t.to_string(),
                    r.deviation.to_string(),
                    r.envelope.to_string(),
                    r.ratio.to_string(),
                ]);
            }
            for r in clock_report(&pair.tau) {
                clock.push(vec![
                    seed.to_string(),
                    n.to_string(),
                    r.k.to_string(),
                    r.tau.to_string(),
                    r.clock.to_string(),
                    r.deviation.to_string(),
                    r.envelope.to_string(),
                ]);
            }
        }
    }
    report.checks.push(Check::at_most("deviation_ratio_finite", "", max_ratio, f64::MAX));
    report.tables.push(dev);
    report.tables.push(clock);
    report.finish_replicas();
    report.tables.insert(0, checks_table("couple_checks", &report.checks));
    Ok(report)
}
