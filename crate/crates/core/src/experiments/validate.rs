use std::f64::consts::PI;

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erf;

use crate::config::{Experiment, ExperimentConfig};
use crate::dist::HeatRadialLaw;
use crate::error::Result;
use crate::hgeom::{dist_h, to_disk, HPoint};
use crate::paths::{boundary_limit, modulus_envelope, modulus_report, HypBm};
use crate::stats::{chi2_uniform, ks_one_sample, mean_and_stderr};

use super::{checks_table, par_map, Check, Report, ReplicaStatus, Table};

/// `(t, a)` pairs of the small-ball bound `P(max d <= a)`.
pub const LOWER_TAIL: [(f64, f64); 3] = [(1.0, 1.0), (2.0, 1.5), (0.5, 0.5)];

/// `(t, a)` pairs of the large-deviation bound `P(max d >= a)`.
pub const UPPER_TAIL: [(f64, f64); 3] = [(0.05, 1.0), (0.1, 2.0), (0.25, 2.0)];

/// Time of the one-time law checks.
pub const LAW_TIME: f64 = 0.5;

pub const ESCAPE_TIME: f64 = 200.0;
pub const ESCAPE_SPEED: f64 = 0.5;
pub const ESCAPE_REL_TOL: f64 = 0.1;

pub const MODULUS_H: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];
pub const MODULUS_S_END: f64 = 10.0;
pub const MODULUS_S_STEP: f64 = 0.01;
/// Largest admissible modulus constant.
pub const MODULUS_C_MAX: f64 = 20.0;
/// With the envelope `h` in place of the square-root envelope the ratio at
/// the smallest `h` must exceed the one at the largest by this factor.
pub const MODULUS_ANTI_GROWTH: f64 = 10.0;

pub const ANGLE_BINS: usize = 20;

pub fn lower_tail_bound(t: f64, a: f64) -> f64 {
    4.0 / PI * (-PI * PI * t / (8.0 * a * a)).exp()
}

pub fn upper_tail_bound(t: f64, a: f64) -> f64 {
    16.0 * t.sqrt() / (a * PI.sqrt()) * (-a * a / (16.0 * t)).exp()
}

/// Short-time statistics of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct ShortPath {
    /// `max_{s <= t} d(i, B(s))` over the base grid, per [`LOWER_TAIL`] then
    /// [`UPPER_TAIL`] entry.
    pub running_max: Vec<f64>,
    pub dist: f64,
    pub log_y: f64,
    /// Disk-chart angle over `2 pi`, in `[0, 1)`.
    pub angle: f64,
}

pub fn short_path(cfg: &ExperimentConfig, seed: u64) -> Result<ShortPath> {
    let mut bm = HypBm::new(seed, cfg.bm);
    let times: Vec<f64> = LOWER_TAIL.iter().chain(&UPPER_TAIL).map(|p| p.0).collect();
    let t_end = times.iter().copied().fold(LAW_TIME, f64::max);
    bm.ensure(t_end)?;
    let mut running_max = vec![0.0; times.len()];
    let mut m = 0.0f64;
    for k in 0..bm.base_len() {
        let t = bm.base_time(k);
        if t > t_end {
            break;
        }
        m = m.max(dist_h(HPoint::I, bm.base_sample(k).point()));
        for (r, &tt) in running_max.iter_mut().zip(&times) {
            if t <= tt {
                *r = m;
            }
        }
    }
    let p = bm.point(LAW_TIME)?;
    let d = to_disk(p, HPoint::I);
    Ok(ShortPath {
        running_max,
        dist: dist_h(HPoint::I, p),
        log_y: p.y.ln(),
        angle: d.v.atan2(d.u).rem_euclid(2.0 * PI) / (2.0 * PI),
    })
}

/// Long-time statistics of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct LongPath {
    pub speed: f64,
    /// Per [`MODULUS_H`]: square-root envelope ratio and the ratio against `h`.
    pub modulus: Vec<(f64, f64)>,
    pub eta1: f64,
}

pub fn long_path(cfg: &ExperimentConfig, seed: u64) -> Result<LongPath> {
    let mut bm = HypBm::new(seed, cfg.bm);
    let steps = (MODULUS_S_END / MODULUS_S_STEP).round() as usize;
    let ss: Vec<f64> = (0..=steps).map(|j| j as f64 * MODULUS_S_STEP).collect();
    let rows = modulus_report(&mut bm, &MODULUS_H, &ss)?;
    let mut modulus = Vec::with_capacity(rows.len());
    for r in &rows {
        let mut anti = 0.0f64;
        for &s in &ss {
            anti = anti.max(dist_h(bm.point(s)?, bm.point(s + r.h)?) / r.h);
        }
        modulus.push((r.max_ratio, anti));
    }
    let eta1 = boundary_limit(&mut bm, cfg.tol.boundary_y)?.eta.value().unwrap_or(f64::INFINITY);
    let speed = dist_h(HPoint::I, bm.point(ESCAPE_TIME)?) / ESCAPE_TIME;
    Ok(LongPath { speed, modulus, eta1 })
}

/// Largest gap of the empirical CDF outside `[lo, hi]`, checked on both sides
/// of every jump.
pub fn sandwich_violation(samples: &[f64], lo: impl Fn(f64) -> f64, hi: impl Fn(f64) -> f64) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() as f64;
    let mut worst = f64::NEG_INFINITY;
    for (i, &x) in v.iter().enumerate() {
        let below = i as f64 / m;
        let above = (i + 1) as f64 / m;
        worst = worst.max(lo(x) - below).max(above - hi(x));
    }
    worst
}

pub fn dkw_band(m: usize, alpha: f64) -> f64 {
    ((2.0 / alpha).ln() / (2.0 * m as f64)).sqrt()
}

fn short_checks(cfg: &ExperimentConfig, report: &mut Report, tails: &mut Table) -> Result<()> {
    let seeds: Vec<u64> = (0..cfg.step_replicas as u64).map(|r| cfg.seed.wrapping_add(r)).collect();
    let results = par_map(cfg.workers, &seeds, |&s| short_path(cfg, s));
    let ok: Vec<&ShortPath> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let failed = results.len() - ok.len();
    report.checks.push(Check::at_most("short_path_failures", "", failed as f64, 0.0));
    let m = ok.len() as f64;
    let pairs = LOWER_TAIL.iter().map(|&p| ("lower", p)).chain(UPPER_TAIL.iter().map(|&p| ("upper", p)));
    for (i, (kind, (t, a))) in pairs.enumerate() {
        let (hits, bound) = match kind {
            "lower" => (ok.iter().filter(|s| s.running_max[i] <= a).count(), lower_tail_bound(t, a)),
            _ => (ok.iter().filter(|s| s.running_max[i] >= a).count(), upper_tail_bound(t, a)),
        };
        let p = hits as f64 / m;
        let b = bound.clamp(0.0, 1.0);
        let se = (b * (1.0 - b) / m).sqrt();
        let limit = bound + cfg.confidence * se;
        tails.push(vec![kind.into(), t.to_string(), a.to_string(), p.to_string(), bound.to_string(), se.to_string()]);
        report.checks.push(Check::at_most(&format!("tail_{kind}"), format!("t={t};a={a}"), p, limit));
    }

    let t = LAW_TIME;
    let law = HeatRadialLaw::new(t)?;
    let dists: Vec<f64> = ok.iter().map(|s| s.dist).collect();
    let heat = ks_one_sample(&dists, |r| law.cdf(r).unwrap_or(f64::NAN));
    report.checks.push(Check::above("heat_law_ks", t, heat.p_value, cfg.alpha));
    let normal = Normal::new(-t / 2.0, t.sqrt()).expect("positive variance");
    let logs: Vec<f64> = ok.iter().map(|s| s.log_y).collect();
    let ln = ks_one_sample(&logs, |x| normal.cdf(x));
    report.checks.push(Check::above("log_y_ks", t, ln.p_value, cfg.alpha));
    let angles: Vec<f64> = ok.iter().map(|s| s.angle).collect();
    report.checks.push(Check::above("angle_chi2", t, chi2_uniform(&angles, ANGLE_BINS), cfg.alpha));

    // |B(t)| <= d(i, B(t)) <= |W(t)| + t/2 in distribution
    let abs_1d = |r: f64| if r <= 0.0 { 0.0 } else { erf(r / (2.0 * t).sqrt()) };
    let abs_2d = |r: f64| {
        let u = r - t / 2.0;
        if u <= 0.0 { 0.0 } else { -(-u * u / (2.0 * t)).exp_m1() }
    };
    let band = dkw_band(dists.len(), cfg.alpha);
    let viol = sandwich_violation(&dists, abs_2d, abs_1d);
    report.checks.push(Check::at_most("domination_sandwich", t, viol, band));
    Ok(())
}

fn long_checks(cfg: &ExperimentConfig, report: &mut Report, modulus: &mut Table) {
    let seeds: Vec<u64> = cfg.seeds().collect();
    let results = par_map(cfg.workers, &seeds, |&s| long_path(cfg, s));
    let mut ok = Vec::new();
    for (s, r) in seeds.iter().zip(results) {
        report.replicas.push(ReplicaStatus::from_result(*s, &r));
        if let Ok(p) = r {
            ok.push(p);
        }
    }
    if ok.is_empty() {
        report.numerical_failure = true;
        return;
    }
    let speeds: Vec<f64> = ok.iter().map(|p| p.speed).collect();
    let (mean, _) = mean_and_stderr(&speeds);
    report.checks.push(Check::at_most(
        "escape_speed_rel_dev",
        ESCAPE_TIME,
        (mean / ESCAPE_SPEED - 1.0).abs(),
        ESCAPE_REL_TOL,
    ));

    let mut c = 0.0f64;
    let mut anti = vec![0.0f64; MODULUS_H.len()];
    for (i, &h) in MODULUS_H.iter().enumerate() {
        let ratio = ok.iter().map(|p| p.modulus[i].0).fold(0.0, f64::max);
        anti[i] = ok.iter().map(|p| p.modulus[i].1).fold(0.0, f64::max);
        c = c.max(ratio);
        modulus.push(vec![
            h.to_string(),
            ratio.to_string(),
            anti[i].to_string(),
            modulus_envelope(0.0, h).to_string(),
        ]);
    }
    report.checks.push(Check::at_most("modulus_constant", "", c, MODULUS_C_MAX));
    let growth = anti[0] / anti[MODULUS_H.len() - 1];
    report.checks.push(Check::at_least("modulus_anti_growth", "", growth, MODULUS_ANTI_GROWTH));

    let etas: Vec<f64> = ok.iter().map(|p| p.eta1).collect();
    let cauchy = ks_one_sample(&etas, |x| 0.5 + x.atan() / PI);
    report.checks.push(Check::above("boundary_cauchy_ks", "", cauchy.p_value, cfg.alpha));
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(Experiment::Validate);
    let mut tails = Table::new("validate_tails", &["kind", "t", "a", "empirical", "bound", "stderr"]);
    let mut modulus = Table::new("validate_modulus", &["h", "max_ratio", "max_ratio_linear", "envelope_at_0"]);
    short_checks(cfg, &mut report, &mut tails)?;
    long_checks(cfg, &mut report, &mut modulus);
    report.finish_replicas();
    report.tables.insert(0, checks_table("validate", &report.checks));
    report.tables.push(tails);
    report.tables.push(modulus);
    Ok(report)
}
