use crate::config::{Experiment, ExperimentConfig};
use crate::couple::{coupled_pair, TauOptions};
use crate::error::Result;
use crate::hgeom::{dist_h, to_disk, BoundaryPt, DPoint, HPoint};
use crate::paths::HypBm;
use crate::rng::RngStreams;

use super::{checks_table, Check, Report, ReplicaStatus, Table};

/// Trace points kept in the figure.
pub const TRACE_POINTS: usize = 4000;

/// Largest distance between a walk vertex and the trace at its stopping time.
pub const ON_TRACE_TOL: f64 = 1e-12;

/// Disk image of a boundary point seen from `i`.
pub fn boundary_in_disk(eta: &BoundaryPt) -> DPoint {
    match eta.value() {
        None => DPoint { u: 1.0, v: 0.0 },
        Some(q) => {
            let s = q * q + 1.0;
            DPoint { u: (q * q - 1.0) / s, v: -2.0 * q / s }
        }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(Experiment::Figure);
    let n = cfg.n[0];
    let mut bm = HypBm::new(cfg.seed, cfg.bm);
    let opts = TauOptions { k_cut: cfg.k_cut, hit_tol: cfg.tol.hit_time };
    let pair = coupled_pair(&mut bm, &RngStreams::new(cfg.seed), n, cfg.beta, &opts, cfg.tol.boundary_y);
    report.replicas.push(ReplicaStatus::from_result(cfg.seed, &pair));
    let pair = pair?;

    let mut walk_table = Table::new("figure_walk", &["j", "tau", "x", "y", "trace_distance"]);
    let mut worst = 0.0f64;
    for (j, &p) in pair.tau.walk.iter().enumerate() {
        let tau = pair.tau.taus[n - j];
        let d = dist_h(p, bm.point(tau)?);
        worst = worst.max(d);
        walk_table.push(vec![j.to_string(), tau.to_string(), p.x.to_string(), p.y.to_string(), d.to_string()]);
    }
    report.checks.push(Check::at_most("walk_on_trace", n, worst, ON_TRACE_TOL));

    let t_end = pair.eta1.time.max(pair.tau.taus[1.min(n)]);
    let samples: Vec<(f64, HPoint)> =
        bm.samples().into_iter().take_while(|(t, _)| *t <= t_end).map(|(t, s)| (t, s.point())).collect();
    let stride = samples.len().div_ceil(TRACE_POINTS).max(1);
    let mut path_table = Table::new("figure_path", &["t", "x", "y"]);
    let mut trace = Vec::new();
    for (i, (t, p)) in samples.iter().enumerate() {
        if i % stride == 0 || i + 1 == samples.len() {
            path_table.push(vec![t.to_string(), p.x.to_string(), p.y.to_string()]);
            trace.push(to_disk(*p, HPoint::I));
        }
    }
    let walk: Vec<DPoint> = pair.tau.walk.iter().map(|&p| to_disk(p, HPoint::I)).collect();
    let svg = crate::svg::disk_chart(&trace, &walk, boundary_in_disk(&pair.eta1.eta));
    report.figures.push(("figure.svg".into(), svg));
    report.tables.insert(0, checks_table("figure_checks", &report.checks));
    report.tables.push(path_table);
    report.tables.push(walk_table);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_images_lie_on_the_circle() {
        for q in [-3.0, 0.0, 0.5, 10.0] {
            let d = boundary_in_disk(&BoundaryPt::real(q));
            assert!((d.norm() - 1.0).abs() < 1e-14);
            let near = to_disk(HPoint::new(q, 1e-9), HPoint::I);
            assert!((near.u - d.u).abs() < 1e-6 && (near.v - d.v).abs() < 1e-6);
        }
        assert_eq!(boundary_in_disk(&BoundaryPt::INFINITY), DPoint { u: 1.0, v: 0.0 });
    }
}
