use crate::config::{Experiment, ExperimentConfig};
use crate::couple::{build_tau_array, StoppingTimeArray, TauOptions};
use crate::dirac::{
    escape_distances, escape_fit, hs2_certificate, hs3_certificate, sinh_gap, BoundParams, DiracSpec, EscapeFit,
    PathEval, PiecewisePath, ResolventKernel, SinePath,
};
use crate::error::Result;
use crate::hgeom::{BoundaryPt, HPoint};
use crate::paths::{boundary_limit, time_change, HypBm};
use crate::rng::RngStreams;
use crate::spectrum::{eigs_nystrom, match_and_compare};
use crate::stats::{loglog_slope, median};

use super::{brownian_spec, checks_table, par_map, sine_kernel, truncation_point, Check, Report, ReplicaStatus, Table};

/// Largest admissible log-log slope of the median squared distance in `n`.
pub const RATE_SLOPE_MAX: f64 = -0.8;

/// Additive slack of the eigenvalue-sum inequality.
pub const HW_SLACK: f64 = 1e-6;

/// Truncation points of the tail certificate.
pub const TRUNCATION_POINTS: [f64; 3] = [0.5, 0.9, 0.99];

/// Eigenvalues `|k| <= TREND_K` enter the eigenvalue-difference trend.
pub const TREND_K: i64 = 2;

/// Speed of the comparison geodesic.
pub const ESCAPE_SPEED: f64 = 0.5;

const EPS_STEPS: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct PairRow {
    pub n: usize,
    pub hs_dist_sq: f64,
    pub mu_sq_sum: f64,
    /// `max_{|k| <= TREND_K} |lambda_k - lambda_{k,n}|`.
    pub max_eig_diff: f64,
}

impl PairRow {
    pub fn hw_holds(&self) -> bool {
        self.mu_sq_sum <= self.hs_dist_sq + HW_SLACK
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRow {
    /// `truncation` or `approximation`.
    pub kind: &'static str,
    /// Truncation point or `n`.
    pub param: f64,
    pub measured: f64,
    pub certificate: f64,
    pub fit: EscapeFit,
    pub delta: f64,
    pub m: f64,
}

impl CertificateRow {
    pub fn holds(&self) -> bool {
        self.measured <= self.certificate
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicaOutcome {
    pub seed: u64,
    pub rows: Vec<PairRow>,
    pub certificates: Vec<CertificateRow>,
}

fn bound_params(spec: &DiracSpec, beta: f64, fit: EscapeFit) -> BoundParams {
    let sq = |u: [f64; 2]| u[0] * u[0] + u[1] * u[1];
    BoundParams {
        b: fit.b,
        eps: fit.eps,
        alpha: ESCAPE_SPEED,
        nu: 4.0 / beta,
        u0_sq: sq(spec.u0),
        u1_sq: sq(spec.u1),
        z0_offset: 0.0,
    }
}

fn eps_grid(upper: f64) -> Vec<f64> {
    (1..=EPS_STEPS).map(|j| upper * j as f64 / (EPS_STEPS + 1) as f64).collect()
}

/// Distances of a path at the grid nodes from the comparison geodesic.
fn node_escape(nodes: &[f64], points: &[HPoint], beta: f64, eta1: &BoundaryPt) -> Result<(Vec<f64>, Vec<f64>)> {
    let times: Vec<f64> = nodes.iter().map(|&t| time_change(t, beta)).collect();
    let d = escape_distances(&times, points, HPoint::I, eta1, ESCAPE_SPEED)?;
    Ok((times, d))
}

/// Truncation certificates of the Sine kernel at [`TRUNCATION_POINTS`].
pub fn truncation_certificates(
    kernel: &ResolventKernel,
    spec: &DiracSpec,
    beta: f64,
    escape: &(Vec<f64>, Vec<f64>),
) -> Result<Vec<CertificateRow>> {
    let nu = 4.0 / beta;
    let eps = eps_grid((1.0 / nu).min(ESCAPE_SPEED));
    let mut out = Vec::new();
    for &t in TRUNCATION_POINTS.iter().filter(|&&t| t < kernel.cutoff) {
        let measured = kernel.hs_distance_sq(&kernel.truncate(t)?)?;
        let cert = |b: f64, e: f64| hs2_certificate(&bound_params(spec, beta, EscapeFit { b, eps: e }), t, None).ok();
        let Some(fit) = escape_fit(&escape.0, &escape.1, &eps, cert) else { continue };
        let certificate = cert(fit.b, fit.eps).unwrap();
        out.push(CertificateRow { kind: "truncation", param: t, measured, certificate, fit, delta: 0.0, m: 0.0 });
    }
    Ok(out)
}

/// All `n` of one replica on one Brownian path.
pub fn converge_replica(cfg: &ExperimentConfig, seed: u64) -> Result<ReplicaOutcome> {
    let beta = cfg.beta;
    let mut bm = HypBm::new(seed, cfg.bm);
    let streams = RngStreams::new(seed);
    let opts = TauOptions { k_cut: cfg.k_cut, hit_tol: cfg.tol.hit_time };
    let taus: Vec<StoppingTimeArray> =
        cfg.n.iter().map(|&n| build_tau_array(&mut bm, &streams, n, beta, &opts)).collect::<Result<_>>()?;
    let eta1 = boundary_limit(&mut bm, cfg.tol.boundary_y)?.eta;
    let spec = brownian_spec(eta1)?;
    let t_num = truncation_point(beta);
    let mut extra: Vec<f64> = TRUNCATION_POINTS.to_vec();
    for &n in &cfg.n {
        extra.extend((1..n).map(|j| j as f64 / n as f64));
    }
    let grid = cfg.grid.build(t_num, &extra);
    let nodes = grid.nodes.clone();
    let ks = sine_kernel(&mut bm, beta, &spec, grid.clone())?;
    let sine_spec = eigs_nystrom(&ks, cfg.window)?;
    let sine_points: Vec<HPoint> = {
        let mut p = SinePath { bm: &mut bm, beta };
        nodes.iter().map(|&t| p.eval(t)).collect::<Result<_>>()?
    };
    let sine_escape = node_escape(&nodes, &sine_points, beta, &eta1)?;
    let mut certificates = truncation_certificates(&ks, &spec, beta, &sine_escape)?;

    let nu = 4.0 / beta;
    let approx_eps = eps_grid(ESCAPE_SPEED.min(0.5 / nu));
    let mut rows = Vec::with_capacity(taus.len());
    for tau in &taus {
        let mut circ = PiecewisePath { points: tau.walk.clone() };
        let kc = ResolventKernel::build(&spec, &mut circ, grid.clone())?;
        let hs_dist_sq = ks.hs_distance_sq(&kc)?;
        let circ_spec = eigs_nystrom(&kc, cfg.window)?;
        let cmp = match_and_compare(&sine_spec, &circ_spec);
        let max_eig_diff =
            cmp.rows.iter().filter(|r| r.k.abs() <= TREND_K).map(|r| r.abs_diff).fold(0.0, f64::max);
        rows.push(PairRow { n: tau.n, hs_dist_sq, mu_sq_sum: cmp.mu_sq_sum, max_eig_diff });

        let (_, delta, m) = sinh_gap(&mut SinePath { bm: &mut bm, beta }, &mut circ, &nodes)?;
        let circ_points: Vec<HPoint> = nodes.iter().map(|&t| circ.at(t)).collect();
        let circ_escape = node_escape(&nodes, &circ_points, beta, &eta1)?;
        let times: Vec<f64> = sine_escape.0.iter().chain(&circ_escape.0).copied().collect();
        let dists: Vec<f64> = sine_escape.1.iter().chain(&circ_escape.1).copied().collect();
        let cert = |b: f64, e: f64| hs3_certificate(&bound_params(&spec, beta, EscapeFit { b, eps: e }), delta, m).ok();
        if let Some(fit) = escape_fit(&times, &dists, &approx_eps, cert) {
            certificates.push(CertificateRow {
                kind: "approximation",
                param: tau.n as f64,
                measured: hs_dist_sq,
                certificate: cert(fit.b, fit.eps).unwrap(),
                fit,
                delta,
                m,
            });
        }
    }
    Ok(ReplicaOutcome { seed, rows, certificates })
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(Experiment::Converge);
    let seeds: Vec<u64> = cfg.seeds().collect();
    let results = par_map(cfg.workers, &seeds, |&s| converge_replica(cfg, s));
    let mut pairs = Table::new("converge", &["seed", "n", "hs_dist_sq", "mu_sq_sum", "hw_pass", "max_eig_diff"]);
    let mut certs = Table::new(
        "certificates",
        &["seed", "kind", "param", "measured", "certificate", "b", "eps", "delta", "m", "pass"],
    );
    let mut by_n: Vec<Vec<f64>> = vec![Vec::new(); cfg.n.len()];
    let mut diffs: Vec<Vec<f64>> = vec![Vec::new(); cfg.n.len()];
    let (mut hw_bad, mut cert_bad, mut cert_count) = (0usize, 0usize, 0usize);
    for (s, r) in seeds.iter().zip(&results) {
        report.replicas.push(ReplicaStatus::from_result(*s, r));
        let Ok(out) = r else { continue };
        for (i, row) in out.rows.iter().enumerate() {
            by_n[i].push(row.hs_dist_sq);
            diffs[i].push(row.max_eig_diff);
            hw_bad += usize::from(!row.hw_holds());
            pairs.push(vec![
                s.to_string(),
                row.n.to_string(),
                row.hs_dist_sq.to_string(),
                row.mu_sq_sum.to_string(),
                row.hw_holds().to_string(),
                row.max_eig_diff.to_string(),
            ]);
        }
        for c in &out.certificates {
            cert_count += 1;
            cert_bad += usize::from(!c.holds());
            certs.push(vec![
                s.to_string(),
                c.kind.into(),
                c.param.to_string(),
                c.measured.to_string(),
                c.certificate.to_string(),
                c.fit.b.to_string(),
                c.fit.eps.to_string(),
                c.delta.to_string(),
                c.m.to_string(),
                c.holds().to_string(),
            ]);
        }
    }
    let mut summary = Table::new("converge_summary", &["n", "replicas", "median_hs_dist_sq", "median_max_eig_diff"]);
    let medians: Vec<f64> = by_n.iter().map(|v| median(v)).collect();
    for (i, &n) in cfg.n.iter().enumerate() {
        summary.push(vec![
            n.to_string(),
            by_n[i].len().to_string(),
            medians[i].to_string(),
            median(&diffs[i]).to_string(),
        ]);
    }
    report.checks.push(Check::at_most("hoffman_wielandt_violations", "", hw_bad as f64, 0.0));
    report.checks.push(Check::at_most("certificate_violations", cert_count, cert_bad as f64, 0.0));
    if cfg.n.len() > 1 && medians.iter().all(|m| m.is_finite() && *m > 0.0) {
        let ns: Vec<f64> = cfg.n.iter().map(|&n| n as f64).collect();
        let slope = loglog_slope(&ns, &medians);
        report.checks.push(Check::at_most("rate_slope", "", slope, RATE_SLOPE_MAX));
        let first = median(&diffs[0]);
        let last = median(&diffs[cfg.n.len() - 1]);
        report.checks.push(Check::at_most("eig_diff_trend", "", last, first));
        report.figures.push((
            "converge.svg".into(),
            crate::svg::loglog_plot("median squared HS distance", "n", &ns, &medians, Some(-1.0)),
        ));
    }
    report.finish_replicas();
    report.tables.insert(0, checks_table("converge_checks", &report.checks));
    report.tables.push(pairs);
    report.tables.push(summary);
    report.tables.push(certs);
    Ok(report)
}
