use crate::config::{Experiment, ExperimentConfig};
use crate::dist::{
    cosh_gap_bounds, log_cosh, log_cosh_bounds, p_minus, p_plus, tail_upper_bound, tv_distance, HeatRadialLaw,
    StepLawY,
};
use crate::error::Result;

use super::{checks_table, Check, Report};

/// Largest radius of the comparison grids.
pub const R_MAX: f64 = 10.0;

/// The `l1` distance between the heat-kernel radius and its Beta match may
/// not exceed this multiple of `t`.
pub const L1_FACTOR: f64 = 3.0;

fn r_grid(points: usize) -> Vec<f64> {
    (1..=points).map(|j| R_MAX * j as f64 / points as f64).collect()
}

/// Largest violation of each pointwise inequality at time `t`.
fn time_checks(t: f64, points: usize, slack: f64) -> Result<Vec<Check>> {
    let zeta = HeatRadialLaw::new(t)?;
    let y = StepLawY::matching_time(t)?;
    let (mut dom, mut lo, mut hi, mut tail) = (f64::MIN, f64::MIN, f64::MIN, f64::MIN);
    for r in r_grid(points) {
        let zt = zeta.tail(r)?;
        dom = dom.max(zt - y.tail(r)?);
        let p = zeta.pdf(r)?;
        lo = lo.max(p_minus(r, t) - p);
        hi = hi.max(p - p_plus(r, t));
        tail = tail.max(zt - tail_upper_bound(r, t));
    }
    let tv = tv_distance(t)?;
    Ok(vec![
        Check::at_most("domination", t, dom, slack),
        Check::at_most("tv_l1", t, tv.l1, L1_FACTOR * t),
        Check::at_most("pdf_lower", t, lo, slack),
        Check::at_most("pdf_upper", t, hi, slack),
        Check::at_most("tail_upper", t, tail, slack),
    ])
}

/// Time-independent inequalities on `[0, 5]`.
fn static_checks(points: usize, slack: f64) -> Vec<Check> {
    let xs: Vec<f64> = (0..=points).map(|j| 5.0 * j as f64 / points as f64).collect();
    let (mut gap_lo, mut gap_hi) = (f64::MIN, f64::MIN);
    for (i, &s) in xs.iter().enumerate() {
        for &r in &xs[..=i] {
            let (lo, hi) = cosh_gap_bounds(r, s).expect("r <= s");
            let v = (s.cosh() - r.cosh()).max(0.0).sqrt();
            gap_lo = gap_lo.max(lo - v);
            gap_hi = gap_hi.max(v - hi);
        }
    }
    let (mut lc_lo, mut lc_hi) = (f64::MIN, f64::MIN);
    for &x in &xs {
        let (lo, hi) = log_cosh_bounds(x);
        let v = log_cosh(x);
        if let Some(lo) = lo {
            lc_lo = lc_lo.max(lo - v);
        }
        lc_hi = lc_hi.max(v - hi);
    }
    vec![
        Check::at_most("cosh_gap_lower", "", gap_lo, slack),
        Check::at_most("cosh_gap_upper", "", gap_hi, slack),
        Check::at_most("log_cosh_lower", "", lc_lo, slack),
        Check::at_most("log_cosh_upper", "", lc_hi, slack),
    ]
}

pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report = Report::new(Experiment::Heatkernel);
    let slack = cfg.tol.domination;
    let mut ts = cfg.t_grid.clone();
    ts.sort_by(f64::total_cmp);
    let mut l1 = Vec::new();
    for &t in &ts {
        match time_checks(t, cfg.r_points, slack) {
            Ok(c) => {
                l1.push(c[1].statistic);
                report.checks.extend(c);
            }
            Err(e) => {
                report.numerical_failure = true;
                report.checks.push(Check {
                    name: format!("error: {e}"),
                    param: t.to_string(),
                    statistic: f64::NAN,
                    bound: f64::NAN,
                    passed: false,
                });
            }
        }
    }
    if l1.len() > 1 {
        let drops = l1.windows(2).filter(|w| w[1] <= w[0]).count();
        report.checks.push(Check::at_most("tv_monotone", "", drops as f64, 0.0));
    }
    report.checks.extend(static_checks(cfg.r_points, slack));
    report.tables.push(checks_table("heatkernel", &report.checks));
    Ok(report)
}
