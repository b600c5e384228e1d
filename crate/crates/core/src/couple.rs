//! Stopping times on one hyperbolic Brownian path that reproduce the Beta
//! random walk, and the coupled pair of driving paths built from them.

use crate::dist::{beta1_from_uniform, heat_step_coupling, Coupled};
use crate::error::{Error, Result};
use crate::hgeom::{dist_h, to_disk, HPoint};
use crate::paths::{boundary_limit, step_length, time_change, BoundaryEstimate, HypBm};
use crate::rng::{Role, RngStreams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleStepResult {
    /// Stopping time measured from the start of the step.
    pub sigma: f64,
    pub endpoint: HPoint,
    /// Whether the coupling kept the fixed time `4/(2 gamma + 1)`.
    pub exact: bool,
}

pub fn fixed_step_time(gamma: f64) -> f64 {
    4.0 / (2.0 * gamma + 1.0)
}

/// One step of the walk read off `bm` from time `from`: run to the fixed
/// time, then continue until the distance from the start reaches the coupled
/// target.
pub fn single_step(bm: &mut HypBm, from: f64, gamma: f64, u: f64, hit_tol: f64) -> Result<SingleStepResult> {
    if !(gamma >= 1.5) {
        return Err(Error::InvalidArgument(format!("single step needs gamma >= 3/2, got {gamma}")));
    }
    let t0 = fixed_step_time(gamma);
    let center = bm.point(from)?;
    let p = bm.point(from + t0)?;
    let r = dist_h(center, p);
    let coupling = heat_step_coupling(gamma)?;
    match coupling.apply(r, u) {
        Coupled::Stay(_) => Ok(SingleStepResult { sigma: t0, endpoint: p, exact: true }),
        Coupled::Move(target) => {
            let (t, q) = bm.hit_distance(from + t0, center, target, hit_tol)?;
            Ok(SingleStepResult { sigma: t - from, endpoint: q, exact: t == from + t0 })
        }
    }
}

/// Regime threshold `max(ceil(c log^p n), ceil(3 / beta))`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KCut {
    pub c: f64,
    pub p: f64,
}

impl Default for KCut {
    fn default() -> Self {
        KCut { c: 1.0, p: 2.0 }
    }
}

impl KCut {
    pub fn value(&self, n: usize, beta: f64) -> usize {
        let a = (self.c * (n as f64).ln().powf(self.p)).ceil();
        let b = (3.0 / beta).ceil();
        a.max(b).max(0.0) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Regime {
    /// Fixed-time step with the monotone coupling.
    Coupled,
    /// First hitting of a freshly drawn distance.
    Hitting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingTimeArray {
    pub n: usize,
    pub beta: f64,
    /// `taus[k]` for `k = 0..=n`; `taus[n] = 0` and `taus[0] = inf`.
    pub taus: Vec<f64>,
    /// `walk[j] = B(taus[n - j])` for `j = 0..n`.
    pub walk: Vec<HPoint>,
    /// Regime of the step ending at `taus[k]`, indexed by `k = 1..n`; entry 0
    /// is unused.
    pub regimes: Vec<Option<Regime>>,
    /// Hyperbolic length of the step ending at `taus[k]`.
    pub step_lengths: Vec<f64>,
    /// Whether a coupled step kept its fixed time.
    pub exact: Vec<bool>,
    pub k_cut: usize,
}

pub struct TauOptions {
    pub k_cut: KCut,
    pub hit_tol: f64,
}

impl Default for TauOptions {
    fn default() -> Self {
        TauOptions { k_cut: KCut::default(), hit_tol: crate::tol::Tolerances::DEFAULT.hit_time }
    }
}

pub fn build_tau_array(
    bm: &mut HypBm,
    streams: &RngStreams,
    n: usize,
    beta: f64,
    opts: &TauOptions,
) -> Result<StoppingTimeArray> {
    if n == 0 || !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("need n >= 1 and beta > 0, got n={n}, beta={beta}")));
    }
    let k_cut = opts.k_cut.value(n, beta);
    let mut taus = vec![0.0; n + 1];
    taus[0] = f64::INFINITY;
    let mut regimes = vec![None; n];
    let mut step_lengths = vec![0.0; n];
    let mut exact = vec![false; n];
    let mut walk = Vec::with_capacity(n);
    walk.push(bm.point(0.0)?);
    for k in (1..n).rev() {
        let from = taus[k + 1];
        let start = *walk.last().unwrap();
        let gamma = 0.5 * beta * k as f64;
        let wrap = |e: Error| Error::TauArray { k, source: Box::new(e) };
        let (tau, p) = if k >= k_cut {
            let u = streams.uniform(k as u64, Role::Coupling);
            let s = single_step(bm, from, gamma, u, opts.hit_tol).map_err(wrap)?;
            regimes[k] = Some(Regime::Coupled);
            exact[k] = s.exact;
            (from + s.sigma, s.endpoint)
        } else {
            let xi = beta1_from_uniform(streams.uniform(k as u64, Role::StepRadius), gamma);
            let target = step_length(xi);
            regimes[k] = Some(Regime::Hitting);
            let (t, p) = bm.hit_distance(from, start, target, opts.hit_tol).map_err(wrap)?;
            // a zero-length target is hit at the start; keep times strictly increasing
            let t = if t > from { t } else { from + bm.step() * f64::EPSILON };
            (t, p)
        };
        taus[k] = tau;
        step_lengths[k] = dist_h(start, p);
        walk.push(p);
    }
    Ok(StoppingTimeArray { n, beta, taus, walk, regimes, step_lengths, exact, k_cut })
}

/// Time-changed Brownian path and its coupled piecewise-constant walk path,
/// sharing the boundary points `inf` and `B(inf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPair {
    pub tau: StoppingTimeArray,
    pub eta1: BoundaryEstimate,
}

impl CoupledPair {
    pub fn n(&self) -> usize {
        self.tau.n
    }

    pub fn beta(&self) -> f64 {
        self.tau.beta
    }

    /// Walk path at `t in [0, 1)`.
    pub fn discrete(&self, t: f64) -> HPoint {
        let n = self.tau.n;
        let j = ((t * n as f64).floor() as usize).min(n - 1);
        self.tau.walk[j]
    }

    /// Brownian path at `t in [0, 1)`.
    pub fn continuous(&self, bm: &mut HypBm, t: f64) -> Result<HPoint> {
        bm.point(time_change(t, self.tau.beta))
    }
}

pub fn coupled_pair(
    bm: &mut HypBm,
    streams: &RngStreams,
    n: usize,
    beta: f64,
    opts: &TauOptions,
    limit_tol: f64,
) -> Result<CoupledPair> {
    let tau = build_tau_array(bm, streams, n, beta, opts)?;
    let eta1 = boundary_limit(bm, limit_tol)?;
    Ok(CoupledPair { tau, eta1 })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DeviationRow {
    pub t: f64,
    pub deviation: f64,
    pub envelope: f64,
    pub ratio: f64,
}

/// `log^{2.875} n / sqrt((1 - t) n)`.
pub fn deviation_envelope(n: usize, t: f64) -> f64 {
    let n = n as f64;
    n.ln().powf(2.875) / ((1.0 - t) * n).sqrt()
}

pub fn deviation_report(pair: &CoupledPair, bm: &mut HypBm, ts: &[f64]) -> Result<Vec<DeviationRow>> {
    ts.iter()
        .map(|&t| {
            let deviation = dist_h(pair.continuous(bm, t)?, pair.discrete(t));
            let envelope = deviation_envelope(pair.n(), t);
            Ok(DeviationRow { t, deviation, envelope, ratio: deviation / envelope })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ClockRow {
    pub k: usize,
    pub tau: f64,
    /// `(4 / beta) log(n / k)`.
    pub clock: f64,
    pub deviation: f64,
    /// `log^{4.5} n / k`.
    pub envelope: f64,
}

pub fn clock_report(tau: &StoppingTimeArray) -> Vec<ClockRow> {
    let n = tau.n as f64;
    (1..tau.n)
        .map(|k| {
            let clock = 4.0 / tau.beta * (n / k as f64).ln();
            ClockRow {
                k,
                tau: tau.taus[k],
                clock,
                deviation: (tau.taus[k] - clock).abs(),
                envelope: n.ln().powf(4.5) / k as f64,
            }
        })
        .collect()
}

/// Disk-chart squared radius of `p` seen from `center`.
pub fn disk_radius_sq(p: HPoint, center: HPoint) -> f64 {
    let d = to_disk(p, center);
    d.u * d.u + d.v * d.v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::paths::BmConfig;

    fn bm(seed: u64) -> HypBm {
        HypBm::new(seed, BmConfig { level: 10, horizon_cap: 200.0 })
    }

    #[test]
    fn k_cut_examples() {
        let kc = KCut::default();
        assert_eq!(kc.value(64, 2.0), 18);
        assert_eq!(kc.value(2, 2.0), 2);
        assert_eq!(kc.value(1, 0.5), 6);
    }

    #[test]
    fn single_step_respects_fixed_time() {
        let mut b = bm(1);
        for (i, u) in [0.01, 0.5, 0.99, 0.9999].into_iter().enumerate() {
            let s = single_step(&mut b, i as f64, 10.0, u, 1e-6).unwrap();
            assert!(s.sigma >= fixed_step_time(10.0));
            assert!(disk_radius_sq(s.endpoint, b.point(i as f64).unwrap()) < 1.0);
        }
        assert!(single_step(&mut b, 0.0, 1.0, 0.5, 1e-6).is_err());
    }

    #[test]
    fn tau_array_structure() {
        let mut b = bm(7);
        let arr = build_tau_array(&mut b, &RngStreams::new(7), 40, 2.0, &TauOptions::default()).unwrap();
        assert_eq!(arr.taus[40], 0.0);
        assert_eq!(arr.taus[0], f64::INFINITY);
        for k in 0..40 {
            assert!(arr.taus[k] > arr.taus[k + 1]);
        }
        for j in 0..40 {
            assert_eq!(arr.walk[j], b.point(arr.taus[40 - j]).unwrap());
        }
        assert_eq!(arr.regimes[arr.k_cut], Some(Regime::Coupled));
        assert_eq!(arr.regimes[arr.k_cut - 1], Some(Regime::Hitting));
    }

    #[test]
    fn tail_steps_do_not_depend_on_n() {
        let opts = TauOptions::default();
        let a = build_tau_array(&mut bm(3), &RngStreams::new(3), 30, 2.0, &opts).unwrap();
        let b = build_tau_array(&mut bm(3), &RngStreams::new(3), 60, 2.0, &opts).unwrap();
        for k in 1..a.k_cut.min(b.k_cut) {
            let xi = beta1_from_uniform(RngStreams::new(3).uniform(k as u64, Role::StepRadius), k as f64);
            let target = step_length(xi);
            assert!((a.step_lengths[k] - target).abs() < 2e-7);
            assert!((a.step_lengths[k] - b.step_lengths[k]).abs() < 2e-7);
        }
    }

    #[test]
    fn stopping_times_ignore_the_future() {
        let opts = TauOptions::default();
        let a = build_tau_array(&mut bm(5), &RngStreams::new(5), 20, 2.0, &opts).unwrap();
        let unit = a.taus[1].ceil() as u64 + 1;
        let mut alt = HypBm::with_continuation(5, BmConfig { level: 10, horizon_cap: 200.0 }, unit, 1234);
        let b = build_tau_array(&mut alt, &RngStreams::new(5), 20, 2.0, &opts).unwrap();
        assert_eq!(a.taus, b.taus);
    }

    #[test]
    fn pair_starts_together() {
        let mut b = bm(9);
        let pair = coupled_pair(&mut b, &RngStreams::new(9), 16, 2.0, &TauOptions::default(), 1e-6).unwrap();
        assert_eq!(pair.discrete(0.0), HPoint::I);
        assert_eq!(pair.continuous(&mut b, 0.0).unwrap(), HPoint::I);
        let rows = deviation_report(&pair, &mut b, &[0.0, 0.5, 0.9]).unwrap();
        assert_eq!(rows[0].ratio, 0.0);
        assert!(rows.iter().all(|r| r.envelope.is_finite()));
        assert_eq!(clock_report(&pair.tau).len(), 15);
    }
}
