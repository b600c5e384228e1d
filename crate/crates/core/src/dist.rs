//! Radial laws of hyperbolic Brownian motion and of the Beta walk step, and
//! the monotone coupling between them.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::quad::integrate_adaptive;
use crate::tol::Tolerances;

/// `log cosh x`, stable for large arguments.
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

/// Hyperbolic distance `Y = log((1 + sqrt xi) / (1 - sqrt xi))` of a step
/// whose squared disk radius `xi` is Beta(1, gamma).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLawY {
    pub gamma: f64,
}

impl StepLawY {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {gamma}")));
        }
        Ok(StepLawY { gamma })
    }

    /// Law paired with the heat kernel at time `t`: `gamma = 2/t - 1/2`.
    pub fn matching_time(t: f64) -> Result<Self> {
        Self::new(2.0 / t - 0.5)
    }

    pub fn cdf(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::NegativeRadius(r));
        }
        Ok(-(-2.0 * self.gamma * log_cosh(0.5 * r)).exp_m1())
    }

    pub fn tail(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::NegativeRadius(r));
        }
        Ok((-2.0 * self.gamma * log_cosh(0.5 * r)).exp())
    }

    pub fn pdf(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        let h = 0.5 * r;
        // gamma sinh(h) sech^{2 gamma + 1}(h) = gamma tanh(h) sech^{2 gamma}(h)
        self.gamma * h.tanh() * (-2.0 * self.gamma * log_cosh(h)).exp()
    }

    /// Inverse CDF by inversion of the Beta(1, gamma) radius.
    pub fn quantile(&self, p: f64) -> f64 {
        let xi = beta1_from_uniform(1.0 - p, self.gamma);
        radius_to_distance(xi.sqrt())
    }
}

/// `xi = 1 - U^{1/gamma}` is Beta(1, gamma) for uniform `U`.
pub fn beta1_from_uniform(u: f64, gamma: f64) -> f64 {
    -(u.ln() / gamma).exp_m1()
}

/// Disk radius to hyperbolic distance from the center.
pub fn radius_to_distance(rho: f64) -> f64 {
    2.0 * rho.atanh()
}

pub fn distance_to_radius(d: f64) -> f64 {
    (0.5 * d).tanh()
}

/// Law of `d(B(0), B(t))` for standard hyperbolic Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatRadialLaw {
    pub t: f64,
    pub tol: Tolerances,
}

// Integrands are cut where the Gaussian factor falls below e^{-GAUSS_CUT}.
const GAUSS_CUT: f64 = 42.0;

impl HeatRadialLaw {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t <= 1.0) {
            return Err(Error::InvalidArgument(format!("time must lie in (0, 1], got {t}")));
        }
        Ok(HeatRadialLaw { t, tol: Tolerances::DEFAULT })
    }

    fn prefactor(&self) -> f64 {
        (-self.t / 8.0).exp() / (PI.sqrt() * self.t.powf(1.5))
    }

    /// Upper limit in `u = sqrt(cosh s - cosh r)` beyond which the Gaussian
    /// factor is negligible.
    fn u_max(&self, r: f64) -> f64 {
        let s_max = (r * r + 2.0 * self.t * GAUSS_CUT).sqrt();
        (2.0 * (0.5 * (s_max + r)).sinh() * (0.5 * (s_max - r)).sinh()).sqrt()
    }

    /// Maps `u` back to `s` with `cosh s = cosh r + u^2`.
    fn s_of_u(r: f64, u: f64) -> f64 {
        let sh = (0.5 * r).sinh();
        let v = 2.0 * sh * sh + u * u;
        (v + (v * (v + 2.0)).sqrt()).ln_1p()
    }

    pub fn pdf(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::NegativeRadius(r));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let t = self.t;
        let log_scale = -r * r / (2.0 * t);
        if log_scale + r < -745.0 {
            return Ok(0.0);
        }
        // sinh r / sinh s = e^{r - s} (1 - e^{-2r}) / (1 - e^{-2s})
        let a = -(-2.0 * r).exp_m1();
        let f = |u: f64| {
            let s = Self::s_of_u(r, u);
            let ratio = (r - s).exp() * a / -(-2.0 * s).exp_m1();
            2.0 * s * (-(s - r) * (s + r) / (2.0 * t)).exp() * ratio
        };
        let (val, err) =
            integrate_adaptive(f, 0.0, self.u_max(r), self.tol.quad_rel, self.tol.quad_abs)
                .map_err(|e| match e {
                    Error::QuadratureFailed { estimate } => Error::QuadratureFailed {
                        estimate: estimate * self.prefactor() * log_scale.exp(),
                    },
                    other => other,
                })?;
        let _ = err;
        Ok(self.prefactor() * log_scale.exp() * val)
    }

    pub fn tail(&self, r: f64) -> Result<f64> {
        if r < 0.0 {
            return Err(Error::NegativeRadius(r));
        }
        let t = self.t;
        let log_scale = -r * r / (2.0 * t);
        if log_scale - r < -745.0 {
            return Ok(0.0);
        }
        let f = |u: f64| {
            if u == 0.0 {
                return 0.0;
            }
            let s = Self::s_of_u(r, u);
            // 1 / sinh s = 2 e^{-s} / (1 - e^{-2s})
            let inv_sinh = 2.0 * (-s).exp() / -(-2.0 * s).exp_m1();
            2.0 * u * u * s * (-(s - r) * (s + r) / (2.0 * t)).exp() * inv_sinh
        };
        let (val, _) = integrate_adaptive(f, 0.0, self.u_max(r), self.tol.quad_rel, self.tol.quad_abs)?;
        Ok((2.0 * self.prefactor() * log_scale.exp() * val).min(1.0))
    }

    pub fn cdf(&self, r: f64) -> Result<f64> {
        Ok(1.0 - self.tail(r)?)
    }

    /// Smallest grid radius beyond which both this law and `other` carry less
    /// than `eps` mass.
    fn support_end(&self, other: &StepLawY, eps: f64) -> f64 {
        let mut r: f64 = 0.5;
        loop {
            let zeta_tail = tail_upper_bound(r, self.t.min(0.999));
            let y_tail = other.tail(r).unwrap_or(0.0);
            if zeta_tail < eps && y_tail < eps {
                return r;
            }
            r *= 1.25;
        }
    }
}

/// Lower pointwise bound for the heat-kernel radial density.
pub fn p_minus(r: f64, t: f64) -> f64 {
    (1.0 + t / 12.0).powf(-0.5) / t * (-r * r / (2.0 * t) - r * r / 12.0 - t / 8.0).exp() * r.sinh()
}

/// Upper pointwise bound for the heat-kernel radial density.
pub fn p_plus(r: f64, t: f64) -> f64 {
    (-r * r / (2.0 * t) - t / 8.0).exp() * r.sinh() / t
}

/// Upper bound for the radial tail, valid for `0 < t < 12`.
pub fn tail_upper_bound(r: f64, t: f64) -> f64 {
    (1.0 - t / 12.0).powf(-1.5) * (-r * r / (2.0 * t) + r * r / 12.0 - t / 8.0).exp()
}

/// Bounds on `sqrt(cosh s - cosh r)` for `0 <= r <= s`.
pub fn cosh_gap_bounds(r: f64, s: f64) -> Result<(f64, f64)> {
    if r < 0.0 || r > s {
        return Err(Error::InvalidArgument(format!("need 0 <= r <= s, got r={r}, s={s}")));
    }
    let base = ((s * s - r * r) / 2.0).sqrt();
    Ok((base, base * ((r * r + s * s) / 24.0).exp()))
}

/// `(lower, upper)` bounds on `log cosh x`; the lower bound holds on `[0, 1]`
/// and is `None` elsewhere.
pub fn log_cosh_bounds(x: f64) -> (Option<f64>, f64) {
    let upper = 0.5 * x * x;
    let lower = (0.0..=1.0).contains(&x).then(|| upper - x.powi(4) / 12.0);
    (lower, upper)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TvReport {
    pub t: f64,
    /// `∫ |p_Y - p_zeta|`.
    pub l1: f64,
    /// Total variation in the half-L1 convention.
    pub half_l1: f64,
}

/// Distance between the heat-kernel radial law at time `t` and the matched
/// Beta step law.
pub fn tv_distance(t: f64) -> Result<TvReport> {
    let zeta = HeatRadialLaw::new(t)?;
    let y = StepLawY::matching_time(t)?;
    let end = zeta.support_end(&y, 1e-14);
    let err = std::cell::Cell::new(None);
    let f = |r: f64| match zeta.pdf(r) {
        Ok(p) => (y.pdf(r) - p).abs(),
        Err(e) => {
            err.set(Some(e));
            0.0
        }
    };
    let (l1, _) = integrate_adaptive(f, 0.0, end, 1e-8, 1e-12)?;
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(TvReport { t, l1, half_l1: 0.5 * l1 })
}

/// Tabulated CDF on an increasing grid starting at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfTable {
    pub r: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl CdfTable {
    pub fn tabulate(r: Vec<f64>, mut f: impl FnMut(f64) -> Result<f64>) -> Result<Self> {
        let mut cdf = Vec::with_capacity(r.len());
        let mut prev: f64 = 0.0;
        for &ri in &r {
            // enforce monotonicity against quadrature jitter
            let v = f(ri)?.clamp(0.0, 1.0).max(prev);
            cdf.push(v);
            prev = v;
        }
        Ok(CdfTable { r, cdf })
    }

    /// Grid with `len` points on `[0, end]`, quadratically denser near zero.
    pub fn quadratic_grid(end: f64, len: usize) -> Vec<f64> {
        let m = (len - 1) as f64;
        (0..len).map(|j| end * (j as f64 / m).powi(2)).collect()
    }

    pub fn write_csv(&self, mut w: impl std::io::Write) -> std::io::Result<()> {
        writeln!(w, "# schema=1")?;
        writeln!(w, "r,pdf,cdf")?;
        let n = self.r.len();
        for j in 0..n {
            let (a, b) = (j.saturating_sub(1), (j + 1).min(n - 1));
            let pdf = if b > a { (self.cdf[b] - self.cdf[a]) / (self.r[b] - self.r[a]) } else { 0.0 };
            writeln!(w, "{},{},{}", self.r[j], pdf, self.cdf[j])?;
        }
        Ok(())
    }
}

/// Outcome of the coupling map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupled {
    Stay(f64),
    Move(f64),
}

impl Coupled {
    pub fn value(self) -> f64 {
        match self {
            Coupled::Stay(v) | Coupled::Move(v) => v,
        }
    }
}

/// Monotone coupling `g(x, u) >= x` turning a sample of the first law into a
/// sample of the second, dominating one, staying put with probability `1 - eps`.
#[derive(Debug, Clone)]
pub struct MonotoneCoupling {
    r: Vec<f64>,
    /// Shared mass per cell.
    common: Vec<f64>,
    /// First-law mass per cell.
    mass1: Vec<f64>,
    /// Normalized cumulative excess masses at the grid points.
    excess1: Vec<f64>,
    excess2: Vec<f64>,
    pub eps: f64,
}

impl MonotoneCoupling {
    pub fn build(f1: &CdfTable, f2: &CdfTable, slack: f64) -> Result<Self> {
        if f1.r != f2.r || f1.r.len() < 2 {
            return Err(Error::GridMismatch);
        }
        let n = f1.r.len();
        let mut g2 = f2.cdf.clone();
        for j in 0..n {
            let gap = g2[j] - f1.cdf[j];
            if gap > slack {
                return Err(Error::NotStochasticallyOrdered { at: f1.r[j], gap });
            }
            g2[j] = g2[j].min(f1.cdf[j]);
        }
        let mut common = Vec::with_capacity(n);
        let mut mass1 = Vec::with_capacity(n);
        let mut c1 = vec![0.0; n + 1];
        let mut c2 = vec![0.0; n + 1];
        for j in 0..n {
            // the last cell collects the mass beyond the grid
            let (p1, p2) = if j + 1 < n {
                (f1.cdf[j + 1] - f1.cdf[j], (g2[j + 1] - g2[j]).max(0.0))
            } else {
                (1.0 - f1.cdf[j], 1.0 - g2[j])
            };
            let m = p1.min(p2);
            common.push(m);
            mass1.push(p1);
            c1[j + 1] = c1[j] + (p1 - m);
            c2[j + 1] = c2[j] + (p2 - m);
        }
        let e1 = c1[n];
        let e2 = c2[n];
        let eps = 0.5 * (e1 + e2);
        let norm = |c: Vec<f64>, e: f64| {
            if e > 0.0 {
                c.into_iter().map(|v| v / e).collect()
            } else {
                c
            }
        };
        Ok(MonotoneCoupling {
            r: f1.r.clone(),
            common,
            mass1,
            excess1: norm(c1, e1),
            excess2: norm(c2, e2),
            eps,
        })
    }

    fn cell(&self, x: f64) -> usize {
        let n = self.r.len();
        match self.r.binary_search_by(|v| v.total_cmp(&x)) {
            Ok(j) => j.min(n - 1),
            Err(j) => j.saturating_sub(1).min(n - 1),
        }
    }

    fn cell_fraction(&self, j: usize, x: f64) -> f64 {
        if j + 1 < self.r.len() {
            ((x - self.r[j]) / (self.r[j + 1] - self.r[j])).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// Probability that `g(x, ·)` leaves `x` unchanged.
    pub fn stay_probability(&self, x: f64) -> f64 {
        let j = self.cell(x);
        if self.mass1[j] > 0.0 {
            (self.common[j] / self.mass1[j]).min(1.0)
        } else {
            1.0
        }
    }

    pub fn apply(&self, x: f64, u: f64) -> Coupled {
        let j = self.cell(x);
        if self.eps <= 0.0 || u < self.stay_probability(x) {
            return Coupled::Stay(x);
        }
        let frac = self.cell_fraction(j, x);
        let level = self.excess1[j] + frac * (self.excess1[j + 1] - self.excess1[j]);
        // generalized inverse of the second excess CDF
        let k = self.excess2.partition_point(|&v| v < level).max(1) - 1;
        let k = k.min(self.r.len() - 1);
        let lo = self.excess2[k];
        let hi = self.excess2[k + 1];
        let y = if k + 1 < self.r.len() && hi > lo {
            self.r[k] + (level - lo) / (hi - lo) * (self.r[k + 1] - self.r[k])
        } else {
            self.r[k]
        };
        Coupled::Move(y.max(x))
    }
}

pub const COUPLING_GRID_LEN: usize = 4096;

/// Coupling of `d(B(0), B(t))` at `t = 4 / (2 gamma + 1)` to the step law with
/// parameter `gamma`, both in hyperbolic distance.
pub fn build_heat_step_coupling(gamma: f64) -> Result<MonotoneCoupling> {
    let y = StepLawY::new(gamma)?;
    let t = 4.0 / (2.0 * gamma + 1.0);
    let zeta = HeatRadialLaw::new(t)?;
    let end = zeta.support_end(&y, 1e-13);
    let grid = CdfTable::quadratic_grid(end, COUPLING_GRID_LEN);
    let f1 = CdfTable::tabulate(grid.clone(), |r| zeta.cdf(r))?;
    let f2 = CdfTable::tabulate(grid, |r| y.cdf(r))?;
    MonotoneCoupling::build(&f1, &f2, Tolerances::DEFAULT.domination)
}

type CouplingCache = Mutex<HashMap<u64, Arc<OnceLock<Arc<MonotoneCoupling>>>>>;

/// Cached [`build_heat_step_coupling`].
pub fn heat_step_coupling(gamma: f64) -> Result<Arc<MonotoneCoupling>> {
    static CACHE: OnceLock<CouplingCache> = OnceLock::new();
    let cell = {
        let mut map = CACHE.get_or_init(Default::default).lock().unwrap();
        map.entry(gamma.to_bits()).or_default().clone()
    };
    if let Some(c) = cell.get() {
        return Ok(c.clone());
    }
    let built = Arc::new(build_heat_step_coupling(gamma)?);
    Ok(cell.get_or_init(|| built).clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_law_examples() {
        let y = StepLawY::new(1.0).unwrap();
        assert_eq!(y.cdf(0.0).unwrap(), 0.0);
        let r = 2.0 * 2f64.sqrt().acosh();
        assert!((y.cdf(r).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(y.cdf(-1.0), Err(Error::NegativeRadius(-1.0)));
        for g in [0.5, 1.0, 7.5, 40.0] {
            let y = StepLawY::new(g).unwrap();
            let (mass, _) = integrate_adaptive(|r| y.pdf(r), 0.0, 200.0, 1e-13, 0.0).unwrap();
            assert!((mass - 1.0).abs() < 1e-10, "gamma={g}: {mass}");
            let q = y.quantile(0.3);
            assert!((y.cdf(q).unwrap() - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn heat_law_normalizes() {
        for t in [0.1, 0.5, 1.0] {
            let law = HeatRadialLaw::new(t).unwrap();
            assert_eq!(law.pdf(0.0).unwrap(), 0.0);
            assert!((law.tail(0.0).unwrap() - 1.0).abs() < 1e-9);
            let (mass, _) =
                integrate_adaptive(|r| law.pdf(r).unwrap(), 0.0, 20.0 * t.sqrt() + 5.0, 1e-10, 0.0).unwrap();
            assert!((mass - 1.0).abs() < 1e-6, "t={t}: {mass}");
        }
    }

    #[test]
    fn tail_matches_integrated_density() {
        let law = HeatRadialLaw::new(0.4).unwrap();
        for r in [0.1, 0.5, 1.2] {
            let (m, _) = integrate_adaptive(|s| law.pdf(s).unwrap(), r, 12.0, 1e-11, 0.0).unwrap();
            assert!((law.tail(r).unwrap() - m).abs() < 1e-6);
        }
    }

    #[test]
    fn density_against_direct_quadrature() {
        // raw integral with the endpoint singularity handled by s = r + w^2
        let (r, t) = (0.8, 0.3);
        let raw = |w: f64| {
            let s = r + w * w;
            let gap = 2.0 * ((s + r) / 2.0).sinh() * ((s - r) / 2.0).sinh();
            if w == 0.0 {
                return 2.0 * r * (-r * r / (2.0 * t)).exp() / r.sinh().sqrt();
            }
            2.0 * w * s * (-s * s / (2.0 * t)).exp() / gap.sqrt()
        };
        let (int, _) = integrate_adaptive(raw, 0.0, 4.0, 1e-12, 0.0).unwrap();
        let expect = (-t / 8.0f64).exp() * r.sinh() / (PI.sqrt() * t.powf(1.5)) * int;
        let got = HeatRadialLaw::new(t).unwrap().pdf(r).unwrap();
        assert!((got - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn proof_bounds_pointwise() {
        for &t in &[0.05, 0.2, 0.7, 1.0] {
            let law = HeatRadialLaw::new(t).unwrap();
            for k in 1..40 {
                let r = k as f64 * 0.1;
                let p = law.pdf(r).unwrap();
                assert!(p_minus(r, t) <= p + 1e-8);
                assert!(p <= p_plus(r, t) + 1e-8);
                assert!(law.tail(r).unwrap() <= tail_upper_bound(r, t) + 1e-8);
            }
        }
    }

    #[test]
    fn cosh_gap_examples() {
        assert_eq!(cosh_gap_bounds(0.7, 0.7).unwrap(), (0.0, 0.0));
        let (lo, hi) = cosh_gap_bounds(0.0, 1.0).unwrap();
        let mid = (1f64.cosh() - 1.0).sqrt();
        assert!(lo <= mid && mid <= hi);
        assert!((lo - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        assert!((hi - (1.0 / 24.0f64).exp() / 2f64.sqrt()).abs() < 1e-15);
        assert!(cosh_gap_bounds(2.0, 1.0).is_err());
    }

    #[test]
    fn log_cosh_bound_examples() {
        assert_eq!(log_cosh_bounds(0.0), (Some(0.0), 0.0));
        let (lo, hi) = log_cosh_bounds(0.5);
        let v = log_cosh(0.5);
        assert!(lo.unwrap() <= v && v <= hi);
        let (lo, hi) = log_cosh_bounds(3.0);
        assert!(lo.is_none() && log_cosh(3.0) <= hi);
        assert!((log_cosh(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-12);
    }

    #[test]
    fn tv_bound_and_trend() {
        let mut prev = 0.0;
        for t in [0.05, 0.1, 0.5, 1.0] {
            let tv = tv_distance(t).unwrap();
            assert!(tv.l1 >= 0.0);
            assert!(tv.l1 <= 1.5 * t, "t={t}: {}", tv.l1);
            assert!(tv.l1 > prev);
            assert!((tv.half_l1 - 0.5 * tv.l1).abs() < 1e-16);
            prev = tv.l1;
        }
    }

    #[test]
    fn identical_tables_give_identity_coupling() {
        let r = CdfTable::quadratic_grid(5.0, 64);
        let y = StepLawY::new(3.0).unwrap();
        let f = CdfTable::tabulate(r, |x| y.cdf(x)).unwrap();
        let c = MonotoneCoupling::build(&f, &f, 0.0).unwrap();
        assert!(c.eps.abs() < 1e-15);
        assert_eq!(c.apply(0.3, 0.999), Coupled::Stay(0.3));
    }

    #[test]
    fn reversed_order_is_rejected() {
        let r = CdfTable::quadratic_grid(5.0, 64);
        let small = StepLawY::new(6.0).unwrap();
        let big = StepLawY::new(2.0).unwrap();
        let f1 = CdfTable::tabulate(r.clone(), |x| big.cdf(x)).unwrap();
        let f2 = CdfTable::tabulate(r, |x| small.cdf(x)).unwrap();
        assert!(matches!(
            MonotoneCoupling::build(&f1, &f2, 1e-8),
            Err(Error::NotStochasticallyOrdered { .. })
        ));
        assert!(MonotoneCoupling::build(&f2, &f1, 1e-8).is_ok());
    }

    #[test]
    fn coupling_is_monotone() {
        let c = build_heat_step_coupling(9.5).unwrap();
        assert!(c.eps > 0.0 && c.eps < 0.3);
        for i in 0..200 {
            let x = i as f64 * 0.01;
            for u in [0.0, 0.3, 0.9, 0.999] {
                assert!(c.apply(x, u).value() >= x);
            }
        }
    }
}
