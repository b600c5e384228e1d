//! Hyperbolic Brownian motion on a dyadic grid with consistent bridge
//! refinement, its boundary limit, and the Beta-step random walk.

use std::collections::BTreeMap;
use std::ops::Bound::Excluded;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::dist::{beta1_from_uniform, radius_to_distance};
use crate::error::{Error, Result};
use crate::hgeom::{boundary_from_disk_angle, dist_h, from_disk, BoundaryPt, DPoint, HPoint};
use crate::rng::{keyed_normal, open_uniform, stream, Role, RngStreams};

const LEVY_DOMAIN: u64 = 0x4c45_5659;
const BRIDGE_DOMAIN: u64 = 0x4252_4447;

pub const HIT_DISTANCE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BmConfig {
    /// Base step `2^-level`.
    pub level: u32,
    /// Largest time the path may be extended to.
    pub horizon_cap: f64,
}

impl Default for BmConfig {
    fn default() -> Self {
        BmConfig { level: 12, horizon_cap: 200.0 }
    }
}

/// Driving Brownian coordinates and the resulting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BmSample {
    pub b1: f64,
    pub b2: f64,
    pub x: f64,
    pub y: f64,
}

impl BmSample {
    pub fn point(&self) -> HPoint {
        HPoint::new(self.x, self.y)
    }
}

/// Solution of `dx = y dB1, dy = y dB2` started at `start`.
///
/// `y` is exact on every sampled time. Unit time intervals are generated
/// lazily by a Lévy construction and later queries are answered by Brownian
/// bridges, so already sampled values never change.
#[derive(Debug, Clone)]
pub struct HypBm {
    seed: u64,
    continuation: Option<(u64, u64)>,
    start: HPoint,
    level: u32,
    per_unit: usize,
    h: f64,
    cap: f64,
    base: Vec<BmSample>,
    inserted: BTreeMap<u64, BmSample>,
}

impl HypBm {
    pub fn new(seed: u64, cfg: BmConfig) -> Self {
        Self::starting_at(seed, cfg, HPoint::I)
    }

    pub fn starting_at(seed: u64, cfg: BmConfig, start: HPoint) -> Self {
        assert!(cfg.level <= 24 && cfg.horizon_cap > 0.0 && start.y > 0.0);
        let per_unit = 1usize << cfg.level;
        HypBm {
            seed,
            continuation: None,
            start,
            level: cfg.level,
            per_unit,
            h: 1.0 / per_unit as f64,
            cap: cfg.horizon_cap,
            base: vec![BmSample { b1: 0.0, b2: 0.0, x: start.x, y: start.y }],
            inserted: BTreeMap::new(),
        }
    }

    /// Same path up to time `from_unit`, driven by `alt_seed` afterwards.
    pub fn with_continuation(seed: u64, cfg: BmConfig, from_unit: u64, alt_seed: u64) -> Self {
        let mut bm = Self::new(seed, cfg);
        bm.continuation = Some((from_unit, alt_seed));
        bm
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn horizon_cap(&self) -> f64 {
        self.cap
    }

    /// Time up to which the base grid has been generated.
    pub fn horizon(&self) -> f64 {
        ((self.base.len() - 1) / self.per_unit) as f64
    }

    pub fn base_len(&self) -> usize {
        self.base.len()
    }

    pub fn base_time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    pub fn base_sample(&self, k: usize) -> BmSample {
        self.base[k]
    }

    /// All sampled times and values in increasing time order.
    pub fn samples(&self) -> Vec<(f64, BmSample)> {
        let mut out: Vec<(f64, BmSample)> =
            self.base.iter().enumerate().map(|(k, s)| (self.base_time(k), *s)).collect();
        out.extend(self.inserted.iter().map(|(&b, s)| (f64::from_bits(b), *s)));
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    fn unit_seed(&self, unit: u64) -> u64 {
        match self.continuation {
            Some((from, alt)) if unit >= from => alt,
            _ => self.seed,
        }
    }

    fn generate_unit(&mut self) {
        let unit = ((self.base.len() - 1) / self.per_unit) as u64;
        let seed = self.unit_seed(unit);
        let n = self.per_unit;
        let mut incr = [vec![0.0; n + 1], vec![0.0; n + 1]];
        for (c, arr) in incr.iter_mut().enumerate() {
            let c = c as u64 + 1;
            arr[n] = keyed_normal(seed, &[LEVY_DOMAIN, c, unit, 0]);
            for lev in 1..=self.level {
                let mut rng = stream(seed, &[LEVY_DOMAIN, c, unit, lev as u64]);
                let half = n >> lev;
                let sd = (0.5f64).powi(lev as i32 + 1).sqrt();
                let mut j = half;
                while j < n {
                    let z: f64 = rng.sample(StandardNormal);
                    arr[j] = 0.5 * (arr[j - half] + arr[j + half]) + sd * z;
                    j += 2 * half;
                }
            }
        }
        let origin = *self.base.last().unwrap();
        let k0 = self.base.len() - 1;
        let mut prev = origin;
        self.base.reserve(n);
        for i in 1..=n {
            let t = (k0 + i) as f64 * self.h;
            let b1 = origin.b1 + incr[0][i];
            let b2 = origin.b2 + incr[1][i];
            let y = self.start.y * (b2 - 0.5 * t).exp();
            let x = prev.x + 0.5 * (prev.y + y) * (b1 - prev.b1);
            let s = BmSample { b1, b2, x, y };
            self.base.push(s);
            prev = s;
        }
    }

    /// Extends the base grid to cover `t`.
    pub fn ensure(&mut self, t: f64) -> Result<()> {
        if t > self.cap {
            return Err(Error::InsufficientHorizon { required: t, cap: self.cap });
        }
        while self.horizon() < t {
            self.generate_unit();
        }
        Ok(())
    }

    pub fn sample(&mut self, t: f64) -> Result<BmSample> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("negative time {t}")));
        }
        self.ensure(t)?;
        let scaled = t * self.per_unit as f64;
        if scaled.fract() == 0.0 {
            return Ok(self.base[scaled as usize]);
        }
        if let Some(s) = self.inserted.get(&t.to_bits()) {
            return Ok(*s);
        }
        Ok(self.insert(t))
    }

    pub fn point(&mut self, t: f64) -> Result<HPoint> {
        Ok(self.sample(t)?.point())
    }

    fn insert(&mut self, s: f64) -> BmSample {
        let k = (s * self.per_unit as f64).floor() as usize;
        let (mut ta, mut a) = (self.base_time(k), self.base[k]);
        let (mut tb, mut b) = (self.base_time(k + 1), self.base[k + 1]);
        if let Some((&bits, v)) = self.inserted.range((Excluded(ta.to_bits()), Excluded(s.to_bits()))).next_back() {
            ta = f64::from_bits(bits);
            a = *v;
        }
        if let Some((&bits, v)) = self.inserted.range((Excluded(s.to_bits()), Excluded(tb.to_bits()))).next() {
            tb = f64::from_bits(bits);
            b = *v;
        }
        let seed = self.unit_seed(s.floor() as u64);
        let frac = (s - ta) / (tb - ta);
        let sd = ((s - ta) * (tb - s) / (tb - ta)).sqrt();
        let z1 = keyed_normal(seed, &[BRIDGE_DOMAIN, 1, s.to_bits()]);
        let z2 = keyed_normal(seed, &[BRIDGE_DOMAIN, 2, s.to_bits()]);
        let b1 = a.b1 + frac * (b.b1 - a.b1) + sd * z1;
        let b2 = a.b2 + frac * (b.b2 - a.b2) + sd * z2;
        let y = self.start.y * (b2 - 0.5 * s).exp();
        // trapezoid on both halves, then spread the mismatch with the stored right value
        let left = 0.5 * (a.y + y) * (b1 - a.b1);
        let right = 0.5 * (y + b.y) * (b.b1 - b1);
        let mismatch = b.x - a.x - left - right;
        let x = a.x + left + mismatch * frac;
        let out = BmSample { b1, b2, x, y };
        self.inserted.insert(s.to_bits(), out);
        out
    }

    /// First time after `from` at which `crossed` holds, assuming it keeps
    /// holding once it does along the scanned samples. The crossing is
    /// located on the base grid and refined by bisection to `tol`; the right
    /// end of the final bracket is returned.
    pub fn first_hit(
        &mut self,
        from: f64,
        tol: f64,
        crossed: impl FnMut(HPoint) -> bool,
    ) -> Result<(f64, HPoint)> {
        self.first_hit_settled(from, tol, crossed, |_| true)
    }

    /// As [`HypBm::first_hit`], but bisection also continues until `settled`
    /// accepts the right bracket point.
    pub fn first_hit_settled(
        &mut self,
        from: f64,
        tol: f64,
        mut crossed: impl FnMut(HPoint) -> bool,
        settled: impl Fn(HPoint) -> bool,
    ) -> Result<(f64, HPoint)> {
        let p0 = self.point(from)?;
        if crossed(p0) {
            return Ok((from, p0));
        }
        let mut a = from;
        let mut k = (from * self.per_unit as f64).floor() as usize + 1;
        let mut b = loop {
            let tb = self.base_time(k);
            if tb > self.cap {
                return Err(Error::HittingHorizonExceeded { horizon: self.cap });
            }
            self.ensure(tb)?;
            let mut hit = None;
            for (&bits, s) in self.inserted.range((Excluded(a.to_bits()), Excluded(tb.to_bits()))) {
                let t = f64::from_bits(bits);
                if crossed(s.point()) {
                    hit = Some(t);
                    break;
                }
                a = t;
            }
            if let Some(t) = hit {
                break t;
            }
            if crossed(self.base[k].point()) {
                break tb;
            }
            a = tb;
            k += 1;
        };
        let mut pb = self.point(b)?;
        while b - a > tol || !settled(pb) {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let pm = self.point(m)?;
            if crossed(pm) {
                b = m;
                pb = pm;
            } else {
                a = m;
            }
        }
        Ok((b, pb))
    }

    /// First time after `from` at which the distance to `center` reaches `r`,
    /// to time tolerance `tol` and distance overshoot at most
    /// [`HIT_DISTANCE_TOL`].
    pub fn hit_distance(&mut self, from: f64, center: HPoint, r: f64, tol: f64) -> Result<(f64, HPoint)> {
        let thr = 4.0 * (0.5 * r).sinh().powi(2);
        self.first_hit_settled(
            from,
            tol,
            |p| crate::hgeom::sinh_half_sq4(center, p) >= thr,
            |p| dist_h(center, p) - r <= HIT_DISTANCE_TOL,
        )
    }

    /// Writes `t,x,y` for all sampled times up to `t_max`.
    pub fn write_csv(&self, mut w: impl std::io::Write, t_max: f64) -> std::io::Result<()> {
        writeln!(w, "# schema=1")?;
        writeln!(w, "t,x,y")?;
        for (t, s) in self.samples().into_iter().take_while(|(t, _)| *t <= t_max) {
            writeln!(w, "{t},{},{}", s.x, s.y)?;
        }
        Ok(())
    }
}

/// Estimate of the boundary point the path converges to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEstimate {
    pub eta: BoundaryPt,
    /// Heuristic error radius, a fixed multiple of the final height.
    pub radius: f64,
    /// Base grid time at which the height first fell below the tolerance.
    pub time: f64,
}

pub const LIMIT_RADIUS_FACTOR: f64 = 50.0;

/// Reads off `x` at the first base time with `y < tol`, extending the path as
/// needed.
pub fn boundary_limit(bm: &mut HypBm, tol: f64) -> Result<BoundaryEstimate> {
    let mut k = 0;
    let mut min_y = f64::INFINITY;
    loop {
        if k >= bm.base.len() {
            let t = bm.horizon() + 1.0;
            if bm.ensure(t).is_err() {
                return Err(Error::LimitNotResolved { y: min_y });
            }
        }
        let s = bm.base[k];
        min_y = min_y.min(s.y);
        if s.y < tol {
            return Ok(BoundaryEstimate {
                eta: BoundaryPt::real(s.x),
                radius: LIMIT_RADIUS_FACTOR * s.y,
                time: bm.base_time(k),
            });
        }
        k += 1;
    }
}

/// Original time `-(4/beta) log(1 - t)` of the time-changed path.
pub fn time_change(t: f64, beta: f64) -> f64 {
    -(4.0 / beta) * (-t).ln_1p()
}

pub fn inverse_time_change(s: f64, beta: f64) -> f64 {
    -(-beta * s / 4.0).exp_m1()
}

/// Ratios `d(B(s), B(s + h)) / sqrt(h log(2 + (s + 1)/h))`, maximized over
/// the `s` grid for each `h`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ModulusRow {
    pub h: f64,
    pub max_ratio: f64,
    pub argmax_s: f64,
}

pub fn modulus_envelope(s: f64, h: f64) -> f64 {
    (h * (2.0 + (s + 1.0) / h).ln()).sqrt()
}

pub fn modulus_report(bm: &mut HypBm, hs: &[f64], ss: &[f64]) -> Result<Vec<ModulusRow>> {
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        let mut row = ModulusRow { h, max_ratio: 0.0, argmax_s: ss.first().copied().unwrap_or(0.0) };
        if h > 0.0 {
            for &s in ss {
                let d = dist_h(bm.point(s)?, bm.point(s + h)?);
                let r = d / modulus_envelope(s, h);
                if r > row.max_ratio {
                    row.max_ratio = r;
                    row.argmax_s = s;
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Beta-step random walk `b_0 = i, ..., b_{n-1}` with a uniform boundary end.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalk {
    pub beta: f64,
    pub points: Vec<HPoint>,
    pub end: BoundaryPt,
    /// Squared disk radii of the steps.
    pub xi: Vec<f64>,
}

impl RandomWalk {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Parameter of the Beta law of step `k` (from `b_k` to `b_{k+1}`).
    pub fn step_gamma(n: usize, k: usize, beta: f64) -> f64 {
        0.5 * beta * (n - k - 1) as f64
    }
}

pub fn sample_walk(seed: u64, n: usize, beta: f64) -> Result<RandomWalk> {
    if n == 0 || !(beta > 0.0) {
        return Err(Error::InvalidArgument(format!("need n >= 1 and beta > 0, got n={n}, beta={beta}")));
    }
    let streams = RngStreams::new(seed);
    let mut points = vec![HPoint::I];
    let mut xi = Vec::with_capacity(n - 1);
    for k in 0..n - 1 {
        // step index counted from the end so the walk matches the coupled one
        let j = (n - k - 1) as u64;
        let gamma = RandomWalk::step_gamma(n, k, beta);
        let z = beta1_from_uniform(streams.uniform(j, Role::StepRadius), gamma);
        let theta = 2.0 * std::f64::consts::PI * streams.uniform(j, Role::StepAngle);
        let rho = z.sqrt();
        let next = from_disk(DPoint { u: rho * theta.cos(), v: rho * theta.sin() }, points[k]);
        points.push(next);
        xi.push(z);
    }
    let theta = 2.0 * std::f64::consts::PI * open_uniform(&mut stream(seed, &[0x0045_4e44, n as u64]));
    let end = boundary_from_disk_angle(theta, points[n - 1]);
    Ok(RandomWalk { beta, points, end, xi })
}

/// Hyperbolic length of a step with squared disk radius `xi`.
pub fn step_length(xi: f64) -> f64 {
    radius_to_distance(xi.sqrt())
}
