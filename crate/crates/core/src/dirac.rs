//! Resolvent kernels of Dirac operators driven by hyperbolic paths, their
//! Hilbert–Schmidt norms and distances, and a-priori bounds on truncation and
//! path-approximation errors.

use std::io::Write;

use crate::error::{Error, Result};
use crate::hgeom::{dist_h, geodesic_point, horodist, sinh_half_sq4, BoundaryPt, HPoint};
use crate::linalg::SymOp;
use crate::paths::{time_change, HypBm};
use crate::quad::Grid;

/// Path `t -> gamma(t)` on `[0, 1)`.
pub trait PathEval {
    fn eval(&mut self, t: f64) -> Result<HPoint>;

    /// Times where the path may jump.
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Piecewise-constant path, `points[j]` on `[j/n, (j+1)/n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewisePath {
    pub points: Vec<HPoint>,
}

impl PiecewisePath {
    pub fn at(&self, t: f64) -> HPoint {
        let n = self.points.len();
        self.points[((t * n as f64).floor() as usize).min(n - 1)]
    }
}

impl PathEval for PiecewisePath {
    fn eval(&mut self, t: f64) -> Result<HPoint> {
        Ok(self.at(t))
    }

    fn breakpoints(&self) -> Vec<f64> {
        let n = self.points.len();
        (1..n).map(|j| j as f64 / n as f64).collect()
    }
}

/// Brownian path in the time `-(4/beta) log(1 - t)`.
pub struct SinePath<'a> {
    pub bm: &'a mut HypBm,
    pub beta: f64,
}

impl PathEval for SinePath<'_> {
    fn eval(&mut self, t: f64) -> Result<HPoint> {
        self.bm.point(time_change(t, self.beta))
    }
}

/// Path given by a closure.
pub struct FnPath<F>(pub F);

impl<F: FnMut(f64) -> HPoint> PathEval for FnPath<F> {
    fn eval(&mut self, t: f64) -> Result<HPoint> {
        Ok((self.0)(t))
    }
}

/// Boundary data of a Dirac operator: `eta0, eta1` and representatives
/// `u0, u1` with `u0^t J u1 = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiracSpec {
    pub eta0: BoundaryPt,
    pub eta1: BoundaryPt,
    pub u0: [f64; 2],
    pub u1: [f64; 2],
}

/// `u^t J v` with `J = [[0, -1], [1, 0]]`.
pub fn symplectic(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[1] * v[0] - u[0] * v[1]
}

pub fn make_spec(eta0: BoundaryPt, eta1: BoundaryPt) -> Result<DiracSpec> {
    let s = symplectic(eta0.vec, eta1.vec);
    let scale = eta0.vec[0].hypot(eta0.vec[1]) * eta1.vec[0].hypot(eta1.vec[1]);
    if s.abs() <= 1e-14 * scale {
        return Err(Error::CoincidingBoundaryPoints);
    }
    let u0 = [eta0.vec[0] / s, eta0.vec[1] / s];
    Ok(DiracSpec { eta0, eta1, u0, u1: eta1.vec })
}

impl DiracSpec {
    /// Same operator with `u0 -> c u0`, `u1 -> u1 / c`.
    pub fn regauged(&self, c: f64) -> DiracSpec {
        DiracSpec { u0: [c * self.u0[0], c * self.u0[1]], u1: [self.u1[0] / c, self.u1[1] / c], ..*self }
    }

    /// Profiles `X u0` and `X u1` at the point `p`.
    pub fn profiles(&self, p: HPoint) -> ([f64; 2], [f64; 2]) {
        (x_times(p, self.u0), x_times(p, self.u1))
    }
}

/// `X u` with `X = y^{-1/2} [[1, -x], [0, y]]`.
pub fn x_times(p: HPoint, u: [f64; 2]) -> [f64; 2] {
    let s = p.y.sqrt();
    [(u[0] - p.x * u[1]) / s, s * u[1]]
}

type Mat2 = [[f64; 2]; 2];

fn outer(a: [f64; 2], c: [f64; 2]) -> Mat2 {
    [[a[0] * c[0], a[0] * c[1]], [a[1] * c[0], a[1] * c[1]]]
}

/// Kernel value at `(x, y)` for profiles at both points.
pub fn kernel_value(ax: [f64; 2], cx: [f64; 2], ay: [f64; 2], cy: [f64; 2], x: f64, y: f64) -> Mat2 {
    let m = if x < y { outer(ax, cy) } else { outer(cx, ay) };
    [[0.5 * m[0][0], 0.5 * m[0][1]], [0.5 * m[1][0], 0.5 * m[1][1]]]
}

/// Resolvent kernel at `(x, y)`.
pub fn kernel_eval(spec: &DiracSpec, path: &mut impl PathEval, x: f64, y: f64) -> Result<Mat2> {
    let (ax, cx) = spec.profiles(path.eval(x)?);
    let (ay, cy) = spec.profiles(path.eval(y)?);
    Ok(kernel_value(ax, cx, ay, cy, x, y))
}

/// Resolvent kernel sampled on a quadrature grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventKernel {
    pub grid: Grid,
    pub a: Vec<[f64; 2]>,
    pub c: Vec<[f64; 2]>,
    /// Profiles vanish beyond this time.
    pub cutoff: f64,
}

fn dot2(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm2(a: [f64; 2]) -> f64 {
    dot2(a, a)
}

fn sub2(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

impl ResolventKernel {
    pub fn build(spec: &DiracSpec, path: &mut impl PathEval, grid: Grid) -> Result<Self> {
        let mut a = Vec::with_capacity(grid.len());
        let mut c = Vec::with_capacity(grid.len());
        for &t in &grid.nodes {
            let (pa, pc) = spec.profiles(path.eval(t)?);
            a.push(pa);
            c.push(pc);
        }
        let cutoff = grid.end();
        Ok(ResolventKernel { grid, a, c, cutoff })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Kernel block between nodes `i` and `j`; the diagonal block is the
    /// average of the two one-sided limits.
    pub fn block(&self, i: usize, j: usize) -> Mat2 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => kernel_value(self.a[i], self.c[i], self.a[j], self.c[j], 0.0, 1.0),
            Greater => kernel_value(self.a[i], self.c[i], self.a[j], self.c[j], 1.0, 0.0),
            Equal => {
                let (p, q) = (outer(self.a[i], self.c[i]), outer(self.c[i], self.a[i]));
                [[0.25 * (p[0][0] + q[0][0]), 0.25 * (p[0][1] + q[0][1])], [
                    0.25 * (p[1][0] + q[1][0]),
                    0.25 * (p[1][1] + q[1][1]),
                ]]
            }
        }
    }

    /// Symmetric matrix `W^{1/2} K W^{1/2}` of size `2N`, row-major.
    pub fn weighted_matrix(&self) -> Vec<f64> {
        let n = self.len();
        let m = 2 * n;
        let sw: Vec<f64> = self.grid.weights.iter().map(|w| w.sqrt()).collect();
        let mut out = vec![0.0; m * m];
        for i in 0..n {
            for j in 0..n {
                let b = self.block(i, j);
                let s = sw[i] * sw[j];
                for r in 0..2 {
                    for q in 0..2 {
                        out[(2 * i + r) * m + 2 * j + q] = s * b[r][q];
                    }
                }
            }
        }
        out
    }

    /// Squared Hilbert–Schmidt norm of the discretized operator.
    pub fn hs_norm_sq(&self) -> f64 {
        let w = &self.grid.weights;
        let mut prefix_a = 0.0;
        let mut total = 0.0;
        for i in 0..self.len() {
            let (ai, ci) = (norm2(self.a[i]), norm2(self.c[i]));
            total += 0.5 * prefix_a * w[i] * ci;
            prefix_a += w[i] * ai;
            let d = self.block(i, i);
            let fro: f64 = d.iter().flatten().map(|v| v * v).sum();
            total += w[i] * w[i] * fro;
        }
        total
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sq().sqrt()
    }

    fn same_grid(&self, other: &Self) -> Result<()> {
        if self.grid.nodes != other.grid.nodes || self.grid.weights != other.grid.weights {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// Squared Hilbert–Schmidt distance; both kernels must share the grid.
    pub fn hs_distance_sq(&self, other: &Self) -> Result<f64> {
        self.same_grid(other)?;
        let w = &self.grid.weights;
        // a c^t - a' c'^t = da c^t + a' dc^t, summed without cancellation
        let (mut p1, mut p2, mut p3) = (0.0, 0.0, 0.0);
        let mut total = 0.0;
        for j in 0..self.len() {
            let da = sub2(self.a[j], other.a[j]);
            let dc = sub2(self.c[j], other.c[j]);
            let (c, a2) = (self.c[j], other.a[j]);
            total += 0.5 * w[j] * (p1 * norm2(c) + p2 * norm2(dc) + 2.0 * p3 * dot2(c, dc));
            p1 += w[j] * norm2(da);
            p2 += w[j] * norm2(a2);
            p3 += w[j] * dot2(da, a2);
            let e1 = outer(da, c);
            let e2 = outer(a2, dc);
            let mut fro = 0.0;
            for r in 0..2 {
                for q in 0..2 {
                    let e = e1[r][q] + e2[r][q];
                    let et = e1[q][r] + e2[q][r];
                    fro += (0.25 * (e + et)).powi(2);
                }
            }
            total += w[j] * w[j] * fro;
        }
        Ok(total.max(0.0))
    }

    pub fn hs_distance(&self, other: &Self) -> Result<f64> {
        Ok(self.hs_distance_sq(other)?.sqrt())
    }

    /// Kernel restricted to `[0, t]^2` on the same grid. Exact when `t` is a
    /// panel breakpoint.
    pub fn truncate(&self, t: f64) -> Result<Self> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidArgument(format!("truncation point must lie in (0, 1), got {t}")));
        }
        let mut out = self.clone();
        for (i, &s) in self.grid.nodes.iter().enumerate() {
            if s > t {
                out.a[i] = [0.0; 2];
                out.c[i] = [0.0; 2];
            }
        }
        out.cutoff = t.min(self.cutoff);
        Ok(out)
    }

    /// Binary dump: `N` (u64), cutoff, nodes, weights, then the `2N x 2N`
    /// kernel matrix row-major; all little-endian.
    pub fn write_binary(&self, mut w: impl Write) -> std::io::Result<()> {
        let n = self.len();
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&self.cutoff.to_le_bytes())?;
        for v in self.grid.nodes.iter().chain(&self.grid.weights) {
            w.write_all(&v.to_le_bytes())?;
        }
        for i in 0..n {
            for r in 0..2 {
                for j in 0..n {
                    let b = self.block(i, j);
                    for q in 0..2 {
                        w.write_all(&b[r][q].to_le_bytes())?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn write_profiles_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "# schema=1")?;
        writeln!(w, "s,weight,a1,a2,c1,c2")?;
        for i in 0..self.len() {
            let (a, c) = (self.a[i], self.c[i]);
            writeln!(w, "{},{},{},{},{},{}", self.grid.nodes[i], self.grid.weights[i], a[0], a[1], c[0], c[1])?;
        }
        Ok(())
    }
}

/// `W^{1/2} K W^{1/2}` applied in `O(N)` by prefix sums.
impl SymOp for ResolventKernel {
    fn dim(&self) -> usize {
        2 * self.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        let sw: Vec<f64> = self.grid.weights.iter().map(|w| w.sqrt()).collect();
        let v: Vec<[f64; 2]> = (0..n).map(|i| [sw[i] * x[2 * i], sw[i] * x[2 * i + 1]]).collect();
        let mut suffix_c = vec![0.0; n + 1];
        for i in (0..n).rev() {
            suffix_c[i] = suffix_c[i + 1] + dot2(self.c[i], v[i]);
        }
        let mut prefix_a = 0.0;
        for i in 0..n {
            let (a, c) = (self.a[i], self.c[i]);
            let (cv, av) = (dot2(c, v[i]), dot2(a, v[i]));
            let s_hi = suffix_c[i + 1];
            for r in 0..2 {
                let val = 0.5 * a[r] * s_hi + 0.5 * c[r] * prefix_a + 0.25 * (a[r] * cv + c[r] * av);
                y[2 * i + r] = sw[i] * val;
            }
            prefix_a += av;
        }
    }
}

/// Envelope `d(gamma(t), z(t)) <= b + eps t` along the geodesic from `z0`
/// towards `eta1` at speed `alpha`, in the original time of the path.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EscapeFit {
    pub b: f64,
    pub eps: f64,
}

/// Distances `d(gamma(t), z(t))` at the given original times.
pub fn escape_distances(
    times: &[f64],
    points: &[HPoint],
    z0: HPoint,
    eta1: &BoundaryPt,
    alpha: f64,
) -> Result<Vec<f64>> {
    times
        .iter()
        .zip(points)
        .map(|(&t, &p)| Ok(dist_h(p, geodesic_point(z0, eta1, alpha, t)?)))
        .collect()
}

/// Smallest `b` for a given `eps`.
pub fn envelope_offset(times: &[f64], dists: &[f64], eps: f64) -> f64 {
    times.iter().zip(dists).map(|(t, d)| d - eps * t).fold(0.0, f64::max)
}

/// Picks `eps` from `eps_grid` minimizing `objective(b, eps)` with the
/// matching least offset `b`.
pub fn escape_fit(
    times: &[f64],
    dists: &[f64],
    eps_grid: &[f64],
    mut objective: impl FnMut(f64, f64) -> Option<f64>,
) -> Option<EscapeFit> {
    let mut best: Option<(f64, EscapeFit)> = None;
    for &eps in eps_grid {
        let b = envelope_offset(times, dists, eps);
        if let Some(v) = objective(b, eps) {
            if v.is_finite() && best.map_or(true, |(bv, _)| v < bv) {
                best = Some((v, EscapeFit { b, eps }));
            }
        }
    }
    best.map(|(_, f)| f)
}

/// Constants of the truncation and approximation bounds.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BoundParams {
    pub b: f64,
    pub eps: f64,
    pub alpha: f64,
    pub nu: f64,
    /// `|u0|^2` and `|u1|^2`.
    pub u0_sq: f64,
    pub u1_sq: f64,
    /// `d(z0, i)`.
    pub z0_offset: f64,
}

impl BoundParams {
    fn c_a(&self) -> f64 {
        self.u0_sq * (self.b + self.z0_offset).exp()
    }

    fn c_c(&self) -> f64 {
        self.u1_sq * (self.b + self.z0_offset).exp()
    }
}

/// Bound on `||r - r_T||_HS^2`. Without `m` the envelope is assumed on the
/// whole path; with `m` it is assumed up to the time of `T` and `m` bounds
/// the distance of later points from the point at `T`:
///
/// * no `m`: `C_a C_c / 2 [ (1-T)^{2-2 eps nu} / (2 (1+q)(1 - eps nu))
///   + (1-T)^{1+q} (1 - (1-T)^{1-p}) / ((1+q)(1-p)) ]`
/// * with `m`: `C_a C_c e^{2m} / 2 [ (1-T)^{2-2 eps nu} / 2
///   + (1-T)^{1+q} (1 - (1-T)^{1-p}) / (1-p) ]`
///
/// where `p = (alpha + eps) nu`, `q = (alpha - eps) nu`,
/// `C_a = |u0|^2 e^{b + d(z0, i)}` and `C_c = |u1|^2 e^{b + d(z0, i)}`.
pub fn hs2_certificate(params: &BoundParams, t: f64, m: Option<f64>) -> Result<f64> {
    let BoundParams { eps, alpha, nu, .. } = *params;
    if !(eps > 0.0 && eps * nu < 1.0) {
        return Err(Error::ParameterConstraint(format!("need 0 < eps < 1/nu, got eps={eps}, nu={nu}")));
    }
    let p = (alpha + eps) * nu;
    let q = (alpha - eps) * nu;
    if (1.0 - p).abs() < 1e-12 {
        return Err(Error::ParameterConstraint(format!("need alpha != 1/nu - eps, got alpha={alpha}")));
    }
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidArgument(format!("truncation point must lie in (0, 1), got {t}")));
    }
    let s = 1.0 - t;
    let head = s.powf(2.0 - 2.0 * eps * nu);
    let tail = s.powf(1.0 + q) * (1.0 - s.powf(1.0 - p)) / (1.0 - p);
    let k = 0.5 * params.c_a() * params.c_c();
    Ok(match m {
        None => k * (head / (2.0 * (1.0 + q) * (1.0 - eps * nu)) + tail / (1.0 + q)),
        Some(m) => k * (2.0 * m).exp() * (0.5 * head + tail),
    })
}

/// Bound `48 C_a C_c (m + 1) delta / ((alpha - eps) nu (1 - 2 eps nu))` on
/// the squared distance of the truncated kernels of two paths with
/// `sinh^2(d/2) <= min(delta / (1 - t), m)`.
pub fn hs3_certificate(params: &BoundParams, delta: f64, m: f64) -> Result<f64> {
    let BoundParams { eps, alpha, nu, .. } = *params;
    if !(eps > 0.0 && eps < alpha && 2.0 * eps * nu < 1.0) {
        return Err(Error::ParameterConstraint(format!(
            "need 0 < eps < min(alpha, 1/(2 nu)), got eps={eps}, alpha={alpha}, nu={nu}"
        )));
    }
    let c = 48.0 * params.c_a() * params.c_c() / ((alpha - eps) * nu * (1.0 - 2.0 * eps * nu));
    Ok(c * (m + 1.0) * delta)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SinhGapRow {
    pub t: f64,
    /// `sinh^2(d/2)` between the two paths.
    pub gap: f64,
}

/// Per-time `sinh^2(d/2)` and the least `(delta, m)` with
/// `gap <= min(delta / (1 - t), m)` on the grid.
pub fn sinh_gap(
    a: &mut impl PathEval,
    b: &mut impl PathEval,
    ts: &[f64],
) -> Result<(Vec<SinhGapRow>, f64, f64)> {
    let mut rows = Vec::with_capacity(ts.len());
    let (mut delta, mut m) = (0.0f64, 0.0f64);
    for &t in ts {
        let gap = 0.25 * sinh_half_sq4(a.eval(t)?, b.eval(t)?);
        delta = delta.max(gap * (1.0 - t));
        m = m.max(gap);
        rows.push(SinhGapRow { t, gap });
    }
    Ok((rows, delta, m))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct IntegrabilityReport {
    /// `int_0^1 e^{d_eta1(gamma(t), xi)} dt`.
    pub i1: f64,
    /// `int int_{s<t} e^{d_eta0(gamma(s), xi) + d_eta1(gamma(t), xi)} ds dt`.
    pub i2: f64,
    /// Fitted decay exponents of the two integrands near `t = 1`.
    pub exponent1: f64,
    pub exponent2: f64,
    pub finite: bool,
}

pub const DIVERGENCE_MARGIN: f64 = 0.05;

/// Integrals over `[0, 1 - 10^{-levels}]` on the decade panels
/// `[1 - 10^{-j}, 1 - 10^{-j-1}]`, with a geometric extrapolation of the
/// remaining tail from the last increments.
pub fn integrability_check(
    spec: &DiracSpec,
    path: &mut impl PathEval,
    xi: HPoint,
    levels: usize,
    nodes_per_panel: usize,
) -> Result<IntegrabilityReport> {
    let mut breaks = vec![0.0];
    for j in 1..=levels {
        breaks.push(1.0 - 10f64.powi(-(j as i32)));
    }
    let mut splits: Vec<f64> = Vec::new();
    for w in breaks.windows(2) {
        for k in 0..8 {
            splits.push(w[0] + (w[1] - w[0]) * k as f64 / 8.0);
        }
    }
    splits.push(*breaks.last().unwrap());
    let grid = Grid::from_breakpoints(splits, nodes_per_panel);
    let mut f0 = Vec::with_capacity(grid.len());
    let mut f1 = Vec::with_capacity(grid.len());
    for &t in &grid.nodes {
        let p = path.eval(t)?;
        f0.push(horodist(&spec.eta0, p) - horodist(&spec.eta0, xi));
        f1.push(horodist(&spec.eta1, p) - horodist(&spec.eta1, xi));
    }
    // increments of both integrals per decade
    let mut inc1 = vec![0.0; levels];
    let mut inc2 = vec![0.0; levels];
    let mut running0 = 0.0;
    for (i, &t) in grid.nodes.iter().enumerate() {
        let w = grid.weights[i];
        let d = breaks.partition_point(|&b| b <= t).clamp(1, levels) - 1;
        let e0 = f0[i].exp();
        let e1 = f1[i].exp();
        inc1[d] += w * e1;
        inc2[d] += w * e1 * (running0 + 0.5 * w * e0);
        running0 += w * e0;
    }
    let extrapolate = |inc: &[f64]| -> (f64, f64) {
        let total: f64 = inc.iter().sum();
        let (a, b) = (inc[levels - 2], inc[levels - 1]);
        if !(a > 0.0 && b > 0.0) {
            return (total, f64::NEG_INFINITY);
        }
        // an integrand ~ (1-t)^e gives decade increments in ratio 10^{-(e+1)}
        let ratio = b / a;
        let exponent = -ratio.log10() - 1.0;
        let rest = if ratio < 1.0 { b * ratio / (1.0 - ratio) } else { f64::INFINITY };
        (total + rest, exponent)
    };
    let (i1, exponent1) = extrapolate(&inc1);
    let (i2, exponent2) = extrapolate(&inc2);
    let finite = exponent1 > -1.0 + DIVERGENCE_MARGIN && exponent2 > -1.0 + DIVERGENCE_MARGIN;
    Ok(IntegrabilityReport { i1, i2, exponent1, exponent2, finite })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hgeom::Isometry;
    use crate::quad::GridSpec;
    use proptest::prelude::*;

    fn wobbly(t: f64) -> HPoint {
        HPoint::new((5.0 * t).sin(), (1.0 - t).powi(2) + 0.3 * t * (1.0 + (7.0 * t).cos()) + 0.01)
    }

    fn small_grid() -> Grid {
        GridSpec { uniform_panels: 8, nodes_per_panel: 4, panels_per_decade: 2 }.build(0.99, &[])
    }

    #[test]
    fn spec_gauge_examples() {
        let s = make_spec(BoundaryPt::INFINITY, BoundaryPt::real(0.0)).unwrap();
        assert_eq!(s.u0, [-1.0, 0.0]);
        assert_eq!(s.u1, [0.0, 1.0]);
        assert_eq!(symplectic(s.u0, s.u1), 1.0);
        let s = make_spec(BoundaryPt::real(-2.0), BoundaryPt::real(3.5)).unwrap();
        assert!((symplectic(s.u0, s.u1) - 1.0).abs() < 1e-12);
        assert_eq!(make_spec(BoundaryPt::real(1.0), BoundaryPt::real(1.0)), Err(Error::CoincidingBoundaryPoints));
    }

    #[test]
    fn constant_path_kernel_by_hand() {
        let s = make_spec(BoundaryPt::INFINITY, BoundaryPt::real(0.0)).unwrap();
        let mut p = FnPath(|_| HPoint::I);
        let k = kernel_eval(&s, &mut p, 0.2, 0.7).unwrap();
        assert_eq!(k, [[0.0, -0.5], [0.0, 0.0]]);
        let k = kernel_eval(&s, &mut p, 0.7, 0.2).unwrap();
        assert_eq!(k, [[0.0, 0.0], [-0.5, 0.0]]);
    }

    #[test]
    fn profile_norm_is_horodistance() {
        let s = make_spec(BoundaryPt::real(0.4), BoundaryPt::real(-1.3)).unwrap();
        for t in [0.1, 0.5, 0.93] {
            let p = wobbly(t);
            let (a, c) = s.profiles(p);
            let u0 = norm2(s.u0);
            let u1 = norm2(s.u1);
            let e0 = (horodist(&s.eta0, p) - horodist(&s.eta0, HPoint::I)).exp();
            let e1 = (horodist(&s.eta1, p) - horodist(&s.eta1, HPoint::I)).exp();
            assert!((norm2(a) - u0 * e0).abs() < 1e-12 * norm2(a));
            assert!((norm2(c) - u1 * e1).abs() < 1e-12 * norm2(c));
        }
    }

    #[test]
    fn norms_match_dense_matrix() {
        let s = make_spec(BoundaryPt::real(0.7), BoundaryPt::real(-0.2)).unwrap();
        let k = ResolventKernel::build(&s, &mut FnPath(wobbly), small_grid()).unwrap();
        let m = k.weighted_matrix();
        let dim = 2 * k.len();
        let fro: f64 = m.iter().map(|v| v * v).sum();
        assert!((k.hs_norm_sq() - fro).abs() < 1e-12 * fro);
        for i in 0..dim {
            for j in 0..dim {
                assert_eq!(m[i * dim + j], m[j * dim + i]);
            }
        }
        let other = ResolventKernel::build(&s, &mut FnPath(|t| wobbly(t * 0.9)), small_grid()).unwrap();
        let m2 = other.weighted_matrix();
        let diff: f64 = m.iter().zip(&m2).map(|(a, b)| (a - b).powi(2)).sum();
        assert!((k.hs_distance_sq(&other).unwrap() - diff).abs() < 1e-11 * diff);
        assert_eq!(k.hs_distance(&k).unwrap(), 0.0);
        // matrix-free product agrees with the dense one
        let x: Vec<f64> = (0..dim).map(|i| (i as f64 * 0.37).cos()).collect();
        let mut y = vec![0.0; dim];
        k.apply(&x, &mut y);
        for i in 0..dim {
            let d: f64 = (0..dim).map(|j| m[i * dim + j] * x[j]).sum();
            assert!((y[i] - d).abs() < 1e-12 * (1.0 + d.abs()));
        }
    }

    #[test]
    fn gauge_change_leaves_kernel_unchanged() {
        let s = make_spec(BoundaryPt::real(0.7), BoundaryPt::INFINITY).unwrap();
        let g = s.regauged(3.7);
        for (x, y) in [(0.1, 0.6), (0.8, 0.3)] {
            let k1 = kernel_eval(&s, &mut FnPath(wobbly), x, y).unwrap();
            let k2 = kernel_eval(&g, &mut FnPath(wobbly), x, y).unwrap();
            for r in 0..2 {
                for q in 0..2 {
                    assert!((k1[r][q] - k2[r][q]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let s = make_spec(BoundaryPt::INFINITY, BoundaryPt::real(0.0)).unwrap();
        let a = ResolventKernel::build(&s, &mut FnPath(wobbly), small_grid()).unwrap();
        let g2 = GridSpec { uniform_panels: 4, nodes_per_panel: 4, panels_per_decade: 2 }.build(0.99, &[]);
        let b = ResolventKernel::build(&s, &mut FnPath(wobbly), g2).unwrap();
        assert_eq!(a.hs_distance(&b), Err(Error::GridMismatch));
    }

    #[test]
    fn truncation_examples() {
        let s = make_spec(BoundaryPt::INFINITY, BoundaryPt::real(0.0)).unwrap();
        let g = GridSpec { uniform_panels: 4, nodes_per_panel: 6, panels_per_decade: 0 }.build(1.0, &[]);
        let k = ResolventKernel::build(&s, &mut FnPath(|_| HPoint::I), g).unwrap();
        // constant path: |K|^2 = 1/4 off the diagonal, so ||K||^2 = 1/4 T^2
        assert!((k.hs_norm_sq() - 0.25).abs() < 0.02);
        let half = k.truncate(0.5).unwrap();
        assert!((half.hs_norm_sq() - 0.0625).abs() < 0.01);
        assert!(k.truncate(1.5).is_err());
    }

    #[test]
    fn certificate_examples() {
        let params = BoundParams { b: 0.5, eps: 0.1, alpha: 0.5, nu: 2.0, u0_sq: 1.0, u1_sq: 1.0, z0_offset: 0.0 };
        let a = hs2_certificate(&params, 0.9, None).unwrap();
        let b = hs2_certificate(&params, 0.99, None).unwrap();
        assert!(a > b && b > 0.0);
        // the tail exponent is 1 + min(q, 1 - 2 eps nu) = 1.6
        let c = hs2_certificate(&params, 0.999, None).unwrap();
        let d = hs2_certificate(&params, 0.9999, None).unwrap();
        assert!(((c / d).log10() - 1.6).abs() < 0.05);
        let m0 = hs2_certificate(&params, 0.9, Some(0.0)).unwrap();
        assert!(m0 > 0.0 && m0.is_finite());
        let bad = BoundParams { eps: 0.6, ..params };
        assert!(matches!(hs2_certificate(&bad, 0.9, None), Err(Error::ParameterConstraint(_))));
        let bad = BoundParams { alpha: 0.4, ..params };
        assert!(matches!(hs2_certificate(&bad, 0.9, None), Err(Error::ParameterConstraint(_))));
        assert_eq!(hs3_certificate(&params, 0.0, 3.0).unwrap(), 0.0);
        assert!(hs3_certificate(&BoundParams { eps: 0.3, ..params }, 0.1, 1.0).is_err());
    }

    #[test]
    fn geodesic_envelope_is_trivial() {
        let eta = BoundaryPt::real(0.3);
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.4).collect();
        let pts: Vec<HPoint> = times.iter().map(|&t| geodesic_point(HPoint::I, &eta, 0.5, t).unwrap()).collect();
        let d = escape_distances(&times, &pts, HPoint::I, &eta, 0.5).unwrap();
        let fit = escape_fit(&times, &d, &[0.0, 0.1], |b, e| Some(b + e)).unwrap();
        assert!(fit.b < 1e-9);
        assert_eq!(fit.eps, 0.0);
    }

    #[test]
    fn geodesic_integrals_in_closed_form() {
        // eta0 = 0, eta1 = inf, gamma(t) = i (1-t)^{-alpha nu}
        let (alpha, nu) = (0.5, 2.0);
        let spec = make_spec(BoundaryPt::real(0.0), BoundaryPt::INFINITY).unwrap();
        let mut p = FnPath(|t: f64| HPoint::new(0.0, (1.0 - t).powf(-alpha * nu)));
        let r = integrability_check(&spec, &mut p, HPoint::I, 8, 12).unwrap();
        let e = 1.0 + alpha * nu;
        assert!((r.i1 - 1.0 / e).abs() < 1e-3);
        assert!((r.i2 - 1.0 / (2.0 * e)).abs() < 1e-3);
        assert!(r.finite);
        let mut bad = FnPath(|t: f64| HPoint::new(0.0, (1.0 - t).powi(-2)));
        let spec = make_spec(BoundaryPt::INFINITY, BoundaryPt::real(0.0)).unwrap();
        let r = integrability_check(&spec, &mut bad, HPoint::I, 8, 12).unwrap();
        assert!(!r.finite);
    }

    #[test]
    fn identical_paths_have_no_gap() {
        let ts: Vec<f64> = (0..20).map(|k| k as f64 / 20.0).collect();
        let (_, delta, m) = sinh_gap(&mut FnPath(wobbly), &mut FnPath(wobbly), &ts).unwrap();
        assert_eq!((delta, m), (0.0, 0.0));
    }

    #[test]
    fn isometry_moves_profiles_not_norms() {
        // moving path and boundary points by one isometry keeps the HS norm
        let q = Isometry::normalized(2.0, 1.0, 1.0, 1.5).unwrap();
        let s = make_spec(BoundaryPt::real(0.7), BoundaryPt::real(-0.2)).unwrap();
        let s2 = make_spec(q.apply_boundary(&s.eta0), q.apply_boundary(&s.eta1)).unwrap();
        let k = ResolventKernel::build(&s, &mut FnPath(wobbly), small_grid()).unwrap();
        let k2 = ResolventKernel::build(&s2, &mut FnPath(|t| q.apply(wobbly(t))), small_grid()).unwrap();
        assert!((k.hs_norm_sq() - k2.hs_norm_sq()).abs() < 1e-9 * k.hs_norm_sq());
    }

    proptest! {
        #[test]
        fn kernel_is_symmetric(x in 0.0f64..0.99, y in 0.0f64..0.99, q in -3.0f64..3.0) {
            let s = make_spec(BoundaryPt::INFINITY, BoundaryPt::real(q)).unwrap();
            let kxy = kernel_eval(&s, &mut FnPath(wobbly), x, y).unwrap();
            let kyx = kernel_eval(&s, &mut FnPath(wobbly), y, x).unwrap();
            if x != y {
                for r in 0..2 {
                    for c in 0..2 {
                        prop_assert_eq!(kxy[r][c], kyx[c][r]);
                    }
                }
            }
        }

        #[test]
        fn distance_triangle_inequality(s1 in 0.5f64..1.0, s2 in 0.5f64..1.0) {
            let s = make_spec(BoundaryPt::real(0.7), BoundaryPt::real(-0.2)).unwrap();
            let k = |f: f64| ResolventKernel::build(&s, &mut FnPath(|t| wobbly(t * f)), small_grid()).unwrap();
            let (a, b, c) = (k(1.0), k(s1), k(s2));
            let ab = a.hs_distance(&b).unwrap();
            let bc = b.hs_distance(&c).unwrap();
            let ac = a.hs_distance(&c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }
}
