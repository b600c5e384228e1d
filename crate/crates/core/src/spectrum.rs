//! Eigenvalues of Dirac operators, from the discretized resolvent and, for
//! piecewise-constant paths, from an exact transfer-matrix phase.

use std::f64::consts::PI;

use rand::Rng;

use crate::dirac::{DiracSpec, PiecewisePath, ResolventKernel};
use crate::error::{Error, Result};
use crate::hgeom::HPoint;
use crate::linalg::{lanczos_extremes, symmetric_eigenvalues, LanczosOptions, SymOp};
use crate::tol::Tolerances;

pub const DEFAULT_WINDOW: usize = 20;

/// Largest matrix size handled by the dense solver.
pub const DENSE_LIMIT: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Method {
    Nystrom,
    Transfer,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Nystrom => "nystrom",
            Method::Transfer => "transfer",
        }
    }
}

/// Eigenvalues `lambda_k` for `k` in `-window..=window + 1`, with
/// `lambda_0 < 0 < lambda_1`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SpectrumResult {
    pub window: usize,
    /// `lambdas[i]` is `lambda_{i - window}`.
    pub lambdas: Vec<f64>,
    pub method: Method,
    /// Quadrature nodes (Nyström) or pieces (transfer).
    pub resolution: usize,
    /// End of the kernel support.
    pub t_num: f64,
}

impl SpectrumResult {
    pub fn ks(&self) -> impl Iterator<Item = i64> + '_ {
        let w = self.window as i64;
        -w..=w + 1
    }

    pub fn lambda(&self, k: i64) -> Option<f64> {
        let i = k + self.window as i64;
        if i < 0 {
            return None;
        }
        self.lambdas.get(i as usize).copied()
    }

    pub fn mu(&self, k: i64) -> Option<f64> {
        self.lambda(k).map(|l| 1.0 / l)
    }

    /// Mean spacing of `lambda_k` over `|k| <= m` (and `k = m + 1`).
    pub fn mean_spacing(&self, m: usize) -> f64 {
        let m = m.min(self.window) as i64;
        (self.lambda(m + 1).unwrap() - self.lambda(-m).unwrap()) / (2 * m + 1) as f64
    }

    pub fn write_csv_rows(
        &self,
        mut w: impl std::io::Write,
        n: usize,
        beta: f64,
        seed: u64,
    ) -> std::io::Result<()> {
        for k in self.ks() {
            let l = self.lambda(k).unwrap();
            writeln!(w, "{k},{l},{},{},{n},{beta},{seed}", 1.0 / l, self.method.name())?;
        }
        Ok(())
    }
}

pub const SPECTRUM_CSV_HEADER: &str = "k,lambda,mu,method,n,beta,seed";

fn index_reciprocals(neg: &[f64], pos: &[f64], window: usize) -> Result<Vec<f64>> {
    let tol = Tolerances::DEFAULT;
    let scale = neg.iter().chain(pos).fold(0.0f64, |s, v| s.max(v.abs()));
    // neg: most negative first; pos: largest first
    let mut lambdas = Vec::with_capacity(2 * window + 2);
    for &mu in neg.iter().take(window + 1).rev() {
        if !(mu < -1e-14 * scale) {
            return Err(Error::ZeroEigenvalue);
        }
        lambdas.push(1.0 / mu);
    }
    for &mu in pos.iter().take(window + 1) {
        if !(mu > 1e-14 * scale) {
            return Err(Error::ZeroEigenvalue);
        }
        lambdas.push(1.0 / mu);
    }
    if let Some(&l) = lambdas.iter().find(|l| l.abs() < tol.min_eigenvalue) {
        return Err(Error::TinyEigenvalue(l));
    }
    Ok(lambdas)
}

/// Eigenvalues from the weighted Nyström matrix of the kernel.
pub fn eigs_nystrom(kernel: &ResolventKernel, window: usize) -> Result<SpectrumResult> {
    let dim = kernel.dim();
    if dim < 4 * window {
        return Err(Error::InvalidArgument(format!("{dim} unknowns cannot resolve a window of {window}")));
    }
    let (neg, pos) = if dim <= DENSE_LIMIT {
        let mut m = kernel.weighted_matrix();
        let asym = (0..dim)
            .flat_map(|i| (0..i).map(move |j| (i, j)))
            .map(|(i, j)| (m[i * dim + j] - m[j * dim + i]).abs())
            .fold(0.0, f64::max);
        if asym > 1e-12 {
            return Err(Error::InvalidArgument(format!("matrix asymmetry {asym}")));
        }
        let ev = symmetric_eigenvalues(&mut m, dim)?;
        let neg: Vec<f64> = ev.iter().copied().take(window + 1).collect();
        let pos: Vec<f64> = ev.iter().rev().copied().take(window + 1).collect();
        (neg, pos)
    } else {
        let opts = LanczosOptions { n_low: window + 1, n_high: window + 1, tol: 1e-11, max_iter: 1500 };
        let ex = lanczos_extremes(kernel, &opts)?;
        (ex.low, ex.high)
    };
    let lambdas = index_reciprocals(&neg, &pos, window)?;
    Ok(SpectrumResult { window, lambdas, method: Method::Nystrom, resolution: kernel.len(), t_num: kernel.cutoff })
}

fn cross(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

/// `X^{-1} Rot(-theta) X f` for the point `p`.
fn rotate_conj(p: HPoint, theta: f64, f: [f64; 2]) -> [f64; 2] {
    let s = p.y.sqrt();
    let w = [(f[0] - p.x * f[1]) / s, s * f[1]];
    let (sn, cs) = theta.sin_cos();
    let r = [cs * w[0] + sn * w[1], -sn * w[0] + cs * w[1]];
    [(p.y * r[0] + p.x * r[1]) / s, r[1] / s]
}

/// Lifted phase `arg u0 - arg f(1)` of the solution of `tau f = lambda f`
/// with `f(0) = u0`.
pub fn transfer_phase(path: &PiecewisePath, u0: [f64; 2], lambda: f64) -> f64 {
    let n = path.points.len();
    let theta = 0.5 * lambda / n as f64;
    let turns = (theta / (2.0 * PI)).trunc();
    let half = 0.5 * (theta - 2.0 * PI * turns);
    let mut f = u0;
    let mut phase = 2.0 * PI * turns * n as f64;
    for &p in &path.points {
        for _ in 0..2 {
            let g = rotate_conj(p, half, f);
            phase += (-cross(f, g)).atan2(f[0] * g[0] + f[1] * g[1]);
            let norm = g[0].hypot(g[1]);
            f = [g[0] / norm, g[1] / norm];
        }
    }
    phase
}

/// Eigenvalues of the operator driven by a piecewise-constant path, as the
/// roots of `phase(lambda) = c + (k - 1) pi`.
pub fn eigs_transfer(spec: &DiracSpec, path: &PiecewisePath, window: usize) -> Result<SpectrumResult> {
    let tol = Tolerances::DEFAULT.phase_root;
    let arg = |u: [f64; 2]| u[1].atan2(u[0]);
    let c = (arg(spec.u0) - arg(spec.u1)).rem_euclid(PI);
    if c == 0.0 {
        return Err(Error::CoincidingBoundaryPoints);
    }
    let phase = |l: f64| transfer_phase(path, spec.u0, l);
    let w = window as i64;
    let mut lambdas = Vec::with_capacity(2 * window + 2);
    for k in -w..=w + 1 {
        let target = c + (k - 1) as f64 * PI;
        // phase(0) = 0; expand away from zero until the target is bracketed
        let (mut lo, mut hi) = (0.0f64, 0.0f64);
        let (mut plo, mut phi) = (0.0, 0.0);
        let mut step = 2.0 * target.abs().max(1.0);
        if target > 0.0 {
            while phi < target {
                lo = hi;
                plo = phi;
                hi += step;
                step *= 2.0;
                phi = phase(hi);
                if phi < plo {
                    return Err(Error::PhaseAccounting);
                }
            }
        } else {
            while plo > target {
                hi = lo;
                phi = plo;
                lo -= step;
                step *= 2.0;
                plo = phase(lo);
                if plo > phi {
                    return Err(Error::PhaseAccounting);
                }
            }
        }
        while hi - lo > tol * hi.abs().max(lo.abs()).max(1.0) {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let pm = phase(mid);
            if pm < plo || pm > phi {
                return Err(Error::PhaseAccounting);
            }
            if pm < target {
                lo = mid;
                plo = pm;
            } else {
                hi = mid;
                phi = pm;
            }
        }
        lambdas.push(0.5 * (lo + hi));
    }
    if lambdas.windows(2).any(|p| p[1] <= p[0]) || lambdas[window] >= 0.0 || lambdas[window + 1] <= 0.0 {
        return Err(Error::PhaseAccounting);
    }
    if let Some(&l) = lambdas.iter().find(|l| l.abs() < Tolerances::DEFAULT.min_eigenvalue) {
        return Err(Error::TinyEigenvalue(l));
    }
    Ok(SpectrumResult { window, lambdas, method: Method::Transfer, resolution: path.points.len(), t_num: 1.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MatchRow {
    pub k: i64,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub abs_diff: f64,
    pub rel_diff: f64,
    pub mu_diff: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Comparison {
    pub rows: Vec<MatchRow>,
    /// `sum_k (1/lambda_k - 1/lambda'_k)^2` over the shared window.
    pub mu_sq_sum: f64,
    pub window: usize,
}

/// Index-matched comparison over the common window.
pub fn match_and_compare(a: &SpectrumResult, b: &SpectrumResult) -> Comparison {
    let window = a.window.min(b.window);
    let w = window as i64;
    let rows: Vec<MatchRow> = (-w..=w + 1)
        .map(|k| {
            let (la, lb) = (a.lambda(k).unwrap(), b.lambda(k).unwrap());
            MatchRow {
                k,
                lambda_a: la,
                lambda_b: lb,
                abs_diff: (la - lb).abs(),
                rel_diff: (la - lb).abs() / la.abs(),
                mu_diff: (1.0 / la - 1.0 / lb).abs(),
            }
        })
        .collect();
    let mu_sq_sum = rows.iter().map(|r| r.mu_diff * r.mu_diff).sum();
    Comparison { rows, mu_sq_sum, window }
}

/// Smallest index shift `s` with `lambda_{k+s} - lambda_k` constant over the
/// window, and that constant.
pub fn detect_period(s: &SpectrumResult, rel_tol: f64) -> Option<(usize, f64)> {
    let l = &s.lambdas;
    for shift in 1..l.len() / 2 {
        let diffs: Vec<f64> = (0..l.len() - shift).map(|i| l[i + shift] - l[i]).collect();
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let spread = diffs.iter().fold(0.0f64, |m, d| m.max((d - mean).abs()));
        if spread <= rel_tol * mean.abs() {
            return Some((shift, mean));
        }
    }
    None
}

/// Gap between `lambda_1` and `lambda_2` as an angle on the circle of
/// circumference `period`, folded into `[0, pi]`.
pub fn folded_gap(s: &SpectrumResult, period: f64) -> f64 {
    let psi = (2.0 * PI * (s.lambda(2).unwrap() - s.lambda(1).unwrap()) / period).rem_euclid(2.0 * PI);
    psi.min(2.0 * PI - psi)
}

/// CDF of the folded gap of two points with joint density proportional to
/// `|e^{i a} - e^{i b}|^2`.
pub fn folded_gap_cdf_beta2(psi: f64) -> f64 {
    ((psi - psi.sin()) / PI).clamp(0.0, 1.0)
}

/// Angles with joint density proportional to `prod_{j<k} |e^{i t_j} - e^{i t_k}|^beta`,
/// by rejection from independent uniforms.
pub fn circular_ensemble_rejection(rng: &mut impl Rng, n: usize, beta: f64) -> Vec<f64> {
    // |Vandermonde| <= n^{n/2}
    let log_bound = 0.5 * beta * n as f64 * (n as f64).ln();
    loop {
        let th: Vec<f64> = (0..n).map(|_| 2.0 * PI * rng.random::<f64>()).collect();
        let mut log_v = 0.0;
        for j in 0..n {
            for k in j + 1..n {
                log_v += beta * (2.0 * (0.5 * (th[j] - th[k])).sin().abs()).ln();
            }
        }
        if rng.random::<f64>().ln() < log_v - log_bound {
            return th;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dirac::make_spec;
    use crate::hgeom::BoundaryPt;
    use crate::quad::GridSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn constant_spec() -> (DiracSpec, PiecewisePath) {
        (make_spec(BoundaryPt::INFINITY, BoundaryPt::real(0.0)).unwrap(), PiecewisePath { points: vec![HPoint::I] })
    }

    #[test]
    fn constant_path_transfer_spectrum() {
        // eigenvalues are the odd multiples of pi
        let (spec, path) = constant_spec();
        let s = eigs_transfer(&spec, &path, 5).unwrap();
        for k in s.ks() {
            let exact = (2 * k - 1) as f64 * PI;
            assert!((s.lambda(k).unwrap() - exact).abs() < 1e-8, "k={k}");
        }
        assert_eq!(detect_period(&s, 1e-8).map(|p| p.0), Some(1));
    }

    #[test]
    fn constant_path_nystrom_spectrum() {
        let (spec, mut path) = constant_spec();
        let grid = GridSpec { uniform_panels: 40, nodes_per_panel: 6, panels_per_decade: 0 }.build(1.0, &[]);
        let k = ResolventKernel::build(&spec, &mut path, grid).unwrap();
        let s = eigs_nystrom(&k, 5).unwrap();
        for k in s.ks() {
            let exact = (2 * k - 1) as f64 * PI;
            assert!((s.lambda(k).unwrap() - exact).abs() < 1e-3 * exact.abs(), "k={k}");
        }
    }

    #[test]
    fn transfer_agrees_with_nystrom_on_random_pieces() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<HPoint> =
            (0..4).map(|_| HPoint::new(rng.random::<f64>() - 0.5, 0.3 + rng.random::<f64>())).collect();
        let path = PiecewisePath { points };
        let spec = make_spec(BoundaryPt::INFINITY, BoundaryPt::real(0.4)).unwrap();
        let t = eigs_transfer(&spec, &path, 4).unwrap();
        let grid = GridSpec { uniform_panels: 64, nodes_per_panel: 4, panels_per_decade: 0 }.build(1.0, &[]);
        let k = ResolventKernel::build(&spec, &mut path.clone(), grid).unwrap();
        let n = eigs_nystrom(&k, 4).unwrap();
        let cmp = match_and_compare(&t, &n);
        for r in &cmp.rows {
            assert!(r.rel_diff < 1e-3, "{r:?}");
        }
        // period 2 pi n with n pieces
        let wide = eigs_transfer(&spec, &path, 10).unwrap();
        let (shift, p) = detect_period(&wide, 1e-7).unwrap();
        assert_eq!(shift, 4);
        assert!((p - 8.0 * PI).abs() < 1e-7);
    }

    #[test]
    fn lanczos_path_matches_dense_path() {
        let (spec, mut path) = constant_spec();
        let grid = GridSpec { uniform_panels: 100, nodes_per_panel: 4, panels_per_decade: 0 }.build(1.0, &[]);
        let k = ResolventKernel::build(&spec, &mut path, grid).unwrap();
        assert!(k.dim() > DENSE_LIMIT);
        let s = eigs_nystrom(&k, 6).unwrap();
        let mut m = k.weighted_matrix();
        let ev = symmetric_eigenvalues(&mut m, k.dim()).unwrap();
        let neg: Vec<f64> = ev.iter().copied().take(7).collect();
        let pos: Vec<f64> = ev.iter().rev().copied().take(7).collect();
        let dense = index_reciprocals(&neg, &pos, 6).unwrap();
        for (a, b) in s.lambdas.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-8 * b.abs(), "{a} {b}");
        }
        for k in s.ks() {
            let exact = (2 * k - 1) as f64 * PI;
            assert!((s.lambda(k).unwrap() - exact).abs() < 1e-3 * exact.abs());
        }
    }

    #[test]
    fn compare_identical() {
        let (spec, path) = constant_spec();
        let s = eigs_transfer(&spec, &path, 3).unwrap();
        let c = match_and_compare(&s, &s);
        assert_eq!(c.mu_sq_sum, 0.0);
        assert!(c.rows.iter().all(|r| r.abs_diff == 0.0));
    }

    #[test]
    fn rejection_sampler_gap_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gaps: Vec<f64> = (0..4000)
            .map(|_| {
                let th = circular_ensemble_rejection(&mut rng, 2, 2.0);
                let psi = (th[1] - th[0]).rem_euclid(2.0 * PI);
                psi.min(2.0 * PI - psi)
            })
            .collect();
        assert!(crate::stats::ks_one_sample(&gaps, folded_gap_cdf_beta2).p_value > 0.01);
    }
}
