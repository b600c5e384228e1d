//! Symmetric eigenvalue solvers: Householder tridiagonalization with implicit
//! QL for dense matrices, and Lanczos with full reorthogonalization for large
//! operators available only through matrix-vector products.

use crate::error::{Error, Result};

const MAX_QL_SWEEPS: usize = 60;

/// Implicit-shift QL on the symmetric tridiagonal matrix with diagonal `d`
/// and off-diagonal `e` (`e[i]` couples `i` and `i + 1`; the last entry is
/// ignored). On return `d` holds the eigenvalues, unsorted. If `last_row` is
/// given it must hold the last row of the initial eigenvector matrix and is
/// updated to the last components of the eigenvectors.
pub fn tridiagonal_ql(d: &mut [f64], e: &mut [f64], mut last_row: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > MAX_QL_SWEEPS {
                return Err(Error::NoConvergence { iterations: iter });
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut deflated = false;
            let mut i = m;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(z) = last_row.as_deref_mut() {
                    let f = z[i + 1];
                    z[i + 1] = s * z[i] + c * f;
                    z[i] = c * z[i] - s * f;
                }
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    Ok(())
}

/// Eigenvalues of the dense symmetric `n x n` matrix `a` (row-major, lower
/// triangle used, overwritten), ascending.
pub fn symmetric_eigenvalues(a: &mut [f64], n: usize) -> Result<Vec<f64>> {
    assert_eq!(a.len(), n * n);
    if n == 0 {
        return Ok(vec![]);
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = 0.0;
        if l > 0 {
            let scale: f64 = (0..=l).map(|k| a[i * n + k].abs()).sum();
            if scale == 0.0 {
                e[i] = a[i * n + l];
            } else {
                for k in 0..=l {
                    a[i * n + k] /= scale;
                    h += a[i * n + k] * a[i * n + k];
                }
                let f = a[i * n + l];
                let g = if f >= 0.0 { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h -= f * g;
                a[i * n + l] = f - g;
                let mut f = 0.0;
                for j in 0..=l {
                    let mut g = 0.0;
                    for k in 0..=j {
                        g += a[j * n + k] * a[i * n + k];
                    }
                    for k in j + 1..=l {
                        g += a[k * n + j] * a[i * n + k];
                    }
                    e[j] = g / h;
                    f += e[j] * a[i * n + j];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[i * n + j];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        a[j * n + k] -= f * e[k] + g * a[i * n + k];
                    }
                }
            }
        } else {
            e[i] = a[i * n + l];
        }
        d[i] = h;
    }
    for i in 0..n {
        d[i] = a[i * n + i];
    }
    // shift to the convention of `tridiagonal_ql`
    let mut off: Vec<f64> = (1..n).map(|i| e[i]).collect();
    off.push(0.0);
    tridiagonal_ql(&mut d, &mut off, None)?;
    d.sort_by(f64::total_cmp);
    Ok(d)
}

/// Symmetric linear operator.
pub trait SymOp {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

/// Dense symmetric matrix as an operator.
pub struct DenseSym<'a> {
    pub n: usize,
    pub a: &'a [f64],
}

impl SymOp for DenseSym<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            y[i] = self.a[i * self.n..(i + 1) * self.n].iter().zip(x).map(|(a, b)| a * b).sum();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Number of smallest eigenvalues wanted.
    pub n_low: usize,
    /// Number of largest eigenvalues wanted.
    pub n_high: usize,
    /// Residual tolerance relative to the largest Ritz value in magnitude.
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extremes {
    /// Smallest eigenvalues, ascending.
    pub low: Vec<f64>,
    /// Largest eigenvalues, descending.
    pub high: Vec<f64>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Extreme eigenvalues of `op` by Lanczos with full reorthogonalization.
pub fn lanczos_extremes(op: &impl SymOp, opts: &LanczosOptions) -> Result<Extremes> {
    let n = op.dim();
    let wanted = opts.n_low + opts.n_high;
    if wanted > n {
        return Err(Error::InvalidArgument(format!("{wanted} eigenvalues requested of a {n}-dimensional operator")));
    }
    let max_iter = opts.max_iter.min(n);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * (1.7 * i as f64 + 0.3).sin()).collect();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    let mut w = vec![0.0; n];
    let check_from = (2 * wanted + 10).min(max_iter);
    loop {
        op.apply(&v, &mut w);
        if let Some(prev) = basis.last() {
            let b = *beta.last().unwrap();
            w.iter_mut().zip(prev).for_each(|(x, p)| *x -= b * p);
        }
        let a = dot(&w, &v);
        w.iter_mut().zip(&v).for_each(|(x, q)| *x -= a * q);
        basis.push(std::mem::take(&mut v));
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let b = dot(&w, &w).sqrt();
        let m = basis.len();
        let exhausted = m == max_iter || b <= 1e-14 * alpha.iter().fold(0.0f64, |s, x| s.max(x.abs()));
        if m >= check_from && (m % 10 == 0 || exhausted) {
            let mut d = alpha.clone();
            let mut e = beta.clone();
            e.push(0.0);
            let mut z = vec![0.0; m];
            z[m - 1] = 1.0;
            tridiagonal_ql(&mut d, &mut e, Some(&mut z))?;
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
            let scale = d.iter().fold(0.0f64, |s, x| s.max(x.abs()));
            let converged = |i: usize| (b * z[i]).abs() <= opts.tol * scale;
            let lows = &idx[..opts.n_low];
            let highs = &idx[m - opts.n_high..];
            let done = lows.iter().chain(highs).all(|&i| converged(i));
            if done || exhausted {
                if !done && m < n && b > 0.0 {
                    return Err(Error::NoConvergence { iterations: m });
                }
                return Ok(Extremes {
                    low: lows.iter().map(|&i| d[i]).collect(),
                    high: highs.iter().rev().map(|&i| d[i]).collect(),
                    iterations: m,
                });
            }
        }
        if exhausted {
            return Err(Error::NoConvergence { iterations: m });
        }
        beta.push(b);
        v = w.iter().map(|x| x / b).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Cyclic Jacobi rotations, used as an independent oracle.
    fn jacobi_eigenvalues(mut a: Vec<f64>, n: usize) -> Vec<f64> {
        for _ in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a[i * n + j].powi(2))
                .sum();
            if off < 1e-26 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                }
            }
        }
        let mut d: Vec<f64> = (0..n).map(|i| a[i * n + i]).collect();
        d.sort_by(f64::total_cmp);
        d
    }

    fn random_sym(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.random::<f64>() - 0.5;
                a[i * n + j] = v;
                a[j * n + i] = v;
            }
        }
        a
    }

    #[test]
    fn dense_matches_jacobi() {
        for (n, seed) in [(1, 1), (2, 2), (7, 3), (40, 4)] {
            let a = random_sym(n, seed);
            let oracle = jacobi_eigenvalues(a.clone(), n);
            let got = symmetric_eigenvalues(&mut a.clone(), n).unwrap();
            for (x, y) in got.iter().zip(&oracle) {
                assert!((x - y).abs() < 1e-12, "n={n}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn tridiagonal_closed_form() {
        // second-difference matrix: 2 - 2 cos(k pi / (n + 1))
        let n = 30;
        let mut d = vec![2.0; n];
        let mut e = vec![-1.0; n];
        let mut z = vec![0.0; n];
        z[n - 1] = 1.0;
        tridiagonal_ql(&mut d, &mut e, Some(&mut z)).unwrap();
        d.sort_by(f64::total_cmp);
        for (k, v) in d.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13);
        }
        assert!((z.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lanczos_matches_dense() {
        let n = 300;
        let mut a = random_sym(n, 9);
        // spread the spectrum like a compact operator
        for i in 0..n {
            a[i * n + i] += if i % 2 == 0 { 50.0 / (i + 1) as f64 } else { -50.0 / (i + 1) as f64 };
        }
        let dense = symmetric_eigenvalues(&mut a.clone(), n).unwrap();
        let op = DenseSym { n, a: &a };
        let ex = lanczos_extremes(&op, &LanczosOptions { n_low: 5, n_high: 6, tol: 1e-10, max_iter: 300 }).unwrap();
        for (k, v) in ex.low.iter().enumerate() {
            assert!((v - dense[k]).abs() < 1e-8);
        }
        for (k, v) in ex.high.iter().enumerate() {
            assert!((v - dense[n - 1 - k]).abs() < 1e-8);
        }
    }

    #[test]
    fn lanczos_rejects_oversized_requests() {
        let a = vec![1.0, 0.0, 0.0, 2.0];
        let op = DenseSym { n: 2, a: &a };
        let r = lanczos_extremes(&op, &LanczosOptions { n_low: 2, n_high: 1, tol: 1e-10, max_iter: 10 });
        assert!(r.is_err());
        let ex = lanczos_extremes(&op, &LanczosOptions { n_low: 1, n_high: 1, tol: 1e-10, max_iter: 10 }).unwrap();
        assert!((ex.low[0] - 1.0).abs() < 1e-14 && (ex.high[0] - 2.0).abs() < 1e-14);
    }

    proptest::proptest! {
        #[test]
        fn eigenvalues_keep_trace_and_frobenius_norm(
            entries in proptest::collection::vec(-5.0f64..5.0, 36),
            n in 1usize..=6,
        ) {
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    a[i * n + j] = entries[i * 6 + j];
                    a[j * n + i] = entries[i * 6 + j];
                }
            }
            let trace: f64 = (0..n).map(|i| a[i * n + i]).sum();
            let frob: f64 = a.iter().map(|x| x * x).sum();
            let ev = symmetric_eigenvalues(&mut a.clone(), n).unwrap();
            proptest::prop_assert!((ev.iter().sum::<f64>() - trace).abs() < 1e-9 * (1.0 + frob));
            proptest::prop_assert!((ev.iter().map(|x| x * x).sum::<f64>() - frob).abs() < 1e-9 * (1.0 + frob));
        }
    }
}
