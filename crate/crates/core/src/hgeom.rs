//! Hyperbolic plane in the upper half-plane and Poincaré disk charts.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point `x + iy` of the upper half-plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    pub x: f64,
    pub y: f64,
}

impl HPoint {
    pub const I: HPoint = HPoint { x: 0.0, y: 1.0 };

    pub fn new(x: f64, y: f64) -> Self {
        debug_assert!(y > 0.0 && x.is_finite() && y.is_finite(), "invalid point {x} + {y}i");
        HPoint { x, y }
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn from_complex(z: Complex64) -> Self {
        HPoint::new(z.re, z.im)
    }
}

/// Point of the open unit disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DPoint {
    pub u: f64,
    pub v: f64,
}

impl DPoint {
    pub fn norm(self) -> f64 {
        self.u.hypot(self.v)
    }
}

/// Boundary point of the half-plane, stored as a projective vector `(u1, u2)`
/// with value `u1 / u2` (infinity when `u2 == 0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPt {
    pub vec: [f64; 2],
}

impl BoundaryPt {
    pub const INFINITY: BoundaryPt = BoundaryPt { vec: [1.0, 0.0] };

    pub fn real(q: f64) -> Self {
        BoundaryPt { vec: [q, 1.0] }
    }

    pub fn from_vec(vec: [f64; 2]) -> Result<Self> {
        let scale = vec[0].abs().max(vec[1].abs());
        if !(scale > 1e-300) || !scale.is_finite() {
            return Err(Error::InvalidBoundaryPoint);
        }
        Ok(BoundaryPt { vec })
    }

    pub fn is_infinite(&self) -> bool {
        self.vec[1] == 0.0
    }

    /// `None` stands for infinity.
    pub fn value(&self) -> Option<f64> {
        if self.is_infinite() {
            None
        } else {
            Some(self.vec[0] / self.vec[1])
        }
    }

    pub fn same_as(&self, other: &BoundaryPt) -> bool {
        let [a, b] = self.vec;
        let [c, d] = other.vec;
        let cross = a * d - b * c;
        cross.abs() <= 1e-14 * (a.hypot(b) * c.hypot(d))
    }
}

/// Hyperbolic distance computed from the half-distance form
/// `sinh(d/2) = |p - q| / (2 sqrt(y_p y_q))`.
pub fn dist_h(p: HPoint, q: HPoint) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    2.0 * (dx.hypot(dy) / (2.0 * (p.y * q.y).sqrt())).asinh()
}

/// `4 sinh^2(d/2)` without the inverse hyperbolic function.
pub fn sinh_half_sq4(p: HPoint, q: HPoint) -> f64 {
    let dx = p.x - q.x;
    let dy = p.y - q.y;
    (dx * dx + dy * dy) / (p.y * q.y)
}

/// Horocyclic distance `d_eta(a, i)`.
pub fn horodist(eta: &BoundaryPt, a: HPoint) -> f64 {
    match eta.value() {
        None => -a.y.ln(),
        Some(q) => {
            let dx = a.x - q;
            ((dx * dx + a.y * a.y) / ((1.0 + q * q) * a.y)).ln()
        }
    }
}

/// Signed horocyclic distance `d_eta(a, b)`.
pub fn horodist_between(eta: &BoundaryPt, a: HPoint, b: HPoint) -> f64 {
    horodist(eta, a) - horodist(eta, b)
}

/// Disk chart sending `center` to the origin, `w = (z - c) / (z - conj c)`.
pub fn to_disk(p: HPoint, center: HPoint) -> DPoint {
    let z = p.to_complex();
    let c = center.to_complex();
    let w = (z - c) / (z - c.conj());
    DPoint { u: w.re, v: w.im }
}

pub fn from_disk(d: DPoint, center: HPoint) -> HPoint {
    let w = Complex64::new(d.u, d.v);
    let c = center.to_complex();
    let z = (c - c.conj() * w) / (Complex64::new(1.0, 0.0) - w);
    HPoint::new(z.re, z.im.max(f64::MIN_POSITIVE))
}

/// Boundary point seen at angle `theta` from `center` in its disk chart.
pub fn boundary_from_disk_angle(theta: f64, center: HPoint) -> BoundaryPt {
    let w = Complex64::from_polar(1.0, theta);
    let c = center.to_complex();
    let one_minus = Complex64::new(1.0, 0.0) - w;
    // (c - conj(c) w) / (1 - w), multiplied through by conj(1 - w)
    let num = (c - c.conj() * w) * one_minus.conj();
    BoundaryPt {
        vec: [num.re, one_minus.norm_sqr()],
    }
}

/// Möbius map `z -> (a z + b) / (c z + d)` with `ad - bc = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Isometry {
    pub const IDENTITY: Isometry = Isometry { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    /// Scales an arbitrary positive-determinant matrix to determinant one and
    /// fixes the overall sign so the first nonzero entry of `(c, d)` is positive.
    pub fn normalized(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det > 0.0) {
            return Err(Error::InvalidArgument(format!("determinant {det} is not positive")));
        }
        let s = det.sqrt();
        let sign = if c > 0.0 || (c == 0.0 && d > 0.0) { 1.0 } else { -1.0 };
        let k = sign / s;
        Ok(Isometry { a: a * k, b: b * k, c: c * k, d: d * k })
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn apply(&self, p: HPoint) -> HPoint {
        let z = p.to_complex();
        let w = (z * self.a + self.b) / (z * self.c + self.d);
        HPoint::new(w.re, w.im)
    }

    pub fn apply_boundary(&self, eta: &BoundaryPt) -> BoundaryPt {
        let [u1, u2] = eta.vec;
        BoundaryPt {
            vec: [self.a * u1 + self.b * u2, self.c * u1 + self.d * u2],
        }
    }

    pub fn inverse(&self) -> Isometry {
        Isometry { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Isometry) -> Isometry {
        Isometry {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
        }
    }

    /// Rotation about `i` by `theta` in the disk chart centered at `i`.
    pub fn rotation_about_i(theta: f64) -> Isometry {
        let (s, c) = (theta / 2.0).sin_cos();
        Isometry { a: c, b: s, c: -s, d: c }
    }
}

/// The isometry sending `z0` to `i` and `eta1` to infinity. It is unique; the
/// matrix sign is fixed by [`Isometry::normalized`].
pub fn canonical_isometry(z0: HPoint, eta1: &BoundaryPt) -> Result<Isometry> {
    let eta1 = BoundaryPt::from_vec(eta1.vec)?;
    // affine step: z -> (z - x0) / y0
    let s = z0.y.sqrt();
    let affine = Isometry { a: 1.0 / s, b: -z0.x / s, c: 0.0, d: s };
    let moved = affine.apply_boundary(&eta1);
    let q = match moved.value() {
        None => return Isometry::normalized(affine.a, affine.b, affine.c, affine.d),
        Some(q) => q,
    };
    // rotation about i whose pole is q: z -> (cos t z + sin t) / (-sin t z + cos t), tan t = 1/q
    let t = 1f64.atan2(q);
    let rot = Isometry { a: t.cos(), b: t.sin(), c: -t.sin(), d: t.cos() };
    let m = rot.compose(&affine);
    Isometry::normalized(m.a, m.b, m.c, m.d)
}

/// Point at time `t` moving with `speed` along the geodesic from `z0` to `eta1`.
pub fn geodesic_point(z0: HPoint, eta1: &BoundaryPt, speed: f64, t: f64) -> Result<HPoint> {
    let q = canonical_isometry(z0, eta1)?;
    Ok(q.inverse().apply(HPoint::new(0.0, (speed * t).exp())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt() -> impl Strategy<Value = HPoint> {
        (-5.0..5.0f64, -3.0..3.0f64).prop_map(|(x, ly)| HPoint::new(x, ly.exp()))
    }

    #[test]
    fn distance_examples() {
        assert_eq!(dist_h(HPoint::I, HPoint::I), 0.0);
        let t: f64 = 1.7;
        assert!((dist_h(HPoint::I, HPoint::new(0.0, t.exp())) - t).abs() < 1e-14);
        // frozen from the disk chart: log((1+r)/(1-r)), r = |w| after centering at 3+2i
        let d = dist_h(HPoint::new(1.0, 1.0), HPoint::new(3.0, 2.0));
        assert!((d - 1.450_574_513_822_580_2).abs() < 1e-13);
    }

    #[test]
    fn horodistance_examples() {
        assert_eq!(horodist(&BoundaryPt::INFINITY, HPoint::new(0.3, 1.0)), 0.0);
        assert!((horodist(&BoundaryPt::INFINITY, HPoint::new(0.3, 0.25)) - 4f64.ln()).abs() < 1e-15);
        assert_eq!(horodist(&BoundaryPt::real(0.0), HPoint::I), 0.0);
    }

    #[test]
    fn horodistance_matches_limit_definition() {
        let q = 0.7;
        let eta = BoundaryPt::real(q);
        let a = HPoint::new(-0.4, 0.8);
        let b = HPoint::new(1.3, 2.1);
        // walk from i toward q along the geodesic to distance 20
        let z = geodesic_point(HPoint::I, &eta, 1.0, 20.0).unwrap();
        let lim = dist_h(a, z) - dist_h(b, z);
        assert!((horodist_between(&eta, a, b) - lim).abs() < 1e-6);
    }

    #[test]
    fn horodistance_is_profile_growth() {
        // e^{d_u(z, i)} = |X u|^2 / |u|^2 with X = y^{-1/2} [[1, -x], [0, y]]
        let z = HPoint::new(0.9, 0.35);
        for u in [[1.0, 0.0], [0.3, 1.0], [-2.0, 0.5]] {
            let xu = [(u[0] - z.x * u[1]) / z.y.sqrt(), z.y.sqrt() * u[1]];
            let ratio = (xu[0] * xu[0] + xu[1] * xu[1]) / (u[0] * u[0] + u[1] * u[1]);
            let eta = BoundaryPt::from_vec(u).unwrap();
            assert!((horodist(&eta, z).exp() - ratio).abs() < 1e-12 * ratio);
        }
    }

    #[test]
    fn disk_chart_center() {
        let d = to_disk(HPoint::I, HPoint::I);
        assert!(d.u.abs() < 1e-16 && d.v.abs() < 1e-16);
    }

    #[test]
    fn canonical_isometry_cases() {
        let q = canonical_isometry(HPoint::I, &BoundaryPt::INFINITY).unwrap();
        assert_eq!(q, Isometry::IDENTITY);
        let z0 = HPoint::new(0.4, 2.5);
        let eta = BoundaryPt::real(-1.2);
        let q = canonical_isometry(z0, &eta).unwrap();
        let w = q.apply(z0);
        assert!(w.x.abs() < 1e-10 && (w.y - 1.0).abs() < 1e-10);
        let e = q.apply_boundary(&eta);
        assert!(e.vec[1].abs() < 1e-10 * e.vec[0].abs());
        assert!((q.det() - 1.0).abs() < 1e-12);
        // geodesic goes to the vertical ray
        for t in [0.5, 1.0, 3.0] {
            let g = geodesic_point(z0, &eta, 0.5, t).unwrap();
            let img = q.apply(g);
            assert!(img.x.abs() < 1e-9);
            assert!((img.y - (0.5 * t).exp()).abs() < 1e-9 * img.y);
        }
        assert_eq!(
            canonical_isometry(z0, &BoundaryPt { vec: [0.0, 0.0] }),
            Err(Error::InvalidBoundaryPoint)
        );
    }

    #[test]
    fn geodesic_examples() {
        let g = geodesic_point(HPoint::I, &BoundaryPt::INFINITY, 0.5, 2.0).unwrap();
        assert!(g.x.abs() < 1e-15 && (g.y - 1f64.exp()).abs() < 1e-14);
        let z0 = HPoint::new(-1.0, 0.5);
        let eta = BoundaryPt::real(3.0);
        let g0 = geodesic_point(z0, &eta, 0.5, 0.0).unwrap();
        assert!(dist_h(g0, z0) < 1e-12);
        let g3 = geodesic_point(z0, &eta, 0.5, 3.0).unwrap();
        assert!((dist_h(g0, g3) - 1.5).abs() < 1e-10);
    }

    #[test]
    fn boundary_from_disk_angle_round_trip() {
        let c = HPoint::new(0.3, 0.6);
        for k in 0..16 {
            let th = 0.1 + k as f64 * 0.39;
            let eta = boundary_from_disk_angle(th, c);
            let q = eta.value().unwrap();
            // the boundary point maps back onto the unit circle at angle th
            let w = (Complex64::new(q, 0.0) - c.to_complex()) / (Complex64::new(q, 0.0) - c.to_complex().conj());
            assert!((w.norm() - 1.0).abs() < 1e-12);
            let dth = (w.arg() - th).rem_euclid(2.0 * std::f64::consts::PI);
            assert!(dth < 1e-9 || dth > 2.0 * std::f64::consts::PI - 1e-9);
        }
        assert!(boundary_from_disk_angle(0.0, c).is_infinite());
    }

    proptest! {
        #[test]
        fn metric_axioms(a in pt(), b in pt(), c in pt()) {
            let ab = dist_h(a, b);
            prop_assert!((ab - dist_h(b, a)).abs() <= 1e-10);
            prop_assert!(ab >= 0.0);
            prop_assert!(dist_h(a, c) <= ab + dist_h(b, c) + 1e-10);
        }

        #[test]
        fn disk_chart_radius_and_round_trip(p in pt(), c in pt()) {
            let w = to_disk(p, c);
            let d = dist_h(p, c);
            prop_assert!((w.norm() - (d / 2.0).tanh()).abs() < 1e-12);
            let back = from_disk(w, c);
            prop_assert!((back.x - p.x).abs() < 1e-12 * (1.0 + p.x.abs().max(p.y)));
            prop_assert!((back.y - p.y).abs() < 1e-12 * (1.0 + p.y));
        }

        #[test]
        fn disk_and_half_plane_distances_agree(p in pt(), q in pt(), c in pt()) {
            let wp = to_disk(p, c);
            let wq = to_disk(q, c);
            let zp = Complex64::new(wp.u, wp.v);
            let zq = Complex64::new(wq.u, wq.v);
            let r = ((zp - zq) / (Complex64::new(1.0, 0.0) - zp.conj() * zq)).norm();
            let dd = ((1.0 + r) / (1.0 - r)).ln();
            let dh = dist_h(p, q);
            prop_assert!((dd - dh).abs() < 1e-10 * (1.0 + dh) * (1.0 + dh));
        }

        #[test]
        fn isometries_preserve_distances(z0 in pt(), q in -4.0..4.0f64, a in pt(), b in pt(), e in -4.0..4.0f64) {
            let iso = canonical_isometry(z0, &BoundaryPt::real(q)).unwrap();
            let d0 = dist_h(a, b);
            prop_assert!((dist_h(iso.apply(a), iso.apply(b)) - d0).abs() < 1e-8 * (1.0 + d0));
            let eta = BoundaryPt::real(e);
            let h0 = horodist_between(&eta, a, b);
            let h1 = horodist_between(&iso.apply_boundary(&eta), iso.apply(a), iso.apply(b));
            prop_assert!((h0 - h1).abs() < 1e-8 * (1.0 + h0.abs()));
            let hinf = horodist_between(&BoundaryPt::INFINITY, a, b);
            let hinf1 = horodist_between(&iso.apply_boundary(&BoundaryPt::INFINITY), iso.apply(a), iso.apply(b));
            prop_assert!((hinf - hinf1).abs() < 1e-8 * (1.0 + hinf.abs()));
        }
    }
}
