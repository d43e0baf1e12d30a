//! Model ambient spaces: Euclidean R^n and hyperbolic H^n (constant curvature
//! -c), n in {2, 3}.
//!
//! Hyperbolic points live on the upper hyperboloid sheet <x,x> = -1/c,
//! x_0 > 0, inside Minkowski space with signature (-, +, ..., +). Coordinates
//! are zero-padded `Vector4` so both ambients share one storage type; the
//! padded slots never contribute to any bilinear form.
//!
//! Geodesic formulas use the generalized trigonometric pair
//! cs(t) = cosh(sqrt(c) t), sn(t) = sinh(sqrt(c) t)/sqrt(c), which degenerate
//! to cs = 1, sn = t in the Euclidean limit c = 0.

use crate::error::{Error, Result};
use crate::numeric::{gamma_half, metric_gram_schmidt};
use nalgebra::Vector4;
use serde::{Deserialize, Serialize};

/// Hyperboloid constraint must hold to this relative tolerance after every
/// operation; constructors and flows renormalize.
pub const SHEET_TOL: f64 = 1e-12;
/// Tangency tolerance for vectors attached to hyperboloid points.
pub const TANGENT_TOL: f64 = 1e-10;

pub type Vec4 = Vector4<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Euclidean,
    Hyperbolic,
}

/// A point's raw coordinate vector. Interpretation depends on the space.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point(pub Vec4);

impl Point {
    pub fn coords(&self) -> Vec4 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmbientSpace {
    pub kind: SpaceKind,
    /// Manifold dimension n; hypersurfaces inside have dimension n - 1.
    pub dim: usize,
    /// Curvature scale c >= 0; sectional curvature is identically -c.
    pub curvature_scale: f64,
}

impl AmbientSpace {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::Domain(format!("ambient dimension {dim} not in 2..=3")));
        }
        Ok(AmbientSpace { kind: SpaceKind::Euclidean, dim, curvature_scale: 0.0 })
    }

    pub fn hyperbolic(dim: usize, curvature_scale: f64) -> Result<Self> {
        if !(2..=3).contains(&dim) {
            return Err(Error::Domain(format!("ambient dimension {dim} not in 2..=3")));
        }
        if !(curvature_scale > 0.0) || !curvature_scale.is_finite() {
            return Err(Error::Domain(format!(
                "hyperbolic curvature scale must be positive and finite, got {curvature_scale}"
            )));
        }
        Ok(AmbientSpace { kind: SpaceKind::Hyperbolic, dim, curvature_scale })
    }

    /// Number of coordinate slots actually used by points of this space.
    pub fn coord_len(&self) -> usize {
        match self.kind {
            SpaceKind::Euclidean => self.dim,
            SpaceKind::Hyperbolic => self.dim + 1,
        }
    }

    pub fn is_hyperbolic(&self) -> bool {
        self.kind == SpaceKind::Hyperbolic
    }

    /// Upper bound sup |K| over the space (and hence over any region in it).
    pub fn curvature_bound(&self) -> f64 {
        self.curvature_scale
    }

    /// cs(t) = cosh(sqrt(c) t), the normal-flow cosine.
    pub fn cs(&self, t: f64) -> f64 {
        if self.is_hyperbolic() {
            (self.curvature_scale.sqrt() * t).cosh()
        } else {
            1.0
        }
    }

    /// sn(t) = sinh(sqrt(c) t)/sqrt(c), the normal-flow sine.
    pub fn sn(&self, t: f64) -> f64 {
        if self.is_hyperbolic() {
            let rc = self.curvature_scale.sqrt();
            (rc * t).sinh() / rc
        } else {
            t
        }
    }

    /// sn(t)/t, continuous through t = 0.
    pub fn snc(&self, t: f64) -> f64 {
        if !self.is_hyperbolic() {
            return 1.0;
        }
        let x = self.curvature_scale.sqrt() * t;
        if x.abs() < 1e-6 {
            1.0 + x * x / 6.0 + x.powi(4) / 120.0
        } else {
            x.sinh() / x
        }
    }

    /// Metric bilinear form on ambient coordinate vectors: Euclidean dot or
    /// Minkowski product. Restricted to tangent spaces it is the Riemannian
    /// metric in both cases.
    pub fn inner(&self, a: &Vec4, b: &Vec4) -> f64 {
        match self.kind {
            SpaceKind::Euclidean => a.dot(b),
            SpaceKind::Hyperbolic => a[1] * b[1] + a[2] * b[2] + a[3] * b[3] - a[0] * b[0],
        }
    }

    pub fn norm(&self, v: &Vec4) -> f64 {
        self.inner(v, v).max(0.0).sqrt()
    }

    /// Construct a point from used coordinates, validating model constraints.
    pub fn point_from_slice(&self, coords: &[f64]) -> Result<Point> {
        if coords.len() != self.coord_len() {
            return Err(Error::Config(format!(
                "expected {} coordinates, got {}",
                self.coord_len(),
                coords.len()
            )));
        }
        let mut v = Vec4::zeros();
        for (i, &x) in coords.iter().enumerate() {
            v[i] = x;
        }
        let p = Point(v);
        self.check_point(&p)?;
        Ok(p)
    }

    pub fn check_point(&self, p: &Point) -> Result<()> {
        for i in self.coord_len()..4 {
            if p.0[i] != 0.0 {
                return Err(Error::InvalidPoint(format!(
                    "padded coordinate slot {i} must be zero, got {}",
                    p.0[i]
                )));
            }
        }
        if !p.0.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidPoint("non-finite coordinates".into()));
        }
        if self.is_hyperbolic() {
            let c = self.curvature_scale;
            let q = self.inner(&p.0, &p.0);
            if (c * q + 1.0).abs() > 1e3 * SHEET_TOL {
                return Err(Error::InvalidPoint(format!(
                    "hyperboloid constraint violated: c<x,x> = {}, expected -1",
                    c * q
                )));
            }
            if p.0[0] <= 0.0 {
                return Err(Error::InvalidPoint("point on the lower sheet".into()));
            }
        }
        Ok(())
    }

    pub fn check_tangent(&self, p: &Point, v: &Vec4) -> Result<()> {
        if self.is_hyperbolic() {
            let t = self.inner(&p.0, v);
            let scale = 1.0 / self.curvature_scale.sqrt();
            if t.abs() > TANGENT_TOL * scale.max(self.norm(v)).max(1.0) {
                return Err(Error::InvalidPoint(format!(
                    "vector not tangent: <x, v> = {t}"
                )));
            }
        } else {
            for i in self.coord_len()..4 {
                if v[i] != 0.0 {
                    return Err(Error::InvalidPoint("tangent uses padded slots".into()));
                }
            }
        }
        Ok(())
    }

    /// Rescale a near-sheet coordinate vector exactly onto the hyperboloid.
    /// Euclidean points pass through unchanged.
    pub fn renormalize(&self, p: Point) -> Point {
        if !self.is_hyperbolic() {
            return p;
        }
        let c = self.curvature_scale;
        let q = self.inner(&p.0, &p.0);
        // q must be timelike; leave pathological input to check_point.
        if q >= 0.0 {
            return p;
        }
        Point(p.0 / (-c * q).sqrt())
    }

    /// Project an ambient coordinate vector onto the tangent space at p.
    pub fn project_tangent(&self, p: &Point, w: &Vec4) -> Vec4 {
        match self.kind {
            SpaceKind::Euclidean => {
                let mut v = *w;
                for i in self.coord_len()..4 {
                    v[i] = 0.0;
                }
                v
            }
            SpaceKind::Hyperbolic => {
                let c = self.curvature_scale;
                w + p.0 * (c * self.inner(w, &p.0))
            }
        }
    }

    pub fn distance(&self, p: &Point, q: &Point) -> f64 {
        match self.kind {
            SpaceKind::Euclidean => (p.0 - q.0).norm(),
            SpaceKind::Hyperbolic => {
                let c = self.curvature_scale;
                let arg = (-c * self.inner(&p.0, &q.0)).max(1.0);
                arg.acosh() / c.sqrt()
            }
        }
    }

    /// Geodesic exponential. The tangent vector is given in ambient
    /// coordinates; hyperbolic results are renormalized onto the sheet.
    pub fn exp_map(&self, p: &Point, v: &Vec4) -> Point {
        match self.kind {
            SpaceKind::Euclidean => Point(p.0 + v),
            SpaceKind::Hyperbolic => {
                let t = self.norm(v);
                let out = p.0 * self.cs(t) + v * self.snc(t);
                self.renormalize(Point(out))
            }
        }
    }

    /// Inverse of exp_map: the tangent vector at p pointing to q with
    /// |log| = distance(p, q).
    pub fn log_map(&self, p: &Point, q: &Point) -> Vec4 {
        match self.kind {
            SpaceKind::Euclidean => q.0 - p.0,
            SpaceKind::Hyperbolic => {
                let c = self.curvature_scale;
                let w = q.0 + p.0 * (c * self.inner(&p.0, &q.0));
                let len = self.norm(&w);
                let d = self.distance(p, q);
                if len < 1e-300 {
                    Vec4::zeros()
                } else {
                    w * (d / len)
                }
            }
        }
    }

    /// Velocity at time t of the unit-speed geodesic leaving p with unit
    /// direction v. Stays a unit tangent at the flowed point.
    pub fn geodesic_velocity(&self, p: &Point, v: &Vec4, t: f64) -> Vec4 {
        match self.kind {
            SpaceKind::Euclidean => *v,
            SpaceKind::Hyperbolic => {
                let c = self.curvature_scale;
                p.0 * (c * self.sn(t)) + v * self.cs(t)
            }
        }
    }

    /// Base point of the space: the coordinate origin (Euclidean) or the
    /// hyperboloid apex.
    pub fn origin(&self) -> Point {
        match self.kind {
            SpaceKind::Euclidean => Point(Vec4::zeros()),
            SpaceKind::Hyperbolic => {
                let mut v = Vec4::zeros();
                v[0] = 1.0 / self.curvature_scale.sqrt();
                Point(v)
            }
        }
    }

    /// Metric-orthonormal basis of the tangent space at p (n vectors).
    pub fn tangent_basis(&self, p: &Point) -> Vec<Vec4> {
        let mut candidates = Vec::new();
        match self.kind {
            SpaceKind::Euclidean => {
                for i in 0..self.dim {
                    let mut e = Vec4::zeros();
                    e[i] = 1.0;
                    candidates.push(e);
                }
            }
            SpaceKind::Hyperbolic => {
                // Spatial directions first, projected onto T_p; one of the
                // n+1 projections is linearly dependent and gets dropped.
                for i in (0..=self.dim).rev() {
                    let mut e = Vec4::zeros();
                    e[i] = 1.0;
                    candidates.push(self.project_tangent(p, &e));
                }
            }
        }
        let inner = |a: &Vec4, b: &Vec4| self.inner(a, b);
        // Greedy Gram-Schmidt keeping the first dim independent vectors.
        let mut kept: Vec<Vec4> = Vec::new();
        for cand in candidates {
            if kept.len() == self.dim {
                break;
            }
            let mut trial = kept.clone();
            trial.push(cand);
            if let Some((basis, _)) = metric_gram_schmidt(&trial, &inner, 1e-8) {
                kept = basis;
            }
        }
        assert_eq!(kept.len(), self.dim, "tangent basis construction failed");
        kept
    }

    /// Klein coordinates of a hyperbolic point: spatial part over x_0, inside
    /// the open unit ball. Geodesics map to straight chords.
    pub fn to_klein(&self, p: &Point) -> Vec4 {
        debug_assert!(self.is_hyperbolic());
        let mut k = p.0 / p.0[0];
        k[0] = 0.0;
        // Store spatial slots shifted down: klein vector uses slots 0..dim.
        Vec4::new(k[1], k[2], k[3], 0.0)
    }

    /// Inverse Klein map; requires |k| < 1.
    pub fn from_klein(&self, k: &Vec4) -> Result<Point> {
        debug_assert!(self.is_hyperbolic());
        let c = self.curvature_scale;
        let k2 = k.norm_squared();
        if k2 >= 1.0 {
            return Err(Error::InvalidPoint(format!(
                "klein coordinates outside the unit ball: |k| = {}",
                k2.sqrt()
            )));
        }
        let x0 = 1.0 / (c * (1.0 - k2)).sqrt();
        let p = Point(Vec4::new(x0, x0 * k[0], x0 * k[1], x0 * k[2]));
        Ok(self.renormalize(p))
    }

    /// Volume of the unit (n-1)-sphere, |S^{n-1}| = 2 pi^{n/2} / Gamma(n/2).
    pub fn unit_sphere_volume(n: usize) -> Result<f64> {
        if n < 2 {
            return Err(Error::Domain(format!("unit_sphere_volume needs n >= 2, got {n}")));
        }
        let pi = std::f64::consts::PI;
        Ok(2.0 * pi.powf(n as f64 / 2.0) / gamma_half(n as u32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI: f64 = std::f64::consts::PI;

    fn h2() -> AmbientSpace {
        AmbientSpace::hyperbolic(2, 1.0).unwrap()
    }

    fn h3() -> AmbientSpace {
        AmbientSpace::hyperbolic(3, 1.0).unwrap()
    }

    #[test]
    fn euclidean_distance_is_pythagorean() {
        let e2 = AmbientSpace::euclidean(2).unwrap();
        let p = e2.point_from_slice(&[0.0, 0.0]).unwrap();
        let q = e2.point_from_slice(&[3.0, 4.0]).unwrap();
        assert_eq!(e2.distance(&p, &q), 5.0);
    }

    #[test]
    fn euclidean_exp_is_translation() {
        let e2 = AmbientSpace::euclidean(2).unwrap();
        let p = e2.point_from_slice(&[1.0, 2.0]).unwrap();
        let v = Vec4::new(0.1, -0.2, 0.0, 0.0);
        let q = e2.exp_map(&p, &v);
        assert!((q.0 - Vec4::new(1.1, 1.8, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn hyperbolic_distance_matches_closed_form() {
        // d = arccosh(-<p, q>) for c = 1; the pair below lies distance 1 apart.
        let s = h2();
        let p = s.point_from_slice(&[1.0, 0.0, 0.0]).unwrap();
        let q = s
            .point_from_slice(&[1.0f64.cosh(), 1.0f64.sinh(), 0.0])
            .unwrap();
        assert!((s.distance(&p, &q) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_exp_preserves_distance_and_sheet() {
        let s = h3();
        let p = s.origin();
        let basis = s.tangent_basis(&p);
        for (i, scale) in [(0usize, 0.3), (1, 1.7), (2, 0.01)] {
            let v = basis[i] * scale;
            let q = s.exp_map(&p, &v);
            assert!((s.distance(&p, &q) - scale).abs() < 1e-10);
            let c = s.curvature_scale;
            assert!((c * s.inner(&q.0, &q.0) + 1.0).abs() < SHEET_TOL);
        }
    }

    #[test]
    fn log_inverts_exp() {
        let s = h3();
        let p = s
            .exp_map(&s.origin(), &Vec4::new(0.0, 0.4, -0.2, 0.7))
            .clone();
        let basis = s.tangent_basis(&p);
        let v = basis[0] * 0.3 + basis[1] * (-0.8) + basis[2] * 0.25;
        let q = s.exp_map(&p, &v);
        let back = s.log_map(&p, &q);
        assert!((back - v).norm() < 1e-10, "log(exp(v)) = {back:?} vs {v:?}");
    }

    #[test]
    fn geodesic_velocity_is_unit_and_tangent() {
        let s = h2();
        let p = s.origin();
        let v = s.tangent_basis(&p)[1];
        let t = 0.9;
        let q = s.exp_map(&p, &(v * t));
        let vel = s.geodesic_velocity(&p, &v, t);
        assert!((s.inner(&vel, &vel) - 1.0).abs() < 1e-12);
        assert!(s.inner(&q.0, &vel).abs() < 1e-10);
    }

    #[test]
    fn tangent_basis_is_orthonormal() {
        for s in [h2(), h3(), AmbientSpace::euclidean(3).unwrap()] {
            let p = if s.is_hyperbolic() {
                s.exp_map(&s.origin(), &Vec4::new(0.0, 0.5, -0.3, if s.dim == 3 { 0.2 } else { 0.0 }))
            } else {
                s.origin()
            };
            let basis = s.tangent_basis(&p);
            assert_eq!(basis.len(), s.dim);
            for i in 0..basis.len() {
                for j in 0..basis.len() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((s.inner(&basis[i], &basis[j]) - want).abs() < 1e-10);
                }
                s.check_tangent(&p, &basis[i]).unwrap();
            }
        }
    }

    #[test]
    fn klein_roundtrip_and_chord_geodesics() {
        let s = h3();
        let p = s.exp_map(&s.origin(), &Vec4::new(0.0, 0.3, 0.5, -0.2));
        let k = s.to_klein(&p);
        let back = s.from_klein(&k).unwrap();
        assert!((back.0 - p.0).norm() < 1e-10);

        // Midpoint of the geodesic maps into the Klein chord.
        let q = s.exp_map(&s.origin(), &Vec4::new(0.0, -0.4, 0.1, 0.6));
        let mid = {
            let v = s.log_map(&p, &q);
            s.exp_map(&p, &(v * 0.5))
        };
        let (kp, kq, km) = (s.to_klein(&p), s.to_klein(&q), s.to_klein(&mid));
        let chord = kq - kp;
        let rel = km - kp;
        // Collinearity: rel x chord = 0.
        let cross = nalgebra::Vector3::new(rel[0], rel[1], rel[2])
            .cross(&nalgebra::Vector3::new(chord[0], chord[1], chord[2]));
        assert!(cross.norm() < 1e-10, "klein image of geodesic bends: {cross:?}");
    }

    #[test]
    fn unit_sphere_volumes_match_table() {
        assert!((AmbientSpace::unit_sphere_volume(2).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!((AmbientSpace::unit_sphere_volume(3).unwrap() - 4.0 * PI).abs() < 1e-12);
        assert!((AmbientSpace::unit_sphere_volume(4).unwrap() - 2.0 * PI * PI).abs() < 1e-12);
        assert!(AmbientSpace::unit_sphere_volume(1).is_err());
    }

    #[test]
    fn curvature_bound_reports_scale() {
        assert_eq!(AmbientSpace::euclidean(3).unwrap().curvature_bound(), 0.0);
        assert_eq!(AmbientSpace::hyperbolic(3, 2.5).unwrap().curvature_bound(), 2.5);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(AmbientSpace::euclidean(4).is_err());
        assert!(AmbientSpace::hyperbolic(3, 0.0).is_err());
        assert!(AmbientSpace::hyperbolic(3, -1.0).is_err());
        let s = h2();
        assert!(s.point_from_slice(&[1.0, 0.5, 0.5]).is_err(), "off-sheet point accepted");
        assert!(s.point_from_slice(&[1.0, 0.0]).is_err(), "wrong arity accepted");
    }

    #[test]
    fn renormalize_restores_sheet_to_tolerance() {
        let s = h3();
        let p = s.exp_map(&s.origin(), &Vec4::new(0.0, 2.0, 1.0, -0.5));
        let drifted = Point(p.0 * (1.0 + 3e-9));
        let fixed = s.renormalize(drifted);
        let c = s.curvature_scale;
        assert!((c * s.inner(&fixed.0, &fixed.0) + 1.0).abs() < SHEET_TOL);
    }
}
