//! Parametric charts and their differential frames.
//!
//! Every catalog surface is a geodesic radial graph about a center point:
//! X(u, v) = exp_o(rho(u, v) * d(u, v)) with d a unit direction field in T_o.
//! Positions are evaluated on second-order jets, so first and second
//! derivatives are exact; the frame pipeline below converts them into the
//! unit normal, the Weingarten form W_jk = <d_j nu, d_k X> = -<nu, d2_jk X>,
//! and the ambient derivatives of the normal via d_j nu = (W I^-1)_jk d_k X.
//!
//! Sign convention: nu is outward on convex bodies and principal curvatures
//! of convex bodies are then >= 0 (shape operator S(X) = grad_X nu).

use crate::ambient::{AmbientSpace, Point, Vec4};
use crate::error::{Error, Result};
use crate::jet::{jv_add, jv_constant, jv_dot, jv_minkowski, jv_scale, Jet2, JetVec};
use crate::numeric::metric_gram_schmidt;
use nalgebra::{Matrix2, Vector4};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// First-order differential data of a chart at one parameter point.
#[derive(Clone, Debug)]
pub struct ChartFrame {
    pub point: Point,
    /// d_j X, j < dim.
    pub tangents: [Vec4; 2],
    /// Unit outward normal.
    pub normal: Vec4,
    /// d_j nu, j < dim (always tangent to the surface).
    pub dnormal: [Vec4; 2],
    /// First fundamental form, Gram matrix of the tangents.
    pub first: Matrix2<f64>,
    /// Weingarten form W_jk = <d_j nu, d_k X>.
    pub second: Matrix2<f64>,
    /// Chart parameter dimension (1 for curves, 2 for surfaces).
    pub dim: usize,
}

impl ChartFrame {
    /// Riemannian area element sqrt(det I).
    pub fn area_element(&self) -> f64 {
        match self.dim {
            1 => self.first[(0, 0)].max(0.0).sqrt(),
            _ => (self.first[(0, 0)] * self.first[(1, 1)]
                - self.first[(0, 1)] * self.first[(1, 0)])
                .max(0.0)
                .sqrt(),
        }
    }
}

/// Builds the frame from raw first-order data (used by flowed and offset
/// charts, whose normals are known in closed form).
pub fn frame_from_first_order(
    space: &AmbientSpace,
    point: Point,
    tangents: [Vec4; 2],
    normal: Vec4,
    dnormal: [Vec4; 2],
    dim: usize,
) -> ChartFrame {
    let mut first = Matrix2::zeros();
    let mut second = Matrix2::zeros();
    for j in 0..dim {
        for k in 0..dim {
            first[(j, k)] = space.inner(&tangents[j], &tangents[k]);
            second[(j, k)] = space.inner(&dnormal[j], &tangents[k]);
        }
    }
    // W is symmetric up to roundoff; symmetrize to keep eigensolves clean.
    if dim == 2 {
        let s = 0.5 * (second[(0, 1)] + second[(1, 0)]);
        second[(0, 1)] = s;
        second[(1, 0)] = s;
    }
    ChartFrame { point, tangents, normal, dnormal, first, second, dim }
}

/// Builds the frame from jet-evaluated position data. `outward` is a hint
/// vector at the evaluated point; the normal is oriented to have positive
/// inner product with it.
pub fn frame_from_jets(
    space: &AmbientSpace,
    jets: &JetVec,
    outward: &dyn Fn(&Point) -> Vec4,
    dim: usize,
    u: f64,
    v: f64,
) -> Result<ChartFrame> {
    let x = Vector4::new(jets[0].v, jets[1].v, jets[2].v, jets[3].v);
    let point = space.renormalize(Point(x));
    let du = Vector4::new(jets[0].du, jets[1].du, jets[2].du, jets[3].du);
    let dv = Vector4::new(jets[0].dv, jets[1].dv, jets[2].dv, jets[3].dv);
    let tangents = [
        space.project_tangent(&point, &du),
        space.project_tangent(&point, &dv),
    ];
    let hess = [
        Vector4::new(jets[0].duu, jets[1].duu, jets[2].duu, jets[3].duu),
        Vector4::new(jets[0].duv, jets[1].duv, jets[2].duv, jets[3].duv),
        Vector4::new(jets[0].dvv, jets[1].dvv, jets[2].dvv, jets[3].dvv),
    ];

    // Orthonormalize the tangents, then find the normal direction among the
    // ambient tangent basis vectors.
    let inner = |a: &Vec4, b: &Vec4| space.inner(a, b);
    let scale = tangents[0].norm().max(1e-30);
    let (tan_on, _) = metric_gram_schmidt(&tangents[..dim], &inner, 1e-12 * scale)
        .ok_or(Error::SingularChart { u, v, what: "degenerate tangent frame".into() })?;
    let mut normal = None;
    for cand in space.tangent_basis(&point) {
        let mut w = cand;
        for b in &tan_on {
            w -= space.inner(&w, b) * b;
        }
        let n2 = space.inner(&w, &w);
        if n2 > 1e-12 {
            normal = Some(w / n2.sqrt());
            break;
        }
    }
    let mut normal =
        normal.ok_or(Error::SingularChart { u, v, what: "no normal direction".into() })?;
    let hint = outward(&point);
    let side = space.inner(&normal, &hint);
    if side < 0.0 {
        normal = -normal;
    } else if side == 0.0 {
        return Err(Error::SingularChart { u, v, what: "orientation hint orthogonal".into() });
    }

    // Weingarten form from second derivatives; the hyperboloid position
    // component of the ambient Hessian is killed by <nu, x> = 0.
    let mut first = Matrix2::zeros();
    let mut second = Matrix2::zeros();
    let idx = |j: usize, k: usize| j + k; // (0,0)->0 uu, (0,1)/(1,0)->1 uv, (1,1)->2 vv
    for j in 0..dim {
        for k in 0..dim {
            first[(j, k)] = space.inner(&tangents[j], &tangents[k]);
            second[(j, k)] = -space.inner(&normal, &hess[idx(j, k)]);
        }
    }

    // d_j nu = sum_k (W I^-1)_jk d_k X; both fundamental forms are in chart
    // coordinates, so this is a plain dim x dim solve.
    let mut dnormal = [Vec4::zeros(), Vec4::zeros()];
    match dim {
        1 => {
            let c = second[(0, 0)] / first[(0, 0)];
            dnormal[0] = tangents[0] * c;
        }
        _ => {
            let inv = first
                .try_inverse()
                .ok_or(Error::SingularChart { u, v, what: "singular first form".into() })?;
            let m = second * inv;
            for j in 0..2 {
                dnormal[j] = tangents[0] * m[(j, 0)] + tangents[1] * m[(j, 1)];
            }
        }
    }

    Ok(ChartFrame { point, tangents, normal, dnormal, first, second, dim })
}

/// Principal curvatures (descending) and unit principal directions from a
/// chart frame: orthonormalize the tangents, express the Weingarten form
/// there, and diagonalize. For curves the second slots are zero-filled.
pub fn principal_data(space: &AmbientSpace, frame: &ChartFrame) -> Result<([f64; 2], [Vec4; 2])> {
    let inner = |a: &Vec4, b: &Vec4| space.inner(a, b);
    let scale = space.inner(&frame.tangents[0], &frame.tangents[0]).abs().sqrt().max(1e-30);
    let (on, coeff) = metric_gram_schmidt(&frame.tangents[..frame.dim], &inner, 1e-13 * scale)
        .ok_or(Error::Geometry("degenerate tangent frame".into()))?;
    if frame.dim == 1 {
        let k = coeff[0][0] * coeff[0][0] * frame.second[(0, 0)];
        return Ok(([k, 0.0], [on[0], Vec4::zeros()]));
    }
    let mut s = Matrix2::zeros();
    for a in 0..2 {
        for b in 0..2 {
            let mut acc = 0.0;
            for j in 0..=a {
                for k in 0..=b {
                    acc += coeff[a][j] * coeff[b][k] * frame.second[(j, k)];
                }
            }
            s[(a, b)] = acc;
        }
    }
    let (vals, vecs) = crate::numeric::sym_eigen_2x2(&s);
    let mut dirs = [Vec4::zeros(); 2];
    for i in 0..2 {
        dirs[i] = on[0] * vecs[i][0] + on[1] * vecs[i][1];
    }
    Ok((vals, dirs))
}

/// A chart: one smooth parameter patch of a hypersurface.
pub trait Chart: Send + Sync {
    fn param_dim(&self) -> usize;
    /// Parameter rectangle [(u0, u1), (v0, v1)]; the second range is ignored
    /// by curves.
    fn domain(&self) -> [(f64, f64); 2];
    fn frame(&self, u: f64, v: f64) -> Result<ChartFrame>;
    /// Exact position jets when the chart supports them (enables Newton
    /// nearest-point queries); charts defined only to first order return None.
    fn position_jets(&self, u: f64, v: f64) -> Option<JetVec>;
    /// Quadrature nodes per parameter direction for a nominal order.
    fn node_hint(&self, order: usize) -> [usize; 2] {
        let dom = self.domain();
        let mut h = [1usize; 2];
        for j in 0..self.param_dim() {
            let extent = (dom[j].1 - dom[j].0).abs();
            let n = (order as f64 * extent / std::f64::consts::PI).round() as usize;
            h[j] = n.max(4);
        }
        h
    }
    /// Closed-form patch area if one is known (test oracle, not used by
    /// quadrature).
    fn exact_area(&self) -> Option<f64> {
        None
    }
}

pub fn chart_position(chart: &dyn Chart, u: f64, v: f64) -> Result<Point> {
    Ok(chart.frame(u, v)?.point)
}

// ---------------------------------------------------------------------------
// Catalog shapes: geodesic radial graphs about a center.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub enum ShapeKind {
    /// Geodesic ball boundary: circle or sphere in either ambient.
    Ball { radius: f64 },
    /// Euclidean ellipsoid (n = 2 uses the first two semiaxes).
    Ellipsoid { semi: [f64; 3] },
    /// Euclidean superellipsoid-like convex body: the unit sphere of
    /// (sum (x_i/s_i)^(2m))^(1/2m), smooth and convex for m >= 1.
    Superellipsoid { semi: [f64; 3], m: u32 },
}

/// One smooth additive bump on the radial profile, anchored at a unit
/// direction in the center's tangent space.
#[derive(Clone, Debug)]
pub struct Bump {
    pub anchor: Vec4,
    pub width: f64,
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct BumpSet {
    pub amplitude: f64,
    pub bumps: Vec<Bump>,
    pub weight_norm: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PerturbMode {
    /// Number of bumps to superpose.
    pub bumps: usize,
    /// Angular width range (radians-ish on the direction sphere).
    pub width_min: f64,
    pub width_max: f64,
}

impl Default for PerturbMode {
    fn default() -> Self {
        PerturbMode { bumps: 3, width_min: 0.35, width_max: 0.8 }
    }
}

impl PerturbMode {
    pub fn single_low_frequency() -> Self {
        PerturbMode { bumps: 1, width_min: 0.8, width_max: 0.8 }
    }
}

impl BumpSet {
    /// Deterministic bump set from a seed: anchors uniform on the direction
    /// sphere of T_center, widths and signed weights from fixed ranges.
    pub fn generate(
        space: &AmbientSpace,
        center: &Point,
        amplitude: f64,
        mode: &PerturbMode,
        seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let basis = space.tangent_basis(center);
        let mut bumps = Vec::with_capacity(mode.bumps);
        for _ in 0..mode.bumps {
            // Rejection-sample a direction in the unit ball, normalize.
            let dir = loop {
                let mut comps = [0.0f64; 3];
                for c in comps.iter_mut().take(space.dim) {
                    *c = rng.gen_range(-1.0..1.0);
                }
                let n2: f64 = comps.iter().map(|c| c * c).sum();
                if n2 > 1e-4 && n2 <= 1.0 {
                    let mut d = Vec4::zeros();
                    for (i, b) in basis.iter().enumerate() {
                        d += b * comps[i];
                    }
                    break d / n2.sqrt();
                }
            };
            let width = rng.gen_range(mode.width_min..=mode.width_max);
            let magnitude = rng.gen_range(0.5..1.0);
            let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            bumps.push(Bump { anchor: dir, width, weight: sign * magnitude });
        }
        let weight_norm = bumps.iter().map(|b| b.weight.abs()).sum::<f64>().max(1e-300);
        BumpSet { amplitude, bumps, weight_norm, seed }
    }

    /// B(d) in [-1, 1]: normalized sum of exp((<d, anchor> - 1)/width^2).
    fn eval(&self, space: &AmbientSpace, d: &JetVec) -> Jet2 {
        let mut acc = Jet2::constant(0.0);
        for b in &self.bumps {
            let anchor = jv_constant(&b.anchor);
            let dot = match space.kind {
                crate::ambient::SpaceKind::Euclidean => jv_dot(d, &anchor),
                crate::ambient::SpaceKind::Hyperbolic => jv_minkowski(d, &anchor),
            };
            let arg = (dot + (-1.0)) * (1.0 / (b.width * b.width));
            acc = acc + arg.exp() * b.weight;
        }
        acc * (1.0 / self.weight_norm)
    }
}

/// A catalog surface: radial profile rho over unit directions at a center,
/// optionally perturbed by a bump set.
#[derive(Clone, Debug)]
pub struct CatalogSurface {
    pub ambient: AmbientSpace,
    pub kind: ShapeKind,
    pub center: Point,
    pub bumps: Option<BumpSet>,
    pub label: String,
}

impl CatalogSurface {
    pub fn new(ambient: AmbientSpace, kind: ShapeKind, center: Point, label: &str) -> Result<Self> {
        match &kind {
            ShapeKind::Ball { radius } => {
                if !(*radius > 0.0) {
                    return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
                }
            }
            ShapeKind::Ellipsoid { semi } | ShapeKind::Superellipsoid { semi, .. } => {
                if ambient.is_hyperbolic() {
                    return Err(Error::Domain(
                        "ellipsoid-family shapes are Euclidean catalog entries".into(),
                    ));
                }
                for s in semi.iter().take(ambient.dim) {
                    if !(*s > 0.0) {
                        return Err(Error::Domain(format!("semiaxis must be positive, got {s}")));
                    }
                }
                if let ShapeKind::Superellipsoid { m, .. } = &kind {
                    if *m < 1 {
                        return Err(Error::Domain("superellipsoid exponent m must be >= 1".into()));
                    }
                }
            }
        }
        ambient.check_point(&center)?;
        Ok(CatalogSurface { ambient, kind, center, bumps: None, label: label.to_string() })
    }

    pub fn with_bumps(mut self, bumps: BumpSet) -> Self {
        self.bumps = Some(bumps);
        self
    }

    pub fn id(&self) -> String {
        match &self.bumps {
            None => self.label.clone(),
            Some(b) => format!("{}+bump(a={},seed={})", self.label, b.amplitude, b.seed),
        }
    }

    pub fn param_dim(&self) -> usize {
        self.ambient.dim - 1
    }

    pub fn domain(&self) -> [(f64, f64); 2] {
        let tau = 2.0 * std::f64::consts::PI;
        match self.ambient.dim {
            2 => [(0.0, tau), (0.0, 1.0)],
            _ => [(0.0, std::f64::consts::PI), (0.0, tau)],
        }
    }

    /// Unit direction field in T_center as jets.
    fn direction(&self, basis: &[Vec4], u: Jet2, v: Jet2) -> JetVec {
        match self.ambient.dim {
            2 => {
                let e1 = jv_constant(&basis[0]);
                let e2 = jv_constant(&basis[1]);
                jv_add(&jv_scale(&e1, u.cos()), &jv_scale(&e2, u.sin()))
            }
            _ => {
                let e1 = jv_constant(&basis[0]);
                let e2 = jv_constant(&basis[1]);
                let e3 = jv_constant(&basis[2]);
                let su = u.sin();
                let a = jv_scale(&e1, su * v.cos());
                let b = jv_scale(&e2, su * v.sin());
                let c = jv_scale(&e3, u.cos());
                jv_add(&jv_add(&a, &b), &c)
            }
        }
    }

    /// Radial profile rho(d) of the unperturbed shape. `comps` are the
    /// direction components in the center's tangent basis.
    fn base_radius(&self, comps: &[Jet2; 3]) -> Jet2 {
        match &self.kind {
            ShapeKind::Ball { radius } => Jet2::constant(*radius),
            ShapeKind::Ellipsoid { semi } => {
                let mut acc = Jet2::constant(0.0);
                for i in 0..self.ambient.dim {
                    let t = comps[i] * (1.0 / semi[i]);
                    acc = acc + t * t;
                }
                acc.powf(-0.5)
            }
            ShapeKind::Superellipsoid { semi, m } => {
                let mut acc = Jet2::constant(0.0);
                for i in 0..self.ambient.dim {
                    let t = comps[i] * (1.0 / semi[i]);
                    acc = acc + t.powi(2 * *m as i32);
                }
                acc.powf(-0.5 / (*m as f64))
            }
        }
    }

    /// Position jets X(u, v) = exp_center(rho * d).
    pub fn position(&self, u: Jet2, v: Jet2) -> JetVec {
        let basis = self.ambient.tangent_basis(&self.center);
        let d = self.direction(&basis, u, v);
        // Direction components in the basis for the radial profile.
        let comps = match self.ambient.dim {
            2 => [u.cos(), u.sin(), Jet2::constant(0.0)],
            _ => [u.sin() * v.cos(), u.sin() * v.sin(), u.cos()],
        };
        let mut rho = self.base_radius(&comps);
        if let Some(bumps) = &self.bumps {
            rho = rho + bumps.eval(&self.ambient, &d) * bumps.amplitude;
        }
        let o = jv_constant(&self.center.0);
        if self.ambient.is_hyperbolic() {
            let rc = self.ambient.curvature_scale.sqrt();
            let cs = (rho * rc).cosh();
            let sn = (rho * rc).sinh() * (1.0 / rc);
            jv_add(&jv_scale(&o, cs), &jv_scale(&d, sn))
        } else {
            jv_add(&o, &jv_scale(&d, rho))
        }
    }

    /// Minimum of the radial profile over a dense parameter grid; used by the
    /// embeddedness check for perturbations.
    pub fn min_radius_sampled(&self) -> f64 {
        let dom = self.domain();
        let (nu, nv) = if self.ambient.dim == 2 { (256, 1) } else { (96, 192) };
        let mut min = f64::INFINITY;
        for i in 0..nu {
            let u = dom[0].0 + (dom[0].1 - dom[0].0) * (i as f64 + 0.5) / nu as f64;
            for j in 0..nv {
                let v = dom[1].0 + (dom[1].1 - dom[1].0) * (j as f64 + 0.5) / nv as f64;
                let p = self.position(Jet2::constant(u), Jet2::constant(v));
                let pt = Point(Vector4::new(p[0].v, p[1].v, p[2].v, p[3].v));
                let r = self.ambient.distance(&self.center, &self.ambient.renormalize(pt));
                min = min.min(r);
            }
        }
        min
    }
}

/// Chart over a catalog surface.
pub struct CatalogChart {
    pub surf: Arc<CatalogSurface>,
}

impl Chart for CatalogChart {
    fn param_dim(&self) -> usize {
        self.surf.param_dim()
    }

    fn domain(&self) -> [(f64, f64); 2] {
        self.surf.domain()
    }

    fn frame(&self, u: f64, v: f64) -> Result<ChartFrame> {
        let jets = self.surf.position(Jet2::var_u(u), Jet2::var_v(v));
        let space = self.surf.ambient;
        let center = self.surf.center;
        let outward = move |p: &Point| -> Vec4 {
            match space.kind {
                crate::ambient::SpaceKind::Euclidean => p.0 - center.0,
                crate::ambient::SpaceKind::Hyperbolic => -space.log_map(p, &center),
            }
        };
        frame_from_jets(&space, &jets, &outward, self.param_dim(), u, v)
    }

    fn position_jets(&self, u: f64, v: f64) -> Option<JetVec> {
        Some(self.surf.position(Jet2::var_u(u), Jet2::var_v(v)))
    }
}

// ---------------------------------------------------------------------------
// Wrappers: normal flow and orientation flip.
// ---------------------------------------------------------------------------

/// Outer parallel chart: every point flows distance t along its normal
/// geodesic. First-order data of the flowed chart is closed-form in the base
/// frame, so its shape operator is an independent route against the
/// principal-curvature transport formula.
pub struct FlowedChart {
    pub base: Arc<dyn Chart>,
    pub space: AmbientSpace,
    pub t: f64,
}

impl Chart for FlowedChart {
    fn param_dim(&self) -> usize {
        self.base.param_dim()
    }

    fn domain(&self) -> [(f64, f64); 2] {
        self.base.domain()
    }

    fn node_hint(&self, order: usize) -> [usize; 2] {
        self.base.node_hint(order)
    }

    fn frame(&self, u: f64, v: f64) -> Result<ChartFrame> {
        let f = self.base.frame(u, v)?;
        let s = &self.space;
        let (cs, sn) = (s.cs(self.t), s.sn(self.t));
        let c = s.curvature_scale;
        let point = s.renormalize(Point(f.point.0 * cs + f.normal * sn));
        let normal = f.point.0 * (c * sn) + f.normal * cs;
        let mut tangents = [Vec4::zeros(); 2];
        let mut dnormal = [Vec4::zeros(); 2];
        for j in 0..f.dim {
            tangents[j] = f.tangents[j] * cs + f.dnormal[j] * sn;
            dnormal[j] = f.tangents[j] * (c * sn) + f.dnormal[j] * cs;
        }
        let out = frame_from_first_order(s, point, tangents, normal, dnormal, f.dim);
        if out.area_element() <= 0.0 {
            return Err(Error::FlowSingularity {
                t: self.t,
                kappa: f64::NAN,
                factor: out.area_element(),
            });
        }
        Ok(out)
    }

    fn position_jets(&self, _u: f64, _v: f64) -> Option<JetVec> {
        // The flowed position involves the base normal, which is not a jet
        // function of the base position alone.
        None
    }
}

/// Orientation-reversing wrapper: same geometry, inward normal.
pub struct FlippedChart {
    pub inner: Arc<dyn Chart>,
}

impl Chart for FlippedChart {
    fn param_dim(&self) -> usize {
        self.inner.param_dim()
    }

    fn domain(&self) -> [(f64, f64); 2] {
        self.inner.domain()
    }

    fn node_hint(&self, order: usize) -> [usize; 2] {
        self.inner.node_hint(order)
    }

    fn frame(&self, u: f64, v: f64) -> Result<ChartFrame> {
        let mut f = self.inner.frame(u, v)?;
        f.normal = -f.normal;
        for j in 0..f.dim {
            f.dnormal[j] = -f.dnormal[j];
        }
        f.second = -f.second;
        Ok(f)
    }

    fn position_jets(&self, u: f64, v: f64) -> Option<JetVec> {
        self.inner.position_jets(u, v)
    }

    fn exact_area(&self) -> Option<f64> {
        self.inner.exact_area()
    }
}
