//! Convex bodies with positive-reach boundaries: smoothed hulls of point
//! sets, geodesic balls, and the small-offset curvature limit they feed.
//!
//! The boundary of an eps-smoothed hull splits into totally geodesic facet
//! plates, cylindrical edge wedges, and spherical vertex caps. Each piece is
//! parametrized here in closed form: constant principal curvatures, an exact
//! patch area, and full second-order position jets, so distance queries and
//! reach certificates run on the same machinery as catalog surfaces.

use std::sync::Arc;

use nalgebra::Vector3;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ambient::{AmbientSpace, Point, SpaceKind, Vec4};
use crate::chart::{frame_from_first_order, CatalogSurface, Chart, ChartFrame, ShapeKind};
use crate::distfield::{region_volume_flux, signed_distance};
use crate::error::{Error, Result};
use crate::flow::{limit_total_curvature, LimitEstimate};
use crate::hypersurface::{Hypersurface, Provenance};
use crate::jet::{jv_add, jv_constant, jv_dot, jv_minkowski, jv_scale, Jet2, JetVec};
use crate::measures::total_mean_curvature;
use crate::numeric::richardson;
use crate::polytope::{polytope_from_points, spherical_polygon_area, PolytopeGeometry};

// ---------------------------------------------------------------------------
// Jet helpers shared by the offset charts.
// ---------------------------------------------------------------------------

/// cs and sn of a jet argument.
fn cs_sn_jets(space: &AmbientSpace, t: Jet2) -> (Jet2, Jet2) {
    match space.kind {
        SpaceKind::Euclidean => (Jet2::constant(1.0), t),
        SpaceKind::Hyperbolic => {
            let rc = space.curvature_scale.sqrt();
            ((t * rc).cosh(), (t * rc).sinh() * (1.0 / rc))
        }
    }
}

fn jv_inner(space: &AmbientSpace, a: &JetVec, b: &JetVec) -> Jet2 {
    match space.kind {
        SpaceKind::Euclidean => jv_dot(a, b),
        SpaceKind::Hyperbolic => jv_minkowski(a, b),
    }
}

/// Triangle map (1 - v) a + v ((1 - u) b + u c) over the unit square. The
/// v = 0 edge collapses onto the first corner; quadrature and certificate
/// samples stay strictly interior, so the degeneracy is never evaluated.
fn tri_jets(a: &Vec4, b: &Vec4, c: &Vec4, u: f64, v: f64) -> JetVec {
    let ju = Jet2::var_u(u);
    let jv = Jet2::var_v(v);
    let one = Jet2::constant(1.0);
    let w = [one - jv, jv * (one - ju), jv * ju];
    let mut out = [Jet2::constant(0.0); 4];
    for i in 0..4 {
        out[i] = w[0] * a[i] + w[1] * b[i] + w[2] * c[i];
    }
    out
}

/// Radial projection onto the hyperboloid sheet; affine combinations already
/// live in the ambient when it is euclidean.
fn jv_to_sheet(space: &AmbientSpace, y: &JetVec) -> JetVec {
    match space.kind {
        SpaceKind::Euclidean => *y,
        SpaceKind::Hyperbolic => {
            // <y, y> is strictly timelike inside the convex span of sheet
            // points, so the scaling below is well defined on the closure.
            let q = jv_minkowski(y, y);
            jv_scale(y, (q * (-space.curvature_scale)).sqrt().recip())
        }
    }
}

/// Normalization to a unit spacelike vector in the ambient metric.
fn jv_to_unit(space: &AmbientSpace, y: &JetVec) -> JetVec {
    let q = jv_inner(space, y, y);
    jv_scale(y, q.sqrt().recip())
}

fn jet_value(j: &JetVec) -> Vec4 {
    Vec4::new(j[0].v, j[1].v, j[2].v, j[3].v)
}

fn jet_du(j: &JetVec) -> Vec4 {
    Vec4::new(j[0].du, j[1].du, j[2].du, j[3].du)
}

fn jet_dv(j: &JetVec) -> Vec4 {
    Vec4::new(j[0].dv, j[1].dv, j[2].dv, j[3].dv)
}

/// Frame of the offset point X = cs(eps) p + sn(eps) n over base point p with
/// unit normal field n: the outward normal transports to
/// c sn(eps) p + cs(eps) n, and derivatives mix with the same coefficients.
fn offset_frame(
    space: &AmbientSpace,
    eps: f64,
    p: Vec4,
    dp: [Vec4; 2],
    n: Vec4,
    dn: [Vec4; 2],
    dim: usize,
) -> ChartFrame {
    let c = space.curvature_scale;
    let (cs, sn) = (space.cs(eps), space.sn(eps));
    let x = space.renormalize(Point(p * cs + n * sn));
    let tangents = [dp[0] * cs + dn[0] * sn, dp[1] * cs + dn[1] * sn];
    let normal = p * (c * sn) + n * cs;
    let dnormal = [dp[0] * (c * sn) + dn[0] * cs, dp[1] * (c * sn) + dn[1] * cs];
    frame_from_first_order(space, x, tangents, normal, dnormal, dim)
}

fn offset_jets(space: &AmbientSpace, eps: f64, p: &JetVec, n: &JetVec) -> JetVec {
    let (cs, sn) = (space.cs(eps), space.sn(eps));
    jv_add(&jv_scale(p, Jet2::constant(cs)), &jv_scale(n, Jet2::constant(sn)))
}

// ---------------------------------------------------------------------------
// Offset charts: plates, wedges, caps (and their 2D analogues).
// ---------------------------------------------------------------------------

/// Offset plate over a geodesic triangle facet: the normal is the facet's
/// constant outward normal, so both principal curvatures equal c sn/cs.
struct FacetPlateChart {
    space: AmbientSpace,
    eps: f64,
    corners: [Vec4; 3],
    normal: Vec4,
    /// Intrinsic facet area.
    area: f64,
}

impl FacetPlateChart {
    fn base(&self, u: f64, v: f64) -> JetVec {
        let y = tri_jets(&self.corners[0], &self.corners[1], &self.corners[2], u, v);
        jv_to_sheet(&self.space, &y)
    }
}

impl Chart for FacetPlateChart {
    fn param_dim(&self) -> usize {
        2
    }

    fn domain(&self) -> [(f64, f64); 2] {
        [(0.0, 1.0), (0.0, 1.0)]
    }

    fn frame(&self, u: f64, v: f64) -> Result<ChartFrame> {
        let p = self.base(u, v);
        let z = Vec4::zeros();
        Ok(offset_frame(
            &self.space,
            self.eps,
            jet_value(&p),
            [jet_du(&p), jet_dv(&p)],
            self.normal,
            [z, z],
            2,
        ))
    }

    fn position_jets(&self, u: f64, v: f64) -> Option<JetVec> {
        let p = self.base(u, v);
        Some(offset_jets(&self.space, self.eps, &p, &jv_constant(&self.normal)))
    }

    fn node_hint(&self, order: usize) -> [usize; 2] {
        // The unit-square domain hides the facet's physical size; scale the
        // node count with the longest geodesic side instead. Euclidean
        // plates integrate exactly at any order (the area element is linear
        // in v and the curvatures vanish).
        if matches!(self.space.kind, SpaceKind::Euclidean) {
            return [4, 4];
        }
        let d = |i: usize, j: usize| {
            self.space.distance(&Point(self.corners[i]), &Point(self.corners[j]))
        };
        let ext = d(0, 1).max(d(1, 2)).max(d(2, 0));
        // The triangle map collapses an edge, which slows Gauss-Legendre
        // convergence; half a node per unit length and order makes up for it.
        let n = ((order as f64 * ext / 2.0).ceil() as usize).max(4);
        [n, n]
    }

    fn exact_area(&self) -> Option<f64> {
        let cs = self.space.cs(self.eps);
        Some(cs * cs * self.area)
    }
}

/// Offset wedge over a hull edge: the base point runs along the geodesic
/// edge while the normal sweeps the exterior dihedral arc. Principal
/// curvatures are c sn/cs along the edge and cs/sn across it.
struct EdgeWedgeChart {
    space: AmbientSpace,
    eps: f64,
    /// First edge endpoint and the unit tangent toward the second.
    base: Vec4,
    dir: Vec4,
    len: f64,
    normal_a: Vec4,
    wedge: Vec4,
    angle: f64,
}

impl Chart for EdgeWedgeChart {
    fn param_dim(&self) -> usize {
        2
    }

    fn domain(&self) -> [(f64, f64); 2] {
        [(0.0, self.len), (0.0, self.angle)]
    }

    fn frame(&self, s: f64, th: f64) -> Result<ChartFrame> {
        let sp = &self.space;
        let c = sp.curvature_scale;
        let (cs_s, sn_s) = (sp.cs(s), sp.sn(s));
        let p = self.base * cs_s + self.dir * sn_s;
        let dp = self.base * (c * sn_s) + self.dir * cs_s;
        let n = self.normal_a * th.cos() + self.wedge * th.sin();
        let dn = self.wedge * th.cos() - self.normal_a * th.sin();
        let z = Vec4::zeros();
        Ok(offset_frame(sp, self.eps, p, [dp, z], n, [z, dn], 2))
    }

    fn position_jets(&self, s: f64, th: f64) -> Option<JetVec> {
        let (cs_s, sn_s) = cs_sn_jets(&self.space, Jet2::var_u(s));
        let p = jv_add(
            &jv_scale(&jv_constant(&self.base), cs_s),
            &jv_scale(&jv_constant(&self.dir), sn_s),
        );
        let th = Jet2::var_v(th);
        let n = jv_add(
            &jv_scale(&jv_constant(&self.normal_a), th.cos()),
            &jv_scale(&jv_constant(&self.wedge), th.sin()),
        );
        Some(offset_jets(&self.space, self.eps, &p, &n))
    }

    fn exact_area(&self) -> Option<f64> {
        Some(self.space.cs(self.eps) * self.space.sn(self.eps) * self.len * self.angle)
    }
}

/// Spherical cap triangle over a vertex normal cone: the base point is
/// pinned at the vertex while the normal sweeps a geodesic triangle of unit
/// directions. Both principal curvatures equal cs/sn.
struct VertexCapChart {
    space: AmbientSpace,
    eps: f64,
    apex: Vec4,
    rays: [Vec4; 3],
    /// Spherical area of the direction triangle.
    excess: f64,
}

impl VertexCapChart {
    fn field(&self, u: f64, v: f64) -> JetVec {
        let y = tri_jets(&self.rays[0], &self.rays[1], &self.rays[2], u, v);
        jv_to_unit(&self.space, &y)
    }
}

impl Chart for VertexCapChart {
    fn param_dim(&self) -> usize {
        2
    }

    fn domain(&self) -> [(f64, f64); 2] {
        [(0.0, 1.0), (0.0, 1.0)]
    }

    fn frame(&self, u: f64, v: f64) -> Result<ChartFrame> {
        let n = self.field(u, v);
        let z = Vec4::zeros();
        Ok(offset_frame(
            &self.space,
            self.eps,
            self.apex,
            [z, z],
            jet_value(&n),
            [jet_du(&n), jet_dv(&n)],
            2,
        ))
    }

    fn position_jets(&self, u: f64, v: f64) -> Option<JetVec> {
        let n = self.field(u, v);
        Some(offset_jets(&self.space, self.eps, &jv_constant(&self.apex), &n))
    }

    fn node_hint(&self, order: usize) -> [usize; 2] {
        // Scale nodes with the angular size of the direction triangle; a
        // sharp vertex cone can span well over a radian.
        let a = |i: usize, j: usize| {
            self.space.inner(&self.rays[i], &self.rays[j]).clamp(-1.0, 1.0).acos()
        };
        let ext = a(0, 1).max(a(1, 2)).max(a(2, 0));
        // Same collapsed-edge penalty as the facet plates.
        let n = ((order as f64 * ext / 2.0).ceil() as usize).max(4);
        [n, n]
    }

    fn exact_area(&self) -> Option<f64> {
        let sn = self.space.sn(self.eps);
        Some(sn * sn * self.excess)
    }
}

/// Offset of a polygon edge (2D plates).
struct SegmentPlateChart {
    space: AmbientSpace,
    eps: f64,
    base: Vec4,
    dir: Vec4,
    len: f64,
    normal: Vec4,
}

impl Chart for SegmentPlateChart {
    fn param_dim(&self) -> usize {
        1
    }

    fn domain(&self) -> [(f64, f64); 2] {
        [(0.0, self.len), (0.0, 0.0)]
    }

    fn frame(&self, s: f64, _v: f64) -> Result<ChartFrame> {
        let sp = &self.space;
        let c = sp.curvature_scale;
        let (cs_s, sn_s) = (sp.cs(s), sp.sn(s));
        let p = self.base * cs_s + self.dir * sn_s;
        let dp = self.base * (c * sn_s) + self.dir * cs_s;
        let z = Vec4::zeros();
        Ok(offset_frame(sp, self.eps, p, [dp, z], self.normal, [z, z], 1))
    }

    fn position_jets(&self, s: f64, _v: f64) -> Option<JetVec> {
        let (cs_s, sn_s) = cs_sn_jets(&self.space, Jet2::var_u(s));
        let p = jv_add(
            &jv_scale(&jv_constant(&self.base), cs_s),
            &jv_scale(&jv_constant(&self.dir), sn_s),
        );
        Some(offset_jets(&self.space, self.eps, &p, &jv_constant(&self.normal)))
    }

    fn exact_area(&self) -> Option<f64> {
        Some(self.space.cs(self.eps) * self.len)
    }
}

/// Offset arc over a polygon corner (2D caps).
struct CornerArcChart {
    space: AmbientSpace,
    eps: f64,
    apex: Vec4,
    normal_a: Vec4,
    wedge: Vec4,
    angle: f64,
}

impl Chart for CornerArcChart {
    fn param_dim(&self) -> usize {
        1
    }

    fn domain(&self) -> [(f64, f64); 2] {
        [(0.0, self.angle), (0.0, 0.0)]
    }

    fn frame(&self, th: f64, _v: f64) -> Result<ChartFrame> {
        let n = self.normal_a * th.cos() + self.wedge * th.sin();
        let dn = self.wedge * th.cos() - self.normal_a * th.sin();
        let z = Vec4::zeros();
        Ok(offset_frame(&self.space, self.eps, self.apex, [z, z], n, [dn, z], 1))
    }

    fn position_jets(&self, th: f64, _v: f64) -> Option<JetVec> {
        let th = Jet2::var_u(th);
        let n = jv_add(
            &jv_scale(&jv_constant(&self.normal_a), th.cos()),
            &jv_scale(&jv_constant(&self.wedge), th.sin()),
        );
        Some(offset_jets(&self.space, self.eps, &jv_constant(&self.apex), &n))
    }

    fn exact_area(&self) -> Option<f64> {
        Some(self.space.sn(self.eps) * self.angle)
    }
}

/// Outer parallel hypersurface of a hull at distance eps, assembled from
/// exact plate, wedge, and cap charts. Zero-angle ridges and zero-area cone
/// slivers (artifacts of triangulating flat faces) contribute nothing and
/// are dropped.
pub fn polytope_offset_atlas(poly: &PolytopeGeometry, eps: f64) -> Result<Hypersurface> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::Config(format!("offset distance must be positive, got {eps}")));
    }
    let space = poly.space;
    let mut charts: Vec<Arc<dyn Chart>> = Vec::new();
    match space.dim {
        2 => {
            for f in &poly.facets {
                let a = &poly.vertices[f.verts[0]];
                let b = &poly.vertices[f.verts[1]];
                let l = space.log_map(a, b);
                let dir = l / space.norm(&l).max(1e-300);
                charts.push(Arc::new(SegmentPlateChart {
                    space,
                    eps,
                    base: a.0,
                    dir,
                    len: f.area,
                    normal: f.normal,
                }));
            }
            for c in &poly.corners {
                if c.solid < 1e-12 {
                    continue;
                }
                let (n0, n1) = (c.cone[0], c.cone[1]);
                let wedge = (n1 - n0 * c.solid.cos()) / c.solid.sin();
                charts.push(Arc::new(CornerArcChart {
                    space,
                    eps,
                    apex: poly.vertices[c.vertex].0,
                    normal_a: n0,
                    wedge,
                    angle: c.solid,
                }));
            }
        }
        _ => {
            for f in &poly.facets {
                charts.push(Arc::new(FacetPlateChart {
                    space,
                    eps,
                    corners: [
                        poly.vertices[f.verts[0]].0,
                        poly.vertices[f.verts[1]].0,
                        poly.vertices[f.verts[2]].0,
                    ],
                    normal: f.normal,
                    area: f.area,
                }));
            }
            for r in &poly.ridges {
                if r.angle < 1e-9 {
                    continue;
                }
                charts.push(Arc::new(EdgeWedgeChart {
                    space,
                    eps,
                    base: poly.vertices[r.ends[0]].0,
                    dir: r.dir,
                    len: r.length,
                    normal_a: r.normal_a,
                    wedge: r.wedge,
                    angle: r.angle,
                }));
            }
            for c in &poly.corners {
                let apex = poly.vertices[c.vertex];
                let basis = space.tangent_basis(&apex);
                let comps: Vec<Vector3<f64>> = c
                    .cone
                    .iter()
                    .map(|n| {
                        Vector3::new(
                            space.inner(n, &basis[0]),
                            space.inner(n, &basis[1]),
                            space.inner(n, &basis[2]),
                        )
                    })
                    .collect();
                for i in 1..c.cone.len().saturating_sub(1) {
                    let excess = spherical_polygon_area(&[comps[0], comps[i], comps[i + 1]]);
                    if excess < 1e-12 {
                        continue;
                    }
                    charts.push(Arc::new(VertexCapChart {
                        space,
                        eps,
                        apex: apex.0,
                        rays: [c.cone[0], c.cone[i], c.cone[i + 1]],
                        excess,
                    }));
                }
            }
        }
    }
    let id = format!("hull({}v)|offset({:.6})", poly.vertices.len(), eps);
    Ok(Hypersurface::from_charts(space, charts, Provenance::Generic, &id))
}

// ---------------------------------------------------------------------------
// Convex bodies.
// ---------------------------------------------------------------------------

/// Parameters for seeded random hull bodies.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RandomBodyParams {
    /// Number of sample points (at least dim + 1).
    pub count: usize,
    /// Geodesic radius of the sampling ball around the origin.
    pub radius: f64,
    /// Rolling-ball smoothing radius applied to the hull.
    pub smoothing: f64,
}

impl Default for RandomBodyParams {
    fn default() -> Self {
        RandomBodyParams { count: 12, radius: 0.8, smoothing: 0.1 }
    }
}

/// Where a body came from; enough to reproduce it exactly.
#[derive(Clone, Debug)]
pub enum BodyProvenance {
    /// Catalog boundary (geodesic ball).
    Catalog { label: String },
    /// Smoothed hull of explicit points.
    Hull { points: Vec<Point> },
    /// Smoothed hull of seeded random points.
    Random { seed: u64, params: RandomBodyParams },
}

/// A geodesically convex body with a positive-reach boundary.
#[derive(Clone)]
pub struct ConvexBody {
    pub space: AmbientSpace,
    /// Boundary hypersurface, oriented outward.
    pub boundary: Hypersurface,
    /// Hull skeleton for smoothed-hull bodies; None for catalog bodies.
    pub polytope: Option<PolytopeGeometry>,
    /// Rolling-ball radius of hull bodies: the boundary is the offset of the
    /// hull at this distance, so its reach is at least this value. Zero for
    /// catalog bodies, whose reach is the shape's own.
    pub smoothing: f64,
    pub provenance: BodyProvenance,
}

/// Body bounded by the smoothing-offset of the hull of the given points. The
/// offset rounds edges and vertices into positive-reach pieces; the raw hull
/// is kept alongside for closed-form oracles.
pub fn hull_body(points: &[Point], space: &AmbientSpace, smoothing: f64) -> Result<ConvexBody> {
    if !(smoothing > 0.0) {
        return Err(Error::Config(format!("hull smoothing must be positive, got {smoothing}")));
    }
    let poly = polytope_from_points(space, points)?;
    let boundary = polytope_offset_atlas(&poly, smoothing)?;
    Ok(ConvexBody {
        space: *space,
        boundary,
        polytope: Some(poly),
        smoothing,
        provenance: BodyProvenance::Hull { points: points.to_vec() },
    })
}

/// Geodesic ball body centered at the origin.
pub fn ball_body(space: &AmbientSpace, radius: f64) -> Result<ConvexBody> {
    let label = format!("ball(r={radius})");
    let surf = CatalogSurface::new(*space, ShapeKind::Ball { radius }, space.origin(), &label)?;
    Ok(ConvexBody {
        space: *space,
        boundary: Hypersurface::catalog(surf),
        polytope: None,
        smoothing: 0.0,
        provenance: BodyProvenance::Catalog { label },
    })
}

/// Deterministic random hull body: `count` points drawn uniformly from the
/// coordinate ball matching the given geodesic radius, hulled and smoothed.
/// Identical seeds and parameters reproduce the body bit for bit. Draws that
/// fail to span (all points coplanar, say) are retried from the same stream,
/// so the result is still a pure function of the seed.
pub fn random_convex_body(
    space: &AmbientSpace,
    seed: u64,
    params: &RandomBodyParams,
) -> Result<ConvexBody> {
    if params.count < space.dim + 1 {
        return Err(Error::Config(format!(
            "{} points cannot span dimension {}",
            params.count, space.dim
        )));
    }
    if !(params.radius > 0.0) || !(params.smoothing > 0.0) {
        return Err(Error::Config("random body radius and smoothing must be positive".into()));
    }
    let coord_radius = match space.kind {
        SpaceKind::Euclidean => params.radius,
        // Klein-ball radius of the geodesic sampling ball.
        SpaceKind::Hyperbolic => (space.curvature_scale.sqrt() * params.radius).tanh(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last_err = None;
    for _ in 0..8 {
        let mut pts = Vec::with_capacity(params.count);
        while pts.len() < params.count {
            let mut k = [0.0f64; 3];
            for x in k.iter_mut().take(space.dim) {
                *x = rng.gen_range(-1.0..1.0);
            }
            let n2: f64 = k.iter().map(|x| x * x).sum();
            if n2 > 1.0 {
                continue;
            }
            let v = Vec4::new(k[0], k[1], k[2], 0.0) * coord_radius;
            let p = match space.kind {
                SpaceKind::Euclidean => Point(v),
                SpaceKind::Hyperbolic => space.from_klein(&v)?,
            };
            pts.push(p);
        }
        match hull_body(&pts, space, params.smoothing) {
            Ok(mut body) => {
                body.provenance = BodyProvenance::Random { seed, params: *params };
                return Ok(body);
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::Geometry("random body generation failed".into())))
}

// ---------------------------------------------------------------------------
// Convexity sampling and the sphere-volume gap.
// ---------------------------------------------------------------------------

/// Result of a sampled geodesic-convexity test.
#[derive(Clone, Debug)]
pub struct ConvexityReport {
    pub pairs: usize,
    /// Interior geodesic points actually tested (three per usable pair).
    pub checked: usize,
    /// Largest signed distance seen at any sampled point; at most zero, up
    /// to solver tolerance, on a convex body.
    pub max_signed: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Samples random pairs of boundary points and verifies that interior points
/// of the connecting geodesic stay inside the body (signed distance at most
/// `tol`).
pub fn convexity_check(
    body: &ConvexBody,
    pairs: usize,
    tol: f64,
    seed: u64,
) -> Result<ConvexityReport> {
    let nodes = body.boundary.quadrature(6)?;
    if nodes.len() < 2 {
        return Err(Error::Geometry("convexity check needs at least two boundary nodes".into()));
    }
    let space = &body.space;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_signed = f64::NEG_INFINITY;
    let mut checked = 0usize;
    for _ in 0..pairs {
        let i = rng.gen_range(0..nodes.len());
        let j = rng.gen_range(0..nodes.len());
        let (a, b) = (&nodes[i].point, &nodes[j].point);
        if space.distance(a, b) < 1e-9 {
            continue;
        }
        let v = space.log_map(a, b);
        for t in [0.25, 0.5, 0.75] {
            let m = space.exp_map(a, &(v * t));
            let sd = signed_distance(&body.boundary, &m)?.signed;
            max_signed = max_signed.max(sd);
            checked += 1;
        }
    }
    Ok(ConvexityReport { pairs, checked, max_signed, tol, passed: max_signed <= tol })
}

/// Small-offset limit of the top total curvature M_(n-1) measured against
/// the unit-sphere volume. The gap is zero for euclidean convex bodies,
/// equals curvature times enclosed area in the hyperbolic plane, and is
/// monitored as nonnegative in hyperbolic 3-space.
#[derive(Clone, Debug)]
pub struct ConjectureGap {
    /// Extrapolated limit of the top-order total curvature.
    pub m_top: f64,
    /// Volume of the unit (n-1)-sphere.
    pub target: f64,
    /// m_top - target.
    pub gap: f64,
    pub error_estimate: f64,
    /// (eps, M_(n-1) at eps) pairs, coarsest first.
    pub levels: Vec<(f64, f64)>,
    /// Enclosed area of the body (hyperbolic plane only).
    pub enclosed_area: Option<f64>,
    /// |gap - c area| / (c area) (hyperbolic plane only).
    pub area_residual: Option<f64>,
    pub passed: bool,
}

/// Evaluates the sphere-volume gap of a convex body by shrinking offsets:
/// hull bodies use exact offsets of their raw hull, catalog bodies use the
/// parallel flow of their boundary, both extrapolated to offset zero.
/// Total curvature of the shrinking offset family of a raw polytope,
/// extrapolated to zero offset. This limit is what defines M_r for a convex
/// body with polyhedral boundary; the offset profile at eps = 0 gives the
/// same numbers in closed form and serves as its oracle.
pub fn polytope_limit_curvature(
    poly: &PolytopeGeometry,
    r: isize,
    order: usize,
    eps0: f64,
    levels: usize,
) -> Result<LimitEstimate> {
    if levels < 2 {
        return Err(Error::Config("limit extrapolation needs at least two levels".into()));
    }
    if !(eps0 > 0.0) || !eps0.is_finite() {
        return Err(Error::Config(format!("offset scale must be positive, got {eps0}")));
    }
    let mut pairs = Vec::with_capacity(levels);
    for k in 0..levels {
        let eps = eps0 / (1u64 << k) as f64;
        let m = total_mean_curvature(&polytope_offset_atlas(poly, eps)?, r, order)?;
        pairs.push((eps, m.value));
    }
    let values: Vec<f64> = pairs.iter().map(|(_, v)| *v).collect();
    let (value, error_estimate) = richardson(&values, 2.0);
    let monotone = pairs.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12 * (1.0 + w[0].1.abs()));
    Ok(LimitEstimate { value, error_estimate, levels: pairs, monotone_nonincreasing: monotone })
}

/// Deterministic points spread over the raw hull boundary: every vertex plus
/// a per-facet grid (g points per edge in 2D, g*g per triangle in 3D). Used
/// for Hausdorff estimates against a reference surface.
pub fn hull_boundary_samples(poly: &PolytopeGeometry, g: usize) -> Vec<Point> {
    let space = &poly.space;
    let mut out: Vec<Point> = poly.vertices.clone();
    for f in &poly.facets {
        if space.dim == 2 {
            let a = &poly.vertices[f.verts[0]].0;
            let b = &poly.vertices[f.verts[1]].0;
            for t in 0..g {
                let s = (t as f64 + 0.5) / g as f64;
                // Normalized chords stay on the geodesic through a and b.
                out.push(space.renormalize(Point(a * (1.0 - s) + b * s)));
            }
        } else {
            let a = &poly.vertices[f.verts[0]].0;
            let b = &poly.vertices[f.verts[1]].0;
            let c = &poly.vertices[f.verts[2]].0;
            for i in 0..g {
                let u = (i as f64 + 0.5) / g as f64;
                for j in 0..g {
                    let v = (j as f64 + 0.5) / g as f64;
                    let y = a * (1.0 - v) + (b * (1.0 - u) + c * u) * v;
                    out.push(space.renormalize(Point(y)));
                }
            }
        }
    }
    out
}

/// Exact volume of the collar swept between the hull boundary and its offset
/// at distance eps: the offset area profile is a trig polynomial in the
/// offset distance and integrates in closed form.
fn offset_collar_volume(poly: &PolytopeGeometry, eps: f64) -> f64 {
    let s = &poly.space;
    let c = s.curvature_scale;
    let (cs, sn) = (s.cs(eps), s.sn(eps));
    match (s.kind, s.dim) {
        (SpaceKind::Euclidean, 2) => {
            poly.facet_total() * eps + poly.solid_total() * eps * eps / 2.0
        }
        (SpaceKind::Hyperbolic, 2) => {
            poly.facet_total() * sn + poly.solid_total() * (cs - 1.0) / c
        }
        (SpaceKind::Euclidean, _) => {
            poly.facet_total() * eps
                + poly.ridge_total() * eps * eps / 2.0
                + poly.solid_total() * eps.powi(3) / 3.0
        }
        (SpaceKind::Hyperbolic, _) => {
            poly.facet_total() * (eps + sn * cs) / 2.0
                + poly.ridge_total() * sn * sn / 2.0
                + poly.solid_total() * (sn * cs - eps) / (2.0 * c)
        }
    }
}

/// Region volume enclosed by the raw hull: closed form where one exists,
/// otherwise divergence-theorem flux over a thin offset minus the exact
/// collar volume between the hull and that offset.
pub fn hull_volume(poly: &PolytopeGeometry, order: usize) -> Result<f64> {
    if let Some(v) = poly.enclosed_volume() {
        return Ok(v);
    }
    let eps = 0.05;
    let outer = region_volume_flux(&polytope_offset_atlas(poly, eps)?, order, None)?.value;
    Ok(outer - offset_collar_volume(poly, eps))
}

pub fn conjecture_gap(body: &ConvexBody, order: usize) -> Result<ConjectureGap> {
    let space = &body.space;
    let n = space.dim;
    let r = (n - 1) as isize;
    let target = AmbientSpace::unit_sphere_volume(n)?;
    let (m_top, error_estimate, levels) = match &body.polytope {
        Some(poly) => {
            let eps0 = body.smoothing.min(0.1).max(1e-3);
            let lim = polytope_limit_curvature(poly, r, order, eps0, 5)?;
            (lim.value, lim.error_estimate, lim.levels)
        }
        None => {
            let lim = limit_total_curvature(&body.boundary, r, order, 0.1, 5)?;
            (lim.value, lim.error_estimate, lim.levels)
        }
    };
    let gap = m_top - target;
    let (enclosed_area, area_residual) = if space.is_hyperbolic() && n == 2 {
        let area = match &body.polytope {
            Some(poly) => poly.enclosed_volume(),
            None => Some(region_volume_flux(&body.boundary, order, None)?.value),
        };
        let residual = area.map(|a| {
            let scaled = space.curvature_scale * a;
            (gap - scaled).abs() / scaled.abs().max(1e-12)
        });
        (area, residual)
    } else {
        (None, None)
    };
    let passed = match (space.kind, n) {
        (SpaceKind::Euclidean, _) => gap.abs() <= 1e-3 * target,
        (SpaceKind::Hyperbolic, 2) => {
            gap >= -1e-6 * target && area_residual.is_some_and(|res| res <= 0.01)
        }
        (SpaceKind::Hyperbolic, _) => gap >= -1e-6 * target,
    };
    Ok(ConjectureGap {
        m_top,
        target,
        gap,
        error_estimate,
        levels,
        enclosed_area,
        area_residual,
        passed,
    })
}
