//! Distance fields around closed hypersurfaces: nearest points, signed
//! distance, Hausdorff estimates, reach certification, and enclosed volume.
//!
//! Smooth atlases answer nearest-point queries by damped Newton on exact
//! position jets (multistart over a coarse parameter grid); meshes use a
//! bounding-volume hierarchy with exact point-to-cell kernels in both
//! ambients. Signed distance is negative inside (on the side the outward
//! normal points away from).

use crate::ambient::{AmbientSpace, Point, SpaceKind, Vec4};
use crate::chart::Chart;
use crate::error::{Error, Result};
use crate::hypersurface::{Atlas, Hypersurface, Provenance, Repr, ScanGrid};
use crate::jet::{jv_constant, jv_dot, jv_minkowski, Jet2};
use crate::mesh::{Cells, MeshData};
use crate::numeric::pairwise_sum;
use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

/// Result of a nearest-point query.
#[derive(Clone, Debug)]
pub struct Nearest {
    pub point: Point,
    pub distance: f64,
    /// (chart index, u, v) when the query resolved on an atlas.
    pub chart: Option<(usize, f64, f64)>,
    /// Cell index when the query resolved on a mesh.
    pub cell: Option<usize>,
}

#[derive(Clone, Debug)]
pub struct SignedDistance {
    pub signed: f64,
    pub nearest: Nearest,
}

// ---------------------------------------------------------------------------
// Atlas nearest point: multistart damped Newton on the distance surrogate.
// ---------------------------------------------------------------------------

/// Distance surrogate as a jet: Euclidean |f - q|^2 / 2, hyperbolic
/// -c <f, q> (monotone in distance, >= 1 on the sheet).
fn surrogate(space: &AmbientSpace, chart: &dyn Chart, q: &Vec4, u: f64, v: f64) -> Option<Jet2> {
    let f = chart.position_jets(u, v)?;
    let qc = jv_constant(q);
    Some(match space.kind {
        SpaceKind::Euclidean => {
            let d = [f[0] - qc[0], f[1] - qc[1], f[2] - qc[2], f[3] - qc[3]];
            jv_dot(&d, &d) * 0.5
        }
        SpaceKind::Hyperbolic => jv_minkowski(&f, &qc) * (-space.curvature_scale),
    })
}

fn surrogate_to_distance(space: &AmbientSpace, phi: f64) -> f64 {
    match space.kind {
        SpaceKind::Euclidean => (2.0 * phi).max(0.0).sqrt(),
        SpaceKind::Hyperbolic => phi.max(1.0).acosh() / space.curvature_scale.sqrt(),
    }
}

/// Wrap or clamp chart parameters into the domain.
fn confine(dom: [(f64, f64); 2], periodic: [bool; 2], mut u: f64, mut v: f64) -> (f64, f64) {
    let fix = |x: f64, (a, b): (f64, f64), per: bool| -> f64 {
        if per {
            let w = b - a;
            let mut y = (x - a) % w;
            if y < 0.0 {
                y += w;
            }
            a + y
        } else {
            x.clamp(a, b)
        }
    };
    u = fix(u, dom[0], periodic[0]);
    v = fix(v, dom[1], periodic[1]);
    (u, v)
}

/// A chart parameter direction is periodic when it spans a full turn.
fn periodicity(chart: &dyn Chart) -> [bool; 2] {
    let dom = chart.domain();
    let tau = 2.0 * std::f64::consts::PI;
    [
        (dom[0].1 - dom[0].0 - tau).abs() < 1e-12,
        (dom[1].1 - dom[1].0 - tau).abs() < 1e-12,
    ]
}

fn newton_refine(
    space: &AmbientSpace,
    chart: &dyn Chart,
    q: &Vec4,
    start: (f64, f64),
) -> Option<(f64, f64, f64)> {
    let dom = chart.domain();
    let per = periodicity(chart);
    let dim = chart.param_dim();
    let (mut u, mut v) = start;
    let mut phi = surrogate(space, chart, q, u, v)?;
    for _ in 0..60 {
        let (gu, gv) = (phi.du, if dim == 2 { phi.dv } else { 0.0 });
        let gnorm = (gu * gu + gv * gv).sqrt();
        if gnorm < 1e-13 * (1.0 + phi.v.abs()) {
            break;
        }
        // Newton direction with Levenberg damping.
        let mut lambda = 0.0;
        let mut improved = false;
        for _ in 0..12 {
            let (du, dv) = if dim == 1 {
                let h = phi.duu + lambda;
                if h.abs() < 1e-300 {
                    (-gu.signum(), 0.0)
                } else {
                    (-gu / h, 0.0)
                }
            } else {
                let (a, b, c) = (phi.duu + lambda, phi.duv, phi.dvv + lambda);
                let det = a * c - b * b;
                if det.abs() < 1e-300 || a + c <= 0.0 {
                    (-gu, -gv)
                } else {
                    ((-gu * c + gv * b) / det, (gu * b - gv * a) / det)
                }
            };
            let step = (du * du + dv * dv).sqrt();
            let scale = if step > 0.5 { 0.5 / step } else { 1.0 };
            let (nu, nv) = confine(dom, per, u + scale * du, v + scale * dv);
            if let Some(next) = surrogate(space, chart, q, nu, nv) {
                if next.v < phi.v {
                    u = nu;
                    v = nv;
                    phi = next;
                    improved = true;
                    break;
                }
            }
            lambda = if lambda == 0.0 { 1e-6 * (1.0 + phi.duu.abs() + phi.dvv.abs()) } else { lambda * 10.0 };
        }
        if !improved {
            break;
        }
    }
    Some((phi.v, u, v))
}

/// Position of a chart point, preferring jets (nonsingular at chart poles).
fn chart_point(space: &AmbientSpace, chart: &dyn Chart, u: f64, v: f64) -> Result<Point> {
    if let Some(jets) = chart.position_jets(u, v) {
        return Ok(space.renormalize(Point(Vec4::new(jets[0].v, jets[1].v, jets[2].v, jets[3].v))));
    }
    Ok(frame_nudged(chart, u, v)?.point)
}

/// Frame lookup with a small inward nudge when the exact parameters sit on a
/// degenerate locus (chart poles).
fn frame_nudged(chart: &dyn Chart, u: f64, v: f64) -> Result<crate::chart::ChartFrame> {
    match chart.frame(u, v) {
        Ok(f) => Ok(f),
        Err(first) => {
            let dom = chart.domain();
            let hu = 1e-7 * (dom[0].1 - dom[0].0).max(1e-7);
            let hv = 1e-7 * (dom[1].1 - dom[1].0).max(1e-7);
            let mid = |x: f64, (a, b): (f64, f64), h: f64| -> [f64; 2] {
                [(x + h).min(b), (x - h).max(a)]
            };
            for nu in mid(u, dom[0], hu) {
                for nv in mid(v, dom[1], hv) {
                    if let Ok(f) = chart.frame(nu, nv) {
                        return Ok(f);
                    }
                }
            }
            Err(first)
        }
    }
}

/// Per-chart coarse scan grids, built once per surface and shared by clones.
fn scan_grids<'a>(surface: &'a Hypersurface, charts: &[Arc<dyn Chart>]) -> Result<&'a [ScanGrid]> {
    if let Some(g) = surface.scan.get() {
        return Ok(g);
    }
    let space = &surface.space;
    let mut grids = Vec::with_capacity(charts.len());
    // A handful of large charts get dense grids; patchwork atlases (offset
    // polytopes) spread a fixed position budget across their many small
    // charts and rely on Newton to finish the job.
    let n_charts = charts.len().max(1);
    for chart in charts {
        let dom = chart.domain();
        let dim = chart.param_dim();
        let (nu, nv) = if dim == 1 {
            ((2048 / n_charts).clamp(8, 96), 1usize)
        } else if n_charts <= 4 {
            (24usize, 48usize)
        } else {
            let per = ((40_000 / n_charts) as f64).sqrt().floor() as usize;
            let n = per.clamp(5, 24);
            (n, n)
        };
        let mut params = Vec::with_capacity(nu * nv);
        let mut pos = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            let u = dom[0].0 + (dom[0].1 - dom[0].0) * (i as f64 + 0.5) / nu as f64;
            for j in 0..nv {
                let v = if dim == 1 {
                    dom[1].0
                } else {
                    dom[1].0 + (dom[1].1 - dom[1].0) * (j as f64 + 0.5) / nv as f64
                };
                params.push((u, v));
                pos.push(chart_point(space, chart.as_ref(), u, v)?.0);
            }
        }
        grids.push(ScanGrid { params, pos });
    }
    Ok(surface.scan.get_or_init(|| grids))
}

/// Global nearest point over all charts of an atlas.
fn atlas_nearest(surface: &Hypersurface, q: &Point) -> Result<Nearest> {
    let space = &surface.space;
    let charts = surface
        .charts()
        .ok_or(Error::Geometry("nearest-point query needs an atlas".into()))?;
    if charts.iter().any(|c| {
        let d = c.domain();
        c.position_jets(0.5 * (d[0].0 + d[0].1), 0.5 * (d[1].0 + d[1].1)).is_none()
    }) {
        return Err(Error::Geometry(
            "nearest-point query needs charts with position jets".into(),
        ));
    }
    let grids = scan_grids(surface, charts)?;
    // Cheap surrogate against cached positions.
    let cheap = |p: &Vec4| -> f64 {
        match space.kind {
            SpaceKind::Euclidean => 0.5 * (p - q.0).norm_squared(),
            SpaceKind::Hyperbolic => -space.curvature_scale * space.inner(p, &q.0),
        }
    };
    let mut best: Option<(f64, usize, f64, f64)> = None;
    for (ci, chart) in charts.iter().enumerate() {
        let grid = &grids[ci];
        let mut seeds: Vec<(f64, usize)> =
            grid.pos.iter().enumerate().map(|(k, p)| (cheap(p), k)).collect();
        seeds.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let starts = if chart.param_dim() == 1 { 4 } else { 6 };
        for &(_, k) in seeds.iter().take(starts) {
            let (u, v) = grid.params[k];
            if let Some((phi, fu, fv)) = newton_refine(space, chart.as_ref(), &q.0, (u, v)) {
                if best.map_or(true, |(b, _, _, _)| phi < b) {
                    best = Some((phi, ci, fu, fv));
                }
            }
        }
    }
    let (phi, ci, u, v) = best.ok_or(Error::Geometry("empty atlas".into()))?;
    Ok(Nearest {
        point: chart_point(space, charts[ci].as_ref(), u, v)?,
        distance: surrogate_to_distance(space, phi),
        chart: Some((ci, u, v)),
        cell: None,
    })
}

// ---------------------------------------------------------------------------
// Mesh nearest point: exact cell kernels under a BVH.
// ---------------------------------------------------------------------------

/// Point-to-segment distance returning the nearest point.
fn nearest_on_segment(space: &AmbientSpace, a: &Point, b: &Point, q: &Point) -> (f64, Point) {
    match space.kind {
        SpaceKind::Euclidean => {
            let ab = b.0 - a.0;
            let t = (q.0 - a.0).dot(&ab) / ab.norm_squared().max(1e-300);
            let t = t.clamp(0.0, 1.0);
            let p = Point(a.0 + ab * t);
            ((q.0 - p.0).norm(), p)
        }
        SpaceKind::Hyperbolic => {
            // gamma(s) = (sn(L - s) a + sn(s) b)/sn(L); the surrogate
            // -c<q, gamma(s)> is alpha sinh(rc (L-s)) + beta sinh(rc s) up to
            // the 1/sn(L) factor, minimized in closed form.
            let c = space.curvature_scale;
            let rc = c.sqrt();
            let l = space.distance(a, b);
            if l < 1e-14 {
                return (space.distance(a, q), *a);
            }
            let alpha = -c * space.inner(&q.0, &a.0);
            let beta = -c * space.inner(&q.0, &b.0);
            let (cl, sl) = ((rc * l).cosh(), (rc * l).sinh());
            // d/ds [alpha sinh(rc(L-s)) + beta sinh(rc s)] = 0
            // => tanh(rc s) = (alpha cl - beta) / (alpha sl) ... rearranged:
            let denom = alpha * sl;
            let s = if denom.abs() < 1e-300 {
                0.0
            } else {
                let t = (alpha * cl - beta) / denom;
                if t >= 1.0 {
                    l
                } else if t <= -1.0 {
                    0.0
                } else {
                    (t.atanh() / rc).clamp(0.0, l)
                }
            };
            let eval = |s: f64| -> (f64, Point) {
                let w = a.0 * ((rc * (l - s)).sinh() / sl) + b.0 * ((rc * s).sinh() / sl);
                let p = space.renormalize(Point(w));
                (space.distance(q, &p), p)
            };
            // The stationary point may be a maximum for far-side queries;
            // compare with the endpoints.
            let cands = [eval(0.0), eval(s), eval(l)];
            cands
                .into_iter()
                .min_by(|x, y| x.0.partial_cmp(&y.0).unwrap())
                .unwrap()
        }
    }
}

/// Point-to-triangle distance returning the nearest point. Projection onto
/// the cell's (totally geodesic) plane, barycentric containment, and edge
/// fallback; exact in both ambients.
fn nearest_on_triangle(
    space: &AmbientSpace,
    a: &Point,
    b: &Point,
    c: &Point,
    q: &Point,
) -> (f64, Point) {
    let inside = match space.kind {
        SpaceKind::Euclidean => {
            let n = {
                let u = b.0 - a.0;
                let v = c.0 - a.0;
                Vec4::new(
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                    0.0,
                )
            };
            let nn = n.norm_squared();
            if nn < 1e-300 {
                None
            } else {
                let proj = q.0 - n * ((q.0 - a.0).dot(&n) / nn);
                // Barycentric coordinates of the in-plane projection.
                bary3(space, &a.0, &b.0, &c.0, &proj).and_then(|lam| {
                    if lam.iter().all(|&x| x >= 0.0) {
                        let p = Point(proj);
                        Some(((q.0 - proj).norm(), p))
                    } else {
                        None
                    }
                })
            }
        }
        SpaceKind::Hyperbolic => {
            // Minkowski-project q onto span{a, b, c}; if the projection has
            // nonnegative coordinates it normalizes to the interior nearest
            // point on the geodesic triangle.
            bary3(space, &a.0, &b.0, &c.0, &q.0).and_then(|lam| {
                if lam.iter().all(|&x| x >= 0.0) {
                    let w = a.0 * lam[0] + b.0 * lam[1] + c.0 * lam[2];
                    if -space.inner(&w, &w) <= 0.0 {
                        // Lightlike or spacelike projection: no interior
                        // minimum; fall through to the edges.
                        return None;
                    }
                    let p = space.renormalize(Point(w));
                    Some((space.distance(q, &p), p))
                } else {
                    None
                }
            })
        }
    };
    if let Some(hit) = inside {
        return hit;
    }
    let e1 = nearest_on_segment(space, a, b, q);
    let e2 = nearest_on_segment(space, b, c, q);
    let e3 = nearest_on_segment(space, c, a, q);
    [e1, e2, e3]
        .into_iter()
        .min_by(|x, y| x.0.partial_cmp(&y.0).unwrap())
        .unwrap()
}

/// Coefficients of the metric projection of q onto span{a, b, c}.
fn bary3(space: &AmbientSpace, a: &Vec4, b: &Vec4, c: &Vec4, q: &Vec4) -> Option<[f64; 3]> {
    let g = Matrix3::new(
        space.inner(a, a),
        space.inner(a, b),
        space.inner(a, c),
        space.inner(b, a),
        space.inner(b, b),
        space.inner(b, c),
        space.inner(c, a),
        space.inner(c, b),
        space.inner(c, c),
    );
    let rhs = Vector3::new(space.inner(q, a), space.inner(q, b), space.inner(q, c));
    let lam = g.lu().solve(&rhs)?;
    Some([lam[0], lam[1], lam[2]])
}

/// Axis-aligned bounding hierarchy over mesh cells. Hyperbolic pruning uses
/// the fact that -c <x, q> is linear in the ambient coordinates, so its
/// minimum over a box is attained at a corner and separates per coordinate.
struct Bvh {
    nodes: Vec<BvhNode>,
}

struct BvhNode {
    lo: Vec4,
    hi: Vec4,
    /// Leaf payload; internal nodes store (left, right) in `children`.
    cells: Vec<u32>,
    children: Option<(u32, u32)>,
}

impl Bvh {
    fn build(mesh: &MeshData) -> Bvh {
        let cell_points = |i: usize| -> Vec<Vec4> {
            match &mesh.cells {
                Cells::Segments(s) => s[i].iter().map(|&v| mesh.vertices[v].0).collect(),
                Cells::Triangles(t) => t[i].iter().map(|&v| mesh.vertices[v].0).collect(),
            }
        };
        let n = mesh.cells.len();
        let mut items: Vec<(u32, Vec4, Vec4, Vec4)> = (0..n)
            .map(|i| {
                let pts = cell_points(i);
                let mut lo = pts[0];
                let mut hi = pts[0];
                let mut mid = Vec4::zeros();
                for p in &pts {
                    mid += p;
                    for k in 0..4 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
                (i as u32, lo, hi, mid / pts.len() as f64)
            })
            .collect();
        let mut nodes = Vec::new();
        Self::split(&mut items[..], &mut nodes);
        Bvh { nodes }
    }

    fn split(items: &mut [(u32, Vec4, Vec4, Vec4)], nodes: &mut Vec<BvhNode>) -> u32 {
        let mut lo = items[0].1;
        let mut hi = items[0].2;
        for it in items.iter() {
            for k in 0..4 {
                lo[k] = lo[k].min(it.1[k]);
                hi[k] = hi[k].max(it.2[k]);
            }
        }
        let idx = nodes.len() as u32;
        nodes.push(BvhNode { lo, hi, cells: Vec::new(), children: None });
        if items.len() <= 4 {
            nodes[idx as usize].cells = items.iter().map(|it| it.0).collect();
            return idx;
        }
        // Split at the median along the widest centroid axis.
        let mut axis = 0;
        let mut width = -1.0;
        for k in 0..4 {
            let (mut a, mut b) = (f64::INFINITY, f64::NEG_INFINITY);
            for it in items.iter() {
                a = a.min(it.3[k]);
                b = b.max(it.3[k]);
            }
            if b - a > width {
                width = b - a;
                axis = k;
            }
        }
        let mid = items.len() / 2;
        items.sort_by(|x, y| x.3[axis].partial_cmp(&y.3[axis]).unwrap());
        let (l, r) = items.split_at_mut(mid);
        let lc = Self::split(l, nodes);
        let rc = Self::split(r, nodes);
        nodes[idx as usize].children = Some((lc, rc));
        idx
    }

    /// Lower bound on the distance from q to any point inside the box.
    fn box_lower_bound(&self, space: &AmbientSpace, node: &BvhNode, q: &Vec4) -> f64 {
        match space.kind {
            SpaceKind::Euclidean => {
                let mut d2 = 0.0;
                for k in 0..4 {
                    let t = (node.lo[k] - q[k]).max(0.0).max(q[k] - node.hi[k]);
                    d2 += t * t;
                }
                d2.sqrt()
            }
            SpaceKind::Hyperbolic => {
                // min over the box of -c<x,q> = c x0 q0 - c x.q (spatial):
                // linear, so minimize per coordinate.
                let c = space.curvature_scale;
                let mut m = 0.0;
                for k in 0..4 {
                    let coef = if k == 0 { c * q[0] } else { -c * q[k] };
                    m += (coef * node.lo[k]).min(coef * node.hi[k]);
                }
                m.max(1.0).acosh() / c.sqrt()
            }
        }
    }
}

fn mesh_nearest(mesh: &MeshData, bvh: &Bvh, q: &Point) -> Nearest {
    let space = &mesh.space;
    let mut best = (f64::INFINITY, *q, usize::MAX);
    let mut stack = vec![0u32];
    while let Some(ni) = stack.pop() {
        let node = &bvh.nodes[ni as usize];
        if self_lower(bvh, space, node, &q.0) >= best.0 {
            continue;
        }
        if let Some((l, r)) = node.children {
            // Visit the closer child first.
            let dl = self_lower(bvh, space, &bvh.nodes[l as usize], &q.0);
            let dr = self_lower(bvh, space, &bvh.nodes[r as usize], &q.0);
            if dl <= dr {
                stack.push(r);
                stack.push(l);
            } else {
                stack.push(l);
                stack.push(r);
            }
            continue;
        }
        for &ci in &node.cells {
            let (d, p) = match &mesh.cells {
                Cells::Segments(s) => {
                    let [a, b] = s[ci as usize];
                    nearest_on_segment(space, &mesh.vertices[a], &mesh.vertices[b], q)
                }
                Cells::Triangles(t) => {
                    let [a, b, c] = t[ci as usize];
                    nearest_on_triangle(
                        space,
                        &mesh.vertices[a],
                        &mesh.vertices[b],
                        &mesh.vertices[c],
                        q,
                    )
                }
            };
            if d < best.0 {
                best = (d, p, ci as usize);
            }
        }
    }
    Nearest { point: best.1, distance: best.0, chart: None, cell: Some(best.2) }
}

fn self_lower(bvh: &Bvh, space: &AmbientSpace, node: &BvhNode, q: &Vec4) -> f64 {
    bvh.box_lower_bound(space, node, q)
}

// ---------------------------------------------------------------------------
// Signed distance.
// ---------------------------------------------------------------------------

/// Signed distance from q to the surface: negative strictly inside the
/// compact side the outward normal leaves. Flowed atlases reduce to their
/// base (sd - t), which is exact while the flow stays within the tube.
pub fn signed_distance(surface: &Hypersurface, q: &Point) -> Result<SignedDistance> {
    surface.space.check_point(q)?;
    signed_distance_inner(surface, q)
}

fn signed_distance_inner(surface: &Hypersurface, q: &Point) -> Result<SignedDistance> {
    let space = &surface.space;
    match &surface.repr {
        Repr::Atlas(Atlas { charts, provenance }) => match provenance {
            Provenance::Flowed { base, t } => {
                let rec = signed_distance_inner(base, q)?;
                // Carry the nearest point forward through the flow when the
                // base query resolved chart parameters.
                let nearest = match rec.nearest.chart {
                    Some((ci, u, v)) if base.charts().is_some() => {
                        let frame = frame_nudged(base.charts().unwrap()[ci].as_ref(), u, v)?;
                        let (cs, sn) = (space.cs(*t), space.sn(*t));
                        let p = space
                            .renormalize(Point(frame.point.0 * cs + frame.normal * sn));
                        Nearest {
                            point: p,
                            distance: (rec.signed - t).abs(),
                            chart: Some((ci, u, v)),
                            cell: None,
                        }
                    }
                    _ => Nearest {
                        point: rec.nearest.point,
                        distance: (rec.signed - t).abs(),
                        chart: None,
                        cell: None,
                    },
                };
                Ok(SignedDistance { signed: rec.signed - t, nearest })
            }
            Provenance::Catalog(surf) => {
                let nearest = atlas_nearest(surface, q)?;
                let rho_q = space.distance(&surf.center, q);
                let sign = if rho_q < 1e-13 {
                    -1.0
                } else {
                    // Radial-graph inside test: compare against the profile
                    // radius along the direction of q.
                    let (u, v) = radial_params(surf, q);
                    let jets = surf.position(Jet2::constant(u), Jet2::constant(v));
                    let p = space.renormalize(Point(Vec4::new(
                        jets[0].v, jets[1].v, jets[2].v, jets[3].v,
                    )));
                    let rho_s = space.distance(&surf.center, &p);
                    if rho_q < rho_s {
                        -1.0
                    } else {
                        1.0
                    }
                };
                let sign = if surface.flipped { -sign } else { sign };
                Ok(SignedDistance { signed: sign * nearest.distance, nearest })
            }
            Provenance::Generic => {
                let nearest = atlas_nearest(surface, q)?;
                let (ci, u, v) = nearest.chart.unwrap();
                let frame = frame_nudged(charts[ci].as_ref(), u, v)?;
                let dir = match space.kind {
                    SpaceKind::Euclidean => q.0 - nearest.point.0,
                    SpaceKind::Hyperbolic => space.log_map(&nearest.point, q),
                };
                let side = space.inner(&frame.normal, &dir);
                let sign = if side >= 0.0 { 1.0 } else { -1.0 };
                Ok(SignedDistance { signed: sign * nearest.distance, nearest })
            }
        },
        Repr::Mesh(mesh) => {
            let bvh = mesh_bvh(surface, mesh);
            let nearest = mesh_nearest(mesh, &bvh, q);
            // Pseudo-normal sign: average incident normals when the nearest
            // point sits on a cell boundary.
            let cell = nearest.cell.unwrap();
            let geo = mesh.face_geometry(cell)?;
            let dir = match space.kind {
                SpaceKind::Euclidean => q.0 - nearest.point.0,
                SpaceKind::Hyperbolic => {
                    if nearest.distance < 1e-14 {
                        Vec4::zeros()
                    } else {
                        space.log_map(&nearest.point, q)
                    }
                }
            };
            let mut side = space.inner(&geo.normal, &dir);
            if side.abs() < 1e-12 * (1.0 + dir.norm()) {
                // Ambiguous: aggregate over all cells at the same distance.
                let mut acc = 0.0;
                for i in 0..mesh.cells.len() {
                    let (d, p) = match &mesh.cells {
                        Cells::Segments(s) => {
                            let [a, b] = s[i];
                            nearest_on_segment(space, &mesh.vertices[a], &mesh.vertices[b], q)
                        }
                        Cells::Triangles(t) => {
                            let [a, b, c] = t[i];
                            nearest_on_triangle(
                                space,
                                &mesh.vertices[a],
                                &mesh.vertices[b],
                                &mesh.vertices[c],
                                q,
                            )
                        }
                    };
                    if d <= nearest.distance * (1.0 + 1e-9) + 1e-13 {
                        let g = mesh.face_geometry(i)?;
                        let dir = match space.kind {
                            SpaceKind::Euclidean => q.0 - p.0,
                            SpaceKind::Hyperbolic => space.log_map(&p, q),
                        };
                        acc += space.inner(&g.normal, &dir);
                    }
                }
                side = acc;
            }
            let sign = if side >= 0.0 { 1.0 } else { -1.0 };
            Ok(SignedDistance { signed: sign * nearest.distance, nearest })
        }
    }
}

/// Chart parameters of the radial direction toward q on a catalog surface.
fn radial_params(surf: &crate::chart::CatalogSurface, q: &Point) -> (f64, f64) {
    let space = &surf.ambient;
    let dir = match space.kind {
        SpaceKind::Euclidean => q.0 - surf.center.0,
        SpaceKind::Hyperbolic => space.log_map(&surf.center, q),
    };
    let basis = space.tangent_basis(&surf.center);
    let mut comp = [0.0f64; 3];
    for (i, b) in basis.iter().enumerate() {
        comp[i] = space.inner(&dir, b);
    }
    let norm = (comp.iter().map(|c| c * c).sum::<f64>()).sqrt().max(1e-300);
    for c in comp.iter_mut() {
        *c /= norm;
    }
    if space.dim == 2 {
        let mut u = comp[1].atan2(comp[0]);
        if u < 0.0 {
            u += 2.0 * std::f64::consts::PI;
        }
        (u, 0.0)
    } else {
        let u = comp[2].clamp(-1.0, 1.0).acos();
        let mut v = comp[1].atan2(comp[0]);
        if v < 0.0 {
            v += 2.0 * std::f64::consts::PI;
        }
        (u, v)
    }
}

// Per-surface BVH cache, keyed by the mesh allocation address. The address
// alone is not identity (a dropped mesh's allocation can be reused for a new
// one), so each entry holds a Weak back-reference and is trusted only while
// the original Arc is still alive.
use std::collections::HashMap;
use std::sync::Mutex;
use std::sync::OnceLock as StdOnceLock;
use std::sync::Weak;

fn bvh_cache() -> &'static Mutex<HashMap<usize, (Weak<MeshData>, Arc<Bvh>)>> {
    static CACHE: StdOnceLock<Mutex<HashMap<usize, (Weak<MeshData>, Arc<Bvh>)>>> =
        StdOnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn mesh_bvh(_surface: &Hypersurface, mesh: &Arc<MeshData>) -> Arc<Bvh> {
    let key = Arc::as_ptr(mesh) as usize;
    let mut cache = bvh_cache().lock().unwrap();
    if let Some((held, bvh)) = cache.get(&key) {
        if held.upgrade().is_some_and(|alive| Arc::ptr_eq(&alive, mesh)) {
            return bvh.clone();
        }
    }
    if cache.len() > 64 {
        cache.retain(|_, (held, _)| held.strong_count() > 0);
    }
    let bvh = Arc::new(Bvh::build(mesh));
    cache.insert(key, (Arc::downgrade(mesh), bvh.clone()));
    bvh
}

// ---------------------------------------------------------------------------
// Hausdorff distance.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct HausdorffEstimate {
    pub value: f64,
    pub directed_ab: f64,
    pub directed_ba: f64,
    pub samples_a: usize,
    pub samples_b: usize,
    /// Heuristic sample spacing (max node weight^(1/dim)); the true
    /// Hausdorff distance can exceed the estimate by O(spacing).
    pub density: f64,
}

/// Symmetric Hausdorff distance estimated over quadrature samples of both
/// surfaces, capped at `max_samples` per direction.
pub fn hausdorff_distance(
    a: &Hypersurface,
    b: &Hypersurface,
    order: usize,
    max_samples: usize,
) -> Result<HausdorffEstimate> {
    let directed = |from: &Hypersurface, to: &Hypersurface| -> Result<(f64, usize, f64)> {
        let nodes = from.quadrature(order)?;
        let stride = (nodes.len() + max_samples - 1) / max_samples.max(1);
        let stride = stride.max(1);
        let mut sup: f64 = 0.0;
        let mut count = 0;
        let mut density: f64 = 0.0;
        for (i, n) in nodes.iter().enumerate() {
            density = density.max(n.weight.abs().powf(1.0 / n.dim as f64) * stride as f64);
            if i % stride != 0 {
                continue;
            }
            let sd = signed_distance(to, &n.point)?;
            sup = sup.max(sd.signed.abs());
            count += 1;
        }
        Ok((sup, count, density))
    };
    let (ab, na, da) = directed(a, b)?;
    let (ba, nb, db) = directed(b, a)?;
    Ok(HausdorffEstimate {
        value: ab.max(ba),
        directed_ab: ab,
        directed_ba: ba,
        samples_a: na,
        samples_b: nb,
        density: da.max(db),
    })
}

// ---------------------------------------------------------------------------
// Reach certification.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ReachCertificate {
    pub epsilon: f64,
    pub passed: bool,
    /// Smallest distance from any test ball center back to the surface.
    pub min_clearance: f64,
    /// Clearance the test demanded: epsilon - slack.
    pub required: f64,
    /// Tolerance charged against discrete sampling (mesh deviation and
    /// numerical roundoff).
    pub slack: f64,
    pub samples: usize,
    pub worst_point: Point,
}

/// Test locations for the double-ball certificate. Atlases use a uniform
/// inset parameter grid (Gauss nodes cluster badly for this purpose: they
/// can leave wide gaps near curvature concentrations); meshes use their
/// face centroids.
fn cert_samples(surface: &Hypersurface, order: usize) -> Result<Vec<(Point, Vec4)>> {
    match &surface.repr {
        Repr::Atlas(atlas) => {
            let mut out = Vec::new();
            let n_charts = atlas.charts.len().max(1);
            for chart in &atlas.charts {
                let dom = chart.domain();
                let dim = chart.param_dim();
                let (nu, nv) = if dim == 1 {
                    (((order.max(16) * 6) / n_charts).clamp(4, 96 * 6), 1)
                } else if n_charts <= 4 {
                    (order.max(24), 2 * order.max(24))
                } else {
                    let budget = (order.max(24) * order.max(24) * 2).max(8 * n_charts);
                    let n = ((budget / n_charts) as f64).sqrt().floor() as usize;
                    (n.clamp(3, 24), n.clamp(3, 24))
                };
                for i in 0..nu {
                    let u = dom[0].0 + (dom[0].1 - dom[0].0) * (i as f64 + 0.5) / nu as f64;
                    for j in 0..nv {
                        let v = if dim == 1 {
                            dom[1].0
                        } else {
                            dom[1].0 + (dom[1].1 - dom[1].0) * (j as f64 + 0.5) / nv as f64
                        };
                        let f = frame_nudged(chart.as_ref(), u, v)?;
                        out.push((f.point, f.normal));
                    }
                }
            }
            Ok(out)
        }
        Repr::Mesh(_) => Ok(surface
            .quadrature(order)?
            .into_iter()
            .map(|n| (n.point, n.normal))
            .collect()),
    }
}

/// Double-ball test: at every sample p the two geodesic centers
/// exp_p(+/- eps nu) must stay at distance >= eps - slack from the surface.
/// Passing certifies reach >= eps up to the sampling density.
pub fn certify_reach(surface: &Hypersurface, epsilon: f64, order: usize) -> Result<ReachCertificate> {
    if !(epsilon > 0.0) {
        return Err(Error::Config(format!("reach test epsilon must be positive, got {epsilon}")));
    }
    let samples = cert_samples(surface, order)?;
    let space = &surface.space;
    // Mesh slack: deviation of the smooth surface from its sampled
    // polyhedron (sagitta h^2 k / 8) plus the normal-cone spread the flat
    // facets impose on the test balls; atlas slack: roundoff only.
    let slack = match &surface.repr {
        Repr::Atlas(_) => 1e-9 * (1.0 + epsilon),
        Repr::Mesh(mesh) => {
            let mut h: f64 = 0.0;
            let edges: Vec<(usize, usize)> = match &mesh.cells {
                Cells::Segments(s) => s.iter().map(|[a, b]| (*a, *b)).collect(),
                Cells::Triangles(t) => t
                    .iter()
                    .flat_map(|[a, b, c]| [(*a, *b), (*b, *c), (*c, *a)])
                    .collect(),
            };
            for (x, y) in edges {
                h = h.max(space.distance(&mesh.vertices[x], &mesh.vertices[y]));
            }
            let mut kmax: f64 = 0.0;
            for f in mesh.vertex_frames().iter().flatten() {
                for k in &f.kappa {
                    kmax = kmax.max(k.abs());
                }
            }
            let sagitta = h * h * kmax / 8.0;
            sagitta + epsilon * (h * kmax) * (h * kmax) / 8.0 + 1e-9
        }
    };
    let required = epsilon - slack;
    let mut min_clearance = f64::INFINITY;
    let mut worst = samples[0].0;
    for (p, nu) in &samples {
        for side in [1.0, -1.0] {
            let center = space.exp_map(p, &(nu * (side * epsilon)));
            let d = signed_distance(surface, &center)?.signed.abs();
            if d < min_clearance {
                min_clearance = d;
                worst = *p;
            }
        }
    }
    Ok(ReachCertificate {
        epsilon,
        passed: min_clearance >= required,
        min_clearance,
        required,
        slack,
        samples: samples.len(),
        worst_point: worst,
    })
}

/// Largest epsilon that certifies, found by doubling then bisection.
/// Returns the certificate at the reported epsilon.
pub fn estimate_reach(surface: &Hypersurface, order: usize) -> Result<ReachCertificate> {
    // Upper seed: curvature bound from the quadrature nodes.
    let nodes = surface.quadrature(order)?;
    let mut kmax: f64 = 0.0;
    for n in &nodes {
        if n.valid_shape {
            for k in &n.kappa[..n.dim] {
                kmax = kmax.max(k.abs());
            }
        }
    }
    let mut hi = if kmax > 0.0 { 1.0 / kmax } else { 1.0 };
    let mut hi_cert = certify_reach(surface, hi, order)?;
    let mut lo = 0.0;
    let mut lo_cert = None;
    if hi_cert.passed {
        // Expand until failure or the test stops being meaningful.
        for _ in 0..8 {
            lo = hi;
            lo_cert = Some(hi_cert.clone());
            hi *= 2.0;
            hi_cert = certify_reach(surface, hi, order)?;
            if !hi_cert.passed {
                break;
            }
        }
        if hi_cert.passed {
            return Ok(hi_cert);
        }
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        let cert = certify_reach(surface, mid, order)?;
        if cert.passed {
            lo = mid;
            lo_cert = Some(cert);
        } else {
            hi = mid;
        }
        if hi - lo < 1e-4 * hi.max(1e-12) {
            break;
        }
    }
    lo_cert.ok_or(Error::Geometry("no positive reach could be certified".into()))
}

// ---------------------------------------------------------------------------
// Region volume.
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct VolumeEstimate {
    pub value: f64,
    /// Two-order refinement difference (flux) or one-sigma statistical error
    /// (Monte Carlo).
    pub stderr: f64,
    pub method: &'static str,
}

/// Enclosed volume via the divergence identity V = int_S G(rho) <grad rho,
/// nu> dA, where G(rho) solves G' + (n-1) (cs/sn)(rho) G = 1 and rho is the
/// distance to an arbitrary origin point (the vector field G grad rho has
/// divergence 1 everywhere, so the origin need not lie inside).
pub fn region_volume_flux(
    surface: &Hypersurface,
    order: usize,
    origin: Option<Point>,
) -> Result<VolumeEstimate> {
    let o = origin.unwrap_or_else(|| default_anchor(surface));
    let eval = |ord: usize| -> Result<f64> {
        let nodes = surface.quadrature(ord)?;
        let space = &surface.space;
        let mut parts = Vec::with_capacity(nodes.len());
        for n in &nodes {
            let rho = space.distance(&o, &n.point);
            if rho < 1e-14 {
                continue;
            }
            let grad = match space.kind {
                SpaceKind::Euclidean => (n.point.0 - o.0) / rho,
                SpaceKind::Hyperbolic => -space.log_map(&n.point, &o) / rho,
            };
            parts.push(n.weight * green_radial(space, rho) * space.inner(&grad, &n.normal));
        }
        Ok(pairwise_sum(&parts))
    };
    let coarse = eval(order)?;
    let fine = eval(order + 4)?;
    Ok(VolumeEstimate { value: fine, stderr: (fine - coarse).abs(), method: "flux" })
}

/// G(rho) = int_0^rho sn(s)^(n-1) ds / sn(rho)^(n-1).
fn green_radial(space: &AmbientSpace, rho: f64) -> f64 {
    let n = space.dim;
    match space.kind {
        SpaceKind::Euclidean => rho / n as f64,
        SpaceKind::Hyperbolic => {
            let rc = space.curvature_scale.sqrt();
            let x = rc * rho;
            match n {
                2 => (x.cosh() - 1.0) / (rc * x.sinh()),
                _ => {
                    let s = x.sinh();
                    (s * x.cosh() - x) / (2.0 * rc * s * s)
                }
            }
        }
    }
}

/// Antiderivative F(rho) = int_0^rho sn(s)^(n-1) ds; the enclosed volume of
/// a radial graph is the direction-sphere integral of F(rho(dir)).
pub fn radial_volume_antiderivative(space: &AmbientSpace, rho: f64) -> f64 {
    let n = space.dim;
    match space.kind {
        SpaceKind::Euclidean => rho.powi(n as i32) / n as f64,
        SpaceKind::Hyperbolic => {
            let c = space.curvature_scale;
            let x = c.sqrt() * rho;
            match n {
                2 => (x.cosh() - 1.0) / c,
                _ => (x.sinh() * x.cosh() - x) / (2.0 * c * c.sqrt()),
            }
        }
    }
}

/// Monte Carlo volume by rejection against the signed distance field,
/// sampling uniformly in an enclosing coordinate box (Klein-model box for
/// hyperbolic ambients, with the exact volume-element weight).
pub fn region_volume_mc(
    surface: &Hypersurface,
    samples: usize,
    seed: u64,
) -> Result<VolumeEstimate> {
    let space = &surface.space;
    let n = space.dim;
    // Enclosing box in sampling coordinates. Quadrature nodes are no good
    // here: Gauss points miss coordinate extremes by O(spacing^2) and a
    // clipped box biases the estimate low. Scan densely instead (mesh
    // vertices are exact extremes: cells are Klein-linear).
    let coord = |p: &Point| -> Vec<f64> {
        match space.kind {
            SpaceKind::Euclidean => (0..n).map(|i| p.0[i]).collect(),
            SpaceKind::Hyperbolic => {
                let k = space.to_klein(p);
                (0..n).map(|i| k[i]).collect()
            }
        }
    };
    let mut lo = vec![f64::INFINITY; n];
    let mut hi = vec![f64::NEG_INFINITY; n];
    let mut take = |p: &Point| {
        let c = coord(p);
        for i in 0..n {
            lo[i] = lo[i].min(c[i]);
            hi[i] = hi[i].max(c[i]);
        }
    };
    match &surface.repr {
        Repr::Atlas(atlas) => {
            for chart in &atlas.charts {
                let dom = chart.domain();
                let dim = chart.param_dim();
                let (nu, nv) = if dim == 1 { (1024usize, 1usize) } else { (128usize, 256usize) };
                for i in 0..=nu {
                    let u = dom[0].0 + (dom[0].1 - dom[0].0) * i as f64 / nu as f64;
                    for j in 0..=nv {
                        let v = if dim == 1 {
                            dom[1].0
                        } else {
                            dom[1].0 + (dom[1].1 - dom[1].0) * j as f64 / nv as f64
                        };
                        take(&chart_point(space, chart.as_ref(), u, v)?);
                    }
                }
            }
        }
        Repr::Mesh(mesh) => {
            for p in &mesh.vertices {
                take(p);
            }
        }
    }
    for i in 0..n {
        let pad = 1e-4 * (hi[i] - lo[i]).abs().max(1e-6);
        lo[i] -= pad;
        hi[i] += pad;
        if space.is_hyperbolic() {
            lo[i] = lo[i].max(-1.0 + 1e-12);
            hi[i] = hi[i].min(1.0 - 1e-12);
        }
    }
    let box_vol: f64 = (0..n).map(|i| hi[i] - lo[i]).product();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut used = 0usize;
    for _ in 0..samples {
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[i] = rng.gen_range(lo[i]..hi[i]);
        }
        let (p, w) = match space.kind {
            SpaceKind::Euclidean => {
                (space.point_from_slice(&x)?, 1.0)
            }
            SpaceKind::Hyperbolic => {
                let k2: f64 = x.iter().map(|t| t * t).sum();
                if k2 >= 1.0 - 1e-12 {
                    // Outside the Klein ball: weight 0.
                    used += 1;
                    continue;
                }
                let mut kv = Vec4::zeros();
                for i in 0..n {
                    kv[i] = x[i];
                }
                let p = space.from_klein(&kv)?;
                let c = space.curvature_scale;
                let w = (1.0 - k2).powf(-((n + 1) as f64) / 2.0) / c.powf(n as f64 / 2.0);
                (p, w)
            }
        };
        used += 1;
        let inside = signed_distance(surface, &p)?.signed < 0.0;
        let val = if inside { w } else { 0.0 };
        sum += val;
        sum2 += val * val;
    }
    let m = used.max(1) as f64;
    let mean = sum / m;
    let var = (sum2 / m - mean * mean).max(0.0);
    Ok(VolumeEstimate {
        value: box_vol * mean,
        stderr: box_vol * (var / m).sqrt(),
        method: "monte-carlo",
    })
}

/// Volume of the symmetric difference of two radial graphs about a common
/// center: the direction-sphere integral of |F(rho_a) - F(rho_b)|.
pub fn radial_symmetric_difference(
    a: &Hypersurface,
    b: &Hypersurface,
    order: usize,
) -> Result<f64> {
    let sa = a
        .catalog_surface()
        .ok_or(Error::Geometry("symmetric difference needs catalog surfaces".into()))?;
    let sb = b
        .catalog_surface()
        .ok_or(Error::Geometry("symmetric difference needs catalog surfaces".into()))?;
    let space = &sa.ambient;
    if sb.ambient.kind != space.kind
        || sb.ambient.dim != space.dim
        || (sa.center.0 - sb.center.0).norm() > 1e-12
    {
        return Err(Error::Geometry(
            "symmetric difference needs a shared ambient and center".into(),
        ));
    }
    let rho_of = |surf: &crate::chart::CatalogSurface, u: f64, v: f64| -> f64 {
        let jets = surf.position(Jet2::constant(u), Jet2::constant(v));
        let p = space.renormalize(Point(Vec4::new(jets[0].v, jets[1].v, jets[2].v, jets[3].v)));
        space.distance(&surf.center, &p)
    };
    let mut parts = Vec::new();
    if space.dim == 2 {
        let (xu, wu) =
            crate::numeric::gauss_legendre_on(order.max(4) * 8, 0.0, 2.0 * std::f64::consts::PI);
        for (u, w) in xu.iter().zip(&wu) {
            let fa = radial_volume_antiderivative(space, rho_of(sa, *u, 0.0));
            let fb = radial_volume_antiderivative(space, rho_of(sb, *u, 0.0));
            parts.push(w * (fa - fb).abs());
        }
    } else {
        let pi = std::f64::consts::PI;
        let (xu, wu) = crate::numeric::gauss_legendre_on(order.max(4) * 4, 0.0, pi);
        let (xv, wv) = crate::numeric::gauss_legendre_on(order.max(4) * 8, 0.0, 2.0 * pi);
        for (u, w1) in xu.iter().zip(&wu) {
            for (v, w2) in xv.iter().zip(&wv) {
                let fa = radial_volume_antiderivative(space, rho_of(sa, *u, *v));
                let fb = radial_volume_antiderivative(space, rho_of(sb, *u, *v));
                // Direction-sphere measure sin(u) du dv.
                parts.push(w1 * w2 * u.sin() * (fa - fb).abs());
            }
        }
    }
    Ok(pairwise_sum(&parts))
}

/// Natural flux origin: the catalog center when there is one, the mesh
/// anchor otherwise, the model origin as a last resort.
pub fn default_anchor(surface: &Hypersurface) -> Point {
    match &surface.repr {
        Repr::Atlas(a) => match &a.provenance {
            Provenance::Catalog(s) => s.center,
            Provenance::Flowed { base, .. } => default_anchor(base),
            Provenance::Generic => surface.space.origin(),
        },
        Repr::Mesh(m) => m.orientation_anchor.unwrap_or_else(|| surface.space.origin()),
    }
}
