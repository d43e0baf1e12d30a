//! Convex hulls and polytope boundary geometry in both ambients.
//!
//! Hyperbolic hulls are computed in the Klein ball, where geodesics are
//! straight chords and hyperbolic convexity coincides with euclidean
//! convexity; all metric quantities (facet areas, ridge dihedral angles,
//! corner solid angles) are then evaluated back on the hyperboloid. Facet
//! normals of totally geodesic pieces are constant ambient vectors, which
//! keeps every downstream formula closed-form.

use crate::ambient::{AmbientSpace, Point, SpaceKind, Vec4};
use crate::error::{Error, Result};
use nalgebra::Vector3;
use std::collections::HashMap;

/// Top-dimensional boundary piece: a geodesic segment (n = 2, `verts` has
/// two entries) or a geodesic triangle (n = 3, winding outward).
#[derive(Clone, Debug)]
pub struct Facet {
    pub verts: Vec<usize>,
    /// Constant outward unit normal: ambient vector, tangent along the whole
    /// facet (Minkowski-orthogonal to its span in the hyperbolic case).
    pub normal: Vec4,
    /// Intrinsic measure: length for segments, area for triangles.
    pub area: f64,
}

/// Codimension-two piece (n = 3 only): an edge shared by exactly two facets,
/// carrying the wedge of outward directions between their normals.
#[derive(Clone, Debug)]
pub struct Ridge {
    pub ends: [usize; 2],
    pub length: f64,
    /// Unit tangent at `ends[0]` pointing along the edge.
    pub dir: Vec4,
    /// Normal of the first adjacent facet; the wedge rotates from here.
    pub normal_a: Vec4,
    /// Unit vector with n(theta) = cos(theta) normal_a + sin(theta) wedge
    /// sweeping to the second facet normal at theta = angle. Zero when the
    /// facets are coplanar.
    pub wedge: Vec4,
    /// Exterior dihedral angle in [0, pi).
    pub angle: f64,
}

/// Vertex normal cone: the set of outward directions at a hull vertex.
#[derive(Clone, Debug)]
pub struct Corner {
    pub vertex: usize,
    /// Bounding unit normals: the two edge normals (n = 2) or the incident
    /// facet normals in cyclic walk order around the vertex (n = 3).
    pub cone: Vec<Vec4>,
    /// Exterior angle (n = 2) or exterior solid angle (n = 3).
    pub solid: f64,
}

#[derive(Clone, Debug)]
pub struct PolytopeGeometry {
    pub space: AmbientSpace,
    /// Hull vertices (reindexed; every entry appears in some facet). For
    /// polygons the order is the boundary cycle.
    pub vertices: Vec<Point>,
    pub facets: Vec<Facet>,
    pub ridges: Vec<Ridge>,
    pub corners: Vec<Corner>,
    /// A point strictly inside the hull.
    pub interior: Point,
}

impl PolytopeGeometry {
    pub fn facet_total(&self) -> f64 {
        self.facets.iter().map(|f| f.area).sum()
    }

    /// Sum over ridges of length times exterior dihedral angle.
    pub fn ridge_total(&self) -> f64 {
        self.ridges.iter().map(|r| r.length * r.angle).sum()
    }

    /// Sum of exterior (solid) angles over the vertices.
    pub fn solid_total(&self) -> f64 {
        self.corners.iter().map(|c| c.solid).sum()
    }

    /// Closed-form total mean curvatures (M_0, ..., M_(n-1)) of the outer
    /// parallel hypersurface at distance eps > 0. Every boundary piece of the
    /// offset has constant principal curvatures, so each term is an exact
    /// product of trig factors with one of the three aggregate quantities.
    /// At eps = 0 the vector degenerates to the polytope's own limit values.
    pub fn offset_profile(&self, eps: f64) -> Vec<f64> {
        let s = &self.space;
        let c = s.curvature_scale;
        let (cs, sn) = (s.cs(eps), s.sn(eps));
        match s.dim {
            2 => {
                let l = self.facet_total();
                let a = self.solid_total();
                vec![cs * l + sn * a, c * sn * l + cs * a]
            }
            _ => {
                let a = self.facet_total();
                let w = self.ridge_total();
                let o = self.solid_total();
                vec![
                    cs * cs * a + sn * cs * w + sn * sn * o,
                    2.0 * c * sn * cs * a + (c * sn * sn + cs * cs) * w + 2.0 * sn * cs * o,
                    c * c * sn * sn * a + c * sn * cs * w + cs * cs * o,
                ]
            }
        }
    }

    /// Enclosed volume of the raw hull, where a closed form exists: shoelace
    /// (euclidean polygon), angle defect (hyperbolic polygon), facet pyramids
    /// (euclidean polytope). Hyperbolic 3-volumes have no elementary form.
    pub fn enclosed_volume(&self) -> Option<f64> {
        match (self.space.kind, self.space.dim) {
            (SpaceKind::Euclidean, 2) => {
                let k = self.vertices.len();
                let mut acc = 0.0;
                for i in 0..k {
                    let p = &self.vertices[i].0;
                    let q = &self.vertices[(i + 1) % k].0;
                    acc += p[0] * q[1] - q[0] * p[1];
                }
                Some(0.5 * acc.abs())
            }
            (SpaceKind::Hyperbolic, 2) => {
                Some((self.solid_total() - 2.0 * std::f64::consts::PI) / self.space.curvature_scale)
            }
            (SpaceKind::Euclidean, _) => {
                let mut acc = 0.0;
                for f in &self.facets {
                    let a = &self.vertices[f.verts[0]].0;
                    let b = &self.vertices[f.verts[1]].0;
                    let c = &self.vertices[f.verts[2]].0;
                    let (a3, b3, c3) = (spatial3(a), spatial3(b), spatial3(c));
                    acc += a3.dot(&b3.cross(&c3));
                }
                Some(acc.abs() / 6.0)
            }
            _ => None,
        }
    }
}

fn spatial3(v: &Vec4) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

// ---------------------------------------------------------------------------
// Coordinate hulls.
// ---------------------------------------------------------------------------

fn cross2(o: &[f64; 2], a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Monotone-chain hull. Returns indices of the hull vertices in
/// counterclockwise order; collinear boundary points are dropped.
pub fn hull_polygon(pts: &[[f64; 2]]) -> Result<Vec<usize>> {
    if pts.len() < 3 {
        return Err(Error::DegenerateHull(format!("{} points, need 3", pts.len())));
    }
    let scale = pts.iter().flat_map(|p| p.iter()).fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
    let eps = 1e-12 * scale * scale;
    let mut order: Vec<usize> = (0..pts.len()).collect();
    order.sort_by(|&i, &j| {
        pts[i]
            .partial_cmp(&pts[j])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let half = |iter: &mut dyn Iterator<Item = usize>| -> Vec<usize> {
        let mut chain: Vec<usize> = Vec::new();
        for i in iter {
            while chain.len() >= 2
                && cross2(&pts[chain[chain.len() - 2]], &pts[chain[chain.len() - 1]], &pts[i])
                    <= eps
            {
                chain.pop();
            }
            chain.push(i);
        }
        chain
    };
    let lower = half(&mut order.iter().copied());
    let upper = half(&mut order.iter().rev().copied());
    let mut hull = lower;
    hull.pop();
    hull.extend_from_slice(&upper[..upper.len().saturating_sub(1)]);
    if hull.len() < 3 {
        return Err(Error::DegenerateHull("all points collinear".into()));
    }
    Ok(hull)
}

fn orient3(pts: &[[f64; 3]], a: usize, b: usize, c: usize, d: usize) -> f64 {
    let v = |i: usize, j: usize| {
        Vector3::new(
            pts[j][0] - pts[i][0],
            pts[j][1] - pts[i][1],
            pts[j][2] - pts[i][2],
        )
    };
    v(a, b).cross(&v(a, c)).dot(&v(a, d))
}

/// Incremental hull: outward-wound triangles over the input indices.
/// Near-coplanar input faces come out triangulated (the slivers carry zero
/// dihedral angle downstream); points within tolerance of the current hull
/// are absorbed rather than added.
pub fn hull_triangles(pts: &[[f64; 3]]) -> Result<Vec<[usize; 3]>> {
    let n = pts.len();
    if n < 4 {
        return Err(Error::DegenerateHull(format!("{n} points, need 4")));
    }
    let scale = pts.iter().flat_map(|p| p.iter()).fold(0.0f64, |m, x| m.max(x.abs())).max(1e-12);
    let eps_vis = 1e-10 * scale * scale * scale;

    // Initial simplex: spread-out extremes in length, area, volume.
    let d2 = |i: usize, j: usize| -> f64 {
        (0..3).map(|k| (pts[i][k] - pts[j][k]).powi(2)).sum()
    };
    let p0 = (0..n)
        .min_by(|&i, &j| pts[i].partial_cmp(&pts[j]).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap();
    let p1 = (0..n).max_by(|&i, &j| d2(p0, i).total_cmp(&d2(p0, j))).unwrap();
    if d2(p0, p1) <= 1e-24 * scale * scale {
        return Err(Error::DegenerateHull("all points coincide".into()));
    }
    let area2 = |i: usize| -> f64 {
        let u = Vector3::new(
            pts[p1][0] - pts[p0][0],
            pts[p1][1] - pts[p0][1],
            pts[p1][2] - pts[p0][2],
        );
        let w = Vector3::new(pts[i][0] - pts[p0][0], pts[i][1] - pts[p0][1], pts[i][2] - pts[p0][2]);
        u.cross(&w).norm_squared()
    };
    let p2 = (0..n).max_by(|&i, &j| area2(i).total_cmp(&area2(j))).unwrap();
    if area2(p2) <= 1e-24 * scale.powi(4) {
        return Err(Error::DegenerateHull("all points collinear".into()));
    }
    let p3 = (0..n)
        .max_by(|&i, &j| orient3(pts, p0, p1, p2, i).abs().total_cmp(&orient3(pts, p0, p1, p2, j).abs()))
        .unwrap();
    if orient3(pts, p0, p1, p2, p3).abs() <= eps_vis {
        return Err(Error::DegenerateHull("all points coplanar".into()));
    }

    let mut faces: Vec<[usize; 3]> = Vec::new();
    let push_oriented = |faces: &mut Vec<[usize; 3]>, a: usize, b: usize, c: usize, behind: usize| {
        if orient3(pts, a, b, c, behind) > 0.0 {
            faces.push([a, c, b]);
        } else {
            faces.push([a, b, c]);
        }
    };
    push_oriented(&mut faces, p0, p1, p2, p3);
    push_oriented(&mut faces, p0, p1, p3, p2);
    push_oriented(&mut faces, p0, p2, p3, p1);
    push_oriented(&mut faces, p1, p2, p3, p0);

    let seed = [p0, p1, p2, p3];
    for p in 0..n {
        if seed.contains(&p) {
            continue;
        }
        let visible: Vec<usize> = (0..faces.len())
            .filter(|&f| orient3(pts, faces[f][0], faces[f][1], faces[f][2], p) > eps_vis)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let vis_set: std::collections::HashSet<usize> = visible.iter().copied().collect();
        // Neighbor lookup across directed edges of the live faces.
        let mut across: HashMap<(usize, usize), usize> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for e in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                across.insert(e, fi);
            }
        }
        let mut horizon: Vec<(usize, usize)> = Vec::new();
        for &fi in &visible {
            let f = faces[fi];
            for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
                match across.get(&(b, a)) {
                    Some(&g) if !vis_set.contains(&g) => horizon.push((a, b)),
                    Some(_) => {}
                    None => {
                        return Err(Error::Topology("hull update met an open edge".into()));
                    }
                }
            }
        }
        let mut keep: Vec<[usize; 3]> = faces
            .iter()
            .enumerate()
            .filter(|(fi, _)| !vis_set.contains(fi))
            .map(|(_, f)| *f)
            .collect();
        for (a, b) in horizon {
            keep.push([a, b, p]);
        }
        faces = keep;
    }

    // Closure check: every directed edge must pair with its reverse.
    let mut dir: HashMap<(usize, usize), usize> = HashMap::new();
    for f in &faces {
        for e in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            *dir.entry(e).or_insert(0) += 1;
        }
    }
    for (&(a, b), &k) in &dir {
        if k != 1 || dir.get(&(b, a)) != Some(&1) {
            return Err(Error::Topology(format!("unpaired hull edge ({a}, {b})")));
        }
    }
    Ok(faces)
}

// ---------------------------------------------------------------------------
// Ambient geometry of the hull.
// ---------------------------------------------------------------------------

/// Unit vector Minkowski-orthogonal to every vector of `span`, restricted to
/// the first `coord_len` coordinate slots. Must come out spacelike.
fn minkowski_complement_unit(space: &AmbientSpace, span: &[Vec4]) -> Option<Vec4> {
    // <v, s>_L = 0 is euclidean orthogonality to G s; orthogonalize the
    // coordinate basis against those and keep the largest residual.
    let g = |s: &Vec4| -> Vec4 {
        match space.kind {
            SpaceKind::Euclidean => *s,
            SpaceKind::Hyperbolic => {
                let mut t = *s;
                t[0] = -t[0];
                t
            }
        }
    };
    let mut dirs: Vec<Vec4> = Vec::new();
    for s in span {
        let mut w = g(s);
        for d in &dirs {
            w -= d * w.dot(d);
        }
        let nn = w.norm();
        if nn > 1e-13 {
            dirs.push(w / nn);
        }
    }
    let mut best: Option<(f64, Vec4)> = None;
    for i in 0..space.coord_len() {
        let mut e = Vec4::zeros();
        e[i] = 1.0;
        for d in &dirs {
            e -= d * e.dot(d);
        }
        let nn = e.norm();
        if best.as_ref().map_or(true, |(b, _)| nn > *b) {
            best = Some((nn, e));
        }
    }
    let (nn, v) = best?;
    if nn < 1e-10 {
        return None;
    }
    let v = v / nn;
    let q = space.inner(&v, &v);
    if q <= 1e-12 {
        return None;
    }
    Some(v / q.sqrt())
}

/// Outward unit facet normal through the given span, pointed away from the
/// interior point.
fn facet_normal(space: &AmbientSpace, span: &[Vec4], on_facet: &Point, interior: &Point) -> Result<Vec4> {
    let nu = match space.kind {
        SpaceKind::Euclidean => {
            // Span entries are facet points; normal is orthogonal to their
            // differences within the spatial slots.
            let diffs: Vec<Vec4> = span[1..].iter().map(|s| s - span[0]).collect();
            let mut padded = diffs;
            // Exclude unused coordinate slots by spanning them explicitly.
            for i in space.dim..4 {
                let mut e = Vec4::zeros();
                e[i] = 1.0;
                padded.push(e);
            }
            minkowski_complement_unit(space, &padded)
        }
        SpaceKind::Hyperbolic => minkowski_complement_unit(space, span),
    }
    .ok_or(Error::DegenerateHull("facet span has no spacelike normal".into()))?;
    let side = match space.kind {
        SpaceKind::Euclidean => nu.dot(&(interior.0 - on_facet.0)),
        SpaceKind::Hyperbolic => space.inner(&interior.0, &nu),
    };
    if side.abs() < 1e-13 {
        return Err(Error::DegenerateHull("interior point lies on a facet plane".into()));
    }
    Ok(if side > 0.0 { -nu } else { nu })
}

/// Interior angle at corner `at` of the geodesic triangle (at, b, c).
fn corner_angle(space: &AmbientSpace, at: &Point, b: &Point, c: &Point) -> f64 {
    let u = space.log_map(at, b);
    let v = space.log_map(at, c);
    let d = space.inner(&u, &v) / (space.norm(&u) * space.norm(&v)).max(1e-300);
    d.clamp(-1.0, 1.0).acos()
}

/// Area of the spherical polygon with the given unit corners (fan of signed
/// triangle excesses; corners of a convex normal cone sit in an open
/// hemisphere, where the formula is exact).
pub fn spherical_polygon_area(corners: &[Vector3<f64>]) -> f64 {
    let mut total = 0.0;
    for i in 1..corners.len().saturating_sub(1) {
        let (a, b, c) = (&corners[0], &corners[i], &corners[i + 1]);
        let num = a.dot(&b.cross(c));
        let den = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
        total += 2.0 * num.atan2(den);
    }
    total.abs()
}

/// Hull of the given ambient points together with the full boundary geometry
/// used by offset atlases: outward facet normals, ridge wedges, and vertex
/// normal cones.
pub fn polytope_from_points(space: &AmbientSpace, points: &[Point]) -> Result<PolytopeGeometry> {
    if points.len() < space.dim + 1 {
        return Err(Error::DegenerateHull(format!(
            "{} points cannot span dimension {}",
            points.len(),
            space.dim
        )));
    }
    for p in points {
        space.check_point(p)?;
    }
    let coords: Vec<Vec4> = points
        .iter()
        .map(|p| match space.kind {
            SpaceKind::Euclidean => p.0,
            SpaceKind::Hyperbolic => space.to_klein(p),
        })
        .collect();
    match space.dim {
        2 => polygon_geometry(space, points, &coords),
        _ => polytope_geometry_3d(space, points, &coords),
    }
}

fn interior_from_hull(space: &AmbientSpace, coords: &[Vec4], idx: &[usize]) -> Result<Point> {
    let mut avg = Vec4::zeros();
    for &i in idx {
        avg += coords[i];
    }
    avg /= idx.len() as f64;
    match space.kind {
        SpaceKind::Euclidean => Ok(Point(avg)),
        SpaceKind::Hyperbolic => space.from_klein(&avg),
    }
}

fn polygon_geometry(
    space: &AmbientSpace,
    points: &[Point],
    coords: &[Vec4],
) -> Result<PolytopeGeometry> {
    let flat: Vec<[f64; 2]> = coords.iter().map(|k| [k[0], k[1]]).collect();
    let cycle = hull_polygon(&flat)?;
    let interior = interior_from_hull(space, coords, &cycle)?;
    let vertices: Vec<Point> = cycle.iter().map(|&i| points[i]).collect();
    let k = vertices.len();
    let mut facets = Vec::with_capacity(k);
    for i in 0..k {
        let (a, b) = (&vertices[i], &vertices[(i + 1) % k]);
        let span: Vec<Vec4> = vec![a.0, b.0];
        let normal = facet_normal(space, &span, a, &interior)?;
        facets.push(Facet {
            verts: vec![i, (i + 1) % k],
            normal,
            area: space.distance(a, b),
        });
    }
    let mut corners = Vec::with_capacity(k);
    for i in 0..k {
        let prev = &facets[(i + k - 1) % k];
        let next = &facets[i];
        let cosang = space.inner(&prev.normal, &next.normal).clamp(-1.0, 1.0);
        corners.push(Corner {
            vertex: i,
            cone: vec![prev.normal, next.normal],
            solid: cosang.acos(),
        });
    }
    Ok(PolytopeGeometry { space: *space, vertices, facets, ridges: Vec::new(), corners, interior })
}

fn polytope_geometry_3d(
    space: &AmbientSpace,
    points: &[Point],
    coords: &[Vec4],
) -> Result<PolytopeGeometry> {
    let flat: Vec<[f64; 3]> = coords.iter().map(|k| [k[0], k[1], k[2]]).collect();
    let tris = hull_triangles(&flat)?;

    // Reindex to hull vertices.
    let mut used: Vec<usize> = tris.iter().flatten().copied().collect();
    used.sort_unstable();
    used.dedup();
    let lookup: HashMap<usize, usize> = used.iter().enumerate().map(|(n, &o)| (o, n)).collect();
    let vertices: Vec<Point> = used.iter().map(|&i| points[i]).collect();
    let interior = interior_from_hull(space, coords, &used)?;

    let mut facets = Vec::with_capacity(tris.len());
    for t in &tris {
        let v: Vec<usize> = t.iter().map(|i| lookup[i]).collect();
        let (a, b, c) = (&vertices[v[0]], &vertices[v[1]], &vertices[v[2]]);
        let normal = match space.kind {
            SpaceKind::Euclidean => {
                let n = spatial3(&(b.0 - a.0)).cross(&spatial3(&(c.0 - a.0)));
                let n4 = Vec4::new(n[0], n[1], n[2], 0.0);
                let nn = n4.norm();
                if nn < 1e-14 {
                    Vec4::zeros()
                } else {
                    let n4 = n4 / nn;
                    if n4.dot(&(interior.0 - a.0)) > 0.0 {
                        -n4
                    } else {
                        n4
                    }
                }
            }
            SpaceKind::Hyperbolic => facet_normal(space, &[a.0, b.0, c.0], a, &interior)?,
        };
        if normal == Vec4::zeros() {
            continue; // zero-area sliver triangle
        }
        let area = match space.kind {
            SpaceKind::Euclidean => {
                0.5 * spatial3(&(b.0 - a.0)).cross(&spatial3(&(c.0 - a.0))).norm()
            }
            SpaceKind::Hyperbolic => {
                let defect = std::f64::consts::PI
                    - corner_angle(space, a, b, c)
                    - corner_angle(space, b, c, a)
                    - corner_angle(space, c, a, b);
                defect.max(0.0) / space.curvature_scale
            }
        };
        facets.push(Facet { verts: v, normal, area });
    }

    // Ridges: undirected edges with their two incident facets.
    let mut edge_faces: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (fi, f) in facets.iter().enumerate() {
        for e in 0..3 {
            let (x, y) = (f.verts[e], f.verts[(e + 1) % 3]);
            let key = (x.min(y), x.max(y));
            edge_faces.entry(key).or_default().push(fi);
        }
    }
    let mut ridges = Vec::new();
    let mut keys: Vec<(usize, usize)> = edge_faces.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let fs = &edge_faces[&key];
        if fs.len() != 2 {
            return Err(Error::Topology(format!(
                "edge ({}, {}) borders {} facets",
                key.0,
                key.1,
                fs.len()
            )));
        }
        let (a, b) = (&vertices[key.0], &vertices[key.1]);
        let length = space.distance(a, b);
        let dir = {
            let l = space.log_map(a, b);
            let nn = space.norm(&l).max(1e-300);
            l / nn
        };
        let na = facets[fs[0]].normal;
        let nb = facets[fs[1]].normal;
        let cosang = space.inner(&na, &nb).clamp(-1.0, 1.0);
        let angle = cosang.acos();
        let wedge = if angle > 1e-9 {
            (nb - na * cosang) / angle.sin()
        } else {
            Vec4::zeros()
        };
        ridges.push(Ridge { ends: [key.0, key.1], length, dir, normal_a: na, wedge, angle });
    }

    // Corners: walk the facet cycle around each vertex.
    let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
    for (fi, f) in facets.iter().enumerate() {
        for &v in &f.verts {
            incident.entry(v).or_default().push(fi);
        }
    }
    let mut corners = Vec::with_capacity(vertices.len());
    for v in 0..vertices.len() {
        let inc = incident
            .get(&v)
            .ok_or(Error::Topology(format!("hull vertex {v} has no facets")))?;
        // Facets adjacent around v share an edge (v, x): map x -> facets.
        let mut by_other: HashMap<usize, Vec<usize>> = HashMap::new();
        for &fi in inc {
            for &w in &facets[fi].verts {
                if w != v {
                    by_other.entry(w).or_default().push(fi);
                }
            }
        }
        let mut walk = vec![inc[0]];
        while walk.len() < inc.len() {
            let cur = *walk.last().unwrap();
            let others: Vec<usize> =
                facets[cur].verts.iter().copied().filter(|&w| w != v).collect();
            let mut advanced = false;
            for &w in &others {
                let fs = by_other.get(&w).map(|x| x.as_slice()).unwrap_or(&[]);
                if let Some(&next) = fs.iter().find(|&&g| g != cur && !walk.contains(&g)) {
                    walk.push(next);
                    advanced = true;
                    break;
                }
            }
            if !advanced {
                return Err(Error::Topology(format!("vertex {v} link is not a cycle")));
            }
        }
        let cone: Vec<Vec4> = walk.iter().map(|&fi| facets[fi].normal).collect();
        let basis = space.tangent_basis(&vertices[v]);
        let comps: Vec<Vector3<f64>> = cone
            .iter()
            .map(|n| {
                Vector3::new(
                    space.inner(n, &basis[0]),
                    space.inner(n, &basis[1]),
                    space.inner(n, &basis[2]),
                )
            })
            .collect();
        let solid = spherical_polygon_area(&comps);
        corners.push(Corner { vertex: v, cone, solid });
    }

    Ok(PolytopeGeometry { space: *space, vertices, facets, ridges, corners, interior })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::gauss_legendre_on;

    const PI: f64 = std::f64::consts::PI;

    fn e2() -> AmbientSpace {
        AmbientSpace::euclidean(2).unwrap()
    }
    fn e3() -> AmbientSpace {
        AmbientSpace::euclidean(3).unwrap()
    }
    fn h2() -> AmbientSpace {
        AmbientSpace::hyperbolic(2, 1.0).unwrap()
    }
    fn h3() -> AmbientSpace {
        AmbientSpace::hyperbolic(3, 1.0).unwrap()
    }

    fn pt(space: &AmbientSpace, xs: &[f64]) -> Point {
        space.point_from_slice(xs).unwrap()
    }

    fn klein_pt(space: &AmbientSpace, k: &[f64]) -> Point {
        let mut v = Vec4::zeros();
        for (i, x) in k.iter().enumerate() {
            v[i] = *x;
        }
        space.from_klein(&v).unwrap()
    }

    #[test]
    fn polygon_hull_is_ccw_and_drops_interior_points() {
        let pts = vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [0.0, 1.0],
            [0.5, 0.5],
            [0.2, 0.7],
        ];
        let hull = hull_polygon(&pts).unwrap();
        assert_eq!(hull.len(), 4);
        // Counterclockwise: positive shoelace.
        let mut area2 = 0.0;
        for i in 0..hull.len() {
            let p = pts[hull[i]];
            let q = pts[hull[(i + 1) % hull.len()]];
            area2 += p[0] * q[1] - q[0] * p[1];
        }
        assert!((area2 - 2.0).abs() < 1e-12, "shoelace {area2}");
        assert!(!hull.contains(&4) && !hull.contains(&5));
        // Degenerate input errors.
        assert!(hull_polygon(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
    }

    #[test]
    fn triangle_hull_covers_cube_with_closed_surface() {
        let mut pts = Vec::new();
        for x in [0.0, 1.0] {
            for y in [0.0, 1.0] {
                for z in [0.0, 1.0] {
                    pts.push([x, y, z]);
                }
            }
        }
        pts.push([0.5, 0.5, 0.5]);
        pts.push([0.25, 0.5, 0.5]);
        let tris = hull_triangles(&pts).unwrap();
        let mut verts: Vec<usize> = tris.iter().flatten().copied().collect();
        verts.sort_unstable();
        verts.dedup();
        assert_eq!(verts.len(), 8, "all cube corners on hull");
        assert!(!verts.contains(&8) && !verts.contains(&9));
        // Euler: V - E + F = 2 for the triangulated sphere.
        let mut edges: Vec<(usize, usize)> = tris
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        assert_eq!(verts.len() + tris.len(), 2 + edges.len());
        // Every point lies behind every face.
        for t in &tris {
            for p in 0..pts.len() {
                assert!(orient3(&pts, t[0], t[1], t[2], p) < 1e-9);
            }
        }
    }

    #[test]
    fn random_point_cloud_hull_is_consistent() {
        // Small deterministic LCG; no need for crate RNG plumbing here.
        let mut state = 0x3DF4_1234_u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let pts: Vec<[f64; 3]> = (0..60).map(|_| [next(), next(), next()]).collect();
        let tris = hull_triangles(&pts).unwrap();
        let mut verts: Vec<usize> = tris.iter().flatten().copied().collect();
        verts.sort_unstable();
        verts.dedup();
        let mut edges: Vec<(usize, usize)> = tris
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        assert_eq!(verts.len() + tris.len(), 2 + edges.len());
        for t in &tris {
            for p in 0..pts.len() {
                assert!(orient3(&pts, t[0], t[1], t[2], p) < 1e-9);
            }
        }
    }

    #[test]
    fn spherical_octant_and_lhuilier_agree() {
        let oct = [
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
        ];
        assert!((spherical_polygon_area(&oct) - PI / 2.0).abs() < 1e-14);
        // Random-ish triangle against l'Huilier's theorem.
        let a = Vector3::new(0.6, 0.3, 0.74).normalize();
        let b = Vector3::new(-0.2, 0.8, 0.56).normalize();
        let c = Vector3::new(0.1, -0.4, 0.91).normalize();
        let side = |x: &Vector3<f64>, y: &Vector3<f64>| x.dot(y).clamp(-1.0, 1.0).acos();
        let (p, q, r) = (side(&a, &b), side(&b, &c), side(&c, &a));
        let s = 0.5 * (p + q + r);
        let t = ((s / 2.0).tan()
            * ((s - p) / 2.0).tan()
            * ((s - q) / 2.0).tan()
            * ((s - r) / 2.0).tan())
        .sqrt();
        let lhuilier = 4.0 * t.atan();
        assert!((spherical_polygon_area(&[a, b, c]) - lhuilier).abs() < 1e-12);
    }

    #[test]
    fn euclidean_tetrahedron_exterior_angles_sum_to_sphere() {
        let s = e3();
        let pts = vec![
            pt(&s, &[1.0, 1.0, 1.0]),
            pt(&s, &[1.0, -1.0, -1.0]),
            pt(&s, &[-1.0, 1.0, -1.0]),
            pt(&s, &[-1.0, -1.0, 1.0]),
        ];
        let poly = polytope_from_points(&s, &pts).unwrap();
        assert_eq!(poly.vertices.len(), 4);
        assert_eq!(poly.facets.len(), 4);
        assert_eq!(poly.ridges.len(), 6);
        // Gram relation for convex polytopes: exterior solid angles tile the
        // full sphere of directions.
        assert!((poly.solid_total() - 4.0 * PI).abs() < 1e-10, "{}", poly.solid_total());
        // Regular tetrahedron side 2 sqrt 2: area check.
        let side: f64 = 8.0f64.sqrt();
        let exact_area = 3.0f64.sqrt() * side * side;
        assert!((poly.facet_total() - exact_area).abs() < 1e-10);
        // Dihedral: exterior angle pi - arccos(1/3) on every ridge.
        let exact_dihedral = PI - (1.0f64 / 3.0).acos();
        for r in &poly.ridges {
            assert!((r.angle - exact_dihedral).abs() < 1e-10);
            // Wedge frame is orthonormal and lands on the second normal.
            assert!((s.inner(&r.wedge, &r.wedge) - 1.0).abs() < 1e-10);
            assert!(s.inner(&r.wedge, &r.normal_a).abs() < 1e-10);
        }
        assert!((poly.enclosed_volume().unwrap() - side.powi(3) / (6.0 * 2.0f64.sqrt())).abs() < 1e-10);
    }

    #[test]
    fn cube_geometry_survives_coplanar_triangulation() {
        let s = e3();
        let mut pts = Vec::new();
        for x in [-0.5, 0.5] {
            for y in [-0.5, 0.5] {
                for z in [-0.5, 0.5] {
                    pts.push(pt(&s, &[x, y, z]));
                }
            }
        }
        let poly = polytope_from_points(&s, &pts).unwrap();
        assert_eq!(poly.vertices.len(), 8);
        assert!((poly.solid_total() - 4.0 * PI).abs() < 1e-9);
        assert!((poly.facet_total() - 6.0).abs() < 1e-12);
        // Ridge term: 12 true edges at exterior angle pi/2 plus diagonal
        // slivers at angle 0.
        assert!((poly.ridge_total() - 12.0 * (PI / 2.0)).abs() < 1e-9);
        assert!((poly.enclosed_volume().unwrap() - 1.0).abs() < 1e-12);
        // Each corner cone of a cube is an octant.
        for c in &poly.corners {
            assert!((c.solid - PI / 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn euclidean_square_geometry_is_exact() {
        let s = e2();
        let pts = vec![
            pt(&s, &[1.0, 0.0]),
            pt(&s, &[0.0, 1.0]),
            pt(&s, &[1.0, 1.0]),
            pt(&s, &[0.3, 0.4]),
            pt(&s, &[0.0, 0.0]),
        ];
        let poly = polytope_from_points(&s, &pts).unwrap();
        assert_eq!(poly.vertices.len(), 4);
        assert!((poly.facet_total() - 4.0).abs() < 1e-12);
        assert!((poly.solid_total() - 2.0 * PI).abs() < 1e-12);
        assert!((poly.enclosed_volume().unwrap() - 1.0).abs() < 1e-12);
        for f in &poly.facets {
            // Axis-aligned outward normals of unit length.
            assert!((s.inner(&f.normal, &f.normal) - 1.0).abs() < 1e-12);
            assert!(f.normal[0].abs().max(f.normal[1].abs()) > 1.0 - 1e-12);
            let mid = (poly.vertices[f.verts[0]].0 + poly.vertices[f.verts[1]].0) * 0.5;
            assert!(f.normal.dot(&(mid - poly.interior.0)) > 0.0);
        }
    }

    #[test]
    fn hyperbolic_polygon_satisfies_gauss_bonnet() {
        let s = h2();
        // Klein coordinates of an irregular pentagon.
        let klein = [
            [0.5, 0.0],
            [0.2, 0.45],
            [-0.4, 0.3],
            [-0.45, -0.25],
            [0.15, -0.5],
        ];
        let pts: Vec<Point> = klein.iter().map(|k| klein_pt(&s, k)).collect();
        let poly = polytope_from_points(&s, &pts).unwrap();
        assert_eq!(poly.vertices.len(), 5);
        // Independent enclosed area: integrate the hyperbolic area density
        // over the Klein polygon, fanned into triangles from the first
        // vertex, with tensor Gauss-Legendre over each triangle map.
        let dens = |x: f64, y: f64| (1.0 - x * x - y * y).powf(-1.5);
        let mut area = 0.0;
        for i in 1..klein.len() - 1 {
            let (a, b, c) = (klein[0], klein[i], klein[i + 1]);
            let (xu, wu) = gauss_legendre_on(40, 0.0, 1.0);
            let (xv, wv) = gauss_legendre_on(40, 0.0, 1.0);
            for (u, w1) in xu.iter().zip(&wu) {
                for (v, w2) in xv.iter().zip(&wv) {
                    // Duffy map onto the triangle; jacobian v * |det|.
                    let px = (1.0 - v) * a[0] + v * ((1.0 - u) * b[0] + u * c[0]);
                    let py = (1.0 - v) * a[1] + v * ((1.0 - u) * b[1] + u * c[1]);
                    let det = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
                    area += w1 * w2 * v * det * dens(px, py);
                }
            }
        }
        let defect_area = poly.enclosed_volume().unwrap();
        assert!(
            (defect_area - area).abs() < 1e-6 * area,
            "defect {defect_area} vs integral {area}"
        );
        // Offset profile at 0 reproduces the raw limits: length and turning.
        let raw = poly.offset_profile(0.0);
        assert!((raw[0] - poly.facet_total()).abs() < 1e-12);
        assert!((raw[1] - poly.solid_total()).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_tetrahedron_normals_and_angles_are_consistent() {
        let s = h3();
        let klein = [
            [0.4, 0.0, -0.1],
            [-0.3, 0.35, 0.0],
            [-0.1, -0.4, 0.15],
            [0.05, 0.05, 0.45],
        ];
        let pts: Vec<Point> = klein.iter().map(|k| klein_pt(&s, k)).collect();
        let poly = polytope_from_points(&s, &pts).unwrap();
        assert_eq!(poly.facets.len(), 4);
        assert_eq!(poly.ridges.len(), 6);
        for f in &poly.facets {
            // Unit spacelike, orthogonal to every facet vertex, outward.
            assert!((s.inner(&f.normal, &f.normal) - 1.0).abs() < 1e-10);
            for &v in &f.verts {
                assert!(s.inner(&f.normal, &poly.vertices[v].0).abs() < 1e-10);
            }
            assert!(s.inner(&poly.interior.0, &f.normal) < 0.0);
            assert!(f.area > 0.0);
        }
        for r in &poly.ridges {
            assert!(r.angle > 0.0 && r.angle < PI);
            let (a, b) = (&poly.vertices[r.ends[0]], &poly.vertices[r.ends[1]]);
            // Wedge plane is orthogonal to the edge span.
            for x in [&a.0, &b.0] {
                assert!(s.inner(&r.normal_a, x).abs() < 1e-10);
                assert!(s.inner(&r.wedge, x).abs() < 1e-10);
            }
            // n(angle) equals the second facet's normal.
            let n_end = r.normal_a * r.angle.cos() + r.wedge * r.angle.sin();
            let matches = poly
                .facets
                .iter()
                .any(|f| (f.normal - n_end).norm() < 1e-9);
            assert!(matches, "wedge end is a facet normal");
        }
        // Hyperbolic Gauss-Bonnet for the boundary sphere: total geodesic
        // defect of the corner cones exceeds 4 pi by the curvature the
        // facets and ridges absorb; at minimum the cone angles are positive.
        for c in &poly.corners {
            assert!(c.solid > 0.0 && c.solid < 4.0 * PI);
            assert_eq!(c.cone.len(), 3);
        }
    }

    #[test]
    fn degenerate_inputs_error() {
        let s = e3();
        let flat = vec![
            pt(&s, &[0.0, 0.0, 0.0]),
            pt(&s, &[1.0, 0.0, 0.0]),
            pt(&s, &[0.0, 1.0, 0.0]),
            pt(&s, &[1.0, 1.0, 0.0]),
        ];
        assert!(matches!(polytope_from_points(&s, &flat), Err(Error::DegenerateHull(_))));
        let few = vec![pt(&s, &[0.0, 0.0, 0.0]), pt(&s, &[1.0, 0.0, 0.0])];
        assert!(polytope_from_points(&s, &few).is_err());
    }
}
