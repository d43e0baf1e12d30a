//! Discrete hypersurfaces: closed polylines (n = 2) and triangle meshes
//! (n = 3) in either ambient, with curvature recovered by local quadric
//! fitting in geodesic normal coordinates.
//!
//! Curvature sign convention matches the smooth pipeline: outward normals on
//! convex bodies give positive principal curvatures.

use crate::ambient::{AmbientSpace, Point, SpaceKind, Vec4};
use crate::error::{Error, Result};
use crate::numeric::sym_eigen_2x2;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2, Vector4};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

#[derive(Clone, Debug)]
pub enum Cells {
    /// Oriented segments of a closed polyline (curve in a 2-dimensional
    /// ambient).
    Segments(Vec<[usize; 2]>),
    /// Oriented triangles of a closed surface (3-dimensional ambient),
    /// wound counterclockwise seen from outside.
    Triangles(Vec<[usize; 3]>),
}

impl Cells {
    pub fn len(&self) -> usize {
        match self {
            Cells::Segments(s) => s.len(),
            Cells::Triangles(t) => t.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Fitted differential data at a mesh vertex.
#[derive(Clone, Debug)]
pub struct VertexFrame {
    pub normal: Vec4,
    /// Principal curvatures, descending; `[1]` is zero for curves.
    pub kappa: [f64; 2],
    /// Principal directions in the ambient (unit, tangent).
    pub directions: [Vec4; 2],
    /// Root-mean-square residual of the height fit, in ambient length units.
    pub residual: f64,
}

/// Geometry of one cell.
#[derive(Clone, Debug)]
pub struct FaceGeometry {
    pub area: f64,
    pub centroid: Point,
    pub normal: Vec4,
}

#[derive(Clone, Debug)]
pub struct MeshData {
    pub space: AmbientSpace,
    pub vertices: Vec<Point>,
    pub cells: Cells,
    /// Interior point used to check that cell normals face outward; set for
    /// meshes of star-shaped bodies.
    pub orientation_anchor: Option<Point>,
    frames: OnceLock<Vec<Option<VertexFrame>>>,
}

impl MeshData {
    /// Validates points, closedness, consistent orientation and (when an
    /// anchor is supplied) outwardness.
    pub fn new(
        space: AmbientSpace,
        vertices: Vec<Point>,
        cells: Cells,
        orientation_anchor: Option<Point>,
    ) -> Result<Self> {
        for (i, v) in vertices.iter().enumerate() {
            space
                .check_point(v)
                .map_err(|e| Error::Geometry(format!("vertex {i}: {e}")))?;
        }
        let mesh = MeshData { space, vertices, cells, orientation_anchor, frames: OnceLock::new() };
        mesh.check_topology()?;
        if mesh.orientation_anchor.is_some() {
            mesh.check_outward()?;
        }
        Ok(mesh)
    }

    fn check_topology(&self) -> Result<()> {
        let nv = self.vertices.len();
        match &self.cells {
            Cells::Segments(segs) => {
                if self.space.dim != 2 {
                    return Err(Error::Geometry("segment cells require a 2d ambient".into()));
                }
                let mut heads = vec![0usize; nv];
                let mut tails = vec![0usize; nv];
                for (i, [a, b]) in segs.iter().enumerate() {
                    if *a >= nv || *b >= nv || a == b {
                        return Err(Error::Geometry(format!("segment {i} is degenerate")));
                    }
                    tails[*a] += 1;
                    heads[*b] += 1;
                }
                // Closed + consistently oriented: every vertex is entered and
                // left exactly once.
                for v in 0..nv {
                    if heads[v] != 1 || tails[v] != 1 {
                        return Err(Error::Geometry(format!(
                            "polyline not closed/consistent at vertex {v}: in {} out {}",
                            heads[v], tails[v]
                        )));
                    }
                }
            }
            Cells::Triangles(tris) => {
                if self.space.dim != 3 {
                    return Err(Error::Geometry("triangle cells require a 3d ambient".into()));
                }
                let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
                let mut used = vec![false; nv];
                for (i, [a, b, c]) in tris.iter().enumerate() {
                    if *a >= nv || *b >= nv || *c >= nv || a == b || b == c || a == c {
                        return Err(Error::Geometry(format!("triangle {i} is degenerate")));
                    }
                    for (x, y) in [(*a, *b), (*b, *c), (*c, *a)] {
                        *directed.entry((x, y)).or_insert(0) += 1;
                        used[x] = true;
                    }
                }
                for ((a, b), count) in &directed {
                    if *count != 1 {
                        return Err(Error::Geometry(format!(
                            "directed edge ({a},{b}) used {count} times; orientation inconsistent"
                        )));
                    }
                    if directed.get(&(*b, *a)) != Some(&1) {
                        return Err(Error::Geometry(format!(
                            "edge ({a},{b}) has no opposite; mesh not closed"
                        )));
                    }
                }
                if used.iter().any(|u| !u) {
                    return Err(Error::Geometry("mesh has unreferenced vertices".into()));
                }
            }
        }
        Ok(())
    }

    fn check_outward(&self) -> Result<()> {
        let anchor = self.orientation_anchor.as_ref().unwrap();
        for i in 0..self.cells.len() {
            let f = self.face_geometry(i)?;
            let out = match self.space.kind {
                SpaceKind::Euclidean => f.centroid.0 - anchor.0,
                SpaceKind::Hyperbolic => -self.space.log_map(&f.centroid, anchor),
            };
            if self.space.inner(&f.normal, &out) <= 0.0 {
                return Err(Error::Geometry(format!(
                    "cell {i} normal points inward relative to the anchor"
                )));
            }
        }
        Ok(())
    }

    /// Area (length for curves), centroid and unit normal of one cell.
    pub fn face_geometry(&self, idx: usize) -> Result<FaceGeometry> {
        match (&self.cells, self.space.kind) {
            (Cells::Segments(s), SpaceKind::Euclidean) => {
                let [a, b] = s[idx];
                let (pa, pb) = (self.vertices[a].0, self.vertices[b].0);
                let d = pb - pa;
                let len = d.norm();
                if len < 1e-300 {
                    return Err(Error::Geometry(format!("segment {idx} has zero length")));
                }
                // CCW winding: outward normal is the tangent rotated -90 deg.
                let normal = Vector4::new(d[1], -d[0], 0.0, 0.0) / len;
                Ok(FaceGeometry {
                    area: len,
                    centroid: Point((pa + pb) * 0.5),
                    normal,
                })
            }
            (Cells::Segments(s), SpaceKind::Hyperbolic) => {
                let [a, b] = s[idx];
                let (pa, pb) = (&self.vertices[a], &self.vertices[b]);
                let len = self.space.distance(pa, pb);
                if len < 1e-300 {
                    return Err(Error::Geometry(format!("segment {idx} has zero length")));
                }
                let half = self.space.log_map(pa, pb) * 0.5;
                let mid = self.space.exp_map(pa, &half);
                let t = self.space.log_map(&mid, pb).normalize();
                // Complete {t} to an orthonormal basis of T_mid.
                let mut normal = None;
                for cand in self.space.tangent_basis(&mid) {
                    let w = cand - self.space.inner(&cand, &t) * t;
                    let n2 = self.space.inner(&w, &w);
                    if n2 > 1e-12 {
                        normal = Some(w / n2.sqrt());
                        break;
                    }
                }
                let mut n = normal
                    .ok_or(Error::Geometry(format!("segment {idx}: no normal direction")))?;
                // Fix the sign by the ambient orientation det[x, t, n] (slots
                // 0..3 hold x0, x1, x2); CCW polylines then get outward
                // normals, matching the Euclidean convention above.
                let det = det3(&mid.0, &t, &n);
                if det < 0.0 {
                    n = -n;
                }
                Ok(FaceGeometry { area: len, centroid: mid, normal: n })
            }
            (Cells::Triangles(tr), SpaceKind::Euclidean) => {
                let [a, b, c] = tr[idx];
                let (pa, pb, pc) =
                    (self.vertices[a].0, self.vertices[b].0, self.vertices[c].0);
                let u = pb - pa;
                let v = pc - pa;
                let cr = Vector4::new(
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                    0.0,
                );
                let n2 = cr.norm();
                if n2 < 1e-300 {
                    return Err(Error::Geometry(format!("triangle {idx} is degenerate")));
                }
                Ok(FaceGeometry {
                    area: 0.5 * n2,
                    centroid: Point((pa + pb + pc) / 3.0),
                    normal: cr / n2,
                })
            }
            (Cells::Triangles(tr), SpaceKind::Hyperbolic) => {
                let [a, b, c] = tr[idx];
                let verts = [&self.vertices[a], &self.vertices[b], &self.vertices[c]];
                // Geodesic triangle area from the angle deficit.
                let mut angle_sum = 0.0;
                for i in 0..3 {
                    let p = verts[i];
                    let u = self.space.log_map(p, verts[(i + 1) % 3]);
                    let w = self.space.log_map(p, verts[(i + 2) % 3]);
                    let cosang = self.space.inner(&u, &w)
                        / (self.space.norm(&u) * self.space.norm(&w)).max(1e-300);
                    angle_sum += cosang.clamp(-1.0, 1.0).acos();
                }
                let area =
                    (std::f64::consts::PI - angle_sum).max(0.0) / self.space.curvature_scale;
                let centroid = self
                    .space
                    .renormalize(Point((verts[0].0 + verts[1].0 + verts[2].0) / 3.0));
                // The totally geodesic plane through the vertices is the
                // intersection of the sheet with their Minkowski span; its
                // unit normal at the centroid is the spacelike direction
                // orthogonal to that span.
                let inner = |x: &Vec4, y: &Vec4| self.space.inner(x, y);
                let u1 = verts[1].0 - verts[0].0;
                let u2 = verts[2].0 - verts[0].0;
                let base = [centroid.0, u1, u2];
                let (on, _) = crate::numeric::metric_gram_schmidt(&base, &inner, 1e-10)
                    .ok_or(Error::Geometry(format!("triangle {idx} is degenerate")))?;
                if on.len() != 3 {
                    return Err(Error::Geometry(format!("triangle {idx} is degenerate")));
                }
                let mut normal = None;
                for cand in self.space.tangent_basis(&centroid) {
                    let mut w = cand;
                    for bvec in &on[1..] {
                        w -= self.space.inner(&w, bvec) * bvec;
                    }
                    let n2 = self.space.inner(&w, &w);
                    if n2 > 1e-10 {
                        normal = Some(w / n2.sqrt());
                        break;
                    }
                }
                let mut n =
                    normal.ok_or(Error::Geometry(format!("triangle {idx}: no normal")))?;
                // Sign from the ambient 4-form: det[x, u1, u2, n] > 0 gives
                // outward normals for CCW-from-outside winding.
                let det = det4(&centroid.0, &u1, &u2, &n);
                if det < 0.0 {
                    n = -n;
                }
                Ok(FaceGeometry { area, centroid, normal: n })
            }
        }
    }

    pub fn total_area(&self) -> Result<f64> {
        let mut parts = Vec::with_capacity(self.cells.len());
        for i in 0..self.cells.len() {
            parts.push(self.face_geometry(i)?.area);
        }
        Ok(crate::numeric::pairwise_sum(&parts))
    }

    /// Vertex-to-vertex adjacency.
    fn adjacency(&self) -> Vec<BTreeSet<usize>> {
        let mut adj = vec![BTreeSet::new(); self.vertices.len()];
        match &self.cells {
            Cells::Segments(s) => {
                for [a, b] in s {
                    adj[*a].insert(*b);
                    adj[*b].insert(*a);
                }
            }
            Cells::Triangles(t) => {
                for [a, b, c] in t {
                    for (x, y) in [(*a, *b), (*b, *c), (*c, *a)] {
                        adj[x].insert(y);
                        adj[y].insert(x);
                    }
                }
            }
        }
        adj
    }

    /// Averaged incident-cell normal at each vertex (orientation seed for the
    /// fits).
    fn seed_normals(&self) -> Result<Vec<Vec4>> {
        let mut acc = vec![Vec4::zeros(); self.vertices.len()];
        match &self.cells {
            Cells::Segments(s) => {
                for (i, [a, b]) in s.iter().enumerate() {
                    let f = self.face_geometry(i)?;
                    acc[*a] += f.normal;
                    acc[*b] += f.normal;
                }
            }
            Cells::Triangles(t) => {
                for (i, [a, b, c]) in t.iter().enumerate() {
                    let f = self.face_geometry(i)?;
                    for v in [*a, *b, *c] {
                        acc[v] += f.normal;
                    }
                }
            }
        }
        Ok(acc)
    }

    /// Fitted vertex frames; `None` where the neighborhood could not support
    /// a fit. Computed once and cached.
    pub fn vertex_frames(&self) -> &Vec<Option<VertexFrame>> {
        self.frames.get_or_init(|| {
            self.fit_all_frames().unwrap_or_else(|_| vec![None; self.vertices.len()])
        })
    }

    /// Fraction of vertices carrying a fitted frame.
    pub fn frame_coverage(&self) -> f64 {
        let frames = self.vertex_frames();
        if frames.is_empty() {
            return 0.0;
        }
        frames.iter().filter(|f| f.is_some()).count() as f64 / frames.len() as f64
    }

    fn fit_all_frames(&self) -> Result<Vec<Option<VertexFrame>>> {
        let adj = self.adjacency();
        let seeds = self.seed_normals()?;
        let mut out = Vec::with_capacity(self.vertices.len());
        for v in 0..self.vertices.len() {
            out.push(self.fit_vertex(v, &adj, &seeds[v]));
        }
        Ok(out)
    }

    /// Vertices within graph distance `rings` of `v`, excluding `v`.
    fn ring_neighborhood(&self, v: usize, adj: &[BTreeSet<usize>], rings: usize) -> Vec<usize> {
        let mut seen = BTreeSet::new();
        seen.insert(v);
        let mut frontier: BTreeSet<usize> = adj[v].clone();
        let mut all = BTreeSet::new();
        for _ in 0..rings {
            let mut next = BTreeSet::new();
            for &u in &frontier {
                if seen.insert(u) {
                    all.insert(u);
                    for &w in &adj[u] {
                        if !seen.contains(&w) {
                            next.insert(w);
                        }
                    }
                }
            }
            frontier = next;
        }
        all.into_iter().collect()
    }

    /// Quadric fit in geodesic normal coordinates at vertex `v`.
    ///
    /// Height h over the seed-normal plane is modeled as linear + quadratic
    /// (+ cubic when the neighborhood is rich enough); the linear part
    /// absorbs the seed normal's tilt and the Weingarten map comes from the
    /// tilt-corrected graph formula. In normal coordinates the Christoffel
    /// symbols vanish at the base point, so the formula is exact there for
    /// both ambients.
    fn fit_vertex(
        &self,
        v: usize,
        adj: &[BTreeSet<usize>],
        seed: &Vec4,
    ) -> Option<VertexFrame> {
        let sdim = self.space.dim - 1; // 1 for curves, 2 for surfaces
        let p = &self.vertices[v];
        let n0n = self.space.inner(seed, seed);
        if !(n0n > 1e-20) {
            return None;
        }
        let n0 = seed / n0n.sqrt();
        // Tangent basis with n0 removed.
        let mut tbasis = Vec::with_capacity(sdim);
        for cand in self.space.tangent_basis(p) {
            let mut w = cand - self.space.inner(&cand, &n0) * n0;
            for t in &tbasis {
                w -= self.space.inner(&w, t) * t;
            }
            let n2 = self.space.inner(&w, &w);
            if n2 > 1e-10 {
                tbasis.push(w / n2.sqrt());
                if tbasis.len() == sdim {
                    break;
                }
            }
        }
        if tbasis.len() != sdim {
            return None;
        }

        // Collect samples, widening rings until the top fit tier is
        // determined with margin (quartic needs 14 coefficients; a 2-ring
        // interior stencil has only ~18 samples, too tight for a stable
        // least squares, so surfaces widen to 3 rings).
        let mut rings = 2;
        let (xi, h) = loop {
            let hood = self.ring_neighborhood(v, adj, rings);
            let mut xi: Vec<[f64; 2]> = Vec::with_capacity(hood.len());
            let mut h: Vec<f64> = Vec::with_capacity(hood.len());
            for &u in &hood {
                let y = self.space.log_map(p, &self.vertices[u]);
                let mut row = [0.0; 2];
                for (a, t) in tbasis.iter().enumerate() {
                    row[a] = self.space.inner(&y, t);
                }
                xi.push(row);
                h.push(self.space.inner(&y, &n0));
            }
            let need = if sdim == 1 { 4 } else { 22 };
            if xi.len() >= need || rings >= 4 {
                break (xi, h);
            }
            rings += 1;
        };

        let m = xi.len();
        // Highest polynomial degree the sample count supports. Degree 4
        // matters: with cubics alone the curvature bias is O(h^2) from the
        // unmodeled quartic terms, and it dominates exactly where curvature
        // peaks.
        let (ncoef, degree) = if sdim == 1 {
            if m >= 5 {
                (4, 3)
            } else if m >= 4 {
                (3, 2)
            } else {
                return None;
            }
        } else if m >= 20 {
            (14, 4)
        } else if m >= 12 {
            (9, 3)
        } else if m >= 7 {
            (5, 2)
        } else {
            return None;
        };

        // Column scaling for conditioning.
        let scale = (xi
            .iter()
            .map(|r| (r[0] * r[0] + r[1] * r[1]).sqrt())
            .sum::<f64>()
            / m as f64)
            .max(1e-12);
        let mut a = DMatrix::zeros(m, ncoef);
        let rhs = DVector::from_iterator(m, h.iter().copied());
        for (i, r) in xi.iter().enumerate() {
            let (x, y) = (r[0] / scale, r[1] / scale);
            if sdim == 1 {
                a[(i, 0)] = x;
                a[(i, 1)] = 0.5 * x * x;
                a[(i, 2)] = 1.0;
                if degree >= 3 {
                    a[(i, 3)] = x * x * x;
                }
            } else {
                a[(i, 0)] = x;
                a[(i, 1)] = y;
                a[(i, 2)] = 0.5 * x * x;
                a[(i, 3)] = x * y;
                a[(i, 4)] = 0.5 * y * y;
                if degree >= 3 {
                    a[(i, 5)] = x * x * x;
                    a[(i, 6)] = x * x * y;
                    a[(i, 7)] = x * y * y;
                    a[(i, 8)] = y * y * y;
                }
                if degree >= 4 {
                    a[(i, 9)] = x * x * x * x;
                    a[(i, 10)] = x * x * x * y;
                    a[(i, 11)] = x * x * y * y;
                    a[(i, 12)] = x * y * y * y;
                    a[(i, 13)] = y * y * y * y;
                }
            }
        }
        // There is no constant column for surfaces: h(0) = 0 by construction.
        let svd = a.clone().svd(true, true);
        let sol = svd.solve(&rhs, 1e-12).ok()?;
        let resid = (&a * &sol - &rhs).norm() / (m as f64).sqrt();

        // Gradient and Hessian at 0 in unscaled coordinates.
        let (g, hess) = if sdim == 1 {
            let g = Vector2::new(sol[0] / scale, 0.0);
            let hess = Matrix2::new(sol[1] / (scale * scale), 0.0, 0.0, 0.0);
            (g, hess)
        } else {
            let g = Vector2::new(sol[0] / scale, sol[1] / scale);
            let s2 = scale * scale;
            let hess = Matrix2::new(sol[2] / s2, sol[3] / s2, sol[3] / s2, sol[4] / s2);
            (g, hess)
        };

        // Graph Weingarten with tilt: S = -(I + g g^T)^{-1} Hess / W with
        // W = sqrt(1 + |g|^2); upward (= seed-side) normal. Verified on the
        // sphere: h = -|xi|^2/(2R) gives S = +1/R with the outward normal.
        let w = (1.0 + g.norm_squared()).sqrt();
        let fund = Matrix2::new(
            1.0 + g[0] * g[0],
            g[0] * g[1],
            g[0] * g[1],
            1.0 + g[1] * g[1],
        );
        let (kappa, dirs2) = if sdim == 1 {
            let k = -hess[(0, 0)] / (1.0 + g[0] * g[0]) / w;
            ([k, 0.0], [Vector2::new(1.0, 0.0), Vector2::new(0.0, 1.0)])
        } else {
            let s = -(fund.try_inverse()? * hess) / w;
            // s is similar to a symmetric matrix; symmetrize in the metric
            // fund^(1/2) via the generalized eigenproblem -Hess x = k W fund x.
            let msym = Matrix2::new(
                -hess[(0, 0)] / w,
                -hess[(0, 1)] / w,
                -hess[(0, 1)] / w,
                -hess[(1, 1)] / w,
            );
            let _ = s;
            gen_eigen_2x2(&msym, &fund)?
        };

        // Ambient data: graph tangents T_a = t_a + g_a n0; fitted normal is
        // the upward unit normal of the graph.
        let mut normal = n0 * 1.0;
        for a in 0..sdim {
            normal -= g[a] * tbasis[a];
        }
        normal /= w;
        let mut directions = [Vec4::zeros(); 2];
        for i in 0..sdim {
            let x = dirs2[i];
            let mut d = Vec4::zeros();
            for a in 0..sdim {
                d += x[a] * (tbasis[a] + g[a] * n0);
            }
            let dn = self.space.inner(&d, &d).max(1e-300).sqrt();
            directions[i] = d / dn;
        }
        Some(VertexFrame { normal, kappa, directions, residual: resid })
    }
}

/// Generalized symmetric eigenproblem A x = k B x for 2x2 with B positive
/// definite; returns eigenvalues descending with B-orthogonal eigenvectors.
fn gen_eigen_2x2(a: &Matrix2<f64>, b: &Matrix2<f64>) -> Option<([f64; 2], [Vector2<f64>; 2])> {
    // Cholesky B = L L^T; solve the similar symmetric problem L^-1 A L^-T.
    let l11 = b[(0, 0)].sqrt();
    if !(l11 > 0.0) {
        return None;
    }
    let l21 = b[(1, 0)] / l11;
    let d = b[(1, 1)] - l21 * l21;
    if !(d > 0.0) {
        return None;
    }
    let l22 = d.sqrt();
    // C = L^-1 A L^-T.
    let inv_l = Matrix2::new(1.0 / l11, 0.0, -l21 / (l11 * l22), 1.0 / l22);
    let c = inv_l * a * inv_l.transpose();
    let c = Matrix2::new(c[(0, 0)], 0.5 * (c[(0, 1)] + c[(1, 0)]), 0.5 * (c[(0, 1)] + c[(1, 0)]), c[(1, 1)]);
    let (vals, vecs) = sym_eigen_2x2(&c);
    let back = inv_l.transpose();
    let mut out = [Vector2::zeros(); 2];
    for i in 0..2 {
        let y = back * vecs[i];
        out[i] = y;
    }
    Some((vals, out))
}

fn det3(a: &Vec4, b: &Vec4, c: &Vec4) -> f64 {
    a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0])
}

fn det4(a: &Vec4, b: &Vec4, c: &Vec4, d: &Vec4) -> f64 {
    let m = nalgebra::Matrix4::from_columns(&[*a, *b, *c, *d]);
    m.determinant()
}

// ---------------------------------------------------------------------------
// Indexed face set text format.
// ---------------------------------------------------------------------------

/// Serializes a mesh to a plain indexed face set. Floats are written with
/// shortest round-trip formatting, so export/import is lossless.
pub fn export_text(mesh: &MeshData) -> String {
    let mut out = String::new();
    out.push_str("curvmesh v1\n");
    let kind = match mesh.space.kind {
        SpaceKind::Euclidean => "euclidean",
        SpaceKind::Hyperbolic => "hyperbolic",
    };
    out.push_str(&format!(
        "space {} {} {}\n",
        kind, mesh.space.dim, mesh.space.curvature_scale
    ));
    out.push_str(&format!("vertices {}\n", mesh.vertices.len()));
    let cl = mesh.space.coord_len();
    for v in &mesh.vertices {
        let coords: Vec<String> = (0..cl).map(|i| format!("{}", v.0[i])).collect();
        out.push_str(&coords.join(" "));
        out.push('\n');
    }
    match &mesh.cells {
        Cells::Segments(s) => {
            out.push_str(&format!("cells segments {}\n", s.len()));
            for [a, b] in s {
                out.push_str(&format!("{a} {b}\n"));
            }
        }
        Cells::Triangles(t) => {
            out.push_str(&format!("cells triangles {}\n", t.len()));
            for [a, b, c] in t {
                out.push_str(&format!("{a} {b} {c}\n"));
            }
        }
    }
    out
}

pub fn import_text(text: &str) -> Result<MeshData> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let parse_err = |what: &str| Error::Parse(format!("mesh import: {what}"));
    if lines.next().map(str::trim) != Some("curvmesh v1") {
        return Err(parse_err("missing header"));
    }
    let space_line = lines.next().ok_or(parse_err("missing space line"))?;
    let parts: Vec<&str> = space_line.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "space" {
        return Err(parse_err("bad space line"));
    }
    let dim: usize = parts[2].parse().map_err(|_| parse_err("bad dim"))?;
    let c: f64 = parts[3].parse().map_err(|_| parse_err("bad curvature"))?;
    let space = match parts[1] {
        "euclidean" => AmbientSpace::euclidean(dim)?,
        "hyperbolic" => AmbientSpace::hyperbolic(dim, c)?,
        other => return Err(parse_err(&format!("unknown space kind {other}"))),
    };
    let vline = lines.next().ok_or(parse_err("missing vertex count"))?;
    let vparts: Vec<&str> = vline.split_whitespace().collect();
    if vparts.len() != 2 || vparts[0] != "vertices" {
        return Err(parse_err("bad vertex count line"));
    }
    let nv: usize = vparts[1].parse().map_err(|_| parse_err("bad vertex count"))?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = lines.next().ok_or(parse_err("truncated vertices"))?;
        let coords: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err("bad coordinate")))
            .collect::<Result<_>>()?;
        vertices.push(space.point_from_slice(&coords)?);
    }
    let cline = lines.next().ok_or(parse_err("missing cell header"))?;
    let cparts: Vec<&str> = cline.split_whitespace().collect();
    if cparts.len() != 3 || cparts[0] != "cells" {
        return Err(parse_err("bad cell header"));
    }
    let nc: usize = cparts[2].parse().map_err(|_| parse_err("bad cell count"))?;
    let cells = match cparts[1] {
        "segments" => {
            let mut segs = Vec::with_capacity(nc);
            for _ in 0..nc {
                let line = lines.next().ok_or(parse_err("truncated cells"))?;
                let ix: Vec<usize> = line
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| parse_err("bad index")))
                    .collect::<Result<_>>()?;
                if ix.len() != 2 {
                    return Err(parse_err("segment needs 2 indices"));
                }
                segs.push([ix[0], ix[1]]);
            }
            Cells::Segments(segs)
        }
        "triangles" => {
            let mut tris = Vec::with_capacity(nc);
            for _ in 0..nc {
                let line = lines.next().ok_or(parse_err("truncated cells"))?;
                let ix: Vec<usize> = line
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| parse_err("bad index")))
                    .collect::<Result<_>>()?;
                if ix.len() != 3 {
                    return Err(parse_err("triangle needs 3 indices"));
                }
                tris.push([ix[0], ix[1], ix[2]]);
            }
            Cells::Triangles(tris)
        }
        other => return Err(parse_err(&format!("unknown cell kind {other}"))),
    };
    MeshData::new(space, vertices, cells, None)
}
