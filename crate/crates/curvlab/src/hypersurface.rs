//! Closed hypersurfaces: a common handle over smooth chart atlases and
//! discrete meshes, with Gauss-Legendre surface quadrature that carries full
//! shape-operator data at every node.

use crate::ambient::{AmbientSpace, Point, Vec4};
use crate::chart::{
    principal_data, BumpSet, CatalogChart, CatalogSurface, Chart, FlippedChart, PerturbMode,
    ShapeKind,
};
use crate::error::{Error, Result};
use crate::jet::Jet2;
use crate::mesh::{Cells, MeshData};
use crate::numeric::{gauss_legendre_on, pairwise_sum};
use std::sync::Arc;

/// One quadrature node: position, outward normal, weight (the Riemannian
/// area element is folded in) and principal curvature data.
#[derive(Clone, Debug)]
pub struct SurfaceNode {
    pub point: Point,
    pub normal: Vec4,
    pub weight: f64,
    /// Principal curvatures, descending; `[1]` unused for curves.
    pub kappa: [f64; 2],
    pub directions: [Vec4; 2],
    /// Hypersurface dimension n - 1.
    pub dim: usize,
    /// False on mesh faces whose vertices lack fitted curvature.
    pub valid_shape: bool,
}

/// How an atlas came to be; lets downstream queries pick exact shortcuts.
#[derive(Clone)]
pub enum Provenance {
    Catalog(Arc<CatalogSurface>),
    Flowed { base: Arc<Hypersurface>, t: f64 },
    Generic,
}

#[derive(Clone)]
pub struct Atlas {
    pub charts: Vec<Arc<dyn Chart>>,
    pub provenance: Provenance,
}

#[derive(Clone)]
pub enum Repr {
    Atlas(Atlas),
    Mesh(Arc<MeshData>),
}

/// Cached coarse parameter scan of one chart: positions on a fixed grid,
/// built lazily by nearest-point queries.
pub(crate) struct ScanGrid {
    pub params: Vec<(f64, f64)>,
    pub pos: Vec<Vec4>,
}

#[derive(Clone)]
pub struct Hypersurface {
    pub space: AmbientSpace,
    pub id: String,
    pub repr: Repr,
    /// True when the orientation has been reversed relative to construction.
    pub flipped: bool,
    /// Lazy per-chart position scans; clones share the cache.
    pub(crate) scan: Arc<std::sync::OnceLock<Vec<ScanGrid>>>,
}

impl Hypersurface {
    pub fn catalog(surf: CatalogSurface) -> Self {
        let id = surf.id();
        let space = surf.ambient;
        let surf = Arc::new(surf);
        let chart: Arc<dyn Chart> = Arc::new(CatalogChart { surf: surf.clone() });
        Hypersurface {
            space,
            id,
            repr: Repr::Atlas(Atlas { charts: vec![chart], provenance: Provenance::Catalog(surf) }),
            flipped: false,
            scan: Arc::new(std::sync::OnceLock::new()),
        }
    }

    pub fn from_charts(
        space: AmbientSpace,
        charts: Vec<Arc<dyn Chart>>,
        provenance: Provenance,
        id: &str,
    ) -> Self {
        Hypersurface {
            space,
            id: id.to_string(),
            repr: Repr::Atlas(Atlas { charts, provenance }),
            flipped: false,
            scan: Arc::new(std::sync::OnceLock::new()),
        }
    }

    pub fn from_mesh(mesh: MeshData, id: &str) -> Self {
        Hypersurface {
            space: mesh.space,
            id: id.to_string(),
            repr: Repr::Mesh(Arc::new(mesh)),
            flipped: false,
            scan: Arc::new(std::sync::OnceLock::new()),
        }
    }

    /// Hypersurface dimension n - 1.
    pub fn dim(&self) -> usize {
        self.space.dim - 1
    }

    pub fn charts(&self) -> Option<&[Arc<dyn Chart>]> {
        match &self.repr {
            Repr::Atlas(a) => Some(&a.charts),
            Repr::Mesh(_) => None,
        }
    }

    pub fn mesh(&self) -> Option<&MeshData> {
        match &self.repr {
            Repr::Mesh(m) => Some(m),
            Repr::Atlas(_) => None,
        }
    }

    /// The catalog surface backing this atlas, if any.
    pub fn catalog_surface(&self) -> Option<&Arc<CatalogSurface>> {
        match &self.repr {
            Repr::Atlas(Atlas { provenance: Provenance::Catalog(s), .. }) => Some(s),
            _ => None,
        }
    }

    /// Orientation reversal: normals flip, principal curvatures negate.
    /// Atlases wrap their charts; meshes reverse cell winding.
    pub fn flip(&self) -> Result<Self> {
        let repr = match &self.repr {
            Repr::Atlas(a) => {
                let charts = a
                    .charts
                    .iter()
                    .map(|c| Arc::new(FlippedChart { inner: c.clone() }) as Arc<dyn Chart>)
                    .collect();
                Repr::Atlas(Atlas { charts, provenance: a.provenance.clone() })
            }
            Repr::Mesh(m) => {
                let cells = match &m.cells {
                    Cells::Segments(s) => {
                        Cells::Segments(s.iter().map(|[a, b]| [*b, *a]).collect())
                    }
                    Cells::Triangles(t) => {
                        Cells::Triangles(t.iter().map(|[a, b, c]| [*a, *c, *b]).collect())
                    }
                };
                // The outward-anchor check is deliberately dropped: a flipped
                // closed surface points inward by construction.
                Repr::Mesh(Arc::new(MeshData::new(m.space, m.vertices.clone(), cells, None)?))
            }
        };
        Ok(Hypersurface {
            space: self.space,
            id: format!("{}|flip", self.id),
            repr,
            flipped: !self.flipped,
            scan: Arc::new(std::sync::OnceLock::new()),
        })
    }

    /// Surface quadrature rule of nominal order. Atlas charts get tensor
    /// Gauss-Legendre nodes scaled by their node hints; meshes use one node
    /// per cell (centroid, exact cell area).
    pub fn quadrature(&self, order: usize) -> Result<Vec<SurfaceNode>> {
        if order < 2 {
            return Err(Error::Config("quadrature order must be at least 2".into()));
        }
        match &self.repr {
            Repr::Atlas(atlas) => {
                let mut nodes = Vec::new();
                for chart in &atlas.charts {
                    chart_nodes(&self.space, chart.as_ref(), order, &mut nodes)?;
                }
                Ok(nodes)
            }
            Repr::Mesh(mesh) => mesh_nodes(mesh),
        }
    }

    /// Total surface area by quadrature.
    pub fn area(&self, order: usize) -> Result<f64> {
        let nodes = self.quadrature(order)?;
        let w: Vec<f64> = nodes.iter().map(|n| n.weight).collect();
        Ok(pairwise_sum(&w))
    }

    /// Shape data at chart parameters (atlas surfaces).
    pub fn shape_at(&self, chart_idx: usize, u: f64, v: f64) -> Result<SurfaceNode> {
        let charts = self
            .charts()
            .ok_or(Error::Geometry("shape_at needs an atlas surface".into()))?;
        let chart = charts
            .get(chart_idx)
            .ok_or(Error::Config(format!("chart index {chart_idx} out of range")))?;
        let frame = chart.frame(u, v)?;
        let (kappa, directions) = principal_data(&self.space, &frame)?;
        Ok(SurfaceNode {
            point: frame.point,
            normal: frame.normal,
            weight: 0.0,
            kappa,
            directions,
            dim: self.dim(),
            valid_shape: true,
        })
    }

    /// Radial bump perturbation of a catalog surface. The bump field is
    /// bounded by 1, so `amplitude < min radius` keeps the perturbed radial
    /// profile positive and the surface embedded.
    pub fn perturb(&self, amplitude: f64, mode: &PerturbMode, seed: u64) -> Result<Self> {
        let surf = self
            .catalog_surface()
            .ok_or(Error::Geometry("perturb applies to catalog surfaces".into()))?;
        if surf.bumps.is_some() {
            return Err(Error::Geometry("surface is already perturbed".into()));
        }
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::Config(format!("bad amplitude {amplitude}")));
        }
        let min_radius = match &surf.kind {
            ShapeKind::Ball { radius } => *radius,
            ShapeKind::Ellipsoid { semi } | ShapeKind::Superellipsoid { semi, .. } => semi
                [..surf.ambient.dim]
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
        };
        if amplitude >= 0.95 * min_radius {
            return Err(Error::PerturbationTooLarge(format!(
                "amplitude {amplitude} against minimum radius {min_radius}"
            )));
        }
        let bumps = BumpSet::generate(&surf.ambient, &surf.center, amplitude, mode, seed);
        let bumped = (**surf).clone().with_bumps(bumps);
        let out = Hypersurface::catalog(bumped);
        if self.flipped {
            out.flip()
        } else {
            Ok(out)
        }
    }

    /// Structured triangulation (or polygonization) of a catalog surface at
    /// the given resolution: `res` polar rows and `2 res` azimuthal columns
    /// for surfaces, `res` vertices for curves.
    pub fn to_mesh(&self, res: usize) -> Result<Self> {
        let surf = self
            .catalog_surface()
            .ok_or(Error::Geometry("to_mesh applies to catalog surfaces".into()))?;
        if res < 4 {
            return Err(Error::Config("mesh resolution must be at least 4".into()));
        }
        let space = surf.ambient;
        let position = |u: f64, v: f64| -> Point {
            let jets = surf.position(Jet2::constant(u), Jet2::constant(v));
            space.renormalize(Point(Vec4::new(jets[0].v, jets[1].v, jets[2].v, jets[3].v)))
        };
        let mesh = if space.dim == 2 {
            let rows = arclength_rows(surf, res, false)?;
            let vertices: Vec<Point> = rows.iter().map(|&u| position(u, 0.0)).collect();
            let segs: Vec<[usize; 2]> = (0..res).map(|j| [j, (j + 1) % res]).collect();
            MeshData::new(space, vertices, Cells::Segments(segs), Some(surf.center))?
        } else {
            let (ku, kv) = (res, 2 * res);
            let pi = std::f64::consts::PI;
            let rows = arclength_rows(surf, ku, true)?;
            let mut vertices = vec![position(0.0, 0.0)];
            for &u in &rows {
                for j in 0..kv {
                    let v = 2.0 * pi * j as f64 / kv as f64;
                    vertices.push(position(u, v));
                }
            }
            let south = vertices.len();
            vertices.push(position(pi, 0.0));
            let ring = |i: usize, j: usize| 1 + (i - 1) * kv + (j % kv);
            let mut tris = Vec::new();
            for j in 0..kv {
                tris.push([0, ring(1, j), ring(1, j + 1)]);
            }
            for i in 1..ku - 1 {
                for j in 0..kv {
                    let (a, b) = (ring(i, j), ring(i, j + 1));
                    let (d, c) = (ring(i + 1, j), ring(i + 1, j + 1));
                    tris.push([a, d, c]);
                    tris.push([a, c, b]);
                }
            }
            for j in 0..kv {
                tris.push([south, ring(ku - 1, j + 1), ring(ku - 1, j)]);
            }
            MeshData::new(space, vertices, Cells::Triangles(tris), Some(surf.center))?
        };
        let out = Hypersurface::from_mesh(mesh, &format!("{}|mesh({res})", self.id));
        if self.flipped {
            out.flip()
        } else {
            Ok(out)
        }
    }
}

/// Polar row parameters spaced at equal meridian arclength, so anisotropic
/// shapes (a 2:1 ellipsoid stretches uniform-u cells by 2x at the equator)
/// still mesh into near-isotropic triangles. Speed is averaged over several
/// azimuths; `open` selects the interior rows of a pole-to-pole sweep rather
/// than a full closed loop.
fn arclength_rows(surf: &CatalogSurface, count: usize, open: bool) -> Result<Vec<f64>> {
    let space = surf.ambient;
    let (u0, u1) = surf.domain()[0];
    let azimuths: Vec<f64> = if open {
        (0..8).map(|j| surf.domain()[1].1 * j as f64 / 8.0).collect()
    } else {
        vec![0.0]
    };
    let fine = (8 * count).clamp(64, 4096);
    let speed = |u: f64| -> f64 {
        let mut total = 0.0;
        for &v in &azimuths {
            let jets = surf.position(Jet2::var_u(u), Jet2::constant(v));
            let t = Vec4::new(jets[0].du, jets[1].du, jets[2].du, jets[3].du);
            total += space.inner(&t, &t).max(0.0).sqrt();
        }
        total / azimuths.len() as f64
    };
    let mut cumulative = Vec::with_capacity(fine + 1);
    cumulative.push(0.0);
    let step = (u1 - u0) / fine as f64;
    let mut prev = speed(u0);
    for k in 1..=fine {
        let s = speed(u0 + step * k as f64);
        cumulative.push(cumulative[k - 1] + 0.5 * (prev + s) * step);
        prev = s;
    }
    let total = cumulative[fine];
    if !(total > 0.0) {
        return Err(Error::Geometry("degenerate meridian: zero arclength".into()));
    }
    let targets: Vec<f64> = if open {
        (1..count).map(|i| total * i as f64 / count as f64).collect()
    } else {
        (0..count).map(|i| total * i as f64 / count as f64).collect()
    };
    let mut rows = Vec::with_capacity(targets.len());
    let mut k = 0;
    for t in targets {
        while k + 1 < cumulative.len() && cumulative[k + 1] < t {
            k += 1;
        }
        let span = cumulative[k + 1] - cumulative[k];
        let frac = if span > 0.0 { (t - cumulative[k]) / span } else { 0.0 };
        rows.push(u0 + step * (k as f64 + frac));
    }
    Ok(rows)
}

fn chart_nodes(
    space: &AmbientSpace,
    chart: &dyn Chart,
    order: usize,
    out: &mut Vec<SurfaceNode>,
) -> Result<()> {
    let dom = chart.domain();
    let hint = chart.node_hint(order);
    let dim = chart.param_dim();
    let (xu, wu) = gauss_legendre_on(hint[0], dom[0].0, dom[0].1);
    if dim == 1 {
        for (u, w) in xu.iter().zip(&wu) {
            let frame = chart.frame(*u, dom[1].0)?;
            let (kappa, directions) = principal_data(space, &frame)?;
            out.push(SurfaceNode {
                point: frame.point,
                normal: frame.normal,
                weight: w * frame.area_element(),
                kappa,
                directions,
                dim,
                valid_shape: true,
            });
        }
        return Ok(());
    }
    let (xv, wv) = gauss_legendre_on(hint[1], dom[1].0, dom[1].1);
    for (u, w1) in xu.iter().zip(&wu) {
        for (v, w2) in xv.iter().zip(&wv) {
            let frame = chart.frame(*u, *v)?;
            let (kappa, directions) = principal_data(space, &frame)?;
            out.push(SurfaceNode {
                point: frame.point,
                normal: frame.normal,
                weight: w1 * w2 * frame.area_element(),
                kappa,
                directions,
                dim,
                valid_shape: true,
            });
        }
    }
    Ok(())
}

fn mesh_nodes(mesh: &MeshData) -> Result<Vec<SurfaceNode>> {
    let frames = mesh.vertex_frames();
    let dim = mesh.space.dim - 1;
    let mut out = Vec::with_capacity(mesh.cells.len());
    let cell_vertices: Vec<Vec<usize>> = match &mesh.cells {
        Cells::Segments(s) => s.iter().map(|c| c.to_vec()).collect(),
        Cells::Triangles(t) => t.iter().map(|c| c.to_vec()).collect(),
    };
    for (i, verts) in cell_vertices.iter().enumerate() {
        let geo = mesh.face_geometry(i)?;
        let mut kappa = [0.0; 2];
        let mut valid = true;
        for &v in verts {
            match &frames[v] {
                Some(f) => {
                    kappa[0] += f.kappa[0];
                    kappa[1] += f.kappa[1];
                }
                None => valid = false,
            }
        }
        if valid {
            let n = verts.len() as f64;
            kappa[0] /= n;
            kappa[1] /= n;
        } else {
            kappa = [f64::NAN; 2];
        }
        out.push(SurfaceNode {
            point: geo.centroid,
            normal: geo.normal,
            weight: geo.area,
            kappa,
            directions: [Vec4::zeros(); 2],
            dim,
            valid_shape: valid,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PI: f64 = std::f64::consts::PI;

    fn e2() -> AmbientSpace {
        AmbientSpace::euclidean(2).unwrap()
    }
    fn e3() -> AmbientSpace {
        AmbientSpace::euclidean(3).unwrap()
    }
    fn h2(c: f64) -> AmbientSpace {
        AmbientSpace::hyperbolic(2, c).unwrap()
    }
    fn h3(c: f64) -> AmbientSpace {
        AmbientSpace::hyperbolic(3, c).unwrap()
    }

    fn ball(space: AmbientSpace, r: f64) -> Hypersurface {
        Hypersurface::catalog(
            CatalogSurface::new(space, ShapeKind::Ball { radius: r }, space.origin(), "ball")
                .unwrap(),
        )
    }

    #[test]
    fn quadrature_reproduces_closed_form_areas() {
        // Circle length 2 pi r.
        let s = ball(e2(), 1.7);
        assert!((s.area(16).unwrap() - 2.0 * PI * 1.7).abs() < 1e-10);
        // Sphere area 4 pi r^2.
        let s = ball(e3(), 1.3);
        assert!((s.area(16).unwrap() - 4.0 * PI * 1.3 * 1.3).abs() < 1e-8);
        // Hyperbolic circle length 2 pi sinh(sqrt(c) r)/sqrt(c).
        let c = 1.4f64;
        let s = ball(h2(c), 0.9);
        let exact = 2.0 * PI * (c.sqrt() * 0.9).sinh() / c.sqrt();
        assert!((s.area(16).unwrap() - exact).abs() < 1e-10);
        // Hyperbolic sphere area 4 pi (sinh(sqrt(c) r)/sqrt(c))^2.
        let s = ball(h3(c), 0.9);
        let sn = (c.sqrt() * 0.9).sinh() / c.sqrt();
        assert!((s.area(16).unwrap() - 4.0 * PI * sn * sn).abs() < 1e-8);
    }

    #[test]
    fn prolate_spheroid_area_matches_closed_form() {
        // Semiaxes (2, 1, 1): S = 2 pi b^2 (1 + (a/(b e)) asin e),
        // e^2 = 1 - b^2/a^2.
        let surf = CatalogSurface::new(
            e3(),
            ShapeKind::Ellipsoid { semi: [2.0, 1.0, 1.0] },
            e3().origin(),
            "prolate",
        )
        .unwrap();
        let s = Hypersurface::catalog(surf);
        let e = (1.0f64 - 0.25).sqrt();
        let exact = 2.0 * PI * (1.0 + (2.0 / e) * e.asin());
        // The radial chart's area element is analytic but not entire, so
        // Gauss-Legendre converges geometrically rather than instantly.
        let got = s.area(48).unwrap();
        assert!((got - exact).abs() / exact < 1e-9, "{got} vs {exact}");
        let coarse = s.area(24).unwrap();
        assert!((coarse - exact).abs() / exact < 1e-4);
    }

    #[test]
    fn quadrature_nodes_carry_consistent_shape_data() {
        let s = ball(h3(1.0), 1.1);
        let nodes = s.quadrature(8).unwrap();
        let expect = 1.0 / 1.1f64.tanh();
        for n in &nodes {
            assert!(n.valid_shape);
            assert!((n.kappa[0] - expect).abs() < 1e-9);
            assert!((n.kappa[1] - expect).abs() < 1e-9);
            // Principal directions are unit tangent vectors.
            for d in &n.directions {
                assert!((s.space.inner(d, d) - 1.0).abs() < 1e-9);
                assert!(s.space.inner(d, &n.normal).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn flip_reverses_normals_on_atlas_and_mesh() {
        let s = ball(e3(), 1.0);
        let f = s.flip().unwrap();
        let n0 = s.shape_at(0, 1.0, 1.0).unwrap();
        let n1 = f.shape_at(0, 1.0, 1.0).unwrap();
        assert!((n0.normal + n1.normal).norm() < 1e-14);
        assert!((n0.kappa[0] + n1.kappa[1]).abs() < 1e-12);

        let m = s.to_mesh(12).unwrap();
        let mf = m.flip().unwrap();
        let a = m.quadrature(4).unwrap();
        let b = mf.quadrature(4).unwrap();
        assert_eq!(a.len(), b.len());
        assert!((a[0].normal + b[0].normal).norm() < 1e-12);
        assert!((a[0].weight - b[0].weight).abs() < 1e-15);
    }

    #[test]
    fn to_mesh_approximates_atlas_area() {
        let s = ball(e3(), 1.0);
        let m = s.to_mesh(32).unwrap();
        let exact = 4.0 * PI;
        let got = m.area(4).unwrap();
        assert!((got - exact).abs() / exact < 5e-3, "{got}");
        // Hyperbolic circle.
        let s = ball(h2(1.0), 1.0);
        let m = s.to_mesh(256).unwrap();
        let exact = 2.0 * PI * 1.0f64.sinh();
        let got = m.area(4).unwrap();
        assert!((got - exact).abs() / exact < 1e-3, "{got} vs {exact}");
    }

    #[test]
    fn perturbation_respects_amplitude_gate() {
        let s = ball(e3(), 1.0);
        let p = s.perturb(0.1, &PerturbMode::default(), 7).unwrap();
        assert!(p.id.contains("bump"));
        // Deterministic in the seed.
        let q = s.perturb(0.1, &PerturbMode::default(), 7).unwrap();
        let a = p.shape_at(0, 0.7, 0.9).unwrap();
        let b = q.shape_at(0, 0.7, 0.9).unwrap();
        assert_eq!(a.point.0, b.point.0);
        // Too-large amplitudes are rejected.
        assert!(matches!(
            s.perturb(0.96, &PerturbMode::default(), 7),
            Err(Error::PerturbationTooLarge(_))
        ));
        // Double perturbation is rejected.
        assert!(p.perturb(0.05, &PerturbMode::default(), 8).is_err());
    }

    #[test]
    fn perturbed_surface_area_differs_but_stays_close() {
        let s = ball(e3(), 1.0);
        let p = s.perturb(0.05, &PerturbMode::default(), 3).unwrap();
        let a0 = s.area(16).unwrap();
        let a1 = p.area(16).unwrap();
        assert!(a1 != a0);
        assert!((a1 - a0).abs() / a0 < 0.2, "area moved too much: {a0} -> {a1}");
    }

    #[test]
    fn mesh_quadrature_reports_shape_coverage() {
        let s = ball(e3(), 1.0);
        let m = s.to_mesh(16).unwrap();
        let nodes = m.quadrature(4).unwrap();
        let covered = nodes.iter().filter(|n| n.valid_shape).count();
        assert_eq!(covered, nodes.len(), "structured sphere mesh should fit everywhere");
        for n in nodes.iter().take(20) {
            assert!((n.kappa[0] - 1.0).abs() < 0.1);
        }
    }
}
