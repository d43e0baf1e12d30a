//! Scenario-driven experiment runners. A scenario names an ambient space, a
//! base surface, a sequence generator, and tolerances; a runner walks the
//! sequence, measures every member against the base, and returns a
//! [`Report`] whose verdicts are recomputable from the table alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ambient::{AmbientSpace, Point, Vec4};
use crate::chart::{CatalogSurface, PerturbMode, ShapeKind};
use crate::convex::{
    conjecture_gap, hull_body, hull_boundary_samples, hull_volume, polytope_offset_atlas,
    random_convex_body, ConvexBody, RandomBodyParams,
};
use crate::distfield::{
    certify_reach, estimate_reach, hausdorff_distance, radial_symmetric_difference,
    region_volume_flux, signed_distance,
};
use crate::error::{Error, Result};
use crate::flow::parallel_surface;
use crate::hypersurface::Hypersurface;
use crate::jet::Jet2;
use crate::measures::{curvature_profile, gauss_form_pullback, total_mean_curvature};
use crate::numeric::richardson;
use crate::polytope::{polytope_from_points, PolytopeGeometry};
use crate::report::{Report, ReportRow, Verdict};

// ---------------------------------------------------------------------------
// Scenario description.
// ---------------------------------------------------------------------------

fn default_order() -> usize {
    8
}

/// Declarative description of one experiment run, loadable from JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub ambient: AmbientSpec,
    pub surface: SurfaceSpec,
    pub sequence: SequenceSpec,
    /// Curvature orders to track; empty means every order the ambient
    /// dimension supports.
    #[serde(default)]
    pub r_values: Vec<usize>,
    #[serde(default = "default_order")]
    pub quadrature_order: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Directory for emitted report files.
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: &Path) -> Result<Scenario> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Curvature orders this scenario reports, validated against the ambient.
    pub fn resolve_rs(&self, space: &AmbientSpace) -> Result<Vec<usize>> {
        if self.r_values.is_empty() {
            return Ok((0..space.dim).collect());
        }
        for &r in &self.r_values {
            if r >= space.dim {
                return Err(Error::Config(format!(
                    "curvature order {r} out of range for dimension {}",
                    space.dim
                )));
            }
        }
        Ok(self.r_values.clone())
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AmbientSpec {
    Euclidean { dim: usize },
    Hyperbolic { dim: usize, curvature: f64 },
}

impl AmbientSpec {
    pub fn build(&self) -> Result<AmbientSpace> {
        match *self {
            AmbientSpec::Euclidean { dim } => AmbientSpace::euclidean(dim),
            AmbientSpec::Hyperbolic { dim, curvature } => AmbientSpace::hyperbolic(dim, curvature),
        }
    }
}

/// Base-surface description. Hull point rows hold cartesian coordinates in
/// euclidean ambients and Klein ball coordinates in hyperbolic ones.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SurfaceSpec {
    Ball { radius: f64 },
    Ellipsoid { semi: [f64; 3] },
    Superellipsoid { semi: [f64; 3], m: u32 },
    Hull { points: Vec<Vec<f64>>, smoothing: f64 },
    Random { seed: u64, #[serde(default)] params: RandomBodyParams },
}

/// A resolved base surface: a smooth catalog surface or a smoothed hull body.
pub enum BaseSurface {
    Catalog(Hypersurface),
    Body(ConvexBody),
}

impl BaseSurface {
    pub fn boundary(&self) -> &Hypersurface {
        match self {
            BaseSurface::Catalog(h) => h,
            BaseSurface::Body(b) => &b.boundary,
        }
    }

    pub fn smoothing(&self) -> Option<f64> {
        match self {
            BaseSurface::Catalog(_) => None,
            BaseSurface::Body(b) => Some(b.smoothing),
        }
    }
}

impl SurfaceSpec {
    pub fn build(&self, space: &AmbientSpace, seed_override: Option<u64>) -> Result<BaseSurface> {
        let catalog = |kind: ShapeKind, label: String| -> Result<BaseSurface> {
            let surf = CatalogSurface::new(*space, kind, space.origin(), &label)?;
            Ok(BaseSurface::Catalog(Hypersurface::catalog(surf)))
        };
        match self {
            SurfaceSpec::Ball { radius } => {
                catalog(ShapeKind::Ball { radius: *radius }, format!("ball(r={radius})"))
            }
            SurfaceSpec::Ellipsoid { semi } => catalog(
                ShapeKind::Ellipsoid { semi: *semi },
                format!("ellipsoid({},{},{})", semi[0], semi[1], semi[2]),
            ),
            SurfaceSpec::Superellipsoid { semi, m } => catalog(
                ShapeKind::Superellipsoid { semi: *semi, m: *m },
                format!("superellipsoid({},{},{};m={m})", semi[0], semi[1], semi[2]),
            ),
            SurfaceSpec::Hull { points, smoothing } => {
                let pts = points
                    .iter()
                    .map(|row| {
                        if space.is_hyperbolic() {
                            if row.len() != space.dim {
                                return Err(Error::Config(format!(
                                    "klein rows need {} coordinates, got {}",
                                    space.dim,
                                    row.len()
                                )));
                            }
                            let mut k = Vec4::zeros();
                            for (i, x) in row.iter().enumerate() {
                                k[i] = *x;
                            }
                            space.from_klein(&k)
                        } else {
                            space.point_from_slice(row)
                        }
                    })
                    .collect::<Result<Vec<Point>>>()?;
                Ok(BaseSurface::Body(hull_body(&pts, space, *smoothing)?))
            }
            SurfaceSpec::Random { seed, params } => {
                let seed = seed_override.unwrap_or(*seed);
                Ok(BaseSurface::Body(random_convex_body(space, seed, params)?))
            }
        }
    }
}

/// Sequence generator: what varies along the rows of the report.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSpec {
    /// Structured meshes of a catalog surface at increasing resolution.
    MeshRefinement { resolutions: Vec<usize> },
    /// Radial bump perturbations of a catalog surface at given amplitudes.
    Perturbation {
        amplitudes: Vec<f64>,
        #[serde(default)]
        mode: PerturbMode,
        #[serde(default)]
        seed: u64,
    },
    /// Offset surfaces at evenly spaced distances in [start, stop].
    EpsGrid { start: f64, stop: f64, points: usize },
    /// Convex hulls of k points sampled on the base surface.
    HullSamples { counts: Vec<usize> },
}

/// Pass/fail thresholds. Serde fills unset fields from the defaults.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Largest decrease tolerated in a nondecreasing sweep.
    pub monotone: f64,
    /// Final relative error bound for converging sequences.
    pub final_rel: f64,
    /// Ratio column bound: max <= ratio_factor * median.
    pub ratio_factor: f64,
    /// Uniform reach floor every convergence-sequence member must certify.
    /// Defaults to half the estimated reach of the base surface.
    pub reach_bound: Option<f64>,
    /// When set, each offset surface in a sweep is reach-certified at this
    /// fraction of its offset distance, and the run aborts on failure.
    pub certify_factor: Option<f64>,
    /// Offset distance for the hull-convergence bound-chain diagnostic.
    pub diagnostic_eps: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            monotone: 1e-6,
            final_rel: 1e-2,
            ratio_factor: 10.0,
            reach_bound: None,
            certify_factor: None,
            diagnostic_eps: 0.1,
        }
    }
}

// ---------------------------------------------------------------------------
// Shared measurement helpers.
// ---------------------------------------------------------------------------

/// All requested total curvatures of one surface, in one quadrature pass.
fn measure_rs(surface: &Hypersurface, rs: &[usize], order: usize) -> Result<Vec<f64>> {
    let profile = curvature_profile(surface, order)?;
    rs.iter()
        .map(|&r| {
            profile
                .entries
                .iter()
                .find(|e| e.r == r)
                .map(|e| e.value)
                .ok_or_else(|| Error::Config(format!("order {r} missing from profile")))
        })
        .collect()
}

/// Limits of the requested total curvatures of a smooth surface under a
/// shrinking offset, extrapolated from `levels` geometric offsets.
fn smooth_limit_rs(
    surface: &Hypersurface,
    rs: &[usize],
    order: usize,
    eps0: f64,
    levels: usize,
) -> Result<Vec<f64>> {
    let mut table: Vec<Vec<f64>> = vec![Vec::with_capacity(levels); rs.len()];
    for k in 0..levels {
        let eps = eps0 / (1u64 << k) as f64;
        let vals = measure_rs(&parallel_surface(surface, eps)?, rs, order)?;
        for (col, v) in table.iter_mut().zip(vals) {
            col.push(v);
        }
    }
    Ok(table.iter().map(|col| richardson(col, 2.0).0).collect())
}

/// Same limit for a raw polytope, through its exact offset atlases.
fn hull_limit_rs(
    poly: &PolytopeGeometry,
    rs: &[usize],
    order: usize,
    eps0: f64,
    levels: usize,
) -> Result<Vec<f64>> {
    let mut table: Vec<Vec<f64>> = vec![Vec::with_capacity(levels); rs.len()];
    for k in 0..levels {
        let eps = eps0 / (1u64 << k) as f64;
        let vals = measure_rs(&polytope_offset_atlas(poly, eps)?, rs, order)?;
        for (col, v) in table.iter_mut().zip(vals) {
            col.push(v);
        }
    }
    Ok(table.iter().map(|col| richardson(col, 2.0).0).collect())
}

fn safe_ratio(delta: f64, omega: f64) -> f64 {
    if omega > 1e-300 {
        delta / omega
    } else if delta == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Final-step decrease with slack for exact ties (identical sequences).
fn last_step_nonincreasing(vals: &[f64]) -> bool {
    match vals.len() {
        0 | 1 => true,
        n => vals[n - 1] <= vals[n - 2] * (1.0 + 1e-9) + 1e-15,
    }
}

fn convergence_verdicts(
    rs: &[usize],
    reference: &[f64],
    rows: &[ReportRow],
    tol: &Tolerances,
) -> Vec<Verdict> {
    let mut out = Vec::new();
    if rows.len() >= 2 {
        let (first, last) = (rows[0].hausdorff, rows[rows.len() - 1].hausdorff);
        out.push(Verdict::new(
            "hausdorff_decreases",
            last <= first * (1.0 + 1e-9) + 1e-12,
            format!("first {first:.6e} last {last:.6e}"),
        ));
    }
    for (j, &r) in rs.iter().enumerate() {
        let deltas: Vec<f64> = rows.iter().map(|row| row.delta[j]).collect();
        let scale = reference[j].abs().max(1e-12);
        let bound = tol.final_rel * scale;
        let final_delta = *deltas.last().unwrap_or(&0.0);
        let first_delta = deltas.first().copied().unwrap_or(0.0);
        let final_ok = final_delta <= bound;
        let decreased = deltas.len() < 2 || final_delta <= first_delta * (1.0 + 1e-9) + 1e-15;
        // A column that starts inside the tolerance band has nothing left to
        // converge; decrease checks are vacuous on its residual noise.
        let flat = first_delta <= bound;
        out.push(Verdict::new(
            format!("m{r}_converges"),
            final_ok && (decreased || flat),
            format!("final |delta| {final_delta:.6e}, bound {bound:.6e}, first {first_delta:.6e}"),
        ));
        out.push(Verdict::new(
            format!("m{r}_eventually_decreasing"),
            last_step_nonincreasing(&deltas) || final_delta <= bound,
            format!("deltas {:?}", deltas.iter().map(|d| format!("{d:.3e}")).collect::<Vec<_>>()),
        ));
        let usable: Vec<(f64, f64)> = rows
            .iter()
            .filter(|row| row.omega > 1e-12)
            .map(|row| (row.delta[j], row.ratio[j]))
            .filter(|(_, v)| v.is_finite())
            .collect();
        let peak = usable.iter().map(|(d, _)| *d).fold(0.0f64, f64::max);
        let (passed, detail) = if usable.len() < 3 {
            (true, format!("{} usable rows, trivially bounded", usable.len()))
        } else if peak <= bound {
            (true, format!("all deltas within the final bound {bound:.3e}"))
        } else {
            let ratios: Vec<f64> = usable.iter().map(|(_, v)| *v).collect();
            let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let med = median(ratios);
            (
                max <= tol.ratio_factor * med + 1e-12,
                format!("max {max:.6e} median {med:.6e} factor {}", tol.ratio_factor),
            )
        };
        out.push(Verdict::new(format!("ratio{r}_bounded"), passed, detail));
    }
    out
}

// ---------------------------------------------------------------------------
// Convergence runner: mesh refinement or shrinking perturbations.
// ---------------------------------------------------------------------------

/// Walk an approximating sequence of a catalog surface and check that the
/// total curvatures converge. Every member must certify the scenario's
/// uniform reach floor; a failed certificate aborts the run.
pub fn run_convergence(scenario: &Scenario) -> Result<Report> {
    let space = scenario.ambient.build()?;
    let rs = scenario.resolve_rs(&space)?;
    let order = scenario.quadrature_order;
    let base = scenario.surface.build(&space, None)?;
    let boundary = match &base {
        BaseSurface::Catalog(h) => h,
        BaseSurface::Body(_) => {
            return Err(Error::Config(
                "convergence sequences need a catalog base surface".into(),
            ))
        }
    };

    let reference = measure_rs(boundary, &rs, order)?;
    let bound = match scenario.tolerances.reach_bound {
        Some(b) => b,
        None => 0.5 * estimate_reach(boundary, order)?.epsilon,
    };
    let base_volume = region_volume_flux(boundary, order, None)?.value;

    enum Item {
        Mesh(usize),
        Bump(f64, PerturbMode, u64),
    }
    let items: Vec<Item> = match &scenario.sequence {
        SequenceSpec::MeshRefinement { resolutions } => {
            resolutions.iter().map(|&res| Item::Mesh(res)).collect()
        }
        SequenceSpec::Perturbation { amplitudes, mode, seed } => {
            amplitudes.iter().map(|&a| Item::Bump(a, *mode, *seed)).collect()
        }
        _ => {
            return Err(Error::Config(
                "convergence runner takes mesh_refinement or perturbation sequences".into(),
            ))
        }
    };

    let mut rows = Vec::with_capacity(items.len());
    for (index, item) in items.iter().enumerate() {
        let (surface, param) = match item {
            Item::Mesh(res) => (boundary.to_mesh(*res)?, *res as f64),
            Item::Bump(amp, mode, seed) => (boundary.perturb(*amp, mode, *seed)?, *amp),
        };
        let cert = certify_reach(&surface, bound, order.min(6))?;
        if !cert.passed {
            return Err(Error::Geometry(format!(
                "sequence member {index} (param {param}) failed the reach certificate at \
                 {bound}: clearance {} < required {}",
                cert.min_clearance, cert.required
            )));
        }
        let m = measure_rs(&surface, &rs, order)?;
        let delta: Vec<f64> =
            m.iter().zip(&reference).map(|(a, b)| (a - b).abs()).collect();
        let hausdorff = hausdorff_distance(&surface, boundary, 6, 4000)?.value;
        let omega = match item {
            Item::Mesh(_) => {
                (base_volume - region_volume_flux(&surface, order, None)?.value).abs()
            }
            Item::Bump(..) => radial_symmetric_difference(&surface, boundary, order)?,
        };
        let ratio = delta.iter().map(|&d| safe_ratio(d, omega)).collect();
        rows.push(ReportRow { index, param, hausdorff, reach: bound, omega, m, delta, ratio });
    }

    let mut verdicts = vec![Verdict::new(
        "reach_certified",
        true,
        format!("all {} members certified reach >= {bound}", rows.len()),
    )];
    verdicts.extend(convergence_verdicts(&rs, &reference, &rows, &scenario.tolerances));
    Ok(Report { scenario_id: scenario.id.clone(), r_values: rs, reference, rows, verdicts })
}

// ---------------------------------------------------------------------------
// Offset sweep runners.
// ---------------------------------------------------------------------------

fn eps_grid(start: f64, stop: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 {
        return Err(Error::Config("eps grid needs at least one point".into()));
    }
    if !(start >= 0.0) || !stop.is_finite() || stop < start {
        return Err(Error::Config(format!("bad eps grid [{start}, {stop}]")));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    Ok((0..points)
        .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
        .collect())
}

fn sweep_rows(scenario: &Scenario, space: &AmbientSpace, rs: &[usize]) -> Result<(Vec<f64>, Vec<ReportRow>)> {
    let order = scenario.quadrature_order;
    let base = scenario.surface.build(space, None)?;
    let boundary = base.boundary();
    let grid = match &scenario.sequence {
        SequenceSpec::EpsGrid { start, stop, points } => eps_grid(*start, *stop, *points)?,
        _ => return Err(Error::Config("sweep runners take an eps_grid sequence".into())),
    };

    let reference = measure_rs(boundary, rs, order)?;
    let base_volume = region_volume_flux(boundary, order, None)?.value;
    // Reach floor carried along the sweep: outward offsets of a smoothed
    // convex body keep reach smoothing + eps; for general catalog surfaces
    // the estimate at the base shrinks by at most eps.
    let base_floor = match &base {
        BaseSurface::Body(b) => b.smoothing,
        BaseSurface::Catalog(h) => estimate_reach(h, order.min(6))?.epsilon,
    };
    let convex_base = base.smoothing().is_some();

    let mut rows = Vec::with_capacity(grid.len());
    for (index, &eps) in grid.iter().enumerate() {
        let surface = parallel_surface(boundary, eps)?;
        let m = measure_rs(&surface, rs, order)?;
        let delta: Vec<f64> =
            m.iter().zip(&reference).map(|(a, b)| (a - b).abs()).collect();
        let omega = (region_volume_flux(&surface, order, None)?.value - base_volume).abs();
        let reach = match scenario.tolerances.certify_factor {
            Some(f) if eps > 0.0 => {
                let cert = certify_reach(&surface, f * eps, order.min(6))?;
                if !cert.passed {
                    return Err(Error::Geometry(format!(
                        "offset surface at eps {eps} failed the reach certificate at \
                         {}: clearance {} < required {}",
                        f * eps,
                        cert.min_clearance,
                        cert.required
                    )));
                }
                cert.epsilon
            }
            _ => {
                if convex_base {
                    base_floor + eps
                } else {
                    (base_floor - eps).max(0.0)
                }
            }
        };
        let ratio = delta.iter().map(|&d| safe_ratio(d, omega)).collect();
        // A normal offset realizes its Hausdorff distance exactly.
        rows.push(ReportRow { index, param: eps, hausdorff: eps, reach, omega, m, delta, ratio });
    }
    Ok((reference, rows))
}

/// Measure total curvatures along an offset grid without judging them.
pub fn run_parallel_sweep(scenario: &Scenario) -> Result<Report> {
    let space = scenario.ambient.build()?;
    let rs = scenario.resolve_rs(&space)?;
    let (reference, rows) = sweep_rows(scenario, &space, &rs)?;
    Ok(Report {
        scenario_id: scenario.id.clone(),
        r_values: rs,
        reference,
        rows,
        verdicts: Vec::new(),
    })
}

/// Offset sweep with one verdict per curvature order: the totals must be
/// nondecreasing in the offset distance, within the monotone tolerance.
pub fn run_monotonicity(scenario: &Scenario) -> Result<Report> {
    let space = scenario.ambient.build()?;
    let rs = scenario.resolve_rs(&space)?;
    let (reference, rows) = sweep_rows(scenario, &space, &rs)?;
    let tol = scenario.tolerances.monotone;
    let mut verdicts = Vec::new();
    for (j, &r) in rs.iter().enumerate() {
        let mut worst = f64::INFINITY;
        let mut at = 0;
        for i in 1..rows.len() {
            let diff = rows[i].m[j] - rows[i - 1].m[j];
            if diff < worst {
                worst = diff;
                at = i;
            }
        }
        let (passed, detail) = if rows.len() < 2 {
            (true, "single-point grid is trivially monotone".to_string())
        } else {
            (
                worst >= -tol,
                format!(
                    "smallest step {worst:.6e} at eps {:.6} (tolerance -{tol:.1e})",
                    rows[at].param
                ),
            )
        };
        verdicts.push(Verdict::new(format!("m{r}_nondecreasing"), passed, detail));
    }
    Ok(Report { scenario_id: scenario.id.clone(), r_values: rs, reference, rows, verdicts })
}

// ---------------------------------------------------------------------------
// Hull convergence runner.
// ---------------------------------------------------------------------------

/// Deterministic point samples on a catalog surface: evenly spaced angles in
/// dimension 2, a Fibonacci lattice in dimension 3.
pub fn sample_on_catalog(surf: &CatalogSurface, k: usize) -> Result<Vec<Point>> {
    let space = &surf.ambient;
    if k < space.dim + 1 {
        return Err(Error::Config(format!("need at least {} samples, got {k}", space.dim + 1)));
    }
    let tau = 2.0 * std::f64::consts::PI;
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let (u, v) = if space.dim == 2 {
            (tau * j as f64 / k as f64, 0.5)
        } else {
            let z = 1.0 - 2.0 * (j as f64 + 0.5) / k as f64;
            let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
            (z.acos(), (j as f64 * golden) % tau)
        };
        let p = surf.position(Jet2::constant(u), Jet2::constant(v));
        let pt = Point(Vec4::new(p[0].v, p[1].v, p[2].v, p[3].v));
        out.push(space.renormalize(pt));
    }
    Ok(out)
}

/// Hausdorff distance between a raw hull boundary and a catalog surface.
/// The hull side is sampled through a facet grid; the surface side measures
/// clearance through a thin offset atlas of the hull, whose signed distance
/// differs from the raw hull's by exactly the offset.
fn hull_hausdorff(
    poly: &PolytopeGeometry,
    surface: &Hypersurface,
    order: usize,
) -> Result<f64> {
    let grid = if poly.space.dim == 2 { 6 } else { 4 };
    let mut sup: f64 = 0.0;
    for q in hull_boundary_samples(poly, grid) {
        sup = sup.max(signed_distance(surface, &q)?.signed.abs());
    }
    let eps = 0.05;
    let atlas = polytope_offset_atlas(poly, eps)?;
    for node in surface.quadrature(4.max(order.min(6)))? {
        let d = signed_distance(&atlas, &node.point)?.signed + eps;
        sup = sup.max(d.max(0.0));
    }
    Ok(sup)
}

/// Walk convex hulls of ever denser samples of a catalog surface and check
/// that their limit-defined total curvatures converge to the surface's own.
/// Both sides use the shrinking-offset limit. A bound-chain diagnostic at
/// one fixed offset splits the final error into its three triangle terms.
pub fn run_theorem2(scenario: &Scenario) -> Result<Report> {
    let space = scenario.ambient.build()?;
    let rs = scenario.resolve_rs(&space)?;
    let order = scenario.quadrature_order;
    let base = scenario.surface.build(&space, None)?;
    let boundary = match &base {
        BaseSurface::Catalog(h) => h,
        BaseSurface::Body(_) => {
            return Err(Error::Config("hull convergence needs a catalog base surface".into()))
        }
    };
    let surf = boundary
        .catalog_surface()
        .ok_or_else(|| Error::Config("hull convergence needs a catalog base surface".into()))?
        .clone();
    let counts = match &scenario.sequence {
        SequenceSpec::HullSamples { counts } => counts.clone(),
        _ => {
            return Err(Error::Config(
                "hull convergence runner takes a hull_samples sequence".into(),
            ))
        }
    };

    let reference = smooth_limit_rs(boundary, &rs, order, 0.1, 4)?;
    let base_volume = region_volume_flux(boundary, order, None)?.value;

    let mut rows = Vec::with_capacity(counts.len());
    let mut last_poly: Option<PolytopeGeometry> = None;
    for (index, &k) in counts.iter().enumerate() {
        let pts = sample_on_catalog(&surf, k)?;
        let poly = polytope_from_points(&space, &pts)?;
        let m = hull_limit_rs(&poly, &rs, order, 0.08, 4)?;
        let delta: Vec<f64> =
            m.iter().zip(&reference).map(|(a, b)| (a - b).abs()).collect();
        let hausdorff = hull_hausdorff(&poly, boundary, order)?;
        let omega = (base_volume - hull_volume(&poly, order)?).abs();
        let ratio = delta.iter().map(|&d| safe_ratio(d, omega)).collect();
        rows.push(ReportRow {
            index,
            param: k as f64,
            hausdorff,
            // Raw polytopes have no positive reach; the limit defines them.
            reach: 0.0,
            omega,
            m,
            delta,
            ratio,
        });
        last_poly = Some(poly);
    }

    let mut verdicts = convergence_verdicts(&rs, &reference, &rows, &scenario.tolerances);
    if let (Some(poly), Some(last)) = (&last_poly, rows.last()) {
        let eps = scenario.tolerances.diagnostic_eps;
        let hull_at = measure_rs(&polytope_offset_atlas(poly, eps)?, &rs, order)?;
        let surf_at = measure_rs(&parallel_surface(boundary, eps)?, &rs, order)?;
        for (j, &r) in rs.iter().enumerate() {
            let lhs = last.delta[j];
            let t1 = (hull_at[j] - last.m[j]).abs();
            let t2 = (hull_at[j] - surf_at[j]).abs();
            let t3 = (surf_at[j] - reference[j]).abs();
            let rhs = t1 + t2 + t3;
            verdicts.push(Verdict::new(
                format!("bound_chain_r{r}"),
                lhs <= rhs + 1e-9 * (1.0 + lhs),
                format!(
                    "at eps {eps}: |delta| {lhs:.6e} <= {t1:.6e} + {t2:.6e} + {t3:.6e} = {rhs:.6e}"
                ),
            ));
        }
    }
    Ok(Report { scenario_id: scenario.id.clone(), r_values: rs, reference, rows, verdicts })
}

// ---------------------------------------------------------------------------
// Batch runners behind the remaining CLI commands.
// ---------------------------------------------------------------------------

/// Top-order curvature totals of seeded random bodies against the unit
/// sphere total. Rows reuse the table layout: `m` holds the measured total,
/// `delta` the signed gap to the target, `ratio` the relative residual
/// against the enclosed-area prediction where one exists (dimension 2),
/// and `omega` the enclosed area itself.
pub fn run_conjecture(
    space: &AmbientSpace,
    seed: u64,
    bodies: usize,
    params: &RandomBodyParams,
    order: usize,
) -> Result<Report> {
    if bodies == 0 {
        return Err(Error::Config("need at least one body".into()));
    }
    let top = space.dim - 1;
    let target = AmbientSpace::unit_sphere_volume(space.dim)?;
    let mut rows = Vec::with_capacity(bodies);
    let mut verdicts = Vec::with_capacity(bodies);
    for i in 0..bodies {
        let body_seed = seed.wrapping_add(i as u64);
        let body = random_convex_body(space, body_seed, params)?;
        let gap = conjecture_gap(&body, order)?;
        let residual = gap.area_residual.unwrap_or(0.0);
        rows.push(ReportRow {
            index: i,
            param: body_seed as f64,
            hausdorff: 0.0,
            reach: body.smoothing,
            omega: gap.enclosed_area.unwrap_or(0.0),
            m: vec![gap.m_top],
            delta: vec![gap.gap],
            ratio: vec![residual],
        });
        verdicts.push(Verdict::new(
            format!("body{i}_gap"),
            gap.passed,
            format!(
                "seed {body_seed}: total {:.8} target {:.8} gap {:+.3e}{}",
                gap.m_top,
                target,
                gap.gap,
                gap.area_residual
                    .map(|r| format!(" area residual {r:.3e}"))
                    .unwrap_or_default()
            ),
        ));
    }
    let kind = if space.is_hyperbolic() {
        format!("hyperbolic{}(c={})", space.dim, space.curvature_scale)
    } else {
        format!("euclidean{}", space.dim)
    };
    Ok(Report {
        scenario_id: format!("conjecture-{kind}-seed{seed}"),
        r_values: vec![top],
        reference: vec![target],
        rows,
        verdicts,
    })
}

/// Compare the pulled-back sphere-volume form against the top-order total
/// curvature on a standard set of catalog surfaces. `m` holds the pullback,
/// `delta` the absolute difference, `ratio` the relative one.
pub fn run_verify_form(space: &AmbientSpace, order: usize, tol: f64) -> Result<Report> {
    let mut surfaces: Vec<Hypersurface> = Vec::new();
    let ball = |r: f64| -> Result<Hypersurface> {
        let surf = CatalogSurface::new(
            *space,
            ShapeKind::Ball { radius: r },
            space.origin(),
            &format!("ball(r={r})"),
        )?;
        Ok(Hypersurface::catalog(surf))
    };
    surfaces.push(ball(1.0)?);
    surfaces.push(ball(0.62)?);
    if !space.is_hyperbolic() {
        let semi = if space.dim == 2 { [1.5, 0.8, 1.0] } else { [2.0, 1.0, 1.0] };
        surfaces.push(Hypersurface::catalog(CatalogSurface::new(
            *space,
            ShapeKind::Ellipsoid { semi },
            space.origin(),
            &format!("ellipsoid({},{},{})", semi[0], semi[1], semi[2]),
        )?));
        surfaces.push(Hypersurface::catalog(CatalogSurface::new(
            *space,
            ShapeKind::Superellipsoid { semi: [1.0, 1.0, 1.0], m: 2 },
            space.origin(),
            "superellipsoid(1,1,1;m=2)",
        )?));
    }
    surfaces.push(ball(1.0)?.perturb(0.12, &PerturbMode::default(), 3)?);
    surfaces.push(ball(0.9)?.perturb(0.08, &PerturbMode::single_low_frequency(), 11)?);

    let top = (space.dim - 1) as isize;
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    for (i, surface) in surfaces.iter().enumerate() {
        let pullback = gauss_form_pullback(surface, order)?.value;
        let total = total_mean_curvature(surface, top, order)?.value;
        let diff = (pullback - total).abs();
        let rel = diff / total.abs().max(1e-12);
        rows.push(ReportRow {
            index: i,
            param: 0.0,
            hausdorff: 0.0,
            reach: 0.0,
            omega: 0.0,
            m: vec![pullback],
            delta: vec![diff],
            ratio: vec![rel],
        });
        verdicts.push(Verdict::new(
            format!("form_match_{i}"),
            rel <= tol,
            format!("{}: pullback {pullback:.8} total {total:.8} rel {rel:.3e}", surface.id),
        ));
    }
    let kind = if space.is_hyperbolic() {
        format!("hyperbolic{}(c={})", space.dim, space.curvature_scale)
    } else {
        format!("euclidean{}", space.dim)
    };
    Ok(Report {
        scenario_id: format!("verify-form-{kind}"),
        r_values: vec![space.dim - 1],
        reference: vec![0.0],
        rows,
        verdicts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e3() -> AmbientSpace {
        AmbientSpace::euclidean(3).unwrap()
    }
    fn h2() -> AmbientSpace {
        AmbientSpace::hyperbolic(2, 1.0).unwrap()
    }

    fn scenario(
        id: &str,
        ambient: AmbientSpec,
        surface: SurfaceSpec,
        sequence: SequenceSpec,
    ) -> Scenario {
        Scenario {
            id: id.into(),
            ambient,
            surface,
            sequence,
            r_values: vec![],
            quadrature_order: 8,
            tolerances: Tolerances::default(),
            out_dir: None,
        }
    }

    #[test]
    fn scenario_json_round_trip_applies_defaults() {
        let text = r#"{
            "id": "demo",
            "ambient": {"kind": "hyperbolic", "dim": 2, "curvature": 1.0},
            "surface": {"kind": "ball", "radius": 1.0},
            "sequence": {"kind": "eps_grid", "start": 0.0, "stop": 0.4, "points": 5}
        }"#;
        let sc = Scenario::from_json(text).unwrap();
        assert_eq!(sc.quadrature_order, 8);
        assert_eq!(sc.tolerances.ratio_factor, 10.0);
        assert!(sc.r_values.is_empty());
        let space = sc.ambient.build().unwrap();
        assert_eq!(sc.resolve_rs(&space).unwrap(), vec![0, 1]);
        let back: Scenario =
            serde_json::from_str(&serde_json::to_string(&sc).unwrap()).unwrap();
        assert_eq!(back.id, "demo");

        let bad = text.replace("\"radius\": 1.0", "\"radius\": 1.0, \"extra\": 2");
        assert!(Scenario::from_json(&bad).is_err());
    }

    #[test]
    fn mesh_refinement_of_a_sphere_converges() {
        let mut sc = scenario(
            "mesh-sphere",
            AmbientSpec::Euclidean { dim: 3 },
            SurfaceSpec::Ball { radius: 1.0 },
            SequenceSpec::MeshRefinement { resolutions: vec![8, 16, 32] },
        );
        // Discrete Gauss totals land just above 1e-2 relative at this depth;
        // the acceptance-scale run carries the refinement twice as far.
        sc.tolerances.final_rel = 2e-2;
        let report = run_convergence(&sc).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.passed(), "verdicts:\n{}", report.verdict_lines());
        // Hausdorff and curvature errors both shrink with resolution.
        assert!(report.rows[2].hausdorff < report.rows[0].hausdorff);
        for j in 0..report.r_values.len() {
            assert!(report.rows[2].delta[j] < report.rows[0].delta[j]);
        }
        let pi = std::f64::consts::PI;
        assert!((report.reference[2] - 4.0 * pi).abs() < 1e-6);
    }

    #[test]
    fn identical_perturbation_sequence_has_zero_deltas() {
        let sc = scenario(
            "identical",
            AmbientSpec::Euclidean { dim: 3 },
            SurfaceSpec::Ball { radius: 1.0 },
            SequenceSpec::Perturbation {
                amplitudes: vec![0.0, 0.0],
                mode: PerturbMode::default(),
                seed: 4,
            },
        );
        let report = run_convergence(&sc).unwrap();
        assert!(report.passed(), "verdicts:\n{}", report.verdict_lines());
        for row in &report.rows {
            for j in 0..report.r_values.len() {
                assert_eq!(row.delta[j], 0.0);
                assert_eq!(row.ratio[j], 0.0);
            }
        }
    }

    #[test]
    fn shrinking_perturbations_of_a_circle_converge() {
        let mut sc = scenario(
            "h2-bumps",
            AmbientSpec::Hyperbolic { dim: 2, curvature: 1.0 },
            SurfaceSpec::Ball { radius: 1.0 },
            SequenceSpec::Perturbation {
                amplitudes: (0..4).map(|j| 0.05 * 0.5f64.powi(j)).collect(),
                mode: PerturbMode::default(),
                seed: 7,
            },
        );
        sc.quadrature_order = 10;
        let report = run_convergence(&sc).unwrap();
        assert!(report.passed(), "verdicts:\n{}", report.verdict_lines());
        let deltas: Vec<f64> = report.rows.iter().map(|r| r.delta[1]).collect();
        assert!(deltas.windows(2).all(|w| w[1] < w[0]), "deltas {deltas:?}");
    }

    #[test]
    fn sphere_sweep_is_monotone_with_exact_offsets() {
        let sc = scenario(
            "sphere-sweep",
            AmbientSpec::Euclidean { dim: 3 },
            SurfaceSpec::Ball { radius: 1.0 },
            SequenceSpec::EpsGrid { start: 0.0, stop: 0.5, points: 6 },
        );
        let report = run_monotonicity(&sc).unwrap();
        assert!(report.passed(), "verdicts:\n{}", report.verdict_lines());
        let pi = std::f64::consts::PI;
        for row in &report.rows {
            let eps = row.param;
            assert_eq!(row.hausdorff, eps);
            // M_1 of the offset sphere is 8 pi (1 + eps) exactly.
            assert!((row.m[1] - 8.0 * pi * (1.0 + eps)).abs() < 1e-8);
        }
        // The sweep runner shares rows with the verdict-free variant.
        let sweep = run_parallel_sweep(&sc).unwrap();
        assert!(sweep.verdicts.is_empty());
        assert_eq!(sweep.rows.len(), report.rows.len());
        assert_eq!(sweep.rows[3].m[2], report.rows[3].m[2]);
    }

    #[test]
    fn single_point_grid_passes_trivially() {
        let sc = scenario(
            "single",
            AmbientSpec::Hyperbolic { dim: 2, curvature: 1.0 },
            SurfaceSpec::Ball { radius: 0.8 },
            SequenceSpec::EpsGrid { start: 0.2, stop: 0.2, points: 1 },
        );
        let report = run_monotonicity(&sc).unwrap();
        assert_eq!(report.rows.len(), 1);
        assert!(report.passed());
    }

    #[test]
    fn random_body_sweep_is_monotone() {
        let sc = scenario(
            "h3-body-sweep",
            AmbientSpec::Hyperbolic { dim: 3, curvature: 1.0 },
            SurfaceSpec::Random { seed: 11, params: RandomBodyParams::default() },
            SequenceSpec::EpsGrid { start: 0.0, stop: 0.3, points: 5 },
        );
        let report = run_monotonicity(&sc).unwrap();
        assert!(report.passed(), "verdicts:\n{}", report.verdict_lines());
        // Smoothed convex bodies carry their reach floor along the offsets.
        let s = RandomBodyParams::default().smoothing;
        for row in &report.rows {
            assert!((row.reach - (s + row.param)).abs() < 1e-12);
        }
    }

    #[test]
    fn polygon_hulls_converge_to_the_circle_totals() {
        let sc = scenario(
            "h2-hulls",
            AmbientSpec::Hyperbolic { dim: 2, curvature: 1.0 },
            SurfaceSpec::Ball { radius: 1.0 },
            SequenceSpec::HullSamples { counts: vec![8, 16, 32, 64] },
        );
        let report = run_theorem2(&sc).unwrap();
        assert!(report.passed(), "verdicts:\n{}", report.verdict_lines());
        // M_1 of the unit circle in curvature -1 is 2 pi cosh 1.
        let want = 2.0 * std::f64::consts::PI * 1.0f64.cosh();
        assert!((report.reference[1] - want).abs() < 1e-4 * want);
        let last = report.rows.last().unwrap();
        assert!(last.delta[1] < 1e-2 * want);
        assert!(last.hausdorff < report.rows[0].hausdorff);
        assert!(last.omega < report.rows[0].omega);
    }

    #[test]
    fn sphere_hulls_approach_the_gauss_total() {
        let mut sc = scenario(
            "e3-hulls",
            AmbientSpec::Euclidean { dim: 3 },
            SurfaceSpec::Ball { radius: 1.0 },
            SequenceSpec::HullSamples { counts: vec![12, 24, 48] },
        );
        sc.r_values = vec![2];
        sc.tolerances.final_rel = 0.05;
        let report = run_theorem2(&sc).unwrap();
        let pi = std::f64::consts::PI;
        // The top-order total of every convex body is exactly 4 pi; hulls
        // must hit it up to extrapolation error.
        for row in &report.rows {
            assert!((row.m[0] - 4.0 * pi).abs() < 1e-4, "row {}: {}", row.index, row.m[0]);
        }
        assert!(report.passed(), "verdicts:\n{}", report.verdict_lines());
    }

    #[test]
    fn conjecture_batch_reports_nonnegative_gaps() {
        let report = run_conjecture(
            &h2(),
            21,
            2,
            &RandomBodyParams { count: 10, radius: 0.7, smoothing: 0.1 },
            10,
        )
        .unwrap();
        assert!(report.passed(), "verdicts:\n{}", report.verdict_lines());
        for row in &report.rows {
            assert!(row.delta[0] >= -1e-6);
            assert!(row.omega > 0.0);
        }
        // Determinism: the same seeds give byte-identical CSV.
        let again = run_conjecture(
            &h2(),
            21,
            2,
            &RandomBodyParams { count: 10, radius: 0.7, smoothing: 0.1 },
            10,
        )
        .unwrap();
        assert_eq!(report.to_csv(), again.to_csv());
    }

    #[test]
    fn form_verification_matches_on_catalog_surfaces() {
        let report = run_verify_form(&e3(), 10, 1e-4).unwrap();
        assert!(report.rows.len() >= 5);
        assert!(report.passed(), "verdicts:\n{}", report.verdict_lines());
        let hyp = run_verify_form(&h2(), 10, 1e-4).unwrap();
        assert!(hyp.passed(), "verdicts:\n{}", hyp.verdict_lines());
    }

    #[test]
    fn runners_reject_mismatched_sequences() {
        let sc = scenario(
            "bad",
            AmbientSpec::Euclidean { dim: 3 },
            SurfaceSpec::Ball { radius: 1.0 },
            SequenceSpec::EpsGrid { start: 0.0, stop: 0.1, points: 2 },
        );
        assert!(run_convergence(&sc).is_err());
        assert!(run_theorem2(&sc).is_err());
        let mut hull_seq = sc.clone();
        hull_seq.sequence = SequenceSpec::HullSamples { counts: vec![12] };
        assert!(run_monotonicity(&hull_seq).is_err());
        let mut bad_r = sc;
        bad_r.r_values = vec![7];
        assert!(run_monotonicity(&bad_r).is_err());
    }
}
