//! Outward parallel flow: the surface at geodesic distance t along the unit
//! normal field, its transported curvatures, generalized tube formulas, and
//! the small-t limits and bounds built on them.
//!
//! Atlas surfaces flow exactly (first-order chart transport); meshes flow
//! their vertices along fitted normals. Flowing a flowed surface composes
//! the offsets instead of stacking wrappers.

use crate::ambient::{AmbientSpace, Point, SpaceKind};
use crate::chart::{Chart, FlowedChart};
use crate::error::{Error, Result};
use crate::hypersurface::{Hypersurface, Provenance, Repr};
use crate::measures::{curvature_profile, total_mean_curvature};
use crate::mesh::MeshData;
use crate::numeric::{adaptive_simpson, richardson};
use std::sync::Arc;

/// Principal curvature after flowing distance t:
/// k^t = (k cs + c sn) / (cs + k sn), with cs/sn the generalized
/// trigonometric pair of the ambient (cs = 1, sn = t in Euclidean space).
pub fn transported_kappa(space: &AmbientSpace, kappa: f64, t: f64) -> f64 {
    let (cs, sn) = (space.cs(t), space.sn(t));
    let c = match space.kind {
        SpaceKind::Euclidean => 0.0,
        SpaceKind::Hyperbolic => space.curvature_scale,
    };
    (kappa * cs + c * sn) / (cs + kappa * sn)
}

/// The surface at signed normal distance t. Positive t flows along the
/// outward normal. Fails when the flow would cross a focal point
/// (cs + k sn <= 0 somewhere).
pub fn parallel_surface(surface: &Hypersurface, t: f64) -> Result<Hypersurface> {
    if !t.is_finite() {
        return Err(Error::Config(format!("flow distance must be finite, got {t}")));
    }
    if t == 0.0 {
        return Ok(surface.clone());
    }
    match &surface.repr {
        Repr::Atlas(atlas) => {
            // Compose with an existing flow rather than nesting wrappers.
            if let Provenance::Flowed { base, t: t0 } = &atlas.provenance {
                return parallel_surface(base, t0 + t);
            }
            let space = surface.space;
            let charts: Vec<Arc<dyn Chart>> = atlas
                .charts
                .iter()
                .map(|c| Arc::new(FlowedChart { base: c.clone(), space, t }) as Arc<dyn Chart>)
                .collect();
            Ok(Hypersurface::from_charts(
                space,
                charts,
                Provenance::Flowed { base: Arc::new(surface.clone()), t },
                &format!("{}|flow({t})", surface.id),
            ))
        }
        Repr::Mesh(mesh) => {
            let frames = mesh.vertex_frames();
            let space = &surface.space;
            let (cs, sn) = (space.cs(t), space.sn(t));
            let mut vertices = Vec::with_capacity(mesh.vertices.len());
            for (i, v) in mesh.vertices.iter().enumerate() {
                let frame = frames[i].as_ref().ok_or_else(|| {
                    Error::Geometry(format!("vertex {i} has no fitted frame to flow along"))
                })?;
                for k in &frame.kappa[..surface.dim()] {
                    let factor = cs + k * sn;
                    if factor <= 1e-9 {
                        return Err(Error::FlowSingularity { t, kappa: *k, factor });
                    }
                }
                vertices.push(space.renormalize(Point(v.0 * cs + frame.normal * sn)));
            }
            let mesh = MeshData::new(
                *space,
                vertices,
                mesh.cells.clone(),
                mesh.orientation_anchor,
            )?;
            Ok(Hypersurface::from_mesh(mesh, &format!("{}|flow({t})", surface.id)))
        }
    }
}

/// Area of the flowed surface predicted from the base curvature profile:
/// a(t) = sum_j M_j cs(t)^(d-j) sn(t)^j, d the surface dimension. Exact for
/// smooth surfaces (the flowed area element is the product of cs + k_i sn).
pub fn steiner_area_prediction(space: &AmbientSpace, profile: &[f64], t: f64) -> f64 {
    let d = profile.len().saturating_sub(1) as i32;
    let (cs, sn) = (space.cs(t), space.sn(t));
    profile
        .iter()
        .enumerate()
        .map(|(j, m)| m * cs.powi(d - j as i32) * sn.powi(j as i32))
        .sum()
}

/// Integral over the tube [0, eps] of the s-th total curvature of the
/// parallel surfaces, by adaptive Simpson quadrature in t. With s = 0 this
/// is the volume swept between the surface and its offset.
pub fn tube_integral(surface: &Hypersurface, s: isize, eps: f64, order: usize) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("tube width must be positive, got {eps}")));
    }
    let mut failure: Option<Error> = None;
    let mut f = |t: f64| -> f64 {
        let result = parallel_surface(surface, t)
            .and_then(|s_t| total_mean_curvature(&s_t, s, order));
        match result {
            Ok(m) => m.value,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let value = adaptive_simpson(&mut f, 0.0, eps, 1e-10 * eps.max(1.0));
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(value)
}

/// Small-offset limit of the r-th total curvature: evaluate on a geometric
/// grid eps_k = eps0 / 2^k and extrapolate. The raw values are reported so
/// callers can check the expected monotone approach from above.
#[derive(Clone, Debug)]
pub struct LimitEstimate {
    pub value: f64,
    pub error_estimate: f64,
    /// (eps, M_r at eps), coarsest first.
    pub levels: Vec<(f64, f64)>,
    /// True when the values are nonincreasing as eps decreases.
    pub monotone_nonincreasing: bool,
}

pub fn limit_total_curvature(
    surface: &Hypersurface,
    r: isize,
    order: usize,
    eps0: f64,
    levels: usize,
) -> Result<LimitEstimate> {
    if levels < 2 {
        return Err(Error::Config("limit extrapolation needs at least two levels".into()));
    }
    let mut pairs = Vec::with_capacity(levels);
    for k in 0..levels {
        let eps = eps0 / (1u64 << k) as f64;
        let flowed = parallel_surface(surface, eps)?;
        pairs.push((eps, total_mean_curvature(&flowed, r, order)?.value));
    }
    // Extrapolate in eps: levels are already coarsest-first, matching the
    // h_k = h_0 / ratio^k convention of the Richardson table.
    let values: Vec<f64> = pairs.iter().map(|(_, v)| *v).collect();
    let (value, error_estimate) = richardson(&values, 2.0);
    let monotone = pairs.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12 * (1.0 + w[0].1.abs()));
    Ok(LimitEstimate { value, error_estimate, levels: pairs, monotone_nonincreasing: monotone })
}

/// One comparison-bound check: the change in M_r under an eps-offset against
/// the transported curvature bound
/// |M_r(S^eps) - M_r(S)| <= ((r+1) M_{r+1}(S^eps) + C M_{r-1}(S^eps)) eps,
/// where C is the ambient curvature magnitude. Out-of-range orders on the
/// right vanish by convention.
#[derive(Clone, Debug)]
pub struct BoundCheck {
    pub r: isize,
    pub lhs: f64,
    pub rhs: f64,
    /// rhs - lhs; nonnegative (within tolerance) when the bound holds.
    pub margin: f64,
    pub passed: bool,
}

pub fn comparison_bound_check(
    surface: &Hypersurface,
    eps: f64,
    order: usize,
    rel_tol: f64,
) -> Result<Vec<BoundCheck>> {
    let flowed = parallel_surface(surface, eps)?;
    let base_profile = curvature_profile(surface, order)?;
    let flow_profile = curvature_profile(&flowed, order)?;
    let c_bound = match surface.space.kind {
        SpaceKind::Euclidean => 0.0,
        SpaceKind::Hyperbolic => surface.space.curvature_scale,
    };
    let dim = surface.dim() as isize;
    let get = |entries: &[crate::measures::ProfileEntry], r: isize| -> f64 {
        if r < 0 || r > dim {
            0.0
        } else {
            entries[r as usize].value
        }
    };
    let mut out = Vec::new();
    for r in 0..=dim {
        let lhs = (get(&flow_profile.entries, r) - get(&base_profile.entries, r)).abs();
        let rhs = ((r + 1) as f64 * get(&flow_profile.entries, r + 1)
            + c_bound * get(&flow_profile.entries, r - 1))
            * eps;
        // Roundoff floor: quadrature noise on an exactly-zero bound must not
        // read as a violation.
        let atol = 1e-8 * (1.0 + get(&base_profile.entries, r).abs());
        let passed = lhs <= rhs * (1.0 + rel_tol) + atol;
        out.push(BoundCheck { r, lhs, rhs, margin: rhs - lhs, passed });
    }
    Ok(out)
}
