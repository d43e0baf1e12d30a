//! Randomized checks of the geometric contracts the library is built on:
//! metric axioms of the ambient spaces, exactness of the exponential map,
//! algebraic identities of the symmetric functions, scaling covariance of the
//! curvature totals, and containment behavior of hulls and offsets.

use curvlab::chart::{CatalogSurface, ShapeKind};
use curvlab::convex::hull_body;
use curvlab::distfield::{hausdorff_distance, signed_distance};
use curvlab::hypersurface::Hypersurface;
use curvlab::measures::{curvature_profile, sigma_r};
use curvlab::{AmbientSpace, Point, Vec4};
use proptest::prelude::*;

fn spaces() -> Vec<AmbientSpace> {
    vec![
        AmbientSpace::euclidean(2).unwrap(),
        AmbientSpace::euclidean(3).unwrap(),
        AmbientSpace::hyperbolic(2, 1.0).unwrap(),
        AmbientSpace::hyperbolic(3, 0.7).unwrap(),
    ]
}

/// Map a raw coordinate triple into a point of `space`. Euclidean points use
/// the coordinates directly; hyperbolic points read them as Klein
/// coordinates, scaled so every triple in (-1, 1)^3 stays inside the disk.
fn embed(space: &AmbientSpace, raw: [f64; 3]) -> Point {
    if space.is_hyperbolic() {
        let s = 0.55 / (space.dim as f64).sqrt();
        let mut k = Vec4::zeros();
        for i in 0..space.dim {
            k[i] = raw[i] * s;
        }
        space.from_klein(&k).unwrap()
    } else {
        space
            .point_from_slice(&raw[..space.dim].iter().map(|c| 1.5 * c).collect::<Vec<_>>())
            .unwrap()
    }
}

fn coord() -> impl Strategy<Value = f64> {
    -1.0..1.0f64
}

fn raw_point() -> impl Strategy<Value = [f64; 3]> {
    [coord(), coord(), coord()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    // d(a, c) never exceeds d(a, b) + d(b, c), in every model space.
    #[test]
    fn distance_satisfies_the_triangle_inequality(
        a in raw_point(),
        b in raw_point(),
        c in raw_point(),
    ) {
        // Near-coincident triples probe acosh conditioning (abs error ~1e-8
        // at distance ~1e-7), not geometry; keep the triples generic.
        for (x, y) in [(&a, &b), (&b, &c), (&a, &c)] {
            let gap: f64 = x.iter().zip(y.iter()).map(|(u, v)| (u - v) * (u - v)).sum();
            prop_assume!(gap.sqrt() >= 1e-3);
        }
        for space in spaces() {
            let (pa, pb, pc) = (embed(&space, a), embed(&space, b), embed(&space, c));
            let lhs = space.distance(&pa, &pc);
            let rhs = space.distance(&pa, &pb) + space.distance(&pb, &pc);
            prop_assert!(
                lhs <= rhs + 1e-9,
                "triangle violated by {:.3e} in {:?}", lhs - rhs, space.kind
            );
            // Symmetry and identity come along for free. Self-distance sits
            // at the acosh floor (~1e-8), not at rounding level.
            prop_assert!((space.distance(&pc, &pa) - lhs).abs() <= 1e-12 * (1.0 + lhs));
            prop_assert!(space.distance(&pa, &pa) <= 1e-7);
        }
    }

    // Geodesics are unit-speed: |d(p, exp_p(v)) - |v|| stays at rounding level.
    #[test]
    fn exp_map_runs_at_unit_speed(
        p in raw_point(),
        coeffs in [(-2.0..2.0f64), (-2.0..2.0f64), (-2.0..2.0f64)],
    ) {
        for space in spaces() {
            let base = embed(&space, p);
            let frame = space.tangent_basis(&base);
            let mut v = Vec4::zeros();
            for (e, c) in frame.iter().zip(coeffs.iter()) {
                v += e * *c;
            }
            let speed = space.norm(&v);
            let q = space.exp_map(&base, &v);
            let err = (space.distance(&base, &q) - speed).abs();
            prop_assert!(err < 1e-9, "speed drift {err:.3e} in {:?}", space.kind);
        }
    }

    // The exponential map never leaves the hyperboloid sheet.
    #[test]
    fn exp_map_preserves_the_sheet(
        p in raw_point(),
        coeffs in [(-2.0..2.0f64), (-2.0..2.0f64), (-2.0..2.0f64)],
    ) {
        for space in spaces().into_iter().filter(|s| s.is_hyperbolic()) {
            let base = embed(&space, p);
            let frame = space.tangent_basis(&base);
            let mut v = Vec4::zeros();
            for (e, c) in frame.iter().zip(coeffs.iter()) {
                v += e * *c;
            }
            let q = space.exp_map(&base, &v);
            let qc = q.coords();
            let residual = (space.inner(&qc, &qc) + 1.0 / space.curvature_scale).abs();
            prop_assert!(residual <= 1e-10, "sheet drift {residual:.3e}");
            prop_assert!(qc[0] > 0.0, "left the upper sheet");
        }
    }

    // prod_i (1 + t k_i) = sum_r sigma_r(k) t^r, and sigma vanishes outside
    // the 0..=len range.
    #[test]
    fn sigma_matches_its_generating_polynomial(
        kappa in prop::collection::vec(-3.0..3.0f64, 1..=2),
        t in -1.0..1.0f64,
    ) {
        let lhs: f64 = kappa.iter().map(|k| 1.0 + t * k).product();
        let mut rhs = 0.0;
        for r in 0..=kappa.len() {
            rhs += sigma_r(&kappa, r as isize) * t.powi(r as i32);
        }
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        prop_assert_eq!(sigma_r(&kappa, -1), 0.0);
        prop_assert_eq!(sigma_r(&kappa, kappa.len() as isize + 1), 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // Scaling a Euclidean surface by lambda multiplies M_r by lambda^(n-1-r).
    // Matched quadrature nodes scale exactly, so truncation error cancels in
    // the comparison and the tolerance can sit near rounding level.
    #[test]
    fn euclidean_totals_obey_the_scaling_law(
        dim in 2usize..=3,
        lambda in 0.5..2.2f64,
        semi in [(0.6..1.8f64), (0.6..1.8f64), (0.6..1.8f64)],
        round in proptest::bool::ANY,
    ) {
        let space = AmbientSpace::euclidean(dim).unwrap();
        let kind = |s: f64| {
            if round {
                ShapeKind::Ball { radius: s * semi[0] }
            } else {
                ShapeKind::Ellipsoid { semi: [s * semi[0], s * semi[1], s * semi[2]] }
            }
        };
        let surface = |s: f64| {
            Hypersurface::catalog(
                CatalogSurface::new(space, kind(s), space.origin(), "scaling").unwrap(),
            )
        };
        let base = curvature_profile(&surface(1.0), 6).unwrap();
        let scaled = curvature_profile(&surface(lambda), 6).unwrap();
        for (b, s) in base.entries.iter().zip(scaled.entries.iter()) {
            let expect = b.value * lambda.powi((dim - 1 - b.r) as i32);
            prop_assert!(
                (s.value - expect).abs() <= 1e-10 * (1.0 + expect.abs()),
                "r={} got {} want {expect}", b.r, s.value
            );
        }
    }

    // Reversing the orientation negates every principal curvature and the
    // normal, node for node, leaving |kappa| unchanged.
    #[test]
    fn orientation_flip_negates_curvatures(
        which in 0usize..3,
        radius in 0.5..1.5f64,
        semi in [(0.7..1.6f64), (0.7..1.6f64), (0.7..1.6f64)],
    ) {
        let (space, kind) = match which {
            0 => (
                AmbientSpace::euclidean(3).unwrap(),
                ShapeKind::Ellipsoid { semi },
            ),
            1 => (
                AmbientSpace::hyperbolic(3, 1.0).unwrap(),
                ShapeKind::Ball { radius },
            ),
            _ => (
                AmbientSpace::euclidean(2).unwrap(),
                ShapeKind::Ellipsoid { semi },
            ),
        };
        let surf = Hypersurface::catalog(
            CatalogSurface::new(space, kind, space.origin(), "flip").unwrap(),
        );
        let flipped = surf.flip().unwrap();
        let orig = surf.quadrature(5).unwrap();
        let rev = flipped.quadrature(5).unwrap();
        prop_assert_eq!(orig.len(), rev.len());
        for (o, f) in orig.iter().zip(rev.iter()) {
            prop_assert!((o.normal + f.normal).norm() <= 1e-9);
            let d = o.dim;
            let mut want: Vec<f64> = o.kappa[..d].iter().map(|k| -k).collect();
            let mut got: Vec<f64> = f.kappa[..d].to_vec();
            want.sort_by(f64::total_cmp);
            got.sort_by(f64::total_cmp);
            for (w, g) in want.iter().zip(got.iter()) {
                prop_assert!((w - g).abs() <= 1e-9 * (1.0 + w.abs()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    // Sampled Hausdorff distances still satisfy the triangle inequality once
    // the sup-side sampling bias (bounded by the reported node spacing of the
    // two right-hand estimates) is allowed for.
    #[test]
    fn hausdorff_estimates_satisfy_the_triangle_inequality(
        which in 0usize..3,
        radii in [(0.5..1.6f64), (0.5..1.6f64), (0.5..1.6f64)],
        centers in [raw_point(), raw_point(), raw_point()],
    ) {
        let space = match which {
            0 => AmbientSpace::euclidean(3).unwrap(),
            1 => AmbientSpace::hyperbolic(2, 1.0).unwrap(),
            _ => AmbientSpace::hyperbolic(3, 1.0).unwrap(),
        };
        let ball = |radius: f64, c: [f64; 3]| {
            let center = embed(&space, [0.3 * c[0], 0.3 * c[1], 0.3 * c[2]]);
            Hypersurface::catalog(
                CatalogSurface::new(space, ShapeKind::Ball { radius }, center, "h").unwrap(),
            )
        };
        let a = ball(radii[0], centers[0]);
        let b = ball(radii[1], centers[1]);
        let c = ball(radii[2], centers[2]);
        let ac = hausdorff_distance(&a, &c, 4, 300).unwrap();
        let ab = hausdorff_distance(&a, &b, 4, 300).unwrap();
        let bc = hausdorff_distance(&b, &c, 4, 300).unwrap();
        let slack = 3.0 * (ab.density + bc.density) + 1e-9;
        prop_assert!(
            ac.value <= ab.value + bc.value + slack,
            "{} > {} + {} (+{slack:.3})", ac.value, ab.value, bc.value
        );
    }

    // Growing the generating point set grows the hull: the smoothed boundary
    // of the smaller body never pokes outside the larger one's.
    #[test]
    fn hull_of_a_subset_stays_inside(
        hyper in proptest::bool::ANY,
        raw in prop::collection::vec(raw_point(), 10),
    ) {
        let space = if hyper {
            AmbientSpace::hyperbolic(2, 1.0).unwrap()
        } else {
            AmbientSpace::euclidean(3).unwrap()
        };
        let points: Vec<Point> = raw.iter().map(|r| {
            embed(&space, [0.8 * r[0], 0.8 * r[1], 0.8 * r[2]])
        }).collect();
        let inner = hull_body(&points[..6], &space, 0.1);
        let outer = hull_body(&points, &space, 0.1);
        prop_assume!(inner.is_ok() && outer.is_ok());
        let (inner, outer) = (inner.unwrap(), outer.unwrap());
        for node in inner.boundary.quadrature(4).unwrap() {
            let sd = signed_distance(&outer.boundary, &node.point).unwrap().signed;
            prop_assert!(sd <= 1e-6, "inner boundary escapes by {sd:.3e}");
        }
    }
}
