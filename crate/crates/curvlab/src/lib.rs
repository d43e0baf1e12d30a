//! curvlab: a numerical laboratory for total mean curvatures
//! M_r = integral of the r-th elementary symmetric polynomial of principal
//! curvatures, for closed positive-reach hypersurfaces in Euclidean and
//! hyperbolic model spaces.
//!
//! The crate measures curvature profiles on parametric and mesh surfaces,
//! flows outer parallel hypersurfaces, certifies reach by double-ball tests,
//! builds convex hull bodies in both ambients, and runs the experiment
//! harness behind the `curvlab` binary.

pub mod ambient;
pub mod chart;
pub mod convex;
pub mod distfield;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod polytope;
pub mod hypersurface;
pub mod jet;
pub mod measures;
pub mod mesh;
pub mod numeric;
pub mod report;

pub use ambient::{AmbientSpace, Point, SpaceKind, Vec4};
pub use error::{Error, Result};
