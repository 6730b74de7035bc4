//! Remodeling-based de-identification of volumetric head scans.
//!
//! The pipeline estimates a head surface by randomized ray casting, wraps it
//! in a convex hull, and keeps only the hull, the brain mask and the brain
//! intensities as the privacy transform. A remodeler synthesizes a new head
//! from that transform and the original brain is composited back unchanged.

pub mod deid;
pub mod error;
pub mod eval;
pub mod hull;
pub mod io;
pub mod rng;
pub mod rotation;
pub mod surface;
pub mod transform;
pub mod volume;

pub use deid::{composite, deidentify, deidentify_with, DeidMethod, DeidParams, ReferenceRemodel, Remodeler};
pub use error::{Error, Result};
pub use hull::{convex_hull, voxelize_hull, Point3, TriMesh, TriangleSelection};
pub use rng::Seed;
pub use surface::{surface_representation, SurfaceParams};
pub use transform::{build_privacy_transform, build_pyramid, PrivacyTransform, Pyramid};
pub use volume::Volume;
