//! Orthographic splatting of 3D Gaussian fields into True Digital Orthophoto
//! Maps (TDOMs).
//!
//! A trained Gaussian field is Manhattan-aligned so the ground plane becomes
//! the xy-plane, then splatted orthographically along -z onto a georeferenced
//! ground raster. Because the projection rays are parallel, building facades
//! never leak into the map and no elevation model or occlusion detection is
//! needed. Large scenes can be planned as overlapping training cells and the
//! per-cell fields merged back into one.
//!
//! Pipeline stages map onto modules:
//!
//! - [`harmonics`]: real spherical-harmonics basis shared by all banks
//! - [`field`]: Gaussian primitives and view-dependent property evaluation
//! - [`projection`]: perspective/orthographic matrices and their Jacobians
//! - [`rasterizer`]: tile-based splatting with front-to-back alpha blending
//! - [`alignment`]: Manhattan alignment of scenes to the raster axes
//! - [`partition`]: divide-and-conquer cell planning and field merging
//! - [`tdom`]: ground-grid construction and orthophoto orchestration
//! - [`evaluation`]: edge-based geometric quality metrics, PSNR/SSIM
//! - [`io`]: field files, structure-from-motion text, rasters, configs
//!
//! All numerics are generic over the scalar type; `f64` is the working
//! precision of the command-line pipeline and the `*64` aliases below are
//! the usual entry points.

pub mod alignment;
pub mod error;
pub mod evaluation;
pub mod field;
pub mod harmonics;
pub mod io;
pub mod partition;
pub mod projection;
pub mod rasterizer;
pub mod tdom;

pub use error::{Error, Result};

/// Re-exported so downstream crates use the same linear-algebra types.
pub use nalgebra;

use num_traits::{FromPrimitive, ToPrimitive};

/// Scalar type the whole crate is generic over.
///
/// `f32` and `f64` qualify; everything numeric (fields, projections, rasters,
/// metrics) is parameterized by this so single- and double-precision builds
/// share one code path.
pub trait Scalar:
    nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum<Self>
{
}

impl<T> Scalar for T where
    T: nalgebra::RealField + FromPrimitive + ToPrimitive + Copy + Default + std::iter::Sum<T>
{
}

/// Lift an `f64` constant into the working scalar type.
pub(crate) fn sc<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

pub type GaussianField32 = field::GaussianField<f32>;
pub type GaussianField64 = field::GaussianField<f64>;
pub type GaussianPrimitive32 = field::GaussianPrimitive<f32>;
pub type GaussianPrimitive64 = field::GaussianPrimitive<f64>;
pub type Frustum32 = projection::Frustum<f32>;
pub type Frustum64 = projection::Frustum<f64>;
pub type ViewTransform32 = projection::ViewTransform<f32>;
pub type ViewTransform64 = projection::ViewTransform<f64>;
pub type Raster32 = rasterizer::Raster<f32>;
pub type Raster64 = rasterizer::Raster<f64>;
pub type RenderOptions32 = rasterizer::RenderOptions<f32>;
pub type RenderOptions64 = rasterizer::RenderOptions<f64>;
pub type RigidTransform32 = alignment::RigidTransform<f32>;
pub type RigidTransform64 = alignment::RigidTransform<f64>;
pub type TdomGridSpec32 = tdom::TdomGridSpec<f32>;
pub type TdomGridSpec64 = tdom::TdomGridSpec<f64>;
pub type PartitionPlan32 = partition::PartitionPlan<f32>;
pub type PartitionPlan64 = partition::PartitionPlan<f64>;
