//! Ground-grid construction and orthophoto orchestration.
//!
//! The raster is centered on the camera centroid and its pixel lattice is an
//! affine function of the indices: pixel `(i, j)` sits at world
//! `(X + sx * (i - W/2 + dx), Y + sy * (j - H/2 + dy))` with half-pixel
//! offsets by default. Rows are stored north-up: image row 0 is maximum Y.

use nalgebra::{Vector2, Vector3};

use crate::field::{Aabb, GaussianField};
use crate::projection::{Frustum, ViewTransform};
use crate::rasterizer::{render, Raster, RenderOptions};
use crate::{sc, Error, Result, Scalar};

/// Ground raster definition: center, resolution, dimensions, pixel offsets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdomGridSpec<T> {
    /// World-space raster center (camera centroid).
    pub center_x: T,
    pub center_y: T,
    /// Spatial resolution: world units per pixel.
    pub sx: T,
    pub sy: T,
    /// Raster dimensions in pixels.
    pub width: usize,
    pub height: usize,
    /// Dimensionless pixel offsets; 0.5 centers rays on pixels.
    pub delta_x: T,
    pub delta_y: T,
}

impl<T: Scalar> TdomGridSpec<T> {
    pub fn new(
        center_x: T,
        center_y: T,
        sx: T,
        sy: T,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        if sx <= T::zero() || sy <= T::zero() {
            return Err(Error::Argument(format!(
                "spatial resolution must be positive, got ({sx}, {sy})"
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::Argument(
                "raster dimensions must be at least 1".into(),
            ));
        }
        let half = sc::<T>(0.5);
        Ok(TdomGridSpec {
            center_x,
            center_y,
            sx,
            sy,
            width,
            height,
            delta_x: half,
            delta_y: half,
        })
    }

    /// World x of pixel column `i`.
    pub fn world_x(&self, i: usize) -> T {
        self.center_x
            + self.sx
                * (sc::<T>(i as f64) - sc::<T>(self.width as f64) * sc::<T>(0.5) + self.delta_x)
    }

    /// World y of grid row `j`; `j` ascends south to north, so image row `r`
    /// maps to `j = height - 1 - r`.
    pub fn world_y(&self, j: usize) -> T {
        self.center_y
            + self.sy
                * (sc::<T>(j as f64) - sc::<T>(self.height as f64) * sc::<T>(0.5) + self.delta_y)
    }

    /// Orthographic frustum whose x/y box is exactly the raster footprint.
    pub fn frustum(&self, z_near: T, z_far: T) -> Result<Frustum<T>> {
        let half = sc::<T>(0.5);
        let hw = sc::<T>(self.width as f64) * self.sx * half;
        let hh = sc::<T>(self.height as f64) * self.sy * half;
        Frustum::orthographic(
            self.center_x - hw,
            self.center_x + hw,
            self.center_y - hh,
            self.center_y + hh,
            z_near,
            z_far,
        )
    }
}

/// Arithmetic mean of camera ground positions, compensated so the result is
/// stable for large point counts.
pub fn camera_centroid<T: Scalar>(positions: &[Vector2<T>]) -> Result<(T, T)> {
    if positions.is_empty() {
        return Err(Error::Argument("camera centroid of an empty set".into()));
    }
    let n = sc::<T>(positions.len() as f64);
    let mut sum = [T::zero(); 2];
    let mut comp = [T::zero(); 2];
    for p in positions {
        for (axis, v) in [p.x, p.y].into_iter().enumerate() {
            // Kahan update.
            let y = v - comp[axis];
            let t = sum[axis] + y;
            comp[axis] = (t - sum[axis]) - y;
            sum[axis] = t;
        }
    }
    Ok((sum[0] / n, sum[1] / n))
}

/// Size a centroid-centered grid so it covers the field bounds:
/// `W = 2 * ceil(max(|x_max - X|, |x_min - X|) / sx)` and likewise for H.
pub fn grid_from_field<T: Scalar>(
    bounds: &Aabb<T>,
    centroid: (T, T),
    sx: T,
    sy: T,
) -> Result<TdomGridSpec<T>> {
    if sx <= T::zero() || sy <= T::zero() {
        return Err(Error::Argument(format!(
            "spatial resolution must be positive, got ({sx}, {sy})"
        )));
    }
    let ext = bounds.extent();
    if ext.x <= T::zero() || ext.y <= T::zero() {
        return Err(Error::Argument(
            "field bounds are degenerate in x or y".into(),
        ));
    }
    let half_span = |lo: T, hi: T, c: T| (hi - c).abs().max((lo - c).abs());
    let w = (half_span(bounds.min.x, bounds.max.x, centroid.0) / sx).ceil();
    let h = (half_span(bounds.min.y, bounds.max.y, centroid.1) / sy).ceil();
    let w = 2 * w
        .to_usize()
        .ok_or_else(|| Error::Numeric("raster width overflow".into()))?;
    let h = 2 * h
        .to_usize()
        .ok_or_else(|| Error::Numeric("raster height overflow".into()))?;
    TdomGridSpec::new(centroid.0, centroid.1, sx, sy, w.max(2), h.max(2))
}

/// A rendered orthophoto with its georeferencing grid.
#[derive(Debug, Clone)]
pub struct Tdom<T> {
    pub raster: Raster<T>,
    pub grid: TdomGridSpec<T>,
}

/// Render the aligned field onto the grid, looking straight down the world
/// z-axis. The depth clip planes are derived from the field's z-bounds with
/// a 5% margin; any choice that keeps the field inside yields the same
/// raster.
pub fn render_tdom<T: Scalar>(
    field: &GaussianField<T>,
    grid: &TdomGridSpec<T>,
    background: [T; 3],
    opts: &RenderOptions<T>,
) -> Result<Tdom<T>> {
    let (z_min, z_max) = match field.bounds() {
        Some(b) => (b.min.z, b.max.z),
        None => (T::zero(), T::one()),
    };
    let margin = (sc::<T>(0.05) * (z_max - z_min)).max(sc::<T>(0.5));
    // Identity view: the camera looks along world -z from above, so depth is
    // -z and the clip interval [z_near, z_far] must contain [-z_max, -z_min].
    let frustum = grid.frustum(-(z_max + margin), -(z_min - margin))?;
    let raster = render(
        field,
        &ViewTransform::identity(),
        &frustum,
        grid,
        background,
        opts,
    )?;
    Ok(Tdom {
        raster,
        grid: *grid,
    })
}

/// Helper for nadir scenes: grid centroid from cameras when available, else
/// the field-bounds center.
pub fn centroid_or_bounds_center<T: Scalar>(
    cameras: Option<&[Vector2<T>]>,
    bounds: &Aabb<T>,
) -> Result<(T, T)> {
    match cameras {
        Some(c) if !c.is_empty() => camera_centroid(c),
        _ => {
            let half = sc::<T>(0.5);
            Ok((
                (bounds.min.x + bounds.max.x) * half,
                (bounds.min.y + bounds.max.y) * half,
            ))
        }
    }
}

/// Convenience used by tests and the oracle suite.
pub fn aabb_of_positions<T: Scalar>(positions: &[Vector3<T>]) -> Option<Aabb<T>> {
    Aabb::from_points(positions)
}
