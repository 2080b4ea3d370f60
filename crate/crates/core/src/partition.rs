//! Divide-and-conquer planning for large scenes.
//!
//! Cameras are projected to the ground plane and split into an m x n grid of
//! cells holding near-equal camera counts, each cell is expanded by 20% for
//! training overlap, extra cameras are pulled in by visibility and extra
//! points by track coverage, and the per-cell fields trained elsewhere are
//! merged back with a half-open ownership rule so every primitive survives
//! exactly once.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::field::{GaussianField, GaussianPrimitive};
use crate::{sc, Error, Result, Scalar};

/// Default cell expansion ratio.
pub const DEFAULT_EXPANSION: f64 = 0.2;
/// Default visibility threshold for camera selection.
pub const DEFAULT_VISIBILITY_THRESHOLD: f64 = 0.25;

/// Axis-aligned ground rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub x_min: T,
    pub y_min: T,
    pub x_max: T,
    pub y_max: T,
}

impl<T: Scalar> Rect<T> {
    pub fn new(x_min: T, y_min: T, x_max: T, y_max: T) -> Self {
        Rect {
            x_min,
            y_min,
            x_max,
            y_max,
        }
    }

    pub fn width(&self) -> T {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> T {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> T {
        self.width() * self.height()
    }

    pub fn center(&self) -> Vector2<T> {
        let half = sc::<T>(0.5);
        Vector2::new(
            (self.x_min + self.x_max) * half,
            (self.y_min + self.y_max) * half,
        )
    }

    /// Lower-left inclusive, upper-right exclusive.
    pub fn contains_half_open(&self, p: &Vector2<T>) -> bool {
        p.x >= self.x_min && p.x < self.x_max && p.y >= self.y_min && p.y < self.y_max
    }

    pub fn contains_closed(&self, p: &Vector2<T>) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    /// Positive-area intersection.
    pub fn overlaps(&self, other: &Rect<T>) -> bool {
        self.x_min < other.x_max
            && other.x_min < self.x_max
            && self.y_min < other.y_max
            && other.y_min < self.y_max
    }

    pub fn scale_about_center(&self, factor: T) -> Rect<T> {
        let c = self.center();
        let half = sc::<T>(0.5);
        let hw = self.width() * half * factor;
        let hh = self.height() * half * factor;
        Rect::new(c.x - hw, c.y - hh, c.x + hw, c.y + hh)
    }
}

/// A camera reduced to its ground-plane position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundCamera<T> {
    pub id: u32,
    pub xy: Vector2<T>,
}

/// Pinhole camera used for visibility tests; `rotation`/`translation` map
/// world to camera coordinates with +z forward.
#[derive(Debug, Clone, PartialEq)]
pub struct PerspectiveCamera<T> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
    pub width: T,
    pub height: T,
}

impl<T: Scalar> PerspectiveCamera<T> {
    pub fn center(&self) -> Vector3<T> {
        -(self.rotation.transpose() * self.translation)
    }

    /// Project a world point to pixels; `None` behind the camera.
    pub fn project(&self, p: &Vector3<T>) -> Option<Vector2<T>> {
        let c = self.rotation * p + self.translation;
        if c.z <= sc::<T>(1e-9) {
            return None;
        }
        Some(Vector2::new(
            self.fx * c.x / c.z + self.cx,
            self.fy * c.y / c.z + self.cy,
        ))
    }
}

/// A camera with everything planning needs.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanCamera<T> {
    pub id: u32,
    pub ground: Vector2<T>,
    pub camera: PerspectiveCamera<T>,
}

/// A sparse point with the ids of the images observing it.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanPoint<T> {
    pub id: u64,
    pub position: Vector3<T>,
    pub track: Vec<u32>,
}

/// One planning cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell<T> {
    pub ix: usize,
    pub iy: usize,
    pub base: Rect<T>,
    pub expanded: Rect<T>,
    /// Selected camera ids, ascending.
    pub cameras: Vec<u32>,
    /// Selected point ids, ascending.
    pub points: Vec<u64>,
}

/// The full m x n plan. Cells are stored column-major: `cells[ix * n + iy]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionPlan<T> {
    pub m: usize,
    pub n: usize,
    pub bounds: Rect<T>,
    pub cells: Vec<Cell<T>>,
}

/// Midpoint split positions of `count` sorted values into `parts` quantile
/// sections. `None` when coincident values make a boundary unsnappable.
fn quantile_boundaries<T: Scalar>(sorted: &[T], parts: usize) -> Option<Vec<T>> {
    let n = sorted.len();
    let mut bounds = Vec::with_capacity(parts - 1);
    for k in 1..parts {
        let c = k * n / parts;
        if sorted[c - 1] == sorted[c] {
            return None;
        }
        bounds.push((sorted[c - 1] + sorted[c]) * sc::<T>(0.5));
    }
    Some(bounds)
}

fn equal_width_boundaries<T: Scalar>(lo: T, hi: T, parts: usize) -> Vec<T> {
    (1..parts)
        .map(|k| lo + (hi - lo) * sc::<T>(k as f64) / sc::<T>(parts as f64))
        .collect()
}

/// Split cameras into an m x n grid of cells balanced by camera count.
///
/// The x-axis is cut into m sections at camera-count quantiles with the cut
/// snapped to the midpoint between the adjacent cameras, then each section is
/// cut along y into n cells the same way. Coincident cameras that make a
/// quantile cut impossible trigger an equal-width fallback for that axis
/// (with a warning); seed membership stays quantile-based either way so the
/// per-cell camera counts remain balanced.
pub fn partition_cameras<T: Scalar>(
    cameras: &[GroundCamera<T>],
    m: usize,
    n: usize,
) -> Result<PartitionPlan<T>> {
    if m == 0 || n == 0 {
        return Err(Error::Argument("grid dimensions must be positive".into()));
    }
    if cameras.len() < m * n {
        return Err(Error::Planning(format!(
            "{} cameras cannot fill a {m}x{n} grid",
            cameras.len()
        )));
    }
    if cameras
        .iter()
        .any(|c| !c.xy.x.is_finite() || !c.xy.y.is_finite())
    {
        return Err(Error::Argument("non-finite camera position".into()));
    }

    let mut order: Vec<usize> = (0..cameras.len()).collect();
    order.sort_by(|&a, &b| {
        cameras[a]
            .xy
            .x
            .partial_cmp(&cameras[b].xy.x)
            .unwrap()
            .then(cameras[a].id.cmp(&cameras[b].id))
    });
    let xs: Vec<T> = order.iter().map(|&i| cameras[i].xy.x).collect();
    let ys_all: Vec<T> = cameras.iter().map(|c| c.xy.y).collect();
    let x_lo = xs[0];
    let x_hi = xs[xs.len() - 1];
    let y_lo = ys_all
        .iter()
        .copied()
        .fold(T::max_value().unwrap(), |a, b| a.min(b));
    let y_hi = ys_all
        .iter()
        .copied()
        .fold(-T::max_value().unwrap(), |a, b| a.max(b));

    let x_bounds = match quantile_boundaries(&xs, m) {
        Some(b) => b,
        None => {
            log::warn!("coincident camera x-coordinates: falling back to equal-width columns");
            equal_width_boundaries(x_lo, x_hi, m)
        }
    };

    let mut cells = Vec::with_capacity(m * n);
    let count = cameras.len();
    for ix in 0..m {
        let sec_lo = ix * count / m;
        let sec_hi = (ix + 1) * count / m;
        let mut section: Vec<usize> = order[sec_lo..sec_hi].to_vec();
        section.sort_by(|&a, &b| {
            cameras[a]
                .xy
                .y
                .partial_cmp(&cameras[b].xy.y)
                .unwrap()
                .then(cameras[a].id.cmp(&cameras[b].id))
        });
        let ys: Vec<T> = section.iter().map(|&i| cameras[i].xy.y).collect();
        let y_bounds = match quantile_boundaries(&ys, n) {
            Some(b) => b,
            None => {
                log::warn!("coincident camera y-coordinates in column {ix}: equal-width fallback");
                equal_width_boundaries(y_lo, y_hi, n)
            }
        };
        let rect_x = (
            if ix == 0 { x_lo } else { x_bounds[ix - 1] },
            if ix + 1 == m { x_hi } else { x_bounds[ix] },
        );
        let sec_count = section.len();
        for iy in 0..n {
            let cell_lo = iy * sec_count / n;
            let cell_hi = (iy + 1) * sec_count / n;
            let mut ids: Vec<u32> = section[cell_lo..cell_hi]
                .iter()
                .map(|&i| cameras[i].id)
                .collect();
            ids.sort_unstable();
            let base = Rect::new(
                rect_x.0,
                if iy == 0 { y_lo } else { y_bounds[iy - 1] },
                rect_x.1,
                if iy + 1 == n { y_hi } else { y_bounds[iy] },
            );
            cells.push(Cell {
                ix,
                iy,
                base,
                expanded: base,
                cameras: ids,
                points: Vec::new(),
            });
        }
    }

    Ok(PartitionPlan {
        m,
        n,
        bounds: Rect::new(x_lo, y_lo, x_hi, y_hi),
        cells,
    })
}

/// Expand a cell's training region by `ratio` about its center: a 10 x 10
/// base with the default 0.2 becomes 12 x 12.
pub fn expand_cell<T: Scalar>(cell: &Cell<T>, ratio: T) -> Result<Cell<T>> {
    if ratio < T::zero() {
        return Err(Error::Argument(format!(
            "expansion ratio must be non-negative, got {ratio}"
        )));
    }
    let mut out = cell.clone();
    out.expanded = cell.base.scale_about_center(T::one() + ratio);
    Ok(out)
}

impl<T: Scalar> PartitionPlan<T> {
    /// Stretch the outermost cell edges so the base rectangles tile `rect`
    /// instead of just the camera bounding box. Interior cuts are untouched.
    pub fn stretch_to(&mut self, rect: Rect<T>) -> Result<()> {
        if rect.x_min > self.bounds.x_min
            || rect.y_min > self.bounds.y_min
            || rect.x_max < self.bounds.x_max
            || rect.y_max < self.bounds.y_max
        {
            return Err(Error::Argument(
                "target rectangle does not contain the plan bounds".into(),
            ));
        }
        for cell in &mut self.cells {
            if cell.ix == 0 {
                cell.base.x_min = rect.x_min;
            }
            if cell.ix + 1 == self.m {
                cell.base.x_max = rect.x_max;
            }
            if cell.iy == 0 {
                cell.base.y_min = rect.y_min;
            }
            if cell.iy + 1 == self.n {
                cell.base.y_max = rect.y_max;
            }
            cell.expanded = cell.base;
        }
        self.bounds = rect;
        Ok(())
    }

    pub fn expand_all(&mut self, ratio: T) -> Result<()> {
        for cell in &mut self.cells {
            *cell = expand_cell(cell, ratio)?;
        }
        Ok(())
    }

    /// Deterministic, human-readable manifest of the plan.
    pub fn to_manifest(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "tortho partition plan v1");
        let _ = writeln!(out, "grid {} {}", self.m, self.n);
        let _ = writeln!(
            out,
            "bounds {} {} {} {}",
            self.bounds.x_min, self.bounds.y_min, self.bounds.x_max, self.bounds.y_max
        );
        for cell in &self.cells {
            let _ = writeln!(out, "cell {} {}", cell.ix, cell.iy);
            let _ = writeln!(
                out,
                "base {} {} {} {}",
                cell.base.x_min, cell.base.y_min, cell.base.x_max, cell.base.y_max
            );
            let _ = writeln!(
                out,
                "expanded {} {} {} {}",
                cell.expanded.x_min, cell.expanded.y_min, cell.expanded.x_max, cell.expanded.y_max
            );
            let ids: Vec<String> = cell.cameras.iter().map(|id| id.to_string()).collect();
            let _ = writeln!(out, "cameras {}", ids.join(" "));
            let _ = writeln!(out, "points {}", cell.points.len());
        }
        out
    }
}

/// Monotone-chain convex hull; input order does not matter.
fn convex_hull<T: Scalar>(mut points: Vec<Vector2<T>>) -> Vec<Vector2<T>> {
    points.sort_by(|a, b| {
        a.x.partial_cmp(&b.x)
            .unwrap()
            .then(a.y.partial_cmp(&b.y).unwrap())
    });
    points.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if points.len() < 3 {
        return points;
    }
    let cross = |o: &Vector2<T>, a: &Vector2<T>, b: &Vector2<T>| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut lower: Vec<Vector2<T>> = Vec::with_capacity(points.len() + 1);
    for p in &points {
        while lower.len() >= 2
            && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= T::zero()
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Vector2<T>> = Vec::with_capacity(points.len() + 1);
    for p in points.iter().rev() {
        while upper.len() >= 2
            && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= T::zero()
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Sutherland-Hodgman clip of a convex polygon to `[0, w] x [0, h]`.
fn clip_to_image<T: Scalar>(poly: &[Vector2<T>], w: T, h: T) -> Vec<Vector2<T>> {
    let planes: [(Vector2<T>, T); 4] = [
        (Vector2::new(T::one(), T::zero()), T::zero()), // x >= 0
        (Vector2::new(-T::one(), T::zero()), -w),       // x <= w
        (Vector2::new(T::zero(), T::one()), T::zero()), // y >= 0
        (Vector2::new(T::zero(), -T::one()), -h),       // y <= h
    ];
    let mut current = poly.to_vec();
    for (normal, offset) in planes {
        if current.is_empty() {
            break;
        }
        let inside = |p: &Vector2<T>| normal.dot(p) >= offset;
        let mut next = Vec::with_capacity(current.len() + 4);
        for i in 0..current.len() {
            let a = current[i];
            let b = current[(i + 1) % current.len()];
            let (ia, ib) = (inside(&a), inside(&b));
            if ia {
                next.push(a);
            }
            if ia != ib {
                let da = normal.dot(&a) - offset;
                let db = normal.dot(&b) - offset;
                let t = da / (da - db);
                next.push(a + (b - a) * t);
            }
        }
        current = next;
    }
    current
}

fn polygon_area<T: Scalar>(poly: &[Vector2<T>]) -> T {
    if poly.len() < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    for i in 0..poly.len() {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        acc += a.x * b.y - b.x * a.y;
    }
    acc.abs() * sc::<T>(0.5)
}

/// Visibility of a cell from a camera: the 8 corners of
/// `expanded_rect x z_range` are projected, their convex hull is clipped to
/// the image rectangle, and the clipped area over the image area is
/// returned. A cell behind the camera scores 0.
pub fn camera_visibility<T: Scalar>(
    cell: &Cell<T>,
    cam: &PerspectiveCamera<T>,
    z_range: (T, T),
) -> T {
    rect_visibility(&cell.expanded, cam, z_range)
}

/// Visibility of an arbitrary ground rectangle; see [`camera_visibility`].
pub fn rect_visibility<T: Scalar>(
    rect: &Rect<T>,
    cam: &PerspectiveCamera<T>,
    z_range: (T, T),
) -> T {
    let mut projected = Vec::with_capacity(8);
    for x in [rect.x_min, rect.x_max] {
        for y in [rect.y_min, rect.y_max] {
            for z in [z_range.0, z_range.1] {
                if let Some(px) = cam.project(&Vector3::new(x, y, z)) {
                    projected.push(px);
                }
            }
        }
    }
    if projected.len() < 3 {
        return T::zero();
    }
    let hull = convex_hull(projected);
    let clipped = clip_to_image(&hull, cam.width, cam.height);
    (polygon_area(&clipped) / (cam.width * cam.height)).clamp(T::zero(), T::one())
}

/// Fill each cell's camera set: cameras standing inside the expanded cell
/// plus cameras whose visibility exceeds the threshold. An empty set leaves
/// the cell untrainable and is an error.
pub fn select_cameras<T: Scalar>(
    plan: &mut PartitionPlan<T>,
    cameras: &[PlanCamera<T>],
    threshold: T,
    z_range: (T, T),
) -> Result<()> {
    for cell in &mut plan.cells {
        let mut ids: Vec<u32> = cameras
            .iter()
            .filter(|c| {
                cell.expanded.contains_closed(&c.ground)
                    || rect_visibility(&cell.expanded, &c.camera, z_range) > threshold
            })
            .map(|c| c.id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.is_empty() {
            return Err(Error::Planning(format!(
                "cell ({}, {}) selected no cameras",
                cell.ix, cell.iy
            )));
        }
        cell.cameras = ids;
    }
    Ok(())
}

/// Fill each cell's point set: points inside the expanded cell plus points
/// whose track intersects the cell's camera set.
pub fn select_points<T: Scalar>(plan: &mut PartitionPlan<T>, points: &[PlanPoint<T>]) {
    for cell in &mut plan.cells {
        let mut ids: Vec<u64> = points
            .iter()
            .filter(|p| {
                cell.expanded
                    .contains_closed(&Vector2::new(p.position.x, p.position.y))
                    || p.track
                        .iter()
                        .any(|t| cell.cameras.binary_search(t).is_ok())
            })
            .map(|p| p.id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        cell.points = ids;
    }
}

/// Merge per-cell fields into one: each cell keeps exactly the primitives
/// whose center lies in its base rectangle (lower-left inclusive,
/// upper-right exclusive), so primitives in the overlapped training margins
/// appear exactly once.
pub fn merge_fields<T: Scalar>(
    subfields: &[GaussianField<T>],
    cells: &[Cell<T>],
) -> Result<GaussianField<T>> {
    if subfields.len() != cells.len() {
        return Err(Error::Argument(format!(
            "{} fields for {} cells",
            subfields.len(),
            cells.len()
        )));
    }
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            if cells[i].base.overlaps(&cells[j].base) {
                return Err(Error::Planning(format!(
                    "cells ({}, {}) and ({}, {}) have overlapping base rectangles",
                    cells[i].ix, cells[i].iy, cells[j].ix, cells[j].iy
                )));
            }
        }
    }
    let flags: Vec<bool> = subfields
        .iter()
        .filter(|f| !f.is_empty())
        .map(|f| f.fagk_enabled())
        .collect();
    if flags.windows(2).any(|w| w[0] != w[1]) {
        return Err(Error::Format(
            "cannot merge fields with mixed anisotropic banks".into(),
        ));
    }

    let mut primitives: Vec<GaussianPrimitive<T>> = Vec::new();
    for (field, cell) in subfields.iter().zip(cells) {
        for p in field.primitives() {
            if cell
                .base
                .contains_half_open(&Vector2::new(p.position.x, p.position.y))
            {
                primitives.push(p);
            }
        }
    }
    GaussianField::from_primitives(primitives)
}
