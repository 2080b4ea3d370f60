//! Tile-based orthographic splatting.
//!
//! Gaussians are projected to pixel-space footprints once, binned to 16x16
//! pixel tiles by their 3-sigma boxes, depth-sorted front to back, and
//! alpha-blended per pixel. A Gaussian contributes to a pixel only when the
//! pixel center lies inside its 3-sigma box, so the tiled pass is exactly
//! equivalent to blending the globally sorted list at every pixel.
//!
//! Because the projection is orthographic, all rays share one direction:
//! view-dependent properties are evaluated once per Gaussian, and translating
//! the scene along the view axis changes nothing but the depth keys.

use nalgebra::{Matrix2, Vector2, Vector3};
use rayon::prelude::*;

use crate::field::GaussianField;
use crate::projection::{
    ortho_jacobian, ortho_matrix, project_covariance_dilated, Frustum, ViewTransform,
};
use crate::tdom::TdomGridSpec;
use crate::{sc, Result, Scalar};

/// Rasterization knobs. The defaults are the conventional splatting values.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions<T> {
    /// Tile edge length in pixels.
    pub tile_size: usize,
    /// Footprint cutoff in standard deviations.
    pub cutoff_sigma: T,
    /// Upper clamp on per-sample opacity.
    pub alpha_cap: T,
    /// Contributions below this opacity are skipped.
    pub skip_alpha: T,
    /// Blending stops once transmittance falls below this.
    pub stop_transmittance: T,
    /// Anti-alias dilation added to projected covariance diagonals (px^2).
    pub dilation: T,
    /// Spherical-harmonics degree used for all banks.
    pub sh_degree: usize,
}

impl<T: Scalar> Default for RenderOptions<T> {
    fn default() -> Self {
        RenderOptions {
            tile_size: 16,
            cutoff_sigma: sc(3.0),
            alpha_cap: sc(0.99),
            skip_alpha: sc(1.0 / 255.0),
            stop_transmittance: sc(1e-4),
            dilation: sc(crate::projection::DEFAULT_DILATION),
            sh_degree: 3,
        }
    }
}

/// A Gaussian projected to the raster plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ScreenGaussian<T> {
    /// Center in pixel coordinates.
    pub center: Vector2<T>,
    /// Inverse of the projected 2x2 covariance (pixel^-2).
    pub inv_cov: Matrix2<T>,
    /// View-space depth of the primitive center; smaller is nearer.
    pub depth: T,
    pub color: [T; 3],
    pub opacity: T,
    /// Half-extent of the footprint box: cutoff_sigma times the largest
    /// standard deviation of the projected covariance.
    pub radius: T,
}

impl<T: Scalar> ScreenGaussian<T> {
    fn footprint_contains(&self, pixel: &Vector2<T>) -> bool {
        (pixel.x - self.center.x).abs() <= self.radius
            && (pixel.y - self.center.y).abs() <= self.radius
    }
}

/// Per-tile lists of screen-Gaussian indices, front to back.
#[derive(Debug, Clone)]
pub struct TileGrid {
    pub tile_size: usize,
    pub tiles_x: usize,
    pub tiles_y: usize,
    pub lists: Vec<Vec<u32>>,
}

impl TileGrid {
    pub fn list(&self, tx: usize, ty: usize) -> &[u32] {
        &self.lists[ty * self.tiles_x + tx]
    }
}

/// Row-major RGB raster with per-pixel residual transmittance.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<[T; 3]>,
    pub transmittance: Vec<T>,
}

impl<T: Scalar> Raster<T> {
    pub fn filled(width: usize, height: usize, color: [T; 3]) -> Self {
        Raster {
            width,
            height,
            pixels: vec![color; width * height],
            transmittance: vec![T::one(); width * height],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> [T; 3] {
        self.pixels[y * self.width + x]
    }

    /// Quantize to 8-bit RGB, row-major.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len() * 3);
        for px in &self.pixels {
            for c in px {
                let v = (c.clamp(T::zero(), T::one()) * sc::<T>(255.0)).round();
                out.push(v.to_u8().unwrap_or(255));
            }
        }
        out
    }
}

/// Project every Gaussian of the field to the raster plane, dropping those
/// outside the orthographic box (beyond the pixel extent plus their own
/// footprint radius, or with depth outside `[z_near, z_far]`).
///
/// View-dependent banks are evaluated at the constant orthographic ray
/// direction, `(0, 0, -1)` in view space.
pub fn cull_and_project<T: Scalar>(
    field: &GaussianField<T>,
    view: &ViewTransform<T>,
    frustum: &Frustum<T>,
    grid: &TdomGridSpec<T>,
    opts: &RenderOptions<T>,
) -> Result<Vec<ScreenGaussian<T>>> {
    let proj = ortho_matrix(frustum)?;
    let jac = ortho_jacobian(frustum)?;
    let width = sc::<T>(grid.width as f64);
    let height = sc::<T>(grid.height as f64);
    let half = sc::<T>(0.5);
    let pixel_scale = Vector2::new(width * half, -height * half);
    // All orthographic rays point along -z in view space; express that in
    // the field's frame for the harmonic banks.
    let dir_world = view.rotation().transpose() * Vector3::new(T::zero(), T::zero(), -T::one());

    let mut out = Vec::new();
    for prim in field.primitives() {
        let p_view = view.transform_point(&prim.position);
        let depth = -p_view.z;
        if depth < frustum.z_near || depth > frustum.z_far {
            continue;
        }
        let ndc_x = proj[(0, 0)] * p_view.x + proj[(0, 3)];
        let ndc_y = proj[(1, 1)] * p_view.y + proj[(1, 3)];
        let px = (ndc_x + T::one()) * half * width;
        let py = (T::one() - ndc_y) * half * height;

        let act = prim.render_activated(&dir_world, opts.sh_degree)?;
        let cov3 = crate::field::covariance_from_rs(&act.rotation, &act.scale)?;
        let cov2 = project_covariance_dilated(&cov3, view, &jac, pixel_scale, opts.dilation)?;

        // Largest eigenvalue of the symmetric 2x2 sets the footprint radius.
        let mid = (cov2[(0, 0)] + cov2[(1, 1)]) * half;
        let diff = (cov2[(0, 0)] - cov2[(1, 1)]) * half;
        let lam_max = mid + (diff * diff + cov2[(0, 1)] * cov2[(0, 1)]).sqrt();
        let radius = opts.cutoff_sigma * lam_max.max(T::zero()).sqrt();

        if px < -radius || px > width + radius || py < -radius || py > height + radius {
            continue;
        }

        let det = cov2[(0, 0)] * cov2[(1, 1)] - cov2[(0, 1)] * cov2[(0, 1)];
        if det <= T::zero() {
            // Cannot happen after dilation unless the covariance collapsed
            // numerically; treat as invisible.
            continue;
        }
        let inv_cov = Matrix2::new(cov2[(1, 1)], -cov2[(0, 1)], -cov2[(0, 1)], cov2[(0, 0)]) / det;
        let color = prim.eval_color(&dir_world, opts.sh_degree)?;

        out.push(ScreenGaussian {
            center: Vector2::new(px, py),
            inv_cov,
            depth,
            color,
            opacity: act.opacity,
            radius,
        });
    }
    Ok(out)
}

/// Bin screen Gaussians into tiles by footprint-box overlap. Per-tile lists
/// are sorted by depth ascending, ties broken by primitive index ascending.
pub fn bin_tiles<T: Scalar>(
    gaussians: &[ScreenGaussian<T>],
    width: usize,
    height: usize,
    tile_size: usize,
) -> TileGrid {
    assert!(tile_size > 0, "tile size must be positive");
    let tiles_x = width.div_ceil(tile_size);
    let tiles_y = height.div_ceil(tile_size);
    let mut lists = vec![Vec::new(); tiles_x * tiles_y];
    let ts = sc::<T>(tile_size as f64);

    for (i, g) in gaussians.iter().enumerate() {
        let lo_x = ((g.center.x - g.radius) / ts).floor();
        let hi_x = ((g.center.x + g.radius) / ts).floor();
        let lo_y = ((g.center.y - g.radius) / ts).floor();
        let hi_y = ((g.center.y + g.radius) / ts).floor();
        let clamp = |v: T, max: usize| -> usize {
            v.max(T::zero())
                .min(sc::<T>(max as f64 - 1.0))
                .to_usize()
                .unwrap_or(0)
        };
        if hi_x < T::zero()
            || hi_y < T::zero()
            || lo_x >= sc::<T>(tiles_x as f64)
            || lo_y >= sc::<T>(tiles_y as f64)
        {
            continue;
        }
        let (tx0, tx1) = (clamp(lo_x, tiles_x), clamp(hi_x, tiles_x));
        let (ty0, ty1) = (clamp(lo_y, tiles_y), clamp(hi_y, tiles_y));
        for ty in ty0..=ty1 {
            for tx in tx0..=tx1 {
                lists[ty * tiles_x + tx].push(i as u32);
            }
        }
    }
    // Stable sort keeps insertion (= primitive index) order among equal depths.
    for list in &mut lists {
        list.sort_by(|&a, &b| {
            gaussians[a as usize]
                .depth
                .partial_cmp(&gaussians[b as usize].depth)
                .expect("finite depths")
        });
    }
    TileGrid {
        tile_size,
        tiles_x,
        tiles_y,
        lists,
    }
}

/// Front-to-back alpha blending at one pixel.
///
/// Each sample's opacity is the stored opacity times the Gaussian falloff at
/// the pixel, clamped to `alpha_cap`; samples below `skip_alpha` or outside
/// the footprint box are skipped without touching transmittance, and the walk
/// stops once transmittance drops below `stop_transmittance`. The returned
/// color already includes the residual background term.
pub fn blend_pixel<'a, T, I>(
    front_to_back: I,
    pixel: Vector2<T>,
    background: [T; 3],
    opts: &RenderOptions<T>,
) -> ([T; 3], T)
where
    T: Scalar + 'a,
    I: IntoIterator<Item = &'a ScreenGaussian<T>>,
{
    let mut transmittance = T::one();
    let mut rgb = [T::zero(); 3];
    for g in front_to_back {
        if transmittance < opts.stop_transmittance {
            break;
        }
        if !g.footprint_contains(&pixel) {
            continue;
        }
        let d = pixel - g.center;
        let power = -(d.dot(&(g.inv_cov * d))) * sc::<T>(0.5);
        if power > T::zero() {
            continue;
        }
        let alpha = (g.opacity * power.exp()).min(opts.alpha_cap);
        if alpha < opts.skip_alpha {
            continue;
        }
        for (out, c) in rgb.iter_mut().zip(g.color) {
            *out += transmittance * alpha * c;
        }
        transmittance *= T::one() - alpha;
    }
    for (out, b) in rgb.iter_mut().zip(background) {
        *out += transmittance * b;
    }
    (rgb, transmittance)
}

/// Render the field onto the grid: project, bin, and blend every pixel.
/// Tiles render in parallel over disjoint row bands; the result is identical
/// to a sequential pass.
pub fn render<T: Scalar>(
    field: &GaussianField<T>,
    view: &ViewTransform<T>,
    frustum: &Frustum<T>,
    grid: &TdomGridSpec<T>,
    background: [T; 3],
    opts: &RenderOptions<T>,
) -> Result<Raster<T>> {
    let screen = cull_and_project(field, view, frustum, grid, opts)?;
    let tiles = bin_tiles(&screen, grid.width, grid.height, opts.tile_size);
    let (width, height) = (grid.width, grid.height);
    let mut raster = Raster::filled(width, height, background);

    let band_rows = opts.tile_size;
    raster
        .pixels
        .par_chunks_mut(width * band_rows)
        .zip(raster.transmittance.par_chunks_mut(width * band_rows))
        .enumerate()
        .for_each(|(ty, (pixels, trans))| {
            let y0 = ty * band_rows;
            let rows = pixels.len() / width;
            for tx in 0..tiles.tiles_x {
                let list = tiles.list(tx, ty);
                let x0 = tx * tiles.tile_size;
                let x1 = (x0 + tiles.tile_size).min(width);
                for row in 0..rows {
                    for x in x0..x1 {
                        let pixel =
                            Vector2::new(sc::<T>(x as f64 + 0.5), sc::<T>((y0 + row) as f64 + 0.5));
                        let (rgb, t) = blend_pixel(
                            list.iter().map(|&i| &screen[i as usize]),
                            pixel,
                            background,
                            opts,
                        );
                        pixels[row * width + x] = rgb;
                        trans[row * width + x] = t;
                    }
                }
            }
        });
    Ok(raster)
}
