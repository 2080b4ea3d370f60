//! Canny edge detection with 3x3 Sobel gradients.
//!
//! No smoothing is applied internally; callers working on noisy rasters
//! should pre-filter. The low hysteresis threshold is fixed at half the high
//! threshold, and hysteresis linking is 8-connected.

use crate::rasterizer::Raster;
use crate::{sc, Error, Result, Scalar};

/// Single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayRaster<T> {
    pub width: usize,
    pub height: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> GrayRaster<T> {
    pub fn new(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height);
        GrayRaster {
            width,
            height,
            data,
        }
    }

    /// Rec. 601 luma of an RGB raster, scaled to [0, 255].
    pub fn luma_of(raster: &Raster<T>) -> Self {
        let data = raster
            .pixels
            .iter()
            .map(|[r, g, b]| {
                (sc::<T>(0.299) * *r + sc::<T>(0.587) * *g + sc::<T>(0.114) * *b) * sc::<T>(255.0)
            })
            .collect();
        GrayRaster {
            width: raster.width,
            height: raster.height,
            data,
        }
    }

    pub fn crop(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        assert!(x0 + width <= self.width && y0 + height <= self.height);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            let row = (y0 + y) * self.width + x0;
            data.extend_from_slice(&self.data[row..row + width]);
        }
        GrayRaster {
            width,
            height,
            data,
        }
    }

    fn at(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }
}

/// Binary edge mask, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl EdgeMap {
    pub fn at(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }
}

/// Detect edges: Sobel gradients, non-maximum suppression along the
/// quantized gradient direction, then hysteresis with `low = high / 2`.
pub fn canny_edges<T: Scalar>(image: &GrayRaster<T>, high_threshold: T) -> Result<EdgeMap> {
    if high_threshold <= T::zero() {
        return Err(Error::Argument(format!(
            "high threshold must be positive, got {high_threshold}"
        )));
    }
    let (w, h) = (image.width, image.height);
    let mut edges = EdgeMap {
        width: w,
        height: h,
        data: vec![false; w * h],
    };
    if w < 3 || h < 3 {
        return Ok(edges);
    }

    let two = sc::<T>(2.0);
    let mut gx = vec![T::zero(); w * h];
    let mut gy = vec![T::zero(); w * h];
    let mut mag = vec![T::zero(); w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let p = |dx: i64, dy: i64| image.at((x as i64 + dx) as usize, (y as i64 + dy) as usize);
            let sx = (p(1, -1) + two * p(1, 0) + p(1, 1)) - (p(-1, -1) + two * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + two * p(0, 1) + p(1, 1)) - (p(-1, -1) + two * p(0, -1) + p(1, -1));
            gx[y * w + x] = sx;
            gy[y * w + x] = sy;
            mag[y * w + x] = (sx * sx + sy * sy).sqrt();
        }
    }

    // Non-maximum suppression against the two neighbors along the signed
    // gradient direction, quantized to 45-degree bins. The strict test on
    // the downhill side keeps a hard step one pixel wide, and the signed
    // direction makes the whole rule commute with quarter-turn rotations.
    let mut thin = vec![T::zero(); w * h];
    let t1 = sc::<T>(0.41421356237309503); // tan(pi/8)
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let m = mag[y * w + x];
            if m == T::zero() {
                continue;
            }
            let (dx, dy) = (gx[y * w + x], gy[y * w + x]);
            let (ax, ay) = (dx.abs(), dy.abs());
            let sign = |v: T| if v >= T::zero() { 1i64 } else { -1 };
            let dir: (i64, i64) = if ay <= ax * t1 {
                (sign(dx), 0)
            } else if ax <= ay * t1 {
                (0, sign(dy))
            } else {
                (sign(dx), sign(dy))
            };
            let forward = mag[((y as i64 + dir.1) as usize) * w + (x as i64 + dir.0) as usize];
            let backward = mag[((y as i64 - dir.1) as usize) * w + (x as i64 - dir.0) as usize];
            if m > forward && m >= backward {
                thin[y * w + x] = m;
            }
        }
    }

    // Hysteresis: seed from strong pixels, grow through weak ones.
    let low = high_threshold / two;
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if thin[y * w + x] >= high_threshold && !edges.data[y * w + x] {
                edges.data[y * w + x] = true;
                stack.push((x, y));
                while let Some((cx, cy)) = stack.pop() {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let (nx, ny) = (cx as i64 + dx, cy as i64 + dy);
                            if nx < 0 || ny < 0 || nx as usize >= w || ny as usize >= h {
                                continue;
                            }
                            let (nx, ny) = (nx as usize, ny as usize);
                            if !edges.data[ny * w + nx] && thin[ny * w + nx] >= low {
                                edges.data[ny * w + nx] = true;
                                stack.push((nx, ny));
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(edges)
}
