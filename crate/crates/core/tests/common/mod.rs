//! Shared helpers and independent oracles for the integration suites.

#![allow(dead_code)]

use rand::Rng;
use tortho_core::field::{FagkCoeffs, GaussianField, GaussianPrimitive, COLOR_COEFFS};
use tortho_core::nalgebra::{Vector2, Vector3};
use tortho_core::projection::{Frustum, ViewTransform};
use tortho_core::rasterizer::{blend_pixel, cull_and_project, Raster, RenderOptions};
use tortho_core::tdom::TdomGridSpec;

/// DC-only coefficient bank that renders exactly `color`.
pub fn solid_color_sh(color: [f64; 3]) -> [[f64; 3]; COLOR_COEFFS] {
    let mut sh = [[0.0; 3]; COLOR_COEFFS];
    for c in 0..3 {
        sh[0][c] = (color[c] - 0.5) / 0.28209479177387814;
    }
    sh
}

pub fn random_unit_quat(rng: &mut impl Rng) -> [f64; 4] {
    loop {
        let q = [
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-3 {
            return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
        }
    }
}

/// A random Gaussian inside the given extents, with optional higher color
/// bands and optional anisotropic banks.
pub fn random_primitive(
    rng: &mut impl Rng,
    xy_extent: f64,
    z_range: (f64, f64),
    color_bands: bool,
    fagk: bool,
) -> GaussianPrimitive<f64> {
    let mut color_sh = solid_color_sh([
        rng.gen_range(0.0..1.0),
        rng.gen_range(0.0..1.0),
        rng.gen_range(0.0..1.0),
    ]);
    if color_bands {
        for row in color_sh.iter_mut().skip(1) {
            for v in row.iter_mut() {
                *v = rng.gen_range(-0.15..0.15);
            }
        }
    }
    let banks = fagk.then(|| {
        let mut b = FagkCoeffs::zeros();
        for v in b.opacity.iter_mut() {
            *v = rng.gen_range(-0.3..0.3);
        }
        for row in b.scale.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
        for row in b.rotation.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.gen_range(-0.1..0.1);
            }
        }
        b
    });
    GaussianPrimitive {
        position: Vector3::new(
            rng.gen_range(-xy_extent..xy_extent),
            rng.gen_range(-xy_extent..xy_extent),
            rng.gen_range(z_range.0..z_range.1),
        ),
        rotation: random_unit_quat(rng),
        log_scale: Vector3::new(
            rng.gen_range(0.05..1.2f64).ln(),
            rng.gen_range(0.05..1.2f64).ln(),
            rng.gen_range(0.05..1.2f64).ln(),
        ),
        opacity_logit: rng.gen_range(-3.0..5.0),
        color_sh,
        fagk: banks,
    }
}

pub fn random_field(
    rng: &mut impl Rng,
    count: usize,
    xy_extent: f64,
    z_range: (f64, f64),
    color_bands: bool,
    fagk: bool,
) -> GaussianField<f64> {
    let prims = (0..count)
        .map(|_| random_primitive(rng, xy_extent, z_range, color_bands, fagk))
        .collect();
    GaussianField::from_primitives(prims).unwrap()
}

/// Brute-force render oracle: one global front-to-back sort (depth, then
/// primitive index) and a full blend of that list at every pixel. No tiles,
/// no binning.
pub fn render_brute_force(
    field: &GaussianField<f64>,
    view: &ViewTransform<f64>,
    frustum: &Frustum<f64>,
    grid: &TdomGridSpec<f64>,
    background: [f64; 3],
    opts: &RenderOptions<f64>,
) -> Raster<f64> {
    let screen = cull_and_project(field, view, frustum, grid, opts).unwrap();
    let mut order: Vec<usize> = (0..screen.len()).collect();
    order.sort_by(|&a, &b| {
        screen[a]
            .depth
            .partial_cmp(&screen[b].depth)
            .unwrap()
            .then(a.cmp(&b))
    });
    let sorted: Vec<_> = order.iter().map(|&i| &screen[i]).collect();

    let mut raster = Raster::filled(grid.width, grid.height, background);
    for y in 0..grid.height {
        for x in 0..grid.width {
            let pixel = Vector2::new(x as f64 + 0.5, y as f64 + 0.5);
            let (rgb, t) = blend_pixel(sorted.iter().copied(), pixel, background, opts);
            raster.pixels[y * grid.width + x] = rgb;
            raster.transmittance[y * grid.width + x] = t;
        }
    }
    raster
}

pub fn max_channel_difference(a: &Raster<f64>, b: &Raster<f64>) -> f64 {
    a.pixels
        .iter()
        .zip(&b.pixels)
        .flat_map(|(pa, pb)| (0..3).map(move |c| (pa[c] - pb[c]).abs()))
        .fold(0.0, f64::max)
}

/// Independent Canny reference used by the edge-protocol acceptance check:
/// table-driven convolution, angle-based suppression bins, and sweep-based
/// hysteresis, coded separately from the library path.
pub mod reference_canny {
    pub fn detect(gray: &[f64], w: usize, h: usize, high: f64) -> Vec<bool> {
        let low = high / 2.0;
        let kx: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
        let ky: [[f64; 3]; 3] = [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]];
        let mut gx = vec![0.0; w * h];
        let mut gy = vec![0.0; w * h];
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let mut sx = 0.0;
                let mut sy = 0.0;
                for (j, (rx, ry)) in kx.iter().zip(&ky).enumerate() {
                    for i in 0..3 {
                        let v = gray[(y + j - 1) * w + (x + i - 1)];
                        sx += rx[i] * v;
                        sy += ry[i] * v;
                    }
                }
                gx[y * w + x] = sx;
                gy[y * w + x] = sy;
            }
        }
        let mag: Vec<f64> = gx
            .iter()
            .zip(&gy)
            .map(|(a, b)| (a * a + b * b).sqrt())
            .collect();

        let mut thin = vec![0.0; w * h];
        for y in 1..h - 1 {
            for x in 1..w - 1 {
                let m = mag[y * w + x];
                if m == 0.0 {
                    continue;
                }
                let angle = gy[y * w + x].atan2(gx[y * w + x]);
                let sector = ((angle / std::f64::consts::FRAC_PI_4).round() as i64).rem_euclid(8);
                let (ox, oy) = match sector {
                    0 => (1i64, 0i64),
                    1 => (1, 1),
                    2 => (0, 1),
                    3 => (-1, 1),
                    4 => (-1, 0),
                    5 => (-1, -1),
                    6 => (0, -1),
                    _ => (1, -1),
                };
                let fwd = mag[((y as i64 + oy) as usize) * w + (x as i64 + ox) as usize];
                let back = mag[((y as i64 - oy) as usize) * w + (x as i64 - ox) as usize];
                if m > fwd && m >= back {
                    thin[y * w + x] = m;
                }
            }
        }

        // Hysteresis by repeated sweeps until stable.
        let mut state: Vec<u8> = thin
            .iter()
            .map(|&m| {
                if m >= high {
                    2
                } else if m >= low {
                    1
                } else {
                    0
                }
            })
            .collect();
        loop {
            let mut changed = false;
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    if state[y * w + x] != 1 {
                        continue;
                    }
                    'scan: for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            if state[((y as i64 + dy) as usize) * w + (x as i64 + dx) as usize] == 2
                            {
                                state[y * w + x] = 2;
                                changed = true;
                                break 'scan;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        state.iter().map(|&s| s == 2).collect()
    }
}

/// Independent trimmed line fit used by the edge-protocol reference: an
/// axis-aligned regression (x on y for near-vertical sides, y on x for
/// near-horizontal ones) with the same 2.5-sigma trimming rule.
pub fn reference_inlier_fraction(points: &[(f64, f64)], vertical: bool, k: f64) -> f64 {
    let n = points.len();
    assert!(n >= 2);
    // Regress the cross coordinate on the along coordinate.
    let (along, cross): (Vec<f64>, Vec<f64>) = if vertical {
        (
            points.iter().map(|p| p.1).collect(),
            points.iter().map(|p| p.0).collect(),
        )
    } else {
        (
            points.iter().map(|p| p.0).collect(),
            points.iter().map(|p| p.1).collect(),
        )
    };
    let mut inliers: Vec<usize> = (0..n).collect();
    for _ in 0..20 {
        let m = inliers.len() as f64;
        let mean_a = inliers.iter().map(|&i| along[i]).sum::<f64>() / m;
        let mean_c = inliers.iter().map(|&i| cross[i]).sum::<f64>() / m;
        let mut saa = 0.0;
        let mut sac = 0.0;
        for &i in &inliers {
            saa += (along[i] - mean_a) * (along[i] - mean_a);
            sac += (along[i] - mean_a) * (cross[i] - mean_c);
        }
        let slope = if saa > 0.0 { sac / saa } else { 0.0 };
        let sigma = (inliers
            .iter()
            .map(|&i| {
                let r = cross[i] - mean_c - slope * (along[i] - mean_a);
                r * r
            })
            .sum::<f64>()
            / m)
            .sqrt();
        let next: Vec<usize> = (0..n)
            .filter(|&i| {
                let r = cross[i] - mean_c - slope * (along[i] - mean_a);
                r.abs() <= k * sigma
            })
            .collect();
        if next == inliers {
            break;
        }
        inliers = next;
    }
    inliers.len() as f64 / n as f64
}
