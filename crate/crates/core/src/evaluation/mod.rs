//! Geometric and radiometric quality evaluation of rendered orthophotos.
//!
//! The geometric protocol extracts building edges with a Canny detector,
//! fits lines to the edge chains by iteratively trimmed total least squares
//! (points beyond 2.5 standard deviations of the perpendicular residuals are
//! discarded until the inlier set is stable), and reports per-line inlier
//! fractions and RMS. Relative mapping precision is scored by comparing
//! segment-length ratios against reference photogrammetry software, and
//! PSNR/SSIM cover radiometric comparisons.

mod canny;
mod lines;
mod metrics;

pub use canny::{canny_edges, EdgeMap, GrayRaster};
pub use lines::{fit_line_iterative, LineFit};
pub use metrics::{psnr, ssim};

use nalgebra::Vector2;

use crate::rasterizer::Raster;
use crate::{sc, Error, Result, Scalar};

/// One measured-versus-reference ratio comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRecord<T> {
    pub ratio_ours: T,
    pub ratio_ref: T,
    pub abs_err: T,
    /// `100 * abs_err / ratio_ref`.
    pub rel_err_percent: T,
}

/// Ratio comparison table with its column means.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSummary<T> {
    pub records: Vec<RatioRecord<T>>,
    pub mean_abs_err: T,
    pub mean_rel_err_percent: T,
}

/// Score segment-length ratio pairs `(ours, reference)`. The relative error
/// is normalized by the reference ratio.
pub fn ratio_errors<T: Scalar>(pairs: &[(T, T)]) -> Result<RatioSummary<T>> {
    if pairs.is_empty() {
        return Err(Error::Argument("no ratio pairs supplied".into()));
    }
    let mut records = Vec::with_capacity(pairs.len());
    for &(ours, reference) in pairs {
        if ours <= T::zero() || reference <= T::zero() {
            return Err(Error::Argument(format!(
                "ratios must be positive, got ({ours}, {reference})"
            )));
        }
        let abs_err = (reference - ours).abs();
        records.push(RatioRecord {
            ratio_ours: ours,
            ratio_ref: reference,
            abs_err,
            rel_err_percent: sc::<T>(100.0) * abs_err / reference,
        });
    }
    let n = sc::<T>(records.len() as f64);
    let mean_abs_err = records.iter().map(|r| r.abs_err).sum::<T>() / n;
    let mean_rel_err_percent = records.iter().map(|r| r.rel_err_percent).sum::<T>() / n;
    Ok(RatioSummary {
        records,
        mean_abs_err,
        mean_rel_err_percent,
    })
}

/// Per-line statistics reported by [`edge_quality`].
#[derive(Debug, Clone, PartialEq)]
pub struct LineQuality<T> {
    pub n_points: usize,
    pub inlier_fraction: T,
    pub rms: T,
    pub direction: Vector2<T>,
    pub anchor: Vector2<T>,
}

/// Edge-protocol report for one region of interest.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EdgeQualityReport<T> {
    pub lines: Vec<LineQuality<T>>,
}

/// Pixel-space region of interest, half-open.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelRect {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

/// Minimum chain segment length worth fitting a line to.
const MIN_SEGMENT_POINTS: usize = 12;
/// Tangent window (pixels each side) for curvature estimates.
const TANGENT_WINDOW: usize = 4;
/// Direction change that splits a chain, radians.
const SPLIT_ANGLE: f64 = std::f64::consts::FRAC_PI_4;

/// Run the edge protocol on a raster region: Canny edges, 8-connected chains
/// split at curvature maxima, and an iterative 2.5-sigma line fit per
/// segment. Regions without edges produce an empty report.
pub fn edge_quality<T: Scalar>(
    tdom: &Raster<T>,
    roi: PixelRect,
    high_threshold: T,
) -> Result<EdgeQualityReport<T>> {
    if roi.x1 > tdom.width || roi.y1 > tdom.height || roi.x0 >= roi.x1 || roi.y0 >= roi.y1 {
        return Err(Error::Argument(format!(
            "region of interest ({}, {})..({}, {}) outside {}x{} raster",
            roi.x0, roi.y0, roi.x1, roi.y1, tdom.width, tdom.height
        )));
    }
    let gray = GrayRaster::luma_of(tdom).crop(roi.x0, roi.y0, roi.x1 - roi.x0, roi.y1 - roi.y0);
    let edges = canny_edges(&gray, high_threshold)?;

    let mut report = EdgeQualityReport::default();
    for chain in trace_chains(&edges) {
        for segment in split_at_curvature(&chain) {
            if segment.len() < MIN_SEGMENT_POINTS {
                continue;
            }
            let pts: Vec<Vector2<T>> = segment
                .iter()
                .map(|&(x, y)| Vector2::new(sc::<T>(x as f64), sc::<T>(y as f64)))
                .collect();
            let Ok(fit) = fit_line_iterative(&pts, sc::<T>(2.5), 20) else {
                continue;
            };
            report.lines.push(LineQuality {
                n_points: pts.len(),
                inlier_fraction: sc::<T>(fit.inliers.len() as f64) / sc::<T>(pts.len() as f64),
                rms: fit.rms,
                direction: fit.direction,
                anchor: fit.point,
            });
        }
    }
    Ok(report)
}

/// Order the edge pixels of each 8-connected component by walking from an
/// endpoint (or anywhere on a loop).
fn trace_chains(edges: &EdgeMap) -> Vec<Vec<(usize, usize)>> {
    let (w, h) = (edges.width, edges.height);
    let at = |x: usize, y: usize| edges.data[y * w + x];
    let mut visited = vec![false; w * h];
    let mut chains = Vec::new();

    let neighbors = |x: usize, y: usize| {
        let mut out = Vec::with_capacity(8);
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                    out.push((nx as usize, ny as usize));
                }
            }
        }
        out
    };

    for y in 0..h {
        for x in 0..w {
            if !at(x, y) || visited[y * w + x] {
                continue;
            }
            // Collect the component.
            let mut component = Vec::new();
            let mut stack = vec![(x, y)];
            visited[y * w + x] = true;
            while let Some((cx, cy)) = stack.pop() {
                component.push((cx, cy));
                for (nx, ny) in neighbors(cx, cy) {
                    if at(nx, ny) && !visited[ny * w + nx] {
                        visited[ny * w + nx] = true;
                        stack.push((nx, ny));
                    }
                }
            }
            // Prefer starting at a degree-1 endpoint.
            let degree = |&(px, py): &(usize, usize)| {
                neighbors(px, py)
                    .iter()
                    .filter(|&&(nx, ny)| at(nx, ny))
                    .count()
            };
            let start = component
                .iter()
                .copied()
                .find(|p| degree(p) == 1)
                .unwrap_or(component[0]);
            // Greedy nearest-neighbor walk through the component.
            let mut remaining: std::collections::BTreeSet<(usize, usize)> =
                component.into_iter().collect();
            let mut chain = vec![start];
            remaining.remove(&start);
            let mut current = start;
            while !remaining.is_empty() {
                let next = neighbors(current.0, current.1)
                    .into_iter()
                    .filter(|p| remaining.contains(p))
                    .min_by_key(|&(nx, ny)| {
                        let dx = nx as i64 - current.0 as i64;
                        let dy = ny as i64 - current.1 as i64;
                        (dx * dx + dy * dy, nx, ny)
                    });
                match next {
                    Some(p) => {
                        remaining.remove(&p);
                        chain.push(p);
                        current = p;
                    }
                    // Disconnected remainder of a branching component:
                    // emit what we have and walk the rest separately.
                    None => {
                        chains.push(std::mem::take(&mut chain));
                        let p = *remaining.iter().next().unwrap();
                        remaining.remove(&p);
                        chain = vec![p];
                        current = p;
                    }
                }
            }
            chains.push(chain);
        }
    }
    chains
}

/// Split an ordered chain where the local tangent direction turns sharply.
fn split_at_curvature(chain: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    let w = TANGENT_WINDOW;
    if chain.len() < 2 * w + 1 {
        return vec![chain.to_vec()];
    }
    let angle = |a: (usize, usize), b: (usize, usize)| {
        (b.1 as f64 - a.1 as f64).atan2(b.0 as f64 - a.0 as f64)
    };
    let wrap = |mut a: f64| {
        if a > std::f64::consts::PI {
            a = std::f64::consts::TAU - a;
        }
        a
    };
    let mut cuts = Vec::new();
    let mut i = w;
    // Reference tangent at the start of the current segment; rounded corners
    // never trip the local test, but they drift away from this.
    let mut theta_ref = angle(chain[0], chain[w]);
    while i + w < chain.len() {
        let behind = angle(chain[i - w], chain[i]);
        let ahead = angle(chain[i], chain[i + w]);
        let local = wrap((ahead - behind).abs());
        let drift = wrap((behind - theta_ref).abs());
        if local > SPLIT_ANGLE || drift > SPLIT_ANGLE {
            cuts.push(i);
            i += w; // skip the rest of this corner
            let start = (i + 1).min(chain.len() - 1);
            let tip = (start + w).min(chain.len() - 1);
            theta_ref = angle(chain[start], chain[tip]);
        }
        i += 1;
    }
    // The tangent is ambiguous within a window of a corner; drop that
    // neighborhood rather than letting corner pixels pollute the segments.
    let mut out = Vec::new();
    let mut start = 0;
    for cut in cuts {
        let end = cut.saturating_sub(w).max(start);
        if end > start {
            out.push(chain[start..end].to_vec());
        }
        start = (cut + w + 1).min(chain.len());
    }
    if start < chain.len() {
        out.push(chain[start..].to_vec());
    }
    out
}
