//! Iteratively trimmed total-least-squares line fitting.

use nalgebra::Vector2;

use crate::{sc, Error, Result, Scalar};

/// A fitted line with its surviving inliers.
#[derive(Debug, Clone, PartialEq)]
pub struct LineFit<T> {
    /// Unit direction along the line.
    pub direction: Vector2<T>,
    /// A point on the line (centroid of the final inliers).
    pub point: Vector2<T>,
    /// Indices into the input point set, ascending.
    pub inliers: Vec<usize>,
    /// Root-mean-square perpendicular residual of the inliers.
    pub rms: T,
    pub iterations: usize,
}

fn tls_fit<T: Scalar>(points: &[Vector2<T>], indices: &[usize]) -> (Vector2<T>, Vector2<T>) {
    let n = sc::<T>(indices.len() as f64);
    let mut centroid = Vector2::zeros();
    for &i in indices {
        centroid += points[i];
    }
    centroid /= n;
    let (mut sxx, mut sxy, mut syy) = (T::zero(), T::zero(), T::zero());
    for &i in indices {
        let d = points[i] - centroid;
        sxx += d.x * d.x;
        sxy += d.x * d.y;
        syy += d.y * d.y;
    }
    // Principal axis of the 2x2 scatter matrix.
    let theta = sc::<T>(0.5) * (sc::<T>(2.0) * sxy).atan2(sxx - syy);
    (Vector2::new(theta.cos(), theta.sin()), centroid)
}

fn rms_residual<T: Scalar>(
    points: &[Vector2<T>],
    indices: &[usize],
    direction: &Vector2<T>,
    anchor: &Vector2<T>,
) -> T {
    let mean_sq = indices
        .iter()
        .map(|&i| {
            let d = points[i] - anchor;
            let r = direction.x * d.y - direction.y * d.x;
            r * r
        })
        .sum::<T>()
        / sc::<T>(indices.len() as f64);
    mean_sq.sqrt()
}

/// Fit a total-least-squares line, iteratively discarding points whose
/// perpendicular residual exceeds `k` standard deviations until the inlier
/// set is stable or `max_iter` is reached. Reselection always draws from the
/// full input set, so early casualties can return once the fit settles.
pub fn fit_line_iterative<T: Scalar>(
    points: &[Vector2<T>],
    k: T,
    max_iter: usize,
) -> Result<LineFit<T>> {
    if points.len() < 2 {
        return Err(Error::Argument(format!(
            "line fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    if k <= T::zero() {
        return Err(Error::Argument(format!(
            "residual threshold factor must be positive, got {k}"
        )));
    }

    let mut inliers: Vec<usize> = (0..points.len()).collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let (direction, anchor) = tls_fit(points, &inliers);
        let sigma = rms_residual(points, &inliers, &direction, &anchor);
        let threshold = if k.is_finite() {
            k * sigma
        } else {
            T::max_value().unwrap()
        };
        let next: Vec<usize> = (0..points.len())
            .filter(|&i| {
                let d = points[i] - anchor;
                (direction.x * d.y - direction.y * d.x).abs() <= threshold
            })
            .collect();
        if next.len() < 2 {
            return Err(Error::Degenerate(
                "fewer than 2 inliers survived the residual trim".into(),
            ));
        }
        let stable = next == inliers;
        inliers = next;
        if stable || iterations >= max_iter {
            let (direction, anchor) = tls_fit(points, &inliers);
            let rms = rms_residual(points, &inliers, &direction, &anchor);
            return Ok(LineFit {
                direction,
                point: anchor,
                inliers,
                rms,
                iterations,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn collinear_points_fit_in_one_iteration() {
        let pts: Vec<Vector2<f64>> = (0..30)
            .map(|i| Vector2::new(i as f64 * 0.5, 1.0 + i as f64 * 0.25))
            .collect();
        let fit = fit_line_iterative(&pts, 2.5, 20).unwrap();
        assert_eq!(fit.iterations, 1);
        assert_eq!(fit.inliers.len(), pts.len());
        assert!(fit.rms < 1e-12);
    }

    #[test]
    fn planted_outlier_is_excluded() {
        // Synthetic oracle: 50 points on a known line plus noise of sigma
        // 0.05, and one outlier displaced by 10 sigma perpendicular.
        let mut rng = ChaCha8Rng::seed_from_u64(127);
        let dir = Vector2::new(0.8, 0.6);
        let normal = Vector2::new(-0.6, 0.8);
        let sigma = 0.05;
        let mut pts: Vec<Vector2<f64>> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.3;
                dir * t + normal * (sigma * rng.gen_range(-1.0..1.0))
            })
            .collect();
        pts.push(dir * 7.0 + normal * (10.0 * sigma));
        let outlier_index = pts.len() - 1;

        let fit = fit_line_iterative(&pts, 2.5, 20).unwrap();
        assert!(!fit.inliers.contains(&outlier_index));
        let angle = fit
            .direction
            .dot(&dir)
            .abs()
            .clamp(0.0, 1.0)
            .acos()
            .to_degrees();
        assert!(angle < 0.1, "direction off by {angle} degrees");
    }

    #[test]
    fn infinite_threshold_is_plain_least_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(131);
        let pts: Vec<Vector2<f64>> = (0..40)
            .map(|_| Vector2::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
            .collect();
        let fit = fit_line_iterative(&pts, f64::INFINITY, 20).unwrap();
        assert_eq!(fit.iterations, 1);
        assert_eq!(fit.inliers.len(), pts.len());
    }

    #[test]
    fn too_few_points_rejected() {
        let pts = [Vector2::new(0.0f64, 0.0)];
        assert!(fit_line_iterative(&pts, 2.5, 20).is_err());
    }

    #[test]
    fn inlier_set_invariant_under_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(137);
        let pts: Vec<Vector2<f64>> = (0..60)
            .map(|i| {
                Vector2::new(
                    i as f64 * 0.2,
                    0.5 * i as f64 * 0.2 + rng.gen_range(-0.1..0.1),
                )
            })
            .chain([Vector2::new(5.0, 40.0)])
            .collect();
        let fit = fit_line_iterative(&pts, 2.5, 20).unwrap();

        let angle = 0.83f64;
        let (s, c) = angle.sin_cos();
        let shift = Vector2::new(-3.0, 11.0);
        let moved: Vec<Vector2<f64>> = pts
            .iter()
            .map(|p| Vector2::new(c * p.x - s * p.y, s * p.x + c * p.y) + shift)
            .collect();
        let fit2 = fit_line_iterative(&moved, 2.5, 20).unwrap();
        assert_eq!(fit.inliers, fit2.inliers);
    }
}
