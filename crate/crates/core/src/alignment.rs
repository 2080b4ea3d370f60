//! Manhattan alignment: rotate the scene so the ground plane becomes the
//! xy-plane and dominant building axes parallel the raster axes.
//!
//! The up axis starts from the mean camera optical axis flipped to +z (nadir
//! flights look down), is refined by the dominant plane normal of the
//! lowest-elevation points, and the remaining yaw is chosen to minimize the
//! xy bounding-box area over a 0.25-degree sweep of a quarter turn. The
//! translation centers the point centroid at the origin.

use nalgebra::{Matrix3, Rotation3, Vector2, Vector3};
use rayon::prelude::*;

use crate::field::{GaussianField, GaussianPrimitive};
use crate::{sc, Error, Result, Scalar};

/// Sweep step for the yaw search, degrees.
const YAW_STEP_DEG: f64 = 0.25;

/// A camera pose reduced to what alignment needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraView<T> {
    pub center: Vector3<T>,
    /// World-space viewing direction.
    pub optical_axis: Vector3<T>,
}

/// Proper rigid transform `p -> R p + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform<T> {
    pub rotation: Matrix3<T>,
    pub translation: Vector3<T>,
    pub is_identity: bool,
}

impl<T: Scalar> RigidTransform<T> {
    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
            is_identity: true,
        }
    }

    /// Build from parts; the rotation must be proper within 1e-9.
    pub fn new(rotation: Matrix3<T>, translation: Vector3<T>) -> Result<Self> {
        let tol = sc::<T>(1e-9);
        let gram = rotation.transpose() * rotation;
        if (gram - Matrix3::identity()).abs().max() > tol
            || (rotation.determinant() - T::one()).abs() > tol
        {
            return Err(Error::Degenerate(
                "rigid transform rotation is not proper".into(),
            ));
        }
        let is_identity = rotation == Matrix3::identity() && translation == Vector3::zeros();
        Ok(RigidTransform {
            rotation,
            translation,
            is_identity,
        })
    }

    pub fn apply(&self, p: &Vector3<T>) -> Vector3<T> {
        self.rotation * p + self.translation
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
            is_identity: self.is_identity,
        }
    }

    /// World-to-view transform that renders the transformed scene exactly as
    /// some original view rendered the original scene: `view o inverse`.
    pub fn compose_view(
        &self,
        view: &crate::projection::ViewTransform<T>,
    ) -> Result<crate::projection::ViewTransform<T>> {
        let inv = self.inverse();
        let r = view.rotation() * inv.rotation;
        let t = view.rotation() * inv.translation + view.translation();
        crate::projection::ViewTransform::new(r, t)
    }
}

/// Hamilton product of `[w, x, y, z]` quaternions.
fn quat_mul<T: Scalar>(a: &[T; 4], b: &[T; 4]) -> [T; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

fn rotation_to_quat<T: Scalar>(r: &Matrix3<T>) -> [T; 4] {
    let q = nalgebra::UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*r));
    [q.w, q.i, q.j, q.k]
}

/// Eigen pairs of a symmetric 3x3, eigenvalues descending.
fn sorted_eigen<T: Scalar>(m: &Matrix3<T>) -> [(T, Vector3<T>); 3] {
    let eig = m.symmetric_eigen();
    let mut pairs: Vec<(T, Vector3<T>)> = (0..3)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()))
        .collect();
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite eigenvalues"));
    [pairs[0], pairs[1], pairs[2]]
}

fn centered_covariance<T: Scalar>(points: &[Vector3<T>]) -> (Vector3<T>, Matrix3<T>) {
    let n = sc::<T>(points.len() as f64);
    let centroid = points.iter().sum::<Vector3<T>>() / n;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    (centroid, cov / n)
}

/// Estimate the rigid transform that Manhattan-aligns the scene.
pub fn manhattan_align<T: Scalar>(
    points: &[Vector3<T>],
    cameras: &[CameraView<T>],
) -> Result<RigidTransform<T>> {
    if points.len() < 3 {
        return Err(Error::Degenerate(
            "alignment needs at least 3 points".into(),
        ));
    }
    let (centroid, cov) = centered_covariance(points);
    let eig = sorted_eigen(&cov);
    if eig[1].0 <= sc::<T>(1e-12) * eig[0].0.max(sc::<T>(1e-30)) {
        return Err(Error::Degenerate(
            "points are collinear or coincident (rank < 2)".into(),
        ));
    }

    // Up axis: mean optical axis flipped for a nadir flight, +z without cameras.
    let up0 = if cameras.is_empty() {
        Vector3::new(T::zero(), T::zero(), T::one())
    } else {
        let mean: Vector3<T> = cameras.iter().map(|c| c.optical_axis).sum();
        let n = mean.norm();
        if n < sc::<T>(1e-9) {
            Vector3::new(T::zero(), T::zero(), T::one())
        } else {
            -(mean / n)
        }
    };

    // Refine with the dominant plane of the lowest 30% of elevations.
    let up = {
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| {
            points[a]
                .dot(&up0)
                .partial_cmp(&points[b].dot(&up0))
                .expect("finite elevations")
        });
        let take = (points.len() * 3 / 10).max(3).min(points.len());
        let ground: Vec<Vector3<T>> = order[..take].iter().map(|&i| points[i]).collect();
        let (_, gcov) = centered_covariance(&ground);
        let geig = sorted_eigen(&gcov);
        if geig[1].0 <= sc::<T>(1e-9) * geig[0].0.max(sc::<T>(1e-30)) {
            up0
        } else {
            let normal = geig[2].1.normalize();
            if normal.dot(&up0) < T::zero() {
                -normal
            } else {
                normal
            }
        }
    };

    let ez = Vector3::new(T::zero(), T::zero(), T::one());
    let tilt = match Rotation3::rotation_between(&up, &ez) {
        Some(r) => r.into_inner(),
        // Antiparallel: half turn about x.
        None => Matrix3::from_diagonal(&Vector3::new(T::one(), -T::one(), -T::one())),
    };

    // Yaw sweep over [0, 90) degrees minimizing the xy bounding-box area.
    let flat: Vec<Vector2<T>> = points
        .iter()
        .map(|p| {
            let q = tilt * p;
            Vector2::new(q.x, q.y)
        })
        .collect();
    let steps = (90.0 / YAW_STEP_DEG) as usize;
    let best = (0..steps)
        .into_par_iter()
        .map(|k| {
            let theta = sc::<T>(k as f64 * YAW_STEP_DEG)
                .to_f64()
                .unwrap()
                .to_radians();
            let (s, c) = (sc::<T>(theta.sin()), sc::<T>(theta.cos()));
            let mut min_x = T::max_value().unwrap();
            let mut max_x = -T::max_value().unwrap();
            let mut min_y = T::max_value().unwrap();
            let mut max_y = -T::max_value().unwrap();
            for p in &flat {
                let x = c * p.x - s * p.y;
                let y = s * p.x + c * p.y;
                min_x = min_x.min(x);
                max_x = max_x.max(x);
                min_y = min_y.min(y);
                max_y = max_y.max(y);
            }
            ((max_x - min_x) * (max_y - min_y), k)
        })
        .reduce(
            || (T::max_value().unwrap(), usize::MAX),
            |a, b| {
                // Ties take the smaller angle.
                if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );

    // The 90-degree relabeling ambiguity resolves toward the identity.
    let mut yaw_deg = best.1 as f64 * YAW_STEP_DEG;
    if yaw_deg > 45.0 {
        yaw_deg -= 90.0;
    }
    let yaw =
        Rotation3::from_axis_angle(&Vector3::z_axis(), sc::<T>(yaw_deg.to_radians())).into_inner();

    let rotation = yaw * tilt;
    let translation = -(rotation * centroid);
    RigidTransform::new(rotation, translation)
}

/// Apply a rigid transform to a field: positions map through it, quaternions
/// are left-composed with the rotation, scales stay, so every covariance
/// transforms as `R Sigma R^T`. Harmonic banks keep their original
/// orientation; view-dependent terms are exact only for DC-dominated fields.
pub fn apply_transform<T: Scalar>(
    field: &GaussianField<T>,
    transform: &RigidTransform<T>,
) -> Result<GaussianField<T>> {
    if transform.is_identity {
        return Ok(field.clone());
    }
    let rq = rotation_to_quat(&transform.rotation);
    let primitives: Vec<GaussianPrimitive<T>> = field
        .primitives()
        .map(|mut p| {
            p.position = transform.apply(&p.position);
            p.rotation = quat_mul(&rq, &p.rotation);
            p
        })
        .collect();
    GaussianField::from_primitives(primitives)
}
