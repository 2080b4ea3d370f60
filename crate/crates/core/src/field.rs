//! Gaussian field storage and per-primitive, view-dependent evaluation.
//!
//! A primitive carries its DC attributes (position, rotation quaternion,
//! log-scales, opacity logit) plus spherical-harmonic banks: 16x3 color
//! coefficients, and optionally fully anisotropic banks that let opacity,
//! scale and rotation vary with the view direction as well. The DC term of
//! each anisotropic property is the vanilla attribute, so zeroed banks
//! reproduce a plain field exactly.
//!
//! Storage is columnar; fields are immutable once constructed.

use nalgebra::{Matrix3, Vector3};

use crate::harmonics::eval_sh_basis;
use crate::{sc, Error, Result, Scalar};

/// Color band count: DC plus 15 higher coefficients.
pub const COLOR_COEFFS: usize = 16;
/// Higher-band coefficients per anisotropic property channel.
pub const REST_COEFFS: usize = 15;

/// Unit-quaternion tolerance for covariance construction.
const QUAT_TOL: f64 = 1e-6;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<T> {
    pub min: Vector3<T>,
    pub max: Vector3<T>,
}

impl<T: Scalar> Aabb<T> {
    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vector3<T>>) -> Option<Self>
    where
        T: 'a,
    {
        let mut iter = points.into_iter();
        let first = *iter.next()?;
        let mut b = Aabb {
            min: first,
            max: first,
        };
        for p in iter {
            b.min = b.min.inf(p);
            b.max = b.max.sup(p);
        }
        Some(b)
    }

    pub fn contains(&self, p: &Vector3<T>) -> bool {
        (0..3).all(|i| self.min[i] <= p[i] && p[i] <= self.max[i])
    }

    pub fn extent(&self) -> Vector3<T> {
        self.max - self.min
    }
}

/// Higher-band coefficient banks of a fully anisotropic kernel, bands 1-3.
#[derive(Debug, Clone, PartialEq)]
pub struct FagkCoeffs<T> {
    pub opacity: [T; REST_COEFFS],
    pub scale: [[T; 3]; REST_COEFFS],
    pub rotation: [[T; 4]; REST_COEFFS],
}

impl<T: Scalar> FagkCoeffs<T> {
    pub fn zeros() -> Self {
        FagkCoeffs {
            opacity: [T::zero(); REST_COEFFS],
            scale: [[T::zero(); 3]; REST_COEFFS],
            rotation: [[T::zero(); 4]; REST_COEFFS],
        }
    }
}

/// One Gaussian primitive. Quaternions are stored `[w, x, y, z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPrimitive<T> {
    pub position: Vector3<T>,
    pub rotation: [T; 4],
    pub log_scale: Vector3<T>,
    pub opacity_logit: T,
    pub color_sh: [[T; 3]; COLOR_COEFFS],
    pub fagk: Option<FagkCoeffs<T>>,
}

/// Direction-dependent activations of a primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Activated<T> {
    pub opacity: T,
    pub scale: Vector3<T>,
    pub rotation: [T; 4],
}

pub fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// Rotation matrix of a unit quaternion `[w, x, y, z]`. The input is used as
/// given; normalize first if it may drift.
pub fn quat_to_rotation<T: Scalar>(q: &[T; 4]) -> Matrix3<T> {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    let two = sc::<T>(2.0);
    Matrix3::new(
        T::one() - two * (y * y + z * z),
        two * (x * y - w * z),
        two * (x * z + w * y),
        two * (x * y + w * z),
        T::one() - two * (x * x + z * z),
        two * (y * z - w * x),
        two * (x * z - w * y),
        two * (y * z + w * x),
        T::one() - two * (x * x + y * y),
    )
}

/// Normalize a quaternion; norms below 1e-8 are degenerate.
pub fn normalize_quat<T: Scalar>(q: &[T; 4]) -> Result<[T; 4]> {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    if n < sc::<T>(1e-8) {
        return Err(Error::Degenerate(
            "rotation quaternion has near-zero norm".into(),
        ));
    }
    Ok([q[0] / n, q[1] / n, q[2] / n, q[3] / n])
}

/// Covariance `Sigma = R S S^T R^T` from a unit quaternion and positive
/// scales; symmetric positive semi-definite by construction.
pub fn covariance_from_rs<T: Scalar>(rotation: &[T; 4], scale: &Vector3<T>) -> Result<Matrix3<T>> {
    let n = (rotation.iter().map(|v| *v * *v).sum::<T>()).sqrt();
    if (n - T::one()).abs() > sc::<T>(QUAT_TOL) {
        return Err(Error::Argument(format!(
            "quaternion is not unit length (|q| = {n})"
        )));
    }
    if scale.iter().any(|s| *s <= T::zero() || !s.is_finite()) {
        return Err(Error::Argument("scales must be positive and finite".into()));
    }
    let r = quat_to_rotation(rotation);
    let rs = r * Matrix3::from_diagonal(scale);
    Ok(rs * rs.transpose())
}

impl<T: Scalar> GaussianPrimitive<T> {
    /// View-dependent RGB: per channel `max(0, sum coeff * basis + 0.5)`.
    pub fn eval_color(&self, dir: &Vector3<T>, degree: usize) -> Result<[T; 3]> {
        let basis = eval_sh_basis(degree, dir)?;
        let half = sc::<T>(0.5);
        let mut rgb = [T::zero(); 3];
        for (c, out) in rgb.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (k, b) in basis.values().iter().enumerate() {
                acc += self.color_sh[k][c] * *b;
            }
            *out = (acc + half).max(T::zero());
        }
        Ok(rgb)
    }

    /// DC activations: sigmoid opacity, exponentiated scales, raw quaternion.
    pub fn dc_activated(&self) -> Activated<T> {
        Activated {
            opacity: sigmoid(self.opacity_logit),
            scale: self.log_scale.map(|s| s.exp()),
            rotation: self.rotation,
        }
    }

    /// Direction-dependent activations of the fully anisotropic kernel:
    /// higher bands are summed onto the DC term before activation, and the
    /// summed quaternion is normalized. Without anisotropic banks the DC
    /// activations are returned unchanged.
    pub fn eval_fagk(&self, dir: &Vector3<T>, degree: usize) -> Result<Activated<T>> {
        let Some(fagk) = &self.fagk else {
            return Ok(self.dc_activated());
        };
        let basis = eval_sh_basis(degree, dir)?;
        let rest = &basis.values()[1..];

        let mut alpha = self.opacity_logit;
        let mut scale = self.log_scale;
        let mut quat = self.rotation;
        for (k, b) in rest.iter().enumerate() {
            alpha += fagk.opacity[k] * *b;
            for (s, coeff) in scale.iter_mut().zip(&fagk.scale[k]) {
                *s += *coeff * *b;
            }
            for (q, coeff) in quat.iter_mut().zip(&fagk.rotation[k]) {
                *q += *coeff * *b;
            }
        }
        Ok(Activated {
            opacity: sigmoid(alpha),
            scale: scale.map(|s| s.exp()),
            rotation: normalize_quat(&quat)?,
        })
    }

    /// Activations as the renderer consumes them: the rotation is normalized
    /// exactly once on either path, so zeroed anisotropic banks reproduce a
    /// plain field bit-for-bit.
    pub fn render_activated(&self, dir: &Vector3<T>, degree: usize) -> Result<Activated<T>> {
        if self.fagk.is_some() {
            self.eval_fagk(dir, degree)
        } else {
            let dc = self.dc_activated();
            Ok(Activated {
                rotation: normalize_quat(&dc.rotation)?,
                ..dc
            })
        }
    }
}

/// Columnar store of Gaussian primitives.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianField<T> {
    positions: Vec<Vector3<T>>,
    rotations: Vec<[T; 4]>,
    log_scales: Vec<Vector3<T>>,
    opacity_logits: Vec<T>,
    /// `count * 48`, laid out `[coeff * 3 + channel]` per primitive.
    color_sh: Vec<T>,
    /// `count * 15` when anisotropic banks are present.
    fagk_opacity: Vec<T>,
    /// `count * 45`, `[coeff * 3 + axis]`.
    fagk_scale: Vec<T>,
    /// `count * 60`, `[coeff * 4 + component]`.
    fagk_rotation: Vec<T>,
    fagk_enabled: bool,
    bounds: Option<Aabb<T>>,
}

impl<T: Scalar> GaussianField<T> {
    pub fn empty() -> Self {
        GaussianField {
            positions: Vec::new(),
            rotations: Vec::new(),
            log_scales: Vec::new(),
            opacity_logits: Vec::new(),
            color_sh: Vec::new(),
            fagk_opacity: Vec::new(),
            fagk_scale: Vec::new(),
            fagk_rotation: Vec::new(),
            fagk_enabled: false,
            bounds: None,
        }
    }

    /// Build from owned primitives. Anisotropic banks must be all-or-none.
    pub fn from_primitives(primitives: Vec<GaussianPrimitive<T>>) -> Result<Self> {
        let fagk_enabled = match primitives.first() {
            None => false,
            Some(p) => p.fagk.is_some(),
        };
        if primitives.iter().any(|p| p.fagk.is_some() != fagk_enabled) {
            return Err(Error::Argument(
                "mixed anisotropic and plain primitives in one field".into(),
            ));
        }
        let mut field = GaussianField::empty();
        field.fagk_enabled = fagk_enabled;
        for p in primitives {
            field.push(p);
        }
        field.bounds = Aabb::from_points(&field.positions);
        Ok(field)
    }

    fn push(&mut self, p: GaussianPrimitive<T>) {
        self.positions.push(p.position);
        self.rotations.push(p.rotation);
        self.log_scales.push(p.log_scale);
        self.opacity_logits.push(p.opacity_logit);
        for coeff in &p.color_sh {
            self.color_sh.extend_from_slice(coeff);
        }
        if let Some(f) = p.fagk {
            self.fagk_opacity.extend_from_slice(&f.opacity);
            for s in &f.scale {
                self.fagk_scale.extend_from_slice(s);
            }
            for r in &f.rotation {
                self.fagk_rotation.extend_from_slice(r);
            }
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn fagk_enabled(&self) -> bool {
        self.fagk_enabled
    }

    /// Bounding box of the positions; `None` for an empty field.
    pub fn bounds(&self) -> Option<&Aabb<T>> {
        self.bounds.as_ref()
    }

    pub fn positions(&self) -> &[Vector3<T>] {
        &self.positions
    }

    /// Assemble primitive `i` from the columns.
    pub fn primitive(&self, i: usize) -> GaussianPrimitive<T> {
        let mut color_sh = [[T::zero(); 3]; COLOR_COEFFS];
        for (k, coeff) in color_sh.iter_mut().enumerate() {
            let at = i * COLOR_COEFFS * 3 + k * 3;
            coeff.copy_from_slice(&self.color_sh[at..at + 3]);
        }
        let fagk = self.fagk_enabled.then(|| {
            let mut f = FagkCoeffs::zeros();
            f.opacity
                .copy_from_slice(&self.fagk_opacity[i * REST_COEFFS..(i + 1) * REST_COEFFS]);
            for (k, s) in f.scale.iter_mut().enumerate() {
                let at = i * REST_COEFFS * 3 + k * 3;
                s.copy_from_slice(&self.fagk_scale[at..at + 3]);
            }
            for (k, r) in f.rotation.iter_mut().enumerate() {
                let at = i * REST_COEFFS * 4 + k * 4;
                r.copy_from_slice(&self.fagk_rotation[at..at + 4]);
            }
            f
        });
        GaussianPrimitive {
            position: self.positions[i],
            rotation: self.rotations[i],
            log_scale: self.log_scales[i],
            opacity_logit: self.opacity_logits[i],
            color_sh,
            fagk,
        }
    }

    pub fn primitives(&self) -> impl Iterator<Item = GaussianPrimitive<T>> + '_ {
        (0..self.len()).map(|i| self.primitive(i))
    }
}
