//! Real spherical harmonics up to degree 3.
//!
//! Gaussian attributes (color and, for fully anisotropic kernels, opacity,
//! scale and rotation) are stored as banks of spherical-harmonic coefficients
//! and evaluated against this basis for a view direction. The basis is the
//! real form
//!
//! ```text
//! A_l^m(theta, phi) = sqrt(2) K_l^m cos(m phi)  P_l^m(cos theta)    m > 0
//!                     sqrt(2) K_l^m sin(-m phi) P_l^{-m}(cos theta) m < 0
//!                     K_l^0 P_l^0(cos theta)                        m = 0
//! ```
//!
//! with `theta` the polar angle from +z, `phi` the azimuth from +x, and the
//! Condon-Shortley factor `(-1)^m` kept inside `P_l^m`. Evaluated in
//! Cartesian form this yields the same signed constants that trained field
//! files use for their coefficient banks.
//!
//! Ordering is `(l, m) = (0,0), (1,-1), (1,0), (1,1), (2,-2), ...` with `l`
//! ascending and `m` from `-l` to `+l`; the coefficient layout of field
//! files depends on it.

use nalgebra::Vector3;

use crate::{sc, Error, Result, Scalar};

/// Highest supported band.
pub const MAX_DEGREE: usize = 3;

/// Tolerance on `|dir| = 1` for basis evaluation.
const UNIT_TOL: f64 = 1e-6;

/// Evaluated basis values for one direction.
#[derive(Debug, Clone)]
pub struct ShBasis<T> {
    degree: usize,
    values: [T; 16],
}

impl<T: Scalar> ShBasis<T> {
    /// All `(degree + 1)^2` basis values in (l, m) order.
    pub fn values(&self) -> &[T] {
        &self.values[..(self.degree + 1) * (self.degree + 1)]
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Value for band `l`, order `m`. Panics outside the evaluated range.
    pub fn value(&self, l: usize, m: i32) -> T {
        assert!(
            l <= self.degree && (m.unsigned_abs() as usize) <= l,
            "basis index (l={l}, m={m}) out of range"
        );
        self.values[l * l + (l as i32 + m) as usize]
    }
}

/// Associated Legendre polynomial `P_l^m(x)` for `0 <= m <= l <= 3`, with
/// the Condon-Shortley factor `(-1)^m` included.
pub fn legendre<T: Scalar>(l: usize, m: usize, x: T) -> Result<T> {
    if m > l || l > MAX_DEGREE {
        return Err(Error::Argument(format!(
            "legendre degree/order out of range: l={l}, m={m}"
        )));
    }
    let one = T::one();
    if x.abs() > one + sc::<T>(1e-12) {
        return Err(Error::Argument(format!(
            "legendre argument outside [-1, 1]: {x}"
        )));
    }
    let x = x.clamp(-one, one);
    // 1 - x^2 = sin^2(theta) for x = cos(theta); non-negative after clamping.
    let s2 = (one - x * x).max(T::zero());
    let s = s2.sqrt();
    let v = match (l, m) {
        (0, 0) => one,
        (1, 0) => x,
        (1, 1) => -s,
        (2, 0) => (sc::<T>(3.0) * x * x - one) * sc::<T>(0.5),
        (2, 1) => -sc::<T>(3.0) * x * s,
        (2, 2) => sc::<T>(3.0) * s2,
        (3, 0) => (sc::<T>(5.0) * x * x - sc::<T>(3.0)) * x * sc::<T>(0.5),
        (3, 1) => -sc::<T>(1.5) * (sc::<T>(5.0) * x * x - one) * s,
        (3, 2) => sc::<T>(15.0) * x * s2,
        (3, 3) => -sc::<T>(15.0) * s2 * s,
        _ => unreachable!(),
    };
    Ok(v)
}

/// Normalization constant `K_l^m = sqrt((2l+1)(l-|m|)! / (4 pi (l+|m|)!))`.
fn normalization<T: Scalar>(l: usize, m: usize) -> T {
    const FACT: [f64; 7] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0];
    let n = (2 * l + 1) as f64 * FACT[l - m];
    let d = 4.0 * std::f64::consts::PI * FACT[l + m];
    sc::<T>((n / d).sqrt())
}

/// Evaluate the basis for a unit direction up to `degree`.
pub fn eval_sh_basis<T: Scalar>(degree: usize, dir: &Vector3<T>) -> Result<ShBasis<T>> {
    if degree > MAX_DEGREE {
        return Err(Error::Argument(format!(
            "spherical harmonics degree {degree} exceeds {MAX_DEGREE}"
        )));
    }
    let norm = dir.norm();
    if (norm - T::one()).abs() > sc::<T>(UNIT_TOL) {
        return Err(Error::Argument(format!(
            "direction is not unit length (|dir| = {norm})"
        )));
    }

    let cos_theta = dir.z.clamp(-T::one(), T::one());
    let phi = dir.y.atan2(dir.x);
    let sqrt2 = sc::<T>(std::f64::consts::SQRT_2);

    let mut values = [T::zero(); 16];
    for l in 0..=degree {
        for m in -(l as i32)..=(l as i32) {
            let ma = m.unsigned_abs() as usize;
            let p = legendre(l, ma, cos_theta)?;
            let k = normalization::<T>(l, ma);
            let mphi = sc::<T>(ma as f64) * phi;
            let v = match m.cmp(&0) {
                std::cmp::Ordering::Greater => sqrt2 * k * mphi.cos() * p,
                std::cmp::Ordering::Less => sqrt2 * k * mphi.sin() * p,
                std::cmp::Ordering::Equal => k * p,
            };
            values[l * l + (l as i32 + m) as usize] = v;
        }
    }
    Ok(ShBasis { degree, values })
}
