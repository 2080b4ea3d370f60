//! PSNR and SSIM over rendered rasters.

use crate::rasterizer::Raster;
use crate::{sc, Error, Result, Scalar};

/// Peak signal-to-noise ratio in dB, `10 log10(peak^2 / MSE)` with the MSE
/// pooled over all channels. Identical inputs return the infinity sentinel.
pub fn psnr<T: Scalar>(a: &Raster<T>, b: &Raster<T>, peak: T) -> Result<T> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Argument(format!(
            "raster shapes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if peak <= T::zero() {
        return Err(Error::Argument("peak must be positive".into()));
    }
    let mut acc = T::zero();
    for (pa, pb) in a.pixels.iter().zip(&b.pixels) {
        for c in 0..3 {
            let d = pa[c] - pb[c];
            acc += d * d;
        }
    }
    let mse = acc / sc::<T>((a.pixels.len() * 3) as f64);
    if mse == T::zero() {
        return Ok(sc::<T>(f64::INFINITY));
    }
    Ok(sc::<T>(10.0) * (peak * peak / mse).log10())
}

/// SSIM window half-size: 11x11 Gaussian, sigma 1.5.
const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

fn window_weights<T: Scalar>() -> [[T; WINDOW]; WINDOW] {
    let mut w = [[T::zero(); WINDOW]; WINDOW];
    let mut total = 0.0f64;
    let c = (WINDOW / 2) as f64;
    let mut raw = [[0.0f64; WINDOW]; WINDOW];
    for (j, row) in raw.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            let dx = i as f64 - c;
            let dy = j as f64 - c;
            *v = (-(dx * dx + dy * dy) / (2.0 * SIGMA * SIGMA)).exp();
            total += *v;
        }
    }
    for j in 0..WINDOW {
        for i in 0..WINDOW {
            w[j][i] = sc::<T>(raw[j][i] / total);
        }
    }
    w
}

/// Structural similarity, mean over all fully interior 11x11 windows and the
/// three channels. `peak` is the dynamic range of the data.
pub fn ssim<T: Scalar>(a: &Raster<T>, b: &Raster<T>, peak: T) -> Result<T> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Argument(format!(
            "raster shapes differ: {}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    if a.width < WINDOW || a.height < WINDOW {
        return Err(Error::Argument(format!(
            "rasters must be at least {WINDOW}x{WINDOW} for SSIM"
        )));
    }
    let weights = window_weights::<T>();
    let c1 = sc::<T>(K1) * peak * sc::<T>(K1) * peak;
    let c2 = sc::<T>(K2) * peak * sc::<T>(K2) * peak;

    let mut acc = T::zero();
    let mut windows = 0usize;
    for channel in 0..3 {
        for y0 in 0..=(a.height - WINDOW) {
            for x0 in 0..=(a.width - WINDOW) {
                let mut mu_a = T::zero();
                let mut mu_b = T::zero();
                for (j, row) in weights.iter().enumerate() {
                    for (i, wgt) in row.iter().enumerate() {
                        let idx = (y0 + j) * a.width + x0 + i;
                        mu_a += *wgt * a.pixels[idx][channel];
                        mu_b += *wgt * b.pixels[idx][channel];
                    }
                }
                let mut var_a = T::zero();
                let mut var_b = T::zero();
                let mut cov = T::zero();
                for (j, row) in weights.iter().enumerate() {
                    for (i, wgt) in row.iter().enumerate() {
                        let idx = (y0 + j) * a.width + x0 + i;
                        let da = a.pixels[idx][channel] - mu_a;
                        let db = b.pixels[idx][channel] - mu_b;
                        var_a += *wgt * da * da;
                        var_b += *wgt * db * db;
                        cov += *wgt * da * db;
                    }
                }
                let two = sc::<T>(2.0);
                let num = (two * mu_a * mu_b + c1) * (two * cov + c2);
                let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
                acc += num / den;
                windows += 1;
            }
        }
    }
    Ok(acc / sc::<T>(windows as f64))
}
