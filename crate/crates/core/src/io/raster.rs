//! Raster output: lossless 8-bit PNG plus a 6-line world file carrying the
//! affine pixel-to-world mapping.

use std::fs;
use std::path::{Path, PathBuf};

use crate::rasterizer::Raster;
use crate::tdom::TdomGridSpec;
use crate::{sc, Error, Result, Scalar};

/// The six world-file parameters in file order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldFile {
    /// Pixel size in x.
    pub x_scale: f64,
    pub y_skew: f64,
    pub x_skew: f64,
    /// Pixel size in y, negative for north-up rasters.
    pub y_scale: f64,
    /// World x of the center of pixel (0, 0) (top-left).
    pub x_origin: f64,
    /// World y of the center of pixel (0, 0).
    pub y_origin: f64,
}

impl WorldFile {
    /// Derive from a grid: row 0 of the image is the grid's maximum-y row.
    pub fn from_grid<T: Scalar>(grid: &TdomGridSpec<T>) -> Self {
        WorldFile {
            x_scale: grid.sx.to_f64().unwrap(),
            y_skew: 0.0,
            x_skew: 0.0,
            y_scale: -grid.sy.to_f64().unwrap(),
            x_origin: grid.world_x(0).to_f64().unwrap(),
            y_origin: grid.world_y(grid.height - 1).to_f64().unwrap(),
        }
    }

    /// World coordinate of the center of image pixel (column, row).
    pub fn pixel_to_world(&self, column: f64, row: f64) -> (f64, f64) {
        (
            self.x_origin + self.x_scale * column + self.x_skew * row,
            self.y_origin + self.y_skew * column + self.y_scale * row,
        )
    }
}

/// Plain decimal with 10 significant digits.
fn fmt_sig(v: f64) -> String {
    const DIGITS: i32 = 10;
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.9}");
    }
    let exponent = v.abs().log10().floor() as i32;
    let decimals = (DIGITS - 1 - exponent).max(0) as usize;
    format!("{v:.decimals$}")
}

/// Sidecar path: `.png` becomes `.pgw` (first and last extension letters
/// plus `w`), extensionless paths get `.wld`.
pub fn world_file_path(image_path: &Path) -> PathBuf {
    let ext = image_path
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("");
    let world_ext = match ext.len() {
        0..=2 => "wld".to_string(),
        _ => {
            let bytes = ext.as_bytes();
            format!("{}{}w", bytes[0] as char, bytes[ext.len() - 1] as char).to_lowercase()
        }
    };
    image_path.with_extension(world_ext)
}

/// Write the 6-line world file for a grid.
pub fn write_world_file<T: Scalar>(grid: &TdomGridSpec<T>, path: &Path) -> Result<()> {
    let wf = WorldFile::from_grid(grid);
    let text = format!(
        "{}\n{}\n{}\n{}\n{}\n{}\n",
        fmt_sig(wf.x_scale),
        fmt_sig(wf.y_skew),
        fmt_sig(wf.x_skew),
        fmt_sig(wf.y_scale),
        fmt_sig(wf.x_origin),
        fmt_sig(wf.y_origin),
    );
    fs::write(path, text)?;
    Ok(())
}

/// Parse a 6-line world file.
pub fn read_world_file(path: &Path) -> Result<WorldFile> {
    let text = fs::read_to_string(path)?;
    let values: Vec<f64> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.parse()
                .map_err(|_| Error::Format(format!("bad world-file number `{l}`")))
        })
        .collect::<Result<_>>()?;
    if values.len() != 6 {
        return Err(Error::Format(format!(
            "world file has {} values, expected 6",
            values.len()
        )));
    }
    Ok(WorldFile {
        x_scale: values[0],
        y_skew: values[1],
        x_skew: values[2],
        y_scale: values[3],
        x_origin: values[4],
        y_origin: values[5],
    })
}

/// Write an 8-bit RGB PNG and its world file.
pub fn write_raster<T: Scalar>(
    raster: &Raster<T>,
    grid: &TdomGridSpec<T>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let data = raster.to_rgb8();
    let img = image::RgbImage::from_raw(raster.width as u32, raster.height as u32, data)
        .ok_or_else(|| Error::Format("raster buffer does not match its dimensions".into()))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("png encode failed: {e}")))?;
    write_world_file(grid, &world_file_path(path))
}

/// Load an 8-bit image as a raster with channels scaled to [0, 1].
pub fn read_raster<T: Scalar>(path: impl AsRef<Path>) -> Result<Raster<T>> {
    let img = image::open(path.as_ref())
        .map_err(|e| Error::Format(format!("image decode failed: {e}")))?
        .to_rgb8();
    let (width, height) = (img.width() as usize, img.height() as usize);
    let scale = sc::<T>(1.0 / 255.0);
    let pixels = img
        .pixels()
        .map(|p| {
            [
                sc::<T>(p.0[0] as f64) * scale,
                sc::<T>(p.0[1] as f64) * scale,
                sc::<T>(p.0[2] as f64) * scale,
            ]
        })
        .collect();
    Ok(Raster {
        width,
        height,
        pixels,
        transmittance: vec![T::one(); width * height],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn world_file_corner_values() {
        let grid = TdomGridSpec::new(100.0, 200.0, 0.1, 0.1, 10, 10).unwrap();
        let wf = WorldFile::from_grid(&grid);
        assert_relative_eq!(wf.x_origin, 99.55, epsilon = 1e-9);
        assert_relative_eq!(wf.y_origin, 200.45, epsilon = 1e-9);
        assert_eq!(wf.x_scale, 0.1);
        assert_eq!(wf.y_scale, -0.1);
    }

    #[test]
    fn world_file_roundtrip_reproduces_grid_affine() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TdomGridSpec::new(-12.5, 48.25, 0.25, 0.5, 64, 32).unwrap();
        let path = dir.path().join("t.pgw");
        write_world_file(&grid, &path).unwrap();
        let wf = read_world_file(&path).unwrap();
        for (col, row) in [(0usize, 0usize), (5, 7), (63, 31)] {
            let (x, y) = wf.pixel_to_world(col as f64, row as f64);
            assert_relative_eq!(x, grid.world_x(col), epsilon = 1e-9);
            assert_relative_eq!(y, grid.world_y(grid.height - 1 - row), epsilon = 1e-9);
        }
    }

    #[test]
    fn sidecar_extension_rule() {
        assert_eq!(
            world_file_path(Path::new("out/map.png")),
            PathBuf::from("out/map.pgw")
        );
        assert_eq!(
            world_file_path(Path::new("map.tiff")),
            PathBuf::from("map.tfw")
        );
        assert_eq!(world_file_path(Path::new("map")), PathBuf::from("map.wld"));
    }

    #[test]
    fn png_roundtrip_and_stability() {
        let dir = tempfile::tempdir().unwrap();
        let grid = TdomGridSpec::new(0.0, 0.0, 1.0, 1.0, 8, 4).unwrap();
        let mut raster = Raster::filled(8, 4, [0.0; 3]);
        for (i, p) in raster.pixels.iter_mut().enumerate() {
            *p = [
                (i % 7) as f64 / 7.0,
                (i % 3) as f64 / 3.0,
                (i % 5) as f64 / 5.0,
            ];
        }
        let a = dir.path().join("a.png");
        let b = dir.path().join("b.png");
        write_raster(&raster, &grid, &a).unwrap();
        write_raster(&raster, &grid, &b).unwrap();
        assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

        let back: Raster<f64> = read_raster(&a).unwrap();
        assert_eq!(back.width, 8);
        assert_eq!(back.height, 4);
        // Quantization to 8 bits and back stays within half a step.
        for (orig, round) in raster.pixels.iter().zip(&back.pixels) {
            for c in 0..3 {
                assert!((orig[c] - round[c]).abs() <= 0.5 / 255.0 + 1e-12);
            }
        }
    }

    #[test]
    fn ten_significant_digits() {
        assert_eq!(fmt_sig(0.1), "0.1000000000");
        assert_eq!(fmt_sig(-0.1), "-0.1000000000");
        assert_eq!(fmt_sig(99.55), "99.55000000");
        assert_eq!(fmt_sig(123456.789), "123456.7890");
        assert_eq!(fmt_sig(0.0), "0.000000000");
    }
}
