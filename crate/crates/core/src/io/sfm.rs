//! Structure-from-motion text directories: `cameras.txt`, `images.txt`,
//! `points3D.txt` in the standard layout.
//!
//! Image lines carry `id qw qx qy qz tx ty tz camera_id name` followed by an
//! observations line; point lines carry `id x y z r g b error` and
//! `(image_id point2d_idx)` track pairs. Camera centers are recovered as
//! `C = -R^T t`.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::alignment::CameraView;
use crate::field::quat_to_rotation;
use crate::partition::{PerspectiveCamera, PlanCamera, PlanPoint};
use crate::{sc, Error, Result, Scalar};

/// Pinhole intrinsics of one camera entry.
#[derive(Debug, Clone, PartialEq)]
pub struct SfmCamera<T> {
    pub id: u32,
    pub width: u32,
    pub height: u32,
    pub fx: T,
    pub fy: T,
    pub cx: T,
    pub cy: T,
}

/// One registered image: world-to-camera rotation `q` (w first) and
/// translation `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SfmImage<T> {
    pub id: u32,
    pub quat: [T; 4],
    pub translation: Vector3<T>,
    pub camera_id: u32,
    pub name: String,
}

impl<T: Scalar> SfmImage<T> {
    pub fn rotation(&self) -> Matrix3<T> {
        quat_to_rotation(&self.quat)
    }

    /// Camera center `C = -R^T t`.
    pub fn center(&self) -> Vector3<T> {
        -(self.rotation().transpose() * self.translation)
    }

    /// World-space viewing direction (camera +z axis).
    pub fn view_direction(&self) -> Vector3<T> {
        self.rotation().transpose() * Vector3::new(T::zero(), T::zero(), T::one())
    }
}

/// One sparse point with its observing image ids.
#[derive(Debug, Clone, PartialEq)]
pub struct SfmPoint<T> {
    pub id: u64,
    pub position: Vector3<T>,
    pub color: [u8; 3],
    pub error: T,
    /// Observing image ids, ascending and deduplicated.
    pub track: Vec<u32>,
}

/// A parsed structure-from-motion reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct SfmScene<T> {
    pub cameras: Vec<SfmCamera<T>>,
    pub images: Vec<SfmImage<T>>,
    pub points: Vec<SfmPoint<T>>,
}

impl<T: Scalar> SfmScene<T> {
    pub fn camera(&self, id: u32) -> Option<&SfmCamera<T>> {
        self.cameras.iter().find(|c| c.id == id)
    }

    /// Ground-plane camera positions in image order.
    pub fn ground_positions(&self) -> Vec<Vector2<T>> {
        self.images
            .iter()
            .map(|img| {
                let c = img.center();
                Vector2::new(c.x, c.y)
            })
            .collect()
    }

    pub fn camera_views(&self) -> Vec<CameraView<T>> {
        self.images
            .iter()
            .map(|img| CameraView {
                center: img.center(),
                optical_axis: img.view_direction(),
            })
            .collect()
    }

    pub fn point_positions(&self) -> Vec<Vector3<T>> {
        self.points.iter().map(|p| p.position).collect()
    }

    /// z interval of the sparse points.
    pub fn z_range(&self) -> Option<(T, T)> {
        let mut iter = self.points.iter().map(|p| p.position.z);
        let first = iter.next()?;
        let mut lo = first;
        let mut hi = first;
        for z in iter {
            lo = lo.min(z);
            hi = hi.max(z);
        }
        Some((lo, hi))
    }

    /// Planning view of the images, with intrinsics resolved.
    pub fn plan_cameras(&self) -> Result<Vec<PlanCamera<T>>> {
        self.images
            .iter()
            .map(|img| {
                let cam = self.camera(img.camera_id).ok_or_else(|| {
                    Error::Format(format!(
                        "image {} references unknown camera {}",
                        img.id, img.camera_id
                    ))
                })?;
                let center = img.center();
                Ok(PlanCamera {
                    id: img.id,
                    ground: Vector2::new(center.x, center.y),
                    camera: PerspectiveCamera {
                        rotation: img.rotation(),
                        translation: img.translation,
                        fx: cam.fx,
                        fy: cam.fy,
                        cx: cam.cx,
                        cy: cam.cy,
                        width: sc::<T>(cam.width as f64),
                        height: sc::<T>(cam.height as f64),
                    },
                })
            })
            .collect()
    }

    pub fn plan_points(&self) -> Vec<PlanPoint<T>> {
        self.points
            .iter()
            .map(|p| PlanPoint {
                id: p.id,
                position: p.position,
                track: p.track.clone(),
            })
            .collect()
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_num<V: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<V> {
    tok.ok_or_else(|| parse_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| parse_err(line, format!("malformed {what}")))
}

fn read_cameras<T: Scalar>(path: &Path) -> Result<Vec<SfmCamera<T>>> {
    let text = fs::read_to_string(path)?;
    let mut cameras = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let id: u32 = parse_num(tok.next(), line_no, "camera id")?;
        let model = tok
            .next()
            .ok_or_else(|| parse_err(line_no, "missing camera model"))?;
        let width: u32 = parse_num(tok.next(), line_no, "image width")?;
        let height: u32 = parse_num(tok.next(), line_no, "image height")?;
        let params: Vec<f64> = tok
            .map(|t| {
                t.parse()
                    .map_err(|_| parse_err(line_no, "malformed camera parameter"))
            })
            .collect::<Result<_>>()?;
        let (fx, fy, cx, cy) = match (model, params.as_slice()) {
            ("SIMPLE_PINHOLE", [f, cx, cy]) => (*f, *f, *cx, *cy),
            ("PINHOLE", [fx, fy, cx, cy]) => (*fx, *fy, *cx, *cy),
            // Distortion is ignored; the plan only needs rough footprints.
            ("SIMPLE_RADIAL", [f, cx, cy, _k]) => (*f, *f, *cx, *cy),
            _ => {
                return Err(parse_err(
                    line_no,
                    format!("unsupported camera model `{model}` or wrong parameter count"),
                ));
            }
        };
        cameras.push(SfmCamera {
            id,
            width,
            height,
            fx: sc(fx),
            fy: sc(fy),
            cx: sc(cx),
            cy: sc(cy),
        });
    }
    Ok(cameras)
}

fn read_images<T: Scalar>(path: &Path) -> Result<Vec<SfmImage<T>>> {
    let text = fs::read_to_string(path)?;
    let mut images = Vec::new();
    let mut expecting_observations = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if expecting_observations {
            // Observations line; may be empty. Content is unused here (point
            // tracks come from the points file) but must tokenize in pairs.
            expecting_observations = false;
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut tok = line.split_whitespace();
        let id: u32 = parse_num(tok.next(), line_no, "image id")?;
        let qw: f64 = parse_num(tok.next(), line_no, "quaternion w")?;
        let qx: f64 = parse_num(tok.next(), line_no, "quaternion x")?;
        let qy: f64 = parse_num(tok.next(), line_no, "quaternion y")?;
        let qz: f64 = parse_num(tok.next(), line_no, "quaternion z")?;
        let tx: f64 = parse_num(tok.next(), line_no, "translation x")?;
        let ty: f64 = parse_num(tok.next(), line_no, "translation y")?;
        let tz: f64 = parse_num(tok.next(), line_no, "translation z")?;
        let camera_id: u32 = parse_num(tok.next(), line_no, "camera id")?;
        let name = tok
            .next()
            .ok_or_else(|| parse_err(line_no, "missing image name"))?
            .to_string();

        let norm = (qw * qw + qx * qx + qy * qy + qz * qz).sqrt();
        if (norm - 1.0).abs() > 1e-3 {
            return Err(parse_err(
                line_no,
                format!("non-unit rotation quaternion (|q| = {norm:.6})"),
            ));
        }
        images.push(SfmImage {
            id,
            quat: [sc(qw), sc(qx), sc(qy), sc(qz)],
            translation: Vector3::new(sc(tx), sc(ty), sc(tz)),
            camera_id,
            name,
        });
        expecting_observations = true;
    }
    Ok(images)
}

fn read_points<T: Scalar>(path: &Path) -> Result<Vec<SfmPoint<T>>> {
    let text = fs::read_to_string(path)?;
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tok = line.split_whitespace();
        let id: u64 = parse_num(tok.next(), line_no, "point id")?;
        let x: f64 = parse_num(tok.next(), line_no, "x")?;
        let y: f64 = parse_num(tok.next(), line_no, "y")?;
        let z: f64 = parse_num(tok.next(), line_no, "z")?;
        let r: u8 = parse_num(tok.next(), line_no, "red")?;
        let g: u8 = parse_num(tok.next(), line_no, "green")?;
        let b: u8 = parse_num(tok.next(), line_no, "blue")?;
        let error: f64 = parse_num(tok.next(), line_no, "reprojection error")?;
        let rest: Vec<&str> = tok.collect();
        if !rest.len().is_multiple_of(2) {
            return Err(parse_err(line_no, "odd number of track tokens"));
        }
        let mut track = Vec::with_capacity(rest.len() / 2);
        for pair in rest.chunks(2) {
            let image_id: u32 = pair[0]
                .parse()
                .map_err(|_| parse_err(line_no, "malformed track image id"))?;
            track.push(image_id);
        }
        track.sort_unstable();
        track.dedup();
        points.push(SfmPoint {
            id,
            position: Vector3::new(sc(x), sc(y), sc(z)),
            color: [r, g, b],
            error: sc(error),
            track,
        });
    }
    Ok(points)
}

/// Read a structure-from-motion directory.
pub fn read_sfm<T: Scalar>(dir: impl AsRef<Path>) -> Result<SfmScene<T>> {
    let dir = dir.as_ref();
    Ok(SfmScene {
        cameras: read_cameras(&dir.join("cameras.txt"))?,
        images: read_images(&dir.join("images.txt"))?,
        points: read_points(&dir.join("points3D.txt"))?,
    })
}
