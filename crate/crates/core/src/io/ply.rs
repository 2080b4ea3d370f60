//! Binary little-endian PLY storage for Gaussian fields.
//!
//! The vertex element carries one property per scalar attribute. Mandatory
//! attributes are position (`x y z`), color banks (`f_dc_0..2`,
//! `f_rest_0..44`, channel-major), `opacity`, log-scales (`scale_0..2`) and
//! the rotation quaternion (`rot_0..3`, w first). Fully anisotropic banks
//! add `f_alpha_rest_0..14`, `f_scale_rest_0..44` and `f_rot_rest_0..59`,
//! laid out channel-major like the color bank. Unknown properties are
//! skipped on read; ASCII files are rejected.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::Vector3;

use crate::field::{FagkCoeffs, GaussianField, GaussianPrimitive, COLOR_COEFFS, REST_COEFFS};
use crate::{sc, Error, Result, Scalar};

/// Parsed header of a field file.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldFileHeader {
    pub count: usize,
    /// Property (name, byte-size, is_float64) triples in file order.
    pub properties: Vec<(String, usize, bool)>,
    pub fagk_present: bool,
}

fn mandatory_names() -> Vec<String> {
    let mut names = vec!["x".into(), "y".into(), "z".into()];
    for c in 0..3 {
        names.push(format!("f_dc_{c}"));
    }
    for k in 0..45 {
        names.push(format!("f_rest_{k}"));
    }
    names.push("opacity".into());
    for a in 0..3 {
        names.push(format!("scale_{a}"));
    }
    for c in 0..4 {
        names.push(format!("rot_{c}"));
    }
    names
}

fn fagk_names() -> Vec<String> {
    let mut names = Vec::new();
    for k in 0..15 {
        names.push(format!("f_alpha_rest_{k}"));
    }
    for k in 0..45 {
        names.push(format!("f_scale_rest_{k}"));
    }
    for k in 0..60 {
        names.push(format!("f_rot_rest_{k}"));
    }
    names
}

fn property_size(ty: &str) -> Option<(usize, bool)> {
    match ty {
        "char" | "int8" | "uchar" | "uint8" => Some((1, false)),
        "short" | "int16" | "ushort" | "uint16" => Some((2, false)),
        "int" | "int32" | "uint" | "uint32" => Some((4, false)),
        "float" | "float32" => Some((4, false)),
        "double" | "float64" => Some((8, true)),
        _ => None,
    }
}

fn parse_header(reader: &mut impl Read) -> Result<FieldFileHeader> {
    // Header lines are ASCII, terminated by `end_header`.
    let mut lines = Vec::new();
    let mut line = Vec::new();
    loop {
        let mut byte = [0u8; 1];
        reader.read_exact(&mut byte)?;
        if byte[0] == b'\n' {
            let text = String::from_utf8(std::mem::take(&mut line))
                .map_err(|_| Error::Format("header is not valid UTF-8".into()))?;
            let done = text.trim() == "end_header";
            lines.push(text);
            if done {
                break;
            }
            if lines.len() > 4096 {
                return Err(Error::Format("header does not terminate".into()));
            }
        } else {
            line.push(byte[0]);
        }
    }

    let mut iter = lines.iter().map(|l| l.trim());
    if iter.next() != Some("ply") {
        return Err(Error::Format("missing `ply` magic".into()));
    }
    let mut count = None;
    let mut properties = Vec::new();
    let mut format_seen = false;
    for line in iter {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                let kind = tok.next().unwrap_or("");
                if kind != "binary_little_endian" {
                    return Err(Error::Format(format!(
                        "unsupported PLY format `{kind}`; only binary_little_endian is accepted"
                    )));
                }
                format_seen = true;
            }
            Some("comment") | Some("obj_info") => {}
            Some("element") => {
                if count.is_some() {
                    return Err(Error::Format(
                        "only a single `vertex` element is supported".into(),
                    ));
                }
                let name = tok.next().unwrap_or("");
                if name != "vertex" {
                    return Err(Error::Format(format!("unsupported element `{name}`")));
                }
                let n: usize = tok
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::Format("bad vertex count".into()))?;
                count = Some(n);
            }
            Some("property") => {
                let ty = tok.next().unwrap_or("");
                if ty == "list" {
                    return Err(Error::Format("list properties are not supported".into()));
                }
                let (size, is_f64) = property_size(ty)
                    .ok_or_else(|| Error::Format(format!("unknown property type `{ty}`")))?;
                let name = tok
                    .next()
                    .ok_or_else(|| Error::Format("property without a name".into()))?;
                properties.push((name.to_string(), size, is_f64));
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(Error::Format(format!("unexpected header line `{other}`")));
            }
            None => {}
        }
    }
    if !format_seen {
        return Err(Error::Format("missing `format` line".into()));
    }
    let count = count.ok_or_else(|| Error::Format("missing `element vertex` line".into()))?;

    let have = |name: &str| properties.iter().any(|(n, _, _)| n == name);
    for name in mandatory_names() {
        if !have(&name) {
            return Err(Error::Format(format!(
                "missing required attribute `{name}`"
            )));
        }
    }
    let fagk = fagk_names();
    let present = fagk.iter().filter(|n| have(n)).count();
    let fagk_present = match present {
        0 => false,
        n if n == fagk.len() => true,
        _ => {
            let missing = fagk.iter().find(|n| !have(n)).unwrap();
            return Err(Error::Format(format!(
                "incomplete anisotropic banks: missing `{missing}`"
            )));
        }
    };

    Ok(FieldFileHeader {
        count,
        properties,
        fagk_present,
    })
}

/// Read only the header of a field file: primitive count, attribute list,
/// and whether anisotropic banks are present.
pub fn read_field_header(path: impl AsRef<Path>) -> Result<FieldFileHeader> {
    let file = File::open(path.as_ref())?;
    parse_header(&mut BufReader::new(file))
}

/// Read a Gaussian field from a binary PLY file.
pub fn read_field<T: Scalar>(path: impl AsRef<Path>) -> Result<GaussianField<T>> {
    let file = File::open(path.as_ref())?;
    read_field_from(&mut BufReader::new(file))
}

/// Read a Gaussian field from any byte stream.
pub fn read_field_from<T: Scalar>(reader: &mut impl Read) -> Result<GaussianField<T>> {
    let header = parse_header(reader)?;
    let mut wanted = mandatory_names();
    if header.fagk_present {
        wanted.extend(fagk_names());
    }
    // Map each file property to a slot in the per-vertex scratch buffer.
    let slot_of = |name: &str| wanted.iter().position(|w| w == name);
    let plan: Vec<(Option<usize>, usize, bool)> = header
        .properties
        .iter()
        .map(|(name, size, is_f64)| (slot_of(name), *size, *is_f64))
        .collect();
    for (slot, size, _) in &plan {
        if slot.is_some() && *size < 4 {
            return Err(Error::Format(
                "field attributes must be float or double".into(),
            ));
        }
    }

    let mut scratch = vec![0.0f64; wanted.len()];
    let mut skip_buf = [0u8; 8];
    let mut primitives = Vec::with_capacity(header.count);
    for _ in 0..header.count {
        for (slot, size, is_f64) in &plan {
            match slot {
                Some(k) => {
                    scratch[*k] = if *is_f64 {
                        reader.read_f64::<LittleEndian>()?
                    } else {
                        reader.read_f32::<LittleEndian>()? as f64
                    };
                }
                None => reader.read_exact(&mut skip_buf[..*size])?,
            }
        }
        primitives.push(primitive_from_scratch::<T>(&scratch, header.fagk_present));
    }
    GaussianField::from_primitives(primitives)
}

// Index arithmetic mirrors the on-disk attribute layout.
#[allow(clippy::needless_range_loop)]
fn primitive_from_scratch<T: Scalar>(s: &[f64], fagk: bool) -> GaussianPrimitive<T> {
    let v = |i: usize| sc::<T>(s[i]);
    let mut color_sh = [[T::zero(); 3]; COLOR_COEFFS];
    for c in 0..3 {
        color_sh[0][c] = v(3 + c);
        for k in 0..REST_COEFFS {
            color_sh[k + 1][c] = v(6 + c * REST_COEFFS + k);
        }
    }
    let fagk = fagk.then(|| {
        let base = 59;
        let mut banks = FagkCoeffs::zeros();
        for k in 0..REST_COEFFS {
            banks.opacity[k] = v(base + k);
            for a in 0..3 {
                banks.scale[k][a] = v(base + 15 + a * REST_COEFFS + k);
            }
            for c in 0..4 {
                banks.rotation[k][c] = v(base + 60 + c * REST_COEFFS + k);
            }
        }
        banks
    });
    GaussianPrimitive {
        position: Vector3::new(v(0), v(1), v(2)),
        color_sh,
        opacity_logit: v(51),
        log_scale: Vector3::new(v(52), v(53), v(54)),
        rotation: [v(55), v(56), v(57), v(58)],
        fagk,
    }
}

/// Write a Gaussian field as binary little-endian PLY with float32 payload.
pub fn write_field<T: Scalar>(field: &GaussianField<T>, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path.as_ref())?;
    let mut writer = BufWriter::new(file);
    write_field_to(field, &mut writer)?;
    writer.flush()?;
    Ok(())
}

/// Write a Gaussian field to any byte sink.
pub fn write_field_to<T: Scalar>(field: &GaussianField<T>, writer: &mut impl Write) -> Result<()> {
    let mut names = mandatory_names();
    if field.fagk_enabled() {
        names.extend(fagk_names());
    }
    writeln!(writer, "ply")?;
    writeln!(writer, "format binary_little_endian 1.0")?;
    writeln!(writer, "element vertex {}", field.len())?;
    for name in &names {
        writeln!(writer, "property float {name}")?;
    }
    writeln!(writer, "end_header")?;

    let f = |w: &mut dyn Write, v: T| -> Result<()> {
        w.write_f32::<LittleEndian>(v.to_f32().unwrap_or(f32::NAN))?;
        Ok(())
    };
    for p in field.primitives() {
        for c in 0..3 {
            f(writer, p.position[c])?;
        }
        for c in 0..3 {
            f(writer, p.color_sh[0][c])?;
        }
        for c in 0..3 {
            for k in 0..REST_COEFFS {
                f(writer, p.color_sh[k + 1][c])?;
            }
        }
        f(writer, p.opacity_logit)?;
        for a in 0..3 {
            f(writer, p.log_scale[a])?;
        }
        for c in 0..4 {
            f(writer, p.rotation[c])?;
        }
        if let Some(banks) = &p.fagk {
            for k in 0..REST_COEFFS {
                f(writer, banks.opacity[k])?;
            }
            for a in 0..3 {
                for k in 0..REST_COEFFS {
                    f(writer, banks.scale[k][a])?;
                }
            }
            for c in 0..4 {
                for k in 0..REST_COEFFS {
                    f(writer, banks.rotation[k][c])?;
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixture(rng: &mut impl Rng, fagk: bool, n: usize) -> GaussianField<f32> {
        let prims = (0..n)
            .map(|_| {
                let mut color_sh = [[0.0f32; 3]; COLOR_COEFFS];
                for row in &mut color_sh {
                    for v in row.iter_mut() {
                        *v = rng.gen_range(-1.0..1.0);
                    }
                }
                let banks = fagk.then(|| {
                    let mut b = FagkCoeffs::zeros();
                    for v in b.opacity.iter_mut() {
                        *v = rng.gen_range(-1.0..1.0);
                    }
                    for row in b.scale.iter_mut() {
                        for v in row.iter_mut() {
                            *v = rng.gen_range(-1.0..1.0);
                        }
                    }
                    for row in b.rotation.iter_mut() {
                        for v in row.iter_mut() {
                            *v = rng.gen_range(-1.0..1.0);
                        }
                    }
                    b
                });
                GaussianPrimitive {
                    position: Vector3::new(
                        rng.gen_range(-10.0..10.0),
                        rng.gen_range(-10.0..10.0),
                        rng.gen_range(-10.0..10.0),
                    ),
                    rotation: [1.0, 0.0, 0.0, 0.0],
                    log_scale: Vector3::new(0.1, -0.1, 0.2),
                    opacity_logit: rng.gen_range(-3.0..3.0),
                    color_sh,
                    fagk: banks,
                }
            })
            .collect();
        GaussianField::from_primitives(prims).unwrap()
    }

    fn roundtrip(field: &GaussianField<f32>) -> GaussianField<f32> {
        let mut bytes = Vec::new();
        write_field_to(field, &mut bytes).unwrap();
        read_field_from(&mut bytes.as_slice()).unwrap()
    }

    #[test]
    fn empty_field_roundtrips() {
        let field = GaussianField::<f32>::empty();
        assert_eq!(roundtrip(&field), field);
    }

    #[test]
    fn vanilla_field_roundtrips_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(149);
        let field = fixture(&mut rng, false, 7);
        let back = roundtrip(&field);
        assert_eq!(back, field);
        assert!(!back.fagk_enabled());
    }

    #[test]
    fn fagk_field_roundtrips_bit_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(151);
        let field = fixture(&mut rng, true, 5);
        let back = roundtrip(&field);
        assert_eq!(back, field);
        assert!(back.fagk_enabled());
    }

    #[test]
    fn f64_lift_preserves_f32_payload() {
        let mut rng = ChaCha8Rng::seed_from_u64(157);
        let field = fixture(&mut rng, false, 3);
        let mut bytes = Vec::new();
        write_field_to(&field, &mut bytes).unwrap();
        let wide: GaussianField<f64> = read_field_from(&mut bytes.as_slice()).unwrap();
        let mut bytes2 = Vec::new();
        write_field_to(&wide, &mut bytes2).unwrap();
        assert_eq!(bytes, bytes2);
    }

    /// Fixture written by an independent code path (hand-assembled header
    /// and payload bytes rather than `write_field`).
    fn independent_fixture() -> Vec<u8> {
        let mut names = mandatory_names();
        // Extra attribute interleaved to prove unknown-property skipping.
        names.insert(3, "nx".into());
        let mut out = Vec::new();
        out.extend_from_slice(b"ply\nformat binary_little_endian 1.0\ncomment made elsewhere\n");
        out.extend_from_slice(b"element vertex 2\n");
        for n in &names {
            out.extend_from_slice(format!("property float {n}\n").as_bytes());
        }
        out.extend_from_slice(b"end_header\n");
        for v in 0..2 {
            for (i, name) in names.iter().enumerate() {
                let value: f32 = match name.as_str() {
                    "x" => 1.0 + v as f32,
                    "y" => -2.0,
                    "z" => 3.0,
                    "rot_0" => 1.0,
                    _ => i as f32 * 0.01,
                };
                out.extend_from_slice(&value.to_le_bytes());
            }
        }
        out
    }

    #[test]
    fn loads_externally_written_fixture() {
        let bytes = independent_fixture();
        let field: GaussianField<f64> = read_field_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(field.len(), 2);
        assert!(!field.fagk_enabled());
        let b = field.bounds().unwrap();
        assert_eq!((b.min.x, b.max.x), (1.0, 2.0));
        assert_eq!((b.min.y, b.max.y), (-2.0, -2.0));
        assert_eq!((b.min.z, b.max.z), (3.0, 3.0));
    }

    #[test]
    fn missing_mandatory_attribute_is_named() {
        let mut rng = ChaCha8Rng::seed_from_u64(163);
        let field = fixture(&mut rng, false, 1);
        let mut bytes = Vec::new();
        write_field_to(&field, &mut bytes).unwrap();
        let text = String::from_utf8_lossy(&bytes).to_string();
        let mutated = text.replacen("property float opacity\n", "", 1);
        let err = read_field_from::<f32>(&mut mutated.as_bytes()).unwrap_err();
        match err {
            Error::Format(msg) => assert!(msg.contains("opacity"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn every_mutilated_mandatory_attribute_is_rejected_by_name() {
        let mut rng = ChaCha8Rng::seed_from_u64(167);
        let field = fixture(&mut rng, false, 1);
        let mut bytes = Vec::new();
        write_field_to(&field, &mut bytes).unwrap();
        let text = String::from_utf8_lossy(&bytes).to_string();
        for name in mandatory_names() {
            let needle = format!("property float {name}\n");
            let mutated = text.replacen(&needle, &format!("property float zz_{name}\n"), 1);
            let err = read_field_from::<f32>(&mut mutated.as_bytes()).unwrap_err();
            match err {
                Error::Format(msg) => assert!(msg.contains(&name), "{name}: {msg}"),
                other => panic!("{name}: unexpected error {other:?}"),
            }
        }
    }

    #[test]
    fn header_probe_reports_count_and_banks() {
        let mut rng = ChaCha8Rng::seed_from_u64(191);
        let field = fixture(&mut rng, true, 6);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.ply");
        write_field(&field, &path).unwrap();
        let header = read_field_header(&path).unwrap();
        assert_eq!(header.count, 6);
        assert!(header.fagk_present);
        assert_eq!(header.properties.len(), 59 + 120);
    }

    #[test]
    fn truncated_payload_is_io_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(173);
        let field = fixture(&mut rng, false, 4);
        let mut bytes = Vec::new();
        write_field_to(&field, &mut bytes).unwrap();
        bytes.truncate(bytes.len() - 10);
        let err = read_field_from::<f32>(&mut bytes.as_slice()).unwrap_err();
        assert!(matches!(err, Error::Io(_)));
    }

    #[test]
    fn ascii_files_are_rejected() {
        let bytes = b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
        let err = read_field_from::<f32>(&mut bytes.as_slice()).unwrap_err();
        assert!(matches!(err, Error::Format(_)));
    }

    #[test]
    fn partial_fagk_banks_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(179);
        let field = fixture(&mut rng, true, 1);
        let mut bytes = Vec::new();
        write_field_to(&field, &mut bytes).unwrap();
        let text = String::from_utf8_lossy(&bytes).to_string();
        let mutated = text.replacen("property float f_rot_rest_59\n", "", 1);
        let err = read_field_from::<f32>(&mut mutated.as_bytes()).unwrap_err();
        match err {
            Error::Format(msg) => assert!(msg.contains("f_rot_rest_59"), "{msg}"),
            other => panic!("unexpected error {other:?}"),
        }
    }
}
