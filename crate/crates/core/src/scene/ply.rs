//! Binary point-cloud (PLY) scene ingestion and export.
//!
//! The on-disk layout is the de-facto export convention for trained Gaussian
//! scenes: a single `vertex` element of little-endian float32 properties in
//! the order x, y, z, nx, ny, nz, f_dc_0..2, f_rest_0..44, opacity,
//! scale_0..2, rot_0..3. Normals are ignored on load and written as zeros.
//! The 45 `f_rest` values are grouped channel-major (15 per channel). Files
//! trained at a lower spherical-harmonic degree may carry 0, 9 or 24 rest
//! coefficients; missing ones are padded with zeros.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{ActivationError, Gaussian3D, RawGaussian, SH_COEFF_COUNT};

/// Rest coefficients per channel at degree 3.
const REST_PER_CHANNEL: usize = 15;
/// Total rest coefficients at degree 3.
const REST_TOTAL: usize = 45;

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("reading scene file: {0}")]
    Io(#[from] io::Error),
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: u64, reason: String },
    #[error("missing required property '{name}'")]
    MissingProperty { name: String },
    #[error("unsupported type for property '{name}' at byte {offset}: only float32 is supported")]
    UnsupportedPropertyType { name: String, offset: u64 },
    #[error(
        "truncated payload at byte {offset}: element {element} ends inside property '{property}'"
    )]
    TruncatedPayload {
        offset: u64,
        element: usize,
        property: String,
    },
    #[error("element {element}: {source}")]
    InvalidElement {
        element: usize,
        source: ActivationError,
    },
}

struct Header {
    vertex_count: usize,
    /// Property names in declaration order; all float32.
    properties: Vec<String>,
    /// File offset of the first payload byte.
    data_start: u64,
}

fn read_header(reader: &mut impl Read) -> Result<Header, SceneError> {
    let mut offset: u64 = 0;
    let mut line_start: u64;
    let mut lines = Vec::new();
    // Header lines are newline-terminated ASCII; read byte-wise so the
    // payload that follows stays untouched.
    loop {
        line_start = offset;
        let mut line = Vec::new();
        loop {
            let mut byte = [0u8; 1];
            match reader.read(&mut byte)? {
                0 => {
                    return Err(SceneError::MalformedHeader {
                        offset,
                        reason: "file ends before end_header".into(),
                    })
                }
                _ => {
                    offset += 1;
                    if byte[0] == b'\n' {
                        break;
                    }
                    line.push(byte[0]);
                }
            }
        }
        let text = String::from_utf8(line).map_err(|_| SceneError::MalformedHeader {
            offset: line_start,
            reason: "non-ASCII header line".into(),
        })?;
        let text = text.trim_end_matches('\r').to_string();
        let done = text == "end_header";
        lines.push((line_start, text));
        if done {
            break;
        }
    }

    let mut it = lines.into_iter();
    let (off, magic) = it.next().unwrap();
    if magic != "ply" {
        return Err(SceneError::MalformedHeader {
            offset: off,
            reason: format!("expected 'ply' magic, found '{magic}'"),
        });
    }

    let mut vertex_count: Option<usize> = None;
    let mut properties = Vec::new();
    let mut saw_format = false;
    for (off, line) in it {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("format") => {
                let rest: Vec<&str> = words.collect();
                if rest != ["binary_little_endian", "1.0"] {
                    return Err(SceneError::MalformedHeader {
                        offset: off,
                        reason: format!("unsupported format '{}'", rest.join(" ")),
                    });
                }
                saw_format = true;
            }
            Some("comment") => {}
            Some("element") => {
                let name = words.next().unwrap_or("");
                if name != "vertex" {
                    return Err(SceneError::MalformedHeader {
                        offset: off,
                        reason: format!("unsupported element '{name}'"),
                    });
                }
                if vertex_count.is_some() {
                    return Err(SceneError::MalformedHeader {
                        offset: off,
                        reason: "duplicate vertex element".into(),
                    });
                }
                let count = words
                    .next()
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| SceneError::MalformedHeader {
                        offset: off,
                        reason: "element count is not an integer".into(),
                    })?;
                vertex_count = Some(count);
            }
            Some("property") => {
                if vertex_count.is_none() {
                    return Err(SceneError::MalformedHeader {
                        offset: off,
                        reason: "property before any element".into(),
                    });
                }
                let ty = words.next().unwrap_or("");
                let name = words.next().unwrap_or("").to_string();
                if name.is_empty() {
                    return Err(SceneError::MalformedHeader {
                        offset: off,
                        reason: "property without a name".into(),
                    });
                }
                if ty != "float" && ty != "float32" {
                    return Err(SceneError::UnsupportedPropertyType { name, offset: off });
                }
                properties.push(name);
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(SceneError::MalformedHeader {
                    offset: off,
                    reason: format!("unexpected keyword '{other}'"),
                })
            }
            None => {}
        }
    }
    if !saw_format {
        return Err(SceneError::MalformedHeader {
            offset: 0,
            reason: "missing format line".into(),
        });
    }
    let vertex_count = vertex_count.ok_or(SceneError::MalformedHeader {
        offset: 0,
        reason: "missing vertex element".into(),
    })?;

    Ok(Header {
        vertex_count,
        properties,
        data_start: offset,
    })
}

/// Column indices of every field the loader consumes.
struct FieldMap {
    position: [usize; 3],
    f_dc: [usize; 3],
    /// Present rest coefficients, `f_rest_0..k`, channel-major.
    f_rest: Vec<usize>,
    opacity: usize,
    scale: [usize; 3],
    rot: [usize; 4],
}

impl FieldMap {
    fn build(properties: &[String]) -> Result<FieldMap, SceneError> {
        let find = |name: &str| -> Result<usize, SceneError> {
            properties
                .iter()
                .position(|p| p == name)
                .ok_or_else(|| SceneError::MissingProperty { name: name.into() })
        };
        let mut f_rest = Vec::new();
        loop {
            let name = format!("f_rest_{}", f_rest.len());
            match properties.iter().position(|p| *p == name) {
                Some(idx) => f_rest.push(idx),
                None => break,
            }
        }
        if ![0, 9, 24, REST_TOTAL].contains(&f_rest.len()) {
            return Err(SceneError::MissingProperty {
                name: format!(
                    "f_rest_* ({} rest coefficients present, expected 0, 9, 24 or 45)",
                    f_rest.len()
                ),
            });
        }
        Ok(FieldMap {
            position: [find("x")?, find("y")?, find("z")?],
            f_dc: [find("f_dc_0")?, find("f_dc_1")?, find("f_dc_2")?],
            f_rest,
            opacity: find("opacity")?,
            scale: [find("scale_0")?, find("scale_1")?, find("scale_2")?],
            rot: [find("rot_0")?, find("rot_1")?, find("rot_2")?, find("rot_3")?],
        })
    }
}

/// Loads a trained Gaussian scene, applying activations and validating every
/// primitive. The returned count always equals the header's element count.
pub fn load_scene(path: impl AsRef<Path>) -> Result<Vec<Gaussian3D>, SceneError> {
    let file = File::open(path.as_ref())?;
    load_scene_from(BufReader::new(file))
}

/// Same as [`load_scene`] but over any byte stream.
pub fn load_scene_from(mut reader: impl Read) -> Result<Vec<Gaussian3D>, SceneError> {
    let header = read_header(&mut reader)?;
    let fields = FieldMap::build(&header.properties)?;
    let stride = header.properties.len() * 4;

    let mut scene = Vec::with_capacity(header.vertex_count);
    let mut record = vec![0u8; stride];
    let mut renormalized = 0usize;
    for element in 0..header.vertex_count {
        let mut filled = 0;
        while filled < stride {
            let n = reader.read(&mut record[filled..])?;
            if n == 0 {
                let property = header.properties[filled / 4].clone();
                return Err(SceneError::TruncatedPayload {
                    offset: header.data_start + (element * stride + filled) as u64,
                    element,
                    property,
                });
            }
            filled += n;
        }
        let get = |idx: usize| f32::from_le_bytes(record[idx * 4..idx * 4 + 4].try_into().unwrap());

        let mut sh = [[0.0f32; 3]; SH_COEFF_COUNT];
        for ch in 0..3 {
            sh[0][ch] = get(fields.f_dc[ch]);
        }
        let rest_per_channel = fields.f_rest.len() / 3;
        for ch in 0..3 {
            for k in 0..rest_per_channel.min(REST_PER_CHANNEL) {
                sh[1 + k][ch] = get(fields.f_rest[ch * rest_per_channel + k]);
            }
        }

        let raw = RawGaussian {
            log_scale: fields.scale.map(get),
            opacity_logit: get(fields.opacity),
            rotation: fields.rot.map(get),
        };
        let g = Gaussian3D::from_raw(fields.position.map(get), raw, sh)
            .map_err(|source| SceneError::InvalidElement { element, source })?;
        if g.rotation_norm_deviation() > 1e-5 {
            renormalized += 1;
        }
        scene.push(g);
    }
    if renormalized > 0 {
        log::debug!("normalized {renormalized} rotation quaternions beyond 1e-5 on load");
    }
    Ok(scene)
}

/// Writes a scene in the canonical binary layout. Loading the result and
/// writing it again reproduces the bytes exactly.
pub fn save_scene(path: impl AsRef<Path>, scene: &[Gaussian3D]) -> Result<(), SceneError> {
    let file = File::create(path.as_ref())?;
    let mut w = BufWriter::new(file);
    save_scene_to(&mut w, scene)?;
    w.flush()?;
    Ok(())
}

/// Same as [`save_scene`] but to any byte sink.
pub fn save_scene_to(w: &mut impl Write, scene: &[Gaussian3D]) -> Result<(), SceneError> {
    writeln!(w, "ply")?;
    writeln!(w, "format binary_little_endian 1.0")?;
    writeln!(w, "element vertex {}", scene.len())?;
    for name in ["x", "y", "z", "nx", "ny", "nz"] {
        writeln!(w, "property float {name}")?;
    }
    for i in 0..3 {
        writeln!(w, "property float f_dc_{i}")?;
    }
    for i in 0..REST_TOTAL {
        writeln!(w, "property float f_rest_{i}")?;
    }
    writeln!(w, "property float opacity")?;
    for i in 0..3 {
        writeln!(w, "property float scale_{i}")?;
    }
    for i in 0..4 {
        writeln!(w, "property float rot_{i}")?;
    }
    writeln!(w, "end_header")?;

    let mut put = |v: f32| w.write_all(&v.to_le_bytes());
    for g in scene {
        for i in 0..3 {
            put(g.position[i])?;
        }
        for _ in 0..3 {
            put(0.0)?; // normals are not part of the representation
        }
        for ch in 0..3 {
            put(g.sh[0][ch])?;
        }
        for ch in 0..3 {
            for k in 0..REST_PER_CHANNEL {
                put(g.sh[1 + k][ch])?;
            }
        }
        put(g.raw.opacity_logit)?;
        for v in g.raw.log_scale {
            put(v)?;
        }
        for v in g.raw.rotation {
            put(v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, RngExt, SeedableRng};

    fn sample_scene(n: usize, seed: u64) -> Vec<Gaussian3D> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let mut sh = [[0.0f32; 3]; SH_COEFF_COUNT];
                for c in sh.iter_mut().flatten() {
                    *c = rng.random_range(-1.0..1.0);
                }
                let raw = RawGaussian {
                    log_scale: [
                        rng.random_range(-4.0..0.5),
                        rng.random_range(-4.0..0.5),
                        rng.random_range(-4.0..0.5),
                    ],
                    opacity_logit: rng.random_range(-4.0..4.0),
                    rotation: [
                        rng.random_range(-1.0..1.0f32) + 1.5,
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    ],
                };
                Gaussian3D::from_raw(
                    [
                        rng.random_range(-5.0..5.0),
                        rng.random_range(-5.0..5.0),
                        rng.random_range(1.0..9.0),
                    ],
                    raw,
                    sh,
                )
                .unwrap()
            })
            .collect()
    }

    fn to_bytes(scene: &[Gaussian3D]) -> Vec<u8> {
        let mut buf = Vec::new();
        save_scene_to(&mut buf, scene).unwrap();
        buf
    }

    #[test]
    fn empty_scene_round_trips() {
        let bytes = to_bytes(&[]);
        let scene = load_scene_from(&bytes[..]).unwrap();
        assert!(scene.is_empty());
    }

    #[test]
    fn opacity_logit_zero_loads_as_half() {
        let mut g = sample_scene(1, 7).remove(0);
        g.raw.opacity_logit = 0.0;
        let bytes = to_bytes(&[g]);
        let scene = load_scene_from(&bytes[..]).unwrap();
        assert_eq!(scene.len(), 1);
        assert_eq!(scene[0].opacity, 0.5);
    }

    #[test]
    fn serialize_load_serialize_is_bit_exact() {
        let scene = sample_scene(23, 11);
        let bytes = to_bytes(&scene);
        let reloaded = load_scene_from(&bytes[..]).unwrap();
        assert_eq!(to_bytes(&reloaded), bytes);
    }

    /// Independent text-mode re-parse of the binary layout: splits the header
    /// on whitespace only and walks the payload with explicit offset
    /// arithmetic, then spot-checks three records against the loader.
    #[test]
    fn spot_check_against_text_mode_reparse() {
        let scene = sample_scene(57, 13);
        let bytes = to_bytes(&scene);

        let header_end = bytes
            .windows(11)
            .position(|w| w == b"end_header\n")
            .unwrap()
            + 11;
        let header = std::str::from_utf8(&bytes[..header_end]).unwrap();
        let words: Vec<&str> = header.split_whitespace().collect();
        let count: usize = words[words.iter().position(|w| *w == "vertex").unwrap() + 1]
            .parse()
            .unwrap();
        let nprops = words.iter().filter(|w| **w == "property").count();
        assert_eq!(count, 57);
        assert_eq!(nprops, 62);

        let prop_names: Vec<&str> = words
            .iter()
            .enumerate()
            .filter(|(_, w)| **w == "property")
            .map(|(i, _)| words[i + 2])
            .collect();
        let col = |name: &str| prop_names.iter().position(|p| *p == name).unwrap();
        let field = |element: usize, column: usize| -> f32 {
            let at = header_end + (element * nprops + column) * 4;
            f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
        };

        let loaded = load_scene_from(&bytes[..]).unwrap();
        for element in [0usize, 28, 56] {
            let g = &loaded[element];
            assert_eq!(field(element, col("x")), g.position.x);
            assert_eq!(field(element, col("z")), g.position.z);
            assert_eq!(field(element, col("opacity")), g.raw.opacity_logit);
            assert_eq!(field(element, col("scale_1")), g.raw.log_scale[1]);
            assert_eq!(field(element, col("rot_0")), g.raw.rotation[0]);
            assert_eq!(field(element, col("f_dc_2")), g.sh[0][2]);
            // channel-major rest block: f_rest_17 is channel 1, order 2.
            assert_eq!(field(element, col("f_rest_17")), g.sh[3][1]);
        }
    }

    #[test]
    fn truncated_payload_reports_offset_and_property() {
        let scene = sample_scene(3, 5);
        let bytes = to_bytes(&scene);
        let cut = bytes.len() - 10;
        match load_scene_from(&bytes[..cut]) {
            Err(SceneError::TruncatedPayload {
                offset,
                element,
                property,
            }) => {
                assert_eq!(element, 2);
                assert_eq!(offset, cut as u64);
                // 10 bytes short cuts into the trailing rot block.
                assert!(property.starts_with("rot_"), "property was {property}");
            }
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn missing_property_is_reported_by_name() {
        let scene = sample_scene(1, 5);
        let bytes = to_bytes(&scene);
        let header_end = bytes
            .windows(11)
            .position(|w| w == b"end_header\n")
            .unwrap()
            + 11;
        let header = std::str::from_utf8(&bytes[..header_end]).unwrap();
        let patched = header.replace("property float opacity\n", "");
        let mut bad = patched.into_bytes();
        bad.extend_from_slice(&bytes[header_end..]);
        match load_scene_from(&bad[..]) {
            Err(SceneError::MissingProperty { name }) => assert_eq!(name, "opacity"),
            other => panic!("expected missing property, got {other:?}"),
        }
    }

    #[test]
    fn ascii_format_is_rejected() {
        let bad = b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
        assert!(matches!(
            load_scene_from(&bad[..]),
            Err(SceneError::MalformedHeader { .. })
        ));
    }

    #[test]
    fn lower_degree_rest_block_is_zero_padded() {
        // Degree-1 export: 9 rest coefficients, 3 per channel.
        let mut buf = Vec::new();
        buf.extend_from_slice(b"ply\nformat binary_little_endian 1.0\nelement vertex 1\n");
        let mut names = vec!["x", "y", "z"];
        names.extend(["f_dc_0", "f_dc_1", "f_dc_2"]);
        let rest: Vec<String> = (0..9).map(|i| format!("f_rest_{i}")).collect();
        names.extend(rest.iter().map(|s| s.as_str()));
        names.extend(["opacity", "scale_0", "scale_1", "scale_2"]);
        names.extend(["rot_0", "rot_1", "rot_2", "rot_3"]);
        for n in &names {
            buf.extend_from_slice(format!("property float {n}\n").as_bytes());
        }
        buf.extend_from_slice(b"end_header\n");
        let mut values = vec![0.0f32; names.len()];
        values[3] = 0.25; // f_dc_0
        values[6] = 1.25; // f_rest_0 -> sh[1][0]
        values[9] = 2.5; // f_rest_3 -> sh[1][1]
        values[names.len() - 4] = 1.0; // rot_0
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let scene = load_scene_from(&buf[..]).unwrap();
        assert_eq!(scene[0].sh[0][0], 0.25);
        assert_eq!(scene[0].sh[1][0], 1.25);
        assert_eq!(scene[0].sh[1][1], 2.5);
        assert_eq!(scene[0].sh[4][0], 0.0);
        assert_eq!(scene[0].sh[15][2], 0.0);
    }

    #[test]
    fn file_round_trip_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scene.ply");
        let scene = sample_scene(9, 3);
        save_scene(&path, &scene).unwrap();
        let loaded = load_scene(&path).unwrap();
        assert_eq!(loaded.len(), 9);
        let mut first = Vec::new();
        save_scene_to(&mut first, &scene).unwrap();
        let mut second = Vec::new();
        save_scene_to(&mut second, &loaded).unwrap();
        assert_eq!(first, second);
    }
}
