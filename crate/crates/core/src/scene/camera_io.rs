//! Text key-value camera descriptions.
//!
//! One `key value...` pair per line, `#` starts a comment. Required keys:
//! `width`, `height`, either (`fx`, `fy` and optionally `cx`, `cy`) or
//! (`fov_x`, `fov_y` in radians), and `world_to_camera` with 16 row-major
//! numbers on one line. Optional `near` defaults to 0.2.
//!
//! Field-of-view converts as focal = dim / (2 * tan(fov / 2)). When `cx`/`cy`
//! are absent they default to (dim - 1) / 2, the principal point matching
//! integer pixel sample coordinates.

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::Path;

use nalgebra::Matrix4;

use super::Camera;

/// Near-plane depth used when a camera file does not specify one.
pub const DEFAULT_NEAR_PLANE: f32 = 0.2;

#[derive(Debug, thiserror::Error)]
pub enum CameraError {
    #[error("reading camera file: {0}")]
    Io(#[from] io::Error),
    #[error("missing field '{0}'")]
    MissingField(&'static str),
    #[error("field '{key}' on line {line}: {reason}")]
    Parse {
        key: String,
        line: usize,
        reason: String,
    },
    #[error("non-positive resolution {width}x{height}")]
    NonPositiveResolution { width: u32, height: u32 },
    #[error("non-positive focal length ({fx}, {fy})")]
    NonPositiveFocal { fx: f32, fy: f32 },
    #[error("non-positive near plane {0}")]
    NonPositiveNear(f32),
}

pub fn load_camera(path: impl AsRef<Path>) -> Result<Camera, CameraError> {
    parse_camera(&fs::read_to_string(path.as_ref())?)
}

pub fn parse_camera(text: &str) -> Result<Camera, CameraError> {
    let mut fields: HashMap<&str, (usize, Vec<&str>)> = HashMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut words = line.split_whitespace();
        let key = words.next().unwrap();
        fields.insert(key, (lineno + 1, words.collect()));
    }

    let scalar = |key: &'static str| -> Result<Option<(usize, f64)>, CameraError> {
        match fields.get(key) {
            None => Ok(None),
            Some((line, words)) => {
                if words.len() != 1 {
                    return Err(CameraError::Parse {
                        key: key.into(),
                        line: *line,
                        reason: format!("expected 1 value, found {}", words.len()),
                    });
                }
                let v = words[0].parse::<f64>().map_err(|e| CameraError::Parse {
                    key: key.into(),
                    line: *line,
                    reason: e.to_string(),
                })?;
                Ok(Some((*line, v)))
            }
        }
    };
    let required = |key: &'static str| -> Result<f64, CameraError> {
        scalar(key)?
            .map(|(_, v)| v)
            .ok_or(CameraError::MissingField(key))
    };

    let width = required("width")? as i64;
    let height = required("height")? as i64;
    if width < 1 || height < 1 {
        return Err(CameraError::NonPositiveResolution {
            width: width.max(0) as u32,
            height: height.max(0) as u32,
        });
    }
    let (width, height) = (width as u32, height as u32);

    let (focal_x, focal_y) = match (scalar("fx")?, scalar("fy")?) {
        (Some((_, fx)), Some((_, fy))) => (fx, fy),
        (None, None) => {
            let fov_x = scalar("fov_x")?.ok_or(CameraError::MissingField("fx or fov_x"))?.1;
            let fov_y = scalar("fov_y")?.ok_or(CameraError::MissingField("fy or fov_y"))?.1;
            (
                width as f64 / (2.0 * (fov_x / 2.0).tan()),
                height as f64 / (2.0 * (fov_y / 2.0).tan()),
            )
        }
        (Some(_), None) => return Err(CameraError::MissingField("fy")),
        (None, Some(_)) => return Err(CameraError::MissingField("fx")),
    };

    let cx = scalar("cx")?
        .map(|(_, v)| v)
        .unwrap_or((width as f64 - 1.0) / 2.0);
    let cy = scalar("cy")?
        .map(|(_, v)| v)
        .unwrap_or((height as f64 - 1.0) / 2.0);
    let near = scalar("near")?
        .map(|(_, v)| v as f32)
        .unwrap_or(DEFAULT_NEAR_PLANE);

    let (line, words) = fields
        .get("world_to_camera")
        .ok_or(CameraError::MissingField("world_to_camera"))?;
    if words.len() != 16 {
        return Err(CameraError::Parse {
            key: "world_to_camera".into(),
            line: *line,
            reason: format!("expected 16 row-major values, found {}", words.len()),
        });
    }
    let mut m = [0.0f32; 16];
    for (slot, word) in m.iter_mut().zip(words) {
        *slot = word.parse::<f32>().map_err(|e| CameraError::Parse {
            key: "world_to_camera".into(),
            line: *line,
            reason: e.to_string(),
        })?;
    }
    let world_to_camera = Matrix4::from_row_slice(&m);

    let camera = Camera {
        world_to_camera,
        focal_x: focal_x as f32,
        focal_y: focal_y as f32,
        cx: cx as f32,
        cy: cy as f32,
        width,
        height,
        near_plane: near,
    };
    camera.validate()?;
    Ok(camera)
}

pub fn save_camera(path: impl AsRef<Path>, camera: &Camera) -> Result<(), CameraError> {
    fs::write(path.as_ref(), format_camera(camera))?;
    Ok(())
}

/// Canonical text form; floats use shortest-exact formatting so a
/// parse/format round trip is bit-exact.
pub fn format_camera(camera: &Camera) -> String {
    let mut out = String::new();
    out.push_str(&format!("width {}\n", camera.width));
    out.push_str(&format!("height {}\n", camera.height));
    out.push_str(&format!("fx {:?}\n", camera.focal_x));
    out.push_str(&format!("fy {:?}\n", camera.focal_y));
    out.push_str(&format!("cx {:?}\n", camera.cx));
    out.push_str(&format!("cy {:?}\n", camera.cy));
    out.push_str(&format!("near {:?}\n", camera.near_plane));
    out.push_str("world_to_camera");
    for r in 0..4 {
        for c in 0..4 {
            out.push_str(&format!(" {:?}", camera.world_to_camera[(r, c)]));
        }
    }
    out.push('\n');
    out
}
