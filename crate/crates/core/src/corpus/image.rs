//! Single-channel image tensors and their on-disk encodings (8-bit PNG or the
//! raw float sidecar).

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const SIDECAR_MAGIC: &[u8; 4] = b"FGVL";
pub const SIDECAR_VERSION: u16 = 1;
pub const SIDECAR_HEADER_LEN: usize = 16;

/// Row-major grayscale image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor {
    height: usize,
    width: usize,
    values: Vec<f32>,
}

impl ImageTensor {
    pub fn new(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || values.len() != height * width {
            return Err(Error::Shape(format!(
                "image {height}x{width} with {} values",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Shape(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self {
            height,
            width,
            values: vec![value.clamp(0.0, 1.0); height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        1
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.values[y * self.width + x]
    }

    /// Sidecar bytes: 16-byte header then little-endian `f32` payload.
    pub fn to_sidecar_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SIDECAR_HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(SIDECAR_MAGIC);
        out.extend_from_slice(&SIDECAR_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&[0u8; 2]);
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_sidecar_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |m: String| Error::Shape(format!("sidecar: {m}"));
        if bytes.len() < SIDECAR_HEADER_LEN || &bytes[..4] != SIDECAR_MAGIC {
            return Err(bad("missing FGVL header".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != SIDECAR_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let height = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
        let width = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
        let payload = &bytes[SIDECAR_HEADER_LEN..];
        if payload.len() != 4 * height * width {
            return Err(bad(format!(
                "payload of {} bytes for {height}x{width}",
                payload.len()
            )));
        }
        let values = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(height, width, values)
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&self.to_sidecar_bytes())
            .map_err(|e| Error::io(path, e))
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        let pixels: Vec<u8> = self
            .values
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, pixels)
            .expect("buffer length matches dimensions")
            .save(path)
            .map_err(|e| Error::Shape(format!("png {}: {e}", path.display())))
    }

    /// Decode by extension: `.png` as 8-bit grayscale, anything else as a sidecar.
    pub fn read(path: &Path) -> Result<Self> {
        let is_png = path
            .extension()
            .is_some_and(|e| e.eq_ignore_ascii_case("png"));
        if is_png {
            let img = image::open(path)
                .map_err(|e| Error::Shape(format!("png {}: {e}", path.display())))?
                .into_luma8();
            let (w, h) = img.dimensions();
            let values = img.into_raw().into_iter().map(|p| p as f32 / 255.0).collect();
            Self::new(h as usize, w as usize, values)
        } else {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            Self::from_sidecar_bytes(&bytes)
        }
    }
}
