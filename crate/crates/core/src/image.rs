//! Grayscale rasters and the pixel mask that makes the flow anisotropic.

use crate::error::{Error, Result};
use crate::geometry::{DiscreteCurve, Vec2};

/// World units per pixel unless the caller says otherwise.
pub const DEFAULT_SCALE: f64 = 0.001;

/// Intensity assumed outside the raster.
pub const BACKGROUND: u8 = 255;

/// Intensity used when burning curve points into an overlay.
pub const OVERLAY_GRAY: u8 = 128;

/// Grayscale raster placed in the world plane.
///
/// Row 0 is the top of the image; world `y` grows upwards. The image centre
/// sits at `origin`.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelField {
    width: usize,
    height: usize,
    values: Vec<u8>,
    scale: f64,
    origin: Vec2,
}

impl PixelField {
    pub fn new(width: usize, height: usize, values: Vec<u8>, scale: f64) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidConfig("image must be non-empty".into()));
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: values.len(),
            });
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("scale {scale} must be positive")));
        }
        Ok(Self {
            width,
            height,
            values,
            scale,
            origin: Vec2::zeros(),
        })
    }

    pub fn from_fn(width: usize, height: usize, scale: f64, f: impl Fn(usize, usize) -> u8) -> Result<Self> {
        let values = (0..height)
            .flat_map(|row| (0..width).map(move |col| (col, row)))
            .map(|(col, row)| f(col, row))
            .collect();
        Self::new(width, height, values, scale)
    }

    pub fn uniform(width: usize, height: usize, scale: f64, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height], scale)
    }

    /// Black disk of `radius_px` pixels on white, centred in the raster.
    /// A pixel is black when its centre lies within the radius.
    pub fn disk(width: usize, height: usize, radius_px: f64, scale: f64) -> Result<Self> {
        let cx = width as f64 / 2.0;
        let cy = height as f64 / 2.0;
        Self::from_fn(width, height, scale, |col, row| {
            let dx = col as f64 + 0.5 - cx;
            let dy = row as f64 + 0.5 - cy;
            if dx * dx + dy * dy <= radius_px * radius_px {
                0
            } else {
                255
            }
        })
    }

    pub fn with_origin(mut self, origin: Vec2) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidConfig(format!("scale {scale} must be positive")));
        }
        self.scale = scale;
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn origin(&self) -> Vec2 {
        self.origin
    }

    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn get(&self, col: usize, row: usize) -> u8 {
        self.values[row * self.width + col]
    }

    /// World coordinates of a pixel centre.
    pub fn pixel_center(&self, col: usize, row: usize) -> Vec2 {
        let x = (col as f64 + 0.5 - self.width as f64 / 2.0) * self.scale;
        let y = (self.height as f64 / 2.0 - row as f64 - 0.5) * self.scale;
        self.origin + Vec2::new(x, y)
    }

    /// `(col, row)` of the pixel containing `y`, if inside the raster.
    pub fn pixel_of(&self, y: Vec2) -> Option<(usize, usize)> {
        let rel = (y - self.origin) / self.scale;
        let col = (rel.x + self.width as f64 / 2.0).floor();
        let row = (self.height as f64 / 2.0 - rel.y).floor();
        if col >= 0.0 && row >= 0.0 && col < self.width as f64 && row < self.height as f64 {
            Some((col as usize, row as usize))
        } else {
            None
        }
    }

    /// Nearest-neighbour intensity; white outside the raster.
    pub fn pix(&self, y: Vec2) -> u8 {
        match self.pixel_of(y) {
            Some((col, row)) => self.get(col, row),
            None => BACKGROUND,
        }
    }

    /// `Pix(y) / 255`: 0 on black, 1 on white.
    pub fn mask_factor(&self, y: Vec2) -> f64 {
        mask_from_intensity(self.pix(y))
    }

    /// Number of pixels with intensity at most `cutoff`.
    pub fn count_at_most(&self, cutoff: u8) -> usize {
        self.values.iter().filter(|&&v| v <= cutoff).count()
    }

    /// Copy with every curve node's pixel set to [`OVERLAY_GRAY`].
    pub fn with_curve_burned(&self, curve: &DiscreteCurve) -> Self {
        let mut out = self.clone();
        for p in curve.points() {
            if let Some((col, row)) = self.pixel_of(*p) {
                out.values[row * self.width + col] = OVERLAY_GRAY;
            }
        }
        out
    }

    /// Binary (P5) PGM encoding with maxval 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.values);
        out
    }
}

pub fn mask_from_intensity(value: u8) -> f64 {
    f64::from(value) / 255.0
}

pub fn pix(field: &PixelField, y: Vec2) -> u8 {
    field.pix(y)
}

pub fn mask_factor(field: &PixelField, y: Vec2) -> f64 {
    field.mask_factor(y)
}

struct Tokenizer<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Tokenizer<'a> {
    fn malformed(&self, reason: impl Into<String>) -> Error {
        Error::MalformedImage {
            offset: self.pos,
            reason: reason.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn token(&mut self) -> Result<&'a [u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.malformed("unexpected end of data"));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or(Error::MalformedImage {
                offset: start,
                reason: format!("expected {what}"),
            })
    }
}

/// Parses an ASCII (P2) or binary (P5) PGM with maxval at most 255.
/// Intensities are rescaled to `[0, 255]` when maxval is below 255. The
/// field uses [`DEFAULT_SCALE`] and is centred on the world origin.
pub fn load_pgm(bytes: &[u8]) -> Result<PixelField> {
    let mut tok = Tokenizer { bytes, pos: 0 };
    let magic = tok.token()?;
    let binary = match magic {
        b"P2" => false,
        b"P5" => true,
        _ => {
            return Err(Error::MalformedImage {
                offset: 0,
                reason: "magic number must be P2 or P5".into(),
            })
        }
    };
    let width = tok.number("width")?;
    let height = tok.number("height")?;
    let maxval_at = tok.pos;
    let maxval = tok.number("maxval")?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::MalformedImage {
            offset: maxval_at,
            reason: format!("maxval {maxval} outside 1..=255"),
        });
    }
    if width == 0 || height == 0 {
        return Err(tok.malformed("zero image dimension"));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| tok.malformed("image dimensions overflow"))?;

    let mut raw = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the payload
        if tok.pos >= bytes.len() || !bytes[tok.pos].is_ascii_whitespace() {
            return Err(tok.malformed("missing separator before binary payload"));
        }
        let start = tok.pos + 1;
        let end = start + count;
        if end > bytes.len() {
            return Err(Error::MalformedImage {
                offset: bytes.len(),
                reason: format!("payload truncated: need {count} bytes, have {}", bytes.len() - start),
            });
        }
        raw.extend_from_slice(&bytes[start..end]);
    } else {
        for _ in 0..count {
            let at = tok.pos;
            let v = tok.number("pixel value")?;
            if v > maxval {
                return Err(Error::MalformedImage {
                    offset: at,
                    reason: format!("pixel value {v} exceeds maxval {maxval}"),
                });
            }
            raw.push(v as u8);
        }
    }
    for (i, &v) in raw.iter().enumerate() {
        if usize::from(v) > maxval {
            return Err(Error::MalformedImage {
                offset: tok.pos + 1 + i,
                reason: format!("pixel value {v} exceeds maxval {maxval}"),
            });
        }
    }
    let values = if maxval == 255 {
        raw
    } else {
        raw.iter()
            .map(|&v| ((usize::from(v) * 255 + maxval / 2) / maxval) as u8)
            .collect()
    };
    PixelField::new(width, height, values, DEFAULT_SCALE)
}
