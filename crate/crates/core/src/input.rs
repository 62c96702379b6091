//! Input data: grayscale images on (2^L+1)² lattices, the analytic two-Gaussian
//! test field, and binary PGM reading and writing.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};

use crate::error::{Error, Result};
use crate::fdgrid::{bilinear, Lattice};

/// Grayscale image interpreted as nodal values on the lattice of level L0.
/// Values are stored bottom row first so that index `iy·side + ix` is the node at
/// `(ix·h, iy·h)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    lattice: Lattice,
    values: Vec<f64>,
}

impl Image {
    pub fn new(side: usize, values: Vec<f64>) -> Result<Self> {
        let cells = side.checked_sub(1).unwrap_or(0);
        if side < 2 || !cells.is_power_of_two() {
            return Err(Error::InvalidImage(format!(
                "side length must be 2^L + 1 (3, 5, 9, ..., 513, 1025, 2049), got {side}"
            )));
        }
        if values.len() != side * side {
            return Err(Error::SizeMismatch { expected: side * side, got: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite intensity {v}")));
        }
        Ok(Self { lattice: Lattice::with_side(side)?, values })
    }

    pub fn from_fn(level: u32, f: impl Fn(f64, f64) -> f64) -> Self {
        let lattice = Lattice::with_level(level);
        Self { values: lattice.sample(f), lattice }
    }

    pub fn lattice(&self) -> Lattice {
        self.lattice
    }

    pub fn side(&self) -> usize {
        self.lattice.side()
    }

    /// L0 = log₂(side − 1).
    pub fn level(&self) -> u32 {
        self.lattice.level().expect("validated side")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.lattice.index(ix, iy)]
    }

    /// Corner values (00, 10, 01, 11) of cell `(cx, cy)`.
    pub fn cell_corners(&self, cx: usize, cy: usize) -> [f64; 4] {
        [self.at(cx, cy), self.at(cx + 1, cy), self.at(cx, cy + 1), self.at(cx + 1, cy + 1)]
    }

    /// Piecewise bilinear extension.
    pub fn eval_bilinear(&self, x: f64, y: f64) -> Result<f64> {
        let (cx, cy, s, t) = self.locate(x, y)?;
        Ok(bilinear(self.cell_corners(cx, cy), s, t))
    }

    /// Piecewise affine extension on the cross-subdivided lattice, the centre of
    /// every cell carrying the mean of its corners.
    pub fn eval_cross(&self, x: f64, y: f64) -> Result<f64> {
        let (cx, cy, s, t) = self.locate(x, y)?;
        Ok(cross_value(self.cell_corners(cx, cy), s, t))
    }

    fn locate(&self, x: f64, y: f64) -> Result<(usize, usize, f64, f64)> {
        if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
            return Err(Error::OutOfDomain { x, y });
        }
        let cells = self.side() - 1;
        let (sx, sy) = (x * cells as f64, y * cells as f64);
        let cx = (sx.floor() as usize).min(cells - 1);
        let cy = (sy.floor() as usize).min(cells - 1);
        Ok((cx, cy, sx - cx as f64, sy - cy as f64))
    }

    /// Reads a binary or ASCII PGM (8 or 16 bit) and normalizes by the largest
    /// representable value.
    pub fn load_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::ImageReader::open(path)?
            .with_guessed_format()?
            .decode()
            .map_err(|e| Error::InvalidImage(format!("{}: {e}", path.display())))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        if w != h {
            return Err(Error::InvalidImage(format!(
                "{}: image is {w}x{h}, expected a square of side 2^L + 1",
                path.display()
            )));
        }
        let rows: Vec<f64> = match img {
            DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(|v| v as f64 / 255.0).collect(),
            DynamicImage::ImageLuma16(b) => b.into_raw().into_iter().map(|v| v as f64 / 65535.0).collect(),
            other => {
                return Err(Error::InvalidImage(format!(
                    "{}: expected an 8- or 16-bit grayscale image, got {:?}",
                    path.display(),
                    other.color()
                )))
            }
        };
        Self::new(w, flip_rows(&rows, w))
    }
}

fn flip_rows<T: Copy>(values: &[T], side: usize) -> Vec<T> {
    values.chunks(side).rev().flatten().copied().collect()
}

/// Affine interpolation on the four cross triangles of a unit cell.
pub fn cross_value(c: [f64; 4], s: f64, t: f64) -> f64 {
    let centre = 0.25 * (c[0] + c[1] + c[2] + c[3]);
    let (d1, d2) = (t - s, t + s - 1.0);
    // barycentric weights within the triangle (corner a, corner b, centre)
    match (d1 > 0.0, d2 > 0.0) {
        (false, false) => {
            let wc = 2.0 * t;
            c[0] * (1.0 - s - t) + c[1] * (s - t) + centre * wc
        }
        (false, true) => {
            let wc = 2.0 * (1.0 - s);
            c[1] * (s - t) + c[3] * (s + t - 1.0) + centre * wc
        }
        (true, true) => {
            let wc = 2.0 * (1.0 - t);
            c[3] * (s + t - 1.0) + c[2] * (t - s) + centre * wc
        }
        (true, false) => {
            let wc = 2.0 * s;
            c[2] * (t - s) + c[0] * (1.0 - s - t) + centre * wc
        }
    }
}

/// Maps a value in [0, 1] to a 16-bit sample.
pub fn to_u16(v: f64) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

/// Maps a value in [−1, 1] to a 16-bit sample via round((v+1)/2·65535).
pub fn signed_to_u16(v: f64) -> u16 {
    ((v.clamp(-1.0, 1.0) + 1.0) / 2.0 * 65535.0).round() as u16
}

/// Writes a binary 8-bit PGM. `values` are lattice-ordered (bottom row first).
pub fn write_pgm8(path: impl AsRef<Path>, side: usize, values: &[u8]) -> Result<()> {
    let rows = flip_rows(values, side);
    let mut out = BufWriter::new(File::create(path)?);
    PnmEncoder::new(&mut out)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(&rows, side as u32, side as u32, ExtendedColorType::L8)
        .map_err(|e| Error::InvalidImage(e.to_string()))?;
    out.flush()?;
    Ok(())
}

/// Writes a binary 16-bit PGM (big-endian samples, maxval 65535).
pub fn write_pgm16(path: impl AsRef<Path>, side: usize, values: &[u16]) -> Result<()> {
    // the pnm encoder only emits 8-bit graymaps
    let rows = flip_rows(values, side);
    let mut out = BufWriter::new(File::create(path)?);
    write!(out, "P5\n{side} {side}\n65535\n")?;
    for v in rows {
        out.write_all(&v.to_be_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Weighted sum of two isotropic Gaussian kernels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoGaussian {
    pub centers: [[f64; 2]; 2],
    pub weights: [f64; 2],
    pub widths: [f64; 2],
}

impl Default for TwoGaussian {
    /// Illustrative defaults: two overlapping bumps of different height.
    fn default() -> Self {
        Self { centers: [[0.35, 0.4], [0.68, 0.62]], weights: [0.6, 0.45], widths: [0.12, 0.09] }
    }
}

impl TwoGaussian {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (0..2)
            .map(|k| {
                let [cx, cy] = self.centers[k];
                let r2 = (x - cx).powi(2) + (y - cy).powi(2);
                self.weights[k] * (-r2 / (2.0 * self.widths[k].powi(2))).exp()
            })
            .sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidConfig(format!("gaussian widths must be positive: {:?}", self.widths)));
        }
        Ok(())
    }
}

/// The intensity function u₀ of a run.
#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Image(Image),
    Analytic(TwoGaussian),
}

impl Source {
    /// Finest level implied by the data (images only).
    pub fn level(&self) -> Option<u32> {
        match self {
            Source::Image(img) => Some(img.level()),
            Source::Analytic(_) => None,
        }
    }
}
