//! In-memory float rasters with bilinear sampling.
//!
//! All geometry in the face pipeline (alignment, cropping, resizing) runs
//! on `Raster`, an interleaved row-major f32 image with values in [0, 1].
//! Sampling outside the frame clamps to the nearest edge pixel, which is
//! what gives crops their edge-replication padding.

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};

/// Grayscale conversion weights (ITU-R BT.601 luma).
const LUMA_R: f32 = 0.299;
const LUMA_G: f32 = 0.587;
const LUMA_B: f32 = 0.114;

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    /// Interleaved row-major samples, length = width * height * channels.
    pub data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Raster {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Raster {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    /// Decode an image file (PNG or JPEG) into a raster.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        Self::decode(&bytes)
            .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
    }

    /// Decode image bytes into a raster. Grayscale sources get one
    /// channel, everything else three.
    pub fn decode(bytes: &[u8]) -> std::result::Result<Self, String> {
        let img = image::load_from_memory(bytes).map_err(|e| format!("undecodable image: {e}"))?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        match img {
            DynamicImage::ImageLuma8(gray) => {
                let (w, h) = gray.dimensions();
                let mut out = Raster::new(w as usize, h as usize, 1);
                for (i, p) in gray.pixels().enumerate() {
                    out.data[i] = p.0[0] as f32 / 255.0;
                }
                out
            }
            _ => {
                let rgb = img.to_rgb8();
                let (w, h) = rgb.dimensions();
                let mut out = Raster::new(w as usize, h as usize, 3);
                for (i, p) in rgb.pixels().enumerate() {
                    out.data[i * 3] = p.0[0] as f32 / 255.0;
                    out.data[i * 3 + 1] = p.0[1] as f32 / 255.0;
                    out.data[i * 3 + 2] = p.0[2] as f32 / 255.0;
                }
                out
            }
        }
    }

    /// Write as lossless 8-bit PNG (grayscale or RGB depending on channels).
    pub fn save_png(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let to_u8 = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        match self.channels {
            1 => {
                let img: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_fn(
                    self.width as u32,
                    self.height as u32,
                    |x, y| Luma([to_u8(self.get(x as usize, y as usize, 0))]),
                );
                img.save(path).map_err(|e| Error::Image(e.to_string()))
            }
            3 => {
                let img: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_fn(
                    self.width as u32,
                    self.height as u32,
                    |x, y| {
                        Rgb([
                            to_u8(self.get(x as usize, y as usize, 0)),
                            to_u8(self.get(x as usize, y as usize, 1)),
                            to_u8(self.get(x as usize, y as usize, 2)),
                        ])
                    },
                );
                img.save(path).map_err(|e| Error::Image(e.to_string()))
            }
            c => Err(Error::Image(format!("cannot encode {c}-channel raster"))),
        }
    }

    /// Encode as PNG bytes without touching disk (fixture generation
    /// needs the bytes to compute content hashes up front).
    pub fn png_bytes(&self) -> Result<Vec<u8>> {
        let to_u8 = |v: f32| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let mut cursor = std::io::Cursor::new(Vec::new());
        match self.channels {
            1 => {
                let img: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::from_fn(
                    self.width as u32,
                    self.height as u32,
                    |x, y| Luma([to_u8(self.get(x as usize, y as usize, 0))]),
                );
                img.write_to(&mut cursor, image::ImageFormat::Png)
                    .map_err(|e| Error::Image(e.to_string()))?;
            }
            3 => {
                let img: ImageBuffer<Rgb<u8>, Vec<u8>> = ImageBuffer::from_fn(
                    self.width as u32,
                    self.height as u32,
                    |x, y| {
                        Rgb([
                            to_u8(self.get(x as usize, y as usize, 0)),
                            to_u8(self.get(x as usize, y as usize, 1)),
                            to_u8(self.get(x as usize, y as usize, 2)),
                        ])
                    },
                );
                img.write_to(&mut cursor, image::ImageFormat::Png)
                    .map_err(|e| Error::Image(e.to_string()))?;
            }
            c => return Err(Error::Image(format!("cannot encode {c}-channel raster"))),
        }
        Ok(cursor.into_inner())
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, ch: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, ch: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + ch] = v;
    }

    /// Bilinear sample with edge replication outside the frame.
    pub fn sample(&self, x: f32, y: f32, ch: usize) -> f32 {
        let max_x = (self.width - 1) as f32;
        let max_y = (self.height - 1) as f32;
        let xc = x.clamp(0.0, max_x);
        let yc = y.clamp(0.0, max_y);
        let x0 = xc.floor();
        let y0 = yc.floor();
        let fx = xc - x0;
        let fy = yc - y0;
        let x0 = x0 as usize;
        let y0 = y0 as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let v00 = self.get(x0, y0, ch);
        let v10 = self.get(x1, y0, ch);
        let v01 = self.get(x0, y1, ch);
        let v11 = self.get(x1, y1, ch);
        let top = v00 + (v10 - v00) * fx;
        let bot = v01 + (v11 - v01) * fx;
        top + (bot - top) * fy
    }

    /// Bilinear resize with pixel-center alignment.
    pub fn resize(&self, new_w: usize, new_h: usize) -> Raster {
        let mut out = Raster::new(new_w, new_h, self.channels);
        let sx = self.width as f32 / new_w as f32;
        let sy = self.height as f32 / new_h as f32;
        for y in 0..new_h {
            let src_y = (y as f32 + 0.5) * sy - 0.5;
            for x in 0..new_w {
                let src_x = (x as f32 + 0.5) * sx - 0.5;
                for ch in 0..self.channels {
                    out.set(x, y, ch, self.sample(src_x, src_y, ch));
                }
            }
        }
        out
    }

    /// Collapse to a single channel with BT.601 luma weights. A one-channel
    /// raster is returned unchanged.
    pub fn to_gray(&self) -> Raster {
        if self.channels == 1 {
            return self.clone();
        }
        let mut out = Raster::new(self.width, self.height, 1);
        for y in 0..self.height {
            for x in 0..self.width {
                let v = LUMA_R * self.get(x, y, 0)
                    + LUMA_G * self.get(x, y, 1)
                    + LUMA_B * self.get(x, y, 2);
                out.set(x, y, 0, v);
            }
        }
        out
    }

    /// Rotate by `theta` radians (counter-clockwise in image coordinates)
    /// about `(cx, cy)`, keeping the frame size. Used by tests to check
    /// alignment equivariance.
    pub fn rotate_about(&self, cx: f32, cy: f32, theta: f32) -> Raster {
        let mut out = Raster::new(self.width, self.height, self.channels);
        let (sin, cos) = theta.sin_cos();
        for y in 0..self.height {
            for x in 0..self.width {
                // Inverse map: rotate the output point by -theta.
                let dx = x as f32 - cx;
                let dy = y as f32 - cy;
                let sx = cx + cos * dx + sin * dy;
                let sy = cy - sin * dx + cos * dy;
                for ch in 0..self.channels {
                    out.set(x, y, ch, self.sample(sx, sy, ch));
                }
            }
        }
        out
    }

    /// Mean absolute per-sample difference between two same-shape rasters.
    pub fn mean_abs_diff(&self, other: &Raster) -> f32 {
        assert_eq!(self.data.len(), other.data.len(), "shape mismatch");
        let sum: f64 = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs() as f64)
            .sum();
        (sum / self.data.len() as f64) as f32
    }
}
