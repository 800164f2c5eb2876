//! Planar float images used by cropping, encoders and augmentation.

use std::path::Path;

use crate::error::{Error, Result};

/// Interleaved float image, `data[(y * width + x) * channels + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Image {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::Dimension {
                expected,
                actual: data.len(),
            });
        }
        Ok(Image {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn gray(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        Self::from_data(width, height, 1, data)
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[self.index(x, y, c)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        let i = self.index(x, y, c);
        self.data[i] = v;
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    /// Pixel is "on" when any channel is nonzero.
    pub fn nonzero_mask(&self) -> Vec<bool> {
        self.data
            .chunks_exact(self.channels)
            .map(|px| px.iter().any(|&v| v != 0.0))
            .collect()
    }

    /// 8-bit PNG (gray or RGB), values clamped to `[0, 1]`.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes: Vec<u8> = self
            .data
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect();
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            3 => image::ExtendedColorType::Rgb8,
            n => return Err(Error::Image(format!("cannot write {n}-channel PNG"))),
        };
        image::save_buffer(path, &bytes, self.width as u32, self.height as u32, color)
            .map_err(|e| Error::Image(e.to_string()))
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image(e.to_string()))?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        if img.color().has_color() {
            let rgb = img.to_rgb8();
            let data = rgb.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
            Image::from_data(w, h, 3, data)
        } else {
            let l = img.to_luma8();
            let data = l.as_raw().iter().map(|&b| b as f32 / 255.0).collect();
            Image::from_data(w, h, 1, data)
        }
    }
}
