use crate::error::{Error, Result};

pub type Rgb = [f64; 3];

/// Interleaved (HWC) raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::shape(
                "Image::new",
                format!("{height}x{width}x{channels} = {} values", height * width * channels),
                data.len(),
            ));
        }
        Ok(Image { height, width, channels, data })
    }

    pub fn filled(height: usize, width: usize, color: Rgb) -> Self {
        let mut data = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            data.extend_from_slice(&color);
        }
        Image { height, width, channels: 3, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn pixel(&self, y: usize, x: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, y: usize, x: usize) -> &mut [f64] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Per-channel mean over all pixels.
    pub fn channel_means(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (a, v) in m.iter_mut().zip(px) {
                *a += v;
            }
        }
        let n = self.pixels() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }

    /// Replace every pixel with its channel mean, replicated over channels.
    pub fn to_grayscale(&self) -> Image {
        let mut out = self.clone();
        for px in out.data.chunks_exact_mut(self.channels) {
            let g = px.iter().sum::<f64>() / px.len() as f64;
            px.iter_mut().for_each(|v| *v = g);
        }
        out
    }

    pub fn clamp_unit(&mut self) {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
    }
}
