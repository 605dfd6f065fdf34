//! 8-bit grayscale raster used by the vision pipeline and the frame audits.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32, fill: u8) -> Result<Self> {
        Self::check_dims(width, height)?;
        Ok(GrayImage { width, height, data: vec![fill; width as usize * height as usize] })
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        Self::check_dims(width, height)?;
        let expect = width as usize * height as usize;
        if data.len() != expect {
            return Err(Error::InvalidInput(format!(
                "pixel buffer holds {} bytes, {}x{} needs {}",
                data.len(),
                width,
                height,
                expect
            )));
        }
        Ok(GrayImage { width, height, data })
    }

    fn check_dims(width: u32, height: u32) -> Result<()> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("image dimensions must be positive".into()));
        }
        // 1 << 26 pixels is 64 MiB, far beyond any frame this crate handles.
        if (width as u64) * (height as u64) > (1 << 26) {
            return Err(Error::InvalidInput(format!(
                "image {width}x{height} exceeds the supported pixel budget"
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: u8) {
        debug_assert!(x < self.width && y < self.height);
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    /// Mean pixel intensity over the whole frame.
    pub fn mean_intensity(&self) -> f64 {
        let sum: u64 = self.data.iter().map(|&p| p as u64).sum();
        sum as f64 / self.data.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkerboard_means_halfway() {
        let mut img = GrayImage::new(4, 4, 0).unwrap();
        for y in 0..4 {
            for x in 0..4 {
                if (x + y) % 2 == 0 {
                    img.set(x, y, 255);
                }
            }
        }
        assert_eq!(img.mean_intensity(), 127.5);
    }

    #[test]
    fn uniform_image_means_its_value() {
        let img = GrayImage::new(3, 5, 77).unwrap();
        assert_eq!(img.mean_intensity(), 77.0);
    }

    #[test]
    fn bad_dimensions_are_rejected() {
        assert!(GrayImage::new(0, 5, 0).is_err());
        assert!(GrayImage::from_raw(2, 2, vec![0; 3]).is_err());
        assert!(GrayImage::new(1 << 16, 1 << 16, 0).is_err());
    }
}
