//! In-memory raster buffers for the three render channels plus boolean
//! masks. Pixels are stored row-major; `(x, y)` indexes column `x` of
//! row `y`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImageError {
    #[error("pixel buffer length {len} does not match {width}x{height}")]
    BufferSizeMismatch { len: usize, width: u32, height: u32 },
    #[error("image dimensions must be positive")]
    EmptyDimensions,
}

/// The three synchronized output channels of a render.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelKind {
    /// Shaded scene colors, 8-bit RGB.
    Rgb,
    /// Per-pixel layer colors, 8-bit RGB; never interpolated.
    Label,
    /// Normalized hit distance in `[0, 1]`, 32-bit float.
    Depth,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 3] = [ChannelKind::Rgb, ChannelKind::Label, ChannelKind::Depth];

    pub fn name(&self) -> &'static str {
        match self {
            ChannelKind::Rgb => "rgb",
            ChannelKind::Label => "label",
            ChannelKind::Depth => "depth",
        }
    }
}

/// 8-bit RGB image (used for both the source and the label channel).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rgb8Image {
    width: u32,
    height: u32,
    pixels: Vec<[u8; 3]>,
}

impl Rgb8Image {
    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Self {
        Rgb8Image {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<[u8; 3]>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions);
        }
        if pixels.len() != width as usize * height as usize {
            return Err(ImageError::BufferSizeMismatch {
                len: pixels.len(),
                width,
                height,
            });
        }
        Ok(Rgb8Image {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, color: [u8; 3]) {
        self.pixels[y as usize * self.width as usize + x as usize] = color;
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [[u8; 3]] {
        &mut self.pixels
    }

    /// Mirrors the image about its vertical center line.
    pub fn flip_horizontal(&self) -> Rgb8Image {
        let mut out = self.clone();
        out.flip_horizontal_in_place();
        out
    }

    pub fn flip_horizontal_in_place(&mut self) {
        let w = self.width as usize;
        for row in self.pixels.chunks_exact_mut(w) {
            row.reverse();
        }
    }
}

/// Single-channel 32-bit float image holding normalized depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: u32,
    height: u32,
    pixels: Vec<f32>,
}

impl DepthImage {
    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        DepthImage {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<f32>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions);
        }
        if pixels.len() != width as usize * height as usize {
            return Err(ImageError::BufferSizeMismatch {
                len: pixels.len(),
                width,
                height,
            });
        }
        Ok(DepthImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: f32) {
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f32] {
        &mut self.pixels
    }
}

/// Boolean per-pixel mask. The meaning of `true` is contextual: void
/// masks mark pixels outside the fisheye FOV, binary class masks mark
/// free-space pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskImage {
    width: u32,
    height: u32,
    pixels: Vec<bool>,
}

impl MaskImage {
    pub fn filled(width: u32, height: u32, value: bool) -> Self {
        MaskImage {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<bool>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::EmptyDimensions);
        }
        if pixels.len() != width as usize * height as usize {
            return Err(ImageError::BufferSizeMismatch {
                len: pixels.len(),
                width,
                height,
            });
        }
        Ok(MaskImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn pixels(&self) -> &[bool] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [bool] {
        &mut self.pixels
    }

    pub fn count_true(&self) -> usize {
        self.pixels.iter().filter(|&&v| v).count()
    }

    pub fn flip_horizontal_in_place(&mut self) {
        let w = self.width as usize;
        for row in self.pixels.chunks_exact_mut(w) {
            row.reverse();
        }
    }
}

/// A rendered channel of a single camera view.
#[derive(Debug, Clone, PartialEq)]
pub enum ChannelImage {
    Rgb(Rgb8Image),
    Label(Rgb8Image),
    Depth(DepthImage),
}

impl ChannelImage {
    pub fn kind(&self) -> ChannelKind {
        match self {
            ChannelImage::Rgb(_) => ChannelKind::Rgb,
            ChannelImage::Label(_) => ChannelKind::Label,
            ChannelImage::Depth(_) => ChannelKind::Depth,
        }
    }

    pub fn width(&self) -> u32 {
        match self {
            ChannelImage::Rgb(img) | ChannelImage::Label(img) => img.width(),
            ChannelImage::Depth(img) => img.width(),
        }
    }

    pub fn height(&self) -> u32 {
        match self {
            ChannelImage::Rgb(img) | ChannelImage::Label(img) => img.height(),
            ChannelImage::Depth(img) => img.height(),
        }
    }

    pub fn as_rgb8(&self) -> Option<&Rgb8Image> {
        match self {
            ChannelImage::Rgb(img) | ChannelImage::Label(img) => Some(img),
            ChannelImage::Depth(_) => None,
        }
    }

    pub fn as_depth(&self) -> Option<&DepthImage> {
        match self {
            ChannelImage::Depth(img) => Some(img),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buffer_size_is_validated() {
        assert!(Rgb8Image::from_pixels(2, 2, vec![[0; 3]; 3]).is_err());
        assert!(Rgb8Image::from_pixels(0, 2, vec![]).is_err());
        assert!(Rgb8Image::from_pixels(2, 2, vec![[0; 3]; 4]).is_ok());
    }

    #[test]
    fn horizontal_flip_is_an_involution() {
        let mut img = Rgb8Image::filled(3, 2, [0, 0, 0]);
        img.set(0, 0, [1, 2, 3]);
        img.set(2, 1, [4, 5, 6]);
        let flipped = img.flip_horizontal();
        assert_eq!(flipped.get(2, 0), [1, 2, 3]);
        assert_eq!(flipped.get(0, 1), [4, 5, 6]);
        assert_eq!(flipped.flip_horizontal(), img);
    }
}
