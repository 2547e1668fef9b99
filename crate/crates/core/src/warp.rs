//! Perspective-to-fisheye warping of existing images.
//!
//! The warp is an inverse mapping with an equidistant target: an output
//! pixel at radial distance `r_d` from the center looks along polar
//! angle `θ = r_d / f_fisheye`, which a pinhole source imaged at radius
//! `r_u = f_source · tan(θ)`. Azimuth is preserved. Output pixels with
//! `θ ≥ π/2`, or whose source sample falls outside the input, are void.

use thiserror::Error;

use crate::compose::{sample_rgb_bilinear, sample_rgb_nearest};
use crate::image::{MaskImage, Rgb8Image};
use crate::projection::PixelCoord;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TransformError {
    #[error("focal length must be positive, got {0}")]
    NonPositiveFocal(f64),
    #[error("image pair dimensions differ: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch {
        a_w: u32,
        a_h: u32,
        b_w: u32,
        b_h: u32,
    },
    #[error("invalid augmentation config: {0}")]
    InvalidConfig(alloc::string::String),
}

/// Sampling mode for the warp: labels must never be interpolated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarpKind {
    Rgb,
    Label,
}

/// A pinhole source image with its principal point at the image center.
#[derive(Debug, Clone, PartialEq)]
pub struct PerspectiveImage {
    pub pixels: Rgb8Image,
    /// Pinhole focal length in pixels; `None` means "same as the target
    /// fisheye focal", which makes the whole warp a one-parameter
    /// transform.
    pub source_focal_px: Option<f64>,
}

impl PerspectiveImage {
    pub fn new(pixels: Rgb8Image) -> Self {
        PerspectiveImage {
            pixels,
            source_focal_px: None,
        }
    }

    pub fn with_source_focal(pixels: Rgb8Image, source_focal_px: f64) -> Self {
        PerspectiveImage {
            pixels,
            source_focal_px: Some(source_focal_px),
        }
    }
}

/// Source-image coordinates sampled by the output position `out`, for
/// an image centered at `center`. `None` when the output pixel looks
/// past the 90° cap a perspective source cannot supply.
pub fn warp_source_coord(
    out: PixelCoord,
    center: PixelCoord,
    fisheye_focal_px: f64,
    source_focal_px: f64,
) -> Option<PixelCoord> {
    let dx = out.u - center.u;
    let dy = out.v - center.v;
    let r_d = libm::hypot(dx, dy);
    if r_d == 0.0 {
        return Some(center);
    }
    let theta = r_d / fisheye_focal_px;
    if theta >= core::f64::consts::FRAC_PI_2 {
        return None;
    }
    let r_u = source_focal_px * libm::tan(theta);
    Some(PixelCoord::new(
        center.u + r_u * dx / r_d,
        center.v + r_u * dy / r_d,
    ))
}

/// Warps a perspective image into equidistant fisheye geometry. The
/// output keeps the source dimensions; the void mask marks pixels
/// outside the fisheye cap or sampling outside the input.
pub fn perspective_to_fisheye(
    img: &PerspectiveImage,
    fisheye_focal_px: f64,
    kind: WarpKind,
) -> Result<(Rgb8Image, MaskImage), TransformError> {
    if !(fisheye_focal_px.is_finite() && fisheye_focal_px > 0.0) {
        return Err(TransformError::NonPositiveFocal(fisheye_focal_px));
    }
    let source_focal = img.source_focal_px.unwrap_or(fisheye_focal_px);
    if !(source_focal.is_finite() && source_focal > 0.0) {
        return Err(TransformError::NonPositiveFocal(source_focal));
    }

    let src = &img.pixels;
    let (w, h) = (src.width(), src.height());
    let center = PixelCoord::new((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut out = Rgb8Image::filled(w, h, [0, 0, 0]);
    let mut void = MaskImage::filled(w, h, true);

    for y in 0..h {
        for x in 0..w {
            let target = PixelCoord::new(x as f64, y as f64);
            let Some(s) = warp_source_coord(target, center, fisheye_focal_px, source_focal)
            else {
                continue;
            };
            if s.u < 0.0 || s.u > (w - 1) as f64 || s.v < 0.0 || s.v > (h - 1) as f64 {
                continue;
            }
            let color = match kind {
                WarpKind::Rgb => sample_rgb_bilinear(src, s.u, s.v),
                WarpKind::Label => sample_rgb_nearest(src, s.u, s.v),
            };
            out.set(x, y, color);
            void.set(x, y, false);
        }
    }
    Ok((out, void))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn center_pixel_is_a_fixed_point() {
        for focal in [40.0, 159.0, 700.0] {
            let center = PixelCoord::new(99.5, 49.5);
            let s = warp_source_coord(center, center, focal, focal).unwrap();
            assert_eq!(s, center);
        }
    }

    #[test]
    fn tan_law_at_quarter_pi() {
        // Output radius 159·π/4 looks along θ = π/4 and samples source
        // radius 159·tan(π/4) = 159.
        let f = 159.0;
        let center = PixelCoord::new(0.0, 0.0);
        let out = PixelCoord::new(f * core::f64::consts::FRAC_PI_4, 0.0);
        let s = warp_source_coord(out, center, f, f).unwrap();
        assert_relative_eq!(s.u, 159.0, epsilon = 1e-9);
        assert_relative_eq!(s.v, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn cap_at_ninety_degrees_is_void() {
        let f = 159.0;
        let center = PixelCoord::new(0.0, 0.0);
        let rim = f * core::f64::consts::FRAC_PI_2;
        assert!(warp_source_coord(PixelCoord::new(rim, 0.0), center, f, f).is_none());
        assert!(warp_source_coord(PixelCoord::new(rim - 1e-6, 0.0), center, f, f).is_some());
    }

    #[test]
    fn uniform_input_becomes_uniform_disc_with_void_ring() {
        let img = PerspectiveImage::new(Rgb8Image::filled(200, 200, [7, 70, 170]));
        let (out, void) = perspective_to_fisheye(&img, 60.0, WarpKind::Rgb).unwrap();
        let mut seen_void = false;
        let mut seen_content = false;
        for y in 0..200 {
            for x in 0..200 {
                if void.get(x, y) {
                    seen_void = true;
                    assert_eq!(out.get(x, y), [0, 0, 0]);
                } else {
                    seen_content = true;
                    assert_eq!(out.get(x, y), [7, 70, 170]);
                }
            }
        }
        assert!(seen_void && seen_content);
    }

    #[test]
    fn void_mask_matches_the_analytic_cap_and_bounds() {
        let (w, h) = (120u32, 80u32);
        let f = 50.0;
        let img = PerspectiveImage::new(Rgb8Image::filled(w, h, [100, 100, 100]));
        let (_, void) = perspective_to_fisheye(&img, f, WarpKind::Rgb).unwrap();
        let center = PixelCoord::new((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
        for y in 0..h {
            for x in 0..w {
                let p = PixelCoord::new(x as f64, y as f64);
                let expect_void = match warp_source_coord(p, center, f, f) {
                    None => true,
                    Some(s) => {
                        s.u < 0.0 || s.u > (w - 1) as f64 || s.v < 0.0 || s.v > (h - 1) as f64
                    }
                };
                assert_eq!(void.get(x, y), expect_void, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn labels_survive_without_new_colors() {
        let mut pixels = Rgb8Image::filled(64, 64, [10, 20, 30]);
        for y in 0..64 {
            for x in 32..64 {
                pixels.set(x, y, [200, 100, 50]);
            }
        }
        let img = PerspectiveImage::new(pixels);
        let (out, void) = perspective_to_fisheye(&img, 25.0, WarpKind::Label).unwrap();
        for y in 0..64 {
            for x in 0..64 {
                if !void.get(x, y) {
                    let c = out.get(x, y);
                    assert!(c == [10, 20, 30] || c == [200, 100, 50], "blended {c:?}");
                }
            }
        }
    }

    #[test]
    fn nonpositive_focal_is_rejected() {
        let img = PerspectiveImage::new(Rgb8Image::filled(8, 8, [0, 0, 1]));
        assert!(matches!(
            perspective_to_fisheye(&img, 0.0, WarpKind::Rgb),
            Err(TransformError::NonPositiveFocal(_))
        ));
        let bad = PerspectiveImage::with_source_focal(Rgb8Image::filled(8, 8, [0, 0, 1]), -2.0);
        assert!(matches!(
            perspective_to_fisheye(&bad, 10.0, WarpKind::Rgb),
            Err(TransformError::NonPositiveFocal(_))
        ));
    }
}
