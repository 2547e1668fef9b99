//! Deterministic training-time augmentation of (RGB, label) pairs:
//! horizontal flipping applies to both images, photometric ops
//! (brightness, Gaussian noise, hue rotation, saturation scaling) to the
//! RGB image only. Label pixel values are never altered.
//!
//! Every random decision for sample `k` is drawn from a ChaCha stream
//! keyed by `(seed, k, op)`, so augmentation is independent of batch
//! order and reproducible across runs and thread counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::image::Rgb8Image;
use crate::warp::TransformError;

/// Stream ids, one per augmentation op.
const OP_FLIP: u64 = 0;
const OP_BRIGHTNESS: u64 = 1;
const OP_NOISE: u64 = 2;
const OP_HUE: u64 = 3;
const OP_SATURATION: u64 = 4;
const OP_COUNT: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub flip_probability: f64,
    /// Maximum additive brightness shift as a fraction of full scale.
    pub brightness_max_delta: f64,
    /// Gaussian noise mean in intensity levels; only applied when
    /// `noise_std > 0`.
    pub noise_mean: f64,
    /// Gaussian noise standard deviation in intensity levels.
    pub noise_std: f64,
    /// Maximum hue rotation in turns (1.0 = full color wheel).
    pub hue_max_delta: f64,
    /// Saturation is scaled by a factor drawn uniformly from this range.
    pub saturation_range: (f64, f64),
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            flip_probability: 0.5,
            brightness_max_delta: 0.5,
            noise_mean: 0.0,
            noise_std: 8.0,
            hue_max_delta: 0.05,
            saturation_range: (0.8, 1.2),
            seed: 0,
        }
    }
}

impl AugmentConfig {
    /// A config under which [`augment_pair`] is the exact identity.
    pub fn identity(seed: u64) -> Self {
        AugmentConfig {
            flip_probability: 0.0,
            brightness_max_delta: 0.0,
            noise_mean: 0.0,
            noise_std: 0.0,
            hue_max_delta: 0.0,
            saturation_range: (1.0, 1.0),
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), TransformError> {
        if !(0.0..=1.0).contains(&self.flip_probability) {
            return Err(TransformError::InvalidConfig(alloc::format!(
                "flip_probability must lie in [0,1], got {}",
                self.flip_probability
            )));
        }
        for (name, v) in [
            ("brightness_max_delta", self.brightness_max_delta),
            ("noise_std", self.noise_std),
            ("hue_max_delta", self.hue_max_delta),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(TransformError::InvalidConfig(alloc::format!(
                    "{name} must be >= 0, got {v}"
                )));
            }
        }
        if !self.noise_mean.is_finite() {
            return Err(TransformError::InvalidConfig(alloc::string::String::from(
                "noise_mean must be finite",
            )));
        }
        let (lo, hi) = self.saturation_range;
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(TransformError::InvalidConfig(alloc::format!(
                "saturation_range must satisfy 0 <= lo <= hi, got ({lo}, {hi})"
            )));
        }
        Ok(())
    }
}

fn op_rng(seed: u64, sample_index: u64, op: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index.wrapping_mul(OP_COUNT).wrapping_add(op));
    rng
}

/// Adds a constant to every channel, clamped to the byte range. `delta`
/// is in intensity levels (-255..255).
pub fn adjust_brightness(img: &mut Rgb8Image, delta: f64) {
    if delta == 0.0 {
        return;
    }
    for px in img.pixels_mut() {
        for c in px.iter_mut() {
            *c = (libm::round(*c as f64 + delta)).clamp(0.0, 255.0) as u8;
        }
    }
}

/// Adds per-pixel, per-channel Gaussian noise, clamped to the byte
/// range.
pub fn add_gaussian_noise(img: &mut Rgb8Image, mean: f64, std: f64, rng: &mut impl Rng) {
    let normal = match Normal::new(mean, std) {
        Ok(n) => n,
        Err(_) => return,
    };
    for px in img.pixels_mut() {
        for c in px.iter_mut() {
            let noisy = *c as f64 + normal.sample(rng);
            *c = libm::round(noisy).clamp(0.0, 255.0) as u8;
        }
    }
}

fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max == 0.0 { 0.0 } else { delta / max };
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        (((g - b) / delta) % 6.0 + 6.0) % 6.0
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    (h / 6.0, s, v)
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = (h - libm::floor(h)) * 6.0;
    let c = v * s;
    let x = c * (1.0 - libm::fabs(h6 % 2.0 - 1.0));
    let m = v - c;
    let (r, g, b) = match h6 as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    (r + m, g + m, b + m)
}

/// Rotates hue by `hue_delta` turns and scales saturation by
/// `sat_scale` via an HSV round trip.
pub fn adjust_hue_saturation(img: &mut Rgb8Image, hue_delta: f64, sat_scale: f64) {
    if hue_delta == 0.0 && sat_scale == 1.0 {
        return;
    }
    for px in img.pixels_mut() {
        let (h, s, v) = rgb_to_hsv(
            px[0] as f64 / 255.0,
            px[1] as f64 / 255.0,
            px[2] as f64 / 255.0,
        );
        let (r, g, b) = hsv_to_rgb(h + hue_delta, (s * sat_scale).clamp(0.0, 1.0), v);
        px[0] = libm::round(r * 255.0).clamp(0.0, 255.0) as u8;
        px[1] = libm::round(g * 255.0).clamp(0.0, 255.0) as u8;
        px[2] = libm::round(b * 255.0).clamp(0.0, 255.0) as u8;
    }
}

/// Augments one (RGB, label) pair. The flip decision applies to both
/// images; everything photometric touches the RGB image only.
pub fn augment_pair(
    rgb: &Rgb8Image,
    label: &Rgb8Image,
    cfg: &AugmentConfig,
    sample_index: u64,
) -> Result<(Rgb8Image, Rgb8Image), TransformError> {
    cfg.validate()?;
    if rgb.width() != label.width() || rgb.height() != label.height() {
        return Err(TransformError::DimensionMismatch {
            a_w: rgb.width(),
            a_h: rgb.height(),
            b_w: label.width(),
            b_h: label.height(),
        });
    }

    let mut rgb = rgb.clone();
    let mut label = label.clone();

    let flip = op_rng(cfg.seed, sample_index, OP_FLIP).random::<f64>() < cfg.flip_probability;
    if flip {
        rgb.flip_horizontal_in_place();
        label.flip_horizontal_in_place();
    }

    if cfg.brightness_max_delta > 0.0 {
        let mut rng = op_rng(cfg.seed, sample_index, OP_BRIGHTNESS);
        let delta =
            rng.random_range(-cfg.brightness_max_delta..=cfg.brightness_max_delta) * 255.0;
        adjust_brightness(&mut rgb, delta);
    }

    if cfg.noise_std > 0.0 {
        let mut rng = op_rng(cfg.seed, sample_index, OP_NOISE);
        add_gaussian_noise(&mut rgb, cfg.noise_mean, cfg.noise_std, &mut rng);
    }

    let hue_delta = if cfg.hue_max_delta > 0.0 {
        op_rng(cfg.seed, sample_index, OP_HUE)
            .random_range(-cfg.hue_max_delta..=cfg.hue_max_delta)
    } else {
        0.0
    };
    let (lo, hi) = cfg.saturation_range;
    let sat_scale = if lo == hi {
        lo
    } else {
        op_rng(cfg.seed, sample_index, OP_SATURATION).random_range(lo..=hi)
    };
    adjust_hue_saturation(&mut rgb, hue_delta, sat_scale);

    Ok((rgb, label))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use rand::SeedableRng;

    fn checkered(w: u32, h: u32) -> Rgb8Image {
        let mut img = Rgb8Image::filled(w, h, [40, 90, 160]);
        for y in 0..h {
            for x in 0..w {
                if (x + y) % 2 == 0 {
                    img.set(x, y, [200, 60, 20]);
                }
            }
        }
        img
    }

    #[test]
    fn zero_config_is_the_exact_identity() {
        let rgb = checkered(17, 9);
        let label = checkered(17, 9);
        let cfg = AugmentConfig::identity(42);
        for sample in [0u64, 1, 99] {
            let (r, l) = augment_pair(&rgb, &label, &cfg, sample).unwrap();
            assert_eq!(r, rgb);
            assert_eq!(l, label);
        }
    }

    #[test]
    fn forced_flip_twice_restores_the_original() {
        let rgb = checkered(16, 8);
        let label = checkered(16, 8);
        let cfg = AugmentConfig {
            flip_probability: 1.0,
            ..AugmentConfig::identity(7)
        };
        let (r1, l1) = augment_pair(&rgb, &label, &cfg, 3).unwrap();
        assert_ne!(r1, rgb);
        let (r2, l2) = augment_pair(&r1, &l1, &cfg, 3).unwrap();
        assert_eq!(r2, rgb);
        assert_eq!(l2, label);
    }

    #[test]
    fn flip_applies_to_both_images_identically() {
        let mut rgb = Rgb8Image::filled(8, 4, [0, 0, 10]);
        rgb.set(0, 0, [255, 0, 0]);
        let mut label = Rgb8Image::filled(8, 4, [1, 1, 1]);
        label.set(0, 0, [2, 2, 2]);
        let cfg = AugmentConfig {
            flip_probability: 1.0,
            ..AugmentConfig::identity(0)
        };
        let (r, l) = augment_pair(&rgb, &label, &cfg, 0).unwrap();
        assert_eq!(r.get(7, 0), [255, 0, 0]);
        assert_eq!(l.get(7, 0), [2, 2, 2]);
    }

    #[test]
    fn same_seed_and_index_reproduce_exactly() {
        let rgb = checkered(32, 32);
        let label = checkered(32, 32);
        let cfg = AugmentConfig {
            seed: 1234,
            ..AugmentConfig::default()
        };
        let a = augment_pair(&rgb, &label, &cfg, 5).unwrap();
        let b = augment_pair(&rgb, &label, &cfg, 5).unwrap();
        assert_eq!(a, b);
        let c = augment_pair(&rgb, &label, &cfg, 6).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn labels_keep_their_value_set() {
        let rgb = checkered(32, 32);
        let label = checkered(32, 32);
        let cfg = AugmentConfig {
            seed: 9,
            flip_probability: 1.0,
            ..AugmentConfig::default()
        };
        let before: BTreeSet<[u8; 3]> = label.pixels().iter().copied().collect();
        let (_, l) = augment_pair(&rgb, &label, &cfg, 0).unwrap();
        let after: BTreeSet<[u8; 3]> = l.pixels().iter().copied().collect();
        assert_eq!(before, after);
    }

    #[test]
    fn noise_statistics_on_mid_gray() {
        let side = 256u32;
        let gray = Rgb8Image::filled(side, side, [128, 128, 128]);
        let mut noisy = gray.clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
        add_gaussian_noise(&mut noisy, 0.0, 8.0, &mut rng);
        let n = (side * side * 3) as f64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for (a, b) in noisy.pixels().iter().zip(gray.pixels()) {
            for c in 0..3 {
                let d = a[c] as f64 - b[c] as f64;
                sum += d;
                sum_sq += d * d;
            }
        }
        let mean = sum / n;
        let std = libm::sqrt(sum_sq / n - mean * mean);
        assert!((7.5..=8.5).contains(&std), "std {std}");
        assert!(libm::fabs(mean) < 0.5, "mean {mean}");
    }

    #[test]
    fn dimension_mismatch_is_a_pairing_error() {
        let rgb = Rgb8Image::filled(8, 8, [0, 0, 0]);
        let label = Rgb8Image::filled(8, 9, [0, 0, 0]);
        assert!(matches!(
            augment_pair(&rgb, &label, &AugmentConfig::default(), 0),
            Err(TransformError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn hsv_round_trip_is_stable() {
        for px in [[0u8, 0, 0], [255, 255, 255], [128, 64, 32], [1, 200, 99]] {
            let (h, s, v) = rgb_to_hsv(
                px[0] as f64 / 255.0,
                px[1] as f64 / 255.0,
                px[2] as f64 / 255.0,
            );
            let (r, g, b) = hsv_to_rgb(h, s, v);
            assert_eq!(libm::round(r * 255.0) as u8, px[0]);
            assert_eq!(libm::round(g * 255.0) as u8, px[1]);
            assert_eq!(libm::round(b * 255.0) as u8, px[2]);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = AugmentConfig::default();
        cfg.flip_probability = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = AugmentConfig::default();
        cfg.saturation_range = (1.2, 0.8);
        assert!(cfg.validate().is_err());
        let mut cfg = AugmentConfig::default();
        cfg.noise_std = -1.0;
        assert!(cfg.validate().is_err());
    }
}
