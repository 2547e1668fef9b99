//! Core geometry and imaging routines for synthesizing omnidirectional
//! (fisheye) training frames on the CPU.
//!
//! The crate covers the full in-memory pipeline:
//!
//! - [`projection`] — analytic fisheye and pinhole projection math
//!   (angle/radius laws, pixel/ray conversions, FOV masking)
//! - [`scene`] — a deterministic procedural urban scene and its layer table
//! - [`render`] — a CPU raycaster producing RGB, label and depth channels
//!   for each 90°-FOV camera of a rig
//! - [`compose`] — composition of rig face renders into a single fisheye
//!   image, via a precomputed warp mesh or a direct per-pixel resampler
//! - [`warp`] — perspective-to-fisheye warping of existing images
//! - [`augment`] — deterministic photometric/geometric augmentation
//! - [`eval`] — free-space class mapping and void-aware IoU
//!
//! # Coordinate conventions
//!
//! One right-handed frame convention is used everywhere, for both camera
//! and world space: **+x right, +y down, +z forward**. Image coordinates
//! `u` grow right and `v` grow down, and integer pixel indices address
//! pixel centers (the center of a `w`×`h` image is `((w-1)/2, (h-1)/2)`).
//! The ground plane of the procedural scene lies at `y = 0` with the
//! scene above it at negative `y`.
//!
//! All routines are pure functions of their inputs. There is no global
//! state and no hidden randomness: everything random is derived from
//! explicit 64-bit seeds through a fixed-algorithm generator, so results
//! are reproducible across runs, platforms and thread counts.
//!
//! The crate is `no_std`-compatible (`alloc` required); the `std` feature
//! (on by default) only forwards to dependencies.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod augment;
pub mod compose;
pub mod eval;
pub mod image;
pub mod projection;
pub mod render;
pub mod scene;
pub mod warp;

pub use compose::{ComposeMethod, FisheyeFrame, WarpMesh};
pub use image::{ChannelImage, ChannelKind, DepthImage, MaskImage, Rgb8Image};
pub use projection::{Direction3, FisheyeCameraSpec, PixelCoord, ProjectionModel};
pub use render::{CameraRig, RigCamera, RigPose};
pub use scene::{LayerMap, Scene};
