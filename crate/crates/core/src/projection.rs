//! Analytic fisheye projection math: radial angle/radius laws, pixel/ray
//! conversions and FOV masking.
//!
//! Four classical radially symmetric fisheye laws are supported, each
//! relating the polar angle `θ` of an incoming ray (measured from the
//! optical axis) to the radial image distance `r` from the principal
//! point, for a focal length `f` in pixels:
//!
//! | model         | forward          | inverse            | valid θ   |
//! |---------------|------------------|--------------------|-----------|
//! | equidistant   | `r = f·θ`        | `θ = r/f`          | `[0, π]`  |
//! | stereographic | `r = 2f·tan(θ/2)`| `θ = 2·atan(r/2f)` | `[0, π)`  |
//! | equisolid     | `r = 2f·sin(θ/2)`| `θ = 2·asin(r/2f)` | `[0, π]`  |
//! | orthographic  | `r = f·sin(θ)`   | `θ = asin(r/f)`    | `[0, π/2]`|
//!
//! A pixel maps to a ray by inverting the law at its radial distance and
//! keeping its azimuth; pixels whose radius falls outside the image
//! circle `r(θ_max)` have no ray — they are void, which is a value here,
//! not an error.

use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;
use core::str::FromStr;

use alloc::string::String;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerated deviation from unit length for [`Direction3`].
pub const UNIT_NORM_TOLERANCE: f64 = 1e-9;

/// Relative slack applied before declaring a radius outside the model
/// range, so that `theta_from_radius(radius_from_theta(θ))` cannot fail
/// from rounding at the domain edge.
const RADIUS_RANGE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProjectionError {
    #[error("{model} projection: angle {theta} rad outside valid domain [0, {max}]")]
    InvalidAngle {
        model: ProjectionModel,
        theta: f64,
        max: f64,
    },
    #[error("{model} projection: radius {radius} px outside valid range [0, {max}]")]
    RadiusOutOfRange {
        model: ProjectionModel,
        radius: f64,
        max: f64,
    },
    #[error("direction ({x}, {y}, {z}) is not unit length")]
    InvalidDirection { x: f64, y: f64, z: f64 },
    #[error("invalid camera parameter: {0}")]
    InvalidParams(String),
}

/// Radially symmetric fisheye projection law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionModel {
    Equidistant,
    Stereographic,
    Equisolid,
    Orthographic,
}

impl ProjectionModel {
    pub const ALL: [ProjectionModel; 4] = [
        ProjectionModel::Equidistant,
        ProjectionModel::Stereographic,
        ProjectionModel::Equisolid,
        ProjectionModel::Orthographic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProjectionModel::Equidistant => "equidistant",
            ProjectionModel::Stereographic => "stereographic",
            ProjectionModel::Equisolid => "equisolid",
            ProjectionModel::Orthographic => "orthographic",
        }
    }

    /// Largest polar angle for which the radius law is defined (and
    /// strictly increasing).
    pub fn max_theta(&self) -> f64 {
        match self {
            ProjectionModel::Equidistant | ProjectionModel::Equisolid => PI,
            // tan(θ/2) diverges at π; the law is valid on [0, π) only.
            ProjectionModel::Stereographic => PI,
            ProjectionModel::Orthographic => FRAC_PI_2,
        }
    }

    fn theta_in_domain(&self, theta: f64) -> bool {
        if !(0.0..=self.max_theta()).contains(&theta) {
            return false;
        }
        !(matches!(self, ProjectionModel::Stereographic) && theta >= PI)
    }

    /// Radial image distance of a ray with polar angle `theta`, for a
    /// focal length `f` in pixels.
    pub fn radius_from_theta(&self, f: f64, theta: f64) -> Result<f64, ProjectionError> {
        if !self.theta_in_domain(theta) || !theta.is_finite() {
            let max = match self {
                ProjectionModel::Stereographic => PI * (1.0 - f64::EPSILON),
                _ => self.max_theta(),
            };
            return Err(ProjectionError::InvalidAngle {
                model: *self,
                theta,
                max,
            });
        }
        Ok(match self {
            ProjectionModel::Equidistant => f * theta,
            ProjectionModel::Stereographic => 2.0 * f * libm::tan(theta / 2.0),
            ProjectionModel::Equisolid => 2.0 * f * libm::sin(theta / 2.0),
            ProjectionModel::Orthographic => f * libm::sin(theta),
        })
    }

    /// Largest radius representable by the law, or `None` when unbounded
    /// (stereographic accepts any finite radius).
    pub fn max_radius(&self, f: f64) -> Option<f64> {
        match self {
            ProjectionModel::Equidistant => Some(f * PI),
            ProjectionModel::Stereographic => None,
            ProjectionModel::Equisolid => Some(2.0 * f),
            ProjectionModel::Orthographic => Some(f),
        }
    }

    /// Polar angle whose image lies at radial distance `r`, inverting
    /// [`Self::radius_from_theta`].
    pub fn theta_from_radius(&self, f: f64, r: f64) -> Result<f64, ProjectionError> {
        let out_of_range = |max: f64| ProjectionError::RadiusOutOfRange {
            model: *self,
            radius: r,
            max,
        };
        if r < 0.0 || !r.is_finite() {
            return Err(out_of_range(self.max_radius(f).unwrap_or(f64::INFINITY)));
        }
        if let Some(max) = self.max_radius(f) {
            if r > max * (1.0 + RADIUS_RANGE_SLACK) {
                return Err(out_of_range(max));
            }
        }
        Ok(match self {
            ProjectionModel::Equidistant => (r / f).min(PI),
            ProjectionModel::Stereographic => 2.0 * libm::atan(r / (2.0 * f)),
            ProjectionModel::Equisolid => 2.0 * libm::asin((r / (2.0 * f)).min(1.0)),
            ProjectionModel::Orthographic => libm::asin((r / f).min(1.0)),
        })
    }
}

impl fmt::Display for ProjectionModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProjectionModel {
    type Err = ProjectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProjectionModel::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                ProjectionError::InvalidParams(alloc::format!("unknown projection model `{s}`"))
            })
    }
}

/// Unit-length ray direction in the camera frame (+x right, +y down,
/// +z forward along the optical axis).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction3 {
    x: f64,
    y: f64,
    z: f64,
}

impl Direction3 {
    /// The optical axis.
    pub const FORWARD: Direction3 = Direction3 {
        x: 0.0,
        y: 0.0,
        z: 1.0,
    };

    /// Builds a direction, requiring unit norm within [`UNIT_NORM_TOLERANCE`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, ProjectionError> {
        let norm = libm::sqrt(x * x + y * y + z * z);
        if !norm.is_finite() || libm::fabs(norm - 1.0) > UNIT_NORM_TOLERANCE {
            return Err(ProjectionError::InvalidDirection { x, y, z });
        }
        Ok(Direction3 { x, y, z })
    }

    /// Normalizes an arbitrary vector; `None` for (near-)zero input.
    pub fn normalized(v: Vector3<f64>) -> Option<Self> {
        let norm = libm::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
        if !norm.is_finite() || norm < 1e-12 {
            return None;
        }
        Some(Direction3 {
            x: v.x / norm,
            y: v.y / norm,
            z: v.z / norm,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    /// Polar angle from the optical axis, in `[0, π]`.
    pub fn polar_angle(&self) -> f64 {
        libm::acos(self.z.clamp(-1.0, 1.0))
    }

    /// Azimuth in the image plane, `atan2(y, x)`.
    pub fn azimuth(&self) -> f64 {
        libm::atan2(self.y, self.x)
    }
}

/// Continuous image-plane position in pixels. Integer values address
/// pixel centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        PixelCoord { u, v }
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }

    /// Euclidean distance to another coordinate.
    pub fn distance(&self, other: &PixelCoord) -> f64 {
        libm::hypot(self.u - other.u, self.v - other.v)
    }
}

/// A complete fisheye camera: projection law, focal length, image
/// geometry and FOV limit. Governs all pixel/ray conversions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisheyeCameraSpec {
    model: ProjectionModel,
    focal_length_px: f64,
    width_px: u32,
    height_px: u32,
    principal_point: PixelCoord,
    theta_max: f64,
    image_circle_radius: f64,
}

impl FisheyeCameraSpec {
    /// Builds a spec with the principal point at the exact image center
    /// and a 180° field of view (`theta_max = π/2`).
    pub fn new(
        model: ProjectionModel,
        focal_length_px: f64,
        width_px: u32,
        height_px: u32,
    ) -> Result<Self, ProjectionError> {
        Self::with_theta_max(model, focal_length_px, width_px, height_px, FRAC_PI_2)
    }

    /// Builds a spec with an explicit FOV half-angle in `(0, π]`
    /// (orthographic requires `theta_max ≤ π/2`, stereographic `< π`).
    pub fn with_theta_max(
        model: ProjectionModel,
        focal_length_px: f64,
        width_px: u32,
        height_px: u32,
        theta_max: f64,
    ) -> Result<Self, ProjectionError> {
        if !(focal_length_px.is_finite() && focal_length_px > 0.0) {
            return Err(ProjectionError::InvalidParams(alloc::format!(
                "focal length must be positive, got {focal_length_px}"
            )));
        }
        if width_px == 0 || height_px == 0 {
            return Err(ProjectionError::InvalidParams(String::from(
                "image dimensions must be positive",
            )));
        }
        if !(theta_max.is_finite() && theta_max > 0.0 && theta_max <= PI) {
            return Err(ProjectionError::InvalidParams(alloc::format!(
                "theta_max must lie in (0, pi], got {theta_max}"
            )));
        }
        // The radius law must be finite at theta_max; this rejects
        // orthographic beyond pi/2 and stereographic at pi.
        let image_circle_radius = model.radius_from_theta(focal_length_px, theta_max)?;
        let principal_point = PixelCoord::new(
            (width_px as f64 - 1.0) / 2.0,
            (height_px as f64 - 1.0) / 2.0,
        );
        Ok(FisheyeCameraSpec {
            model,
            focal_length_px,
            width_px,
            height_px,
            principal_point,
            theta_max,
            image_circle_radius,
        })
    }

    /// Moves the principal point away from the image center.
    pub fn with_principal_point(mut self, u: f64, v: f64) -> Result<Self, ProjectionError> {
        if !(u.is_finite() && v.is_finite()) {
            return Err(ProjectionError::InvalidParams(String::from(
                "principal point must be finite",
            )));
        }
        self.principal_point = PixelCoord::new(u, v);
        Ok(self)
    }

    /// Focal length for which the image circle exactly fills the shorter
    /// image dimension at the given FOV half-angle.
    pub fn fit_focal(
        model: ProjectionModel,
        width_px: u32,
        height_px: u32,
        theta_max: f64,
    ) -> Result<f64, ProjectionError> {
        let radius = (width_px.min(height_px) as f64 - 1.0) / 2.0;
        let unit = model.radius_from_theta(1.0, theta_max)?;
        Ok(radius / unit)
    }

    pub fn model(&self) -> ProjectionModel {
        self.model
    }

    pub fn focal_length_px(&self) -> f64 {
        self.focal_length_px
    }

    pub fn width_px(&self) -> u32 {
        self.width_px
    }

    pub fn height_px(&self) -> u32 {
        self.height_px
    }

    pub fn principal_point(&self) -> PixelCoord {
        self.principal_point
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    /// Radial extent of the image circle, `r(theta_max)`, in pixels.
    pub fn image_circle_radius(&self) -> f64 {
        self.image_circle_radius
    }

    /// Whether the image circle fits inside the image. `false` is a
    /// warning state, not an error: the frame is still usable, the circle
    /// is cropped by the image border.
    pub fn image_circle_fits(&self) -> bool {
        self.image_circle_radius <= self.width_px.min(self.height_px) as f64 / 2.0
    }

    /// Ray through a pixel, or `None` when the pixel lies outside the
    /// image circle (a void pixel).
    pub fn pixel_to_ray(&self, p: PixelCoord) -> Option<Direction3> {
        let dx = p.u - self.principal_point.u;
        let dy = p.v - self.principal_point.v;
        if !(dx.is_finite() && dy.is_finite()) {
            return None;
        }
        let r = libm::hypot(dx, dy);
        if r > self.image_circle_radius {
            return None;
        }
        if r == 0.0 {
            return Some(Direction3::FORWARD);
        }
        let theta = self.model.theta_from_radius(self.focal_length_px, r).ok()?;
        let (sin_t, cos_t) = (libm::sin(theta), libm::cos(theta));
        Some(Direction3 {
            x: sin_t * dx / r,
            y: sin_t * dy / r,
            z: cos_t,
        })
    }

    /// Image position of a ray, or `None` when the ray's polar angle
    /// exceeds `theta_max` (outside the FOV).
    pub fn ray_to_pixel(&self, d: Direction3) -> Option<PixelCoord> {
        let theta = d.polar_angle();
        if theta > self.theta_max {
            return None;
        }
        let rxy = libm::hypot(d.x, d.y);
        if rxy == 0.0 {
            return Some(self.principal_point);
        }
        let r = self
            .model
            .radius_from_theta(self.focal_length_px, theta)
            .ok()?;
        Some(PixelCoord::new(
            self.principal_point.u + r * d.x / rxy,
            self.principal_point.v + r * d.y / rxy,
        ))
    }
}
