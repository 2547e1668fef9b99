//! CPU raycaster for rig cameras: each 90°-FOV camera view is rendered
//! in up to three channels (RGB, label, depth), all derived from one
//! nearest-hit record per pixel so the channels stay pixel-aligned.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Rotation3, Vector3};
use thiserror::Error;

use crate::image::{ChannelImage, ChannelKind, DepthImage, Rgb8Image};
use crate::scene::{LayerMap, Scene, SceneError, Shape, LAYER_CAPACITY};

const RAY_EPSILON: f64 = 1e-9;

/// Number of quasi-random directions used by the coverage check.
const COVERAGE_SAMPLES: usize = 4096;
/// Extra samples placed exactly on the FOV rim, where undersized rigs
/// typically fail first.
const COVERAGE_RIM_SAMPLES: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RenderError {
    #[error("camera resolution must be >= 1")]
    InvalidResolution,
    #[error("camera orientation is not orthonormal (pose is degenerate)")]
    InvalidPose,
    #[error("invalid clip range: need far > near > 0, got near={near}, far={far}")]
    InvalidClipRange { near: f64, far: f64 },
    #[error(
        "rig does not cover the FOV: direction at theta={theta:.4} rad, \
         azimuth={azimuth:.4} rad lies in no camera frustum"
    )]
    CoverageGap { theta: f64, azimuth: f64 },
    #[error("unknown rig preset `{0}`")]
    UnknownPreset(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// One perspective camera of a rig. The horizontal and vertical FOV are
/// exactly 90°, so four to five such cameras tile a hemisphere like cube
/// faces.
#[derive(Debug, Clone, PartialEq)]
pub struct RigCamera {
    orientation: Rotation3<f64>,
    resolution: u32,
}

impl RigCamera {
    pub fn new(orientation: Rotation3<f64>, resolution: u32) -> Result<Self, RenderError> {
        if resolution == 0 {
            return Err(RenderError::InvalidResolution);
        }
        Ok(RigCamera {
            orientation,
            resolution,
        })
    }

    /// Rotation from camera frame to rig frame.
    pub fn orientation(&self) -> &Rotation3<f64> {
        &self.orientation
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn fov_deg(&self) -> f64 {
        90.0
    }

    /// Direction through the center of pixel `(x, y)`, in the camera
    /// frame, unit length.
    pub fn pixel_direction(&self, x: u32, y: u32) -> Vector3<f64> {
        let n = self.resolution as f64;
        let xn = (2.0 * x as f64 + 1.0) / n - 1.0;
        let yn = (2.0 * y as f64 + 1.0) / n - 1.0;
        Vector3::new(xn, yn, 1.0).normalize()
    }

    /// Whether a rig-frame direction lies inside this camera's frustum
    /// (boundary inclusive).
    pub fn contains(&self, rig_dir: &Vector3<f64>) -> bool {
        let d = self.orientation.inverse_transform_vector(rig_dir);
        d.z > 0.0 && libm::fabs(d.x) <= d.z && libm::fabs(d.y) <= d.z
    }

    /// Cosine of the angle between a rig-frame unit direction and this
    /// camera's axis; larger means the direction is more central.
    pub fn incidence_margin(&self, rig_dir: &Vector3<f64>) -> f64 {
        self.orientation.inverse_transform_vector(rig_dir).z
    }

    /// Projects a rig-frame direction to continuous face pixel
    /// coordinates (centers at integers). `None` outside the frustum.
    pub fn project(&self, rig_dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let d = self.orientation.inverse_transform_vector(rig_dir);
        if d.z <= 0.0 || libm::fabs(d.x) > d.z || libm::fabs(d.y) > d.z {
            return None;
        }
        let n = self.resolution as f64;
        let u = (d.x / d.z + 1.0) * n / 2.0 - 0.5;
        let v = (d.y / d.z + 1.0) * n / 2.0 - 0.5;
        Some((u, v))
    }
}

/// Named rig arrangements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RigPreset {
    /// Four cameras pitched/yawed 45° off forward (up, down, left,
    /// right) — the classical dome 4-pass arrangement. Covers polar
    /// angles up to atan(2+√2) ≈ 73.7° at the diagonal azimuths, so it
    /// only validates for lenses up to ~147° FOV.
    Quad45,
    /// Forward camera plus the four side faces of a cube. Tiles the
    /// full forward hemisphere exactly; the default for 180° lenses.
    Cube5,
}

impl RigPreset {
    pub fn name(&self) -> &'static str {
        match self {
            RigPreset::Quad45 => "quad45",
            RigPreset::Cube5 => "cube5",
        }
    }
}

impl core::str::FromStr for RigPreset {
    type Err = RenderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quad45" => Ok(RigPreset::Quad45),
            "cube5" => Ok(RigPreset::Cube5),
            other => Err(RenderError::UnknownPreset(String::from(other))),
        }
    }
}

/// A set of oriented 90°-FOV cameras whose renders tile the fisheye
/// FOV. Orientations are relative to the rig frame; the fisheye axis is
/// the rig's +z.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraRig {
    cameras: Vec<RigCamera>,
}

impl CameraRig {
    pub fn new(cameras: Vec<RigCamera>) -> Self {
        CameraRig { cameras }
    }

    pub fn preset(preset: RigPreset, resolution: u32) -> Result<Self, RenderError> {
        match preset {
            RigPreset::Quad45 => Self::quad45(resolution),
            RigPreset::Cube5 => Self::cube5(resolution),
        }
    }

    /// Up/down/left/right cameras pitched 45° off forward.
    pub fn quad45(resolution: u32) -> Result<Self, RenderError> {
        let quarter = core::f64::consts::FRAC_PI_4;
        let orientations = [
            Rotation3::from_axis_angle(&Vector3::x_axis(), quarter), // up (-y)
            Rotation3::from_axis_angle(&Vector3::x_axis(), -quarter), // down
            Rotation3::from_axis_angle(&Vector3::y_axis(), -quarter), // left
            Rotation3::from_axis_angle(&Vector3::y_axis(), quarter), // right
        ];
        let cameras = orientations
            .into_iter()
            .map(|o| RigCamera::new(o, resolution))
            .collect::<Result<_, _>>()?;
        Ok(CameraRig { cameras })
    }

    /// Forward camera plus four side faces of a cube.
    pub fn cube5(resolution: u32) -> Result<Self, RenderError> {
        let half = core::f64::consts::FRAC_PI_2;
        let orientations = [
            Rotation3::identity(),                                 // front
            Rotation3::from_axis_angle(&Vector3::x_axis(), half),  // up (-y)
            Rotation3::from_axis_angle(&Vector3::x_axis(), -half), // down
            Rotation3::from_axis_angle(&Vector3::y_axis(), -half), // left
            Rotation3::from_axis_angle(&Vector3::y_axis(), half),  // right
        ];
        let cameras = orientations
            .into_iter()
            .map(|o| RigCamera::new(o, resolution))
            .collect::<Result<_, _>>()?;
        Ok(CameraRig { cameras })
    }

    pub fn cameras(&self) -> &[RigCamera] {
        &self.cameras
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    /// Among cameras containing the direction, the one with the largest
    /// incidence margin (ties broken by the lowest index).
    pub fn select_camera(&self, rig_dir: &Vector3<f64>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (i, cam) in self.cameras.iter().enumerate() {
            if !cam.contains(rig_dir) {
                continue;
            }
            let margin = cam.incidence_margin(rig_dir);
            if best.is_none_or(|(_, m)| margin > m) {
                best = Some((i, margin));
            }
        }
        best.map(|(i, _)| i)
    }

    /// Verifies that the camera frustums jointly cover every direction
    /// with polar angle <= `theta_max`, using a deterministic
    /// low-discrepancy sample of the spherical cap plus a ring exactly
    /// on the rim.
    pub fn validate_coverage(&self, theta_max: f64) -> Result<(), RenderError> {
        let cap = 1.0 - libm::cos(theta_max);
        let golden = 0.6180339887498949;
        let check = |d: &Vector3<f64>| -> Result<(), RenderError> {
            if self.cameras.iter().any(|c| c.contains(d)) {
                Ok(())
            } else {
                Err(RenderError::CoverageGap {
                    theta: libm::acos(d.z.clamp(-1.0, 1.0)),
                    azimuth: libm::atan2(d.y, d.x),
                })
            }
        };
        for i in 0..COVERAGE_SAMPLES {
            let z = 1.0 - cap * (i as f64 + 0.5) / COVERAGE_SAMPLES as f64;
            let phi = core::f64::consts::TAU * ((i as f64 * golden) % 1.0);
            let s = libm::sqrt((1.0 - z * z).max(0.0));
            check(&Vector3::new(s * libm::cos(phi), s * libm::sin(phi), z))?;
        }
        for i in 0..COVERAGE_RIM_SAMPLES {
            let phi = core::f64::consts::TAU * (i as f64 + 0.5) / COVERAGE_RIM_SAMPLES as f64;
            let (s, z) = (libm::sin(theta_max), libm::cos(theta_max));
            check(&Vector3::new(s * libm::cos(phi), s * libm::sin(phi), z))?;
        }
        Ok(())
    }
}

/// Rig placement in the world.
#[derive(Debug, Clone, PartialEq)]
pub struct RigPose {
    pub position: Vector3<f64>,
    pub orientation: Rotation3<f64>,
}

impl RigPose {
    pub fn new(position: Vector3<f64>, orientation: Rotation3<f64>) -> Self {
        RigPose {
            position,
            orientation,
        }
    }

    pub fn identity() -> Self {
        RigPose::new(Vector3::zeros(), Rotation3::identity())
    }

    /// Builds a pose from a raw rotation matrix, rejecting
    /// non-orthonormal input.
    pub fn from_matrix(position: Vector3<f64>, m: Matrix3<f64>) -> Result<Self, RenderError> {
        let should_be_identity = m * m.transpose();
        let deviation = (should_be_identity - Matrix3::identity()).norm();
        if deviation > 1e-9 || (m.determinant() - 1.0).abs() > 1e-9 {
            return Err(RenderError::InvalidPose);
        }
        Ok(RigPose::new(position, Rotation3::from_matrix_unchecked(m)))
    }

    /// Pose at `position` yawed about the vertical so that the rig's +z
    /// points along `(sin yaw, 0, cos yaw)`.
    pub fn with_yaw(position: Vector3<f64>, yaw: f64) -> Self {
        RigPose::new(
            position,
            Rotation3::from_axis_angle(&Vector3::y_axis(), yaw),
        )
    }
}

/// Nearest-hit record shared by all channels of a pixel.
#[derive(Debug, Clone, Copy)]
struct Hit {
    distance: f64,
    normal: Vector3<f64>,
    layer_id: u8,
    albedo: [u8; 3],
}

fn intersect(shape: &Shape, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
    match shape {
        Shape::Box { min, max } => intersect_box(min, max, origin, dir),
        Shape::Sphere { center, radius } => intersect_sphere(center, *radius, origin, dir),
        Shape::HorizontalPlane { y } => {
            let (t, n) = intersect_horizontal(*y, origin, dir)?;
            Some((t, n))
        }
        Shape::HorizontalRect {
            y,
            min_x,
            min_z,
            max_x,
            max_z,
        } => {
            let (t, n) = intersect_horizontal(*y, origin, dir)?;
            let p = origin + dir * t;
            if p.x < *min_x || p.x > *max_x || p.z < *min_z || p.z > *max_z {
                return None;
            }
            Some((t, n))
        }
    }
}

fn intersect_horizontal(
    y: f64,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
) -> Option<(f64, Vector3<f64>)> {
    if libm::fabs(dir.y) < 1e-12 {
        return None;
    }
    let t = (y - origin.y) / dir.y;
    if t <= RAY_EPSILON {
        return None;
    }
    let normal = Vector3::new(0.0, -dir.y.signum(), 0.0);
    Some((t, normal))
}

fn intersect_box(
    min: &Vector3<f64>,
    max: &Vector3<f64>,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
) -> Option<(f64, Vector3<f64>)> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    let mut enter_axis = 0usize;
    for axis in 0..3 {
        let d = dir[axis];
        let o = origin[axis];
        if libm::fabs(d) < 1e-12 {
            if o < min[axis] || o > max[axis] {
                return None;
            }
            continue;
        }
        let mut t0 = (min[axis] - o) / d;
        let mut t1 = (max[axis] - o) / d;
        if t0 > t1 {
            core::mem::swap(&mut t0, &mut t1);
        }
        if t0 > t_enter {
            t_enter = t0;
            enter_axis = axis;
        }
        t_exit = t_exit.min(t1);
        if t_enter > t_exit {
            return None;
        }
    }
    if t_enter <= RAY_EPSILON {
        return None;
    }
    let mut normal = Vector3::zeros();
    normal[enter_axis] = -dir[enter_axis].signum();
    Some((t_enter, normal))
}

fn intersect_sphere(
    center: &Vector3<f64>,
    radius: f64,
    origin: &Vector3<f64>,
    dir: &Vector3<f64>,
) -> Option<(f64, Vector3<f64>)> {
    let oc = origin - center;
    let b = oc.dot(dir);
    let c = oc.dot(&oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sqrt_disc = libm::sqrt(disc);
    let mut t = -b - sqrt_disc;
    if t <= RAY_EPSILON {
        t = -b + sqrt_disc;
        if t <= RAY_EPSILON {
            return None;
        }
    }
    let mut normal = (origin + dir * t - center) / radius;
    if normal.dot(dir) > 0.0 {
        normal = -normal;
    }
    Some((t, normal))
}

fn nearest_hit(scene: &Scene, origin: &Vector3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for obj in &scene.objects {
        if let Some((distance, normal)) = intersect(&obj.shape, origin, dir) {
            let better = best.as_ref().is_none_or(|b| distance < b.distance);
            if better {
                best = Some(Hit {
                    distance,
                    normal,
                    layer_id: obj.layer_id,
                    albedo: obj.albedo,
                });
            }
        }
    }
    best
}

/// Normalized distance from the near plane: `(hit - near) / (far - near)`
/// clamped to `[0, 1]`. Misses map to 1.0. Requires `far > near > 0`.
pub fn depth_normalize(hit_distance: f64, near: f64, far: f64) -> f64 {
    ((hit_distance - near) / (far - near)).clamp(0.0, 1.0)
}

fn shade(albedo: [u8; 3], normal: &Vector3<f64>, scene: &Scene) -> [u8; 3] {
    let light = &scene.light;
    let lambert = normal.dot(&-light.direction).max(0.0);
    let s = (light.ambient + (1.0 - light.ambient) * light.intensity * lambert).clamp(0.0, 1.0);
    [
        libm::round(albedo[0] as f64 * s) as u8,
        libm::round(albedo[1] as f64 * s) as u8,
        libm::round(albedo[2] as f64 * s) as u8,
    ]
}

fn validate_clip(near: f64, far: f64) -> Result<(), RenderError> {
    if !(near.is_finite() && far.is_finite() && near > 0.0 && far > near) {
        return Err(RenderError::InvalidClipRange { near, far });
    }
    Ok(())
}

fn cast_camera(
    scene: &Scene,
    camera: &RigCamera,
    pose: &RigPose,
) -> Vec<Option<Hit>> {
    let n = camera.resolution();
    let rotation = pose.orientation * camera.orientation();
    let mut hits = Vec::with_capacity(n as usize * n as usize);
    for y in 0..n {
        for x in 0..n {
            let dir = rotation * camera.pixel_direction(x, y);
            hits.push(nearest_hit(scene, &pose.position, &dir));
        }
    }
    hits
}

fn channel_from_hits(
    hits: &[Option<Hit>],
    resolution: u32,
    scene: &Scene,
    layers: &LayerMap,
    kind: ChannelKind,
    near: f64,
    far: f64,
) -> ChannelImage {
    // Dense label-color lookup; ids were validated against the map.
    let mut colors = [[0u8; 3]; LAYER_CAPACITY];
    for entry in layers.entries() {
        colors[entry.id as usize] = entry.color;
    }
    match kind {
        ChannelKind::Rgb => {
            let mut img = Rgb8Image::filled(resolution, resolution, scene.background_albedo);
            for (i, hit) in hits.iter().enumerate() {
                if let Some(h) = hit {
                    img.pixels_mut()[i] = shade(h.albedo, &h.normal, scene);
                }
            }
            ChannelImage::Rgb(img)
        }
        ChannelKind::Label => {
            let background = colors[scene.background_layer as usize];
            let mut img = Rgb8Image::filled(resolution, resolution, background);
            for (i, hit) in hits.iter().enumerate() {
                if let Some(h) = hit {
                    img.pixels_mut()[i] = colors[h.layer_id as usize];
                }
            }
            ChannelImage::Label(img)
        }
        ChannelKind::Depth => {
            let mut img = DepthImage::filled(resolution, resolution, 1.0);
            for (i, hit) in hits.iter().enumerate() {
                if let Some(h) = hit {
                    img.pixels_mut()[i] = depth_normalize(h.distance, near, far) as f32;
                }
            }
            ChannelImage::Depth(img)
        }
    }
}

/// Renders one channel of one rig camera.
pub fn render_channel(
    scene: &Scene,
    layers: &LayerMap,
    camera: &RigCamera,
    pose: &RigPose,
    kind: ChannelKind,
    near: f64,
    far: f64,
) -> Result<ChannelImage, RenderError> {
    validate_clip(near, far)?;
    scene.validate_against(layers)?;
    let hits = cast_camera(scene, camera, pose);
    Ok(channel_from_hits(
        &hits,
        camera.resolution(),
        scene,
        layers,
        kind,
        near,
        far,
    ))
}

/// All requested channels of one rig camera, from a single set of
/// nearest-hit records.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFaces {
    pub kind: ChannelKind,
    /// One face image per rig camera, in rig order.
    pub faces: Vec<ChannelImage>,
}

/// Renders every camera of the rig in every requested channel kind.
/// Each camera's rays are cast once and shared across its channels.
pub fn render_rig(
    scene: &Scene,
    layers: &LayerMap,
    rig: &CameraRig,
    pose: &RigPose,
    kinds: &[ChannelKind],
    near: f64,
    far: f64,
) -> Result<Vec<RenderedFaces>, RenderError> {
    validate_clip(near, far)?;
    scene.validate_against(layers)?;
    let mut out: Vec<RenderedFaces> = kinds
        .iter()
        .map(|&kind| RenderedFaces {
            kind,
            faces: Vec::with_capacity(rig.len()),
        })
        .collect();
    for camera in rig.cameras() {
        let hits = cast_camera(scene, camera, pose);
        for faces in out.iter_mut() {
            faces.faces.push(channel_from_hits(
                &hits,
                camera.resolution(),
                scene,
                layers,
                faces.kind,
                near,
                far,
            ));
        }
    }
    Ok(out)
}
