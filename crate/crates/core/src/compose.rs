//! Composition of rig face renders into a single fisheye image per
//! channel.
//!
//! Two interchangeable mechanisms are provided and must agree:
//!
//! - [`compose_mesh`] rasterizes a precomputed [`WarpMesh`] whose vertex
//!   positions (fisheye plane) and texture coordinates (source face)
//!   encode the radial distortion — the production path, equivalent to
//!   texturing warped meshes and photographing them with an
//!   orthographic camera.
//! - [`compose_per_pixel`] inversely maps every output pixel through
//!   the projection law and samples the best-covering face directly —
//!   the reference resampler used as the test oracle.
//!
//! Labels are always nearest-neighbor sampled; interpolating class
//! colors would fabricate classes.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Vector3;
use thiserror::Error;

use crate::image::{ChannelImage, ChannelKind, DepthImage, MaskImage, Rgb8Image};
use crate::projection::{Direction3, FisheyeCameraSpec, PixelCoord};
use crate::render::{render_rig, CameraRig, RenderError, RigPose};
use crate::scene::{LayerMap, Scene, VOID_COLOR};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ComposeError {
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error("expected one face image per rig camera ({expected}), got {got}")]
    FaceArity { expected: usize, got: usize },
    #[error("face {index} has channel kind {actual:?}, expected {expected:?}")]
    FaceKind {
        index: usize,
        expected: ChannelKind,
        actual: ChannelKind,
    },
    #[error("face {index} is {width}x{height}, expected square {expected}x{expected}")]
    FaceShape {
        index: usize,
        width: u32,
        height: u32,
        expected: u32,
    },
    #[error("mesh does not match its inputs: {0}")]
    MeshMismatch(String),
    #[error("mesh resolution must be >= 2, got {0}")]
    MeshResolution(u32),
    #[error("frame invariant violated: {0}")]
    FrameInvariant(String),
}

/// How [`compose_frame`] turns face renders into the fisheye image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComposeMethod {
    /// Rasterize a precomputed warp mesh with the given per-camera grid
    /// subdivision.
    Mesh { resolution: u32 },
    /// Direct per-pixel inverse mapping.
    PerPixel,
}

impl Default for ComposeMethod {
    fn default() -> Self {
        ComposeMethod::Mesh { resolution: 128 }
    }
}

/// One warp mesh vertex: where a source-face grid point lands on the
/// fisheye plane, and which face texel it carries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpMeshVertex {
    pub position: PixelCoord,
    pub camera: u32,
    /// Texture coordinates on the source face, in [0, 1]².
    pub tex_uv: (f64, f64),
}

/// Precomputed triangle mesh encoding the fisheye distortion for a
/// specific camera spec and rig.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpMesh {
    vertices: Vec<WarpMeshVertex>,
    triangles: Vec<[u32; 3]>,
    resolution: u32,
    camera_count: u32,
    width_px: u32,
    height_px: u32,
}

impl WarpMesh {
    pub fn vertices(&self) -> &[WarpMeshVertex] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    /// Grid subdivision per camera.
    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn camera_count(&self) -> u32 {
        self.camera_count
    }

    pub fn triangle_count_for_camera(&self, camera: u32) -> usize {
        self.triangles
            .iter()
            .filter(|t| self.vertices[t[0] as usize].camera == camera)
            .count()
    }

    /// Plain-text dump (positions, camera ids, texture coordinates) for
    /// inspection. Debug format without stability guarantees.
    pub fn dump_text(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# warp mesh: {} vertices, {} triangles, resolution {}, {} cameras, output {}x{}",
            self.vertices.len(),
            self.triangles.len(),
            self.resolution,
            self.camera_count,
            self.width_px,
            self.height_px,
        );
        for v in &self.vertices {
            let _ = writeln!(
                out,
                "v {:.6} {:.6} {} {:.6} {:.6}",
                v.position.u, v.position.v, v.camera, v.tex_uv.0, v.tex_uv.1
            );
        }
        for t in &self.triangles {
            let _ = writeln!(out, "t {} {} {}", t[0], t[1], t[2]);
        }
        out
    }
}

/// Builds the warp mesh: a `resolution`² grid over each camera's image
/// plane is pushed through the camera orientation into rig space and
/// projected by the fisheye law onto the output plane. Grid points
/// beyond `theta_max` are clamped radially onto the image circle;
/// triangles entirely beyond it are dropped.
pub fn build_warp_mesh(
    spec: &FisheyeCameraSpec,
    rig: &CameraRig,
    resolution: u32,
) -> Result<WarpMesh, ComposeError> {
    if resolution < 2 {
        return Err(ComposeError::MeshResolution(resolution));
    }
    rig.validate_coverage(spec.theta_max())?;

    let res = resolution as usize;
    let pp = spec.principal_point();
    let r_max = spec.image_circle_radius();
    let mut vertices = Vec::with_capacity(rig.len() * res * res);
    // Polar angle per vertex, used for triangle clipping; NaN marks a
    // degenerate (exactly backward) grid point.
    let mut thetas = Vec::with_capacity(vertices.capacity());

    for (ci, cam) in rig.cameras().iter().enumerate() {
        for gy in 0..res {
            for gx in 0..res {
                let a = gx as f64 / (res - 1) as f64;
                let b = gy as f64 / (res - 1) as f64;
                let local = Vector3::new(2.0 * a - 1.0, 2.0 * b - 1.0, 1.0).normalize();
                let dir = cam.orientation() * local;
                let theta = libm::acos(dir.z.clamp(-1.0, 1.0));
                let rxy = libm::hypot(dir.x, dir.y);
                let position = if theta <= spec.theta_max() {
                    match Direction3::normalized(dir).and_then(|d| spec.ray_to_pixel(d)) {
                        Some(p) => p,
                        None => {
                            thetas.push(f64::NAN);
                            vertices.push(WarpMeshVertex {
                                position: pp,
                                camera: ci as u32,
                                tex_uv: (a, b),
                            });
                            continue;
                        }
                    }
                } else if rxy < 1e-12 {
                    // Straight backward: no azimuth to clamp along.
                    thetas.push(f64::NAN);
                    vertices.push(WarpMeshVertex {
                        position: pp,
                        camera: ci as u32,
                        tex_uv: (a, b),
                    });
                    continue;
                } else {
                    PixelCoord::new(
                        pp.u + r_max * dir.x / rxy,
                        pp.v + r_max * dir.y / rxy,
                    )
                };
                thetas.push(theta);
                vertices.push(WarpMeshVertex {
                    position,
                    camera: ci as u32,
                    tex_uv: (a, b),
                });
            }
        }
    }

    let mut triangles = Vec::new();
    let index = |ci: usize, gx: usize, gy: usize| (ci * res * res + gy * res + gx) as u32;
    for ci in 0..rig.len() {
        for gy in 0..res - 1 {
            for gx in 0..res - 1 {
                let corners = [
                    index(ci, gx, gy),
                    index(ci, gx + 1, gy),
                    index(ci, gx + 1, gy + 1),
                    index(ci, gx, gy + 1),
                ];
                for tri in [
                    [corners[0], corners[1], corners[2]],
                    [corners[0], corners[2], corners[3]],
                ] {
                    let ts = tri.map(|i| thetas[i as usize]);
                    if ts.iter().any(|t| t.is_nan()) {
                        continue;
                    }
                    if ts.iter().all(|t| *t > spec.theta_max()) {
                        continue;
                    }
                    triangles.push(tri);
                }
            }
        }
    }

    Ok(WarpMesh {
        vertices,
        triangles,
        resolution,
        camera_count: rig.len() as u32,
        width_px: spec.width_px(),
        height_px: spec.height_px(),
    })
}

fn check_faces(
    faces: &[ChannelImage],
    expected: usize,
    kind: ChannelKind,
) -> Result<(), ComposeError> {
    if faces.len() != expected {
        return Err(ComposeError::FaceArity {
            expected,
            got: faces.len(),
        });
    }
    for (index, face) in faces.iter().enumerate() {
        if face.kind() != kind {
            return Err(ComposeError::FaceKind {
                index,
                expected: kind,
                actual: face.kind(),
            });
        }
    }
    Ok(())
}

#[inline]
fn bilinear_weights(x: f64, y: f64, w: u32, h: u32) -> (u32, u32, u32, u32, f64, f64) {
    let x = x.clamp(0.0, (w - 1) as f64);
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0 = libm::floor(x);
    let y0 = libm::floor(y);
    let fx = x - x0;
    let fy = y - y0;
    let x0 = x0 as u32;
    let y0 = y0 as u32;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    (x0, y0, x1, y1, fx, fy)
}

pub(crate) fn sample_rgb_bilinear(img: &Rgb8Image, x: f64, y: f64) -> [u8; 3] {
    let (x0, y0, x1, y1, fx, fy) = bilinear_weights(x, y, img.width(), img.height());
    let (p00, p10, p01, p11) = (img.get(x0, y0), img.get(x1, y0), img.get(x0, y1), img.get(x1, y1));
    let mut out = [0u8; 3];
    for c in 0..3 {
        let top = p00[c] as f64 * (1.0 - fx) + p10[c] as f64 * fx;
        let bottom = p01[c] as f64 * (1.0 - fx) + p11[c] as f64 * fx;
        out[c] = libm::round(top * (1.0 - fy) + bottom * fy) as u8;
    }
    out
}

pub(crate) fn sample_depth_bilinear(img: &DepthImage, x: f64, y: f64) -> f32 {
    let (x0, y0, x1, y1, fx, fy) = bilinear_weights(x, y, img.width(), img.height());
    let (p00, p10, p01, p11) = (
        img.get(x0, y0) as f64,
        img.get(x1, y0) as f64,
        img.get(x0, y1) as f64,
        img.get(x1, y1) as f64,
    );
    let top = p00 * (1.0 - fx) + p10 * fx;
    let bottom = p01 * (1.0 - fx) + p11 * fx;
    (top * (1.0 - fy) + bottom * fy) as f32
}

pub(crate) fn sample_rgb_nearest(img: &Rgb8Image, x: f64, y: f64) -> [u8; 3] {
    let xi = (libm::round(x).max(0.0) as u32).min(img.width() - 1);
    let yi = (libm::round(y).max(0.0) as u32).min(img.height() - 1);
    img.get(xi, yi)
}

fn sample_channel(face: &ChannelImage, x: f64, y: f64, out: &mut ChannelImage, px: u32, py: u32) {
    match (face, out) {
        (ChannelImage::Rgb(src), ChannelImage::Rgb(dst)) => {
            dst.set(px, py, sample_rgb_bilinear(src, x, y));
        }
        (ChannelImage::Label(src), ChannelImage::Label(dst)) => {
            dst.set(px, py, sample_rgb_nearest(src, x, y));
        }
        (ChannelImage::Depth(src), ChannelImage::Depth(dst)) => {
            dst.set(px, py, sample_depth_bilinear(src, x, y));
        }
        _ => unreachable!("face/output kinds are validated before sampling"),
    }
}

fn blank_output(spec: &FisheyeCameraSpec, kind: ChannelKind) -> ChannelImage {
    let (w, h) = (spec.width_px(), spec.height_px());
    match kind {
        ChannelKind::Rgb => ChannelImage::Rgb(Rgb8Image::filled(w, h, [0, 0, 0])),
        ChannelKind::Label => ChannelImage::Label(Rgb8Image::filled(w, h, VOID_COLOR)),
        ChannelKind::Depth => ChannelImage::Depth(DepthImage::filled(w, h, 1.0)),
    }
}

/// Pixels whose center has no ray under the spec's FOV — the analytic
/// void mask of the fisheye frame.
pub fn fov_void_mask(spec: &FisheyeCameraSpec) -> MaskImage {
    let mut mask = MaskImage::filled(spec.width_px(), spec.height_px(), false);
    for y in 0..spec.height_px() {
        for x in 0..spec.width_px() {
            let absent = spec
                .pixel_to_ray(PixelCoord::new(x as f64, y as f64))
                .is_none();
            mask.set(x, y, absent);
        }
    }
    mask
}

/// Reference composition: every output pixel is inversely mapped to a
/// ray and sampled from the containing face with the largest incidence
/// margin. Pixels outside the FOV, or covered by no face, are void.
pub fn compose_per_pixel(
    faces: &[ChannelImage],
    spec: &FisheyeCameraSpec,
    rig: &CameraRig,
    kind: ChannelKind,
) -> Result<(ChannelImage, MaskImage), ComposeError> {
    check_faces(faces, rig.len(), kind)?;
    for (index, (face, cam)) in faces.iter().zip(rig.cameras()).enumerate() {
        if face.width() != cam.resolution() || face.height() != cam.resolution() {
            return Err(ComposeError::FaceShape {
                index,
                width: face.width(),
                height: face.height(),
                expected: cam.resolution(),
            });
        }
    }

    let mut out = blank_output(spec, kind);
    let mut void = MaskImage::filled(spec.width_px(), spec.height_px(), true);
    for y in 0..spec.height_px() {
        for x in 0..spec.width_px() {
            let Some(ray) = spec.pixel_to_ray(PixelCoord::new(x as f64, y as f64)) else {
                continue;
            };
            let dir = ray.as_vector();
            let Some(ci) = rig.select_camera(&dir) else {
                continue;
            };
            let (u, v) = rig.cameras()[ci]
                .project(&dir)
                .expect("selected camera contains the direction");
            sample_channel(&faces[ci], u, v, &mut out, x, y);
            void.set(x, y, false);
        }
    }
    Ok((out, void))
}

/// Production composition: rasterizes the warp mesh triangles into the
/// output plane, interpolating texture coordinates affinely and sampling
/// each triangle's source face. Pixels covered by no triangle are void.
pub fn compose_mesh(
    faces: &[ChannelImage],
    mesh: &WarpMesh,
    spec: &FisheyeCameraSpec,
    kind: ChannelKind,
) -> Result<(ChannelImage, MaskImage), ComposeError> {
    check_faces(faces, mesh.camera_count as usize, kind)?;
    if mesh.width_px != spec.width_px() || mesh.height_px != spec.height_px() {
        return Err(ComposeError::MeshMismatch(alloc::format!(
            "mesh built for {}x{} output, spec is {}x{}",
            mesh.width_px,
            mesh.height_px,
            spec.width_px(),
            spec.height_px()
        )));
    }

    let mut out = blank_output(spec, kind);
    let mut void = MaskImage::filled(spec.width_px(), spec.height_px(), true);
    let (w, h) = (spec.width_px(), spec.height_px());

    for tri in &mesh.triangles {
        let [v0, v1, v2] = tri.map(|i| mesh.vertices[i as usize]);
        let (p0, p1, p2) = (v0.position, v1.position, v2.position);
        let area = (p1.u - p0.u) * (p2.v - p0.v) - (p1.v - p0.v) * (p2.u - p0.u);
        if libm::fabs(area) < 1e-12 {
            continue;
        }
        let face = &faces[v0.camera as usize];
        let n = face.width() as f64;

        let min_x = p0.u.min(p1.u).min(p2.u);
        let max_x = p0.u.max(p1.u).max(p2.u);
        let min_y = p0.v.min(p1.v).min(p2.v);
        let max_y = p0.v.max(p1.v).max(p2.v);
        let x_lo = libm::ceil(min_x).max(0.0) as i64;
        let x_hi = libm::floor(max_x).min((w - 1) as f64) as i64;
        let y_lo = libm::ceil(min_y).max(0.0) as i64;
        let y_hi = libm::floor(max_y).min((h - 1) as f64) as i64;

        for py in y_lo..=y_hi {
            for px in x_lo..=x_hi {
                let q = PixelCoord::new(px as f64, py as f64);
                let w0 = (p2.u - p1.u) * (q.v - p1.v) - (p2.v - p1.v) * (q.u - p1.u);
                let w1 = (p0.u - p2.u) * (q.v - p2.v) - (p0.v - p2.v) * (q.u - p2.u);
                let w2 = (p1.u - p0.u) * (q.v - p0.v) - (p1.v - p0.v) * (q.u - p0.u);
                let inside = if area > 0.0 {
                    w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0
                } else {
                    w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0
                };
                if !inside {
                    continue;
                }
                let (l0, l1, l2) = (w0 / area, w1 / area, w2 / area);
                let tu = l0 * v0.tex_uv.0 + l1 * v1.tex_uv.0 + l2 * v2.tex_uv.0;
                let tv = l0 * v0.tex_uv.1 + l1 * v1.tex_uv.1 + l2 * v2.tex_uv.1;
                let x = tu * n - 0.5;
                let y = tv * n - 0.5;
                sample_channel(face, x, y, &mut out, px as u32, py as u32);
                void.set(px as u32, py as u32, false);
            }
        }
    }
    Ok((out, void))
}

/// One synchronized fisheye capture: RGB, label and depth channels plus
/// the shared void mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FisheyeFrame {
    pub rgb: Rgb8Image,
    pub label: Rgb8Image,
    pub depth: DepthImage,
    pub void_mask: MaskImage,
    pub spec: FisheyeCameraSpec,
    pub frame_id: String,
}

impl FisheyeFrame {
    /// Checks the channel/mask alignment invariants: shared dimensions,
    /// void pixels carrying the reserved values, label colors drawn from
    /// the layer map, depth within [0, 1].
    pub fn validate(&self, layers: &LayerMap) -> Result<(), ComposeError> {
        let (w, h) = (self.rgb.width(), self.rgb.height());
        let aligned = self.label.width() == w
            && self.label.height() == h
            && self.depth.width() == w
            && self.depth.height() == h
            && self.void_mask.width() == w
            && self.void_mask.height() == h;
        if !aligned {
            return Err(ComposeError::FrameInvariant(String::from(
                "channel dimensions differ",
            )));
        }
        for y in 0..h {
            for x in 0..w {
                let depth = self.depth.get(x, y);
                if !(0.0..=1.0).contains(&depth) {
                    return Err(ComposeError::FrameInvariant(alloc::format!(
                        "depth {depth} out of [0,1] at ({x},{y})"
                    )));
                }
                if self.void_mask.get(x, y) {
                    if self.label.get(x, y) != VOID_COLOR
                        || self.rgb.get(x, y) != [0, 0, 0]
                        || depth != 1.0
                    {
                        return Err(ComposeError::FrameInvariant(alloc::format!(
                            "void pixel ({x},{y}) does not carry the void values"
                        )));
                    }
                } else {
                    let color = self.label.get(x, y);
                    if layers.id_of_color(color).is_none() {
                        return Err(ComposeError::FrameInvariant(alloc::format!(
                            "label color {color:?} at ({x},{y}) not in the layer map"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Renders the rig in all three channels and composes each into the
/// fisheye plane, producing a frame with one shared void mask.
#[allow(clippy::too_many_arguments)]
pub fn compose_frame(
    scene: &Scene,
    layers: &LayerMap,
    rig: &CameraRig,
    pose: &RigPose,
    spec: &FisheyeCameraSpec,
    near: f64,
    far: f64,
    frame_id: &str,
    method: ComposeMethod,
) -> Result<FisheyeFrame, ComposeError> {
    rig.validate_coverage(spec.theta_max())?;
    let rendered = render_rig(scene, layers, rig, pose, &ChannelKind::ALL, near, far)?;
    let void = fov_void_mask(spec);
    let mesh = match method {
        ComposeMethod::Mesh { resolution } => Some(build_warp_mesh(spec, rig, resolution)?),
        ComposeMethod::PerPixel => None,
    };

    let mut channels = Vec::with_capacity(3);
    for faces in &rendered {
        let (mut image, covered_void) = match &mesh {
            Some(mesh) => compose_mesh(&faces.faces, mesh, spec, faces.kind)?,
            None => compose_per_pixel(&faces.faces, spec, rig, faces.kind)?,
        };
        // The frame's void mask is the analytic FOV mask. Rasterization
        // can leave sliver pixels between the mesh rim and the true
        // image circle uncovered; fill those from the reference path.
        for y in 0..spec.height_px() {
            for x in 0..spec.width_px() {
                if void.get(x, y) {
                    continue;
                }
                if covered_void.get(x, y) {
                    let ray = spec
                        .pixel_to_ray(PixelCoord::new(x as f64, y as f64))
                        .expect("non-void pixel has a ray");
                    if let Some(ci) = rig.select_camera(&ray.as_vector()) {
                        let (u, v) = rig.cameras()[ci].project(&ray.as_vector()).unwrap();
                        sample_channel(&faces.faces[ci], u, v, &mut image, x, y);
                    }
                }
            }
        }
        channels.push(image);
    }

    let mut rgb = match channels[0].clone() {
        ChannelImage::Rgb(img) => img,
        _ => unreachable!(),
    };
    let mut label = match channels[1].clone() {
        ChannelImage::Label(img) => img,
        _ => unreachable!(),
    };
    let mut depth = match channels[2].clone() {
        ChannelImage::Depth(img) => img,
        _ => unreachable!(),
    };
    // Enforce the reserved values on void pixels.
    for y in 0..spec.height_px() {
        for x in 0..spec.width_px() {
            if void.get(x, y) {
                rgb.set(x, y, [0, 0, 0]);
                label.set(x, y, VOID_COLOR);
                depth.set(x, y, 1.0);
            }
        }
    }

    Ok(FisheyeFrame {
        rgb,
        label,
        depth,
        void_mask: void,
        spec: spec.clone(),
        frame_id: String::from(frame_id),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::ProjectionModel;
    use crate::scene::SceneObject;
    use alloc::vec;

    fn spec(size: u32) -> FisheyeCameraSpec {
        let f = FisheyeCameraSpec::fit_focal(
            ProjectionModel::Equidistant,
            size,
            size,
            core::f64::consts::FRAC_PI_2,
        )
        .unwrap();
        FisheyeCameraSpec::new(ProjectionModel::Equidistant, f, size, size).unwrap()
    }

    fn uniform_faces(rig: &CameraRig, color: [u8; 3]) -> Vec<ChannelImage> {
        rig.cameras()
            .iter()
            .map(|c| ChannelImage::Rgb(Rgb8Image::filled(c.resolution(), c.resolution(), color)))
            .collect()
    }

    #[test]
    fn mesh_resolution_two_has_at_most_grid_vertices_inside_the_circle() {
        let rig = CameraRig::quad45(8).unwrap();
        // quad45 does not cover 180°; build for a narrower lens.
        let narrow = FisheyeCameraSpec::with_theta_max(
            ProjectionModel::Equidistant,
            90.0,
            256,
            256,
            1.2,
        )
        .unwrap();
        let mesh = build_warp_mesh(&narrow, &rig, 2).unwrap();
        assert!(mesh.vertices().len() <= 4 * 4);
        let pp = narrow.principal_point();
        let r_max = narrow.image_circle_radius();
        for v in mesh.vertices() {
            assert!(v.position.distance(&pp) <= r_max + 0.5);
        }
    }

    #[test]
    fn forward_camera_center_grid_point_lands_on_the_principal_point() {
        let spec = spec(256);
        let rig = CameraRig::cube5(64).unwrap();
        // Odd resolution so the front camera grid has an exact center.
        let mesh = build_warp_mesh(&spec, &rig, 3).unwrap();
        let center = mesh
            .vertices()
            .iter()
            .find(|v| v.camera == 0 && v.tex_uv == (0.5, 0.5))
            .unwrap();
        assert!(center.position.distance(&spec.principal_point()) < 1e-9);
    }

    #[test]
    fn mesh_vertices_replay_through_the_projection() {
        let spec = spec(512);
        let rig = CameraRig::cube5(64).unwrap();
        let mesh = build_warp_mesh(&spec, &rig, 17).unwrap();
        let res = mesh.resolution() as f64;
        let mut replayed = 0;
        for v in mesh.vertices() {
            let cam = &rig.cameras()[v.camera as usize];
            let local = Vector3::new(
                2.0 * v.tex_uv.0 - 1.0,
                2.0 * v.tex_uv.1 - 1.0,
                1.0,
            )
            .normalize();
            let dir = cam.orientation() * local;
            let Some(d) = Direction3::normalized(dir) else {
                continue;
            };
            if d.polar_angle() > spec.theta_max() {
                continue; // clamped vertex, no exact projection
            }
            let p = spec.ray_to_pixel(d).unwrap();
            assert!(
                p.distance(&v.position) < 1e-6,
                "vertex at uv {:?} off by {}",
                v.tex_uv,
                p.distance(&v.position)
            );
            replayed += 1;
        }
        assert!(replayed as f64 > res * res, "most vertices replayed");
    }

    #[test]
    fn triangle_count_before_clipping_is_two_per_grid_cell() {
        let spec = spec(512);
        let rig = CameraRig::cube5(64).unwrap();
        let res = 9u32;
        let mesh = build_warp_mesh(&spec, &rig, res).unwrap();
        // The front face lies entirely inside the FOV, so no triangle
        // of camera 0 is clipped.
        assert_eq!(
            mesh.triangle_count_for_camera(0),
            2 * ((res - 1) * (res - 1)) as usize
        );
    }

    #[test]
    fn uniform_faces_compose_to_a_uniform_disc() {
        let spec = spec(128);
        let rig = CameraRig::cube5(32).unwrap();
        let faces = uniform_faces(&rig, [9, 99, 199]);
        for (image, void) in [
            compose_per_pixel(&faces, &spec, &rig, ChannelKind::Rgb).unwrap(),
            {
                let mesh = build_warp_mesh(&spec, &rig, 48).unwrap();
                compose_mesh(&faces, &mesh, &spec, ChannelKind::Rgb).unwrap()
            },
        ] {
            let img = image.as_rgb8().unwrap();
            for y in 0..spec.height_px() {
                for x in 0..spec.width_px() {
                    if !void.get(x, y) {
                        assert_eq!(img.get(x, y), [9, 99, 199]);
                    }
                }
            }
            // The disc exists and so does the void ring.
            assert!(void.count_true() > 0);
            assert!(
                void.count_true()
                    < (spec.width_px() * spec.height_px()) as usize
            );
        }
    }

    #[test]
    fn principal_point_samples_the_forward_camera_center() {
        let spec = spec(129);
        let rig = CameraRig::cube5(33).unwrap();
        let mut faces = uniform_faces(&rig, [10, 10, 10]);
        // Mark the front camera's central pixel.
        if let ChannelImage::Rgb(img) = &mut faces[0] {
            img.set(16, 16, [250, 1, 2]);
        }
        let (image, _) = compose_per_pixel(&faces, &spec, &rig, ChannelKind::Rgb).unwrap();
        let pp = spec.principal_point();
        let px = image.as_rgb8().unwrap().get(pp.u as u32, pp.v as u32);
        assert_eq!(px, [250, 1, 2]);
    }

    #[test]
    fn face_arity_and_kind_are_validated() {
        let spec = spec(64);
        let rig = CameraRig::cube5(16).unwrap();
        let faces = uniform_faces(&rig, [0, 0, 1]);
        assert!(matches!(
            compose_per_pixel(&faces[..4], &spec, &rig, ChannelKind::Rgb),
            Err(ComposeError::FaceArity { expected: 5, got: 4 })
        ));
        assert!(matches!(
            compose_per_pixel(&faces, &spec, &rig, ChannelKind::Label),
            Err(ComposeError::FaceKind { .. })
        ));
    }

    #[test]
    fn mesh_mismatch_is_detected() {
        let spec_a = spec(128);
        let spec_b = spec(256);
        let rig = CameraRig::cube5(16).unwrap();
        let mesh = build_warp_mesh(&spec_a, &rig, 8).unwrap();
        let faces = uniform_faces(&rig, [1, 2, 3]);
        assert!(matches!(
            compose_mesh(&faces, &mesh, &spec_b, ChannelKind::Rgb),
            Err(ComposeError::MeshMismatch(_))
        ));
    }

    #[test]
    fn empty_scene_frame_is_background_disc_with_consistent_void() {
        let layers = LayerMap::from_palette(6).unwrap();
        let scene = Scene::empty(5);
        let spec = spec(96);
        let rig = CameraRig::cube5(48).unwrap();
        let frame = compose_frame(
            &scene,
            &layers,
            &rig,
            &RigPose::identity(),
            &spec,
            0.1,
            100.0,
            "frame_000000",
            ComposeMethod::PerPixel,
        )
        .unwrap();
        frame.validate(&layers).unwrap();
        let sky = layers.color_of(5).unwrap();
        for y in 0..spec.height_px() {
            for x in 0..spec.width_px() {
                if !frame.void_mask.get(x, y) {
                    assert_eq!(frame.label.get(x, y), sky);
                    assert_eq!(frame.depth.get(x, y), 1.0);
                }
            }
        }
        // Void mask equals the analytic FOV mask.
        assert_eq!(frame.void_mask, fov_void_mask(&spec));
    }

    #[test]
    fn compose_frame_is_deterministic_across_methods_calls() {
        let layers = LayerMap::from_palette(6).unwrap();
        let mut scene = Scene::empty(5);
        scene.objects.push(SceneObject {
            shape: crate::scene::Shape::HorizontalPlane { y: 2.0 },
            layer_id: 2,
            albedo: [30, 120, 40],
        });
        let spec = spec(96);
        let rig = CameraRig::cube5(48).unwrap();
        for method in [ComposeMethod::Mesh { resolution: 32 }, ComposeMethod::PerPixel] {
            let a = compose_frame(
                &scene,
                &layers,
                &rig,
                &RigPose::identity(),
                &spec,
                0.1,
                100.0,
                "f",
                method,
            )
            .unwrap();
            let b = compose_frame(
                &scene,
                &layers,
                &rig,
                &RigPose::identity(),
                &spec,
                0.1,
                100.0,
                "f",
                method,
            )
            .unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn label_channel_contains_no_blended_colors() {
        let layers = LayerMap::from_palette(8).unwrap();
        let mut scene = Scene::empty(5);
        for (i, layer) in [0u8, 2, 3, 4].iter().enumerate() {
            scene.objects.push(SceneObject {
                shape: crate::scene::Shape::Sphere {
                    center: Vector3::new(i as f64 * 2.0 - 3.0, -1.0, 6.0),
                    radius: 1.0,
                },
                layer_id: *layer,
                albedo: [i as u8 * 40, 10, 10],
            });
        }
        let spec = spec(128);
        let rig = CameraRig::cube5(64).unwrap();
        let frame = compose_frame(
            &scene,
            &layers,
            &rig,
            &RigPose::identity(),
            &spec,
            0.1,
            100.0,
            "f",
            ComposeMethod::Mesh { resolution: 48 },
        )
        .unwrap();
        for y in 0..spec.height_px() {
            for x in 0..spec.width_px() {
                let c = frame.label.get(x, y);
                assert!(
                    c == VOID_COLOR || layers.id_of_color(c).is_some(),
                    "unexpected label color {c:?}"
                );
            }
        }
    }
}
