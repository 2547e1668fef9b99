//! Deterministic procedural urban scene: a street grid with sidewalks,
//! buildings, vehicles and optional props, each object tagged with a
//! layer id that maps to a unique label color.
//!
//! Regenerating with the same [`CityConfig`] yields a bit-identical
//! scene; all randomness comes from one seeded ChaCha stream consumed in
//! a fixed order.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on scene layers; the label palette has exactly this many
/// distinct colors.
pub const LAYER_CAPACITY: usize = 32;

/// Reserved label color for pixels outside the fisheye FOV. Never used
/// by a layer.
pub const VOID_COLOR: [u8; 3] = [0, 0, 0];

/// Classes every generated city contains, in layer-id order.
pub const CORE_CLASSES: [&str; 6] = ["road", "sidewalk", "terrain", "building", "vehicle", "sky"];

/// The full candidate palette: layer name and label color per id.
/// Colors are pairwise distinct and never [`VOID_COLOR`].
pub const LAYER_PALETTE: [(&str, [u8; 3]); LAYER_CAPACITY] = [
    ("road", [128, 64, 128]),
    ("sidewalk", [244, 35, 232]),
    ("terrain", [152, 251, 152]),
    ("building", [70, 70, 70]),
    ("vehicle", [0, 0, 142]),
    ("sky", [70, 130, 180]),
    ("tree", [107, 142, 35]),
    ("pole", [153, 153, 153]),
    ("parking", [250, 170, 160]),
    ("traffic sign", [220, 220, 0]),
    ("wall", [102, 102, 156]),
    ("fence", [190, 153, 153]),
    ("hydrant", [220, 20, 60]),
    ("bench", [111, 74, 0]),
    ("mailbox", [0, 60, 100]),
    ("trash bin", [81, 0, 81]),
    ("billboard", [150, 120, 90]),
    ("bus stop", [230, 150, 140]),
    ("planter", [152, 150, 100]),
    ("kiosk", [180, 165, 180]),
    ("barrier", [250, 170, 30]),
    ("phone box", [110, 190, 160]),
    ("bicycle", [119, 11, 32]),
    ("fountain", [0, 170, 200]),
    ("statue", [140, 140, 20]),
    ("crate", [160, 82, 45]),
    ("awning", [0, 80, 100]),
    ("lamp", [255, 214, 112]),
    ("sign board", [45, 60, 150]),
    ("bus", [0, 60, 190]),
    ("scooter", [200, 40, 120]),
    ("pylon", [255, 120, 0]),
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("layer capacity exceeded: {requested} > {LAYER_CAPACITY}")]
    LayerCapacity { requested: usize },
    #[error("at least {min} layers required for the core classes, got {requested}")]
    TooFewLayers { requested: usize, min: usize },
    #[error("layer id {0} exceeds the 0..32 range")]
    LayerIdRange(u8),
    #[error("duplicate layer id {0}")]
    DuplicateLayerId(u8),
    #[error("duplicate layer color {0:?}")]
    DuplicateLayerColor([u8; 3]),
    #[error("layer color {0:?} is reserved for void pixels")]
    ReservedColor([u8; 3]),
    #[error("object {index} references layer {layer_id} absent from the layer map")]
    UnknownLayer { index: usize, layer_id: u8 },
    #[error("background layer {0} absent from the layer map")]
    UnknownBackgroundLayer(u8),
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
}

/// One layer: id, human-readable class name and unique label color.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerEntry {
    pub id: u8,
    pub name: String,
    pub color: [u8; 3],
}

/// The layer table of a scene: at most 32 entries with unique ids and
/// pairwise distinct colors, so label images invert to ids exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<LayerEntry>", into = "Vec<LayerEntry>")]
pub struct LayerMap {
    entries: Vec<LayerEntry>,
}

impl LayerMap {
    pub fn new(entries: Vec<LayerEntry>) -> Result<Self, SceneError> {
        if entries.len() > LAYER_CAPACITY {
            return Err(SceneError::LayerCapacity {
                requested: entries.len(),
            });
        }
        for (i, entry) in entries.iter().enumerate() {
            if entry.id as usize >= LAYER_CAPACITY {
                return Err(SceneError::LayerIdRange(entry.id));
            }
            if entry.color == VOID_COLOR {
                return Err(SceneError::ReservedColor(entry.color));
            }
            for earlier in &entries[..i] {
                if earlier.id == entry.id {
                    return Err(SceneError::DuplicateLayerId(entry.id));
                }
                if earlier.color == entry.color {
                    return Err(SceneError::DuplicateLayerColor(entry.color));
                }
            }
        }
        Ok(LayerMap { entries })
    }

    /// The first `count` palette entries, ids `0..count`.
    pub fn from_palette(count: usize) -> Result<Self, SceneError> {
        if count > LAYER_CAPACITY {
            return Err(SceneError::LayerCapacity { requested: count });
        }
        let entries = LAYER_PALETTE[..count]
            .iter()
            .enumerate()
            .map(|(id, (name, color))| LayerEntry {
                id: id as u8,
                name: String::from(*name),
                color: *color,
            })
            .collect();
        LayerMap::new(entries)
    }

    pub fn entries(&self) -> &[LayerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn color_of(&self, id: u8) -> Option<[u8; 3]> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.color)
    }

    pub fn id_of_color(&self, color: [u8; 3]) -> Option<u8> {
        self.entries.iter().find(|e| e.color == color).map(|e| e.id)
    }

    pub fn id_of_name(&self, name: &str) -> Option<u8> {
        self.entries.iter().find(|e| e.name == name).map(|e| e.id)
    }

    pub fn contains_id(&self, id: u8) -> bool {
        self.entries.iter().any(|e| e.id == id)
    }
}

impl TryFrom<Vec<LayerEntry>> for LayerMap {
    type Error = SceneError;

    fn try_from(entries: Vec<LayerEntry>) -> Result<Self, Self::Error> {
        LayerMap::new(entries)
    }
}

impl From<LayerMap> for Vec<LayerEntry> {
    fn from(map: LayerMap) -> Self {
        map.entries
    }
}

/// Raycastable primitive. The world is y-down: the ground plane lies at
/// `y = 0` and everything above ground has negative y.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    /// Axis-aligned box with componentwise `min <= max`.
    Box {
        min: Vector3<f64>,
        max: Vector3<f64>,
    },
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
    /// Infinite horizontal plane at the given y.
    HorizontalPlane { y: f64 },
    /// Axis-aligned horizontal rectangle at the given y.
    HorizontalRect {
        y: f64,
        min_x: f64,
        min_z: f64,
        max_x: f64,
        max_z: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub shape: Shape,
    pub layer_id: u8,
    pub albedo: [u8; 3],
}

/// Single directional light plus an ambient floor.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalLight {
    /// Unit direction of light travel (sunlight heads toward +y).
    pub direction: Vector3<f64>,
    pub intensity: f64,
    pub ambient: f64,
}

impl DirectionalLight {
    pub fn new(direction: Vector3<f64>, intensity: f64, ambient: f64) -> Self {
        DirectionalLight {
            direction: direction.normalize(),
            intensity,
            ambient,
        }
    }
}

impl Default for DirectionalLight {
    fn default() -> Self {
        DirectionalLight::new(Vector3::new(0.35, 0.9, 0.2), 1.0, 0.3)
    }
}

/// Immutable scene: primitives, one light and the background (sky)
/// layer used for rays that hit nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub objects: Vec<SceneObject>,
    pub light: DirectionalLight,
    pub background_layer: u8,
    pub background_albedo: [u8; 3],
    pub seed: u64,
}

impl Scene {
    /// A scene with no objects, useful as a composition/test fixture.
    pub fn empty(background_layer: u8) -> Self {
        Scene {
            objects: Vec::new(),
            light: DirectionalLight::default(),
            background_layer,
            background_albedo: [135, 206, 235],
            seed: 0,
        }
    }

    /// Checks that every referenced layer id exists in the map.
    pub fn validate_against(&self, layers: &LayerMap) -> Result<(), SceneError> {
        if !layers.contains_id(self.background_layer) {
            return Err(SceneError::UnknownBackgroundLayer(self.background_layer));
        }
        for (index, obj) in self.objects.iter().enumerate() {
            if !layers.contains_id(obj.layer_id) {
                return Err(SceneError::UnknownLayer {
                    index,
                    layer_id: obj.layer_id,
                });
            }
        }
        Ok(())
    }
}

/// Parameters of the procedural city generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CityConfig {
    pub seed: u64,
    /// City blocks along x and z.
    pub blocks_x: u32,
    pub blocks_z: u32,
    /// Side length of a block's building area, meters.
    pub block_size: f64,
    pub road_width: f64,
    pub sidewalk_width: f64,
    /// Probability that a building lot is occupied.
    pub building_density: f64,
    /// Expected vehicles per road segment.
    pub vehicle_density: f64,
    /// Expected props (trees, poles, extras) per block.
    pub prop_density: f64,
    /// Number of layers to populate (>= 6, <= 32); ids are 0..layer_count.
    pub layer_count: u32,
}

impl Default for CityConfig {
    fn default() -> Self {
        CityConfig {
            seed: 1,
            blocks_x: 4,
            blocks_z: 4,
            block_size: 48.0,
            road_width: 8.0,
            sidewalk_width: 3.0,
            building_density: 0.85,
            vehicle_density: 1.5,
            prop_density: 2.0,
            layer_count: 8,
        }
    }
}

impl CityConfig {
    /// Distance between consecutive road center lines.
    pub fn pitch(&self) -> f64 {
        self.block_size + 2.0 * self.sidewalk_width + self.road_width
    }

    /// Center x of the k-th north-south road line, k in 0..=blocks_x.
    pub fn road_line_x(&self, k: u32) -> f64 {
        k as f64 * self.pitch() - self.blocks_x as f64 * self.pitch() / 2.0
    }

    /// Center z of the k-th east-west road line, k in 0..=blocks_z.
    pub fn road_line_z(&self, k: u32) -> f64 {
        k as f64 * self.pitch() - self.blocks_z as f64 * self.pitch() / 2.0
    }

    fn validate(&self) -> Result<(), SceneError> {
        if self.layer_count as usize > LAYER_CAPACITY {
            return Err(SceneError::LayerCapacity {
                requested: self.layer_count as usize,
            });
        }
        if (self.layer_count as usize) < CORE_CLASSES.len() {
            return Err(SceneError::TooFewLayers {
                requested: self.layer_count as usize,
                min: CORE_CLASSES.len(),
            });
        }
        if self.blocks_x == 0 || self.blocks_z == 0 {
            return Err(SceneError::InvalidConfig(String::from(
                "city needs at least one block in each direction",
            )));
        }
        for (name, value) in [
            ("building_density", self.building_density),
            ("vehicle_density", self.vehicle_density),
            ("prop_density", self.prop_density),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(SceneError::InvalidConfig(alloc::format!(
                    "{name} must be >= 0, got {value}"
                )));
            }
        }
        for (name, value) in [
            ("block_size", self.block_size),
            ("road_width", self.road_width),
            ("sidewalk_width", self.sidewalk_width),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(SceneError::InvalidConfig(alloc::format!(
                    "{name} must be > 0, got {value}"
                )));
            }
        }
        Ok(())
    }
}

// Layer ids of the core classes, fixed by palette order.
const ROAD: u8 = 0;
const SIDEWALK: u8 = 1;
const TERRAIN: u8 = 2;
const BUILDING: u8 = 3;
const VEHICLE: u8 = 4;
const SKY: u8 = 5;
const TREE: u8 = 6;
const POLE: u8 = 7;
const PARKING: u8 = 8;

// Surface heights above the terrain plane (y-down world: above = -y).
const ROAD_LEVEL: f64 = -0.02;
const SIDEWALK_LEVEL: f64 = -0.12;

const BUILDING_ALBEDOS: [[u8; 3]; 5] = [
    [172, 160, 150],
    [188, 148, 120],
    [150, 155, 165],
    [205, 200, 190],
    [130, 120, 118],
];

const VEHICLE_ALBEDOS: [[u8; 3]; 5] = [
    [190, 30, 35],
    [40, 60, 150],
    [225, 225, 225],
    [40, 40, 45],
    [140, 145, 150],
];

/// Generates the procedural city and its layer map. Deterministic in
/// the config (including its seed).
pub fn generate_city(config: &CityConfig) -> Result<(Scene, LayerMap), SceneError> {
    config.validate()?;
    let layers = LayerMap::from_palette(config.layer_count as usize)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut objects = Vec::new();

    let x_lo = config.road_line_x(0) - config.road_width / 2.0;
    let x_hi = config.road_line_x(config.blocks_x) + config.road_width / 2.0;
    let z_lo = config.road_line_z(0) - config.road_width / 2.0;
    let z_hi = config.road_line_z(config.blocks_z) + config.road_width / 2.0;

    // Terrain underlies everything and extends past the city edge.
    objects.push(SceneObject {
        shape: Shape::HorizontalPlane { y: 0.0 },
        layer_id: TERRAIN,
        albedo: [96, 142, 74],
    });

    // Road strips on every grid line, both directions.
    for k in 0..=config.blocks_x {
        let x = config.road_line_x(k);
        objects.push(SceneObject {
            shape: Shape::HorizontalRect {
                y: ROAD_LEVEL,
                min_x: x - config.road_width / 2.0,
                min_z: z_lo,
                max_x: x + config.road_width / 2.0,
                max_z: z_hi,
            },
            layer_id: ROAD,
            albedo: [60, 60, 66],
        });
    }
    for k in 0..=config.blocks_z {
        let z = config.road_line_z(k);
        objects.push(SceneObject {
            shape: Shape::HorizontalRect {
                y: ROAD_LEVEL,
                min_x: x_lo,
                min_z: z - config.road_width / 2.0,
                max_x: x_hi,
                max_z: z + config.road_width / 2.0,
            },
            layer_id: ROAD,
            albedo: [60, 60, 66],
        });
    }

    let has_parking = config.layer_count as u8 > PARKING;
    let sw = config.sidewalk_width;

    for bi in 0..config.blocks_x {
        for bj in 0..config.blocks_z {
            // Block interior between the surrounding road edges.
            let bx0 = config.road_line_x(bi) + config.road_width / 2.0;
            let bx1 = bx0 + config.block_size + 2.0 * sw;
            let bz0 = config.road_line_z(bj) + config.road_width / 2.0;
            let bz1 = bz0 + config.block_size + 2.0 * sw;

            // Sidewalk ring: two full-width strips, two shortened ones.
            for (sx0, sz0, sx1, sz1) in [
                (bx0, bz0, bx1, bz0 + sw),
                (bx0, bz1 - sw, bx1, bz1),
                (bx0, bz0 + sw, bx0 + sw, bz1 - sw),
                (bx1 - sw, bz0 + sw, bx1, bz1 - sw),
            ] {
                objects.push(SceneObject {
                    shape: Shape::HorizontalRect {
                        y: SIDEWALK_LEVEL,
                        min_x: sx0,
                        min_z: sz0,
                        max_x: sx1,
                        max_z: sz1,
                    },
                    layer_id: SIDEWALK,
                    albedo: [178, 176, 170],
                });
            }

            // Interior split into 2x2 lots: buildings or parking.
            let ix0 = bx0 + sw;
            let iz0 = bz0 + sw;
            let lot = config.block_size / 2.0;
            for li in 0..2 {
                for lj in 0..2 {
                    let lx0 = ix0 + li as f64 * lot;
                    let lz0 = iz0 + lj as f64 * lot;
                    let occupied = rng.random::<f64>() < config.building_density;
                    let parking_lot = has_parking && rng.random::<f64>() < 0.15;
                    if parking_lot {
                        objects.push(SceneObject {
                            shape: Shape::HorizontalRect {
                                y: ROAD_LEVEL,
                                min_x: lx0 + 0.5,
                                min_z: lz0 + 0.5,
                                max_x: lx0 + lot - 0.5,
                                max_z: lz0 + lot - 0.5,
                            },
                            layer_id: PARKING,
                            albedo: [88, 88, 92],
                        });
                        continue;
                    }
                    if !occupied {
                        continue;
                    }
                    let margin = 1.0 + rng.random::<f64>() * 3.0;
                    let height = 8.0 + rng.random::<f64>() * 27.0;
                    let albedo = BUILDING_ALBEDOS[rng.random_range(0..BUILDING_ALBEDOS.len())];
                    objects.push(SceneObject {
                        shape: Shape::Box {
                            min: Vector3::new(lx0 + margin, -height, lz0 + margin),
                            max: Vector3::new(lx0 + lot - margin, 0.0, lz0 + lot - margin),
                        },
                        layer_id: BUILDING,
                        albedo,
                    });
                }
            }

            // Trees and poles along the sidewalk, extra props on it.
            // Parking is a ground class, not a prop.
            let prop_kinds: Vec<u8> = (TREE..config.layer_count as u8)
                .filter(|k| *k != PARKING)
                .collect();
            let whole = config.prop_density as u32;
            let extra = rng.random::<f64>() < (config.prop_density - whole as f64);
            let count = if prop_kinds.is_empty() {
                0
            } else {
                whole + u32::from(extra)
            };
            for _ in 0..count {
                let along = rng.random::<f64>();
                let side = rng.random_range(0..4u32);
                let (px, pz) = match side {
                    0 => (bx0 + sw / 2.0, bz0 + sw + along * (config.block_size)),
                    1 => (bx1 - sw / 2.0, bz0 + sw + along * (config.block_size)),
                    2 => (bx0 + sw + along * config.block_size, bz0 + sw / 2.0),
                    _ => (bx0 + sw + along * config.block_size, bz1 - sw / 2.0),
                };
                let kind = prop_kinds[rng.random_range(0..prop_kinds.len())];
                match kind {
                    TREE => {
                        let r = 1.2 + rng.random::<f64>() * 1.2;
                        objects.push(SceneObject {
                            shape: Shape::Sphere {
                                center: Vector3::new(px, -(2.2 + r), pz),
                                radius: r,
                            },
                            layer_id: TREE,
                            albedo: [70, 120, 46],
                        });
                    }
                    POLE => {
                        objects.push(SceneObject {
                            shape: Shape::Box {
                                min: Vector3::new(px - 0.08, -5.0, pz - 0.08),
                                max: Vector3::new(px + 0.08, SIDEWALK_LEVEL, pz + 0.08),
                            },
                            layer_id: POLE,
                            albedo: [120, 120, 124],
                        });
                    }
                    other => {
                        // Generic prop: a small box in its layer's color
                        // family so classes beyond the core stay visible.
                        let (_, color) = LAYER_PALETTE[other as usize];
                        objects.push(SceneObject {
                            shape: Shape::Box {
                                min: Vector3::new(px - 0.4, -1.0, pz - 0.4),
                                max: Vector3::new(px + 0.4, SIDEWALK_LEVEL, pz + 0.4),
                            },
                            layer_id: other,
                            albedo: color,
                        });
                    }
                }
            }
        }
    }

    // Vehicles on road segments between intersections.
    let place_vehicles = |objects: &mut Vec<SceneObject>, rng: &mut ChaCha8Rng| {
        let whole = config.vehicle_density as u32;
        for k in 0..=config.blocks_x {
            let x = config.road_line_x(k);
            for s in 0..config.blocks_z {
                let seg0 = config.road_line_z(s) + config.road_width / 2.0;
                let seg1 = config.road_line_z(s + 1) - config.road_width / 2.0;
                let extra = rng.random::<f64>() < (config.vehicle_density - whole as f64);
                for _ in 0..(whole + u32::from(extra)) {
                    let zc = seg0 + rng.random::<f64>() * (seg1 - seg0 - 4.4) + 2.2;
                    let lane = if rng.random::<bool>() { -1.0 } else { 1.0 };
                    let xc = x + lane * config.road_width / 4.0;
                    let albedo = VEHICLE_ALBEDOS[rng.random_range(0..VEHICLE_ALBEDOS.len())];
                    objects.push(SceneObject {
                        shape: Shape::Box {
                            min: Vector3::new(xc - 0.9, -1.5 + ROAD_LEVEL, zc - 2.2),
                            max: Vector3::new(xc + 0.9, ROAD_LEVEL, zc + 2.2),
                        },
                        layer_id: VEHICLE,
                        albedo,
                    });
                }
            }
        }
        for k in 0..=config.blocks_z {
            let z = config.road_line_z(k);
            for s in 0..config.blocks_x {
                let seg0 = config.road_line_x(s) + config.road_width / 2.0;
                let seg1 = config.road_line_x(s + 1) - config.road_width / 2.0;
                let extra = rng.random::<f64>() < (config.vehicle_density - whole as f64);
                for _ in 0..(whole + u32::from(extra)) {
                    let xc = seg0 + rng.random::<f64>() * (seg1 - seg0 - 4.4) + 2.2;
                    let lane = if rng.random::<bool>() { -1.0 } else { 1.0 };
                    let zc = z + lane * config.road_width / 4.0;
                    let albedo = VEHICLE_ALBEDOS[rng.random_range(0..VEHICLE_ALBEDOS.len())];
                    objects.push(SceneObject {
                        shape: Shape::Box {
                            min: Vector3::new(xc - 2.2, -1.5 + ROAD_LEVEL, zc - 0.9),
                            max: Vector3::new(xc + 2.2, ROAD_LEVEL, zc + 0.9),
                        },
                        layer_id: VEHICLE,
                        albedo,
                    });
                }
            }
        }
    };
    if config.vehicle_density > 0.0 {
        place_vehicles(&mut objects, &mut rng);
    }

    let scene = Scene {
        objects,
        light: DirectionalLight::default(),
        background_layer: SKY,
        background_albedo: [135, 206, 235],
        seed: config.seed,
    };
    scene.validate_against(&layers)?;
    Ok((scene, layers))
}
