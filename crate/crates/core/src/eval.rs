//! Free-space class mapping and void-aware Intersection-over-Union.
//!
//! Ground classes are merged into a single binary `free space` class;
//! everything else is `background`. IoU is counted over non-void pixels
//! only — pixels beyond the fisheye FOV never influence the score.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::image::{MaskImage, Rgb8Image};
use crate::scene::{LayerMap, VOID_COLOR};

/// Ground classes merged into free space by default.
pub const DEFAULT_FREE_SPACE_CLASSES: [&str; 5] =
    ["road", "sidewalk", "parking", "rail track", "terrain"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("free-space class set must not be empty")]
    EmptyClassSet,
    #[error("none of the free-space classes {0:?} exist in the layer map")]
    NoMatchingClasses(Vec<String>),
    #[error("label image contains colors outside the layer map: {0:?}")]
    UnmappedColors(Vec<[u8; 3]>),
    #[error("mask dimensions differ: {a_w}x{a_h} vs {b_w}x{b_h}")]
    DimensionMismatch {
        a_w: u32,
        a_h: u32,
        b_w: u32,
        b_h: u32,
    },
}

/// Which class names count as free space.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ClassMappingRule {
    free_space_classes: BTreeSet<String>,
}

impl ClassMappingRule {
    pub fn new<I, S>(classes: I) -> Result<Self, EvalError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let free_space_classes: BTreeSet<String> =
            classes.into_iter().map(Into::into).collect();
        if free_space_classes.is_empty() {
            return Err(EvalError::EmptyClassSet);
        }
        Ok(ClassMappingRule { free_space_classes })
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.free_space_classes.iter().map(String::as_str)
    }

    /// Layer ids of the rule's classes in the given map. Class names
    /// absent from the map are skipped (a map need not contain every
    /// vocabulary entry), but at least one must match.
    pub fn free_space_ids(&self, layers: &LayerMap) -> Result<BTreeSet<u8>, EvalError> {
        let ids: BTreeSet<u8> = self
            .free_space_classes
            .iter()
            .filter_map(|name| layers.id_of_name(name))
            .collect();
        if ids.is_empty() {
            return Err(EvalError::NoMatchingClasses(
                self.free_space_classes.iter().cloned().collect(),
            ));
        }
        Ok(ids)
    }
}

impl Default for ClassMappingRule {
    fn default() -> Self {
        ClassMappingRule::new(DEFAULT_FREE_SPACE_CLASSES).expect("default set is non-empty")
    }
}

/// Maps a label-color image to a binary free-space mask. Void-colored
/// pixels map to background (the void mask handles them separately);
/// any other color missing from the layer map is an error.
pub fn map_to_binary(
    label: &Rgb8Image,
    rule: &ClassMappingRule,
    layers: &LayerMap,
) -> Result<MaskImage, EvalError> {
    let free_ids = rule.free_space_ids(layers)?;
    let mut mask = MaskImage::filled(label.width(), label.height(), false);
    let mut unknown: BTreeSet<[u8; 3]> = BTreeSet::new();
    for y in 0..label.height() {
        for x in 0..label.width() {
            let color = label.get(x, y);
            if color == VOID_COLOR {
                continue;
            }
            match layers.id_of_color(color) {
                Some(id) => mask.set(x, y, free_ids.contains(&id)),
                None => {
                    unknown.insert(color);
                }
            }
        }
    }
    if !unknown.is_empty() {
        return Err(EvalError::UnmappedColors(unknown.into_iter().collect()));
    }
    Ok(mask)
}

/// Raw pixel tallies behind an IoU score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub struct IouCounts {
    pub intersection: u64,
    pub union: u64,
    /// Non-void pixels considered.
    pub counted: u64,
    /// Void pixels ignored.
    pub void: u64,
}

impl IouCounts {
    /// `None` when the union is empty (IoU undefined).
    pub fn iou(&self) -> Option<f64> {
        if self.union == 0 {
            None
        } else {
            Some(self.intersection as f64 / self.union as f64)
        }
    }
}

fn check_dims(a: (u32, u32), b: (u32, u32)) -> Result<(), EvalError> {
    if a != b {
        return Err(EvalError::DimensionMismatch {
            a_w: a.0,
            a_h: a.1,
            b_w: b.0,
            b_h: b.1,
        });
    }
    Ok(())
}

/// Intersection/union tallies of the free-space class over non-void
/// pixels.
pub fn iou_counts(
    pred: &MaskImage,
    gt: &MaskImage,
    void: &MaskImage,
) -> Result<IouCounts, EvalError> {
    let dims = (pred.width(), pred.height());
    check_dims(dims, (gt.width(), gt.height()))?;
    check_dims(dims, (void.width(), void.height()))?;
    let mut counts = IouCounts::default();
    for ((p, g), v) in pred.pixels().iter().zip(gt.pixels()).zip(void.pixels()) {
        if *v {
            counts.void += 1;
            continue;
        }
        counts.counted += 1;
        if *p && *g {
            counts.intersection += 1;
        }
        if *p || *g {
            counts.union += 1;
        }
    }
    Ok(counts)
}

/// Void-aware IoU of the free-space class: `|pred ∧ gt| / |pred ∨ gt|`
/// over non-void pixels. `Ok(None)` when the union is empty.
pub fn compute_iou(
    pred: &MaskImage,
    gt: &MaskImage,
    void: &MaskImage,
) -> Result<Option<f64>, EvalError> {
    Ok(iou_counts(pred, gt, void)?.iou())
}
