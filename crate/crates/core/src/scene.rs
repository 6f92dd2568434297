//! Per-image scene statistics over a segmentation raster: label disorder,
//! category areas, activation fixation per category, and the area vector
//! of the weakly activated part of the scene.
//!
//! IGNORE pixels never contribute to any numerator or denominator.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{ActivationRaster, CategoryVector, SegmentationRaster, IGNORE, NUM_CATEGORIES};

/// Default activation cut for the masked area vector.
pub const DEFAULT_CAM_THRESHOLD: f64 = 0.7;

/// Fraction of right/below neighbor pairs whose labels differ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisorderScore {
    pub value: f64,
    pub raw_transitions: u64,
    pub counted_pairs: u64,
}

pub fn scene_disorder(raster: &SegmentationRaster) -> Result<DisorderScore> {
    let (w, h) = (raster.width(), raster.height());
    let labels = raster.labels();
    let mut transitions = 0u64;
    let mut pairs = 0u64;
    let mut tally = |a: u8, b: u8| {
        if a != IGNORE && b != IGNORE {
            pairs += 1;
            transitions += u64::from(a != b);
        }
    };
    for y in 0..h {
        let row = &labels[y * w..(y + 1) * w];
        for x in 0..w {
            if x + 1 < w {
                tally(row[x], row[x + 1]);
            }
            if y + 1 < h {
                tally(row[x], labels[(y + 1) * w + x]);
            }
        }
    }
    if pairs == 0 {
        return Err(Error::domain("scene disorder needs at least one pair of labeled neighbors"));
    }
    Ok(DisorderScore {
        value: transitions as f64 / pairs as f64,
        raw_transitions: transitions,
        counted_pairs: pairs,
    })
}

/// Relative pixel area of each category over labeled pixels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryAreaVector {
    pub v: CategoryVector,
    pub valid_pixels: u64,
}

fn normalized_histogram(labels: impl Iterator<Item = u8>) -> Option<(CategoryVector, u64)> {
    let mut counts = [0u64; NUM_CATEGORIES];
    let mut total = 0u64;
    for l in labels.filter(|&l| l != IGNORE) {
        counts[l as usize] += 1;
        total += 1;
    }
    if total == 0 {
        return None;
    }
    let mut v = [0.0; NUM_CATEGORIES];
    for (slot, c) in v.iter_mut().zip(counts) {
        *slot = c as f64 / total as f64;
    }
    Some((v, total))
}

pub fn area_vector(raster: &SegmentationRaster) -> Result<CategoryAreaVector> {
    let (v, valid_pixels) = normalized_histogram(raster.labels().iter().copied())
        .ok_or_else(|| Error::domain("raster has no labeled pixels"))?;
    Ok(CategoryAreaVector { v, valid_pixels })
}

/// Per-category share of total activation mass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FixationProfile {
    pub f: CategoryVector,
}

fn check_dims(raster: &SegmentationRaster, cam: &ActivationRaster) -> Result<()> {
    if raster.width() != cam.width() || raster.height() != cam.height() {
        return Err(Error::DimensionMismatch {
            seg_width: raster.width(),
            seg_height: raster.height(),
            cam_width: cam.width(),
            cam_height: cam.height(),
        });
    }
    Ok(())
}

pub fn fixation_profile(raster: &SegmentationRaster, cam: &ActivationRaster) -> Result<FixationProfile> {
    check_dims(raster, cam)?;
    let mut mass = [0.0; NUM_CATEGORIES];
    for (&l, &a) in raster.labels().iter().zip(cam.values()) {
        if l != IGNORE {
            mass[l as usize] += a;
        }
    }
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain("activation mass over labeled pixels is zero"));
    }
    for m in &mut mass {
        *m /= total;
    }
    Ok(FixationProfile { f: mass })
}

/// Area vector restricted to pixels activated below the threshold,
/// renormalized over those pixels.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaskedCharacteristicVector {
    pub v_tilde: CategoryVector,
    pub retained_fraction: f64,
}

pub fn surrogate_vector(
    raster: &SegmentationRaster,
    cam: &ActivationRaster,
    threshold: f64,
) -> Result<MaskedCharacteristicVector> {
    check_dims(raster, cam)?;
    let labeled = raster.labels().iter().filter(|&&l| l != IGNORE).count();
    let kept = raster
        .labels()
        .iter()
        .zip(cam.values())
        .filter(|(_, &a)| a < threshold)
        .map(|(&l, _)| l);
    let (v_tilde, retained) =
        normalized_histogram(kept).ok_or_else(|| Error::domain("fully activated scene"))?;
    Ok(MaskedCharacteristicVector {
        v_tilde,
        retained_fraction: retained as f64 / labeled as f64,
    })
}
