//! Radius labeling of image points against geolocated accidents.
//!
//! Accidents are bucketed into a latitude/longitude grid whose cells are at
//! least one query radius wide, so every accident within the radius of a
//! point lies in the 3x3 block of cells around it. Candidates from that block
//! are then filtered by exact great-circle distance.

use std::collections::HashMap;
use std::ops::Range;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ingest::{AccidentRecord, AccidentType, GeoPoint, ImageRecord};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Default labeling radius in meters.
pub const DEFAULT_RADIUS_M: f64 = 50.0;

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat().to_radians(), b.lat().to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon() - a.lon()).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

type CellKey = (i64, i64);

#[derive(Debug, Clone, Default)]
struct Grid {
    accidents: Vec<AccidentRecord>,
    cells: HashMap<CellKey, Range<usize>>,
}

/// Grid-bucketed accidents, one partition per accident type.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    radius_m: f64,
    lat_step: f64,
    lon_step: f64,
    partitions: [Grid; 2],
}

impl SpatialIndex {
    /// Builds an index able to answer queries of up to `radius_m` meters.
    pub fn build(accidents: &[AccidentRecord], radius_m: f64) -> Result<Self> {
        if !(radius_m > 0.0) || !radius_m.is_finite() {
            return Err(Error::domain(format!("radius {radius_m} must be positive")));
        }
        // A point within r of a query differs in latitude by at most r / R
        // radians. Small slack keeps rounding from shrinking the cell below r.
        let slack = 1.0 + 1e-9;
        let lat_step = (radius_m / EARTH_RADIUS_M).to_degrees() * slack;
        let max_abs_lat = accidents
            .iter()
            .map(|a| a.location.lat().abs())
            .fold(0.0, f64::max);
        // Candidates of any query sit at most one lat_step beyond the corpus.
        let phi = (max_abs_lat + lat_step).min(90.0).to_radians();
        let s = (radius_m / (2.0 * EARTH_RADIUS_M)).sin() / phi.cos();
        let lon_step = if s.is_finite() && s < 1.0 {
            (2.0 * s.asin()).to_degrees() * slack
        } else {
            360.0
        };

        let mut index = SpatialIndex {
            radius_m,
            lat_step,
            lon_step,
            partitions: [Grid::default(), Grid::default()],
        };
        for t in AccidentType::ALL {
            let mut keyed: Vec<(CellKey, &AccidentRecord)> = accidents
                .iter()
                .filter(|a| a.accident_type == t)
                .map(|a| (index.cell_of(a.location), a))
                .collect();
            keyed.sort_by_key(|(k, _)| *k);
            let grid = &mut index.partitions[t.index()];
            let mut start = 0;
            for (i, (key, acc)) in keyed.iter().enumerate() {
                grid.accidents.push((*acc).clone());
                let last = i + 1 == keyed.len() || keyed[i + 1].0 != *key;
                if last {
                    grid.cells.insert(*key, start..i + 1);
                    start = i + 1;
                }
            }
        }
        Ok(index)
    }

    pub fn radius_m(&self) -> f64 {
        self.radius_m
    }

    pub fn len(&self) -> usize {
        self.partitions.iter().map(|g| g.accidents.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell_of(&self, p: GeoPoint) -> CellKey {
        (
            (p.lat() / self.lat_step).floor() as i64,
            (p.lon() / self.lon_step).floor() as i64,
        )
    }

    fn check_radius(&self, radius_m: f64) -> Result<()> {
        if !(radius_m >= 0.0) || radius_m > self.radius_m {
            return Err(Error::domain(format!(
                "query radius {radius_m} exceeds index radius {}",
                self.radius_m
            )));
        }
        Ok(())
    }

    fn for_each_within<'a>(
        &'a self,
        t: AccidentType,
        center: GeoPoint,
        radius_m: f64,
        mut visit: impl FnMut(&'a AccidentRecord),
    ) {
        let grid = &self.partitions[t.index()];
        if grid.accidents.is_empty() {
            return;
        }
        let (ci, cj) = self.cell_of(center);
        for di in -1..=1 {
            for dj in -1..=1 {
                let Some(range) = grid.cells.get(&(ci + di, cj + dj)) else {
                    continue;
                };
                for acc in &grid.accidents[range.clone()] {
                    if haversine_m(center, acc.location) <= radius_m {
                        visit(acc);
                    }
                }
            }
        }
    }

    /// Accidents of every type within `radius_m` (closed ball) of `center`,
    /// in no particular order.
    pub fn query(&self, center: GeoPoint, radius_m: f64) -> Result<Vec<&AccidentRecord>> {
        self.check_radius(radius_m)?;
        let mut out = Vec::new();
        for t in AccidentType::ALL {
            self.for_each_within(t, center, radius_m, |a| out.push(a));
        }
        Ok(out)
    }

    pub fn count_within(&self, center: GeoPoint, radius_m: f64) -> Result<TypeCounts> {
        self.check_radius(radius_m)?;
        let mut counts = TypeCounts::default();
        for t in AccidentType::ALL {
            let mut n = 0u32;
            self.for_each_within(t, center, radius_m, |_| n += 1);
            counts.set(t, n);
        }
        Ok(counts)
    }
}

/// Builds a [`SpatialIndex`]; see [`SpatialIndex::build`].
pub fn build_spatial_index(accidents: &[AccidentRecord], radius_m: f64) -> Result<SpatialIndex> {
    SpatialIndex::build(accidents, radius_m)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct TypeCounts {
    pub pedestrian: u32,
    pub vehicle: u32,
}

impl TypeCounts {
    pub fn get(&self, t: AccidentType) -> u32 {
        match t {
            AccidentType::Pedestrian => self.pedestrian,
            AccidentType::Vehicle => self.vehicle,
        }
    }

    fn set(&mut self, t: AccidentType, n: u32) {
        match t {
            AccidentType::Pedestrian => self.pedestrian = n,
            AccidentType::Vehicle => self.vehicle = n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BinaryLabel {
    Dangerous,
    Safe,
}

impl BinaryLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            BinaryLabel::Dangerous => "dangerous",
            BinaryLabel::Safe => "safe",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledPoint {
    pub image_id: String,
    pub counts: TypeCounts,
    pub radius_m: f64,
}

impl LabeledPoint {
    /// Dangerous iff at least one accident of that type lies within the radius.
    pub fn binary(&self, t: AccidentType) -> BinaryLabel {
        if self.counts.get(t) >= 1 {
            BinaryLabel::Dangerous
        } else {
            BinaryLabel::Safe
        }
    }

    pub fn ordinal(&self, t: AccidentType) -> OrdinalClass {
        ordinal_bin(self.counts.get(t))
    }
}

/// Counts accidents of each type within `radius_m` of every image.
/// Output order follows the input order.
pub fn label_points(
    images: &[ImageRecord],
    index: &SpatialIndex,
    radius_m: f64,
) -> Result<Vec<LabeledPoint>> {
    index.check_radius(radius_m)?;
    images
        .par_iter()
        .map(|img| {
            Ok(LabeledPoint {
                image_id: img.image_id.clone(),
                counts: index.count_within(img.location, radius_m)?,
                radius_m,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum OrdinalClass {
    NoDanger = 1,
    MildDanger = 2,
    Danger = 3,
    HighDanger = 4,
}

impl OrdinalClass {
    pub const ALL: [OrdinalClass; 4] = [
        OrdinalClass::NoDanger,
        OrdinalClass::MildDanger,
        OrdinalClass::Danger,
        OrdinalClass::HighDanger,
    ];

    /// 1-based rank.
    pub fn rank(self) -> u8 {
        self as u8
    }

    pub fn from_rank(rank: u8) -> Option<Self> {
        OrdinalClass::ALL.get(usize::from(rank).checked_sub(1)?).copied()
    }
}

/// 0 → NoDanger, 1 → MildDanger, 2..=5 → Danger, more → HighDanger.
pub fn ordinal_bin(count: u32) -> OrdinalClass {
    match count {
        0 => OrdinalClass::NoDanger,
        1 => OrdinalClass::MildDanger,
        2..=5 => OrdinalClass::Danger,
        _ => OrdinalClass::HighDanger,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassSplit {
    pub dangerous: f64,
    pub safe: f64,
}

/// Fraction of points with and without accidents, per type.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositionReport {
    pub points: usize,
    pub pedestrian: ClassSplit,
    pub vehicle: ClassSplit,
}

pub fn composition_report(labels: &[LabeledPoint]) -> Result<CompositionReport> {
    if labels.is_empty() {
        return Err(Error::domain("composition of an empty label set"));
    }
    let n = labels.len();
    let split = |t: AccidentType| {
        let dangerous = labels
            .iter()
            .filter(|l| l.binary(t) == BinaryLabel::Dangerous)
            .count();
        ClassSplit {
            dangerous: dangerous as f64 / n as f64,
            safe: (n - dangerous) as f64 / n as f64,
        }
    };
    Ok(CompositionReport {
        points: n,
        pedestrian: split(AccidentType::Pedestrian),
        vehicle: split(AccidentType::Vehicle),
    })
}
