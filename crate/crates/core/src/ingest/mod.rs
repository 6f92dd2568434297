//! Input data model and parsers: accident records, the image manifest,
//! label rasters and activation rasters.
//!
//! Nothing here touches raster files until asked; a parsed manifest only
//! carries paths, which are resolved against the manifest directory.

mod pgm;
mod records;
mod validate;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hazard::LogitPair;

pub use pgm::{decode_pgm, encode_pgm, load_activation_raster, load_label_raster, GrayImage};
pub use records::{parse_accidents, parse_manifest, write_accidents, write_manifest};
pub use validate::{validate_corpus, IssueKind, Requirements, ValidationIssue, ValidationReport};

/// Number of semantic categories in the vocabulary.
pub const NUM_CATEGORIES: usize = 19;

/// Raster value for pixels excluded from every statistic.
pub const IGNORE: u8 = 255;

/// A per-category quantity over the fixed vocabulary.
pub type CategoryVector = [f64; NUM_CATEGORIES];

/// Category ids of the default vocabulary.
pub mod category {
    pub const ROAD: u8 = 0;
    pub const SIDEWALK: u8 = 1;
    pub const BUILDING: u8 = 2;
    pub const WALL: u8 = 3;
    pub const FENCE: u8 = 4;
    pub const POLE: u8 = 5;
    pub const TRAFFIC_LIGHT: u8 = 6;
    pub const TRAFFIC_SIGN: u8 = 7;
    pub const VEGETATION: u8 = 8;
    pub const TERRAIN: u8 = 9;
    pub const SKY: u8 = 10;
    pub const PERSON: u8 = 11;
    pub const RIDER: u8 = 12;
    pub const CAR: u8 = 13;
    pub const TRUCK: u8 = 14;
    pub const BUS: u8 = 15;
    pub const TRAIN: u8 = 16;
    pub const MOTORCYCLE: u8 = 17;
    pub const BICYCLE: u8 = 18;
}

const DEFAULT_CATEGORY_NAMES: [&str; NUM_CATEGORIES] = [
    "road",
    "sidewalk",
    "building",
    "wall",
    "fence",
    "pole",
    "traffic light",
    "traffic sign",
    "vegetation",
    "terrain",
    "sky",
    "person",
    "rider",
    "car",
    "truck",
    "bus",
    "train",
    "motorcycle",
    "bicycle",
];

/// Display names for the category ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    names: Vec<String>,
}

impl Vocabulary {
    pub fn new(names: Vec<String>) -> Result<Self> {
        if names.len() != NUM_CATEGORIES {
            return Err(Error::Config(format!(
                "category vocabulary must list exactly {NUM_CATEGORIES} names, got {}",
                names.len()
            )));
        }
        Ok(Vocabulary { names })
    }

    /// Reads a JSON array of 19 category names.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let names: Vec<String> = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })?;
        Vocabulary::new(names)
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Looks up a category id by name.
    pub fn id_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            names: DEFAULT_CATEGORY_NAMES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(names: Vec<String>) -> Result<Self> {
        Vocabulary::new(names)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.names
    }
}

/// WGS84 latitude/longitude in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    lat: f64,
    lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(Error::domain(format!("latitude out of range ({lat})")));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::domain(format!("longitude out of range ({lon})")));
        }
        Ok(GeoPoint { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AccidentType {
    #[serde(rename = "P")]
    Pedestrian,
    #[serde(rename = "V")]
    Vehicle,
}

impl AccidentType {
    pub const ALL: [AccidentType; 2] = [AccidentType::Pedestrian, AccidentType::Vehicle];

    /// Single-letter code used in files.
    pub fn code(self) -> &'static str {
        match self {
            AccidentType::Pedestrian => "P",
            AccidentType::Vehicle => "V",
        }
    }

    pub fn index(self) -> usize {
        match self {
            AccidentType::Pedestrian => 0,
            AccidentType::Vehicle => 1,
        }
    }
}

impl fmt::Display for AccidentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for AccidentType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "p" | "pedestrian" => Ok(AccidentType::Pedestrian),
            "v" | "vehicle" => Ok(AccidentType::Vehicle),
            other => Err(Error::domain(format!(
                "unknown accident type {other:?} (expected P, V, pedestrian or vehicle)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccidentRecord {
    pub accident_id: String,
    pub location: GeoPoint,
    pub accident_type: AccidentType,
}

/// One street-level observation point and the artifacts derived from its image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub image_id: String,
    pub location: GeoPoint,
    pub seg_path: Option<PathBuf>,
    pub cam_p_path: Option<PathBuf>,
    pub cam_v_path: Option<PathBuf>,
    pub logits_p: Option<LogitPair>,
    pub logits_v: Option<LogitPair>,
    pub score_p: Option<f64>,
    pub score_v: Option<f64>,
}

impl ImageRecord {
    pub fn new(image_id: impl Into<String>, location: GeoPoint) -> Self {
        ImageRecord {
            image_id: image_id.into(),
            location,
            seg_path: None,
            cam_p_path: None,
            cam_v_path: None,
            logits_p: None,
            logits_v: None,
            score_p: None,
            score_v: None,
        }
    }

    pub fn cam_path(&self, t: AccidentType) -> Option<&Path> {
        match t {
            AccidentType::Pedestrian => self.cam_p_path.as_deref(),
            AccidentType::Vehicle => self.cam_v_path.as_deref(),
        }
    }

    pub fn logits(&self, t: AccidentType) -> Option<LogitPair> {
        match t {
            AccidentType::Pedestrian => self.logits_p,
            AccidentType::Vehicle => self.logits_v,
        }
    }

    pub fn score(&self, t: AccidentType) -> Option<f64> {
        match t {
            AccidentType::Pedestrian => self.score_p,
            AccidentType::Vehicle => self.score_v,
        }
    }
}

/// Row-major category labels, `IGNORE` for unlabeled pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentationRaster {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl SegmentationRaster {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("raster dimensions must be positive"));
        }
        if labels.len() != width * height {
            return Err(Error::domain(format!(
                "raster has {} labels, expected {}x{}",
                labels.len(),
                width,
                height
            )));
        }
        if let Some(&bad) = labels
            .iter()
            .find(|&&l| l as usize >= NUM_CATEGORIES && l != IGNORE)
        {
            return Err(Error::domain(format!("invalid category id {bad}")));
        }
        Ok(SegmentationRaster {
            width,
            height,
            labels,
        })
    }

    pub fn uniform(width: usize, height: usize, label: u8) -> Result<Self> {
        SegmentationRaster::new(width, height, vec![label; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn transposed(&self) -> SegmentationRaster {
        let mut labels = Vec::with_capacity(self.labels.len());
        for x in 0..self.width {
            for y in 0..self.height {
                labels.push(self.get(x, y));
            }
        }
        SegmentationRaster {
            width: self.height,
            height: self.width,
            labels,
        }
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        encode_pgm(self.width, self.height, &self.labels)
    }

    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pgm()).map_err(|e| Error::io(path, e))
    }
}

/// Row-major activation values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRaster {
    width: usize,
    height: usize,
    activation: Vec<f64>,
}

impl ActivationRaster {
    pub fn new(width: usize, height: usize, activation: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::domain("raster dimensions must be positive"));
        }
        if activation.len() != width * height {
            return Err(Error::domain(format!(
                "raster has {} values, expected {}x{}",
                activation.len(),
                width,
                height
            )));
        }
        if let Some(bad) = activation.iter().find(|a| !(0.0..=1.0).contains(*a)) {
            return Err(Error::domain(format!("activation {bad} outside [0,1]")));
        }
        Ok(ActivationRaster {
            width,
            height,
            activation,
        })
    }

    /// Dequantizes 8-bit activations as `byte / 255`.
    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        ActivationRaster::new(
            width,
            height,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    pub fn uniform(width: usize, height: usize, value: f64) -> Result<Self> {
        ActivationRaster::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.activation
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.activation[y * self.width + x]
    }

    /// Brings the raster to `width x height`. Identical sizes pass through;
    /// sizes that are integer multiples per axis are nearest-neighbor
    /// upsampled; anything else is a mismatch.
    pub fn fit_to(&self, width: usize, height: usize) -> Result<ActivationRaster> {
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        if !width.is_multiple_of(self.width) || !height.is_multiple_of(self.height) {
            return Err(Error::DimensionMismatch {
                seg_width: width,
                seg_height: height,
                cam_width: self.width,
                cam_height: self.height,
            });
        }
        let fx = width / self.width;
        let fy = height / self.height;
        let mut activation = Vec::with_capacity(width * height);
        for y in 0..height {
            let row = (y / fy) * self.width;
            activation.extend((0..width).map(|x| self.activation[row + x / fx]));
        }
        Ok(ActivationRaster {
            width,
            height,
            activation,
        })
    }
}

/// Everything the pipeline reads about one city.
#[derive(Debug, Clone)]
pub struct CorpusManifest {
    pub images: Vec<ImageRecord>,
    pub accidents: Vec<AccidentRecord>,
    pub vocabulary: Vocabulary,
    /// Directory that relative raster paths are resolved against.
    pub base_dir: PathBuf,
}

impl CorpusManifest {
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }
}
