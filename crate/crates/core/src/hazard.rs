//! Hazard index from classifier logits, inverse-frequency class weights,
//! the class-weighted cross-entropy, and hazard banding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AccidentType, ImageRecord};

/// Final-layer logits of a two-class safe/dangerous classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogitPair {
    pub z_safe: f64,
    pub z_danger: f64,
}

/// Probability that a scene is dangerous for one accident type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HazardScore {
    value: f64,
    accident_type: AccidentType,
}

impl HazardScore {
    pub fn new(value: f64, accident_type: AccidentType) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::domain(format!("hazard score {value} outside [0,1]")));
        }
        Ok(HazardScore {
            value,
            accident_type,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn accident_type(&self) -> AccidentType {
        self.accident_type
    }
}

/// Softmax probability of the dangerous class, stabilized by subtracting the
/// larger logit before exponentiating.
pub fn hazard_index(logits: LogitPair, accident_type: AccidentType) -> Result<HazardScore> {
    let LogitPair { z_safe, z_danger } = logits;
    if !z_safe.is_finite() || !z_danger.is_finite() {
        return Err(Error::domain(format!(
            "non-finite logits ({z_safe}, {z_danger})"
        )));
    }
    let m = z_safe.max(z_danger);
    let e_safe = (z_safe - m).exp();
    let e_danger = (z_danger - m).exp();
    HazardScore::new(e_danger / (e_safe + e_danger), accident_type)
}

/// Hazard of an image for one accident type: logits when present, otherwise
/// the manifest score verbatim. `None` when the image carries neither.
pub fn resolve_hazard(image: &ImageRecord, t: AccidentType) -> Option<Result<HazardScore>> {
    if let Some(logits) = image.logits(t) {
        return Some(hazard_index(logits, t));
    }
    image.score(t).map(|s| HazardScore::new(s, t))
}

/// Per-class sample counts and their ratios to the total.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetComposition {
    counts: Vec<u64>,
    total: u64,
}

impl DatasetComposition {
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::domain("dataset composition needs at least one sample"));
        }
        Ok(DatasetComposition { counts, total })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.counts
            .iter()
            .map(|&c| c as f64 / self.total as f64)
            .collect()
    }
}

/// `1 / ln(c + r)`; needs `c + r > 1` so the weight is positive.
pub fn class_weight(ratio: f64, c: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::domain(format!("class ratio {ratio} outside [0,1]")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::domain(format!("smoothing constant {c} must be positive")));
    }
    if c + ratio <= 1.0 {
        return Err(Error::domain(format!(
            "non-positive log argument regime: c + r = {}",
            c + ratio
        )));
    }
    Ok(1.0 / (c + ratio).ln())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassWeights {
    pub weights: Vec<f64>,
    pub c: f64,
}

impl ClassWeights {
    pub fn from_composition(composition: &DatasetComposition, c: f64) -> Result<Self> {
        let weights = composition
            .ratios()
            .into_iter()
            .map(|r| class_weight(r, c))
            .collect::<Result<_>>()?;
        Ok(ClassWeights { weights, c })
    }
}

/// One term of the weighted loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedSample {
    pub label: bool,
    pub prediction: f64,
    /// Weight of the sample's class.
    pub weight: f64,
}

const PREDICTION_EPS: f64 = 1e-12;

/// Class-weighted binary cross-entropy, averaged over samples, in the usual
/// negated form so it is non-negative. Predictions are clamped to
/// `[1e-12, 1 - 1e-12]`.
pub fn weighted_bce_loss(samples: &[WeightedSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::domain("loss of an empty sample set"));
    }
    let mut sum = 0.0;
    for s in samples {
        if !(s.weight > 0.0) || !s.weight.is_finite() {
            return Err(Error::domain(format!("sample weight {} must be positive", s.weight)));
        }
        if !s.prediction.is_finite() {
            return Err(Error::domain("non-finite prediction"));
        }
        let p = s.prediction.clamp(PREDICTION_EPS, 1.0 - PREDICTION_EPS);
        let ll = if s.label { p.ln() } else { (1.0 - p).ln() };
        sum += s.weight * ll;
    }
    Ok(-sum / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HazardBand {
    Safe,
    Moderate,
    Dangerous,
}

impl HazardBand {
    pub fn as_str(self) -> &'static str {
        match self {
            HazardBand::Safe => "safe",
            HazardBand::Moderate => "moderate",
            HazardBand::Dangerous => "dangerous",
        }
    }
}

/// Band thresholds: safe below `lo`, dangerous above `hi`, both strict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandThresholds {
    pub lo: f64,
    pub hi: f64,
}

impl Default for BandThresholds {
    fn default() -> Self {
        BandThresholds { lo: 0.33, hi: 0.66 }
    }
}

impl BandThresholds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(Error::Config(format!("invalid band thresholds ({lo}, {hi})")));
        }
        Ok(BandThresholds { lo, hi })
    }

    pub fn band(&self, h: f64) -> HazardBand {
        if h < self.lo {
            HazardBand::Safe
        } else if h > self.hi {
            HazardBand::Dangerous
        } else {
            HazardBand::Moderate
        }
    }
}

/// Bands a score with the default thresholds.
pub fn band(score: HazardScore) -> HazardBand {
    BandThresholds::default().band(score.value())
}
