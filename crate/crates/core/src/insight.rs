//! Corpus-level aggregates: fixation radar ratios, disorder over the
//! hazard plane, category flows implied by mirror interventions, and the
//! hazard landscape as GeoJSON.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::hazard::{BandThresholds, HazardBand};
use crate::ingest::{CategoryVector, GeoPoint, Vocabulary, NUM_CATEGORIES};
use crate::scene::FixationProfile;

/// Fixation ratios of one category for one accident type. `None` when the
/// category receives no fixation anywhere in the corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadarRatios {
    pub ratio_safe: f64,
    pub ratio_dangerous: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadarSide {
    pub n_all: usize,
    pub n_safe: usize,
    pub n_dangerous: usize,
    pub ratios: Vec<Option<RadarRatios>>,
}

/// Mean fixation in the safe and dangerous subsets relative to the mean over
/// all images. Moderate images count toward the global mean only.
pub fn radar_ratios(
    observations: &[(&FixationProfile, f64)],
    bands: BandThresholds,
) -> Result<RadarSide> {
    if observations.is_empty() {
        return Err(Error::domain("radar of an empty corpus"));
    }
    let mut sum_all = [0.0; NUM_CATEGORIES];
    let mut sum_safe = [0.0; NUM_CATEGORIES];
    let mut sum_danger = [0.0; NUM_CATEGORIES];
    let (mut n_safe, mut n_danger) = (0usize, 0usize);
    for (profile, h) in observations {
        let band = bands.band(*h);
        for c in 0..NUM_CATEGORIES {
            sum_all[c] += profile.f[c];
            match band {
                HazardBand::Safe => sum_safe[c] += profile.f[c],
                HazardBand::Dangerous => sum_danger[c] += profile.f[c],
                HazardBand::Moderate => {}
            }
        }
        match band {
            HazardBand::Safe => n_safe += 1,
            HazardBand::Dangerous => n_danger += 1,
            HazardBand::Moderate => {}
        }
    }
    if n_safe == 0 {
        return Err(Error::domain("radar: safe subset is empty"));
    }
    if n_danger == 0 {
        return Err(Error::domain("radar: dangerous subset is empty"));
    }
    let n_all = observations.len();
    let ratios = (0..NUM_CATEGORIES)
        .map(|c| {
            let mean_all = sum_all[c] / n_all as f64;
            (mean_all > 0.0).then(|| RadarRatios {
                ratio_safe: (sum_safe[c] / n_safe as f64) / mean_all,
                ratio_dangerous: (sum_danger[c] / n_danger as f64) / mean_all,
            })
        })
        .collect();
    Ok(RadarSide {
        n_all,
        n_safe,
        n_dangerous: n_danger,
        ratios,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HexbinCell {
    pub cell_v: usize,
    pub cell_p: usize,
    pub count: usize,
    pub mean_sd: Option<f64>,
}

/// Square grid over `(H_V, H_P)` with per-cell image counts and mean disorder.
#[derive(Debug, Clone, PartialEq)]
pub struct DisorderHazardBins {
    grid_n: usize,
    counts: Vec<usize>,
    sd_sums: Vec<f64>,
}

impl DisorderHazardBins {
    pub fn grid_n(&self) -> usize {
        self.grid_n
    }

    fn at(&self, cell_v: usize, cell_p: usize) -> usize {
        cell_v * self.grid_n + cell_p
    }

    pub fn count(&self, cell_v: usize, cell_p: usize) -> usize {
        self.counts[self.at(cell_v, cell_p)]
    }

    pub fn mean_sd(&self, cell_v: usize, cell_p: usize) -> Option<f64> {
        let i = self.at(cell_v, cell_p);
        (self.counts[i] > 0).then(|| self.sd_sums[i] / self.counts[i] as f64)
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// Every cell in `(cell_v, cell_p)` row-major order.
    pub fn cells(&self) -> Vec<HexbinCell> {
        let mut out = Vec::with_capacity(self.counts.len());
        for cell_v in 0..self.grid_n {
            for cell_p in 0..self.grid_n {
                out.push(HexbinCell {
                    cell_v,
                    cell_p,
                    count: self.count(cell_v, cell_p),
                    mean_sd: self.mean_sd(cell_v, cell_p),
                });
            }
        }
        out
    }
}

/// Cell index of a unit-interval value; the last cell is closed.
pub fn bin_index(x: f64, grid_n: usize) -> usize {
    ((x * grid_n as f64).floor().max(0.0) as usize).min(grid_n - 1)
}

/// Bins `(h_v, h_p, sd)` observations.
pub fn disorder_hexbin(observations: &[(f64, f64, f64)], grid_n: usize) -> Result<DisorderHazardBins> {
    if grid_n == 0 {
        return Err(Error::domain("grid size must be positive"));
    }
    let mut bins = DisorderHazardBins {
        grid_n,
        counts: vec![0; grid_n * grid_n],
        sd_sums: vec![0.0; grid_n * grid_n],
    };
    for &(h_v, h_p, sd) in observations {
        for x in [h_v, h_p, sd] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::domain(format!("hexbin value {x} outside [0,1]")));
            }
        }
        let i = bins.at(bin_index(h_v, grid_n), bin_index(h_p, grid_n));
        bins.counts[i] += 1;
        bins.sd_sums[i] += sd;
    }
    Ok(bins)
}

/// Aggregated category-to-category area flows.
#[derive(Debug, Clone, PartialEq)]
pub struct ChordMatrix {
    pub flow: Vec<Vec<f64>>,
}

impl Default for ChordMatrix {
    fn default() -> Self {
        ChordMatrix {
            flow: vec![vec![0.0; NUM_CATEGORIES]; NUM_CATEGORIES],
        }
    }
}

impl ChordMatrix {
    /// Adds the flows of one target-to-mirror change. Every losing category
    /// sends its lost area to the gaining categories in proportion to their
    /// gains. Returns the mass moved.
    pub fn add_pair(&mut self, from: &CategoryVector, to: &CategoryVector) -> f64 {
        let delta: Vec<f64> = from.iter().zip(to).map(|(a, b)| b - a).collect();
        let gain: f64 = delta.iter().filter(|d| **d > 0.0).sum();
        if !(gain > 0.0) {
            return 0.0;
        }
        let mut moved = 0.0;
        for (s, &ds) in delta.iter().enumerate() {
            if ds >= 0.0 {
                continue;
            }
            for (t, &dt) in delta.iter().enumerate() {
                if dt > 0.0 {
                    let f = -ds * dt / gain;
                    self.flow[s][t] += f;
                    moved += f;
                }
            }
        }
        moved
    }

    pub fn total(&self) -> f64 {
        self.flow.iter().flatten().sum()
    }

    /// Collapses categories into named groups. Categories absent from
    /// `groups` keep their own name; group order follows first appearance
    /// in category order.
    pub fn grouped(
        &self,
        vocabulary: &Vocabulary,
        groups: &BTreeMap<String, String>,
    ) -> (Vec<String>, Vec<Vec<f64>>) {
        let label = |c: usize| {
            let name = vocabulary.name(c);
            groups.get(name).cloned().unwrap_or_else(|| name.to_string())
        };
        let mut names: Vec<String> = Vec::new();
        let mut slot = Vec::with_capacity(NUM_CATEGORIES);
        for c in 0..NUM_CATEGORIES {
            let l = label(c);
            let i = match names.iter().position(|n| *n == l) {
                Some(i) => i,
                None => {
                    names.push(l);
                    names.len() - 1
                }
            };
            slot.push(i);
        }
        let mut m = vec![vec![0.0; names.len()]; names.len()];
        for s in 0..NUM_CATEGORIES {
            for t in 0..NUM_CATEGORIES {
                m[slot[s]][slot[t]] += self.flow[s][t];
            }
        }
        (names, m)
    }
}

/// Accumulates [`ChordMatrix::add_pair`] over intervention pairs.
pub fn chord_flows<'a>(
    pairs: impl IntoIterator<Item = (&'a CategoryVector, &'a CategoryVector)>,
) -> ChordMatrix {
    let mut m = ChordMatrix::default();
    for (from, to) in pairs {
        m.add_pair(from, to);
    }
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Selector {
    HighPOnly,
    HighVOnly,
    Both,
    Neither,
}

impl Selector {
    /// High means `H >= hi` (0.66 by default).
    pub fn classify(h_p: f64, h_v: f64, hi: f64) -> Selector {
        match (h_p >= hi, h_v >= hi) {
            (true, false) => Selector::HighPOnly,
            (false, true) => Selector::HighVOnly,
            (true, true) => Selector::Both,
            (false, false) => Selector::Neither,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Selector::HighPOnly => "high_p_only",
            Selector::HighVOnly => "high_v_only",
            Selector::Both => "both",
            Selector::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandscapeFeature {
    pub image_id: String,
    pub location: GeoPoint,
    pub h_p: f64,
    pub h_v: f64,
}

/// Which features a landscape export keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LandscapeFilter {
    #[default]
    All,
    /// Points hazardous for exactly one accident type.
    Exclusive,
    Only(Selector),
}

impl std::str::FromStr for LandscapeFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => LandscapeFilter::All,
            "exclusive" => LandscapeFilter::Exclusive,
            "high_p_only" => LandscapeFilter::Only(Selector::HighPOnly),
            "high_v_only" => LandscapeFilter::Only(Selector::HighVOnly),
            "both" => LandscapeFilter::Only(Selector::Both),
            "neither" => LandscapeFilter::Only(Selector::Neither),
            other => return Err(Error::Config(format!("unknown landscape filter {other:?}"))),
        })
    }
}

impl LandscapeFilter {
    fn keeps(self, s: Selector) -> bool {
        match self {
            LandscapeFilter::All => true,
            LandscapeFilter::Exclusive => matches!(s, Selector::HighPOnly | Selector::HighVOnly),
            LandscapeFilter::Only(want) => s == want,
        }
    }
}

/// Point features for every kept image as an RFC 7946 FeatureCollection.
/// `round` is applied to every float property before emission.
pub fn landscape_export(
    features: &[LandscapeFeature],
    bands: BandThresholds,
    filter: LandscapeFilter,
    round: impl Fn(f64) -> f64,
) -> Value {
    let features: Vec<Value> = features
        .iter()
        .filter_map(|f| {
            let selector = Selector::classify(f.h_p, f.h_v, bands.hi);
            filter.keeps(selector).then(|| {
                json!({
                    "type": "Feature",
                    "geometry": {
                        "type": "Point",
                        "coordinates": [round(f.location.lon()), round(f.location.lat())],
                    },
                    "properties": {
                        "image_id": f.image_id,
                        "h_p": round(f.h_p),
                        "h_v": round(f.h_v),
                        "selector": selector.as_str(),
                        "band_p": bands.band(f.h_p).as_str(),
                        "band_v": bands.band(f.h_v).as_str(),
                    },
                })
            })
        })
        .collect();
    json!({ "type": "FeatureCollection", "features": features })
}
