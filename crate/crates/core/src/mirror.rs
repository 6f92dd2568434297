//! Mirror search: for a target scene, the k corpus scenes closest to its
//! masked area vector that are strictly safer on both hazard axes.
//!
//! The search is an exact linear scan. Candidates failing the hazard
//! constraints are skipped before any distance is computed; the survivors
//! go through a bounded max-heap keyed on `(distance, image_id)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{AccidentType, CategoryVector};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstraintMode {
    /// Candidates must be strictly safer for pedestrians and vehicles.
    Both,
    /// Similarity only; the dummy baseline.
    #[serde(rename = "dummy")]
    Unconstrained,
}

impl std::str::FromStr for ConstraintMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(ConstraintMode::Both),
            "dummy" | "unconstrained" => Ok(ConstraintMode::Unconstrained),
            other => Err(Error::Config(format!("unknown mirror mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MirrorQuery {
    pub target_image_id: String,
    pub k: usize,
    /// Which activation map masked the target's surrogate vector.
    pub accident_type_for_mask: AccidentType,
    pub constraint_mode: ConstraintMode,
}

impl MirrorQuery {
    pub fn new(target_image_id: impl Into<String>) -> Self {
        MirrorQuery {
            target_image_id: target_image_id.into(),
            k: DEFAULT_K,
            accident_type_for_mask: AccidentType::Pedestrian,
            constraint_mode: ConstraintMode::Both,
        }
    }
}

/// A corpus scene as seen by the search.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorEntry {
    pub image_id: String,
    pub vector: CategoryVector,
    pub h_p: f64,
    pub h_v: f64,
}

/// The scene being improved: its masked vector and its own hazards.
#[derive(Debug, Clone, PartialEq)]
pub struct MirrorTarget {
    pub image_id: String,
    pub surrogate: CategoryVector,
    pub h_p: f64,
    pub h_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MirrorCandidate {
    pub image_id: String,
    pub distance: f64,
    pub h_p: f64,
    pub h_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MirrorResult {
    pub target_image_id: String,
    pub candidates: Vec<MirrorCandidate>,
    /// Fewer than k feasible candidates existed.
    pub shortfall: bool,
}

/// Candidate-to-target hazard ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImprovementRatio {
    pub ratio_p: f64,
    pub ratio_v: f64,
}

pub fn euclidean(a: &CategoryVector, b: &CategoryVector) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

struct Ranked<'a> {
    distance: f64,
    entry: &'a MirrorEntry,
}

impl Ranked<'_> {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.distance
            .total_cmp(&other.distance)
            .then_with(|| self.entry.image_id.cmp(&other.entry.image_id))
    }
}

impl PartialEq for Ranked<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked<'_> {}

impl PartialOrd for Ranked<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

fn feasible(target: &MirrorTarget, e: &MirrorEntry, mode: ConstraintMode) -> bool {
    if e.image_id == target.image_id {
        return false;
    }
    match mode {
        ConstraintMode::Both => e.h_p < target.h_p && e.h_v < target.h_v,
        ConstraintMode::Unconstrained => true,
    }
}

fn check_vector(v: &CategoryVector, what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::domain(format!("{what} vector has non-finite entries")));
    }
    Ok(())
}

/// The k nearest feasible scenes to `target`, nearest first, ties broken by
/// ascending image id. The target itself is never returned.
pub fn find_mirrors(
    target: &MirrorTarget,
    corpus: &[MirrorEntry],
    k: usize,
    mode: ConstraintMode,
) -> Result<MirrorResult> {
    if k == 0 {
        return Err(Error::domain("k must be at least 1"));
    }
    check_vector(&target.surrogate, "target")?;
    if !target.h_p.is_finite() || !target.h_v.is_finite() {
        return Err(Error::domain(format!(
            "target {} lacks finite hazard scores",
            target.image_id
        )));
    }
    let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
    for entry in corpus.iter().filter(|e| feasible(target, e, mode)) {
        let cand = Ranked {
            distance: euclidean(&target.surrogate, &entry.vector),
            entry,
        };
        if heap.len() < k {
            heap.push(cand);
        } else if let Some(worst) = heap.peek() {
            if cand < *worst {
                heap.pop();
                heap.push(cand);
            }
        }
    }
    let candidates: Vec<MirrorCandidate> = heap
        .into_sorted_vec()
        .into_iter()
        .map(|r| MirrorCandidate {
            image_id: r.entry.image_id.clone(),
            distance: r.distance,
            h_p: r.entry.h_p,
            h_v: r.entry.h_v,
        })
        .collect();
    Ok(MirrorResult {
        target_image_id: target.image_id.clone(),
        shortfall: candidates.len() < k,
        candidates,
    })
}

/// [`find_mirrors`] without the hazard constraints.
pub fn dummy_mirrors(target: &MirrorTarget, corpus: &[MirrorEntry], k: usize) -> Result<MirrorResult> {
    find_mirrors(target, corpus, k, ConstraintMode::Unconstrained)
}

/// Runs many targets against one corpus; results keep the target order.
pub fn find_mirrors_batch(
    targets: &[MirrorTarget],
    corpus: &[MirrorEntry],
    k: usize,
    mode: ConstraintMode,
) -> Result<Vec<MirrorResult>> {
    targets
        .par_iter()
        .map(|t| find_mirrors(t, corpus, k, mode))
        .collect()
}

/// `(h_p / target_h_p, h_v / target_h_v)` for every candidate.
pub fn improvement_ratios(
    result: &MirrorResult,
    target_h_p: f64,
    target_h_v: f64,
) -> Result<Vec<ImprovementRatio>> {
    if !(target_h_p > 0.0) || !(target_h_v > 0.0) {
        return Err(Error::domain(format!(
            "improvement ratio undefined for target hazards ({target_h_p}, {target_h_v})"
        )));
    }
    Ok(result
        .candidates
        .iter()
        .map(|c| ImprovementRatio {
            ratio_p: c.h_p / target_h_p,
            ratio_v: c.h_v / target_h_v,
        })
        .collect())
}
