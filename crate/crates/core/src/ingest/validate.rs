use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use super::{load_activation_raster, load_label_raster, AccidentType, CorpusManifest, ImageRecord};

/// Which analyses the caller intends to run; each one needs different artifacts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Requirements {
    /// Hazard scores for both accident types.
    pub hazard: bool,
    /// A segmentation raster.
    pub scene: bool,
    /// Segmentation plus both activation rasters.
    pub fixation: bool,
    /// Segmentation, the masking activation raster, and both hazard scores.
    pub mirror: Option<AccidentType>,
}

impl Requirements {
    pub fn all() -> Self {
        Requirements {
            hazard: true,
            scene: true,
            fixation: true,
            mirror: Some(AccidentType::Pedestrian),
        }
    }

    fn needs_seg(&self) -> bool {
        self.scene || self.fixation || self.mirror.is_some()
    }

    fn needs_cam(&self, t: AccidentType) -> bool {
        self.fixation || self.mirror == Some(t)
    }

    fn needs_scores(&self) -> bool {
        self.hazard || self.mirror.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IssueKind {
    MissingSegmentation,
    MissingActivation { accident_type: AccidentType },
    MissingScore { accident_type: AccidentType },
    Unreadable { path: PathBuf, message: String },
    DimensionMismatch {
        accident_type: AccidentType,
        segmentation: (usize, usize),
        activation: (usize, usize),
    },
}

impl fmt::Display for IssueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IssueKind::MissingSegmentation => write!(f, "missing segmentation raster"),
            IssueKind::MissingActivation { accident_type } => {
                write!(f, "missing {accident_type} activation raster")
            }
            IssueKind::MissingScore { accident_type } => {
                write!(f, "missing {accident_type} score (neither logits nor score)")
            }
            IssueKind::Unreadable { path, message } => {
                write!(f, "unreadable raster {}: {message}", path.display())
            }
            IssueKind::DimensionMismatch {
                accident_type,
                segmentation,
                activation,
            } => write!(
                f,
                "{accident_type} activation {}x{} does not match segmentation {}x{}",
                activation.0, activation.1, segmentation.0, segmentation.1
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationIssue {
    pub image_id: String,
    #[serde(flatten)]
    pub kind: IssueKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.issues {
            writeln!(f, "{}: {}", issue.image_id, issue.kind)?;
        }
        Ok(())
    }
}

fn check_image(manifest: &CorpusManifest, img: &ImageRecord, req: &Requirements) -> Vec<IssueKind> {
    let mut issues = Vec::new();
    for t in AccidentType::ALL {
        if req.needs_scores() && img.logits(t).is_none() && img.score(t).is_none() {
            issues.push(IssueKind::MissingScore { accident_type: t });
        }
    }
    if !req.needs_seg() {
        return issues;
    }
    let seg = match &img.seg_path {
        None => {
            issues.push(IssueKind::MissingSegmentation);
            None
        }
        Some(p) => {
            let path = manifest.resolve(p);
            match load_label_raster(&path) {
                Ok(r) => Some(r),
                Err(e) => {
                    issues.push(IssueKind::Unreadable {
                        path,
                        message: e.to_string(),
                    });
                    None
                }
            }
        }
    };
    for t in AccidentType::ALL {
        if !req.needs_cam(t) {
            continue;
        }
        let Some(p) = img.cam_path(t) else {
            issues.push(IssueKind::MissingActivation { accident_type: t });
            continue;
        };
        let path = manifest.resolve(p);
        match load_activation_raster(&path) {
            Err(e) => issues.push(IssueKind::Unreadable {
                path,
                message: e.to_string(),
            }),
            Ok(cam) => {
                if let Some(seg) = &seg {
                    if cam.fit_to(seg.width(), seg.height()).is_err() {
                        issues.push(IssueKind::DimensionMismatch {
                            accident_type: t,
                            segmentation: (seg.width(), seg.height()),
                            activation: (cam.width(), cam.height()),
                        });
                    }
                }
            }
        }
    }
    issues
}

/// Lists every artifact an image lacks for the requested analyses, plus
/// rasters that fail to load or cannot be paired. Never fails; callers
/// decide whether a non-empty report is fatal.
pub fn validate_corpus(manifest: &CorpusManifest, req: Requirements) -> ValidationReport {
    let per_image: Vec<Vec<ValidationIssue>> = manifest
        .images
        .par_iter()
        .map(|img| {
            check_image(manifest, img, &req)
                .into_iter()
                .map(|kind| ValidationIssue {
                    image_id: img.image_id.clone(),
                    kind,
                })
                .collect()
        })
        .collect();
    let mut issues: Vec<ValidationIssue> = per_image.into_iter().flatten().collect();
    issues.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    ValidationReport { issues }
}
