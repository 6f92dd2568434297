//! File-level orchestration behind the command-line tool.
//!
//! Every command reads the corpus afresh, works image-parallel inside a
//! dedicated thread pool, and reduces in image-id order. Output bytes are
//! therefore independent of the thread count.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::geolabel::{build_spatial_index, composition_report, label_points, LabeledPoint, DEFAULT_RADIUS_M};
use crate::hazard::{resolve_hazard, BandThresholds};
use crate::ingest::{
    load_activation_raster, load_label_raster, parse_accidents, parse_manifest, validate_corpus,
    AccidentType, ActivationRaster, CategoryVector, CorpusManifest, GeoPoint, ImageRecord,
    Requirements, SegmentationRaster, Vocabulary,
};
use crate::insight::{
    chord_flows, disorder_hexbin, landscape_export, radar_ratios, LandscapeFeature, LandscapeFilter,
};
use crate::metrics::{
    balanced_accuracy, confusion_from_pairs, frank_hall_compose, pr_auc, pr_curve, roc_auc, roc_curve,
    CurvePoint,
};
use crate::mirror::{find_mirrors_batch, improvement_ratios, ConstraintMode, MirrorEntry, MirrorTarget, DEFAULT_K};
use crate::round_sig9;
use crate::scene::{area_vector, fixation_profile, scene_disorder, surrogate_vector, DEFAULT_CAM_THRESHOLD};
use crate::synth::{generate_corpus, SynthSpec};

/// Latitude/longitude rectangle, inclusive on every edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl BoundingBox {
    pub fn contains(&self, p: GeoPoint) -> bool {
        (self.min_lat..=self.max_lat).contains(&p.lat()) && (self.min_lon..=self.max_lon).contains(&p.lon())
    }
}

impl FromStr for BoundingBox {
    type Err = Error;

    /// `min_lat,min_lon,max_lat,max_lon`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("bad bounding box {s:?}")))?;
        let [min_lat, min_lon, max_lat, max_lon] = parts[..] else {
            return Err(Error::Config(format!("bounding box needs 4 numbers, got {s:?}")));
        };
        if !(min_lat <= max_lat && min_lon <= max_lon) {
            return Err(Error::Config(format!("empty bounding box {s:?}")));
        }
        Ok(BoundingBox { min_lat, min_lon, max_lat, max_lon })
    }
}

/// Everything a command may need. Absent fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Directory holding `images.csv` and `accidents.csv`.
    pub corpus: Option<PathBuf>,
    pub images: Option<PathBuf>,
    pub accidents: Option<PathBuf>,
    pub out: PathBuf,
    pub radius_m: f64,
    pub cam_threshold: f64,
    pub k: usize,
    pub band_lo: f64,
    pub band_hi: f64,
    pub grid_n: usize,
    pub vocabulary: Option<PathBuf>,
    pub bbox: Option<BoundingBox>,
    pub threads: Option<usize>,
    pub mode: ConstraintMode,
    /// Activation map used to mask mirror targets.
    pub mask: AccidentType,
    pub landscape_filter: String,
    /// JSON object mapping category names to display groups.
    pub groups: Option<PathBuf>,
    /// Mirror results consumed by `chord`; defaults to `<out>/mirrors.json`.
    pub mirrors: Option<PathBuf>,
    /// Decision threshold for binary metrics.
    pub threshold: f64,
    /// Cumulative ordinal probabilities, `image_id,p_gt_1,p_gt_2,p_gt_3`.
    pub ordinal_input: Option<PathBuf>,
    pub synth: SynthSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        let bands = BandThresholds::default();
        RunConfig {
            corpus: None,
            images: None,
            accidents: None,
            out: PathBuf::from("out"),
            radius_m: DEFAULT_RADIUS_M,
            cam_threshold: DEFAULT_CAM_THRESHOLD,
            k: DEFAULT_K,
            band_lo: bands.lo,
            band_hi: bands.hi,
            grid_n: 20,
            vocabulary: None,
            bbox: None,
            threads: None,
            mode: ConstraintMode::Both,
            mask: AccidentType::Pedestrian,
            landscape_filter: "all".into(),
            groups: None,
            mirrors: None,
            threshold: 0.5,
            ordinal_input: None,
            synth: SynthSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path: path.into(), source })
    }

    pub fn bands(&self) -> Result<BandThresholds> {
        BandThresholds::new(self.band_lo, self.band_hi)
    }

    fn images_path(&self) -> Result<PathBuf> {
        match (&self.images, &self.corpus) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(dir)) => Ok(dir.join("images.csv")),
            (None, None) => Err(Error::Config("no corpus given (--corpus or --images)".into())),
        }
    }

    fn accidents_path(&self) -> Result<PathBuf> {
        match (&self.accidents, &self.corpus) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(dir)) => Ok(dir.join("accidents.csv")),
            (None, None) => Err(Error::Config("no accidents given (--corpus or --accidents)".into())),
        }
    }
}

/// Result of one command: the summary line and whether the data failed a check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub summary: String,
    pub failed: bool,
}

impl Outcome {
    fn ok(summary: String) -> Self {
        Outcome { summary, failed: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate(Requirements),
    Label,
    Score,
    Scene,
    Radar,
    Hexbin,
    Mirror,
    Chord,
    Landscape,
    Metrics,
    Ordinal,
    Synth,
}

/// Runs `command` inside a pool of `cfg.threads` workers.
pub fn run(command: Command, cfg: &RunConfig) -> Result<Outcome> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| match command {
        Command::Validate(req) => run_validate(cfg, req),
        Command::Label => run_label(cfg),
        Command::Score => run_score(cfg),
        Command::Scene => run_scene(cfg),
        Command::Radar => run_radar(cfg),
        Command::Hexbin => run_hexbin(cfg),
        Command::Mirror => run_mirror(cfg),
        Command::Chord => run_chord(cfg),
        Command::Landscape => run_landscape(cfg),
        Command::Metrics => run_metrics(cfg),
        Command::Ordinal => run_ordinal(cfg),
        Command::Synth => run_synth(cfg),
    })
}

fn num(x: f64) -> String {
    round_sig9(x).to_string()
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Loads the manifest (and accidents when asked), keeps images inside the
/// bounding box and sorts them by id.
pub fn load_corpus(cfg: &RunConfig, with_accidents: bool) -> Result<CorpusManifest> {
    let images_path = cfg.images_path()?;
    let mut images = parse_manifest(open(&images_path)?)?;
    if let Some(bbox) = cfg.bbox {
        let before = images.len();
        images.retain(|img| bbox.contains(img.location));
        info!("bounding box keeps {} of {before} images", images.len());
    }
    images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    let accidents = if with_accidents {
        parse_accidents(open(&cfg.accidents_path()?)?)?
    } else {
        Vec::new()
    };
    let vocabulary = match &cfg.vocabulary {
        Some(p) => Vocabulary::from_json_file(p)?,
        None => Vocabulary::default(),
    };
    let base_dir = images_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    info!("loaded {} images, {} accidents", images.len(), accidents.len());
    Ok(CorpusManifest { images, accidents, vocabulary, base_dir })
}

fn load_seg(m: &CorpusManifest, img: &ImageRecord) -> Result<Option<SegmentationRaster>> {
    img.seg_path
        .as_ref()
        .map(|p| load_label_raster(&m.resolve(p)))
        .transpose()
}

fn load_cam(
    m: &CorpusManifest,
    img: &ImageRecord,
    t: AccidentType,
    seg: &SegmentationRaster,
) -> Result<Option<ActivationRaster>> {
    match img.cam_path(t) {
        None => Ok(None),
        Some(p) => {
            let cam = load_activation_raster(&m.resolve(p))?;
            cam.fit_to(seg.width(), seg.height()).map(Some)
        }
    }
}

fn hazards(img: &ImageRecord) -> Result<[Option<f64>; 2]> {
    let mut out = [None, None];
    for t in AccidentType::ALL {
        out[t.index()] = resolve_hazard(img, t)
            .transpose()
            .map_err(|e| Error::Domain(format!("image {}: {e}", img.image_id)))?
            .map(|h| h.value());
    }
    Ok(out)
}

fn ensure_out(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Domain(format!("csv encoding: {e}"));
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Domain(format!("csv encoding: {e}")))?;
    write_bytes(path, &bytes)
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|source| Error::Json { path: path.into(), source })?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

fn strs(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn indexed(prefix: &str) -> impl Iterator<Item = String> + '_ {
    (0..crate::ingest::NUM_CATEGORIES).map(move |c| format!("{prefix}_{c}"))
}

fn run_validate(cfg: &RunConfig, req: Requirements) -> Result<Outcome> {
    let m = load_corpus(cfg, true)?;
    let report = validate_corpus(&m, req);
    for issue in &report.issues {
        warn!("{}: {}", issue.image_id, issue.kind);
    }
    ensure_out(cfg)?;
    write_json(&cfg.out.join("validation.json"), &json!({ "issues": report.issues }))?;
    let n = report.issues.len();
    Ok(Outcome {
        summary: if n == 0 {
            format!("validate: {} images, {} accidents, no issues", m.images.len(), m.accidents.len())
        } else {
            format!("validate: {n} issue(s) across {} images", m.images.len())
        },
        failed: n > 0,
    })
}

fn labels_for(cfg: &RunConfig, m: &CorpusManifest) -> Result<Vec<LabeledPoint>> {
    let index = build_spatial_index(&m.accidents, cfg.radius_m)?;
    label_points(&m.images, &index, cfg.radius_m)
}

fn run_label(cfg: &RunConfig) -> Result<Outcome> {
    let m = load_corpus(cfg, true)?;
    let labels = labels_for(cfg, &m)?;
    let rows: Vec<Vec<String>> = labels
        .iter()
        .map(|l| {
            vec![
                l.image_id.clone(),
                l.counts.pedestrian.to_string(),
                l.counts.vehicle.to_string(),
                l.binary(AccidentType::Pedestrian).as_str().into(),
                l.binary(AccidentType::Vehicle).as_str().into(),
                l.ordinal(AccidentType::Pedestrian).rank().to_string(),
            ]
        })
        .collect();
    ensure_out(cfg)?;
    write_csv(
        &cfg.out.join("labels.csv"),
        &strs(&["image_id", "count_p", "count_v", "binary_p", "binary_v", "ordinal_p"]),
        &rows,
    )?;
    let summary = match composition_report(&labels) {
        Ok(c) => format!(
            "label: {} images within {} m; dangerous P {:.1}%, V {:.1}%",
            c.points,
            cfg.radius_m,
            100.0 * c.pedestrian.dangerous,
            100.0 * c.vehicle.dangerous
        ),
        Err(_) => "label: no images".into(),
    };
    Ok(Outcome::ok(summary))
}

fn run_score(cfg: &RunConfig) -> Result<Outcome> {
    let m = load_corpus(cfg, false)?;
    let bands = cfg.bands()?;
    let mut rows = Vec::with_capacity(m.images.len());
    let mut scored = 0;
    for img in &m.images {
        let [hp, hv] = hazards(img)?;
        scored += usize::from(hp.is_some() && hv.is_some());
        let band = |h: Option<f64>| h.map(|h| bands.band(h).as_str().to_string()).unwrap_or_default();
        rows.push(vec![img.image_id.clone(), opt_num(hp), opt_num(hv), band(hp), band(hv)]);
    }
    ensure_out(cfg)?;
    write_csv(
        &cfg.out.join("scores.csv"),
        &strs(&["image_id", "h_p", "h_v", "band_p", "band_v"]),
        &rows,
    )?;
    Ok(Outcome::ok(format!(
        "score: {} images, {scored} with both hazards",
        m.images.len()
    )))
}

struct SceneRow {
    sd: Option<f64>,
    v: Option<CategoryVector>,
    f: [Option<CategoryVector>; 2],
    vt: Option<(CategoryVector, f64)>,
}

fn scene_row(cfg: &RunConfig, m: &CorpusManifest, img: &ImageRecord) -> Result<Option<SceneRow>> {
    let Some(seg) = load_seg(m, img)? else {
        return Ok(None);
    };
    let mut row = SceneRow {
        sd: scene_disorder(&seg).ok().map(|d| d.value),
        v: area_vector(&seg).ok().map(|a| a.v),
        f: [None, None],
        vt: None,
    };
    for t in AccidentType::ALL {
        if let Some(cam) = load_cam(m, img, t, &seg)? {
            row.f[t.index()] = fixation_profile(&seg, &cam).ok().map(|p| p.f);
            if t == cfg.mask {
                row.vt = surrogate_vector(&seg, &cam, cfg.cam_threshold)
                    .ok()
                    .map(|s| (s.v_tilde, s.retained_fraction));
            }
        }
    }
    Ok(Some(row))
}

fn with_image<T>(img: &ImageRecord, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::DimensionMismatch { .. } | Error::Domain(_) => {
            Error::Domain(format!("image {}: {e}", img.image_id))
        }
        other => other,
    })
}

fn run_scene(cfg: &RunConfig) -> Result<Outcome> {
    let m = load_corpus(cfg, false)?;
    let rows: Vec<Option<SceneRow>> = m
        .images
        .par_iter()
        .map(|img| with_image(img, scene_row(cfg, &m, img)))
        .collect::<Result<_>>()?;
    let mask = cfg.mask.code().to_ascii_lowercase();
    let mut header = strs(&["image_id", "sd"]);
    header.extend(indexed("v"));
    header.extend(indexed("f_p"));
    header.extend(indexed("f_v"));
    header.extend(indexed(&format!("vt_{mask}")));
    header.push(format!("retained_{mask}"));
    let vec_cols = |v: Option<&CategoryVector>| -> Vec<String> {
        match v {
            Some(v) => v.iter().map(|x| num(*x)).collect(),
            None => vec![String::new(); crate::ingest::NUM_CATEGORIES],
        }
    };
    let mut out = Vec::new();
    for (img, row) in m.images.iter().zip(&rows) {
        let Some(row) = row else { continue };
        let mut r = vec![img.image_id.clone(), opt_num(row.sd)];
        r.extend(vec_cols(row.v.as_ref()));
        r.extend(vec_cols(row.f[0].as_ref()));
        r.extend(vec_cols(row.f[1].as_ref()));
        r.extend(vec_cols(row.vt.as_ref().map(|x| &x.0)));
        r.push(opt_num(row.vt.map(|x| x.1)));
        out.push(r);
    }
    let skipped = m.images.len() - out.len();
    if skipped > 0 {
        warn!("{skipped} images without segmentation skipped");
    }
    ensure_out(cfg)?;
    write_csv(&cfg.out.join("scene.csv"), &header, &out)?;
    Ok(Outcome::ok(format!("scene: {} images measured, {skipped} skipped", out.len())))
}

fn run_radar(cfg: &RunConfig) -> Result<Outcome> {
    let m = load_corpus(cfg, false)?;
    let bands = cfg.bands()?;
    type Obs = [Option<(crate::scene::FixationProfile, f64)>; 2];
    let per_image: Vec<Obs> = m
        .images
        .par_iter()
        .map(|img| {
            with_image(img, (|| {
                let mut obs: Obs = [None, None];
                let hz = hazards(img)?;
                let Some(seg) = load_seg(&m, img)? else { return Ok(obs) };
                for t in AccidentType::ALL {
                    let Some(h) = hz[t.index()] else { continue };
                    if let Some(cam) = load_cam(&m, img, t, &seg)? {
                        if let Ok(p) = fixation_profile(&seg, &cam) {
                            obs[t.index()] = Some((p, h));
                        }
                    }
                }
                Ok(obs)
            })())
        })
        .collect::<Result<_>>()?;

    let mut sides = serde_json::Map::new();
    let mut parts = Vec::new();
    for t in AccidentType::ALL {
        let obs: Vec<(&crate::scene::FixationProfile, f64)> = per_image
            .iter()
            .filter_map(|o| o[t.index()].as_ref().map(|(p, h)| (p, *h)))
            .collect();
        let side = match radar_ratios(&obs, bands) {
            Ok(side) => {
                parts.push(format!("{t}: {} safe / {} dangerous", side.n_safe, side.n_dangerous));
                let categories: Vec<Value> = side
                    .ratios
                    .iter()
                    .enumerate()
                    .map(|(c, r)| {
                        json!({
                            "category": m.vocabulary.name(c),
                            "ratio_safe": r.map(|r| round_sig9(r.ratio_safe)),
                            "ratio_dangerous": r.map(|r| round_sig9(r.ratio_dangerous)),
                        })
                    })
                    .collect();
                json!({
                    "n_all": side.n_all,
                    "n_safe": side.n_safe,
                    "n_dangerous": side.n_dangerous,
                    "categories": categories,
                })
            }
            Err(e) => {
                warn!("radar {t}: {e}");
                parts.push(format!("{t}: unavailable"));
                json!({ "n_all": obs.len(), "error": e.to_string() })
            }
        };
        sides.insert(t.code().to_string(), side);
    }
    ensure_out(cfg)?;
    write_json(
        &cfg.out.join("radar.json"),
        &json!({
            "bands": { "lo": bands.lo, "hi": bands.hi },
            "types": Value::Object(sides),
        }),
    )?;
    Ok(Outcome::ok(format!("radar: {}", parts.join(", "))))
}

/// `(h_v, h_p, sd)` of every image that has a raster and both hazards.
pub fn disorder_observations(m: &CorpusManifest) -> Result<Vec<(f64, f64, f64)>> {
    let obs: Vec<Option<(f64, f64, f64)>> = m
        .images
        .par_iter()
        .map(|img| {
            with_image(img, (|| {
                let [Some(hp), Some(hv)] = hazards(img)? else { return Ok(None) };
                let Some(seg) = load_seg(m, img)? else { return Ok(None) };
                Ok(scene_disorder(&seg).ok().map(|d| (hv, hp, d.value)))
            })())
        })
        .collect::<Result<_>>()?;
    Ok(obs.into_iter().flatten().collect())
}

fn run_hexbin(cfg: &RunConfig) -> Result<Outcome> {
    let m = load_corpus(cfg, false)?;
    let obs = disorder_observations(&m)?;
    let bins = disorder_hexbin(&obs, cfg.grid_n)?;
    let rows: Vec<Vec<String>> = bins
        .cells()
        .into_iter()
        .filter(|c| c.count > 0)
        .map(|c| {
            vec![
                c.cell_v.to_string(),
                c.cell_p.to_string(),
                c.count.to_string(),
                opt_num(c.mean_sd),
            ]
        })
        .collect();
    ensure_out(cfg)?;
    write_csv(
        &cfg.out.join("hexbin.csv"),
        &strs(&["cell_v", "cell_p", "count", "mean_sd"]),
        &rows,
    )?;
    Ok(Outcome::ok(format!(
        "hexbin: {} images in {} populated cells of {}x{}",
        bins.total(),
        rows.len(),
        cfg.grid_n,
        cfg.grid_n
    )))
}

enum MirrorPrep {
    Target(MirrorTarget, f64),
    Skipped(String),
}

fn run_mirror(cfg: &RunConfig) -> Result<Outcome> {
    let m = load_corpus(cfg, false)?;
    if cfg.k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let prepared: Vec<Option<(MirrorEntry, MirrorPrep)>> = m
        .images
        .par_iter()
        .map(|img| {
            with_image(img, (|| {
                let [Some(h_p), Some(h_v)] = hazards(img)? else { return Ok(None) };
                let Some(seg) = load_seg(&m, img)? else { return Ok(None) };
                let Ok(area) = area_vector(&seg) else { return Ok(None) };
                let entry = MirrorEntry { image_id: img.image_id.clone(), vector: area.v, h_p, h_v };
                let prep = match load_cam(&m, img, cfg.mask, &seg)? {
                    None => MirrorPrep::Skipped(format!("no {} activation raster", cfg.mask)),
                    Some(cam) => match surrogate_vector(&seg, &cam, cfg.cam_threshold) {
                        Ok(s) => MirrorPrep::Target(
                            MirrorTarget {
                                image_id: img.image_id.clone(),
                                surrogate: s.v_tilde,
                                h_p,
                                h_v,
                            },
                            s.retained_fraction,
                        ),
                        Err(e) => MirrorPrep::Skipped(e.to_string()),
                    },
                };
                Ok(Some((entry, prep)))
            })())
        })
        .collect::<Result<_>>()?;

    let mut corpus = Vec::new();
    let mut targets = Vec::new();
    let mut retained = Vec::new();
    let mut skipped = Vec::new();
    for (entry, prep) in prepared.into_iter().flatten() {
        match prep {
            MirrorPrep::Target(t, r) => {
                targets.push(t);
                retained.push(r);
            }
            MirrorPrep::Skipped(reason) => skipped.push(json!({ "image_id": entry.image_id, "reason": reason })),
        }
        corpus.push(entry);
    }

    let results = find_mirrors_batch(&targets, &corpus, cfg.k, cfg.mode)?;
    let mut shortfalls = 0;
    let out: Vec<Value> = targets
        .iter()
        .zip(&results)
        .zip(&retained)
        .map(|((t, r), retained)| {
            shortfalls += usize::from(r.shortfall);
            let ratios = improvement_ratios(r, t.h_p, t.h_v).ok();
            let candidates: Vec<Value> = r
                .candidates
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let ratio = ratios.as_ref().map(|v| v[i]);
                    json!({
                        "image_id": c.image_id,
                        "distance": round_sig9(c.distance),
                        "h_p": round_sig9(c.h_p),
                        "h_v": round_sig9(c.h_v),
                        "ratio_p": ratio.map(|x| round_sig9(x.ratio_p)),
                        "ratio_v": ratio.map(|x| round_sig9(x.ratio_v)),
                    })
                })
                .collect();
            json!({
                "image_id": t.image_id,
                "h_p": round_sig9(t.h_p),
                "h_v": round_sig9(t.h_v),
                "retained_fraction": round_sig9(*retained),
                "shortfall": r.shortfall,
                "candidates": candidates,
            })
        })
        .collect();
    ensure_out(cfg)?;
    let mode = match cfg.mode {
        ConstraintMode::Both => "both",
        ConstraintMode::Unconstrained => "dummy",
    };
    write_json(
        &cfg.out.join("mirrors.json"),
        &json!({
            "k": cfg.k,
            "mode": mode,
            "mask": cfg.mask.code(),
            "cam_threshold": cfg.cam_threshold,
            "targets": out,
            "skipped": skipped,
        }),
    )?;
    Ok(Outcome::ok(format!(
        "mirror: {} targets ({mode}), {shortfalls} with fewer than {} mirrors, {} skipped",
        targets.len(),
        cfg.k,
        skipped.len()
    )))
}

#[derive(Deserialize)]
struct MirrorFile {
    targets: Vec<MirrorFileTarget>,
}

#[derive(Deserialize)]
struct MirrorFileTarget {
    image_id: String,
    candidates: Vec<MirrorFileCandidate>,
}

#[derive(Deserialize)]
struct MirrorFileCandidate {
    image_id: String,
}

fn run_chord(cfg: &RunConfig) -> Result<Outcome> {
    let path = cfg.mirrors.clone().unwrap_or_else(|| cfg.out.join("mirrors.json"));
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mirrors: MirrorFile =
        serde_json::from_str(&text).map_err(|source| Error::Json { path: path.clone(), source })?;
    let m = load_corpus(cfg, false)?;
    let groups: BTreeMap<String, String> = match &cfg.groups {
        None => BTreeMap::new(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|source| Error::Json { path: p.clone(), source })?
        }
    };
    for name in groups.keys() {
        if m.vocabulary.id_of(name).is_none() {
            return Err(Error::Config(format!("group map names unknown category {name:?}")));
        }
    }

    let mut needed: Vec<&str> = Vec::new();
    for t in &mirrors.targets {
        needed.push(&t.image_id);
        needed.extend(t.candidates.iter().map(|c| c.image_id.as_str()));
    }
    needed.sort_unstable();
    needed.dedup();
    let by_id: HashMap<&str, &ImageRecord> = m.images.iter().map(|i| (i.image_id.as_str(), i)).collect();
    let vectors: Vec<CategoryVector> = needed
        .par_iter()
        .map(|id| {
            let img = by_id
                .get(id)
                .ok_or_else(|| Error::Domain(format!("mirror file names unknown image {id}")))?;
            let seg = load_seg(&m, img)?
                .ok_or_else(|| Error::Domain(format!("image {id} has no segmentation raster")))?;
            with_image(img, area_vector(&seg)).map(|a| a.v)
        })
        .collect::<Result<_>>()?;
    let lookup: HashMap<&str, &CategoryVector> = needed.iter().copied().zip(&vectors).collect();

    let lookup = &lookup;
    let pairs = mirrors.targets.iter().flat_map(|t| {
        let from = lookup[t.image_id.as_str()];
        t.candidates.iter().map(move |c| (from, lookup[c.image_id.as_str()]))
    });
    let n_pairs = mirrors.targets.iter().map(|t| t.candidates.len()).sum::<usize>();
    let matrix = chord_flows(pairs);
    let (names, flows) = matrix.grouped(&m.vocabulary, &groups);
    let mut header = vec!["source".to_string()];
    header.extend(names.iter().cloned());
    let rows: Vec<Vec<String>> = names
        .iter()
        .zip(&flows)
        .map(|(name, row)| {
            let mut r = vec![name.clone()];
            r.extend(row.iter().map(|x| num(*x)));
            r
        })
        .collect();
    ensure_out(cfg)?;
    write_csv(&cfg.out.join("chord.csv"), &header, &rows)?;
    Ok(Outcome::ok(format!(
        "chord: {n_pairs} target-mirror pairs, total flow {}",
        num(matrix.total())
    )))
}

fn run_landscape(cfg: &RunConfig) -> Result<Outcome> {
    let m = load_corpus(cfg, false)?;
    let bands = cfg.bands()?;
    let filter: LandscapeFilter = cfg.landscape_filter.parse()?;
    let mut features = Vec::new();
    for img in &m.images {
        if let [Some(h_p), Some(h_v)] = hazards(img)? {
            features.push(LandscapeFeature {
                image_id: img.image_id.clone(),
                location: img.location,
                h_p,
                h_v,
            });
        }
    }
    let geojson = landscape_export(&features, bands, filter, round_sig9);
    let kept = geojson["features"].as_array().map_or(0, Vec::len);
    ensure_out(cfg)?;
    write_json(&cfg.out.join("landscape.geojson"), &geojson)?;
    Ok(Outcome::ok(format!(
        "landscape: {kept} of {} scored images kept ({})",
        features.len(),
        cfg.landscape_filter
    )))
}

fn curve_json(curve: &[CurvePoint], x: &str, y: &str) -> Value {
    Value::Array(
        curve
            .iter()
            .map(|p| {
                json!({
                    "threshold": p.threshold.is_finite().then(|| round_sig9(p.threshold)),
                    x: round_sig9(p.x),
                    y: round_sig9(p.y),
                })
            })
            .collect(),
    )
}

fn metrics_for(pairs: &[(bool, f64)], threshold: f64) -> Result<Value> {
    let c = confusion_from_pairs(pairs, threshold)?;
    let r = |x: Result<f64>| x.ok().map(round_sig9);
    let roc = roc_curve(pairs).ok();
    let pr = pr_curve(pairs).ok();
    Ok(json!({
        "n": pairs.len(),
        "positives": pairs.iter().filter(|p| p.0).count(),
        "confusion": { "tp": c.tp, "fp": c.fp, "tn": c.tn, "fn": c.fn_ },
        "recall": r(c.recall()),
        "precision": r(c.precision()),
        "accuracy": r(c.accuracy()),
        "f1": r(c.f1()),
        "roc_auc": r(roc_auc(pairs)),
        "pr_auc": r(pr_auc(pairs)),
        "roc": roc.map(|c| curve_json(&c, "fpr", "tpr")),
        "pr": pr.map(|c| curve_json(&c, "recall", "precision")),
    }))
}

fn run_metrics(cfg: &RunConfig) -> Result<Outcome> {
    let m = load_corpus(cfg, true)?;
    let labels = labels_for(cfg, &m)?;
    let mut per_type = serde_json::Map::new();
    let mut parts = Vec::new();
    for t in AccidentType::ALL {
        let mut pairs = Vec::new();
        for (img, l) in m.images.iter().zip(&labels) {
            if let Some(h) = hazards(img)?[t.index()] {
                pairs.push((l.counts.get(t) >= 1, h));
            }
        }
        if pairs.is_empty() {
            warn!("metrics {t}: no scored images");
            per_type.insert(t.code().into(), Value::Null);
            continue;
        }
        let v = metrics_for(&pairs, cfg.threshold)?;
        parts.push(format!(
            "{t}: n={} roc_auc={}",
            pairs.len(),
            v["roc_auc"].as_f64().map_or("n/a".into(), num)
        ));
        per_type.insert(t.code().into(), v);
    }
    ensure_out(cfg)?;
    write_json(
        &cfg.out.join("metrics.json"),
        &json!({
            "threshold": cfg.threshold,
            "radius_m": cfg.radius_m,
            "types": Value::Object(per_type),
        }),
    )?;
    Ok(Outcome::ok(format!("metrics: {}", parts.join(", "))))
}

/// Reads `image_id,p_gt_1,p_gt_2,p_gt_3`.
pub fn parse_ordinal_input<R: std::io::Read>(input: R) -> Result<Vec<(String, [f64; 3])>> {
    const HEADER: [&str; 4] = ["image_id", "p_gt_1", "p_gt_2", "p_gt_3"];
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let parse_err = |line: u64, column: &str, message: String| Error::Parse {
        context: "ordinal input".into(),
        line,
        column: column.into(),
        message,
    };
    let header = rdr.headers().map_err(|e| parse_err(1, "header", e.to_string()))?;
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(parse_err(1, "header", format!("expected `{}`", HEADER.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line()), "row", e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut p = [0.0; 3];
        for (i, slot) in p.iter_mut().enumerate() {
            let raw = rec.get(i + 1).unwrap_or("");
            *slot = raw
                .parse()
                .map_err(|_| parse_err(line, HEADER[i + 1], format!("not a number: {raw:?}")))?;
        }
        out.push((rec.get(0).unwrap_or("").to_string(), p));
    }
    Ok(out)
}

fn run_ordinal(cfg: &RunConfig) -> Result<Outcome> {
    let input = cfg
        .ordinal_input
        .as_ref()
        .ok_or_else(|| Error::Config("ordinal needs --input".into()))?;
    let mut rows_in = parse_ordinal_input(open(input)?)?;
    rows_in.sort_by(|a, b| a.0.cmp(&b.0));
    let truth: Option<HashMap<String, _>> = if cfg.corpus.is_some() || cfg.accidents.is_some() {
        let m = load_corpus(cfg, true)?;
        let labels = labels_for(cfg, &m)?;
        Some(
            labels
                .into_iter()
                .map(|l| {
                    let class = l.ordinal(AccidentType::Pedestrian);
                    (l.image_id, class)
                })
                .collect(),
        )
    } else {
        None
    };
    let mut rows = Vec::new();
    let (mut truths, mut preds) = (Vec::new(), Vec::new());
    for (id, p) in &rows_in {
        let probs = frank_hall_compose(p).map_err(|e| Error::Domain(format!("image {id}: {e}")))?;
        let predicted = probs.predicted_class().expect("four classes");
        let actual = truth.as_ref().and_then(|t| t.get(id)).copied();
        if let Some(a) = actual {
            truths.push(a);
            preds.push(predicted);
        }
        let mut r = vec![id.clone()];
        r.extend(probs.class_probs.iter().map(|x| num(*x)));
        r.push(predicted.rank().to_string());
        r.push(actual.map(|a| a.rank().to_string()).unwrap_or_default());
        rows.push(r);
    }
    let bacc = if truths.is_empty() { None } else { balanced_accuracy(&truths, &preds).ok() };
    ensure_out(cfg)?;
    write_csv(
        &cfg.out.join("ordinal.csv"),
        &strs(&["image_id", "p_1", "p_2", "p_3", "p_4", "predicted", "actual"]),
        &rows,
    )?;
    write_json(
        &cfg.out.join("ordinal.json"),
        &json!({
            "n": rows.len(),
            "n_labeled": truths.len(),
            "balanced_accuracy": bacc.map(round_sig9),
        }),
    )?;
    Ok(Outcome::ok(format!(
        "ordinal: {} images, balanced accuracy {}",
        rows.len(),
        bacc.map_or("n/a".into(), num)
    )))
}

fn run_synth(cfg: &RunConfig) -> Result<Outcome> {
    ensure_out(cfg)?;
    let corpus = generate_corpus(&cfg.synth, &cfg.out)?;
    Ok(Outcome::ok(format!(
        "synth: {} images, {} accidents written to {}",
        corpus.images.len(),
        corpus.manifest.accidents.len(),
        cfg.out.display()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bbox_parsing() {
        let b: BoundingBox = "41.3,2.1,41.4,2.2".parse().unwrap();
        assert!(b.contains(GeoPoint::new(41.35, 2.15).unwrap()));
        assert!(b.contains(GeoPoint::new(41.4, 2.2).unwrap()));
        assert!(!b.contains(GeoPoint::new(41.45, 2.15).unwrap()));
        assert!("41.3,2.1,41.4".parse::<BoundingBox>().is_err());
        assert!("41.5,2.1,41.4,2.2".parse::<BoundingBox>().is_err());
    }

    #[test]
    fn config_defaults_and_overrides() {
        let cfg: RunConfig = serde_json::from_str(r#"{"radius_m": 25, "k": 3, "mode": "dummy", "mask": "V"}"#).unwrap();
        assert_eq!(cfg.radius_m, 25.0);
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.mode, ConstraintMode::Unconstrained);
        assert_eq!(cfg.mask, AccidentType::Vehicle);
        assert_eq!(cfg.cam_threshold, 0.7);
        assert_eq!(cfg.grid_n, 20);
        assert!(serde_json::from_str::<RunConfig>(r#"{"radius": 25}"#).is_err());
    }

    #[test]
    fn ordinal_input_parsing() {
        let rows = parse_ordinal_input("image_id,p_gt_1,p_gt_2,p_gt_3\na,0.9,0.6,0.2\n".as_bytes()).unwrap();
        assert_eq!(rows, vec![("a".to_string(), [0.9, 0.6, 0.2])]);
        let err = parse_ordinal_input("image_id,p1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("header"));
        let err = parse_ordinal_input("image_id,p_gt_1,p_gt_2,p_gt_3\na,x,0.6,0.2\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }
}
