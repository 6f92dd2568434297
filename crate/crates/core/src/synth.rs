//! Seeded synthetic corpora for tests and Monte Carlo checks.
//!
//! Randomness comes from ChaCha20 with one stream per (image, purpose), so
//! any single image can be regenerated without replaying the others and
//! parallel generation gives the same bytes as sequential generation.
//! Every float written to disk is rounded to 6 decimals first.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hazard::LogitPair;
use crate::ingest::{
    category, encode_pgm, write_accidents, write_manifest, AccidentRecord, AccidentType,
    CategoryVector, CorpusManifest, GeoPoint, ImageRecord, SegmentationRaster, Vocabulary, IGNORE,
    NUM_CATEGORIES,
};
use crate::mirror::{MirrorEntry, MirrorTarget};
use crate::scene::scene_disorder;

const METERS_PER_DEGREE: f64 = 111_195.08;

/// Disorder at which the planted hazard saturates.
const SD_REFERENCE: f64 = 0.23;

/// Relative frequency of each category among generated blobs.
const CATEGORY_WEIGHTS: [f64; NUM_CATEGORIES] = [
    6.0, 4.0, 6.0, 1.0, 1.0, 1.5, 0.5, 0.5, 4.0, 1.5, 4.0, 2.0, 0.5, 3.0, 0.8, 0.4, 0.2, 0.5, 0.6,
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub seed: u64,
    pub n_images: usize,
    pub raster_width: usize,
    pub raster_height: usize,
    /// Activation rasters are this many times coarser than segmentation.
    pub cam_factor: usize,
    pub max_blobs: usize,
    /// Share of a blob being unlabeled.
    pub ignore_rate: f64,
    /// 0 makes hazard independent of disorder, 1 makes it a function of it.
    pub coupling: f64,
    pub hazard_noise: f64,
    /// Expected accidents near an image whose hazard is 1.
    pub accident_intensity: f64,
    /// Accidents scattered uniformly over the extent, per image.
    pub background_rate: f64,
    pub center_lat: f64,
    pub center_lon: f64,
    pub extent_m: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 0,
            n_images: 200,
            raster_width: 32,
            raster_height: 32,
            cam_factor: 2,
            max_blobs: 48,
            ignore_rate: 0.02,
            coupling: 1.0,
            hazard_noise: 0.04,
            accident_intensity: 2.0,
            background_rate: 0.2,
            center_lat: 41.3851,
            center_lon: 2.1734,
            extent_m: 6000.0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.raster_width == 0 || self.raster_height == 0 || self.cam_factor == 0 {
            return Err(Error::Config("raster sizes must be positive".into()));
        }
        if !self.raster_width.is_multiple_of(self.cam_factor) || !self.raster_height.is_multiple_of(self.cam_factor) {
            return Err(Error::Config("cam_factor must divide the raster size".into()));
        }
        if self.max_blobs == 0 {
            return Err(Error::Config("max_blobs must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.coupling) {
            return Err(Error::Config("coupling must lie in [0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Purpose {
    Raster = 0,
    Hazard = 1,
    Cam = 2,
    Accidents = 3,
}

fn stream(seed: u64, index: u64, purpose: Purpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((index << 2) | purpose as u64);
    rng
}

pub fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn pick_category(rng: &mut ChaCha20Rng, ignore_rate: f64) -> u8 {
    if rng.random_bool(ignore_rate) {
        return IGNORE;
    }
    let total: f64 = CATEGORY_WEIGHTS.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (c, w) in CATEGORY_WEIGHTS.iter().enumerate() {
        if x < *w {
            return c as u8;
        }
        x -= w;
    }
    (NUM_CATEGORIES - 1) as u8
}

/// Nearest-seed partition of a `width x height` grid into `blobs` regions,
/// each with a random category. Seeds sit at pixel centers.
pub fn blob_raster(
    rng: &mut ChaCha20Rng,
    width: usize,
    height: usize,
    blobs: usize,
    ignore_rate: f64,
) -> SegmentationRaster {
    let seeds: Vec<(f64, f64, u8)> = (0..blobs.max(1))
        .map(|_| {
            (
                rng.random_range(0..width) as f64,
                rng.random_range(0..height) as f64,
                pick_category(rng, ignore_rate),
            )
        })
        .collect();
    let mut labels = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (px, py) = (x as f64, y as f64);
            let mut best = (f64::INFINITY, 0u8);
            for &(sx, sy, c) in &seeds {
                let d = (sx - px).powi(2) + (sy - py).powi(2);
                if d < best.0 {
                    best = (d, c);
                }
            }
            labels.push(best.1);
        }
    }
    SegmentationRaster::new(width, height, labels).expect("generated labels are valid")
}

/// Planted disorder level of an image, uniform in `[0, 1)`.
fn disorder_latent(rng: &mut ChaCha20Rng) -> f64 {
    rng.random()
}

/// Segmentation raster of image `index`; blob count grows with the planted
/// disorder level, so more blobs means more label transitions.
pub fn generate_raster(spec: &SynthSpec, index: usize) -> SegmentationRaster {
    let mut rng = stream(spec.seed, index as u64, Purpose::Raster);
    let u = disorder_latent(&mut rng);
    let blobs = 1 + (u * spec.max_blobs as f64) as usize;
    let blobs = blobs.min(spec.max_blobs);
    // always keep at least one labeled pixel
    let raster = blob_raster(&mut rng, spec.raster_width, spec.raster_height, blobs, spec.ignore_rate);
    if raster.labels().iter().all(|&l| l == IGNORE) {
        return SegmentationRaster::uniform(spec.raster_width, spec.raster_height, category::ROAD)
            .expect("valid");
    }
    raster
}

/// One generated observation point with its planted ground truth.
#[derive(Debug, Clone)]
pub struct SynthImage {
    pub image_id: String,
    pub location: GeoPoint,
    pub raster: SegmentationRaster,
    pub cam_p: Vec<u8>,
    pub cam_v: Vec<u8>,
    /// Pedestrian hazard as recoverable from the rounded logits.
    pub h_p: f64,
    /// Vehicle hazard as written (rounded).
    pub h_v: f64,
    pub logits_p: LogitPair,
    pub disorder: f64,
    pub accidents: Vec<(GeoPoint, AccidentType)>,
}

fn offset(center: GeoPoint, dx_m: f64, dy_m: f64) -> GeoPoint {
    let lat = center.lat() + dy_m / METERS_PER_DEGREE;
    let lon = center.lon() + dx_m / (METERS_PER_DEGREE * center.lat().to_radians().cos());
    GeoPoint::new(round6(lat), round6(lon)).expect("offsets stay within city extents")
}

fn hot_categories(t: AccidentType) -> &'static [u8] {
    use category::*;
    match t {
        AccidentType::Pedestrian => &[PERSON, RIDER, SIDEWALK, CAR, BICYCLE],
        AccidentType::Vehicle => &[CAR, TRUCK, BUS, MOTORCYCLE, ROAD],
    }
}

fn generate_cam(
    rng: &mut ChaCha20Rng,
    spec: &SynthSpec,
    raster: &SegmentationRaster,
    t: AccidentType,
    h: f64,
) -> Vec<u8> {
    let f = spec.cam_factor;
    let (cw, ch) = (spec.raster_width / f, spec.raster_height / f);
    let hot = hot_categories(t);
    let mut out = Vec::with_capacity(cw * ch);
    for cy in 0..ch {
        for cx in 0..cw {
            let label = raster.get(cx * f, cy * f);
            let base = if hot.contains(&label) { 0.35 + 0.65 * h } else { 0.1 };
            let a = (base + 0.2 * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0);
            out.push((a * 255.0).round() as u8);
        }
    }
    out
}

fn actor_share(v: &CategoryVector) -> f64 {
    use category::*;
    [PERSON, RIDER, CAR, MOTORCYCLE, BICYCLE]
        .iter()
        .map(|&c| v[c as usize])
        .sum()
}

/// Generates image `index` with all of its artifacts.
pub fn generate_image(spec: &SynthSpec, index: usize) -> SynthImage {
    let raster = generate_raster(spec, index);
    let disorder = scene_disorder(&raster).map(|d| d.value).unwrap_or(0.0);
    let area = crate::scene::area_vector(&raster).map(|a| a.v).unwrap_or([0.0; NUM_CATEGORIES]);

    let mut rng = stream(spec.seed, index as u64, Purpose::Hazard);
    let half = spec.extent_m / 2.0;
    let center = GeoPoint::new(spec.center_lat, spec.center_lon).expect("valid synth center");
    let location = offset(
        center,
        rng.random_range(-half..half),
        rng.random_range(-half..half),
    );
    let noise = Normal::new(0.0, spec.hazard_noise.max(1e-12)).expect("finite sigma");
    let sd_norm = (disorder / SD_REFERENCE).min(1.0);
    let z_shared: f64 = rng.random();
    let z_p: f64 = rng.random();
    let z_v: f64 = rng.random();
    let composition = 0.1 * (actor_share(&area) - 0.2);
    let c = spec.coupling;
    let raw_p = c * sd_norm + (1.0 - c) * (0.6 * z_shared + 0.4 * z_p) + composition + noise.sample(&mut rng);
    let raw_v = c * sd_norm + (1.0 - c) * (0.6 * z_shared + 0.4 * z_v) + noise.sample(&mut rng);
    let planted_p = raw_p.clamp(0.005, 0.995);
    let h_v = round6(raw_v.clamp(0.005, 0.995));

    let logits_p = LogitPair {
        z_safe: 0.0,
        z_danger: round6((planted_p / (1.0 - planted_p)).ln()),
    };
    let h_p = crate::hazard::hazard_index(logits_p, AccidentType::Pedestrian)
        .expect("finite logits")
        .value();

    let mut cam_rng = stream(spec.seed, index as u64, Purpose::Cam);
    let cam_p = generate_cam(&mut cam_rng, spec, &raster, AccidentType::Pedestrian, h_p);
    let cam_v = generate_cam(&mut cam_rng, spec, &raster, AccidentType::Vehicle, h_v);

    let mut acc_rng = stream(spec.seed, index as u64, Purpose::Accidents);
    let mut accidents = Vec::new();
    for (t, h, scale) in [
        (AccidentType::Pedestrian, h_p, 1.0),
        (AccidentType::Vehicle, h_v, 1.5),
    ] {
        let lambda = spec.accident_intensity * scale * h * h;
        let n = if lambda > 0.0 {
            Poisson::new(lambda).expect("positive rate").sample(&mut acc_rng) as usize
        } else {
            0
        };
        for _ in 0..n {
            let r = 60.0 * acc_rng.random::<f64>().sqrt();
            let theta = acc_rng.random::<f64>() * std::f64::consts::TAU;
            accidents.push((offset(location, r * theta.cos(), r * theta.sin()), t));
        }
    }

    SynthImage {
        image_id: image_id(index, spec.n_images),
        location,
        raster,
        cam_p,
        cam_v,
        h_p,
        h_v,
        logits_p,
        disorder,
        accidents,
    }
}

fn image_id(index: usize, n: usize) -> String {
    let width = n.max(1).to_string().len().max(6);
    format!("img{index:0width$}")
}

/// All images of a corpus, generated in parallel; order follows the index.
pub fn generate_images(spec: &SynthSpec) -> Result<Vec<SynthImage>> {
    spec.validate()?;
    Ok((0..spec.n_images)
        .into_par_iter()
        .map(|i| generate_image(spec, i))
        .collect())
}

fn background_accidents(spec: &SynthSpec) -> Vec<(GeoPoint, AccidentType)> {
    let mut rng = stream(spec.seed, u64::MAX >> 2, Purpose::Accidents);
    let n = (spec.background_rate * spec.n_images as f64).round() as usize;
    let half = spec.extent_m / 2.0;
    let center = GeoPoint::new(spec.center_lat, spec.center_lon).expect("valid synth center");
    (0..n)
        .map(|_| {
            let p = offset(
                center,
                rng.random_range(-half..half),
                rng.random_range(-half..half),
            );
            let t = if rng.random_bool(0.25) {
                AccidentType::Pedestrian
            } else {
                AccidentType::Vehicle
            };
            (p, t)
        })
        .collect()
}

/// A corpus written to disk plus its planted truth.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub manifest: CorpusManifest,
    pub images: Vec<SynthImage>,
}

/// Images plus accident records, without touching the file system.
pub fn generate_in_memory(spec: &SynthSpec) -> Result<SynthCorpus> {
    let images = generate_images(spec)?;
    let mut located: Vec<(GeoPoint, AccidentType)> = images
        .iter()
        .flat_map(|img| img.accidents.iter().copied())
        .collect();
    located.extend(background_accidents(spec));
    let width = located.len().max(1).to_string().len().max(7);
    let accidents = located
        .into_iter()
        .enumerate()
        .map(|(i, (location, accident_type))| AccidentRecord {
            accident_id: format!("acc{i:0width$}"),
            location,
            accident_type,
        })
        .collect();

    let records = images
        .iter()
        .map(|img| {
            let mut rec = ImageRecord::new(img.image_id.clone(), img.location);
            rec.seg_path = Some(PathBuf::from(format!("seg/{}.pgm", img.image_id)));
            rec.cam_p_path = Some(PathBuf::from(format!("cam_p/{}.pgm", img.image_id)));
            rec.cam_v_path = Some(PathBuf::from(format!("cam_v/{}.pgm", img.image_id)));
            rec.logits_p = Some(img.logits_p);
            rec.score_v = Some(img.h_v);
            rec
        })
        .collect();

    Ok(SynthCorpus {
        manifest: CorpusManifest {
            images: records,
            accidents,
            vocabulary: Vocabulary::default(),
            base_dir: PathBuf::new(),
        },
        images,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Writes `images.csv`, `accidents.csv` and the `seg/`, `cam_p/`, `cam_v/`
/// rasters under `out_dir`.
pub fn generate_corpus(spec: &SynthSpec, out_dir: &Path) -> Result<SynthCorpus> {
    let mut corpus = generate_in_memory(spec)?;
    for sub in ["seg", "cam_p", "cam_v"] {
        let dir = out_dir.join(sub);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    corpus.images.par_iter().try_for_each(|img| -> Result<()> {
        let (w, h) = (spec.raster_width, spec.raster_height);
        let f = spec.cam_factor;
        write_file(&out_dir.join(format!("seg/{}.pgm", img.image_id)), &img.raster.to_pgm())?;
        write_file(
            &out_dir.join(format!("cam_p/{}.pgm", img.image_id)),
            &encode_pgm(w / f, h / f, &img.cam_p),
        )?;
        write_file(
            &out_dir.join(format!("cam_v/{}.pgm", img.image_id)),
            &encode_pgm(w / f, h / f, &img.cam_v),
        )
    })?;

    let mut buf = Vec::new();
    write_manifest(&mut buf, &corpus.manifest.images)?;
    write_file(&out_dir.join("images.csv"), &buf)?;
    let mut buf = Vec::new();
    write_accidents(&mut buf, &corpus.manifest.accidents)?;
    write_file(&out_dir.join("accidents.csv"), &buf)?;

    corpus.manifest.base_dir = out_dir.to_path_buf();
    Ok(corpus)
}

/// Random point on the probability simplex (normalized exponentials).
fn random_simplex(rng: &mut ChaCha20Rng) -> CategoryVector {
    let mut v = [0.0; NUM_CATEGORIES];
    for x in v.iter_mut() {
        *x = -(1.0 - rng.random::<f64>()).ln();
    }
    let s: f64 = v.iter().sum();
    v.map(|x| x / s)
}

/// Mirror-search fixture: `n` scenes with random area vectors and hazard
/// scores drawn independently of the vectors (and of each other) from
/// `[0.05, 0.95)`. Each scene is also a target whose surrogate drops one
/// random category and renormalizes.
pub fn mirror_fixture(seed: u64, n: usize) -> (Vec<MirrorTarget>, Vec<MirrorEntry>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let width = n.max(1).to_string().len().max(6);
    let mut targets = Vec::with_capacity(n);
    let mut corpus = Vec::with_capacity(n);
    for i in 0..n {
        let v = random_simplex(&mut rng);
        let h_p = rng.random_range(0.05..0.95);
        let h_v = rng.random_range(0.05..0.95);
        let mut s = v;
        s[rng.random_range(0..NUM_CATEGORIES)] = 0.0;
        let total: f64 = s.iter().sum();
        let id = format!("m{i:0width$}");
        targets.push(MirrorTarget {
            image_id: id.clone(),
            surrogate: s.map(|x| x / total),
            h_p,
            h_v,
        });
        corpus.push(MirrorEntry {
            image_id: id,
            vector: v,
            h_p,
            h_v,
        });
    }
    (targets, corpus)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pearson(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn chacha20_matches_published_vector() {
        // first keystream word for an all-zero key and nonce
        let mut rng = ChaCha20Rng::from_seed([0u8; 32]);
        let first: u32 = rng.random();
        assert_eq!(first, 0xade0_b876);
    }

    #[test]
    fn single_blob_is_uniform() {
        let mut rng = stream(1, 0, Purpose::Raster);
        let r = blob_raster(&mut rng, 16, 16, 1, 0.0);
        assert_eq!(scene_disorder(&r).unwrap().value, 0.0);
    }

    #[test]
    fn one_blob_per_pixel_is_highly_disordered() {
        let mut rng = stream(2, 0, Purpose::Raster);
        let r = blob_raster(&mut rng, 16, 16, 256, 0.0);
        let low = blob_raster(&mut rng, 16, 16, 4, 0.0);
        let sd = scene_disorder(&r).unwrap().value;
        assert!(sd > 0.5, "{sd}");
        assert!(sd > scene_disorder(&low).unwrap().value);
    }

    #[test]
    fn rasters_are_deterministic() {
        let spec = SynthSpec::default();
        assert_eq!(generate_raster(&spec, 7), generate_raster(&spec, 7));
        assert_ne!(generate_raster(&spec, 7), generate_raster(&spec, 8));
        let other = SynthSpec { seed: 1, ..SynthSpec::default() };
        assert_ne!(generate_raster(&spec, 7), generate_raster(&other, 7));
    }

    #[test]
    fn coupling_controls_disorder_hazard_correlation() {
        for (coupling, check) in [(0.0, 0), (1.0, 1)] {
            let spec = SynthSpec { seed: 42, n_images: 2000, coupling, ..SynthSpec::default() };
            let imgs = generate_images(&spec).unwrap();
            let sd: Vec<f64> = imgs.iter().map(|i| i.disorder).collect();
            let hp: Vec<f64> = imgs.iter().map(|i| i.h_p).collect();
            let r = pearson(&sd, &hp);
            if check == 0 {
                assert!(r.abs() < 0.1, "coupling 0 gave r = {r}");
            } else {
                assert!(r > 0.8, "coupling 1 gave r = {r}");
            }
        }
    }

    #[test]
    fn corpus_round_trips_through_disk() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec { n_images: 40, ..SynthSpec::default() };
        let corpus = generate_corpus(&spec, dir.path()).unwrap();
        let images = crate::ingest::parse_manifest(std::fs::File::open(dir.path().join("images.csv")).unwrap()).unwrap();
        let accidents = crate::ingest::parse_accidents(std::fs::File::open(dir.path().join("accidents.csv")).unwrap()).unwrap();
        assert_eq!(images, corpus.manifest.images);
        assert_eq!(accidents, corpus.manifest.accidents);
        let manifest = CorpusManifest { images, accidents, vocabulary: Vocabulary::default(), base_dir: dir.path().into() };
        let report = crate::ingest::validate_corpus(&manifest, crate::ingest::Requirements::all());
        assert!(report.is_empty(), "{report}");
    }

    #[test]
    fn mirror_fixture_is_deterministic() {
        let (t1, c1) = mirror_fixture(9, 50);
        let (t2, c2) = mirror_fixture(9, 50);
        assert_eq!((t1, c1.clone()), (t2, c2));
        for e in &c1 {
            assert!((e.vector.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
