use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use streetsafe::ingest::{AccidentType, Requirements};
use streetsafe::mirror::ConstraintMode;
use streetsafe::pipeline::{run, BoundingBox, Command, RunConfig};
use streetsafe::Error;

const EXIT_DATA: u8 = 1;
const EXIT_IO: u8 = 2;
const EXIT_USAGE: u8 = 64;

/// Street hazard analysis over segmentation rasters, activation maps and
/// accident records.
#[derive(Parser, Debug)]
#[command(name = "streetsafe", version, about)]
struct Cli {
    /// JSON file with default settings; flags and HAZ_* variables override it.
    #[arg(long, global = true, env = "HAZ_CONFIG")]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, env = "HAZ_OUT")]
    out: Option<PathBuf>,

    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "HAZ_THREADS")]
    threads: Option<usize>,

    /// More log output on stderr (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Debug, Default)]
struct CorpusArgs {
    /// Directory containing images.csv and accidents.csv.
    #[arg(long, env = "HAZ_CORPUS")]
    corpus: Option<PathBuf>,
    /// Image manifest, overriding <corpus>/images.csv.
    #[arg(long, env = "HAZ_IMAGES")]
    images: Option<PathBuf>,
    /// Accident records, overriding <corpus>/accidents.csv.
    #[arg(long, env = "HAZ_ACCIDENTS")]
    accidents: Option<PathBuf>,
    /// JSON list of the 19 category names.
    #[arg(long, env = "HAZ_VOCABULARY")]
    vocabulary: Option<PathBuf>,
    /// Keep only images inside min_lat,min_lon,max_lat,max_lon.
    #[arg(long, env = "HAZ_BBOX")]
    bbox: Option<String>,
}

#[derive(Args, Debug, Default)]
struct BandArgs {
    /// Hazard below this is safe.
    #[arg(long, env = "HAZ_BAND_LO")]
    band_lo: Option<f64>,
    /// Hazard above this is dangerous.
    #[arg(long, env = "HAZ_BAND_HI")]
    band_hi: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct RadiusArgs {
    /// Labeling radius in meters.
    #[arg(long, env = "HAZ_RADIUS_M")]
    radius_m: Option<f64>,
}

#[derive(Args, Debug, Default)]
struct MaskArgs {
    /// Activation cut for the masked vector.
    #[arg(long, env = "HAZ_CAM_THRESHOLD")]
    cam_threshold: Option<f64>,
    /// Activation map used for masking: P or V.
    #[arg(long, env = "HAZ_MASK")]
    mask: Option<AccidentType>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check that every image has the artifacts the analyses need.
    Validate {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Analyses to check for: hazard, scene, fixation, mirror (default: all).
        #[arg(long, value_delimiter = ',')]
        require: Vec<String>,
    },
    /// Count accidents around every image (labels.csv).
    Label {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        radius: RadiusArgs,
    },
    /// Hazard indices and bands (scores.csv).
    Score {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        bands: BandArgs,
    },
    /// Disorder, area, fixation and masked vectors (scene.csv).
    Scene {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        mask: MaskArgs,
    },
    /// Fixation ratios of safe and dangerous scenes (radar.json).
    Radar {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        bands: BandArgs,
    },
    /// Mean disorder over the hazard plane (hexbin.csv).
    Hexbin {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Cells per axis.
        #[arg(long, env = "HAZ_GRID_N")]
        grid_n: Option<usize>,
    },
    /// Safer look-alike scenes for every target (mirrors.json).
    Mirror {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        mask: MaskArgs,
        /// Mirrors per target.
        #[arg(long, env = "HAZ_K")]
        k: Option<usize>,
        /// both: strictly safer on both axes; dummy: similarity only.
        #[arg(long, env = "HAZ_MODE")]
        mode: Option<ConstraintMode>,
    },
    /// Category flows implied by mirror results (chord.csv).
    Chord {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Mirror results (default: <out>/mirrors.json).
        #[arg(long, env = "HAZ_MIRRORS")]
        mirrors: Option<PathBuf>,
        /// JSON object mapping category names to display groups.
        #[arg(long, env = "HAZ_GROUPS")]
        groups: Option<PathBuf>,
    },
    /// Hazard points as GeoJSON (landscape.geojson).
    Landscape {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        bands: BandArgs,
        /// all, exclusive, high_p_only, high_v_only, both or neither.
        #[arg(long, env = "HAZ_FILTER")]
        filter: Option<String>,
    },
    /// Classification metrics of hazard scores against accident labels (metrics.json).
    Metrics {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        radius: RadiusArgs,
        /// Scores above this predict dangerous.
        #[arg(long, env = "HAZ_THRESHOLD")]
        threshold: Option<f64>,
    },
    /// Four-class predictions from cumulative probabilities (ordinal.csv, ordinal.json).
    Ordinal {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[command(flatten)]
        radius: RadiusArgs,
        /// CSV with image_id,p_gt_1,p_gt_2,p_gt_3.
        #[arg(long, env = "HAZ_INPUT")]
        input: Option<PathBuf>,
    },
    /// Write a seeded synthetic corpus.
    Synth {
        #[arg(long, env = "HAZ_SEED")]
        seed: Option<u64>,
        #[arg(long, env = "HAZ_N_IMAGES")]
        n_images: Option<usize>,
        /// Disorder-hazard coupling in [0,1].
        #[arg(long, env = "HAZ_COUPLING")]
        coupling: Option<f64>,
        /// Raster width and height in pixels.
        #[arg(long, env = "HAZ_RASTER_SIZE")]
        raster_size: Option<usize>,
    },
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn apply_corpus(cfg: &mut RunConfig, a: CorpusArgs) -> Result<(), Error> {
    set_opt(&mut cfg.corpus, a.corpus);
    set_opt(&mut cfg.images, a.images);
    set_opt(&mut cfg.accidents, a.accidents);
    set_opt(&mut cfg.vocabulary, a.vocabulary);
    if let Some(b) = a.bbox {
        cfg.bbox = Some(b.parse::<BoundingBox>()?);
    }
    Ok(())
}

fn apply_bands(cfg: &mut RunConfig, a: BandArgs) {
    set(&mut cfg.band_lo, a.band_lo);
    set(&mut cfg.band_hi, a.band_hi);
}

fn apply_mask(cfg: &mut RunConfig, a: MaskArgs) {
    set(&mut cfg.cam_threshold, a.cam_threshold);
    set(&mut cfg.mask, a.mask);
}

fn requirements(names: &[String]) -> Result<Requirements, Error> {
    if names.is_empty() {
        return Ok(Requirements::all());
    }
    let mut req = Requirements::default();
    for n in names {
        match n.trim() {
            "hazard" => req.hazard = true,
            "scene" => req.scene = true,
            "fixation" => req.fixation = true,
            "mirror" => req.mirror = Some(AccidentType::Pedestrian),
            other => return Err(Error::Config(format!("unknown requirement {other:?}"))),
        }
    }
    Ok(req)
}

/// Builds the effective configuration: defaults, then the config file, then
/// flags (clap already folds HAZ_* variables into the flags).
fn configure(cli: Cli) -> Result<(Command, RunConfig), Error> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_json_file(p).map_err(|e| Error::Config(e.to_string()))?,
        None => RunConfig::default(),
    };
    set(&mut cfg.out, cli.out);
    set_opt(&mut cfg.threads, cli.threads);
    let command = match cli.command {
        Cmd::Validate { corpus, require } => {
            apply_corpus(&mut cfg, corpus)?;
            Command::Validate(requirements(&require)?)
        }
        Cmd::Label { corpus, radius } => {
            apply_corpus(&mut cfg, corpus)?;
            set(&mut cfg.radius_m, radius.radius_m);
            Command::Label
        }
        Cmd::Score { corpus, bands } => {
            apply_corpus(&mut cfg, corpus)?;
            apply_bands(&mut cfg, bands);
            Command::Score
        }
        Cmd::Scene { corpus, mask } => {
            apply_corpus(&mut cfg, corpus)?;
            apply_mask(&mut cfg, mask);
            Command::Scene
        }
        Cmd::Radar { corpus, bands } => {
            apply_corpus(&mut cfg, corpus)?;
            apply_bands(&mut cfg, bands);
            Command::Radar
        }
        Cmd::Hexbin { corpus, grid_n } => {
            apply_corpus(&mut cfg, corpus)?;
            set(&mut cfg.grid_n, grid_n);
            Command::Hexbin
        }
        Cmd::Mirror { corpus, mask, k, mode } => {
            apply_corpus(&mut cfg, corpus)?;
            apply_mask(&mut cfg, mask);
            set(&mut cfg.k, k);
            set(&mut cfg.mode, mode);
            Command::Mirror
        }
        Cmd::Chord { corpus, mirrors, groups } => {
            apply_corpus(&mut cfg, corpus)?;
            set_opt(&mut cfg.mirrors, mirrors);
            set_opt(&mut cfg.groups, groups);
            Command::Chord
        }
        Cmd::Landscape { corpus, bands, filter } => {
            apply_corpus(&mut cfg, corpus)?;
            apply_bands(&mut cfg, bands);
            set(&mut cfg.landscape_filter, filter);
            Command::Landscape
        }
        Cmd::Metrics { corpus, radius, threshold } => {
            apply_corpus(&mut cfg, corpus)?;
            set(&mut cfg.radius_m, radius.radius_m);
            set(&mut cfg.threshold, threshold);
            Command::Metrics
        }
        Cmd::Ordinal { corpus, radius, input } => {
            apply_corpus(&mut cfg, corpus)?;
            set(&mut cfg.radius_m, radius.radius_m);
            set_opt(&mut cfg.ordinal_input, input);
            Command::Ordinal
        }
        Cmd::Synth { seed, n_images, coupling, raster_size } => {
            set(&mut cfg.synth.seed, seed);
            set(&mut cfg.synth.n_images, n_images);
            set(&mut cfg.synth.coupling, coupling);
            if let Some(s) = raster_size {
                cfg.synth.raster_width = s;
                cfg.synth.raster_height = s;
            }
            Command::Synth
        }
    };
    Ok((command, cfg))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => EXIT_IO,
        Error::Config(_) => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HAZ_LOG", level))
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();

    let outcome = configure(cli).and_then(|(command, cfg)| run(command, &cfg));
    match outcome {
        Ok(o) => {
            println!("{}", o.summary);
            if o.failed {
                ExitCode::from(EXIT_DATA)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
