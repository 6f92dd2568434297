use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::hazard::LogitPair;

use super::{AccidentRecord, AccidentType, GeoPoint, ImageRecord};

const ACCIDENT_HEADER: [&str; 4] = ["accident_id", "lat", "lon", "type"];

const MANIFEST_HEADER: [&str; 12] = [
    "image_id",
    "lat",
    "lon",
    "seg_path",
    "cam_p_path",
    "cam_v_path",
    "logit_safe_p",
    "logit_danger_p",
    "logit_safe_v",
    "logit_danger_v",
    "score_p",
    "score_v",
];

fn parse_err(context: &str, line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        context: context.to_string(),
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

fn csv_err(context: &str, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(context, e),
        kind => parse_err(context, line, "-", format!("{kind:?}")),
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(input)
}

fn check_header<R: Read>(
    rdr: &mut csv::Reader<R>,
    expected: &[&str],
    context: &str,
) -> Result<()> {
    let headers = rdr.headers().map_err(|e| csv_err(context, e))?;
    let found: Vec<&str> = headers.iter().map(str::trim).collect();
    if found != expected {
        return Err(parse_err(
            context,
            1,
            "header",
            format!("expected `{}`, found `{}`", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    line: u64,
    context: &'a str,
}

impl Row<'_> {
    fn field(&self, idx: usize) -> &str {
        self.record.get(idx).unwrap_or("").trim()
    }

    fn required(&self, idx: usize, name: &str) -> Result<&str> {
        let v = self.field(idx);
        if v.is_empty() {
            return Err(parse_err(self.context, self.line, name, "missing value"));
        }
        Ok(v)
    }

    fn float(&self, idx: usize, name: &str) -> Result<f64> {
        let raw = self.required(idx, name)?;
        raw.parse::<f64>()
            .map_err(|_| parse_err(self.context, self.line, name, format!("not a number: {raw:?}")))
    }

    fn optional_float(&self, idx: usize, name: &str) -> Result<Option<f64>> {
        if self.field(idx).is_empty() {
            Ok(None)
        } else {
            self.float(idx, name).map(Some)
        }
    }

    fn optional_path(&self, idx: usize) -> Option<PathBuf> {
        let v = self.field(idx);
        (!v.is_empty()).then(|| PathBuf::from(v))
    }

    fn location(&self) -> Result<GeoPoint> {
        let lat = self.float(1, "lat")?;
        let lon = self.float(2, "lon")?;
        if !(-90.0..=90.0).contains(&lat) || !lat.is_finite() {
            return Err(Error::OutOfRange {
                what: "latitude",
                value: lat,
                line: self.line,
            });
        }
        if !(-180.0..=180.0).contains(&lon) || !lon.is_finite() {
            return Err(Error::OutOfRange {
                what: "longitude",
                value: lon,
                line: self.line,
            });
        }
        GeoPoint::new(lat, lon)
    }
}

/// Parses `accidents.csv` (`accident_id,lat,lon,type`).
pub fn parse_accidents<R: Read>(input: R) -> Result<Vec<AccidentRecord>> {
    const CTX: &str = "accidents";
    let mut rdr = reader(input);
    check_header(&mut rdr, &ACCIDENT_HEADER, CTX)?;

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(|e| csv_err(CTX, e))? {
        let row = Row {
            record: &record,
            line: record.position().map_or(0, |p| p.line()),
            context: CTX,
        };
        let accident_id = row.required(0, "accident_id")?.to_string();
        let location = row.location()?;
        let accident_type = row
            .required(3, "type")?
            .parse::<AccidentType>()
            .map_err(|e| parse_err(CTX, row.line, "type", e.to_string()))?;
        if !seen.insert(accident_id.clone()) {
            return Err(parse_err(
                CTX,
                row.line,
                "accident_id",
                format!("duplicate accident_id {accident_id:?}"),
            ));
        }
        out.push(AccidentRecord {
            accident_id,
            location,
            accident_type,
        });
    }
    Ok(out)
}

/// Writes records in the format read by [`parse_accidents`]. Coordinates use
/// the shortest representation that parses back to the same value.
pub fn write_accidents<W: Write>(output: W, records: &[AccidentRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(output);
    let io = |e: csv::Error| csv_err("accidents", e);
    wtr.write_record(ACCIDENT_HEADER).map_err(io)?;
    for r in records {
        wtr.write_record([
            r.accident_id.as_str(),
            &r.location.lat().to_string(),
            &r.location.lon().to_string(),
            r.accident_type.code(),
        ])
        .map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("accidents", e))
}

fn logit_pair(row: &Row<'_>, safe_idx: usize, danger_idx: usize) -> Result<Option<LogitPair>> {
    let safe_name = MANIFEST_HEADER[safe_idx];
    let danger_name = MANIFEST_HEADER[danger_idx];
    match (
        row.optional_float(safe_idx, safe_name)?,
        row.optional_float(danger_idx, danger_name)?,
    ) {
        (None, None) => Ok(None),
        (Some(z_safe), Some(z_danger)) => {
            if !z_safe.is_finite() || !z_danger.is_finite() {
                return Err(parse_err(row.context, row.line, safe_name, "logits must be finite"));
            }
            Ok(Some(LogitPair { z_safe, z_danger }))
        }
        (Some(_), None) => Err(parse_err(row.context, row.line, danger_name, "logit pair is incomplete")),
        (None, Some(_)) => Err(parse_err(row.context, row.line, safe_name, "logit pair is incomplete")),
    }
}

fn unit_score(row: &Row<'_>, idx: usize) -> Result<Option<f64>> {
    let name = MANIFEST_HEADER[idx];
    let v = row.optional_float(idx, name)?;
    if let Some(s) = v {
        if !(0.0..=1.0).contains(&s) {
            return Err(parse_err(row.context, row.line, name, format!("score outside [0,1]: {s}")));
        }
    }
    Ok(v)
}

/// Parses `images.csv`. Raster paths are kept as written; no file is opened.
pub fn parse_manifest<R: Read>(input: R) -> Result<Vec<ImageRecord>> {
    const CTX: &str = "images";
    let mut rdr = reader(input);
    check_header(&mut rdr, &MANIFEST_HEADER, CTX)?;

    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record).map_err(|e| csv_err(CTX, e))? {
        let row = Row {
            record: &record,
            line: record.position().map_or(0, |p| p.line()),
            context: CTX,
        };
        let image_id = row.required(0, "image_id")?.to_string();
        if !seen.insert(image_id.clone()) {
            return Err(parse_err(
                CTX,
                row.line,
                "image_id",
                format!("duplicate image_id {image_id:?}"),
            ));
        }
        let mut img = ImageRecord::new(image_id, row.location()?);
        img.seg_path = row.optional_path(3);
        img.cam_p_path = row.optional_path(4);
        img.cam_v_path = row.optional_path(5);
        img.logits_p = logit_pair(&row, 6, 7)?;
        img.logits_v = logit_pair(&row, 8, 9)?;
        img.score_p = unit_score(&row, 10)?;
        img.score_v = unit_score(&row, 11)?;
        out.push(img);
    }
    Ok(out)
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_path(p: &Option<PathBuf>) -> String {
    p.as_ref()
        .map(|p| p.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Writes records in the format read by [`parse_manifest`].
pub fn write_manifest<W: Write>(output: W, images: &[ImageRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(output);
    let io = |e: csv::Error| csv_err("images", e);
    wtr.write_record(MANIFEST_HEADER).map_err(io)?;
    for img in images {
        wtr.write_record([
            img.image_id.clone(),
            img.location.lat().to_string(),
            img.location.lon().to_string(),
            opt_path(&img.seg_path),
            opt_path(&img.cam_p_path),
            opt_path(&img.cam_v_path),
            opt_num(img.logits_p.map(|l| l.z_safe)),
            opt_num(img.logits_p.map(|l| l.z_danger)),
            opt_num(img.logits_v.map(|l| l.z_safe)),
            opt_num(img.logits_v.map(|l| l.z_danger)),
            opt_num(img.score_p),
            opt_num(img.score_v),
        ])
        .map_err(io)?;
    }
    wtr.flush().map_err(|e| Error::io("images", e))
}
