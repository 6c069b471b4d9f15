//! Readers and writers for the CSV/JSON exchange files.
//!
//! Epochs are ISO-8601 strings on disk and days since 2000-01-01 in memory.
//! Floats are written with shortest round-trip formatting, so a file read back
//! reproduces the in-memory values exactly (epochs up to one microsecond).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use reentry_core::features::{DecayTrajectory, SpaceWeatherSeries};
use reentry_core::synthetic::{GroundTruth, OutlierKind, OutlierLabel};
use reentry_core::time::{format_epoch, parse_epoch};
use reentry_core::tle::{parse_omm, ObjectTrack, TleRecord};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes through a temporary sibling and a rename, so readers never observe a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).and_then(|_| f.sync_all()).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    fs::read(path).map(|b| sha256_hex(&b)).map_err(|e| Error::io(path, e))
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::input(e.to_string()))?;
    String::from_utf8(bytes).map_err(Error::input)
}

/// CSV with a header row but no records; `csv` only emits headers with the first record.
fn header_only(cols: &[&str]) -> String {
    let mut s = cols.join(",");
    s.push('\n');
    s
}

fn epoch_field(row: usize, field: &str, raw: &str) -> Result<f64> {
    parse_epoch(raw).map_err(|_| Error::input(format!("row {row}: malformed {field} `{raw}`")))
}

fn rows<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    r.deserialize()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::input(format!("row {}: {e}", i + 1))))
        .collect()
}

// OMM

const OMM_COLUMNS: [&str; 9] = [
    "NORAD_CAT_ID",
    "EPOCH",
    "MEAN_MOTION",
    "ECCENTRICITY",
    "INCLINATION",
    "RA_OF_ASC_NODE",
    "ARG_OF_PERICENTER",
    "MEAN_ANOMALY",
    "BSTAR",
];

/// Parses an OMM CSV with named columns (any order, extra columns ignored).
pub fn parse_omm_csv(text: &str) -> Result<Vec<TleRecord>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = r.headers()?.clone();
    let mut out = Vec::new();
    for (i, row) in r.records().enumerate() {
        let row = row?;
        let rec = parse_omm(|name| headers.iter().position(|h| h == name).and_then(|c| row.get(c)))
            .map_err(|e| Error::input(format!("OMM row {}: {e}", i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

/// Parses a JSON array of OMM objects. Values may be strings or numbers.
pub fn parse_omm_json(text: &str) -> Result<Vec<TleRecord>> {
    let items: Vec<BTreeMap<String, serde_json::Value>> = serde_json::from_str(text)?;
    items
        .iter()
        .enumerate()
        .map(|(i, obj)| {
            let fields: BTreeMap<&str, String> = obj
                .iter()
                .filter_map(|(k, v)| match v {
                    serde_json::Value::String(s) => Some((k.as_str(), s.clone())),
                    serde_json::Value::Number(n) => Some((k.as_str(), n.to_string())),
                    _ => None,
                })
                .collect();
            parse_omm(|name| fields.get(name).map(String::as_str))
                .map_err(|e| Error::input(format!("OMM object {i}: {e}")))
        })
        .collect()
}

/// Reads OMM records, choosing JSON when the file starts with `[`.
pub fn read_omm(path: &Path) -> Result<Vec<TleRecord>> {
    let text = read_text(path)?;
    let parsed = if text.trim_start().starts_with('[') { parse_omm_json(&text) } else { parse_omm_csv(&text) };
    parsed.map_err(|e| Error::input(format!("{}: {e}", path.display())))
}

pub fn omm_csv(records: &[TleRecord]) -> Result<String> {
    if records.is_empty() {
        return Ok(header_only(&OMM_COLUMNS));
    }
    to_csv(records.iter().map(|r| {
        (
            r.norad_id,
            format_epoch(r.epoch),
            r.mean_motion,
            r.eccentricity,
            r.inclination,
            r.raan,
            r.arg_perigee,
            r.mean_anomaly,
            r.bstar,
        )
    }))
    .map(|body| format!("{}{body}", header_only(&OMM_COLUMNS)))
}

// TIP

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TipEntry {
    pub norad_id: u32,
    pub decay_epoch: f64,
    pub window_minutes: f64,
}

#[derive(Serialize, Deserialize)]
struct TipRow {
    #[serde(rename = "NORAD_CAT_ID")]
    norad_id: u32,
    #[serde(rename = "DECAY_EPOCH")]
    decay_epoch: String,
    #[serde(rename = "WINDOW_MINUTES")]
    window_minutes: f64,
}

pub fn parse_tip_csv(text: &str) -> Result<Vec<TipEntry>> {
    let rows: Vec<TipRow> = rows(text)?;
    rows.into_iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(TipEntry {
                norad_id: r.norad_id,
                decay_epoch: epoch_field(i + 1, "DECAY_EPOCH", &r.decay_epoch)?,
                window_minutes: r.window_minutes,
            })
        })
        .collect()
}

pub fn tip_csv(entries: &[TipEntry]) -> Result<String> {
    if entries.is_empty() {
        return Ok(header_only(&["NORAD_CAT_ID", "DECAY_EPOCH", "WINDOW_MINUTES"]));
    }
    to_csv(entries.iter().map(|e| TipRow {
        norad_id: e.norad_id,
        decay_epoch: format_epoch(e.decay_epoch),
        window_minutes: e.window_minutes,
    }))
}

pub fn tip_from_tracks(tracks: &[ObjectTrack]) -> Vec<TipEntry> {
    tracks
        .iter()
        .map(|t| TipEntry { norad_id: t.norad_id, decay_epoch: t.reentry_epoch, window_minutes: t.reentry_uncertainty })
        .collect()
}

/// Groups records by object and attaches the TIP assessment. Objects without
/// a TIP entry are left out and returned separately. When an object has
/// several TIP entries the last one wins.
pub fn assemble_tracks(records: Vec<TleRecord>, tips: &[TipEntry]) -> (Vec<ObjectTrack>, Vec<u32>) {
    let tip: BTreeMap<u32, TipEntry> = tips.iter().map(|t| (t.norad_id, *t)).collect();
    let mut by_id: BTreeMap<u32, Vec<TleRecord>> = BTreeMap::new();
    for r in records {
        by_id.entry(r.norad_id).or_default().push(r);
    }
    let mut tracks = Vec::new();
    let mut missing = Vec::new();
    for (id, recs) in by_id {
        match tip.get(&id) {
            Some(t) => tracks.push(ObjectTrack::new(id, recs, t.decay_epoch, t.window_minutes)),
            None => missing.push(id),
        }
    }
    (tracks, missing)
}

/// Where raw records come from. A network client for a catalogue service can
/// implement this without touching the filters.
pub trait RecordSource {
    fn fetch(&self, norad_id: u32) -> Result<Vec<TleRecord>>;
    fn catalog(&self) -> Vec<u32>;
}

/// Records already loaded into memory, for example from an OMM file.
#[derive(Debug, Clone, Default)]
pub struct MemorySource {
    by_id: BTreeMap<u32, Vec<TleRecord>>,
}

impl MemorySource {
    pub fn new(records: Vec<TleRecord>) -> Self {
        let mut by_id: BTreeMap<u32, Vec<TleRecord>> = BTreeMap::new();
        for r in records {
            by_id.entry(r.norad_id).or_default().push(r);
        }
        Self { by_id }
    }
}

impl RecordSource for MemorySource {
    fn fetch(&self, norad_id: u32) -> Result<Vec<TleRecord>> {
        self.by_id.get(&norad_id).cloned().ok_or_else(|| Error::input(format!("no records for object {norad_id}")))
    }

    fn catalog(&self) -> Vec<u32> {
        self.by_id.keys().copied().collect()
    }
}

// Space weather and metadata

#[derive(Serialize, Deserialize)]
struct SpaceWeatherRow {
    #[serde(rename = "DATE")]
    date: String,
    #[serde(rename = "F107_OBS", default)]
    f107_obs: Option<f64>,
    #[serde(rename = "F107_81DAY")]
    f107_81day: f64,
}

pub fn parse_space_weather_csv(text: &str) -> Result<SpaceWeatherSeries> {
    let rows: Vec<SpaceWeatherRow> = rows(text)?;
    let mut dates = Vec::with_capacity(rows.len());
    let mut flux = Vec::with_capacity(rows.len());
    for (i, r) in rows.into_iter().enumerate() {
        dates.push(epoch_field(i + 1, "DATE", &r.date)?);
        flux.push(r.f107_81day);
    }
    SpaceWeatherSeries::new(dates, flux).map_err(|e| Error::input(format!("space weather: {e}")))
}

/// Writes the series; the daily observed flux column repeats the 81-day mean
/// since only the mean is modelled.
pub fn space_weather_csv(sw: &SpaceWeatherSeries) -> Result<String> {
    to_csv(sw.dates.iter().zip(&sw.f107_81day).map(|(&d, &f)| SpaceWeatherRow {
        date: format_epoch(d)[..10].to_string(),
        f107_obs: Some(f),
        f107_81day: f,
    }))
}

#[derive(Serialize, Deserialize)]
struct MetadataRow {
    #[serde(rename = "NORAD_CAT_ID")]
    norad_id: u32,
    #[serde(rename = "AREA_TO_MASS")]
    area_to_mass: f64,
}

pub fn parse_metadata_csv(text: &str) -> Result<BTreeMap<u32, f64>> {
    let rows: Vec<MetadataRow> = rows(text)?;
    Ok(rows.into_iter().map(|r| (r.norad_id, r.area_to_mass)).collect())
}

pub fn metadata_csv(area_to_mass: &BTreeMap<u32, f64>) -> Result<String> {
    if area_to_mass.is_empty() {
        return Ok(header_only(&["NORAD_CAT_ID", "AREA_TO_MASS"]));
    }
    to_csv(area_to_mass.iter().map(|(&norad_id, &area_to_mass)| MetadataRow { norad_id, area_to_mass }))
}

// Synthetic ground truth

pub fn truth_csv(truth: &[GroundTruth]) -> Result<String> {
    if truth.is_empty() {
        return Ok(header_only(&["norad_id", "decay_epoch", "cd_a_over_m"]));
    }
    to_csv(truth.iter().map(|t| (t.norad_id, format_epoch(t.decay_epoch), t.cd_a_over_m)))
        .map(|body| format!("norad_id,decay_epoch,cd_a_over_m\n{body}"))
}

pub fn outliers_csv(labels: &[OutlierLabel]) -> Result<String> {
    let kind = |k: OutlierKind| match k {
        OutlierKind::MeanMotion => "mean_motion",
        OutlierKind::Eccentricity => "eccentricity",
        OutlierKind::Inclination => "inclination",
    };
    let header = "norad_id,epoch,kind\n";
    if labels.is_empty() {
        return Ok(header.to_string());
    }
    to_csv(labels.iter().map(|l| (l.norad_id, format_epoch(l.epoch), kind(l.kind)))).map(|body| format!("{header}{body}"))
}

// Trajectories

/// One row per grid point: object, grid index, altitude and time in days
/// since the object's 200 km epoch.
pub fn trajectories_csv(trajectories: &[DecayTrajectory]) -> Result<String> {
    let header = "norad_id,grid_index,altitude_km,time_days\n";
    let rows: Vec<_> = trajectories
        .iter()
        .flat_map(|t| {
            t.grid_altitudes.iter().zip(&t.grid_times).enumerate().map(move |(i, (&h, &s))| (t.norad_id, i, h, s))
        })
        .collect();
    if rows.is_empty() {
        return Ok(header.to_string());
    }
    to_csv(rows).map(|body| format!("{header}{body}"))
}
