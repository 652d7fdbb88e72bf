//! CSV tables: ranked matches, ranked 2keypoint matches, labelled training
//! data, benchmark reports and ground-truth correspondence lists.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use epiprep_core::bench::{Method, ReportRow, SceneOutcome};
use epiprep_core::dtree::{DtreeError, LabeledDataset};
use epiprep_core::features::Sources;
use epiprep_core::global_rank::KpmdEntry;
use epiprep_core::twokeypoint::TwoKeypointMatch;
use epiprep_core::{FeatureSet, PointPair, PutativeMatch};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum TableError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("record {record}: {message}")]
    Parse { record: usize, message: String },
    #[error(transparent)]
    Dataset(#[from] DtreeError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TableError + '_ {
    move |e| TableError::Io { path: path.into(), source: e }
}

/// One line of a ranked match table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedRow {
    pub i1: usize,
    pub i2: usize,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub sfm: Option<u32>,
    pub d_r: Option<f64>,
    pub t_k: Option<f64>,
    pub prob: f64,
    pub sources: String,
}

impl RankedRow {
    pub fn pair(&self) -> PointPair {
        PointPair::new([self.x1, self.y1], [self.x2, self.y2])
    }
}

/// Rows of a ranked list with pixel coordinates looked up in both sets.
/// Scores a match never received are left empty.
pub fn ranked_rows(entries: &[KpmdEntry], f1: &FeatureSet, f2: &FeatureSet) -> Vec<RankedRow> {
    entries.iter().map(|e| match_row(&e.m, f1, f2)).collect()
}

/// Same as [`ranked_rows`] for a plain match list.
pub fn match_rows(matches: &[PutativeMatch], f1: &FeatureSet, f2: &FeatureSet) -> Vec<RankedRow> {
    matches.iter().map(|m| match_row(m, f1, f2)).collect()
}

fn match_row(m: &PutativeMatch, f1: &FeatureSet, f2: &FeatureSet) -> RankedRow {
    let (a, b) = (&f1.features[m.i1], &f2.features[m.i2]);
    RankedRow {
        i1: m.i1,
        i2: m.i2,
        x1: a.x,
        y1: a.y,
        x2: b.x,
        y2: b.y,
        sfm: m.sfm,
        d_r: m.d_r,
        t_k: m.t_k,
        prob: m.prob.unwrap_or(0.0),
        sources: m.sources.tag(),
    }
}

pub fn write_ranked(rows: &[RankedRow], w: impl Write) -> Result<(), TableError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush().map_err(|e| TableError::Csv(e.into()))?;
    Ok(())
}

pub fn read_ranked(r: impl Read) -> Result<Vec<RankedRow>, TableError> {
    let mut out = Vec::new();
    for (i, row) in csv::Reader::from_reader(r).deserialize::<RankedRow>().enumerate() {
        let row = row?;
        if Sources::from_tag(&row.sources).is_none() {
            return Err(TableError::Parse { record: i + 1, message: format!("bad sources tag {:?}", row.sources) });
        }
        if !(row.prob.is_finite() && (0.0..=1.0).contains(&row.prob)) {
            return Err(TableError::Parse { record: i + 1, message: format!("probability {} out of range", row.prob) });
        }
        out.push(row);
    }
    Ok(out)
}

pub fn save_ranked(rows: &[RankedRow], path: &Path) -> Result<(), TableError> {
    write_ranked(rows, fs::File::create(path).map_err(io_err(path))?)
}

pub fn load_ranked(path: &Path) -> Result<Vec<RankedRow>, TableError> {
    read_ranked(fs::File::open(path).map_err(io_err(path))?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TwoKpRow {
    p1: usize,
    n1: usize,
    p2: usize,
    n2: usize,
    #[serde(rename = "N1")]
    big_n1: u32,
    #[serde(rename = "N2")]
    big_n2: u32,
    dist_r: f64,
    angle_d: f64,
    cluster_t: u8,
    min_d: f64,
    prob: Option<f64>,
}

pub fn write_two_kp(matches: &[TwoKeypointMatch], w: impl Write) -> Result<(), TableError> {
    let mut wr = csv::Writer::from_writer(w);
    for m in matches {
        let d = &m.descriptor;
        wr.serialize(TwoKpRow {
            p1: m.tk1.p,
            n1: m.tk1.n,
            p2: m.tk2.p,
            n2: m.tk2.n,
            big_n1: d.n1,
            big_n2: d.n2,
            dist_r: d.dist_r,
            angle_d: d.angle_d,
            cluster_t: u8::from(d.cluster_t),
            min_d: d.min_d,
            prob: m.prob,
        })?;
    }
    wr.flush().map_err(|e| TableError::Csv(e.into()))?;
    Ok(())
}

pub fn save_two_kp(matches: &[TwoKeypointMatch], path: &Path) -> Result<(), TableError> {
    write_two_kp(matches, fs::File::create(path).map_err(io_err(path))?)
}

/// Training table: the schema columns followed by `label` (0 or 1).
pub fn write_dataset(data: &LabeledDataset, w: impl Write) -> Result<(), TableError> {
    let mut wr = csv::Writer::from_writer(w);
    let mut header = data.schema.clone();
    header.push("label".into());
    wr.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for (row, &label) in data.rows.iter().zip(&data.labels) {
        rec.clear();
        rec.extend(row.iter().map(|v| format!("{v:?}")));
        rec.push(if label { "1".into() } else { "0".into() });
        wr.write_record(&rec)?;
    }
    wr.flush().map_err(|e| TableError::Csv(e.into()))?;
    Ok(())
}

pub fn read_dataset(r: impl Read) -> Result<LabeledDataset, TableError> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers()?.iter().map(|s| s.trim().to_string()).collect();
    if header.last().map(String::as_str) != Some("label") || header.len() < 2 {
        return Err(TableError::Parse { record: 0, message: "last column must be `label`".into() });
    }
    let schema: Vec<&str> = header[..header.len() - 1].iter().map(String::as_str).collect();
    let mut data = LabeledDataset::new(&schema);
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| TableError::Parse { record: i + 1, message: format!("bad number {s:?}") })
        };
        let mut row = Vec::with_capacity(schema.len());
        for field in rec.iter().take(schema.len()) {
            row.push(parse(field)?);
        }
        let label = match rec.get(schema.len()).map(str::trim) {
            Some("1") => true,
            Some("0") => false,
            other => return Err(TableError::Parse { record: i + 1, message: format!("bad label {other:?}") }),
        };
        data.push(row, label).map_err(|e| TableError::Parse { record: i + 1, message: e.to_string() })?;
    }
    Ok(data)
}

pub fn save_dataset(data: &LabeledDataset, path: &Path) -> Result<(), TableError> {
    write_dataset(data, fs::File::create(path).map_err(io_err(path))?)
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset, TableError> {
    read_dataset(fs::File::open(path).map_err(io_err(path))?)
}

pub fn write_report(rows: &[ReportRow], w: impl Write) -> Result<(), TableError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["scene", "method", "seed", "mean_root_sampson", "success", "iterations", "wall_ms"])?;
    for r in rows {
        wr.write_record([
            r.scene.clone(),
            r.method.as_str().to_string(),
            r.seed.to_string(),
            format!("{:?}", r.mean_root_sampson),
            u8::from(r.success).to_string(),
            r.iterations.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    wr.flush().map_err(|e| TableError::Csv(e.into()))?;
    Ok(())
}

/// Per-scene precision of each ranking at the benchmark rank.
pub fn write_precision(outcomes: &[SceneOutcome], w: impl Write) -> Result<(), TableError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["scene", "method", "precision_at_100", "lowe_inlier_rate"])?;
    for o in outcomes {
        for m in Method::ALL {
            wr.write_record([
                o.name.clone(),
                m.as_str().to_string(),
                format!("{:?}", o.precision_of(m)),
                format!("{:?}", o.lowe_inlier_rate),
            ])?;
        }
    }
    wr.flush().map_err(|e| TableError::Csv(e.into()))?;
    Ok(())
}

/// Ground-truth correspondences, one `x1 y1 x2 y2` per line.
pub fn read_correspondences(r: impl Read) -> Result<Vec<PointPair>, TableError> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(r).lines().enumerate() {
        let line = line.map_err(|e| TableError::Io { path: PathBuf::new(), source: e })?;
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let v: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| TableError::Parse { record: i + 1, message: "bad number".into() })?;
        if v.len() != 4 || v.iter().any(|x| !x.is_finite()) {
            return Err(TableError::Parse { record: i + 1, message: "expected four finite numbers".into() });
        }
        out.push(PointPair::new([v[0], v[1]], [v[2], v[3]]));
    }
    Ok(out)
}

pub fn write_correspondences(pairs: &[PointPair], mut w: impl Write) -> io::Result<()> {
    for p in pairs {
        writeln!(w, "{:?} {:?} {:?} {:?}", p.x1.x, p.x1.y, p.x2.x, p.x2.y)?;
    }
    Ok(())
}

pub fn load_correspondences(path: &Path) -> Result<Vec<PointPair>, TableError> {
    read_correspondences(fs::File::open(path).map_err(io_err(path))?)
}
