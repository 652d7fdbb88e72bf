//! The text feature file.
//!
//! ```text
//! EPF1 <count> <descriptor_dim> <natural|fixed> [<angle_rad>]
//! x y scale orientation d_1 ... d_D
//! ...
//! ```
//!
//! Numbers are written with the shortest representation that reads back to
//! the same `f64`, so a save/load/save cycle reproduces the file byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use epiprep_core::features::{normalize, UNIT_NORM_TOL};
use epiprep_core::{Feature, FeatureSet, OrientationMode};

pub const MAGIC: &str = "EPF1";

/// Descriptors whose norm falls in this band are renormalized on load.
pub const RENORMALIZE_BAND: (f64, f64) = (0.99, 1.01);

#[derive(Debug, thiserror::Error)]
pub enum FeatureFileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    /// `line` is 1-based; line 1 is the header.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn parse_err(line: usize, message: impl Into<String>) -> FeatureFileError {
    FeatureFileError::Parse { line, message: message.into() }
}

/// Header fields of a feature file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub count: usize,
    pub dim: usize,
    pub mode: OrientationMode,
}

pub fn parse_header(line: &str) -> Result<Header, FeatureFileError> {
    let tok: Vec<&str> = line.split_whitespace().collect();
    if tok.first() != Some(&MAGIC) {
        return Err(parse_err(1, format!("expected magic {MAGIC}")));
    }
    if tok.len() < 4 {
        return Err(parse_err(1, "header needs count, dimension and mode"));
    }
    let count = tok[1].parse().map_err(|_| parse_err(1, format!("bad count {:?}", tok[1])))?;
    let dim: usize = tok[2].parse().map_err(|_| parse_err(1, format!("bad descriptor dimension {:?}", tok[2])))?;
    if dim == 0 {
        return Err(parse_err(1, "descriptor dimension must be positive"));
    }
    let mode = match (tok[3], tok.get(4)) {
        ("natural", None) => OrientationMode::Natural,
        ("fixed", Some(a)) => {
            let a: f64 = a.parse().map_err(|_| parse_err(1, format!("bad angle {a:?}")))?;
            if !a.is_finite() {
                return Err(parse_err(1, "angle must be finite"));
            }
            OrientationMode::Fixed(a)
        }
        ("fixed", None) => return Err(parse_err(1, "fixed mode needs an angle")),
        ("natural", Some(_)) => return Err(parse_err(1, "natural mode takes no angle")),
        (m, _) => return Err(parse_err(1, format!("unknown mode {m:?}"))),
    };
    if tok.len() > 5 {
        return Err(parse_err(1, "trailing header fields"));
    }
    Ok(Header { count, dim, mode })
}

fn parse_record(line: &str, lineno: usize, dim: usize) -> Result<Feature, FeatureFileError> {
    let vals = line
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(lineno, format!("bad number {t:?}"))))
        .collect::<Result<Vec<f64>, _>>()?;
    if vals.len() != 4 + dim {
        return Err(parse_err(lineno, format!("expected {} values, found {}", 4 + dim, vals.len())));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(parse_err(lineno, "non-finite value"));
    }
    let mut desc = vals[4..].to_vec();
    let n = desc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(RENORMALIZE_BAND.0..=RENORMALIZE_BAND.1).contains(&n) {
        return Err(parse_err(lineno, format!("descriptor norm {n} is not close to 1")));
    }
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        normalize(&mut desc);
    }
    Feature::new(vals[0], vals[1], vals[2], vals[3], desc).map_err(|e| parse_err(lineno, e.to_string()))
}

/// Reads a feature file; `image_id` names the resulting set.
pub fn read_features(r: impl Read, image_id: &str) -> Result<FeatureSet, FeatureFileError> {
    let mut lines = BufReader::new(r).lines();
    let io = |e| FeatureFileError::Io { path: PathBuf::from(image_id), source: e };
    let header = match lines.next() {
        Some(l) => parse_header(&l.map_err(io)?)?,
        None => return Err(parse_err(1, "empty file")),
    };
    let mut features = Vec::with_capacity(header.count);
    let mut lineno = 1;
    for line in lines {
        lineno += 1;
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        if features.len() == header.count {
            return Err(parse_err(lineno, format!("more records than the {} declared", header.count)));
        }
        features.push(parse_record(&line, lineno, header.dim)?);
    }
    if features.len() != header.count {
        return Err(parse_err(lineno, format!("header declares {} records, found {}", header.count, features.len())));
    }
    FeatureSet::new(image_id, header.mode, header.dim, features).map_err(|e| parse_err(1, e.to_string()))
}

pub fn write_features(set: &FeatureSet, mut w: impl Write) -> io::Result<()> {
    let mut line = String::new();
    match set.mode {
        OrientationMode::Natural => writeln!(w, "{MAGIC} {} {} natural", set.len(), set.dim)?,
        OrientationMode::Fixed(a) => writeln!(w, "{MAGIC} {} {} fixed {a:?}", set.len(), set.dim)?,
    }
    for f in &set.features {
        line.clear();
        let _ = write!(line, "{:?} {:?} {:?} {:?}", f.x, f.y, f.scale, f.orientation);
        for d in &f.descriptor {
            let _ = write!(line, " {d:?}");
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Image id derived from a path: the file name up to its first dot.
pub fn image_id_of(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.split('.').next().unwrap_or_default().to_string()
}

pub fn load_features(path: &Path) -> Result<FeatureSet, FeatureFileError> {
    let file = fs::File::open(path).map_err(|e| FeatureFileError::Io { path: path.into(), source: e })?;
    read_features(file, &image_id_of(path))
}

pub fn save_features(set: &FeatureSet, path: &Path) -> Result<(), FeatureFileError> {
    let io = |e| FeatureFileError::Io { path: path.into(), source: e };
    let mut w = io::BufWriter::new(fs::File::create(path).map_err(io)?);
    write_features(set, &mut w).map_err(io)?;
    w.flush().map_err(io)
}

/// Reads only the header line of a feature file.
pub fn peek_header(path: &Path) -> Result<Header, FeatureFileError> {
    let file = fs::File::open(path).map_err(|e| FeatureFileError::Io { path: path.into(), source: e })?;
    let mut line = String::new();
    BufReader::new(file)
        .read_line(&mut line)
        .map_err(|e| FeatureFileError::Io { path: path.into(), source: e })?;
    parse_header(&line)
}

/// Conventional name of a fixed-orientation file:
/// `<image_id>.fixed.<milliradians>.epf`.
pub fn fixed_file_name(image_id: &str, angle: f64) -> String {
    format!("{image_id}.fixed.{}.epf", (angle * 1000.0).round() as i64)
}

/// Fixed-orientation files whose header angle lies within `tol` of the
/// requested angle are accepted.
pub const FIXED_ANGLE_TOL: f64 = 0.5 * std::f64::consts::PI / 180.0;

/// Looks in `dir` for a fixed-orientation set of `image_id` at `angle`.
/// Candidates are the files named `<image_id>.fixed.*.epf`, checked by their
/// header angle; the closest one wins.
pub fn find_fixed(dir: &Path, image_id: &str, angle: f64) -> Result<Option<PathBuf>, FeatureFileError> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(FeatureFileError::Io { path: dir.into(), source: e }),
    };
    let prefix = format!("{image_id}.fixed.");
    let mut names: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .map(|n| n.to_string_lossy())
                .is_some_and(|n| n.starts_with(&prefix) && n.ends_with(".epf"))
        })
        .collect();
    names.sort();
    let mut best: Option<(f64, PathBuf)> = None;
    for p in names {
        if let OrientationMode::Fixed(a) = peek_header(&p)?.mode {
            let d = epiprep_core::angle_diff(a, angle).abs();
            if d <= FIXED_ANGLE_TOL && best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                best = Some((d, p));
            }
        }
    }
    Ok(best.map(|b| b.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_forms() {
        assert_eq!(parse_header("EPF1 3 8 natural").unwrap().mode, OrientationMode::Natural);
        assert_eq!(parse_header("EPF1 3 8 fixed 1.5").unwrap().mode, OrientationMode::Fixed(1.5));
        for bad in ["EPF2 3 8 natural", "EPF1 3 8", "EPF1 x 8 natural", "EPF1 3 8 fixed", "EPF1 3 0 natural", "EPF1 3 8 upright"] {
            assert!(matches!(parse_header(bad), Err(FeatureFileError::Parse { line: 1, .. })), "{bad}");
        }
    }

    #[test]
    fn image_ids() {
        assert_eq!(image_id_of(Path::new("/a/b/img1.fixed.1361.epf")), "img1");
        assert_eq!(fixed_file_name("img1", 78f64.to_radians()), "img1.fixed.1361.epf");
    }
}
