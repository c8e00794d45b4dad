//! JSON-lines readers and writers for annotations, score curves,
//! predictions and feature sequences.
//!
//! Every file holds one JSON object per line. Floats are written with the
//! shortest representation that parses back to the same `f64`, so a
//! write/read cycle is bit-exact. Blank lines are ignored on read.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::scorer::FeatureSequence;
use crate::types::{validate_record, AnnotationRecord, BoundarySet, ScoreCurve, Source, VideoMeta};
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationLine {
    video_id: String,
    duration: f64,
    source: Source,
    raters: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct ScoreLineOut<'a> {
    video_id: &'a str,
    p: f64,
    values: &'a [f64],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreLineIn {
    video_id: String,
    p: f64,
    // `null` is how most JSON encoders spell NaN/inf; keep it so we can
    // report it as a non-finite score rather than a type error.
    values: Vec<Option<f64>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionLine {
    video_id: String,
    boundaries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureLine {
    video_id: String,
    rows: Vec<Vec<f64>>,
}

fn read_lines<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        out.push((idx + 1, item));
    }
    Ok(out)
}

fn write_lines<T, I>(path: &Path, items: I) -> Result<()>
where
    T: Serialize,
    I: IntoIterator<Item = T>,
{
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, &item).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes a single pretty-printed JSON document.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::io(path, e.into()))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a single JSON document.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

fn check_unique(seen: &mut HashSet<String>, id: &str) -> Result<()> {
    if !seen.insert(id.to_string()) {
        return Err(Error::DuplicateVideo(id.to_string()));
    }
    Ok(())
}

/// Reads `annotations.jsonl`, binning every video at `bin_width_s`.
///
/// Lines that parse but break a record invariant are reported as parse
/// errors at that line.
pub fn read_annotations(path: &Path, bin_width_s: f64) -> Result<Vec<AnnotationRecord>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, a) in read_lines::<AnnotationLine>(path)? {
        check_unique(&mut seen, &a.video_id)?;
        let meta = VideoMeta::new(a.video_id, a.duration, bin_width_s);
        let record = AnnotationRecord::new(meta, a.raters, a.source);
        let violations = validate_record(&record);
        if !violations.is_empty() {
            let message = violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            });
        }
        out.push(record);
    }
    Ok(out)
}

pub fn write_annotations(records: &[AnnotationRecord], path: &Path) -> Result<()> {
    write_lines(
        path,
        records.iter().map(|r| AnnotationLine {
            video_id: r.meta.video_id.clone(),
            duration: r.meta.duration_s,
            source: r.source,
            raters: r.raters.iter().map(|b| b.boundaries.clone()).collect(),
        }),
    )
}

/// Reads `scores.jsonl`. Use [`read_scores_for`] to also check lengths
/// against known video geometry.
pub fn read_scores(path: &Path) -> Result<Vec<ScoreCurve>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, s) in read_lines::<ScoreLineIn>(path)? {
        check_unique(&mut seen, &s.video_id)?;
        if !(s.p.is_finite() && s.p > 0.0) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("bin width p must be > 0, got {}", s.p),
            });
        }
        let mut values = Vec::with_capacity(s.values.len());
        for (bin, v) in s.values.into_iter().enumerate() {
            match v {
                Some(v) if v.is_finite() => values.push(v),
                _ => {
                    return Err(Error::NonFiniteScore {
                        video_id: s.video_id,
                        bin,
                    })
                }
            }
        }
        out.push(ScoreCurve::new(s.video_id, s.p, values));
    }
    Ok(out)
}

/// Reads scores and checks each curve against the matching meta, if any.
pub fn read_scores_for(path: &Path, metas: &[VideoMeta]) -> Result<Vec<ScoreCurve>> {
    let curves = read_scores(path)?;
    for c in &curves {
        if let Some(m) = metas.iter().find(|m| m.video_id == c.video_id) {
            c.check_meta(m)?;
        }
    }
    Ok(curves)
}

pub fn write_scores(curves: &[ScoreCurve], path: &Path) -> Result<()> {
    for c in curves {
        if let Some(bin) = c.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteScore {
                video_id: c.video_id.clone(),
                bin,
            });
        }
    }
    write_lines(
        path,
        curves.iter().map(|c| ScoreLineOut {
            video_id: &c.video_id,
            p: c.bin_width_s,
            values: &c.values,
        }),
    )
}

/// Reads `predictions.jsonl`. Boundaries must be finite and strictly increasing.
pub fn read_predictions(path: &Path) -> Result<Vec<BoundarySet>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, p) in read_lines::<PredictionLine>(path)? {
        check_unique(&mut seen, &p.video_id)?;
        let ok = p.boundaries.iter().all(|b| b.is_finite())
            && p.boundaries.windows(2).all(|w| w[0] < w[1]);
        if !ok {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "boundaries must be finite and strictly increasing".into(),
            });
        }
        out.push(BoundarySet::new(p.video_id, p.boundaries));
    }
    Ok(out)
}

pub fn write_predictions(preds: &[BoundarySet], path: &Path) -> Result<()> {
    write_lines(
        path,
        preds.iter().map(|p| PredictionLine {
            video_id: p.video_id.clone(),
            boundaries: p.boundaries.clone(),
        }),
    )
}

/// Reads `features.jsonl`; every row of a sequence must have the same width.
pub fn read_features(path: &Path) -> Result<Vec<FeatureSequence>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (line, f) in read_lines::<FeatureLine>(path)? {
        check_unique(&mut seen, &f.video_id)?;
        let seq = FeatureSequence::from_rows(f.video_id, &f.rows).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        out.push(seq);
    }
    Ok(out)
}

pub fn write_features(seqs: &[FeatureSequence], path: &Path) -> Result<()> {
    write_lines(
        path,
        seqs.iter().map(|s| FeatureLine {
            video_id: s.video_id.clone(),
            rows: s.rows().map(<[f64]>::to_vec).collect(),
        }),
    )
}
