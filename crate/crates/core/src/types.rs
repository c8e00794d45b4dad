//! Domain types shared by every stage: video geometry, boundary sets,
//! annotation records and per-bin score curves.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Default bin width in seconds (a 10 s video maps to 40 bins).
pub const DEFAULT_BIN_WIDTH: f64 = 0.25;

/// Duration and bin geometry of one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoMeta {
    pub video_id: String,
    pub duration_s: f64,
    pub num_bins: usize,
    pub bin_width_s: f64,
}

impl VideoMeta {
    /// Builds the geometry for a video, with `num_bins = max(1, round(duration / bin_width))`.
    pub fn new(video_id: impl Into<String>, duration_s: f64, bin_width_s: f64) -> Self {
        VideoMeta {
            video_id: video_id.into(),
            duration_s,
            num_bins: expected_bins(duration_s, bin_width_s),
            bin_width_s,
        }
    }

    /// Reference time of bin `i` (its left edge).
    pub fn bin_time(&self, i: usize) -> f64 {
        i as f64 * self.bin_width_s
    }
}

pub(crate) fn expected_bins(duration_s: f64, bin_width_s: f64) -> usize {
    let n = (duration_s / bin_width_s).round();
    if n.is_finite() && n >= 1.0 {
        n as usize
    } else {
        1
    }
}

/// Sorted boundary times (seconds) for one video.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundarySet {
    pub video_id: String,
    pub boundaries: Vec<f64>,
}

impl BoundarySet {
    pub fn new(video_id: impl Into<String>, boundaries: Vec<f64>) -> Self {
        BoundarySet {
            video_id: video_id.into(),
            boundaries,
        }
    }

    pub fn empty(video_id: impl Into<String>) -> Self {
        Self::new(video_id, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }

    /// Checks the ordering and open-interval invariants against `duration`.
    pub fn violations(&self, duration: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        check_boundaries(&self.boundaries, duration, "boundaries", &mut out);
        out
    }
}

/// Where an annotation came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Human,
    Pseudo,
}

/// A video's geometry plus one boundary list per rater.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationRecord {
    pub meta: VideoMeta,
    pub raters: Vec<BoundarySet>,
    pub source: Source,
}

impl AnnotationRecord {
    /// Builds a record from raw rater lists, tagging each with the video id.
    pub fn new(meta: VideoMeta, raters: Vec<Vec<f64>>, source: Source) -> Self {
        let raters = raters
            .into_iter()
            .map(|b| BoundarySet::new(meta.video_id.clone(), b))
            .collect();
        AnnotationRecord {
            meta,
            raters,
            source,
        }
    }

    pub fn video_id(&self) -> &str {
        &self.meta.video_id
    }
}

/// Per-bin boundary scores for one video.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreCurve {
    pub video_id: String,
    pub bin_width_s: f64,
    pub values: Vec<f64>,
}

impl ScoreCurve {
    pub fn new(video_id: impl Into<String>, bin_width_s: f64, values: Vec<f64>) -> Self {
        ScoreCurve {
            video_id: video_id.into(),
            bin_width_s,
            values,
        }
    }

    pub fn zeros(meta: &VideoMeta) -> Self {
        Self::new(
            meta.video_id.clone(),
            meta.bin_width_s,
            vec![0.0; meta.num_bins],
        )
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest value, or `-inf` for an empty curve.
    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Fails unless the curve length matches the video's bin count.
    pub fn check_meta(&self, meta: &VideoMeta) -> crate::Result<()> {
        if self.video_id != meta.video_id {
            return Err(crate::Error::VideoMismatch {
                left: self.video_id.clone(),
                right: meta.video_id.clone(),
            });
        }
        if self.values.len() != meta.num_bins {
            return Err(crate::Error::LengthMismatch {
                video_id: self.video_id.clone(),
                expected: meta.num_bins,
                found: self.values.len(),
            });
        }
        Ok(())
    }
}

/// Per-bin training target produced by the soft-label encoder.
pub type SoftTarget = ScoreCurve;

/// One broken invariant, naming the field and the rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

fn check_boundaries(values: &[f64], duration: f64, field: &str, out: &mut Vec<Violation>) {
    for (i, &b) in values.iter().enumerate() {
        if !b.is_finite() {
            out.push(Violation::new(format!("{field}[{i}]"), "non-finite"));
        } else if b <= 0.0 || b >= duration {
            out.push(Violation::new(
                format!("{field}[{i}]"),
                "outside (0, duration)",
            ));
        }
    }
    for (i, w) in values.windows(2).enumerate() {
        if w[0].is_finite() && w[1].is_finite() && w[1] <= w[0] {
            out.push(Violation::new(
                format!("{field}[{}]", i + 1),
                "not strictly increasing",
            ));
        }
    }
}

/// Lists every invariant the record breaks. An empty list means the record is valid.
pub fn validate_record(record: &AnnotationRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    let meta = &record.meta;
    if meta.video_id.is_empty() {
        out.push(Violation::new("video_id", "empty"));
    }
    let duration_ok = meta.duration_s.is_finite() && meta.duration_s > 0.0;
    if !duration_ok {
        out.push(Violation::new("duration", "must be finite and > 0"));
    }
    let width_ok = meta.bin_width_s.is_finite() && meta.bin_width_s > 0.0;
    if !width_ok {
        out.push(Violation::new("bin_width", "must be finite and > 0"));
    }
    if duration_ok && width_ok && meta.num_bins != expected_bins(meta.duration_s, meta.bin_width_s)
    {
        out.push(Violation::new(
            "num_bins",
            "must equal round(duration / bin_width)",
        ));
    }
    if record.raters.is_empty() {
        out.push(Violation::new("raters", "empty"));
    }
    if record.source == Source::Pseudo && record.raters.len() > 1 {
        out.push(Violation::new(
            "raters",
            "pseudo record must have exactly one rater",
        ));
    }
    for (r, rater) in record.raters.iter().enumerate() {
        if rater.video_id != meta.video_id {
            out.push(Violation::new(
                format!("raters[{r}].video_id"),
                "does not match record video_id",
            ));
        }
        let duration = if duration_ok {
            meta.duration_s
        } else {
            f64::INFINITY
        };
        check_boundaries(
            &rater.boundaries,
            duration,
            &format!("raters[{r}]"),
            &mut out,
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(raters: Vec<Vec<f64>>) -> AnnotationRecord {
        AnnotationRecord::new(VideoMeta::new("v", 10.0, 0.25), raters, Source::Human)
    }

    #[test]
    fn ten_seconds_is_forty_bins() {
        let m = VideoMeta::new("v", 10.0, DEFAULT_BIN_WIDTH);
        assert_eq!(m.num_bins, 40);
        assert_eq!(VideoMeta::new("v", 0.05, 0.25).num_bins, 1);
        assert_eq!(VideoMeta::new("v", 9.9, 0.25).num_bins, 40);
    }

    #[test]
    fn well_formed_record_has_no_violations() {
        assert!(validate_record(&record(vec![vec![1.0, 2.5], vec![]])).is_empty());
    }

    #[test]
    fn unordered_boundaries() {
        let v = validate_record(&record(vec![vec![2.0, 1.0]]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "not strictly increasing");
    }

    #[test]
    fn boundary_at_zero() {
        let v = validate_record(&record(vec![vec![0.0]]));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, "outside (0, duration)");
        assert_eq!(v[0].field, "raters[0][0]");
    }

    #[test]
    fn pseudo_with_two_raters() {
        let mut r = record(vec![vec![1.0], vec![2.0]]);
        r.source = Source::Pseudo;
        let v = validate_record(&r);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "raters");
    }

    #[test]
    fn bad_geometry() {
        let mut r = record(vec![vec![1.0]]);
        r.meta.num_bins = 39;
        assert_eq!(validate_record(&r).len(), 1);
        r.meta.num_bins = 40;
        r.meta.video_id.clear();
        // the rater still carries "v", so the id mismatch is reported too
        assert_eq!(validate_record(&r).len(), 2);
    }
}
