//! Boundary F1 at a relative-distance threshold.
//!
//! A prediction `x` is a true positive when a still-unmatched ground-truth
//! boundary lies within `rel_dis × duration` of it; matching is one-to-one.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::types::{AnnotationRecord, BoundarySet};
use crate::{Error, Result};

/// Absorbs rounding at the closed ends of the matching interval, so that
/// e.g. `|1.6 - 1.1| <= 0.5` holds.
pub const MATCH_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MatchResult {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if tp + fp + fn_ == 0 {
            // nothing predicted, nothing annotated
            1.0
        } else if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        MatchResult {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }
}

/// True when `a` and `b` are close enough to match.
#[inline]
pub fn within(a: f64, b: f64, radius: f64) -> bool {
    (a - b).abs() <= radius + MATCH_EPS
}

/// Maximum one-to-one matching between two sorted boundary lists.
///
/// All eligibility intervals have the same radius, so a two-pointer sweep
/// that matches the earliest compatible pair is maximum.
pub fn match_boundaries(
    pred: &BoundarySet,
    gt: &BoundarySet,
    duration: f64,
    rel_dis: f64,
) -> MatchResult {
    let radius = rel_dis * duration;
    let (p, g) = (&pred.boundaries, &gt.boundaries);
    let (mut i, mut j, mut tp) = (0, 0, 0);
    while i < p.len() && j < g.len() {
        if within(p[i], g[j], radius) {
            tp += 1;
            i += 1;
            j += 1;
        } else if p[i] < g[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    MatchResult::from_counts(tp, p.len() - tp, g.len() - tp)
}

/// How per-rater F1 values are folded into one score per video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RaterAggregation {
    #[default]
    Max,
    Mean,
}

impl FromStr for RaterAggregation {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "max" => Ok(RaterAggregation::Max),
            "mean" => Ok(RaterAggregation::Mean),
            other => Err(format!("unknown aggregation {other:?} (expected max|mean)")),
        }
    }
}

impl fmt::Display for RaterAggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RaterAggregation::Max => "max",
            RaterAggregation::Mean => "mean",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterScores {
    pub per_rater: Vec<MatchResult>,
    pub best_f1: f64,
    pub mean_f1: f64,
}

impl RaterScores {
    pub fn aggregate(&self, agg: RaterAggregation) -> f64 {
        match agg {
            RaterAggregation::Max => self.best_f1,
            RaterAggregation::Mean => self.mean_f1,
        }
    }
}

/// Scores `pred` against every rater of `record`.
pub fn f1_against_raters(
    pred: &BoundarySet,
    record: &AnnotationRecord,
    rel_dis: f64,
) -> Result<RaterScores> {
    if pred.video_id != record.meta.video_id {
        return Err(Error::VideoMismatch {
            left: pred.video_id.clone(),
            right: record.meta.video_id.clone(),
        });
    }
    let per_rater: Vec<MatchResult> = record
        .raters
        .iter()
        .map(|gt| match_boundaries(pred, gt, record.meta.duration_s, rel_dis))
        .collect();
    let best_f1 = per_rater.iter().map(|m| m.f1).fold(0.0, f64::max);
    let mean_f1 = if per_rater.is_empty() {
        0.0
    } else {
        per_rater.iter().map(|m| m.f1).sum::<f64>() / per_rater.len() as f64
    };
    Ok(RaterScores {
        per_rater,
        best_f1,
        mean_f1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoScore {
    pub video_id: String,
    pub f1: f64,
    pub raters: RaterScores,
}

/// Corpus-level report. `precision`/`recall` pool the counts of every
/// (video, rater) comparison; `mean_f1` averages the per-video scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusReport {
    pub rel_dis: f64,
    pub aggregation: RaterAggregation,
    pub videos: usize,
    pub mean_f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub pooled: MatchResult,
    pub per_video: Vec<VideoScore>,
}

impl CorpusReport {
    /// Plain-text table, one row per video plus a summary line.
    pub fn table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>6} {:>4} {:>4} {:>4}\n",
            "video_id", "f1", "tp", "fp", "fn"
        ));
        for v in &self.per_video {
            let totals = v.raters.per_rater.iter().fold((0, 0, 0), |acc, m| {
                (acc.0 + m.tp, acc.1 + m.fp, acc.2 + m.fn_)
            });
            out.push_str(&format!(
                "{:<24} {:>6.4} {:>4} {:>4} {:>4}\n",
                v.video_id, v.f1, totals.0, totals.1, totals.2
            ));
        }
        out.push_str(&format!(
            "mean f1 ({}, rel_dis={}) = {:.4} over {} videos; pooled precision {:.4}, recall {:.4}\n",
            self.aggregation, self.rel_dis, self.mean_f1, self.videos, self.precision, self.recall
        ));
        out
    }
}

/// Scores a whole corpus. Every prediction needs a record and vice versa.
///
/// Videos are scored in parallel; the report is ordered by `video_id`.
pub fn corpus_f1(
    preds: &[BoundarySet],
    records: &[AnnotationRecord],
    rel_dis: f64,
    agg: RaterAggregation,
) -> Result<CorpusReport> {
    let by_id: BTreeMap<&str, &AnnotationRecord> =
        records.iter().map(|r| (r.video_id(), r)).collect();
    let pred_ids: BTreeMap<&str, &BoundarySet> =
        preds.iter().map(|p| (p.video_id.as_str(), p)).collect();
    let missing: Vec<String> = by_id
        .keys()
        .filter(|id| !pred_ids.contains_key(*id))
        .map(|s| s.to_string())
        .collect();
    let extra: Vec<String> = pred_ids
        .keys()
        .filter(|id| !by_id.contains_key(*id))
        .map(|s| s.to_string())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::CoverageMismatch { missing, extra });
    }

    let ordered: Vec<(&BoundarySet, &AnnotationRecord)> =
        pred_ids.iter().map(|(id, p)| (*p, by_id[id])).collect();
    let per_video = ordered
        .par_iter()
        .map(|(p, r)| {
            let raters = f1_against_raters(p, r, rel_dis)?;
            Ok(VideoScore {
                video_id: p.video_id.clone(),
                f1: raters.aggregate(agg),
                raters,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let (tp, fp, fn_) = per_video
        .iter()
        .flat_map(|v| v.raters.per_rater.iter())
        .fold((0, 0, 0), |acc, m| {
            (acc.0 + m.tp, acc.1 + m.fp, acc.2 + m.fn_)
        });
    let pooled = MatchResult::from_counts(tp, fp, fn_);
    let mean_f1 = if per_video.is_empty() {
        0.0
    } else {
        per_video.iter().map(|v| v.f1).sum::<f64>() / per_video.len() as f64
    };
    Ok(CorpusReport {
        rel_dis,
        aggregation: agg,
        videos: per_video.len(),
        mean_f1,
        precision: pooled.precision,
        recall: pooled.recall,
        pooled,
        per_video,
    })
}
