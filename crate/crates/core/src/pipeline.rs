//! Ensembling, easy/hard routing, pseudo-labels and fold splits.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{align_boundaries, AlignConfig};
use crate::eval::{corpus_f1, RaterAggregation};
use crate::softlabel::{decode_peaks, DecodeConfig};
use crate::types::{AnnotationRecord, BoundarySet, ScoreCurve, Source, VideoMeta};
use crate::{seed, Error, Result};

/// Rounding slack for the easy/hard cutoff: `0.4 + 0.3` evaluates to
/// `0.7000000000000001`, and a curve peaking at exactly `0.7` must stay easy.
pub const SPLIT_EPS: f64 = 1e-9;

/// Which models are averaged for easy and for hard videos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub easy_model_ids: Vec<String>,
    pub hard_model_ids: Vec<String>,
    #[serde(default = "default_split_threshold")]
    pub split_threshold: f64,
    #[serde(default = "default_split_margin")]
    pub split_margin: f64,
}

fn default_split_threshold() -> f64 {
    0.4
}

fn default_split_margin() -> f64 {
    0.3
}

impl EnsembleSpec {
    /// Same model list for both subsets.
    pub fn uniform(model_ids: Vec<String>) -> Self {
        EnsembleSpec {
            easy_model_ids: model_ids.clone(),
            hard_model_ids: model_ids,
            split_threshold: default_split_threshold(),
            split_margin: default_split_margin(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.easy_model_ids.is_empty() || self.hard_model_ids.is_empty() {
            return Err(Error::invalid("ensemble model lists must be non-empty"));
        }
        for list in [&self.easy_model_ids, &self.hard_model_ids] {
            let unique: BTreeSet<&String> = list.iter().collect();
            if unique.len() != list.len() {
                return Err(Error::invalid("ensemble model list repeats a model id"));
            }
        }
        Ok(())
    }

    /// Curves whose maximum falls below this are hard.
    pub fn cutoff(&self) -> f64 {
        self.split_threshold + self.split_margin
    }
}

/// Elementwise mean of one video's curves from several models.
///
/// Curves are summed in model-id order, so the result does not depend on
/// the order of `members`; it is clamped to the elementwise input range.
pub fn ensemble_mean(members: &[(&str, &ScoreCurve)]) -> Result<ScoreCurve> {
    let mut sorted: Vec<&(&str, &ScoreCurve)> = members.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(b.0));
    let Some(&&(first_id, first)) = sorted.first() else {
        return Err(Error::invalid("ensemble needs at least one curve"));
    };
    for pair in sorted.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(Error::invalid(format!(
                "model {:?} appears twice",
                pair[0].0
            )));
        }
    }
    for &&(id, c) in &sorted[1..] {
        if c.video_id != first.video_id {
            return Err(Error::VideoMismatch {
                left: first.video_id.clone(),
                right: c.video_id.clone(),
            });
        }
        if c.len() != first.len() || c.bin_width_s != first.bin_width_s {
            return Err(Error::invalid(format!(
                "model {id:?} curve for {:?} has shape ({}, p={}) but model {first_id:?} has ({}, p={})",
                c.video_id,
                c.len(),
                c.bin_width_s,
                first.len(),
                first.bin_width_s
            )));
        }
    }
    let m = sorted.len() as f64;
    let values = (0..first.len())
        .map(|i| {
            let mut sum = 0.0;
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for (_, c) in &sorted {
                let v = c.values[i];
                sum += v;
                lo = lo.min(v);
                hi = hi.max(v);
            }
            (sum / m).clamp(lo, hi)
        })
        .collect();
    Ok(ScoreCurve::new(
        first.video_id.clone(),
        first.bin_width_s,
        values,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Difficulty {
    Easy,
    Hard,
}

/// Hard when the curve never reaches `split_threshold + split_margin`.
pub fn split_easy_hard(curve: &ScoreCurve, spec: &EnsembleSpec) -> Difficulty {
    if curve.max() < spec.cutoff() - SPLIT_EPS {
        Difficulty::Hard
    } else {
        Difficulty::Easy
    }
}

/// Score curves per model id, one curve per video.
pub type ModelScores = BTreeMap<String, Vec<ScoreCurve>>;

/// Per-video result of [`run_ensemble`].
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutcome {
    pub video_id: String,
    pub difficulty: Difficulty,
    /// Maximum of the provisional (easy-list) ensemble used for routing.
    pub routing_max: f64,
    pub curve: ScoreCurve,
    pub prediction: BoundarySet,
}

type CurveIndex<'a> = BTreeMap<&'a str, BTreeMap<&'a str, &'a ScoreCurve>>;

fn index_scores<'a>(
    scores: &'a ModelScores,
    models: &BTreeSet<&str>,
    wanted: &BTreeSet<&str>,
) -> Result<CurveIndex<'a>> {
    let mut index = BTreeMap::new();
    for &model in models {
        let (id, curves) = scores
            .get_key_value(model)
            .ok_or_else(|| Error::MissingModel(model.to_string()))?;
        let by_video: BTreeMap<&str, &ScoreCurve> =
            curves.iter().map(|c| (c.video_id.as_str(), c)).collect();
        let have: BTreeSet<&str> = by_video.keys().copied().collect();
        if &have != wanted {
            return Err(Error::CoverageMismatch {
                missing: wanted.difference(&have).map(|s| s.to_string()).collect(),
                extra: have.difference(wanted).map(|s| s.to_string()).collect(),
            });
        }
        index.insert(id.as_str(), by_video);
    }
    Ok(index)
}

fn mean_of(index: &CurveIndex<'_>, models: &[String], video: &str) -> Result<ScoreCurve> {
    let members: Vec<(&str, &ScoreCurve)> = models
        .iter()
        .map(|m| (m.as_str(), index[m.as_str()][video]))
        .collect();
    ensemble_mean(&members)
}

/// Routing decision for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Routing {
    pub video_id: String,
    pub difficulty: Difficulty,
    /// Maximum of the easy-list ensemble.
    pub routing_max: f64,
}

/// Easy/hard routing of every video scored by the easy-list models, sorted
/// by `video_id`.
pub fn route_corpus(scores: &ModelScores, spec: &EnsembleSpec) -> Result<Vec<Routing>> {
    spec.validate()?;
    let first = &spec.easy_model_ids[0];
    let ids: BTreeSet<&str> = scores
        .get(first)
        .ok_or_else(|| Error::MissingModel(first.clone()))?
        .iter()
        .map(|c| c.video_id.as_str())
        .collect();
    let models: BTreeSet<&str> = spec.easy_model_ids.iter().map(String::as_str).collect();
    let index = index_scores(scores, &models, &ids)?;
    let ids: Vec<&str> = ids.into_iter().collect();
    ids.par_iter()
        .map(|&id| {
            let curve = mean_of(&index, &spec.easy_model_ids, id)?;
            Ok(Routing {
                video_id: id.to_string(),
                difficulty: split_easy_hard(&curve, spec),
                routing_max: curve.max(),
            })
        })
        .collect()
}

/// Decodes a curve and aligns the result, using peak scores for pruning.
pub fn decode_and_align(
    curve: &ScoreCurve,
    meta: &VideoMeta,
    decode: &DecodeConfig,
    align: Option<&AlignConfig>,
) -> Result<BoundarySet> {
    let peaks = decode_peaks(curve, meta, decode)?;
    let raw = BoundarySet::new(
        meta.video_id.clone(),
        peaks.iter().map(|p| p.time).collect(),
    );
    match align {
        None => Ok(raw),
        Some(cfg) => {
            let scores: Vec<f64> = peaks.iter().map(|p| p.score).collect();
            align_boundaries(&raw, Some(&scores), meta.duration_s, cfg)
        }
    }
}

/// Easy/hard-aware ensemble, decode and alignment for every video.
///
/// Each video is first averaged over the easy list; that provisional curve
/// decides the subset, and the subset's list produces the final curve.
/// Output is sorted by `video_id` regardless of scheduling.
pub fn run_ensemble(
    scores: &ModelScores,
    metas: &[VideoMeta],
    spec: &EnsembleSpec,
    decode: &DecodeConfig,
    align: &AlignConfig,
) -> Result<Vec<EnsembleOutcome>> {
    spec.validate()?;
    let models: BTreeSet<&str> = spec
        .easy_model_ids
        .iter()
        .chain(&spec.hard_model_ids)
        .map(String::as_str)
        .collect();
    let ids: BTreeSet<&str> = metas.iter().map(|m| m.video_id.as_str()).collect();
    let index = index_scores(scores, &models, &ids)?;
    let mut metas: Vec<&VideoMeta> = metas.iter().collect();
    metas.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    metas
        .par_iter()
        .map(|meta| {
            let provisional = mean_of(&index, &spec.easy_model_ids, &meta.video_id)?;
            let difficulty = split_easy_hard(&provisional, spec);
            let routing_max = provisional.max();
            let curve = match difficulty {
                Difficulty::Easy => provisional,
                Difficulty::Hard => mean_of(&index, &spec.hard_model_ids, &meta.video_id)?,
            };
            let prediction = decode_and_align(&curve, meta, decode, Some(align))?;
            Ok(EnsembleOutcome {
                video_id: meta.video_id.clone(),
                difficulty,
                routing_max,
                curve,
                prediction,
            })
        })
        .collect()
}

/// Turns predictions into single-rater pseudo annotations, skipping
/// videos with no predicted boundary.
pub fn make_pseudo_labels(
    preds: &[BoundarySet],
    metas: &[VideoMeta],
) -> Result<Vec<AnnotationRecord>> {
    let by_id: BTreeMap<&str, &VideoMeta> =
        metas.iter().map(|m| (m.video_id.as_str(), m)).collect();
    preds
        .iter()
        .filter(|p| !p.is_empty())
        .map(|p| {
            let meta = by_id
                .get(p.video_id.as_str())
                .ok_or_else(|| Error::CoverageMismatch {
                    missing: vec![],
                    extra: vec![p.video_id.clone()],
                })?;
            Ok(AnnotationRecord {
                meta: (*meta).clone(),
                raters: vec![p.clone()],
                source: Source::Pseudo,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_ids: Vec<String>,
    pub valid_ids: Vec<String>,
}

/// Deterministic k-fold split.
///
/// Ids are bucketed by `hash(seed, id) mod k`; over-full buckets then hand
/// their highest-hash ids to under-full ones so fold sizes differ by at
/// most one.
pub fn kfold_split(ids: &[String], k: usize, seed_value: u64) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid(format!("k must be >= 2, got {k}")));
    }
    let unique: BTreeSet<&String> = ids.iter().collect();
    if unique.len() != ids.len() {
        return Err(Error::invalid("video ids must be unique"));
    }
    if k > ids.len() {
        return Err(Error::invalid(format!(
            "k = {k} exceeds the number of ids ({})",
            ids.len()
        )));
    }
    let n = ids.len();
    let target = |f: usize| n / k + usize::from(f < n % k);

    let mut buckets: Vec<Vec<(u64, &str)>> = vec![Vec::new(); k];
    for id in ids {
        let h = seed::derive(seed_value, &["kfold", id]);
        buckets[(h % k as u64) as usize].push((h, id));
    }
    let mut spill = Vec::new();
    for (f, bucket) in buckets.iter_mut().enumerate() {
        bucket.sort_unstable();
        if bucket.len() > target(f) {
            spill.extend(bucket.drain(target(f)..));
        }
    }
    spill.sort_unstable();
    let mut spill = spill.into_iter();
    for (f, bucket) in buckets.iter_mut().enumerate() {
        while bucket.len() < target(f) {
            bucket.push(spill.next().expect("bucket targets sum to n"));
        }
    }

    let mut all: Vec<&str> = ids.iter().map(String::as_str).collect();
    all.sort_unstable();
    Ok(buckets
        .iter()
        .map(|bucket| {
            let valid: BTreeSet<&str> = bucket.iter().map(|&(_, id)| id).collect();
            Fold {
                train_ids: all
                    .iter()
                    .filter(|id| !valid.contains(*id))
                    .map(|s| s.to_string())
                    .collect(),
                valid_ids: valid.into_iter().map(String::from).collect(),
            }
        })
        .collect())
}

/// One row of the ablation ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub stage: String,
    pub models: Vec<String>,
    pub mean_f1: f64,
    pub precision: f64,
    pub recall: f64,
    /// Fraction of videos whose boundaries differ from the previous row.
    pub changed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderReport {
    pub rel_dis: f64,
    pub aggregation: RaterAggregation,
    pub decode: DecodeConfig,
    pub align: AlignConfig,
    pub spec: EnsembleSpec,
    pub easy_videos: usize,
    pub hard_videos: usize,
    pub rows: Vec<LadderRow>,
}

impl LadderReport {
    /// Plain-text table, one line per stage.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>8} {:>9} {:>8} {:>8}  models\n",
            "stage", "mean_f1", "precision", "recall", "changed"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<12} {:>8.4} {:>9.4} {:>8.4} {:>8.4}  {}\n",
                r.stage,
                r.mean_f1,
                r.precision,
                r.recall,
                r.changed_fraction,
                r.models.join(",")
            ));
        }
        out.push_str(&format!(
            "{} easy / {} hard videos (rel_dis={}, {})\n",
            self.easy_videos, self.hard_videos, self.rel_dis, self.aggregation
        ));
        out
    }
}

/// Everything the ladder produced: the report and the final predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderOutput {
    pub report: LadderReport,
    pub predictions: Vec<BoundarySet>,
}

fn changed_fraction(before: &[BoundarySet], after: &[BoundarySet]) -> f64 {
    if before.is_empty() {
        return 0.0;
    }
    let changed = before
        .iter()
        .zip(after)
        .filter(|(a, b)| a.boundaries != b.boundaries)
        .count();
    changed as f64 / before.len() as f64
}

/// Runs the post-processing ladder on a scored corpus:
/// single model raw, + alignment, + easy-list ensemble, + easy/hard routing.
///
/// The single model is the first easy-list id in sorted order.
pub fn run_ladder(
    scores: &ModelScores,
    records: &[AnnotationRecord],
    spec: &EnsembleSpec,
    decode: &DecodeConfig,
    align: &AlignConfig,
    rel_dis: f64,
    agg: RaterAggregation,
) -> Result<LadderOutput> {
    spec.validate()?;
    let mut records: Vec<&AnnotationRecord> = records.iter().collect();
    records.sort_by(|a, b| a.video_id().cmp(b.video_id()));
    let metas: Vec<VideoMeta> = records.iter().map(|r| r.meta.clone()).collect();
    let owned_records: Vec<AnnotationRecord> = records.into_iter().cloned().collect();

    let mut sorted_easy = spec.easy_model_ids.clone();
    sorted_easy.sort();
    let single = sorted_easy[0].clone();
    let single_spec = EnsembleSpec::uniform(vec![single.clone()]);
    let easy_spec = EnsembleSpec::uniform(sorted_easy.clone());

    let per_video =
        |spec: &EnsembleSpec, align: Option<&AlignConfig>| -> Result<Vec<BoundarySet>> {
            let models: BTreeSet<&str> = spec.easy_model_ids.iter().map(String::as_str).collect();
            let ids: BTreeSet<&str> = metas.iter().map(|m| m.video_id.as_str()).collect();
            let index = index_scores(scores, &models, &ids)?;
            metas
                .par_iter()
                .map(|m| {
                    let curve = mean_of(&index, &spec.easy_model_ids, &m.video_id)?;
                    decode_and_align(&curve, m, decode, align)
                })
                .collect()
        };

    let mut rows = Vec::new();
    let mut push = |stage: &str,
                    models: Vec<String>,
                    preds: &[BoundarySet],
                    prev: Option<&[BoundarySet]>|
     -> Result<()> {
        let rep = corpus_f1(preds, &owned_records, rel_dis, agg)?;
        rows.push(LadderRow {
            stage: stage.to_string(),
            models,
            mean_f1: rep.mean_f1,
            precision: rep.precision,
            recall: rep.recall,
            changed_fraction: prev.map_or(0.0, |p| changed_fraction(p, preds)),
        });
        Ok(())
    };

    let raw = per_video(&single_spec, None)?;
    push("raw", vec![single.clone()], &raw, None)?;
    let aligned = per_video(&single_spec, Some(align))?;
    push("+align", vec![single], &aligned, Some(&raw))?;
    let ensembled = per_video(&easy_spec, Some(align))?;
    push("+ensemble", sorted_easy, &ensembled, Some(&aligned))?;
    let outcomes = run_ensemble(scores, &metas, spec, decode, align)?;
    let routed: Vec<BoundarySet> = outcomes.iter().map(|o| o.prediction.clone()).collect();
    let mut all_models: Vec<String> = spec
        .easy_model_ids
        .iter()
        .chain(&spec.hard_model_ids)
        .cloned()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    all_models.sort();
    push("+easy/hard", all_models, &routed, Some(&ensembled))?;

    let hard_videos = outcomes
        .iter()
        .filter(|o| o.difficulty == Difficulty::Hard)
        .count();
    Ok(LadderOutput {
        report: LadderReport {
            rel_dis,
            aggregation: agg,
            decode: *decode,
            align: *align,
            spec: spec.clone(),
            easy_videos: outcomes.len() - hard_videos,
            hard_videos,
            rows,
        },
        predictions: routed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(values: &[f64]) -> ScoreCurve {
        ScoreCurve::new("v", 0.25, values.to_vec())
    }

    #[test]
    fn mean_of_two() {
        let (a, b) = (c(&[0.2, 0.4]), c(&[0.4, 0.6]));
        let m = ensemble_mean(&[("a", &a), ("b", &b)]).unwrap();
        assert!((m.values[0] - 0.3).abs() < 1e-15);
        assert!((m.values[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn mean_of_identical() {
        let x = c(&[0.1, 0.7, 0.3333333333333333, 0.9]);
        for m in [1usize, 2, 3, 4, 7, 8] {
            let ids: Vec<String> = (0..m).map(|i| format!("m{i}")).collect();
            let members: Vec<(&str, &ScoreCurve)> =
                ids.iter().map(|id| (id.as_str(), &x)).collect();
            let out = ensemble_mean(&members).unwrap();
            if m.is_power_of_two() {
                assert_eq!(out.values, x.values);
            }
            for (a, b) in out.values.iter().zip(&x.values) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mean_rejects_mismatch() {
        let a = c(&[0.1, 0.2]);
        let b = c(&[0.1]);
        assert!(ensemble_mean(&[("a", &a), ("b", &b)]).is_err());
        let d = ScoreCurve::new("w", 0.25, vec![0.1, 0.2]);
        assert!(ensemble_mean(&[("a", &a), ("d", &d)]).is_err());
        assert!(ensemble_mean(&[("a", &a), ("a", &a)]).is_err());
        assert!(ensemble_mean(&[]).is_err());
    }

    #[test]
    fn split_rule_is_strict() {
        let spec = EnsembleSpec::uniform(vec!["m".into()]);
        assert_eq!(split_easy_hard(&c(&[0.1, 0.69]), &spec), Difficulty::Hard);
        assert_eq!(split_easy_hard(&c(&[0.1, 0.70]), &spec), Difficulty::Easy);
        assert_eq!(split_easy_hard(&c(&[0.95]), &spec), Difficulty::Easy);
    }

    #[test]
    fn missing_model() {
        let metas = vec![VideoMeta::new("v", 1.0, 0.25)];
        let mut scores = ModelScores::new();
        scores.insert("a".into(), vec![c(&[0.0; 4])]);
        let spec = EnsembleSpec::uniform(vec!["a".into(), "b".into()]);
        let err = run_ensemble(
            &scores,
            &metas,
            &spec,
            &DecodeConfig::default(),
            &AlignConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::MissingModel(m) if m == "b"));
    }

    #[test]
    fn pseudo_labels_skip_empty() {
        let metas = vec![
            VideoMeta::new("a", 10.0, 0.25),
            VideoMeta::new("b", 10.0, 0.25),
        ];
        let preds = vec![
            BoundarySet::new("a", vec![1.0, 4.5]),
            BoundarySet::empty("b"),
        ];
        let out = make_pseudo_labels(&preds, &metas).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].source, Source::Pseudo);
        assert_eq!(out[0].raters, vec![BoundarySet::new("a", vec![1.0, 4.5])]);
    }

    #[test]
    fn kfold_singletons() {
        let ids: Vec<String> = (0..10).map(|i| format!("v{i}")).collect();
        let folds = kfold_split(&ids, 10, 3).unwrap();
        assert_eq!(folds.len(), 10);
        let mut seen = BTreeSet::new();
        for f in &folds {
            assert_eq!(f.valid_ids.len(), 1);
            assert_eq!(f.train_ids.len(), 9);
            assert!(seen.insert(f.valid_ids[0].clone()));
        }
        assert_eq!(folds, kfold_split(&ids, 10, 3).unwrap());
    }

    #[test]
    fn kfold_errors() {
        let ids: Vec<String> = (0..3).map(|i| format!("v{i}")).collect();
        assert!(kfold_split(&ids, 4, 0).is_err());
        assert!(kfold_split(&ids, 1, 0).is_err());
    }

    #[test]
    fn kfold_large_balanced() {
        let ids: Vec<String> = (0..17_000).map(|i| format!("vid_{i:05}")).collect();
        let folds = kfold_split(&ids, 10, 42).unwrap();
        assert!(folds.iter().all(|f| f.valid_ids.len() == 1700));
        let total: usize = folds.iter().map(|f| f.valid_ids.len()).sum();
        assert_eq!(total, 17_000);
        let other = kfold_split(&ids, 10, 43).unwrap();
        assert_ne!(folds, other);
    }
}
