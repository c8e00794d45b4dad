//! Seeded synthetic corpora: ground truth, disagreeing raters, model score
//! curves and learnable feature sequences.
//!
//! Every video draws from its own RNG stream keyed by `(seed, video_id)`,
//! so any subset of a corpus can be regenerated independently and in
//! parallel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scorer::{FeatureSequence, DEFAULT_INPUT_DIM};
use crate::softlabel::{encode_soft_labels, half_kernel};
use crate::types::{
    AnnotationRecord, BoundarySet, ScoreCurve, Source, VideoMeta, DEFAULT_BIN_WIDTH,
};
use crate::{seed, Error, Result};

/// Boundaries closer than this after jitter are merged.
const DEDUP_EPS: f64 = 1e-6;
/// Rater boundaries stay at least this far inside the video even with no margin.
const MIN_INTERIOR_S: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RaterModel {
    pub jitter_std_s: f64,
    pub drop_prob: f64,
    pub spurious_rate_per_video: f64,
    pub raters: usize,
}

impl Default for RaterModel {
    fn default() -> Self {
        RaterModel {
            jitter_std_s: 0.15,
            drop_prob: 0.1,
            spurious_rate_per_video: 0.3,
            raters: 5,
        }
    }
}

/// How a simulated model's score curve is produced from the truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    /// Width of the bump around each boundary, in bins (peak height kept at 1).
    pub bump_sigma_bins: f64,
    pub noise_std: f64,
    pub baseline: f64,
    /// Bump amplitude; `0` gives a pure-noise model.
    #[serde(default = "one")]
    pub gain: f64,
    /// Per-video amplitude is drawn from `[gain·(1 - spread), gain]`.
    #[serde(default)]
    pub gain_spread: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for ScoreModel {
    fn default() -> Self {
        ScoreModel {
            bump_sigma_bins: 1.0,
            noise_std: 0.05,
            baseline: 0.05,
            gain: 1.0,
            gain_spread: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureModel {
    pub dim: usize,
    /// Fraction of coordinates spanned by the boundary signal direction.
    pub signal_dim_frac: f64,
    pub noise_std: f64,
}

impl Default for FeatureModel {
    fn default() -> Self {
        FeatureModel {
            dim: DEFAULT_INPUT_DIM,
            signal_dim_frac: 0.25,
            noise_std: 0.3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub duration_range_s: (f64, f64),
    pub boundary_count_range: (usize, usize),
    pub min_separation_s: f64,
    /// Truth and spurious boundaries stay this far from both ends.
    pub edge_margin_s: f64,
    pub bin_width_s: f64,
    pub rater: RaterModel,
    pub score: ScoreModel,
    pub feature: FeatureModel,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration_range_s: (4.0, 10.0),
            boundary_count_range: (1, 8),
            min_separation_s: 1.0,
            edge_margin_s: 0.3,
            bin_width_s: DEFAULT_BIN_WIDTH,
            rater: RaterModel::default(),
            score: ScoreModel::default(),
            feature: FeatureModel::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let (dlo, dhi) = self.duration_range_s;
        if !(dlo > 2.0 * self.edge_margin_s && dlo <= dhi && dhi.is_finite()) {
            return Err(Error::invalid(
                "duration range must exceed both edge margins",
            ));
        }
        let (clo, chi) = self.boundary_count_range;
        if clo > chi {
            return Err(Error::invalid("boundary count range is empty"));
        }
        if !(self.min_separation_s > 0.0 && self.bin_width_s > 0.0 && self.edge_margin_s >= 0.0) {
            return Err(Error::invalid(
                "separation, bin width and margin must be positive",
            ));
        }
        let r = &self.rater;
        if !(0.0..=1.0).contains(&r.drop_prob) || r.raters == 0 {
            return Err(Error::invalid(
                "drop_prob must lie in [0, 1] with at least one rater",
            ));
        }
        if !(r.jitter_std_s >= 0.0 && r.spurious_rate_per_video >= 0.0) {
            return Err(Error::invalid(
                "rater jitter and spurious rate must be >= 0",
            ));
        }
        let s = &self.score;
        if !(s.bump_sigma_bins >= 0.0 && s.noise_std >= 0.0 && (0.0..=1.0).contains(&s.gain_spread))
        {
            return Err(Error::invalid("invalid score model"));
        }
        let f = &self.feature;
        if f.dim == 0 || !(f.signal_dim_frac > 0.0 && f.signal_dim_frac <= 1.0) || f.noise_std < 0.0
        {
            return Err(Error::invalid("invalid feature model"));
        }
        Ok(())
    }
}

/// Ground truth plus rater annotations for a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub truth: Vec<BoundarySet>,
    pub records: Vec<AnnotationRecord>,
}

impl Corpus {
    pub fn metas(&self) -> Vec<VideoMeta> {
        self.records.iter().map(|r| r.meta.clone()).collect()
    }
}

pub fn video_id(index: usize) -> String {
    format!("vid_{index:05}")
}

fn rng_for(seed_value: u64, parts: &[&str]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed::derive(seed_value, parts))
}

fn normal(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("std is finite and >= 0")
}

fn gen_truth(config: &SynthConfig, rng: &mut ChaCha8Rng) -> (f64, Vec<f64>) {
    let (dlo, dhi) = config.duration_range_s;
    let duration = if dhi > dlo {
        rng.random_range(dlo..=dhi)
    } else {
        dlo
    };
    let duration = (duration * 100.0).round() / 100.0;
    let m = config.edge_margin_s;
    let sep = config.min_separation_s;
    let span = duration - 2.0 * m;
    let capacity = (span / sep).floor() as usize + 1;
    let (clo, chi) = config.boundary_count_range;
    let count = rng.random_range(clo..=chi).min(capacity);
    // uniform over configurations with gaps >= sep: draw in the slack, then spread
    let slack = span - count.saturating_sub(1) as f64 * sep;
    let mut u: Vec<f64> = (0..count)
        .map(|_| {
            if slack > 0.0 {
                rng.random_range(0.0..slack)
            } else {
                0.0
            }
        })
        .collect();
    u.sort_by(f64::total_cmp);
    let truth: Vec<f64> = u
        .into_iter()
        .enumerate()
        .map(|(i, x)| m + x + i as f64 * sep)
        .filter(|&t| t > 0.0 && t < duration)
        .collect();
    (duration, truth)
}

/// Mirrors `x` back into `[lo, hi]`; raters never mark the edge margins.
fn reflect_inside(x: f64, lo: f64, hi: f64) -> f64 {
    let x = if x < lo {
        2.0 * lo - x
    } else if x > hi {
        2.0 * hi - x
    } else {
        x
    };
    x.clamp(lo, hi)
}

fn gen_rater(truth: &[f64], duration: f64, config: &SynthConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let r = &config.rater;
    let jitter = normal(r.jitter_std_s);
    let lo = config.edge_margin_s.max(MIN_INTERIOR_S);
    let hi = duration - lo;
    let mut out = Vec::with_capacity(truth.len() + 1);
    for &t in truth {
        if rng.random::<f64>() < r.drop_prob {
            continue;
        }
        out.push(reflect_inside(t + jitter.sample(rng), lo, hi));
    }
    if r.spurious_rate_per_video > 0.0 {
        let n = Poisson::new(r.spurious_rate_per_video)
            .expect("rate is positive")
            .sample(rng) as usize;
        for _ in 0..n {
            out.push(rng.random_range(lo..hi));
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup_by(|later, kept| *later - *kept < DEDUP_EPS);
    out
}

/// Generates `n_videos` videos: truth boundaries and one annotation record
/// per video with `config.rater.raters` noisy raters.
pub fn gen_corpus(config: &SynthConfig, n_videos: usize) -> Result<Corpus> {
    config.validate()?;
    if n_videos == 0 {
        return Err(Error::invalid("n_videos must be >= 1"));
    }
    let videos: Vec<(BoundarySet, AnnotationRecord)> = (0..n_videos)
        .into_par_iter()
        .map(|i| {
            let id = video_id(i);
            let mut rng = rng_for(config.seed, &["truth", &id]);
            let (duration, truth) = gen_truth(config, &mut rng);
            let raters = (0..config.rater.raters)
                .map(|r| {
                    let mut rng = rng_for(config.seed, &["rater", &id, &r.to_string()]);
                    gen_rater(&truth, duration, config, &mut rng)
                })
                .collect();
            let meta = VideoMeta::new(id.clone(), duration, config.bin_width_s);
            (
                BoundarySet::new(id, truth),
                AnnotationRecord::new(meta, raters, Source::Human),
            )
        })
        .collect();
    let (truth, records) = videos.into_iter().unzip();
    Ok(Corpus { truth, records })
}

/// Simulated model scores: soft target of the truth, blurred into bumps of
/// height one, plus baseline and Gaussian noise, clamped to `[0, 1]`.
pub fn gen_scores(
    truth: &BoundarySet,
    meta: &VideoMeta,
    model: &ScoreModel,
    seed_value: u64,
) -> Result<ScoreCurve> {
    let target = encode_soft_labels(truth, meta)?;
    let mut rng = rng_for(seed_value, &["scores", &meta.video_id]);
    let gain = if model.gain_spread > 0.0 {
        model.gain * (1.0 - model.gain_spread * rng.random::<f64>())
    } else {
        model.gain
    };
    let blurred = if model.bump_sigma_bins > 0.0 {
        let kernel = half_kernel(model.bump_sigma_bins);
        let radius = kernel.len() - 1;
        let n = target.len();
        (0..n)
            .map(|i| {
                let lo = i.saturating_sub(radius);
                let hi = (i + radius).min(n - 1);
                (lo..=hi)
                    .map(|j| kernel[i.abs_diff(j)] * target.values[j])
                    .sum()
            })
            .collect()
    } else {
        target.values.clone()
    };
    let noise = normal(model.noise_std);
    let values = blurred
        .into_iter()
        .map(|v: f64| {
            let n = if model.noise_std > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            (gain * v + model.baseline + n).clamp(0.0, 1.0)
        })
        .collect();
    Ok(ScoreCurve::new(
        meta.video_id.clone(),
        meta.bin_width_s,
        values,
    ))
}

/// Unit vector spanning the first `ceil(frac·dim)` coordinates.
pub fn signal_direction(model: &FeatureModel) -> Vec<f64> {
    let k = ((model.signal_dim_frac * model.dim as f64).ceil() as usize).clamp(1, model.dim);
    let v = 1.0 / (k as f64).sqrt();
    (0..model.dim)
        .map(|i| if i < k { v } else { 0.0 })
        .collect()
}

/// Feature rows: the soft-target mass times a fixed signal direction, plus noise.
pub fn gen_features(
    truth: &BoundarySet,
    meta: &VideoMeta,
    model: &FeatureModel,
    seed_value: u64,
) -> Result<FeatureSequence> {
    let target = encode_soft_labels(truth, meta)?;
    let dir = signal_direction(model);
    let mut rng = rng_for(seed_value, &["features", &meta.video_id]);
    let noise = normal(model.noise_std);
    let mut data = Vec::with_capacity(target.len() * model.dim);
    for &mass in &target.values {
        for &d in &dir {
            let n = if model.noise_std > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            data.push(mass * d + n);
        }
    }
    FeatureSequence::new(meta.video_id.clone(), model.dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_record;

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::default();
        assert_eq!(gen_corpus(&cfg, 20).unwrap(), gen_corpus(&cfg, 20).unwrap());
        let other = SynthConfig {
            seed: 1,
            ..cfg.clone()
        };
        assert_ne!(
            gen_corpus(&cfg, 20).unwrap(),
            gen_corpus(&other, 20).unwrap()
        );
    }

    #[test]
    fn prefix_stable() {
        let cfg = SynthConfig::default();
        let small = gen_corpus(&cfg, 5).unwrap();
        let big = gen_corpus(&cfg, 50).unwrap();
        assert_eq!(small.records[..], big.records[..5]);
    }

    #[test]
    fn records_are_valid_and_truth_respects_separation() {
        let cfg = SynthConfig::default();
        let c = gen_corpus(&cfg, 200).unwrap();
        for (t, r) in c.truth.iter().zip(&c.records) {
            assert!(validate_record(r).is_empty(), "{:?}", validate_record(r));
            assert!(!t.is_empty());
            assert!(t.violations(r.meta.duration_s).is_empty());
            assert!(t
                .boundaries
                .windows(2)
                .all(|w| w[1] - w[0] >= cfg.min_separation_s - 1e-12));
            assert!(t.boundaries.iter().all(|&b| b >= cfg.edge_margin_s));
            assert_eq!(r.raters.len(), 5);
        }
    }

    #[test]
    fn noiseless_raters_equal_truth() {
        let cfg = SynthConfig {
            rater: RaterModel {
                jitter_std_s: 0.0,
                drop_prob: 0.0,
                spurious_rate_per_video: 0.0,
                raters: 3,
            },
            ..Default::default()
        };
        let c = gen_corpus(&cfg, 30).unwrap();
        for (t, r) in c.truth.iter().zip(&c.records) {
            for rater in &r.raters {
                assert_eq!(rater.boundaries, t.boundaries);
            }
        }
    }

    #[test]
    fn noiseless_scores_are_the_soft_target() {
        let cfg = SynthConfig::default();
        let c = gen_corpus(&cfg, 5).unwrap();
        let model = ScoreModel {
            bump_sigma_bins: 0.0,
            noise_std: 0.0,
            baseline: 0.0,
            ..Default::default()
        };
        for (t, r) in c.truth.iter().zip(&c.records) {
            let s = gen_scores(t, &r.meta, &model, 1).unwrap();
            assert_eq!(s, encode_soft_labels(t, &r.meta).unwrap());
        }
    }

    #[test]
    fn seeds_change_noise_not_bumps() {
        let cfg = SynthConfig::default();
        let c = gen_corpus(&cfg, 1).unwrap();
        let (t, m) = (&c.truth[0], &c.records[0].meta);
        let a = gen_scores(t, m, &cfg.score, 1).unwrap();
        let b = gen_scores(t, m, &cfg.score, 2).unwrap();
        assert_ne!(a, b);
        let clean = ScoreModel {
            noise_std: 0.0,
            ..cfg.score
        };
        let ca = gen_scores(t, m, &clean, 1).unwrap();
        let cb = gen_scores(t, m, &clean, 2).unwrap();
        assert_eq!(ca, cb);
        assert!(a.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn features_carry_soft_target_along_signal() {
        let cfg = SynthConfig::default();
        let c = gen_corpus(&cfg, 3).unwrap();
        let model = FeatureModel {
            noise_std: 0.0,
            ..cfg.feature
        };
        let dir = signal_direction(&model);
        for (t, r) in c.truth.iter().zip(&c.records) {
            let f = gen_features(t, &r.meta, &model, 0).unwrap();
            let target = encode_soft_labels(t, &r.meta).unwrap();
            assert_eq!(f.len(), r.meta.num_bins);
            for (row, &mass) in f.rows().zip(&target.values) {
                let proj: f64 = row.iter().zip(&dir).map(|(a, b)| a * b).sum();
                assert!((proj - mass).abs() < 1e-12);
                if mass == 0.0 {
                    assert!(row.iter().all(|&x| x == 0.0));
                }
            }
        }
    }
}
