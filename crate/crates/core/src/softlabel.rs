//! Soft-label encoding of boundary annotations and the matching decoder.
//!
//! A boundary at time `t` splits its unit mass between the two bins that
//! bracket it: with `q = t / p` and `f = q - floor(q)`, bin `floor(q)`
//! receives `1 - f` and bin `floor(q) + 1` receives `f`. Decoding runs the
//! reverse direction: smooth the score curve, keep windowed local maxima
//! above a threshold, then shift each maximum by a sub-bin bias estimated
//! from the two scores on either side.

use serde::{Deserialize, Serialize};

use crate::types::{AnnotationRecord, BoundarySet, ScoreCurve, SoftTarget, VideoMeta};
use crate::{Error, Result};

/// Decoded boundaries are kept at least this far inside `(0, duration)`.
pub const EDGE_EPS: f64 = 1e-6;

/// Decoder settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    /// Gaussian smoothing width in bins; `0` disables smoothing.
    pub sigma_bins: f64,
    /// Half-width of the local-maximum window, in bins.
    pub peak_window_bins: usize,
    /// Minimum smoothed score for a peak.
    pub threshold: f64,
    /// Peaks weaker than this get no bias shift.
    pub min_peak_score_eps: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            sigma_bins: 1.0,
            peak_window_bins: 2,
            threshold: 0.4,
            min_peak_score_eps: 1e-6,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_bins >= 0.0 && self.sigma_bins.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma must be >= 0, got {}",
                self.sigma_bins
            )));
        }
        if self.peak_window_bins == 0 {
            return Err(Error::invalid("peak window must be >= 1 bin"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::invalid(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.threshold <= self.min_peak_score_eps {
            return Err(Error::invalid("threshold must exceed min_peak_score_eps"));
        }
        Ok(())
    }
}

/// Spreads each boundary over its two bracketing bins.
///
/// Mass that would land past the last bin is added to the last bin, and
/// every bin is clamped to `[0, 1]` at the end.
pub fn encode_soft_labels(boundaries: &BoundarySet, meta: &VideoMeta) -> Result<SoftTarget> {
    let n = meta.num_bins;
    let p = meta.bin_width_s;
    let mut target = vec![0.0; n];
    for &t in &boundaries.boundaries {
        if !(t > 0.0 && t < meta.duration_s) {
            return Err(Error::BoundaryOutOfRange {
                video_id: meta.video_id.clone(),
                value: t,
                duration: meta.duration_s,
            });
        }
        let q = t / p;
        let lower = q.floor();
        let frac = q - lower;
        let k = lower as usize;
        if k + 1 < n {
            target[k] += 1.0 - frac;
            target[k + 1] += frac;
        } else {
            target[n - 1] += 1.0;
        }
    }
    for v in &mut target {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(ScoreCurve::new(meta.video_id.clone(), p, target))
}

/// Unnormalized Gaussian weights `exp(-k^2 / 2 sigma^2)` for `k = 0..=ceil(3 sigma)`.
pub(crate) fn half_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    (0..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect()
}

/// Gaussian smoothing with the kernel renormalized over the in-range taps,
/// so constant curves stay constant up to the edges.
pub fn gaussian_smooth(curve: &ScoreCurve, sigma_bins: f64) -> ScoreCurve {
    if sigma_bins <= 0.0 || curve.values.is_empty() {
        return curve.clone();
    }
    let kernel = half_kernel(sigma_bins);
    let radius = kernel.len() - 1;
    let s = &curve.values;
    let n = s.len();
    let values = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(radius);
            let hi = (i + radius).min(n - 1);
            let mut acc = 0.0;
            let mut norm = 0.0;
            for (j, &v) in s.iter().enumerate().take(hi + 1).skip(lo) {
                let w = kernel[i.abs_diff(j)];
                acc += w * v;
                norm += w;
            }
            acc / norm
        })
        .collect();
    ScoreCurve::new(curve.video_id.clone(), curve.bin_width_s, values)
}

/// Windowed local maxima at or above the threshold.
///
/// Bin `i` qualifies when no value within `±peak_window_bins` exceeds it,
/// at least one in-range neighbor is strictly lower, and it reaches the
/// threshold. Along a run of equal adjacent qualifying bins only the first
/// is kept.
pub fn find_peaks(curve: &ScoreCurve, config: &DecodeConfig) -> Vec<usize> {
    let s = &curve.values;
    let n = s.len();
    let w = config.peak_window_bins;
    let mut peaks: Vec<usize> = Vec::new();
    for i in 0..n {
        let v = s[i];
        if v < config.threshold {
            continue;
        }
        let lo = i.saturating_sub(w);
        let hi = (i + w).min(n - 1);
        let window = &s[lo..=hi];
        if window.iter().any(|&x| x > v) {
            continue;
        }
        if !window.iter().any(|&x| x < v) {
            continue;
        }
        if let Some(&last) = peaks.last() {
            if last + 1 == i && s[last] == v {
                continue;
            }
        }
        peaks.push(i);
    }
    peaks
}

/// Sub-bin shift (seconds) for a peak at bin `i`: the two scores to the
/// right minus the two to the left, over the peak score, times `p / 2`.
/// Neighbors past either end count as zero.
pub fn compute_bias(curve: &ScoreCurve, i: usize, min_peak_score_eps: f64) -> f64 {
    let s = &curve.values;
    let peak = s[i];
    if peak < min_peak_score_eps {
        return 0.0;
    }
    let at = |k: isize| -> f64 {
        if k < 0 {
            0.0
        } else {
            s.get(k as usize).copied().unwrap_or(0.0)
        }
    };
    let i = i as isize;
    let right = at(i + 1) + at(i + 2);
    let left = at(i - 2) + at(i - 1);
    (right - left) / peak * curve.bin_width_s / 2.0
}

/// A decoded boundary and the smoothed score of the peak it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedPeak {
    pub time: f64,
    pub score: f64,
}

/// Full decode returning peak scores alongside the times (sorted by time,
/// exact duplicates merged keeping the stronger score).
pub fn decode_peaks(
    curve: &ScoreCurve,
    meta: &VideoMeta,
    config: &DecodeConfig,
) -> Result<Vec<DecodedPeak>> {
    curve.check_meta(meta)?;
    let smooth = gaussian_smooth(curve, config.sigma_bins);
    let (lo, hi) = if meta.duration_s > 2.0 * EDGE_EPS {
        (EDGE_EPS, meta.duration_s - EDGE_EPS)
    } else {
        (meta.duration_s / 2.0, meta.duration_s / 2.0)
    };
    let mut out: Vec<DecodedPeak> = find_peaks(&smooth, config)
        .into_iter()
        .map(|i| {
            let t = meta.bin_time(i) + compute_bias(&smooth, i, config.min_peak_score_eps);
            DecodedPeak {
                time: t.clamp(lo, hi),
                score: smooth.values[i],
            }
        })
        .collect();
    out.sort_by(|a, b| a.time.total_cmp(&b.time));
    out.dedup_by(|later, kept| {
        if later.time == kept.time {
            kept.score = kept.score.max(later.score);
            true
        } else {
            false
        }
    });
    Ok(out)
}

/// Mean of the per-rater soft targets of a record.
pub fn encode_rater_mean(record: &AnnotationRecord) -> Result<SoftTarget> {
    let mut acc = ScoreCurve::zeros(&record.meta);
    let weight = 1.0 / record.raters.len().max(1) as f64;
    for rater in &record.raters {
        let target = encode_soft_labels(rater, &record.meta)?;
        for (a, v) in acc.values.iter_mut().zip(&target.values) {
            *a += weight * v;
        }
    }
    Ok(acc)
}

/// Smooth, pick peaks, shift each by its bias.
pub fn decode_boundaries(
    curve: &ScoreCurve,
    meta: &VideoMeta,
    config: &DecodeConfig,
) -> Result<BoundarySet> {
    let peaks = decode_peaks(curve, meta, config)?;
    Ok(BoundarySet::new(
        meta.video_id.clone(),
        peaks.into_iter().map(|p| p.time).collect(),
    ))
}
