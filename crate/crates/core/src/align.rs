//! Segmentation alignment: move predicted boundaries the least total
//! squared distance so they clear the video edges and each other.
//!
//! For a video of duration `D` the feasible set is
//!
//! ```text
//! lo = margin + r·D,   hi = D - margin - r·D,   gap = 2·r·D
//! lo <= x_1,   x_{i+1} - x_i >= gap,   x_n <= hi
//! ```
//!
//! Substituting `y_i = x_i - (i-1)·gap` turns the gap constraints into a
//! monotonicity constraint on `y` with box bounds `[lo, hi - (n-1)·gap]`.
//! The L2 projection onto that set is the isotonic regression of `y`
//! clamped to the box.

use serde::{Deserialize, Serialize};

use crate::types::BoundarySet;
use crate::{Error, Result};

/// Slack used when deciding whether a set already satisfies the constraints.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Seconds at each end of the video that never hold a boundary.
    pub edge_margin_s: f64,
    /// Matching radius as a fraction of the duration.
    pub rel_dis: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            edge_margin_s: 0.3,
            rel_dis: 0.05,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.edge_margin_s >= 0.0 && self.edge_margin_s.is_finite()) {
            return Err(Error::invalid("edge margin must be >= 0"));
        }
        if !(self.rel_dis > 0.0 && self.rel_dis < 0.5) {
            return Err(Error::invalid("rel_dis must lie in (0, 0.5)"));
        }
        Ok(())
    }
}

/// Bounds and minimum gap for one video.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibleBand {
    pub lo: f64,
    pub hi: f64,
    pub gap: f64,
}

impl FeasibleBand {
    pub fn new(duration: f64, config: &AlignConfig) -> Self {
        let slack = config.edge_margin_s + config.rel_dis * duration;
        FeasibleBand {
            lo: slack,
            hi: duration - slack,
            gap: 2.0 * config.rel_dis * duration,
        }
    }

    /// Largest number of boundaries the band can hold.
    pub fn capacity(&self) -> usize {
        if self.hi < self.lo {
            return 0;
        }
        ((self.hi - self.lo) / self.gap + FEASIBILITY_TOL).floor() as usize + 1
    }

    /// True when `xs` satisfies every constraint within [`FEASIBILITY_TOL`].
    pub fn admits(&self, xs: &[f64]) -> bool {
        match (xs.first(), xs.last()) {
            (Some(&first), Some(&last)) => {
                first >= self.lo - FEASIBILITY_TOL
                    && last <= self.hi + FEASIBILITY_TOL
                    && xs
                        .windows(2)
                        .all(|w| w[1] - w[0] >= self.gap - FEASIBILITY_TOL)
            }
            _ => true,
        }
    }
}

pub fn max_feasible_count(duration: f64, config: &AlignConfig) -> usize {
    FeasibleBand::new(duration, config).capacity()
}

/// Unit-weight isotonic (non-decreasing) L2 regression by pool-adjacent-violators.
pub fn isotonic_l2(y: &[f64]) -> Vec<f64> {
    // (block mean, block size)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(y.len());
    for &v in y {
        let mut mean = v;
        let mut size = 1usize;
        while let Some(&(prev_mean, prev_size)) = blocks.last() {
            if prev_mean <= mean {
                break;
            }
            blocks.pop();
            let total = prev_size + size;
            mean = (prev_mean * prev_size as f64 + mean * size as f64) / total as f64;
            size = total;
        }
        blocks.push((mean, size));
    }
    blocks
        .into_iter()
        .flat_map(|(mean, size)| std::iter::repeat_n(mean, size))
        .collect()
}

/// Least-squares projection of sorted `xs` onto the band. Requires
/// `xs.len() <= band.capacity()`.
pub fn project(xs: &[f64], band: &FeasibleBand) -> Vec<f64> {
    if band.admits(xs) {
        return xs.to_vec();
    }
    let n = xs.len();
    let shifted: Vec<f64> = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| x - i as f64 * band.gap)
        .collect();
    let upper = band.hi - (n.saturating_sub(1)) as f64 * band.gap;
    isotonic_l2(&shifted)
        .into_iter()
        .enumerate()
        .map(|(i, z)| z.min(upper).max(band.lo) + i as f64 * band.gap)
        .collect()
}

/// Indices kept after dropping the weakest boundaries until `keep` remain.
/// Ties drop the later boundary first.
fn prune(scores: &[f64], keep: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)));
    let drop = scores.len().saturating_sub(keep);
    let mut kept: Vec<usize> = order[drop..].to_vec();
    kept.sort_unstable();
    kept
}

/// Shifts `pred` the minimum squared distance into the feasible band.
///
/// When more boundaries are predicted than the band can hold, the ones with
/// the lowest `peak_scores` are dropped first, which requires scores.
pub fn align_boundaries(
    pred: &BoundarySet,
    peak_scores: Option<&[f64]>,
    duration: f64,
    config: &AlignConfig,
) -> Result<BoundarySet> {
    let xs = &pred.boundaries;
    if !xs.windows(2).all(|w| w[0] <= w[1]) {
        return Err(Error::invalid(format!(
            "predictions for {:?} are not sorted",
            pred.video_id
        )));
    }
    if let Some(s) = peak_scores {
        if s.len() != xs.len() {
            return Err(Error::LengthMismatch {
                video_id: pred.video_id.clone(),
                expected: xs.len(),
                found: s.len(),
            });
        }
    }
    let band = FeasibleBand::new(duration, config);
    let capacity = band.capacity();
    let kept: Vec<f64> = if xs.len() > capacity {
        let scores = peak_scores.ok_or(Error::ScoresRequired)?;
        prune(scores, capacity).into_iter().map(|i| xs[i]).collect()
    } else {
        xs.clone()
    };
    Ok(BoundarySet::new(
        pred.video_id.clone(),
        project(&kept, &band),
    ))
}
