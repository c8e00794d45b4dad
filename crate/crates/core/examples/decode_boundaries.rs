//! Smooth a noisy score curve, pick peaks and refine each to sub-bin time.

use gebd_kit::softlabel::{decode_peaks, find_peaks, gaussian_smooth, DecodeConfig};
use gebd_kit::synth::{gen_scores, ScoreModel};
use gebd_kit::{BoundarySet, VideoMeta};

fn main() -> gebd_kit::Result<()> {
    let meta = VideoMeta::new("demo", 8.0, 0.25);
    let truth = BoundarySet::new("demo", vec![1.6, 4.05, 6.4]);
    let model = ScoreModel {
        noise_std: 0.1,
        ..ScoreModel::default()
    };
    let curve = gen_scores(&truth, &meta, &model, 11)?;

    let config = DecodeConfig::default();
    let smooth = gaussian_smooth(&curve, config.sigma_bins);
    println!("raw peaks:      {:?}", find_peaks(&curve, &config));
    println!("smoothed peaks: {:?}", find_peaks(&smooth, &config));

    for peak in decode_peaks(&curve, &meta, &config)? {
        println!(
            "boundary at {:.3}s (smoothed score {:.3})",
            peak.time, peak.score
        );
    }
    println!("truth: {:?}", truth.boundaries);
    Ok(())
}
