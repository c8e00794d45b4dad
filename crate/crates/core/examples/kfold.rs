//! Deterministic, seed-stable k-fold splits over video ids.

use gebd_kit::pipeline::kfold_split;
use gebd_kit::synth::video_id;

fn main() -> gebd_kit::Result<()> {
    let ids: Vec<String> = (0..23).map(video_id).collect();
    let folds = kfold_split(&ids, 5, 42)?;
    for (i, fold) in folds.iter().enumerate() {
        println!(
            "fold {i}: {} train, {} valid: {}",
            fold.train_ids.len(),
            fold.valid_ids.len(),
            fold.valid_ids.join(" ")
        );
    }
    assert_eq!(kfold_split(&ids, 5, 42)?, folds);
    Ok(())
}
