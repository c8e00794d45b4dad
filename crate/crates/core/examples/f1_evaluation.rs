//! One-to-one boundary matching and multi-rater F1.

use gebd_kit::eval::{corpus_f1, match_boundaries, RaterAggregation};
use gebd_kit::{AnnotationRecord, BoundarySet, Source, VideoMeta};

fn main() -> gebd_kit::Result<()> {
    let pred = BoundarySet::new("a", vec![2.1, 4.0, 4.3, 8.9]);
    let gt = BoundarySet::new("a", vec![2.0, 4.2, 7.0]);
    let m = match_boundaries(&pred, &gt, 10.0, 0.05);
    println!(
        "tp {} fp {} fn {}  precision {:.3} recall {:.3} f1 {:.3}",
        m.tp, m.fp, m.fn_, m.precision, m.recall, m.f1
    );

    let records = vec![
        AnnotationRecord::new(
            VideoMeta::new("a", 10.0, 0.25),
            vec![vec![2.0, 4.2, 7.0], vec![2.2, 4.1, 9.0]],
            Source::Human,
        ),
        AnnotationRecord::new(
            VideoMeta::new("b", 5.0, 0.25),
            vec![vec![2.5]],
            Source::Human,
        ),
    ];
    let preds = vec![pred, BoundarySet::new("b", vec![2.6])];
    for agg in [RaterAggregation::Max, RaterAggregation::Mean] {
        let report = corpus_f1(&preds, &records, 0.05, agg)?;
        println!("\n{agg}:\n{}", report.table());
    }
    Ok(())
}
