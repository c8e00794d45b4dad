//! Decode predictions, turn them into pseudo annotations, and check that
//! re-encoding and decoding closes the loop.

use gebd_kit::pipeline::{decode_and_align, make_pseudo_labels};
use gebd_kit::softlabel::{decode_boundaries, encode_soft_labels, DecodeConfig};
use gebd_kit::synth::{gen_corpus, gen_scores, ScoreModel, SynthConfig};
use gebd_kit::validate_record;

fn main() -> gebd_kit::Result<()> {
    let config = SynthConfig {
        min_separation_s: 2.0,
        ..SynthConfig::default()
    };
    let corpus = gen_corpus(&config, 20)?;
    let metas = corpus.metas();
    let model = ScoreModel::default();

    let preds = corpus
        .truth
        .iter()
        .zip(&metas)
        .map(|(t, m)| {
            decode_and_align(
                &gen_scores(t, m, &model, 4)?,
                m,
                &DecodeConfig::default(),
                None,
            )
        })
        .collect::<gebd_kit::Result<Vec<_>>>()?;
    let pseudo = make_pseudo_labels(&preds, &metas)?;
    println!(
        "{} pseudo records from {} videos",
        pseudo.len(),
        preds.len()
    );

    let exact = DecodeConfig {
        sigma_bins: 0.0,
        ..DecodeConfig::default()
    };
    let mut worst: f64 = 0.0;
    for rec in &pseudo {
        assert!(validate_record(rec).is_empty());
        let label = &rec.raters[0];
        let back = decode_boundaries(&encode_soft_labels(label, &rec.meta)?, &rec.meta, &exact)?;
        for (a, b) in label.boundaries.iter().zip(&back.boundaries) {
            worst = worst.max((a - b).abs() / rec.meta.bin_width_s);
        }
    }
    println!("worst loop-closure drift: {worst:.4} bins");
    Ok(())
}
