//! Train the dual-head scorer on synthetic features and check its gradients.

use gebd_kit::eval::{corpus_f1, RaterAggregation};
use gebd_kit::scorer::{grad_check, predict, train, LossConfig, ScorerParams};
use gebd_kit::softlabel::{decode_boundaries, encode_rater_mean, DecodeConfig};
use gebd_kit::synth::{gen_corpus, gen_features, SynthConfig};

fn main() -> gebd_kit::Result<()> {
    let config = SynthConfig::default();
    let corpus = gen_corpus(&config, 60)?;
    let data = corpus
        .truth
        .iter()
        .zip(&corpus.records)
        .map(|(t, r)| {
            Ok((
                gen_features(t, &r.meta, &config.feature, 9)?,
                encode_rater_mean(r)?,
            ))
        })
        .collect::<gebd_kit::Result<Vec<_>>>()?;
    let (train_set, test_set) = data.split_at(40);

    let loss = LossConfig {
        epochs: 40,
        ..LossConfig::default()
    };
    let init = ScorerParams::init(config.feature.dim, 16, loss.seed);
    let err = grad_check(&init, &train_set[0].0, &train_set[0].1, &loss)?;
    println!("gradient check: max relative error {err:.2e}");

    let (params, history) = train(&init, train_set, &loss)?;
    println!(
        "loss {:.4} -> {:.4} over {} epochs",
        history[0],
        history[history.len() - 1],
        history.len()
    );

    let records = &corpus.records[40..];
    for (name, p) in [("untrained", &init), ("trained", &params)] {
        let preds = test_set
            .iter()
            .zip(records)
            .map(|((f, _), r)| {
                decode_boundaries(
                    &predict(p, f, r.meta.bin_width_s)?,
                    &r.meta,
                    &DecodeConfig::default(),
                )
            })
            .collect::<gebd_kit::Result<Vec<_>>>()?;
        let report = corpus_f1(&preds, records, 0.05, RaterAggregation::Max)?;
        println!("{name:>9}: held-out mean F1 {:.4}", report.mean_f1);
    }
    Ok(())
}
