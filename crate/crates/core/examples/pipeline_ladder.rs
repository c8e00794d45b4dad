//! Run the post-processing ladder: single model, + alignment, + ensemble,
//! + easy/hard routing.

use gebd_kit::align::AlignConfig;
use gebd_kit::eval::RaterAggregation;
use gebd_kit::pipeline::{run_ladder, EnsembleSpec, ModelScores};
use gebd_kit::softlabel::DecodeConfig;
use gebd_kit::synth::{gen_corpus, gen_scores, ScoreModel, SynthConfig};

fn main() -> gebd_kit::Result<()> {
    let corpus = gen_corpus(&SynthConfig::default(), 150)?;
    let model = ScoreModel {
        noise_std: 0.12,
        gain_spread: 0.6,
        ..ScoreModel::default()
    };
    let mut scores = ModelScores::new();
    for k in 0..3u64 {
        let curves = corpus
            .truth
            .iter()
            .zip(corpus.metas())
            .map(|(t, m)| gen_scores(t, &m, &model, 100 + k))
            .collect::<gebd_kit::Result<Vec<_>>>()?;
        scores.insert(format!("m{k}"), curves);
    }
    let spec = EnsembleSpec {
        easy_model_ids: vec!["m0".into(), "m1".into()],
        hard_model_ids: vec!["m0".into(), "m1".into(), "m2".into()],
        ..EnsembleSpec::uniform(vec![])
    };
    let out = run_ladder(
        &scores,
        &corpus.records,
        &spec,
        &DecodeConfig::default(),
        &AlignConfig::default(),
        0.05,
        RaterAggregation::Max,
    )?;
    print!("{}", out.report.table());
    Ok(())
}
