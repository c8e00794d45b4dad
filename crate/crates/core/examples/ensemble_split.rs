//! Average several models' curves and route videos to the easy or hard list.

use gebd_kit::pipeline::{ensemble_mean, route_corpus, EnsembleSpec, ModelScores};
use gebd_kit::synth::{gen_corpus, gen_scores, ScoreModel, SynthConfig};

fn main() -> gebd_kit::Result<()> {
    let config = SynthConfig::default();
    let corpus = gen_corpus(&config, 8)?;
    let strong = ScoreModel::default();
    let weak = ScoreModel {
        gain: 0.6,
        gain_spread: 0.5,
        ..ScoreModel::default()
    };

    let mut scores = ModelScores::new();
    for (id, model, seed) in [
        ("strong", strong, 1),
        ("weak_a", weak, 2),
        ("weak_b", weak, 3),
    ] {
        let curves = corpus
            .truth
            .iter()
            .zip(corpus.metas())
            .map(|(t, m)| gen_scores(t, &m, &model, seed))
            .collect::<gebd_kit::Result<Vec<_>>>()?;
        scores.insert(id.to_string(), curves);
    }

    let first = ensemble_mean(&[
        ("weak_a", &scores["weak_a"][0]),
        ("weak_b", &scores["weak_b"][0]),
    ])?;
    println!(
        "two-model mean of {}: max {:.3}",
        first.video_id,
        first.max()
    );

    let spec = EnsembleSpec {
        easy_model_ids: vec!["strong".into(), "weak_a".into()],
        hard_model_ids: vec!["strong".into(), "weak_a".into(), "weak_b".into()],
        ..EnsembleSpec::uniform(vec![])
    };
    println!("cutoff {:.2}", spec.cutoff());
    for r in route_corpus(&scores, &spec)? {
        println!(
            "{}  max {:.3}  {:?}",
            r.video_id, r.routing_max, r.difficulty
        );
    }
    Ok(())
}
