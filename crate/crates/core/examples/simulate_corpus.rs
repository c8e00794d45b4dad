//! Generate a small seeded corpus and write it out as JSON lines.

use gebd_kit::io;
use gebd_kit::synth::{gen_corpus, gen_scores, ScoreModel, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = SynthConfig {
        seed: 3,
        ..SynthConfig::default()
    };
    let corpus = gen_corpus(&config, 5)?;
    for (truth, rec) in corpus.truth.iter().zip(&corpus.records) {
        println!(
            "{} ({:.2}s, {} bins)",
            rec.video_id(),
            rec.meta.duration_s,
            rec.meta.num_bins
        );
        println!("  truth  {:.2?}", truth.boundaries);
        for rater in &rec.raters {
            println!("  rater  {:.2?}", rater.boundaries);
        }
    }

    let dir = std::env::temp_dir().join("gebd-kit-simulate-example");
    std::fs::create_dir_all(&dir)?;
    let scores = corpus
        .truth
        .iter()
        .zip(corpus.metas())
        .map(|(t, m)| gen_scores(t, &m, &ScoreModel::default(), 1))
        .collect::<gebd_kit::Result<Vec<_>>>()?;
    io::write_annotations(&corpus.records, &dir.join("annotations.jsonl"))?;
    io::write_scores(&scores, &dir.join("scores.jsonl"))?;
    println!("wrote {}", dir.display());
    Ok(())
}
