//! Command-line front end behind the `gebd-kit` binary.
//!
//! Every subcommand reads JSON-lines inputs, runs one library operation and
//! writes results to files; tables go to stdout and diagnostics to stderr.
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::align::{align_boundaries, AlignConfig};
use crate::eval::{corpus_f1, RaterAggregation};
use crate::io;
use crate::pipeline::{
    kfold_split, make_pseudo_labels, route_corpus, run_ensemble, run_ladder, EnsembleSpec,
    ModelScores,
};
use crate::scorer::{self, FeatureSequence, LossConfig, Optimizer, ScorerParams};
use crate::softlabel::{self, decode_boundaries, gaussian_smooth, DecodeConfig};
use crate::synth::{self, FeatureModel, RaterModel, ScoreModel, SynthConfig};
use crate::types::{AnnotationRecord, BoundarySet, ScoreCurve, SoftTarget, VideoMeta};
use crate::{seed, Error, DEFAULT_BIN_WIDTH};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "gebd-kit",
    version,
    about = "Boundary decoding, alignment, ensembling and F1 evaluation for event boundary detection"
)]
pub struct Cli {
    /// Seed for simulation, initialization and fold assignment.
    #[arg(long, global = true, env = "GEBD_KIT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for per-video work (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Generate a synthetic corpus: annotations, truth, features, and
    /// `scores/<model>.jsonl` per simulated model.
    Simulate(SimulateArgs),
    /// Turn annotations into soft-label targets (written as a scores file).
    Encode(EncodeArgs),
    /// Score feature sequences with a trained scorer.
    Score(ScoreArgs),
    /// Train the dual-head scorer on features and annotations.
    Train(TrainArgs),
    /// Compare analytic scorer gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Decode score curves into boundary predictions.
    Decode(DecodeCmdArgs),
    /// Shift predictions into the feasible band.
    Align(AlignCmdArgs),
    /// Average several models' scores, route easy/hard, decode and align.
    Ensemble(EnsembleArgs),
    /// Classify videos as easy or hard from the easy-list ensemble.
    Split(SplitArgs),
    /// Turn predictions into single-rater pseudo annotations.
    PseudoLabel(PseudoLabelArgs),
    /// Deterministic k-fold split of the annotated videos.
    Kfold(KfoldArgs),
    /// F1 of predictions against annotations.
    Eval(EvalArgs),
    /// Run the post-processing ladder: raw, +align, +ensemble, +easy/hard.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DecodeArgs {
    /// Gaussian smoothing width in bins (0 disables smoothing).
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    /// Minimum smoothed score for a peak.
    #[arg(long, default_value_t = 0.4)]
    pub threshold: f64,
    /// Half-width of the local-maximum window in bins.
    #[arg(long, default_value_t = 2)]
    pub window: usize,
    /// Peaks weaker than this get no sub-bin shift.
    #[arg(long, default_value_t = 1e-6)]
    pub min_peak_score: f64,
}

impl DecodeArgs {
    fn config(&self) -> crate::Result<DecodeConfig> {
        let c = DecodeConfig {
            sigma_bins: self.sigma,
            peak_window_bins: self.window,
            threshold: self.threshold,
            min_peak_score_eps: self.min_peak_score,
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AlignArgs {
    /// Seconds at each end that never hold a boundary.
    #[arg(long, default_value_t = 0.3)]
    pub edge_margin: f64,
    /// Matching radius as a fraction of the duration.
    #[arg(long, default_value_t = 0.05)]
    pub rel_dis: f64,
}

impl AlignArgs {
    fn config(&self) -> crate::Result<AlignConfig> {
        let c = AlignConfig {
            edge_margin_s: self.edge_margin,
            rel_dis: self.rel_dis,
        };
        c.validate()?;
        Ok(c)
    }
}

/// A `--scores` value: `model_id=path`, or a bare path named after its file stem.
#[derive(Debug, Clone, Serialize)]
pub struct ModelPath {
    pub model_id: String,
    pub path: PathBuf,
}

fn parse_model_path(s: &str) -> Result<ModelPath, String> {
    let (id, path) = match s.split_once('=') {
        Some((id, path)) => (id.to_string(), PathBuf::from(path)),
        None => {
            let path = PathBuf::from(s);
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .ok_or_else(|| format!("cannot derive a model id from {s:?}"))?
                .to_string();
            (stem, path)
        }
    };
    if id.is_empty() || path.as_os_str().is_empty() {
        return Err(format!("expected MODEL=PATH or PATH, got {s:?}"));
    }
    Ok(ModelPath { model_id: id, path })
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub videos: usize,
    /// Number of simulated models (ids m0, m1, ...).
    #[arg(long, default_value_t = 3)]
    pub models: usize,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
    #[arg(long, default_value_t = 4.0)]
    pub duration_min: f64,
    #[arg(long, default_value_t = 10.0)]
    pub duration_max: f64,
    #[arg(long, default_value_t = 1)]
    pub boundaries_min: usize,
    #[arg(long, default_value_t = 8)]
    pub boundaries_max: usize,
    #[arg(long, default_value_t = 1.0)]
    pub min_separation: f64,
    #[arg(long, default_value_t = 0.3)]
    pub edge_margin: f64,
    #[arg(long, default_value_t = 5)]
    pub raters: usize,
    #[arg(long, default_value_t = 0.15)]
    pub jitter: f64,
    #[arg(long, default_value_t = 0.1)]
    pub drop_prob: f64,
    #[arg(long, default_value_t = 0.3)]
    pub spurious_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub bump_sigma: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0.05)]
    pub baseline: f64,
    /// Per-video bump amplitude is drawn from [1 - spread, 1].
    #[arg(long, default_value_t = 0.0)]
    pub gain_spread: f64,
    #[arg(long, default_value_t = 16)]
    pub feature_dim: usize,
    #[arg(long, default_value_t = 0.25)]
    pub signal_frac: f64,
    #[arg(long, default_value_t = 0.3)]
    pub feature_noise: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EncodeArgs {
    #[arg(long)]
    pub ann: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Encode a single rater instead of the mean over raters.
    #[arg(long)]
    pub rater: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct LossArgs {
    #[arg(long, default_value_t = 8.0)]
    pub pos_weight: f64,
    /// Weight of the squared-error head (0 trains the BCE head alone).
    #[arg(long, default_value_t = 1.0)]
    pub mse_weight: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub ann: PathBuf,
    /// Where to write the trained parameters (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional per-epoch loss history (JSON array).
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[arg(long, default_value_t = scorer::DEFAULT_HIDDEN)]
    pub hidden: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// gd or adam.
    #[arg(long, default_value = "adam", value_parser = parse_optimizer)]
    pub optimizer: Optimizer,
    #[command(flatten)]
    pub loss: LossArgs,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
}

fn parse_optimizer(s: &str) -> Result<Optimizer, String> {
    match s {
        "gd" => Ok(Optimizer::Gd),
        "adam" => Ok(Optimizer::Adam),
        _ => Err(format!("unknown optimizer {s:?} (expected gd or adam)")),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub ann: PathBuf,
    /// Parameters to check at; defaults to a seeded initialization.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = scorer::DEFAULT_HIDDEN)]
    pub hidden: usize,
    /// Number of videos (in id order) to check.
    #[arg(long, default_value_t = 3)]
    pub videos: usize,
    /// Exit with a data error when the max relative error exceeds this.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[command(flatten)]
    pub loss: LossArgs,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DecodeCmdArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Annotations supplying durations; otherwise duration = bins x bin width.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[command(flatten)]
    pub decode: DecodeArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct AlignCmdArgs {
    #[arg(long)]
    pub pred: PathBuf,
    /// Annotations supplying durations.
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Score curves used to rank boundaries when some must be dropped.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    /// Smoothing applied to `--scores` before reading peak scores.
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[command(flatten)]
    pub align: AlignArgs,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EnsembleArgs {
    /// MODEL=PATH score files (repeatable).
    #[arg(long = "scores", required = true, value_parser = parse_model_path)]
    pub scores: Vec<ModelPath>,
    /// Ensemble spec (JSON); defaults to every model in both lists.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the final ensembled curves.
    #[arg(long)]
    pub curves_out: Option<PathBuf>,
    /// Also write the per-video easy/hard routing (JSON).
    #[arg(long)]
    pub routing_out: Option<PathBuf>,
    #[command(flatten)]
    pub decode: DecodeArgs,
    #[command(flatten)]
    pub align: AlignArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long = "scores", required = true, value_parser = parse_model_path)]
    pub scores: Vec<ModelPath>,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct PseudoLabelArgs {
    #[arg(long)]
    pub pred: PathBuf,
    /// Annotations or any records supplying durations.
    #[arg(long)]
    pub meta: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct KfoldArgs {
    #[arg(long)]
    pub ann: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub ann: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    pub rel_dis: f64,
    /// Per-video aggregation over raters: max or mean.
    #[arg(long, default_value = "max")]
    pub agg: RaterAggregation,
    /// Write the JSON report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print the JSON report instead of the table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct PipelineArgs {
    #[arg(long)]
    pub ann: PathBuf,
    #[arg(long = "scores", required = true, value_parser = parse_model_path)]
    pub scores: Vec<ModelPath>,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Receives ladder.json and predictions.jsonl.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value = "max")]
    pub agg: RaterAggregation,
    #[command(flatten)]
    pub decode: DecodeArgs,
    /// Also used as the evaluation radius.
    #[command(flatten)]
    pub align: AlignArgs,
    #[arg(long, default_value_t = DEFAULT_BIN_WIDTH)]
    pub bin_width: f64,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    match serde_json::to_string(&cli) {
        Ok(line) => eprintln!("config: {line}"),
        Err(e) => eprintln!("config: <unserializable: {e}>"),
    }
    let result = match cli.jobs {
        Some(0) => Err(Failure::Usage("--jobs must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(Failure::Usage(format!("cannot start {n} workers: {e}"))),
        },
        None => run(&cli),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            EXIT_DATA
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let force = cli.force;
    match &cli.command {
        Command::Simulate(a) => simulate(a, cli.seed, force),
        Command::Encode(a) => encode(a, force),
        Command::Score(a) => score(a, force),
        Command::Train(a) => train(a, cli.seed, force),
        Command::Gradcheck(a) => gradcheck(a, cli.seed),
        Command::Decode(a) => decode(a, force),
        Command::Align(a) => align(a, force),
        Command::Ensemble(a) => ensemble(a, force),
        Command::Split(a) => split(a, force),
        Command::PseudoLabel(a) => pseudo_label(a, force),
        Command::Kfold(a) => kfold(a, cli.seed, force),
        Command::Eval(a) => eval(a, force),
        Command::Pipeline(a) => pipeline(a, force),
    }
}

/// Refuses to touch existing outputs unless forced; checked before any work.
fn check_outputs(paths: &[&Path], force: bool) -> Outcome {
    let mut seen = BTreeSet::new();
    for p in paths {
        if !seen.insert(*p) {
            return Err(Failure::Usage(format!(
                "output {} given twice",
                p.display()
            )));
        }
        if p.exists() && !force {
            return Err(Failure::Usage(format!(
                "{} exists (use --force to overwrite)",
                p.display()
            )));
        }
    }
    Ok(())
}

fn create_dir(dir: &Path) -> Outcome {
    fs::create_dir_all(dir).map_err(|e| {
        Failure::Data(Error::Io {
            path: dir.to_path_buf(),
            source: e,
        })
    })
}

fn metas_by_id(path: &Path, bin_width: f64) -> crate::Result<BTreeMap<String, VideoMeta>> {
    Ok(io::read_annotations(path, bin_width)?
        .into_iter()
        .map(|r| (r.meta.video_id.clone(), r.meta))
        .collect())
}

/// Metadata for each curve: from annotations when given, else duration =
/// bins x bin width.
fn metas_for_curves(curves: &[ScoreCurve], meta: Option<&Path>) -> crate::Result<Vec<VideoMeta>> {
    let Some(path) = meta else {
        return Ok(curves
            .iter()
            .map(|c| {
                VideoMeta::new(
                    c.video_id.clone(),
                    c.len() as f64 * c.bin_width_s,
                    c.bin_width_s,
                )
            })
            .collect());
    };
    let bin_width = curves.first().map_or(DEFAULT_BIN_WIDTH, |c| c.bin_width_s);
    let by_id = metas_by_id(path, bin_width)?;
    lookup_all(curves.iter().map(|c| c.video_id.as_str()), &by_id)
}

fn lookup_all<'a>(
    ids: impl Iterator<Item = &'a str>,
    by_id: &BTreeMap<String, VideoMeta>,
) -> crate::Result<Vec<VideoMeta>> {
    let mut out = Vec::new();
    let mut missing = Vec::new();
    for id in ids {
        match by_id.get(id) {
            Some(m) => out.push(m.clone()),
            None => missing.push(id.to_string()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::CoverageMismatch {
            missing,
            extra: Vec::new(),
        });
    }
    Ok(out)
}

fn read_model_scores(inputs: &[ModelPath]) -> Outcome<ModelScores> {
    let mut scores = ModelScores::new();
    for m in inputs {
        if scores.contains_key(&m.model_id) {
            return Err(Failure::Usage(format!(
                "model id {:?} given twice",
                m.model_id
            )));
        }
        scores.insert(m.model_id.clone(), io::read_scores(&m.path)?);
    }
    Ok(scores)
}

fn read_spec(path: Option<&Path>, scores: &ModelScores) -> crate::Result<EnsembleSpec> {
    let spec = match path {
        Some(p) => io::read_json(p)?,
        None => EnsembleSpec::uniform(scores.keys().cloned().collect()),
    };
    spec.validate()?;
    Ok(spec)
}

fn sorted_by_id<T>(mut items: Vec<T>, id: impl Fn(&T) -> &str) -> Vec<T> {
    items.sort_by(|a, b| id(a).cmp(id(b)));
    items
}

#[derive(Serialize)]
struct SimulateNote<'a> {
    videos: usize,
    models: &'a [String],
}

fn simulate(a: &SimulateArgs, seed_value: u64, force: bool) -> Outcome {
    if a.models == 0 {
        return Err(Failure::Usage("--models must be >= 1".into()));
    }
    let cfg = SynthConfig {
        duration_range_s: (a.duration_min, a.duration_max),
        boundary_count_range: (a.boundaries_min, a.boundaries_max),
        min_separation_s: a.min_separation,
        edge_margin_s: a.edge_margin,
        bin_width_s: a.bin_width,
        rater: RaterModel {
            jitter_std_s: a.jitter,
            drop_prob: a.drop_prob,
            spurious_rate_per_video: a.spurious_rate,
            raters: a.raters,
        },
        score: ScoreModel {
            bump_sigma_bins: a.bump_sigma,
            noise_std: a.noise,
            baseline: a.baseline,
            gain: 1.0,
            gain_spread: a.gain_spread,
        },
        feature: FeatureModel {
            dim: a.feature_dim,
            signal_dim_frac: a.signal_frac,
            noise_std: a.feature_noise,
        },
        seed: seed_value,
    };
    cfg.validate()?;
    let model_ids: Vec<String> = (0..a.models).map(|k| format!("m{k}")).collect();
    let dir = &a.out_dir;
    let ann = dir.join("annotations.jsonl");
    let truth = dir.join("truth.jsonl");
    let features = dir.join("features.jsonl");
    let spec = dir.join("ensemble.json");
    let score_paths: Vec<PathBuf> = model_ids
        .iter()
        .map(|id| dir.join("scores").join(format!("{id}.jsonl")))
        .collect();
    let mut outputs: Vec<&Path> = vec![&ann, &truth, &features, &spec];
    outputs.extend(score_paths.iter().map(PathBuf::as_path));
    check_outputs(&outputs, force)?;

    let corpus = synth::gen_corpus(&cfg, a.videos)?;
    let metas = corpus.metas();
    create_dir(&dir.join("scores"))?;
    io::write_annotations(&corpus.records, &ann)?;
    io::write_predictions(&corpus.truth, &truth)?;
    let feats = corpus
        .truth
        .par_iter()
        .zip(&metas)
        .map(|(t, m)| synth::gen_features(t, m, &cfg.feature, seed_value))
        .collect::<crate::Result<Vec<_>>>()?;
    io::write_features(&feats, &features)?;
    for (id, path) in model_ids.iter().zip(&score_paths) {
        let model_seed = seed::derive(seed_value, &["model", id]);
        let curves = corpus
            .truth
            .par_iter()
            .zip(&metas)
            .map(|(t, m)| synth::gen_scores(t, m, &cfg.score, model_seed))
            .collect::<crate::Result<Vec<_>>>()?;
        io::write_scores(&curves, path)?;
    }
    io::write_json(&spec, &EnsembleSpec::uniform(model_ids.clone()))?;
    let note = SimulateNote {
        videos: a.videos,
        models: &model_ids,
    };
    eprintln!("wrote {}", serde_json::to_string(&note).unwrap_or_default());
    Ok(())
}

fn encode(a: &EncodeArgs, force: bool) -> Outcome {
    check_outputs(&[&a.out], force)?;
    let records = io::read_annotations(&a.ann, a.bin_width)?;
    let targets = records
        .par_iter()
        .map(|r| match a.rater {
            None => softlabel::encode_rater_mean(r),
            Some(i) => {
                let rater = r.raters.get(i).ok_or_else(|| {
                    Error::invalid(format!(
                        "video {:?} has {} raters, --rater {i} requested",
                        r.video_id(),
                        r.raters.len()
                    ))
                })?;
                softlabel::encode_soft_labels(rater, &r.meta)
            }
        })
        .collect::<crate::Result<Vec<SoftTarget>>>()?;
    io::write_scores(&sorted_by_id(targets, |t| &t.video_id), &a.out)?;
    Ok(())
}

fn score(a: &ScoreArgs, force: bool) -> Outcome {
    check_outputs(&[&a.out], force)?;
    let params: ScorerParams = io::read_json(&a.params)?;
    params.validate()?;
    let feats = io::read_features(&a.features)?;
    let curves = feats
        .par_iter()
        .map(|f| scorer::predict(&params, f, a.bin_width))
        .collect::<crate::Result<Vec<_>>>()?;
    io::write_scores(&sorted_by_id(curves, |c| &c.video_id), &a.out)?;
    Ok(())
}

/// Pairs every feature sequence with the rater-mean target of its record.
fn training_pairs(
    features: &Path,
    ann: &Path,
    bin_width: f64,
) -> crate::Result<Vec<(FeatureSequence, SoftTarget)>> {
    let records: BTreeMap<String, AnnotationRecord> = io::read_annotations(ann, bin_width)?
        .into_iter()
        .map(|r| (r.video_id().to_string(), r))
        .collect();
    let feats = io::read_features(features)?;
    let missing: Vec<String> = feats
        .iter()
        .filter(|f| !records.contains_key(&f.video_id))
        .map(|f| f.video_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::CoverageMismatch {
            missing,
            extra: Vec::new(),
        });
    }
    let pairs = feats
        .into_iter()
        .map(|f| {
            let target = softlabel::encode_rater_mean(&records[&f.video_id])?;
            Ok((f, target))
        })
        .collect::<crate::Result<Vec<_>>>()?;
    Ok(sorted_by_id(pairs, |p| &p.0.video_id))
}

fn loss_config(
    loss: &LossArgs,
    lr: f64,
    epochs: usize,
    optimizer: Optimizer,
    seed_value: u64,
) -> LossConfig {
    LossConfig {
        pos_weight: loss.pos_weight,
        mse_weight: loss.mse_weight,
        learning_rate: lr,
        epochs,
        seed: seed_value,
        optimizer,
    }
}

fn train(a: &TrainArgs, seed_value: u64, force: bool) -> Outcome {
    let mut outputs: Vec<&Path> = vec![&a.out];
    if let Some(h) = &a.history {
        outputs.push(h);
    }
    check_outputs(&outputs, force)?;
    let cfg = loss_config(&a.loss, a.lr, a.epochs, a.optimizer, seed_value);
    cfg.validate()?;
    let pairs = training_pairs(&a.features, &a.ann, a.bin_width)?;
    let dim = pairs
        .first()
        .map(|p| p.0.dim())
        .ok_or_else(|| Error::invalid("no training videos"))?;
    let init = ScorerParams::init(dim, a.hidden, seed_value);
    let (params, history) = scorer::train(&init, &pairs, &cfg)?;
    io::write_json(&a.out, &params)?;
    if let Some(h) = &a.history {
        io::write_json(h, &history)?;
    }
    if let (Some(first), Some(last)) = (history.first(), history.last()) {
        eprintln!("loss {first:.6} -> {last:.6} over {} epochs", history.len());
    }
    Ok(())
}

#[derive(Serialize)]
struct GradcheckLine<'a> {
    video_id: &'a str,
    max_rel_error: f64,
}

fn gradcheck(a: &GradcheckArgs, seed_value: u64) -> Outcome {
    let pairs = training_pairs(&a.features, &a.ann, a.bin_width)?;
    let dim = pairs
        .first()
        .map(|p| p.0.dim())
        .ok_or_else(|| Error::invalid("no videos to check"))?;
    let params = match &a.params {
        Some(p) => {
            let params: ScorerParams = io::read_json(p)?;
            params.validate()?;
            params
        }
        None => ScorerParams::init(dim, a.hidden, seed_value),
    };
    let cfg = loss_config(&a.loss, 0.0, 0, Optimizer::Gd, seed_value);
    cfg.validate()?;
    let mut worst: f64 = 0.0;
    for (f, y) in pairs.iter().take(a.videos) {
        let err = scorer::grad_check(&params, f, y, &cfg)?;
        worst = worst.max(err);
        let line = GradcheckLine {
            video_id: &f.video_id,
            max_rel_error: err,
        };
        println!("{}", serde_json::to_string(&line).unwrap_or_default());
    }
    if worst.is_nan() || worst > a.tolerance {
        return Err(Failure::Data(Error::invalid(format!(
            "gradient check failed: max relative error {worst:e} > {:e}",
            a.tolerance
        ))));
    }
    Ok(())
}

fn decode(a: &DecodeCmdArgs, force: bool) -> Outcome {
    check_outputs(&[&a.out], force)?;
    let cfg = a.decode.config()?;
    let curves = io::read_scores(&a.scores)?;
    let metas = metas_for_curves(&curves, a.meta.as_deref())?;
    let preds = curves
        .par_iter()
        .zip(&metas)
        .map(|(c, m)| decode_boundaries(c, m, &cfg))
        .collect::<crate::Result<Vec<_>>>()?;
    io::write_predictions(&sorted_by_id(preds, |p| &p.video_id), &a.out)?;
    Ok(())
}

/// Smoothed curve value at the bin nearest each boundary.
fn peak_scores(pred: &BoundarySet, smooth: &ScoreCurve) -> Vec<f64> {
    let last = smooth.len().saturating_sub(1);
    pred.boundaries
        .iter()
        .map(|&t| {
            let i = ((t / smooth.bin_width_s).round().max(0.0) as usize).min(last);
            smooth.values.get(i).copied().unwrap_or(0.0)
        })
        .collect()
}

fn align(a: &AlignCmdArgs, force: bool) -> Outcome {
    check_outputs(&[&a.out], force)?;
    let cfg = a.align.config()?;
    if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
        return Err(Failure::Usage(format!(
            "--sigma must be >= 0, got {}",
            a.sigma
        )));
    }
    let preds = io::read_predictions(&a.pred)?;
    let by_id = metas_by_id(&a.meta, a.bin_width)?;
    let metas = lookup_all(preds.iter().map(|p| p.video_id.as_str()), &by_id)?;
    let curves: Option<BTreeMap<String, ScoreCurve>> = match &a.scores {
        Some(path) => Some(
            io::read_scores(path)?
                .into_iter()
                .map(|c| (c.video_id.clone(), c))
                .collect(),
        ),
        None => None,
    };
    let aligned = preds
        .par_iter()
        .zip(&metas)
        .map(|(p, m)| {
            let scores = match &curves {
                None => None,
                Some(map) => {
                    let curve = map
                        .get(&p.video_id)
                        .ok_or_else(|| Error::CoverageMismatch {
                            missing: vec![p.video_id.clone()],
                            extra: Vec::new(),
                        })?;
                    Some(peak_scores(p, &gaussian_smooth(curve, a.sigma)))
                }
            };
            align_boundaries(p, scores.as_deref(), m.duration_s, &cfg)
        })
        .collect::<crate::Result<Vec<_>>>()?;
    io::write_predictions(&sorted_by_id(aligned, |p| &p.video_id), &a.out)?;
    Ok(())
}

/// Video metadata for an ensemble: from annotations, or from the curves of
/// the first model.
fn ensemble_metas(scores: &ModelScores, meta: Option<&Path>) -> crate::Result<Vec<VideoMeta>> {
    let first = scores.values().next().map(Vec::as_slice).unwrap_or(&[]);
    match meta {
        Some(path) => {
            let bin_width = first.first().map_or(DEFAULT_BIN_WIDTH, |c| c.bin_width_s);
            let by_id = metas_by_id(path, bin_width)?;
            lookup_all(first.iter().map(|c| c.video_id.as_str()), &by_id)
        }
        None => metas_for_curves(first, None),
    }
}

fn ensemble(a: &EnsembleArgs, force: bool) -> Outcome {
    let mut outputs: Vec<&Path> = vec![&a.out];
    outputs.extend(a.curves_out.as_deref());
    outputs.extend(a.routing_out.as_deref());
    check_outputs(&outputs, force)?;
    let decode = a.decode.config()?;
    let align = a.align.config()?;
    let scores = read_model_scores(&a.scores)?;
    let spec = read_spec(a.spec.as_deref(), &scores)?;
    let metas = ensemble_metas(&scores, a.meta.as_deref())?;
    let outcomes = run_ensemble(&scores, &metas, &spec, &decode, &align)?;
    let preds: Vec<BoundarySet> = outcomes.iter().map(|o| o.prediction.clone()).collect();
    io::write_predictions(&preds, &a.out)?;
    if let Some(path) = &a.curves_out {
        let curves: Vec<ScoreCurve> = outcomes.iter().map(|o| o.curve.clone()).collect();
        io::write_scores(&curves, path)?;
    }
    if let Some(path) = &a.routing_out {
        let routing: Vec<crate::pipeline::Routing> = outcomes
            .iter()
            .map(|o| crate::pipeline::Routing {
                video_id: o.video_id.clone(),
                difficulty: o.difficulty,
                routing_max: o.routing_max,
            })
            .collect();
        io::write_json(path, &routing)?;
    }
    Ok(())
}

fn split(a: &SplitArgs, force: bool) -> Outcome {
    check_outputs(&[&a.out], force)?;
    let scores = read_model_scores(&a.scores)?;
    let spec = read_spec(a.spec.as_deref(), &scores)?;
    let routing = route_corpus(&scores, &spec)?;
    io::write_json(&a.out, &routing)?;
    Ok(())
}

fn pseudo_label(a: &PseudoLabelArgs, force: bool) -> Outcome {
    check_outputs(&[&a.out], force)?;
    let preds = io::read_predictions(&a.pred)?;
    let by_id = metas_by_id(&a.meta, a.bin_width)?;
    let metas = lookup_all(preds.iter().map(|p| p.video_id.as_str()), &by_id)?;
    let records = make_pseudo_labels(&preds, &metas)?;
    eprintln!(
        "{} pseudo records from {} predictions",
        records.len(),
        preds.len()
    );
    io::write_annotations(&records, &a.out)?;
    Ok(())
}

fn kfold(a: &KfoldArgs, seed_value: u64, force: bool) -> Outcome {
    check_outputs(&[&a.out], force)?;
    let records = io::read_annotations(&a.ann, DEFAULT_BIN_WIDTH)?;
    let ids: Vec<String> = records.iter().map(|r| r.video_id().to_string()).collect();
    let folds = kfold_split(&ids, a.k, seed_value)?;
    io::write_json(&a.out, &folds)?;
    Ok(())
}

fn eval(a: &EvalArgs, force: bool) -> Outcome {
    if let Some(out) = &a.out {
        check_outputs(&[out], force)?;
    }
    if !(a.rel_dis > 0.0 && a.rel_dis < 0.5) {
        return Err(Failure::Usage(format!(
            "--rel-dis must lie in (0, 0.5), got {}",
            a.rel_dis
        )));
    }
    let preds = io::read_predictions(&a.pred)?;
    let records = io::read_annotations(&a.ann, DEFAULT_BIN_WIDTH)?;
    let report = corpus_f1(&preds, &records, a.rel_dis, a.agg)?;
    if let Some(out) = &a.out {
        io::write_json(out, &report)?;
    }
    if a.json {
        let text = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::invalid(format!("cannot serialize report: {e}")))?;
        println!("{text}");
    } else {
        print!("{}", report.table());
    }
    Ok(())
}

fn pipeline(a: &PipelineArgs, force: bool) -> Outcome {
    let ladder = a.out_dir.join("ladder.json");
    let preds_path = a.out_dir.join("predictions.jsonl");
    check_outputs(&[&ladder, &preds_path], force)?;
    let decode = a.decode.config()?;
    let align = a.align.config()?;
    let scores = read_model_scores(&a.scores)?;
    let spec = read_spec(a.spec.as_deref(), &scores)?;
    let records = io::read_annotations(&a.ann, a.bin_width)?;
    let out = run_ladder(
        &scores,
        &records,
        &spec,
        &decode,
        &align,
        align.rel_dis,
        a.agg,
    )?;
    create_dir(&a.out_dir)?;
    io::write_json(&ladder, &out.report)?;
    io::write_predictions(&out.predictions, &preds_path)?;
    print!("{}", out.report.table());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_paths() {
        let m = parse_model_path("a=x/y.jsonl").unwrap();
        assert_eq!(
            (m.model_id.as_str(), m.path.as_path()),
            ("a", Path::new("x/y.jsonl"))
        );
        let m = parse_model_path("dir/scores/m1.jsonl").unwrap();
        assert_eq!(m.model_id, "m1");
        assert!(parse_model_path("=x").is_err());
        assert!(parse_model_path("a=").is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(main(["gebd-kit", "eval", "--bogus"]), EXIT_USAGE);
        assert_eq!(main(["gebd-kit"]), EXIT_USAGE);
        assert_eq!(main(["gebd-kit", "--help"]), EXIT_OK);
    }

    #[test]
    fn peak_scores_use_nearest_bin() {
        let curve = ScoreCurve::new("v", 0.5, vec![0.1, 0.2, 0.9, 0.3]);
        let pred = BoundarySet::new("v", vec![0.9, 1.3, 5.0]);
        assert_eq!(peak_scores(&pred, &curve), vec![0.9, 0.3, 0.3]);
    }
}
