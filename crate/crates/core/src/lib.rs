//! Toolkit for generic event boundary detection (GEBD) post-processing and
//! evaluation.
//!
//! The crate covers the path from per-bin boundary scores to evaluated
//! boundary times:
//!
//! - [`softlabel`]: soft-label training targets, and the smoothing, peak
//!   picking and sub-bin bias refinement that turn scores back into times
//! - [`align`]: least-squares alignment of predictions to the edge-margin
//!   and minimum-gap constraints
//! - [`eval`]: one-to-one boundary F1 at a relative distance threshold
//! - [`pipeline`]: score ensembling, easy/hard routing, pseudo-labels and
//!   k-fold splits
//! - [`scorer`]: a small dual-head convolutional scorer trained by gradient
//!   descent
//! - [`synth`]: seeded synthetic corpora for all of the above
//! - [`io`]: JSON-lines file formats
//!
//! Runnable walkthroughs live in the crate's `examples/` directory; the
//! `gebd-kit` binary exposes the same operations as batch subcommands.

pub mod align;
pub mod cli;
pub mod error;
pub mod eval;
pub mod io;
pub mod pipeline;
pub mod scorer;
pub mod seed;
pub mod softlabel;
pub mod synth;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    validate_record, AnnotationRecord, BoundarySet, ScoreCurve, SoftTarget, Source, VideoMeta,
    Violation, DEFAULT_BIN_WIDTH,
};
