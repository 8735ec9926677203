//! Sample-quality and diversity scores, mode coverage and nearest-neighbour lookup.
//!
//! Scores need a class-probability table `p(y|x)`. Here it comes from a
//! small softmax [`Classifier`] trained on labelled data.

mod classifier;
mod coverage;
mod neighbors;
mod probs;
mod scores;

pub use classifier::{
    train_classifier, Classifier, ClassifierConfig, ClassifierRecord, MNIST_ACCURACY_FLOOR,
    TOY_ACCURACY_FLOOR,
};
pub use coverage::{mode_coverage, Coverage, COVERED_FRACTION};
pub use neighbors::{nearest_neighbors, Neighbors};
pub use probs::{kl_divergence, ClassProbMatrix, KL_EPS};
pub use scores::{
    inception_score, modified_inception_score, write_reports_csv, ClassScore, ScoreReport, Summary,
    DEFAULT_PAIRS_PER_SAMPLE, DEFAULT_SPLITS, EXHAUSTIVE_PAIR_LIMIT,
};
