//! Concrete structure spaces, their distances and oracles.

pub mod choice;
pub mod finite;
pub mod interval;
pub mod linear;
pub mod ranking;
pub mod separation;

pub use choice::{d_approx_best_item, d_best_item, top_item, LogitChoiceSpace};
pub use finite::{d_cluster_id, d_fair, FiniteLabeledSpace, RandomFiniteInstance};
pub use interval::{
    d_interval_c, d_interval_i, Interval, IntervalAtom, IntervalAtomKind, IntervalClustering,
    IntervalClusteringSpace,
};
pub use linear::{classifier_distance, d_classifier, LinearClassifierSpace};
pub use ranking::{d_rank, rank_distance, ObjectMeasure, RankDistanceMode, RankingSpace};
pub use separation::{build_separation_family, SeparationFamily};
