//! Behavioral analyses: triads, concordance, ratings, rank correlation and
//! bootstrap standard errors.

mod bootstrap;
mod rank;
mod ratings;
mod triads;

pub use bootstrap::{bootstrap, bootstrap_se, BootstrapResult, Dataset, Statistic, MIN_REPLICATES};
pub use rank::{average_ranks, pearson, spearman};
pub use ratings::{average_matrices, generate_rating_plan, normalize_ratings, pair_means, Block, NormalizedRatings, RatingTrial};
pub use triads::{
    catch_accuracy, concordance, concordance_matrix, generate_triads, mean_model_concordance, mean_pairwise_concordance,
    predict_triads, triad_similarity_index, Response, TriadTrial,
};
