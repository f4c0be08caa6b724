//! Tokenization, per-topic word profiles and BM25 scoring.
//!
//! A topic's profile is the pseudo-document formed by concatenating the titles
//! and abstracts of its members. Queries score against profiles with
//!
//! ```text
//! score(Q, P) = Σ_{t ∈ Q} idf(t) · f(t,P)·(k1+1) / (f(t,P) + k1·(1 − b + b·|P|/avg|P|))
//! idf(t)      = ln(1 + (N − n_t + 0.5) / (n_t + 0.5))
//! ```
//!
//! where `N` is the number of topics and `n_t` the number of profiles
//! containing `t`.

mod experiment;
mod index;
mod tokenize;

pub use self::experiment::{self_assignment_experiment, AccuracyBand, SelfAssignmentTable, DEFAULT_BAND_EDGES};
pub use self::index::{
    build_profiles, idf, rank, Bm25Params, ProfileIndex, ProfileReport, ScoredTopic, TopicProfile,
    TopicSimilarity,
};
pub use self::tokenize::{Tokenizer, DEFAULT_STOPWORDS};
