//! Core algorithms for measuring stance polarization in tweet corpora.
//!
//! The crate is `no_std` and needs only `alloc`. Everything here is a pure
//! function of its inputs: file formats, logging and the command line live in
//! the `polarimeter` crate.
//!
//! The pipeline, in order:
//!
//! - [`element`] and [`tweet`]: canonical element keys and the keyword filter.
//! - [`graph`]: per-user profiles and per-tweet audiences.
//! - [`labeling`]: seed labels and retweet-overlap label propagation.
//! - [`classifier`]: averaged-embedding softmax classifier for label expansion.
//! - [`valence`]: valence scores, five-way binning, histograms and top lists.
//! - [`similarity`]: L1-normalized user vectors, cosine similarity, sampling.
//! - [`layout`]: Fruchterman-Reingold layout of the similarity graph.
//! - [`synth`]: deterministic polarized corpora with ground truth.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod classifier;
pub mod element;
pub mod graph;
pub mod labeling;
pub mod layout;
pub mod similarity;
pub mod synth;
pub mod tweet;
pub mod valence;

pub use element::{ElementKey, ElementKind};
pub use graph::{Corpus, TweetAudience, UserProfile};
pub use labeling::{Labels, Provenance, Stance, StanceLabel};
pub use tweet::Tweet;
