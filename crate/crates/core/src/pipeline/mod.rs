//! Corpus formats, synthetic data, and the staged pipeline behind the CLI.
//!
//! Stages run in order and communicate only through files in the work
//! directory: `train-cnn`, `extract`, `select`, `fit-svr`, `predict`,
//! `evaluate`. Every stochastic step draws from a seed derived from the
//! config seed, so reruns reproduce every artifact byte for byte.

pub mod audit;
pub mod config;
pub mod corpus;
pub mod stages;
pub mod synthetic;
pub mod trace;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use audit::{check_leakage, LeakageReport};
pub use config::PipelineConfig;
pub use corpus::{ingest, Corpus, Manifest, SubjectData};
pub use stages::{read_predictions, FramePredictor, Pipeline, Workspace};
pub use synthetic::{generate_synthetic, synthesize_subject};
pub use trace::emit_trace;

/// Independent seed for the component named `tag`.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    // FNV-1a over the tag
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h).next_u64()
}
