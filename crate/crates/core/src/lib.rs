//! Frame-by-frame prediction of a continuous emotional dimension from
//! audiovisual recordings.
//!
//! The pipeline has three stages:
//!
//! 1. Two stream CNNs (video frames and audio windows) are trained to regress
//!    the per-frame rating; the output of each stream's third stage is kept as
//!    a 512-wide learned feature vector. The two vectors are concatenated into
//!    a 1024-wide audiovisual feature vector per frame ([`network`], [`streams`]).
//! 2. Features are ranked by minimum-redundancy maximum-relevance over
//!    histogram mutual information, computed on low-variation frame windows
//!    ([`mrmr`]).
//! 3. An epsilon-SVR maps the top ranked features to the rating; its
//!    hyperparameters and the number of features kept are chosen by
//!    contiguous-block cross-validation on MAE ([`svr`]).
//!
//! [`metrics`] provides RMSE, MAE, Pearson's CC and Lin's CCC, and
//! [`pipeline`] ties everything together behind the `instaffect` CLI.

pub mod error;
pub mod features;
pub mod metrics;
pub mod mrmr;
pub mod network;
pub mod ops;
pub mod pipeline;
pub mod streams;
pub mod svr;
pub mod tensor;

pub use error::{Error, Result};
pub use features::FeatureMatrix;
pub use tensor::{Scalar, Tensor};
