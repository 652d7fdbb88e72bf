//! Deterministic preprocessing for guided epipolar geometry estimation.
//!
//! Given the local features of two images, the crate produces a ranked set of
//! putative correspondences annotated with inlier probabilities:
//!
//! 1. standard nearest-neighbour matches with distance ratios (`X_L`) and
//!    mutual matches with similarity weights (`X_B`) ([`standard_match`]);
//! 2. a relative roll estimate from orientation differences;
//! 3. descriptor clustering on fixed-orientation descriptors and exhaustive
//!    cluster-pair expansion (`X`) ([`clustering`]);
//! 4. ranking of matched feature pairs ("2keypoints") with a decision tree
//!    ([`twokeypoint`], [`dtree`]);
//! 5. candidate fundamental matrices from pairs of top 2keypoint matches and
//!    per-match support counting ([`global_rank`]);
//! 6. a fused per-match descriptor scored by a second tree.
//!
//! [`estimator`] holds a reference guided-RANSAC consumer and [`bench`] a
//! synthetic two-view scene generator with ground truth.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod bench;
pub mod clustering;
pub mod dtree;
pub mod estimator;
pub mod features;
pub mod geometry;
pub mod global_rank;
pub mod pipeline;
pub mod seed;
pub mod standard_match;
pub mod twokeypoint;

mod angle;

pub use angle::{angle_diff, wrap_angle};
pub use features::{Feature, FeatureSet, OrientationMode, PutativeMatch, Sources};
pub use geometry::{FundamentalMatrix, PointPair};
