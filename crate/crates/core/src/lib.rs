//! Core algorithms for multi-rate task-oriented communication in multi-edge
//! cooperative inference.
//!
//! Edge devices quantize their latent features at a server-assigned code
//! rate, send the codeword indices over a fading link, and the server fuses
//! the recovered features by element-wise max pooling before classifying.
//!
//! * [`quantize`]: codebooks, k-means base codebooks, rate-adaptive resizing
//! * [`entropy`]: per-view information score from (pixel, window mean) pairs
//! * [`allocate`]: code-rate selection under a resource-block budget
//! * [`phy`]: bit serialization, QPSK/16-QAM, flat Rayleigh channel, RB cost
//! * [`fuse`]: max-pool fusion and a nearest-centroid classifier
//!
//! The crate is `no_std` and needs only `alloc`.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod allocate;
pub mod entropy;
pub mod fuse;
pub mod phy;
pub mod quantize;

pub use allocate::{AllocationPlan, Choice, RateOption, RateOptionSet};
pub use entropy::{EntropyScore, GrayImage};
pub use fuse::{ClassModel, FusedFeature, Prediction};
pub use phy::{ChannelConfig, Fading, Modulation};
pub use quantize::{Codebook, IndexVector, LatentFeature, QuantizedFeature};
