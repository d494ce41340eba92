//! Polarizing BMS channels with few kernels.
//!
//! The pipeline: represent a binary-input symmetric channel as a finite BSC
//! mixture, quantize it onto a tile grid into a degraded/upgraded bounding
//! pair ([`quantize_pair`]), enumerate the bundles such pairs fall into
//! ([`enumerate_pavements`]), test kernels against bundles through exact
//! polar transforms and Gallager-style threshold sums ([`is_good`]), and
//! greedily pick a small kernel set covering every bundle ([`greedy_cover`]).
//! [`simulate`] runs the multi-level recursion with per-bundle kernels while
//! tracking two-sided entropy bounds.

pub mod channel;
pub mod cover;
pub mod error;
pub mod exponents;
pub mod kernel;
pub mod quantize;
pub mod sim;

pub use channel::{
    binary_entropy, inverse_binary_entropy, Atom, BmsChannel, MergeDirection, ATOM_TOL,
};
pub use cover::{
    badness_matrix, bound_m, greedy_cover, kernel_count_scale, min_cover_oracle, BadnessMatrix,
    CoverReport, PairFailure,
};
pub use error::{Error, Result};
pub use exponents::{
    alpha, error_exponent, gallager_e0, goodness_thresholds, is_good, potential_h, theta,
    GoodnessParams, GoodnessReport,
};
pub use kernel::{
    bec_transform, polar_transform, sample_invertible, split_seed, Kernel, MAX_ELL,
    TRANSFORM_BUDGET,
};
pub use quantize::{
    bundle_endpoints, enumerate_pavements, enumerate_pavements_with, grid_size, pavement_count,
    quantize_pair, Bundle, Grid, Pavement, QuantizedPair, Step,
};
pub use sim::{simulate, KernelTable, LevelReport, SimEntry, SimReport, TrackedChannel};
