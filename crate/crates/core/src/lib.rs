//! Refinement of per-pixel dynamic-score maps for sets of still images of
//! one scene taken from several viewpoints.
//!
//! Initial scores (from [`geom`] or supplied files) are discretized into
//! label distributions, blended with appearance distributions pooled over
//! feature clusters ([`clustering`]), and relabeled by minimizing a
//! gradient-weighted Potts energy with alpha-expansion ([`mrf`], on top of
//! [`maxflow`]). [`eval`] scores the results by Jaccard index.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod error;
pub mod eval;
pub mod geom;
pub mod grids;
pub mod manifest;
pub mod maxflow;
pub mod mrf;
pub mod scoring;
pub mod synth;

pub use clustering::{ClusterModel, KMeansConfig, Scope, ScopeMode};
pub use error::{Error, Result};
pub use eval::{EvalReport, ImageEval};
pub use geom::{FundamentalMatrix, GeoScoreConfig, PairScoreConfig, RansacConfig, SparseMatches};
pub use grids::{FeatureMap, LabelField, Mask, MaskClass, RgbImage, ScalarMap};
pub use manifest::{ParamOverrides, SceneManifest};
pub use maxflow::{CutResult, FlowGraph};
pub use mrf::{EnergyModel, RefineOutput, RefineParams, SceneInputs};
pub use scoring::DiscretePdf;
