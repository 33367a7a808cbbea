//! Initial dynamic scores from epipolar consistency.
//!
//! A static pixel should find a feature match somewhere along its epipolar
//! line in every other view. Pixels without one are likely dynamic.

mod fundamental;
mod matches;
mod score;

pub use fundamental::{
    eight_point, estimate_fundamental, sampson_distance, FundamentalEstimate, FundamentalMatrix,
    RansacConfig,
};
pub use matches::{Match, SparseMatches};
pub use score::{combine_pairs, epipolar_line, pair_score, Combine, PairScore, PairScoreConfig};

use crate::error::{Error, Result};
use crate::grids::{FeatureMap, ScalarMap};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeoScoreConfig {
    pub ransac: RansacConfig,
    pub pair: PairScoreConfig,
    pub combine: Combine,
}

/// A pair that could not be scored and was left out of its reference
/// image's combination.
#[derive(Debug, Clone, PartialEq)]
pub struct PairFailure {
    pub reference: usize,
    pub other: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneScores {
    pub maps: Vec<ScalarMap>,
    pub failures: Vec<PairFailure>,
}

/// Scores every image against every other image it has matches with.
///
/// `matches(r, o)` returns correspondences with `r` as the first image,
/// or `None` when the pair has none. An image without any usable pair gets
/// the uninformative score 0.5 everywhere.
pub fn score_scene(
    features: &[FeatureMap],
    mut matches: impl FnMut(usize, usize) -> Option<SparseMatches>,
    cfg: &GeoScoreConfig,
) -> Result<SceneScores> {
    if features.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "geometric scoring needs at least 2 images, got {}",
            features.len()
        )));
    }
    let mut maps = Vec::with_capacity(features.len());
    let mut failures = Vec::new();
    for (r, reference) in features.iter().enumerate() {
        let mut pairs = Vec::new();
        for (o, other) in features.iter().enumerate().filter(|&(o, _)| o != r) {
            let Some(m) = matches(r, o) else { continue };
            let scored = estimate_fundamental(&m, &cfg.ransac)
                .and_then(|est| pair_score(reference, other, &est.f, &cfg.pair));
            match scored {
                Ok(p) => pairs.push(p),
                Err(e) => failures.push(PairFailure {
                    reference: r,
                    other: o,
                    reason: e.to_string(),
                }),
            }
        }
        maps.push(if pairs.is_empty() {
            ScalarMap::filled(reference.height(), reference.width(), 0.5)
        } else {
            combine_pairs(&pairs, cfg.combine)?
        });
    }
    Ok(SceneScores { maps, failures })
}
