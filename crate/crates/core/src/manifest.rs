//! JSON description of an image set and loaders for everything it names.
//!
//! ```json
//! {
//!   "scene": "plaza",
//!   "map_scale": 1,
//!   "images": [
//!     { "image": "img_000.ppm", "features": "feat_000.fmap",
//!       "score": "score_000.fmap", "mask": "mask_000.pgm" }
//!   ],
//!   "matches": [ { "reference": 0, "other": 1, "path": "m_000_001.txt" } ],
//!   "params": { "alpha": 0.2, "lambda": 450.0, "scope": "multi" }
//! }
//! ```
//!
//! Paths are relative to the manifest's directory. Feature, score and mask
//! maps live at the map resolution, which is the image resolution divided
//! by `map_scale`; images are block-averaged down to it and match
//! coordinates (given in image pixels) are rescaled. Maps are never
//! resampled, so supplied features must already be at map resolution.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::ScopeMode;
use crate::error::{Error, Result};
use crate::geom::SparseMatches;
use crate::grids::ops::downsample_rgb;
use crate::grids::pnm::{read_image, read_mask};
use crate::grids::{builtin_features, read_tensor, FeatureMap, Mask, RgbImage, ScalarMap};
use crate::mrf::{RefineParams, SceneInputs};

/// Window of the built-in features when a record names no feature file.
pub const DEFAULT_FEATURE_WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageRecord {
    pub image: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatchRecord {
    pub reference: usize,
    pub other: usize,
    pub path: PathBuf,
}

/// Parameter values a scene may pin; anything unset falls back to the
/// defaults, and command-line flags override both.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamOverrides {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scope: Option<ScopeMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_log: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_grad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intensity_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_sweeps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_window: Option<usize>,
}

impl ParamOverrides {
    /// Writes every set field into `params`.
    pub fn apply(&self, params: &mut RefineParams) {
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { params.$f = v; })* };
        }
        set!(alpha, lambda, k, beta, bins, scope, eps_log, eps_grad, intensity_scale, seed, sample_stride, max_sweeps);
    }
}

fn default_scale() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub scene: String,
    #[serde(default = "default_scale")]
    pub map_scale: usize,
    pub images: Vec<ImageRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub matches: Vec<MatchRecord>,
    #[serde(default)]
    pub params: ParamOverrides,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl SceneManifest {
    pub fn new(scene: impl Into<String>, images: Vec<ImageRecord>) -> Self {
        Self {
            scene: scene.into(),
            map_scale: 1,
            images,
            matches: Vec::new(),
            params: ParamOverrides::default(),
            base_dir: PathBuf::new(),
        }
    }

    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self> {
        let mut m: Self = serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
        m.base_dir = base_dir.into();
        m.validate()?;
        Ok(m)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, dir).map_err(|e| match e {
            Error::Manifest(msg) => Error::Manifest(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    /// Changes the directory relative paths resolve against.
    pub fn set_base_dir(&mut self, dir: impl Into<PathBuf>) {
        self.base_dir = dir.into();
    }

    pub fn validate(&self) -> Result<()> {
        if self.images.is_empty() {
            return Err(Error::Manifest("scene lists no images".into()));
        }
        if self.map_scale == 0 {
            return Err(Error::Manifest("map_scale must be at least 1".into()));
        }
        let n = self.images.len();
        for m in &self.matches {
            if m.reference >= n || m.other >= n || m.reference == m.other {
                return Err(Error::Manifest(format!(
                    "match record ({}, {}) does not name two distinct images of {n}",
                    m.reference, m.other
                )));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, rel: &Path) -> PathBuf {
        self.base_dir.join(rel)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// File stem of each image, used to name outputs and report rows.
    pub fn image_names(&self) -> Vec<String> {
        self.images
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.image
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| format!("image_{i:03}"))
            })
            .collect()
    }

    fn record(&self, i: usize) -> Result<&ImageRecord> {
        self.images
            .get(i)
            .ok_or_else(|| Error::Manifest(format!("image {i} out of range for {} images", self.len())))
    }

    /// Image `i` at map resolution.
    pub fn load_image(&self, i: usize) -> Result<RgbImage> {
        let img = read_image(self.resolve(&self.record(i)?.image))?;
        downsample_rgb(&img, self.map_scale)
    }

    /// All images at map resolution; they must share one size.
    pub fn load_images(&self) -> Result<Vec<RgbImage>> {
        let images = (0..self.len()).map(|i| self.load_image(i)).collect::<Result<Vec<_>>>()?;
        let dims = images[0].dims();
        if let Some(i) = images.iter().position(|im| im.dims() != dims) {
            return Err(Error::Manifest(format!(
                "image {i} is {:?} at map resolution, image 0 is {dims:?}",
                images[i].dims()
            )));
        }
        Ok(images)
    }

    fn check_dims(&self, what: &str, i: usize, got: (usize, usize), want: (usize, usize)) -> Result<()> {
        if got != want {
            return Err(Error::Manifest(format!(
                "{what} of image {i} is {got:?}, expected {want:?} (image size / map_scale {})",
                self.map_scale
            )));
        }
        Ok(())
    }

    /// Features of image `i`: the named file, or built-in features of the
    /// image when none is named.
    pub fn load_features(&self, i: usize, image: &RgbImage, window: usize) -> Result<FeatureMap> {
        match &self.record(i)?.features {
            Some(p) => {
                let f = read_tensor(self.resolve(p))?.into_features();
                self.check_dims("feature map", i, f.dims(), image.dims())?;
                Ok(f)
            }
            None => builtin_features(image, window),
        }
    }

    pub fn load_score(&self, i: usize, dims: (usize, usize)) -> Result<ScalarMap> {
        let p = self.record(i)?.score.as_ref().ok_or_else(|| {
            Error::Manifest(format!("image {i} ({}) has no score map", self.images[i].image.display()))
        })?;
        let s = read_tensor(self.resolve(p))?.into_scalar()?;
        self.check_dims("score map", i, s.dims(), dims)?;
        s.validate_scores()?;
        Ok(s)
    }

    pub fn load_mask(&self, i: usize, dims: (usize, usize)) -> Result<Mask> {
        let p = self.record(i)?.mask.as_ref().ok_or_else(|| {
            Error::Manifest(format!(
                "image {i} ({}) has no ground-truth mask",
                self.images[i].image.display()
            ))
        })?;
        let m = read_mask(self.resolve(p))?;
        self.check_dims("mask", i, m.dims(), dims)?;
        Ok(m)
    }

    /// Correspondences with `reference` as the first image, at map
    /// resolution. A record listed the other way round is swapped.
    pub fn load_matches(&self, reference: usize, other: usize) -> Result<Option<SparseMatches>> {
        let direct = self.matches.iter().find(|m| m.reference == reference && m.other == other);
        let reverse = self.matches.iter().find(|m| m.reference == other && m.other == reference);
        let m = match (direct, reverse) {
            (Some(r), _) => SparseMatches::read(self.resolve(&r.path))?,
            (None, Some(r)) => SparseMatches::read(self.resolve(&r.path))?.swapped(),
            (None, None) => return Ok(None),
        };
        Ok(Some(m.rescaled(self.map_scale)))
    }

    /// Requires a match file for every image pair.
    pub fn require_all_matches(&self) -> Result<()> {
        for r in 0..self.len() {
            for o in r + 1..self.len() {
                let listed = self
                    .matches
                    .iter()
                    .any(|m| (m.reference, m.other) == (r, o) || (m.reference, m.other) == (o, r));
                if !listed {
                    let names = self.image_names();
                    return Err(Error::Manifest(format!(
                        "no match file for pair ({r}, {o}) [{} , {}]",
                        names[r], names[o]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Images, features and scores for refinement.
    pub fn load_inputs(&self, feature_window: usize) -> Result<SceneInputs> {
        let images = self.load_images()?;
        let dims = images[0].dims();
        let features = images
            .iter()
            .enumerate()
            .map(|(i, im)| self.load_features(i, im, feature_window))
            .collect::<Result<Vec<_>>>()?;
        let scores = (0..self.len())
            .map(|i| self.load_score(i, dims))
            .collect::<Result<Vec<_>>>()?;
        Ok(SceneInputs {
            images,
            features,
            scores,
        })
    }

    pub fn load_masks(&self, dims: (usize, usize)) -> Result<Vec<Mask>> {
        (0..self.len()).map(|i| self.load_mask(i, dims)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "scene": "demo",
        "images": [
            { "image": "a.ppm", "score": "a.fmap" },
            { "image": "b.ppm" }
        ],
        "matches": [ { "reference": 1, "other": 0, "path": "ba.txt" } ],
        "params": { "lambda": 10.0, "scope": "single" }
    }"#;

    #[test]
    fn parses_with_defaults() {
        let m = SceneManifest::parse(SAMPLE, "/data").unwrap();
        assert_eq!(m.map_scale, 1);
        assert_eq!(m.image_names(), ["a", "b"]);
        assert_eq!(m.resolve(Path::new("a.ppm")), PathBuf::from("/data/a.ppm"));
        let mut p = RefineParams::default();
        m.params.apply(&mut p);
        assert_eq!(p.lambda, 10.0);
        assert_eq!(p.scope, ScopeMode::Single);
        assert_eq!(p.alpha, RefineParams::default().alpha);
        let again = SceneManifest::parse(&m.to_json(), "/data").unwrap();
        assert_eq!(again, m);
    }

    #[test]
    fn rejects_bad_manifests() {
        assert!(SceneManifest::parse(r#"{"scene":"x","images":[]}"#, "").is_err());
        assert!(SceneManifest::parse(r#"{"scene":"x","images":[{"image":"a"}],"map_scale":0}"#, "").is_err());
        assert!(SceneManifest::parse(r#"{"scene":"x","images":[{"image":"a"}],"bogus":1}"#, "").is_err());
        let bad_pair = r#"{"scene":"x","images":[{"image":"a"}],"matches":[{"reference":0,"other":0,"path":"m"}]}"#;
        assert!(SceneManifest::parse(bad_pair, "").is_err());
    }

    #[test]
    fn missing_pair_is_named() {
        let text = r#"{"scene":"x","images":[{"image":"a.ppm"},{"image":"b.ppm"},{"image":"c.ppm"}],
            "matches":[{"reference":0,"other":1,"path":"m"}]}"#;
        let m = SceneManifest::parse(text, "").unwrap();
        let err = m.require_all_matches().unwrap_err().to_string();
        assert!(err.contains("(0, 2)") && err.contains("a") && err.contains("c"), "{err}");
    }

    #[test]
    fn reversed_match_records_are_swapped() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("ba.txt"), "1 2 3 4\n").unwrap();
        let m = SceneManifest::parse(SAMPLE, dir.path()).unwrap();
        let fwd = m.load_matches(1, 0).unwrap().unwrap();
        let rev = m.load_matches(0, 1).unwrap().unwrap();
        assert_eq!(rev, fwd.swapped());
        assert!(m.load_score(1, (1, 1)).unwrap_err().to_string().contains("no score map"));
    }
}
