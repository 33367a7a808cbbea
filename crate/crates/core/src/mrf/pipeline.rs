//! The end-to-end refinement: discretize the initial scores, build the
//! appearance distributions, mix, and relabel each image with
//! alpha-expansion.

use rayon::prelude::*;

use super::energy::{build_energy, EnergyParams, DEFAULT_EPS_GRAD, DEFAULT_LAMBDA};
use super::expansion::{alpha_expansion, ml_estimate, ExpansionConfig, DEFAULT_MAX_SWEEPS};
use crate::clustering::{fit_scope, pdfs_for_scope, AppearancePdfs, KMeansConfig, Scope, ScopeMode, DEFAULT_BETA, DEFAULT_K};
use crate::error::{Error, Result};
use crate::grids::{to_gray, FeatureMap, LabelField, RgbImage, ScalarMap};
use crate::scoring::{label_to_score, mix_delta, score_to_label, DiscretePdf, DEFAULT_ALPHA, DEFAULT_BINS, DEFAULT_EPS_LOG};

/// Gray levels are multiplied by this before taking the gradient, so the
/// pairwise weights see 8-bit intensity differences.
pub const DEFAULT_INTENSITY_SCALE: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineParams {
    pub alpha: f64,
    pub lambda: f64,
    pub k: usize,
    pub beta: f64,
    pub bins: usize,
    pub scope: ScopeMode,
    pub eps_log: f64,
    pub eps_grad: f64,
    pub intensity_scale: f64,
    pub seed: u64,
    pub sample_stride: usize,
    pub kmeans_iters: usize,
    pub max_sweeps: usize,
    /// Per-pixel argmax of the mixed distribution instead of the MRF.
    pub ml: bool,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            lambda: DEFAULT_LAMBDA,
            k: DEFAULT_K,
            beta: DEFAULT_BETA,
            bins: DEFAULT_BINS,
            scope: ScopeMode::Multi,
            eps_log: DEFAULT_EPS_LOG,
            eps_grad: DEFAULT_EPS_GRAD,
            intensity_scale: DEFAULT_INTENSITY_SCALE,
            seed: 0,
            sample_stride: 1,
            kmeans_iters: KMeansConfig::default().max_iters,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            ml: false,
        }
    }
}

impl RefineParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: String| Err(Error::InvalidInput(what));
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda {} must be finite and >= 0", self.lambda));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad(format!("beta {} must be finite and >= 0", self.beta));
        }
        if self.bins < 2 {
            return bad(format!("need at least 2 bins, got {}", self.bins));
        }
        if self.k == 0 || self.sample_stride == 0 {
            return bad("k and sample_stride must be at least 1".into());
        }
        if !(self.eps_log > 0.0) || !(self.eps_grad > 0.0) || !(self.intensity_scale > 0.0) {
            return bad("eps_log, eps_grad and intensity_scale must be positive".into());
        }
        Ok(())
    }

    fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            k: self.k,
            max_iters: self.kmeans_iters,
            seed: self.seed,
            sample_stride: self.sample_stride,
            ..KMeansConfig::default()
        }
    }
}

/// Everything refinement reads, all at the same resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneInputs {
    pub images: Vec<RgbImage>,
    pub features: Vec<FeatureMap>,
    pub scores: Vec<ScalarMap>,
}

impl SceneInputs {
    pub fn validate(&self) -> Result<()> {
        let n = self.images.len();
        if n == 0 {
            return Err(Error::InvalidInput("scene has no images".into()));
        }
        if self.features.len() != n || self.scores.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} images, {} feature maps, {} score maps",
                self.features.len(),
                self.scores.len()
            )));
        }
        let depth = self.features[0].depth();
        for i in 0..n {
            let dims = self.images[i].dims();
            if self.features[i].dims() != dims || self.scores[i].dims() != dims {
                return Err(Error::DimensionMismatch(format!(
                    "image {i}: image {dims:?}, features {:?}, scores {:?}",
                    self.features[i].dims(),
                    self.scores[i].dims()
                )));
            }
            if self.features[i].depth() != depth {
                return Err(Error::DimensionMismatch(format!(
                    "image {i} has feature depth {}, image 0 has {depth}",
                    self.features[i].depth()
                )));
            }
            self.scores[i].validate_scores()?;
        }
        Ok(())
    }
}

/// Intermediate distributions of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageStages {
    /// Discretized initial score (the geometric delta's label).
    pub geometric: LabelField,
    pub appearance: Vec<DiscretePdf>,
    pub mixed: Vec<DiscretePdf>,
    pub ml: LabelField,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageResult {
    pub map: ScalarMap,
    pub labels: LabelField,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub sweeps: usize,
    pub stages: Option<ImageStages>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineOutput {
    pub images: Vec<ImageResult>,
}

impl RefineOutput {
    pub fn maps(&self) -> Vec<ScalarMap> {
        self.images.iter().map(|r| r.map.clone()).collect()
    }
}

fn geometric_labels(score: &ScalarMap, bins: usize) -> Result<LabelField> {
    let labels = score
        .data()
        .iter()
        .map(|&s| score_to_label(s as f64, bins))
        .collect::<Result<Vec<_>>>()?;
    LabelField::new(score.height(), score.width(), bins, labels)
}

/// Appearance distributions for the requested scope: one shared model, or
/// one model per image.
fn appearance(inputs: &SceneInputs, geometric: &[LabelField], params: &RefineParams) -> Result<Vec<AppearancePdfs>> {
    let cfg = params.kmeans();
    match params.scope {
        ScopeMode::Multi => {
            let model = fit_scope(&inputs.features, Scope::Multi, &cfg)?;
            Ok(vec![pdfs_for_scope(&model, Scope::Multi, geometric, params.beta)?])
        }
        ScopeMode::Single => (0..inputs.images.len())
            .into_par_iter()
            .map(|r| {
                let model = fit_scope(&inputs.features, Scope::Single(r), &cfg)?;
                pdfs_for_scope(&model, Scope::Single(r), geometric, params.beta)
            })
            .collect(),
    }
}

/// Refines every score map of the scene.
pub fn refine(inputs: &SceneInputs, params: &RefineParams) -> Result<RefineOutput> {
    refine_with_stages(inputs, params, false)
}

/// As [`refine`], optionally keeping each image's intermediate
/// distributions.
pub fn refine_with_stages(inputs: &SceneInputs, params: &RefineParams, keep_stages: bool) -> Result<RefineOutput> {
    params.validate().map_err(|e| e.in_stage("parameters"))?;
    inputs.validate().map_err(|e| e.in_stage("inputs"))?;

    let geometric = inputs
        .scores
        .iter()
        .map(|s| geometric_labels(s, params.bins))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.in_stage("discretize"))?;
    let appearance = appearance(inputs, &geometric, params).map_err(|e| e.in_stage("clustering"))?;

    let images = (0..inputs.images.len())
        .into_par_iter()
        .map(|i| {
            // the shared model indexes images directly; per-image models hold one
            let (pdfs, slot) = match params.scope {
                ScopeMode::Multi => (&appearance[0], i),
                ScopeMode::Single => (&appearance[i], 0),
            };
            refine_image(&inputs.images[i], params, &geometric[i], pdfs, slot, keep_stages)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RefineOutput { images })
}

fn refine_image(
    image: &RgbImage,
    params: &RefineParams,
    geometric: &LabelField,
    pdfs: &AppearancePdfs,
    slot: usize,
    keep_stages: bool,
) -> Result<ImageResult> {
    let (h, w) = geometric.dims();
    let appearance: Vec<DiscretePdf> = (0..h * w).map(|p| pdfs.pixel(slot, p).clone()).collect();
    let mixed: Vec<DiscretePdf> = geometric
        .data()
        .iter()
        .zip(&appearance)
        .map(|(&m, ha)| mix_delta(m, ha, params.alpha))
        .collect();

    let ml = ml_estimate(&mixed, h, w).map_err(|e| e.in_stage("ml estimate"))?;
    let energy_params = EnergyParams {
        lambda: if params.ml { 0.0 } else { params.lambda },
        eps_grad: params.eps_grad,
        eps_log: params.eps_log,
    };
    let gray = to_gray(image);
    let scale = params.intensity_scale as f32;
    let gray = ScalarMap::new(h, w, gray.data().iter().map(|&v| v * scale).collect())?;
    let model = build_energy(&mixed, &gray, &energy_params).map_err(|e| e.in_stage("energy"))?;

    let (labels, initial_energy, final_energy, sweeps) = if params.ml {
        let e = model.energy(&ml)?;
        (ml.clone(), e, e, 0)
    } else {
        let cfg = ExpansionConfig {
            max_sweeps: params.max_sweeps,
        };
        let out = alpha_expansion(&model, &ml, &cfg).map_err(|e| e.in_stage("alpha-expansion"))?;
        (out.labels, out.trace[0], out.energy, out.sweeps)
    };

    let scores = labels
        .data()
        .iter()
        .map(|&m| label_to_score(m, params.bins).map(|s| s as f32))
        .collect::<Result<Vec<_>>>()?;
    Ok(ImageResult {
        map: ScalarMap::new(h, w, scores)?,
        labels,
        initial_energy,
        final_energy,
        sweeps,
        stages: keep_stages.then(|| ImageStages {
            geometric: geometric.clone(),
            appearance,
            mixed,
            ml,
        }),
    })
}
