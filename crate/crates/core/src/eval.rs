//! Jaccard evaluation of score maps against ground-truth masks, with the
//! binarization threshold chosen per image or once per set.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{Mask, MaskClass, ScalarMap};

pub const DEFAULT_GRID_SIZE: usize = 256;

/// `n` evenly spaced thresholds from 0 to 1 inclusive.
pub fn threshold_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("threshold grid needs at least 2 points, got {n}")));
    }
    Ok((0..n).map(|i| i as f64 / (n - 1) as f64).collect())
}

/// Dynamic where `score > t`.
pub fn threshold(map: &ScalarMap, t: f64) -> Mask {
    let data = map
        .data()
        .iter()
        .map(|&s| if s as f64 > t { MaskClass::Dynamic } else { MaskClass::Static })
        .collect();
    Mask::new(map.height(), map.width(), data).expect("same shape as the map")
}

/// Intersection over union of the Dynamic pixels, ignoring pixels that are
/// DontCare in `truth`. Two empty sets agree perfectly (1.0).
pub fn jaccard(pred: &Mask, truth: &Mask) -> Result<f64> {
    if pred.dims() != truth.dims() {
        return Err(Error::DimensionMismatch(format!(
            "prediction {:?} vs truth {:?}",
            pred.dims(),
            truth.dims()
        )));
    }
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&p, &t) in pred.data().iter().zip(truth.data()) {
        if p == MaskClass::DontCare {
            return Err(Error::InvalidInput("prediction contains DontCare pixels".into()));
        }
        if t == MaskClass::DontCare {
            continue;
        }
        let (pd, td) = (p == MaskClass::Dynamic, t == MaskClass::Dynamic);
        inter += (pd && td) as usize;
        union += (pd || td) as usize;
    }
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

/// Jaccard of `threshold(map, t)` for every `t` in `grid`, from sorted
/// score lists instead of one pass per threshold.
pub fn jaccard_curve(map: &ScalarMap, truth: &Mask, grid: &[f64]) -> Result<Vec<f64>> {
    if map.dims() != truth.dims() {
        return Err(Error::DimensionMismatch(format!(
            "map {:?} vs truth {:?}",
            map.dims(),
            truth.dims()
        )));
    }
    let mut dynamic = Vec::new();
    let mut stat = Vec::new();
    for (&s, &t) in map.data().iter().zip(truth.data()) {
        match t {
            MaskClass::Dynamic => dynamic.push(s as f64),
            MaskClass::Static => stat.push(s as f64),
            MaskClass::DontCare => {}
        }
    }
    dynamic.sort_by(f64::total_cmp);
    stat.sort_by(f64::total_cmp);
    let above = |v: &[f64], t: f64| v.len() - v.partition_point(|&s| s <= t);
    Ok(grid
        .iter()
        .map(|&t| {
            let tp = above(&dynamic, t);
            let union = dynamic.len() + above(&stat, t);
            if union == 0 {
                1.0
            } else {
                tp as f64 / union as f64
            }
        })
        .collect())
}

/// First index of the maximum (smallest threshold on ties).
fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > values[b] { i } else { b })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Best {
    pub threshold: f64,
    pub jaccard: f64,
}

pub fn best_per_image(map: &ScalarMap, truth: &Mask, grid: &[f64]) -> Result<Best> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty threshold grid".into()));
    }
    let curve = jaccard_curve(map, truth, grid)?;
    let i = argmax(&curve);
    Ok(Best {
        threshold: grid[i],
        jaccard: curve[i],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetBest {
    pub threshold: f64,
    pub jaccards: Vec<f64>,
    pub mean: f64,
}

/// The single threshold maximizing the mean Jaccard over the set.
pub fn best_per_set(maps: &[ScalarMap], truths: &[Mask], grid: &[f64]) -> Result<SetBest> {
    if maps.len() != truths.len() || maps.is_empty() {
        return Err(Error::DimensionMismatch(format!(
            "{} maps and {} truth masks",
            maps.len(),
            truths.len()
        )));
    }
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty threshold grid".into()));
    }
    let curves = maps
        .iter()
        .zip(truths)
        .map(|(m, t)| jaccard_curve(m, t, grid))
        .collect::<Result<Vec<_>>>()?;
    let means: Vec<f64> = (0..grid.len())
        .map(|g| curves.iter().map(|c| c[g]).sum::<f64>() / curves.len() as f64)
        .collect();
    let i = argmax(&means);
    Ok(SetBest {
        threshold: grid[i],
        jaccards: curves.iter().map(|c| c[i]).collect(),
        mean: means[i],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageEval {
    pub name: String,
    pub per_image: Best,
    /// Jaccard at the shared per-set threshold.
    pub per_set_jaccard: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scene: String,
    pub grid_size: usize,
    pub images: Vec<ImageEval>,
    pub per_set_threshold: f64,
    pub mean_per_image: f64,
    pub mean_per_set: f64,
}

/// Evaluates a set under both threshold regimes.
pub fn evaluate(
    scene: &str,
    names: &[String],
    maps: &[ScalarMap],
    truths: &[Mask],
    grid_size: usize,
) -> Result<EvalReport> {
    if names.len() != maps.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} names for {} maps",
            names.len(),
            maps.len()
        )));
    }
    let grid = threshold_grid(grid_size)?;
    let set = best_per_set(maps, truths, &grid)?;
    let mut images = Vec::with_capacity(maps.len());
    for (i, (m, t)) in maps.iter().zip(truths).enumerate() {
        images.push(ImageEval {
            name: names[i].clone(),
            per_image: best_per_image(m, t, &grid)?,
            per_set_jaccard: set.jaccards[i],
        });
    }
    let mean_per_image = images.iter().map(|e| e.per_image.jaccard).sum::<f64>() / images.len() as f64;
    Ok(EvalReport {
        scene: scene.to_string(),
        grid_size,
        images,
        per_set_threshold: set.threshold,
        mean_per_image,
        mean_per_set: set.mean,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Aligned table with Jaccard columns laid out `per image \ per set`.
    pub fn to_table(&self) -> String {
        let width = self
            .images
            .iter()
            .map(|e| e.name.len())
            .chain(["image".len(), "mean".len()])
            .max()
            .unwrap_or(5);
        let mut out = String::new();
        writeln!(out, "scene: {}", self.scene).unwrap();
        writeln!(out, "{:<width$}  {:>7}  {:>17}", "image", "t_img", "J img \\ set").unwrap();
        for e in &self.images {
            writeln!(
                out,
                "{:<width$}  {:>7.4}  {:>7.4} \\ {:>7.4}",
                e.name, e.per_image.threshold, e.per_image.jaccard, e.per_set_jaccard
            )
            .unwrap();
        }
        writeln!(
            out,
            "{:<width$}  {:>7}  {:>7.4} \\ {:>7.4}",
            "mean", "", self.mean_per_image, self.mean_per_set
        )
        .unwrap();
        writeln!(out, "per-set threshold: {:.4} (grid of {})", self.per_set_threshold, self.grid_size).unwrap();
        out
    }
}
