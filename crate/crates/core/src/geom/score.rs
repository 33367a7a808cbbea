use nalgebra::Vector3;
use rayon::prelude::*;

use super::fundamental::FundamentalMatrix;
use crate::error::{Error, Result};
use crate::grids::{FeatureMap, ScalarMap};

/// Epipolar line `a x + b y + c = 0` in the other image, with `a² + b² = 1`.
pub fn epipolar_line(f: &FundamentalMatrix, x: f64, y: f64) -> Result<[f64; 3]> {
    let l = f.matrix() * Vector3::new(x, y, 1.0);
    let n = l.x.hypot(l.y);
    if n <= 1e-12 {
        return Err(Error::AtEpipole);
    }
    Ok([l.x / n, l.y / n, l.z / n])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScoreConfig {
    /// Half-width of the search strip around the line, in pixels.
    pub band: usize,
    /// Sample spacing along the line, in pixels.
    pub step: f64,
    /// Feature distance at which the score saturates at 1.
    pub tau: f64,
}

impl Default for PairScoreConfig {
    fn default() -> Self {
        Self {
            band: 1,
            step: 1.0,
            tau: 0.5,
        }
    }
}

/// Per-pixel scores of a reference image against one other image.
#[derive(Debug, Clone, PartialEq)]
pub struct PairScore {
    pub scores: ScalarMap,
    /// `true` where the epipolar line never enters the other image; such
    /// pixels score 1 and are ignored when combining pairs.
    pub out_of_view: Vec<bool>,
}

fn unit_rows(f: &FeatureMap) -> Vec<f64> {
    let mut out = Vec::with_capacity(f.data().len());
    for p in f.pixels() {
        let n = p.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        out.extend(p.iter().map(|&v| if n > 0.0 { v as f64 / n } else { 0.0 }));
    }
    out
}

/// Parameter range `[t0, t1]` of `p0 + t·d` inside the box
/// `[-0.5, w - 0.5] × [-0.5, h - 0.5]`.
fn clip(p0: (f64, f64), d: (f64, f64), h: usize, w: usize) -> Option<(f64, f64)> {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (origin, dir, max) in [(p0.0, d.0, w as f64 - 0.5), (p0.1, d.1, h as f64 - 0.5)] {
        if dir.abs() < 1e-15 {
            if origin < -0.5 || origin > max {
                return None;
            }
        } else {
            let (a, b) = ((-0.5 - origin) / dir, (max - origin) / dir);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
    }
    (lo <= hi).then_some((lo, hi))
}

/// Scores every reference pixel by how far its feature is from the best
/// match on its epipolar strip in `other`: `clamp(d*/tau, 0, 1)` where `d*`
/// is the smallest L2 distance between unit-normalized features.
pub fn pair_score(
    reference: &FeatureMap,
    other: &FeatureMap,
    f: &FundamentalMatrix,
    cfg: &PairScoreConfig,
) -> Result<PairScore> {
    if reference.depth() != other.depth() {
        return Err(Error::DimensionMismatch(format!(
            "feature depths {} and {}",
            reference.depth(),
            other.depth()
        )));
    }
    if !(cfg.step > 0.0) || !(cfg.tau > 0.0) {
        return Err(Error::InvalidInput("step and tau must be positive".into()));
    }
    let (h, w) = reference.dims();
    let (oh, ow) = other.dims();
    let depth = reference.depth();
    let ours = unit_rows(reference);
    let theirs = unit_rows(other);
    let band = cfg.band as i64;

    let per_pixel: Vec<(f32, bool)> = (0..h * w)
        .into_par_iter()
        .with_min_len(64)
        .map(|j| {
            let (y, x) = (j / w, j % w);
            let Ok([a, b, c]) = epipolar_line(f, x as f64, y as f64) else {
                return (1.0, true);
            };
            let p0 = (-a * c, -b * c);
            let dir = (-b, a);
            let Some((t0, t1)) = clip(p0, dir, oh, ow) else {
                return (1.0, true);
            };
            let fj = &ours[j * depth..(j + 1) * depth];
            let mut best = f64::INFINITY;
            let mut t = (t0 / cfg.step).ceil() * cfg.step;
            while t <= t1 {
                let (px, py) = (p0.0 + t * dir.0, p0.1 + t * dir.1);
                for o in -band..=band {
                    let qx = (px + o as f64 * a).round();
                    let qy = (py + o as f64 * b).round();
                    if qx < 0.0 || qy < 0.0 || qx >= ow as f64 || qy >= oh as f64 {
                        continue;
                    }
                    let q = qy as usize * ow + qx as usize;
                    let d2: f64 = fj
                        .iter()
                        .zip(&theirs[q * depth..(q + 1) * depth])
                        .map(|(u, v)| (u - v) * (u - v))
                        .sum();
                    best = best.min(d2);
                }
                t += cfg.step;
            }
            if best.is_finite() {
                ((best.sqrt() / cfg.tau).clamp(0.0, 1.0) as f32, false)
            } else {
                (1.0, true)
            }
        })
        .collect();

    let (scores, out_of_view): (Vec<f32>, Vec<bool>) = per_pixel.into_iter().unzip();
    Ok(PairScore {
        scores: ScalarMap::new(h, w, scores)?,
        out_of_view,
    })
}

/// How the in-view pair scores of a pixel are fused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Combine {
    #[default]
    Mean,
    Min,
    Median,
}

/// Fuses pair maps per pixel over the pairs where the pixel is in view;
/// a pixel out of view in every pair gets 0.5.
pub fn combine_pairs(maps: &[PairScore], rule: Combine) -> Result<ScalarMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::InvalidInput("no pair maps to combine".into()))?;
    let (h, w) = first.scores.dims();
    for m in maps {
        if m.scores.dims() != (h, w) || m.out_of_view.len() != h * w {
            return Err(Error::DimensionMismatch(format!(
                "pair map {:?} vs {:?}",
                m.scores.dims(),
                (h, w)
            )));
        }
    }
    let mut vals = Vec::with_capacity(maps.len());
    let data = (0..h * w)
        .map(|j| {
            vals.clear();
            vals.extend(maps.iter().filter(|m| !m.out_of_view[j]).map(|m| m.scores.data()[j] as f64));
            if vals.is_empty() {
                return 0.5;
            }
            let v = match rule {
                Combine::Mean => vals.iter().sum::<f64>() / vals.len() as f64,
                Combine::Min => vals.iter().copied().fold(f64::INFINITY, f64::min),
                Combine::Median => {
                    vals.sort_by(f64::total_cmp);
                    let n = vals.len();
                    if n % 2 == 1 {
                        vals[n / 2]
                    } else {
                        0.5 * (vals[n / 2 - 1] + vals[n / 2])
                    }
                }
            };
            v.clamp(0.0, 1.0) as f32
        })
        .collect();
    ScalarMap::new(h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    /// Horizontal translation: epipolar lines are image rows.
    fn row_rig() -> FundamentalMatrix {
        FundamentalMatrix::from_matrix(Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)).unwrap()
    }

    fn pair(map: ScalarMap) -> PairScore {
        let n = map.len();
        PairScore {
            scores: map,
            out_of_view: vec![false; n],
        }
    }

    #[test]
    fn translation_rig_lines_pass_through_matches() {
        let f = row_rig();
        for (x, y, xp) in [(3.0, 4.0, 9.5), (0.0, 0.0, -20.0), (100.0, 37.25, 1.0)] {
            let [a, b, c] = epipolar_line(&f, x, y).unwrap();
            assert!((a * a + b * b - 1.0).abs() < 1e-12);
            assert!((a * xp + b * y + c).abs() < 1e-9);
        }
    }

    #[test]
    fn epipole_is_signaled() {
        // F e = 0 for e = (1, 2, 1)
        let m = Matrix3::new(1.0, 0.0, -1.0, 0.0, 1.0, -2.0, 1.0, 1.0, -3.0);
        let f = FundamentalMatrix::from_matrix(m).unwrap();
        assert!(matches!(epipolar_line(&f, 1.0, 2.0), Err(Error::AtEpipole)));
    }

    #[test]
    fn self_match_scores_zero() {
        let feats = FeatureMap::new(4, 5, 2, (0..40).map(|i| (i % 7) as f32 + 1.0).collect()).unwrap();
        let s = pair_score(&feats, &feats, &row_rig(), &PairScoreConfig::default()).unwrap();
        assert!(s.scores.data().iter().all(|&v| v == 0.0));
        assert!(s.out_of_view.iter().all(|&o| !o));
    }

    #[test]
    fn orthogonal_features_score_one() {
        let a = FeatureMap::new(3, 3, 2, [1.0, 0.0].repeat(9)).unwrap();
        let b = FeatureMap::new(3, 3, 2, [0.0, 2.0].repeat(9)).unwrap();
        let s = pair_score(&a, &b, &row_rig(), &PairScoreConfig::default()).unwrap();
        assert!(s.scores.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn lines_outside_the_other_image_are_flagged() {
        let a = FeatureMap::new(6, 2, 1, vec![1.0; 12]).unwrap();
        let b = FeatureMap::new(2, 2, 1, vec![1.0; 4]).unwrap();
        let s = pair_score(&a, &b, &row_rig(), &PairScoreConfig { band: 0, ..Default::default() }).unwrap();
        assert_eq!(s.out_of_view, [vec![false; 4], vec![true; 8]].concat());
        assert_eq!(s.scores.get(5, 0), 1.0);
    }

    /// Exhaustive strip search: every pixel whose center is within
    /// `band + 0.5` of the line.
    fn oracle(reference: &FeatureMap, other: &FeatureMap, f: &FundamentalMatrix, band: f64, tau: f64) -> Vec<f64> {
        let unit = |v: &[f32]| {
            let n = v.iter().map(|&x| (x * x) as f64).sum::<f64>().sqrt();
            v.iter().map(|&x| x as f64 / n).collect::<Vec<_>>()
        };
        let (h, w) = reference.dims();
        (0..h * w)
            .map(|j| {
                let [a, b, c] = epipolar_line(f, (j % w) as f64, (j / w) as f64).unwrap();
                let u = unit(reference.pixel(j));
                let mut best = f64::INFINITY;
                for q in 0..other.pixel_count() {
                    let (qx, qy) = ((q % other.width()) as f64, (q / other.width()) as f64);
                    if (a * qx + b * qy + c).abs() <= band + 0.5 {
                        let v = unit(other.pixel(q));
                        best = best.min(u.iter().zip(&v).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt());
                    }
                }
                (best / tau).min(1.0)
            })
            .collect()
    }

    #[test]
    fn moved_patch_stands_out() {
        let bg = [0.9f32, 0.4, 0.1];
        let patch = [0.1f32, 0.2, 0.9];
        let scene = |py: usize, px: usize| {
            let mut d = Vec::new();
            for y in 0..8 {
                for x in 0..8 {
                    let inside = (py..py + 2).contains(&y) && (px..px + 2).contains(&x);
                    d.extend_from_slice(if inside { &patch } else { &bg });
                }
            }
            FeatureMap::new(8, 8, 3, d).unwrap()
        };
        let (reference, other) = (scene(1, 2), scene(5, 5));
        let f = row_rig();
        let cfg = PairScoreConfig { band: 1, step: 1.0, tau: 0.5 };
        let s = pair_score(&reference, &other, &f, &cfg).unwrap();
        let expected = oracle(&reference, &other, &f, 1.0, 0.5);
        for j in 0..64 {
            let (y, x) = (j / 8, j % 8);
            let v = s.scores.data()[j] as f64;
            assert!((v - expected[j]).abs() < 1e-6, "pixel {j}: {v} vs {}", expected[j]);
            if (1..3).contains(&y) && (2..4).contains(&x) {
                assert!(v > 0.5);
            } else {
                assert!(v < 0.1);
            }
        }
    }

    #[test]
    fn combine_examples() {
        let a = pair(ScalarMap::new(1, 2, vec![0.2, 1.0]).unwrap());
        let mut b = pair(ScalarMap::new(1, 2, vec![0.8, 0.3]).unwrap());
        assert_eq!(combine_pairs(std::slice::from_ref(&a), Combine::Mean).unwrap(), a.scores);
        let mut a2 = a.clone();
        a2.out_of_view[1] = true;
        let m = combine_pairs(&[a2.clone(), b.clone()], Combine::Mean).unwrap();
        assert!((m.data()[0] - 0.5).abs() < 1e-7);
        assert!((m.data()[1] - 0.3).abs() < 1e-7);
        b.out_of_view[1] = true;
        assert_eq!(combine_pairs(&[a2.clone(), b.clone()], Combine::Mean).unwrap().data()[1], 0.5);
        assert!((combine_pairs(&[a.clone(), b.clone()], Combine::Min).unwrap().data()[0] - 0.2).abs() < 1e-7);
        let c = pair(ScalarMap::new(1, 2, vec![0.4, 0.0]).unwrap());
        assert!((combine_pairs(&[a, b, c], Combine::Median).unwrap().data()[0] - 0.4).abs() < 1e-7);
        assert!(combine_pairs(&[], Combine::Mean).is_err());
    }

    #[test]
    fn combine_rejects_mismatch() {
        let a = pair(ScalarMap::filled(2, 2, 0.1));
        let b = pair(ScalarMap::filled(2, 3, 0.1));
        assert!(combine_pairs(&[a, b], Combine::Mean).is_err());
    }
}
