//! A small synthetic image set with known answers.
//!
//! A warm-textured background and a nearer textured slab are seen by
//! cameras translating horizontally, so static content obeys a
//! rows-to-rows epipolar geometry with two disparity layers. A saturated
//! blue square moves to a different, vertically disjoint band in every
//! image, so no static explanation exists for it. Ground-truth masks mark
//! the square Dynamic with a one-pixel DontCare ring. The initial score maps
//! are the truth with salt noise: each pixel independently becomes 1.0 with
//! the configured probability.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::{Match, SparseMatches};
use crate::grids::pnm::{write_mask, write_ppm};
use crate::grids::{builtin_features, write_tensor, Mask, MaskClass, RgbImage, ScalarMap};
use crate::manifest::{ImageRecord, MatchRecord, SceneManifest, DEFAULT_FEATURE_WINDOW};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub height: usize,
    pub width: usize,
    pub images: usize,
    /// Side of the moving square; 0 gives an all-static scene.
    pub square: usize,
    /// Probability that a pixel of the initial map is set to 1.
    pub salt: f64,
    pub matches_per_pair: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            height: 64,
            width: 64,
            images: 5,
            square: 10,
            salt: 0.2,
            matches_per_pair: 80,
            seed: 0,
        }
    }
}

impl SynthConfig {
    /// The same cameras and layers without the moving square.
    pub fn static_scene(self) -> Self {
        Self { square: 0, ..self }
    }

    fn validate(&self) -> Result<()> {
        if self.images < 2 || self.height < 16 || self.width < 16 {
            return Err(Error::InvalidInput("synthetic scene needs >= 2 images of at least 16x16".into()));
        }
        if !(0.0..=1.0).contains(&self.salt) {
            return Err(Error::InvalidInput(format!("salt probability {} outside [0, 1]", self.salt)));
        }
        if self.square > 0 {
            let band = self.height / self.images;
            let span = self.square + 2 * self.images;
            if self.square + 2 > band || span > self.width {
                return Err(Error::InvalidInput(format!(
                    "square of side {} does not fit {} disjoint bands of a {}x{} image",
                    self.square, self.images, self.height, self.width
                )));
            }
        }
        Ok(())
    }

    /// Horizontal camera offset of image `k`; the slab shifts by it, the
    /// background does not.
    fn shift(&self, k: usize) -> i64 {
        k as i64 - (self.images as i64 - 1) / 2
    }

    /// Top-left corner of the square in image `k`.
    fn square_origin(&self, k: usize) -> (usize, usize) {
        let band = self.height / self.images;
        let y = k * band + (band - self.square) / 2;
        let x = self.width / 8 + 2 * k * (self.width - self.width / 4 - self.square) / (2 * self.images.max(2) - 2);
        (y, x)
    }

    fn in_square(&self, k: usize, y: usize, x: usize) -> bool {
        if self.square == 0 {
            return false;
        }
        let (y0, x0) = self.square_origin(k);
        (y0..y0 + self.square).contains(&y) && (x0..x0 + self.square).contains(&x)
    }

    fn slab(&self) -> (std::ops::Range<i64>, std::ops::Range<usize>) {
        let (h, w) = (self.height, self.width as i64);
        (w * 9 / 32..w * 23 / 32, h * 5 / 32..h * 27 / 32)
    }

    /// Whether the world column `u` of row `y` belongs to the slab.
    fn in_slab_world(&self, u: i64, y: usize) -> bool {
        let (cols, rows) = self.slab();
        cols.contains(&u) && rows.contains(&y)
    }

    /// The static layer visible at `(y, x)` of image `k`: `Some(u)` is a slab
    /// point at world column u, `None` the background.
    fn slab_at(&self, k: usize, y: usize, x: usize) -> Option<i64> {
        let u = x as i64 - self.shift(k);
        self.in_slab_world(u, y).then_some(u)
    }
}

fn background(u: f64, v: f64) -> [f32; 3] {
    [
        0.70 + 0.12 * (0.9 * u + 0.3 * v).sin() + 0.06 * (0.37 * u - 1.1 * v).sin(),
        0.42 + 0.10 * (0.5 * u + 0.8 * v + 1.0).sin() + 0.05 * (1.3 * u + 0.2 * v).sin(),
        0.15 + 0.06 * (0.7 * u - 0.4 * v + 2.0).sin(),
    ]
    .map(|c| c as f32)
}

fn slab(u: f64, v: f64) -> [f32; 3] {
    [
        0.85 + 0.10 * (0.6 * u + 0.9 * v).sin(),
        0.60 + 0.10 * (1.1 * u - 0.5 * v).sin(),
        0.30 + 0.06 * (0.3 * u + 1.2 * v).sin(),
    ]
    .map(|c| c as f32)
}

fn square(u: f64, v: f64) -> [f32; 3] {
    let t = (0.8 * u + 0.6 * v).sin();
    [0.10 + 0.03 * t, 0.20 + 0.03 * t, 0.85 + 0.05 * t].map(|c| c as f32)
}

/// A generated scene, all at one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub config: SynthConfig,
    pub images: Vec<RgbImage>,
    pub truths: Vec<Mask>,
    /// Initial score maps: the truth plus salt noise.
    pub scores: Vec<ScalarMap>,
    /// Correspondences for every pair `(r, o)` with `r < o`.
    pub matches: Vec<((usize, usize), SparseMatches)>,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthScene> {
    cfg.validate()?;
    let (h, w) = (cfg.height, cfg.width);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let mut images = Vec::with_capacity(cfg.images);
    let mut truths = Vec::with_capacity(cfg.images);
    let mut scores = Vec::with_capacity(cfg.images);
    for k in 0..cfg.images {
        let mut planes = [vec![0f32; h * w], vec![0f32; h * w], vec![0f32; h * w]];
        let mut truth = Mask::filled(h, w, MaskClass::Static);
        for y in 0..h {
            for x in 0..w {
                let rgb = if cfg.in_square(k, y, x) {
                    let (y0, x0) = cfg.square_origin(k);
                    truth.set(y, x, MaskClass::Dynamic);
                    square((x - x0) as f64, (y - y0) as f64)
                } else if let Some(u) = cfg.slab_at(k, y, x) {
                    slab(u as f64, y as f64)
                } else {
                    background(x as f64, y as f64)
                };
                for c in 0..3 {
                    planes[c][y * w + x] = rgb[c];
                }
            }
        }
        ring(&mut truth);
        let [r, g, b] = planes;
        images.push(RgbImage::new(ScalarMap::new(h, w, r)?, ScalarMap::new(h, w, g)?, ScalarMap::new(h, w, b)?)?);
        let noisy = truth
            .data()
            .iter()
            .map(|&c| {
                let salted = rng.random_bool(cfg.salt);
                if c == MaskClass::Dynamic || salted {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        scores.push(ScalarMap::new(h, w, noisy)?);
        truths.push(truth);
    }

    let mut matches = Vec::new();
    for r in 0..cfg.images {
        for o in r + 1..cfg.images {
            matches.push(((r, o), pair_matches(cfg, r, o, &mut rng)?));
        }
    }
    Ok(SynthScene {
        config: *cfg,
        images,
        truths,
        scores,
        matches,
    })
}

/// Marks static pixels 4-adjacent to a dynamic one as DontCare.
fn ring(mask: &mut Mask) {
    let (h, w) = mask.dims();
    let dynamic: Vec<bool> = mask.data().iter().map(|&c| c == MaskClass::Dynamic).collect();
    for y in 0..h {
        for x in 0..w {
            if dynamic[y * w + x] {
                continue;
            }
            let near = (y > 0 && dynamic[(y - 1) * w + x])
                || (y + 1 < h && dynamic[(y + 1) * w + x])
                || (x > 0 && dynamic[y * w + x - 1])
                || (x + 1 < w && dynamic[y * w + x + 1]);
            if near {
                mask.set(y, x, MaskClass::DontCare);
            }
        }
    }
}

/// Exact correspondences of static points visible in both images.
fn pair_matches(cfg: &SynthConfig, r: usize, o: usize, rng: &mut ChaCha8Rng) -> Result<SparseMatches> {
    let (h, w) = (cfg.height, cfg.width);
    let mut out = Vec::with_capacity(cfg.matches_per_pair);
    let mut tries = 0;
    while out.len() < cfg.matches_per_pair {
        tries += 1;
        if tries > 1000 * cfg.matches_per_pair.max(1) {
            return Err(Error::Degenerate(format!("could not place matches for pair ({r}, {o})")));
        }
        let y = rng.random_range(0..h);
        let x = rng.random_range(0..w);
        if cfg.in_square(r, y, x) {
            continue;
        }
        let xp = match cfg.slab_at(r, y, x) {
            Some(u) => u + cfg.shift(o),
            None => x as i64,
        };
        if !(0..w as i64).contains(&xp) {
            continue;
        }
        let xp = xp as usize;
        // the point must show the same layer in `o`, unoccluded
        if cfg.in_square(o, y, xp) || cfg.slab_at(o, y, xp) != cfg.slab_at(r, y, x) {
            continue;
        }
        out.push(Match::new(x as f64, y as f64, xp as f64, y as f64));
    }
    Ok(SparseMatches::new(out))
}

/// Writes the scene as files and returns the manifest describing them.
///
/// Features are the built-in ones (window 3), stored so that every consumer
/// reads identical values.
pub fn write_scene(scene: &SynthScene, dir: impl AsRef<Path>, name: &str) -> Result<SceneManifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut records = Vec::with_capacity(scene.images.len());
    for (k, image) in scene.images.iter().enumerate() {
        let rec = ImageRecord {
            image: format!("img_{k:03}.ppm").into(),
            features: Some(format!("feat_{k:03}.fmap").into()),
            score: Some(format!("score_{k:03}.fmap").into()),
            mask: Some(format!("mask_{k:03}.pgm").into()),
        };
        write_ppm(image, dir.join(&rec.image))?;
        write_tensor(&builtin_features(image, DEFAULT_FEATURE_WINDOW)?, dir.join(rec.features.as_ref().unwrap()))?;
        write_tensor(&scene.scores[k], dir.join(rec.score.as_ref().unwrap()))?;
        write_mask(&scene.truths[k], dir.join(rec.mask.as_ref().unwrap()))?;
        records.push(rec);
    }
    let mut manifest = SceneManifest::new(name, records);
    for &((r, o), ref m) in &scene.matches {
        let path = format!("matches_{r:03}_{o:03}.txt");
        m.write(dir.join(&path))?;
        manifest.matches.push(MatchRecord {
            reference: r,
            other: o,
            path: path.into(),
        });
    }
    manifest.write(dir.join("manifest.json"))?;
    manifest.set_base_dir(dir);
    Ok(manifest)
}
