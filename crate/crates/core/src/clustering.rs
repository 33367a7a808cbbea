//! K-means over pixel features and the per-cluster appearance distribution.
//!
//! Every pixel of a cluster votes for its own geometric label, weighted by
//! `exp(-β d² / M²)` where `d` is its distance to the cluster center and `M`
//! the median member distance.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grids::{write_tensor, FeatureMap, LabelField};
use crate::scoring::DiscretePdf;

pub const DEFAULT_K: usize = 600;
pub const DEFAULT_BETA: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    /// Stop once no center moves farther than this.
    pub tol: f64,
    pub seed: u64,
    /// Fit on every `sample_stride`-th pixel; assignment always covers all.
    pub sample_stride: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            max_iters: 50,
            tol: 1e-6,
            seed: 0,
            sample_stride: 1,
        }
    }
}

/// Clustering scope of a whole run: one model per image (CDRSs) or one
/// model over the set (CDRSm).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScopeMode {
    Single,
    #[default]
    Multi,
}

/// Which images a model was fitted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    /// One image, by index in the scene.
    Single(usize),
    /// Every image of the scene.
    Multi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    scope: Scope,
    depth: usize,
    centers: Vec<f64>,
    medians: Vec<f64>,
    sizes: Vec<usize>,
    assignments: Vec<Vec<u32>>,
    distances: Vec<Vec<f64>>,
    objective_history: Vec<f64>,
}

impl ClusterModel {
    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn k(&self) -> usize {
        self.medians.len()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn center(&self, k: usize) -> &[f64] {
        &self.centers[k * self.depth..(k + 1) * self.depth]
    }

    /// Median distance of the members of cluster `k` to its center (0 for
    /// an empty cluster).
    pub fn median(&self, k: usize) -> f64 {
        self.medians[k]
    }

    pub fn cluster_size(&self, k: usize) -> usize {
        self.sizes[k]
    }

    /// Number of images the model assigns.
    pub fn image_count(&self) -> usize {
        self.assignments.len()
    }

    /// Cluster index of every pixel of the `i`-th fitted image.
    pub fn assignment(&self, i: usize) -> &[u32] {
        &self.assignments[i]
    }

    /// Distance of every pixel of the `i`-th fitted image to its center.
    pub fn distances(&self, i: usize) -> &[f64] {
        &self.distances[i]
    }

    /// Objective on the fitting sample after each assignment step, ending
    /// with the objective of the final centers.
    pub fn objective_history(&self) -> &[f64] {
        &self.objective_history
    }

    /// Writes the centers as a `K×1×D` tensor and the medians as text, one
    /// `index median` line per cluster.
    pub fn dump(&self, centers_path: impl AsRef<Path>, medians_path: impl AsRef<Path>) -> Result<()> {
        let data = self.centers.iter().map(|&c| c as f32).collect();
        write_tensor(&FeatureMap::new(self.k(), 1, self.depth, data)?, centers_path)?;
        let mut text = String::from("# cluster median_distance members\n");
        for k in 0..self.k() {
            writeln!(text, "{k} {} {}", self.medians[k], self.sizes[k]).expect("string write");
        }
        let path = medians_path.as_ref();
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest center and squared distance; ties go to the lowest index.
fn nearest(point: &[f64], centers: &[f64], depth: usize) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (k, c) in centers.chunks_exact(depth).enumerate() {
        let d = sq_dist(point, c);
        if d < best.1 {
            best = (k as u32, d);
        }
    }
    best
}

fn assign_all(points: &[f64], centers: &[f64], depth: usize) -> Vec<(u32, f64)> {
    points
        .par_chunks_exact(depth)
        .with_min_len(256)
        .map(|p| nearest(p, centers, depth))
        .collect()
}

fn plus_plus_init(points: &[f64], depth: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = points.len() / depth;
    let mut centers = Vec::with_capacity(k * depth);
    let first = rng.random_range(0..n);
    centers.extend_from_slice(&points[first * depth..(first + 1) * depth]);
    let mut d2: Vec<f64> = points
        .chunks_exact(depth)
        .map(|p| sq_dist(p, &centers[..depth]))
        .collect();
    for _ in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // rounding can leave the target just past the last positive weight
            chosen.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("positive total"))
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick * depth..(pick + 1) * depth].to_vec();
        for (d, p) in d2.iter_mut().zip(points.chunks_exact(depth)) {
            *d = d.min(sq_dist(p, &c));
        }
        centers.extend_from_slice(&c);
    }
    centers
}

/// Fits `cfg.k` centers to the pixels of `features` and assigns every
/// pixel. The returned model carries `scope` as its label.
pub fn kmeans_fit(features: &[&FeatureMap], scope: Scope, cfg: &KMeansConfig) -> Result<ClusterModel> {
    let first = features
        .first()
        .ok_or_else(|| Error::InvalidInput("k-means needs at least one feature map".into()))?;
    let depth = first.depth();
    if depth == 0 {
        return Err(Error::InvalidInput("features have zero depth".into()));
    }
    if let Some(f) = features.iter().find(|f| f.depth() != depth) {
        return Err(Error::DimensionMismatch(format!(
            "feature depths differ: {depth} and {}",
            f.depth()
        )));
    }
    if cfg.k == 0 || cfg.sample_stride == 0 {
        return Err(Error::InvalidInput("k and sample_stride must be at least 1".into()));
    }
    let total: usize = features.iter().map(|f| f.pixel_count()).sum();
    let sample: Vec<f64> = features
        .iter()
        .flat_map(|f| f.pixels())
        .step_by(cfg.sample_stride)
        .flatten()
        .map(|&v| v as f64)
        .collect();
    let sample_len = sample.len() / depth;
    if total < cfg.k || sample_len < cfg.k {
        return Err(Error::InvalidInput(format!(
            "k = {} exceeds the {} pixels available for fitting",
            cfg.k,
            sample_len.min(total)
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let k = cfg.k;
    let mut centers = plus_plus_init(&sample, depth, k, &mut rng);
    let mut history = Vec::new();

    for _ in 0..cfg.max_iters {
        let assigned = assign_all(&sample, &centers, depth);
        history.push(assigned.iter().map(|a| a.1).sum::<f64>());

        let mut sums = vec![0.0f64; k * depth];
        let mut counts = vec![0usize; k];
        for (p, &(c, _)) in sample.chunks_exact(depth).zip(&assigned) {
            let c = c as usize;
            counts[c] += 1;
            for (s, v) in sums[c * depth..(c + 1) * depth].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut next = sums;
        for c in 0..k {
            if counts[c] > 0 {
                let n = counts[c] as f64;
                next[c * depth..(c + 1) * depth].iter_mut().for_each(|s| *s /= n);
            }
        }
        // empty clusters move onto the currently worst-served points
        let mut residual: Vec<f64> = assigned.iter().map(|a| a.1).collect();
        for c in (0..k).filter(|&c| counts[c] == 0) {
            let far = residual
                .iter()
                .enumerate()
                .fold(0, |b, (i, &d)| if d > residual[b] { i } else { b });
            next[c * depth..(c + 1) * depth].copy_from_slice(&sample[far * depth..(far + 1) * depth]);
            residual[far] = -1.0;
        }
        let shift = centers
            .chunks_exact(depth)
            .zip(next.chunks_exact(depth))
            .map(|(a, b)| sq_dist(a, b))
            .fold(0.0f64, f64::max)
            .sqrt();
        centers = next;
        if shift < cfg.tol {
            break;
        }
    }
    history.push(assign_all(&sample, &centers, depth).iter().map(|a| a.1).sum());

    let mut assignments = Vec::with_capacity(features.len());
    let mut distances = Vec::with_capacity(features.len());
    let mut members: Vec<Vec<f64>> = vec![Vec::new(); k];
    for f in features {
        let points: Vec<f64> = f.data().iter().map(|&v| v as f64).collect();
        let (labels, dist): (Vec<u32>, Vec<f64>) = assign_all(&points, &centers, depth)
            .into_iter()
            .map(|(c, d2)| (c, d2.sqrt()))
            .unzip();
        for (&c, &d) in labels.iter().zip(&dist) {
            members[c as usize].push(d);
        }
        assignments.push(labels);
        distances.push(dist);
    }
    let sizes = members.iter().map(Vec::len).collect();
    let medians = members.iter_mut().map(|m| median(m)).collect();

    Ok(ClusterModel {
        scope,
        depth,
        centers,
        medians,
        sizes,
        assignments,
        distances,
        objective_history: history,
    })
}

/// Fits a model for `scope` over the scene's feature maps.
pub fn fit_scope(features: &[FeatureMap], scope: Scope, cfg: &KMeansConfig) -> Result<ClusterModel> {
    match scope {
        Scope::Single(r) => {
            let f = features.get(r).ok_or_else(|| {
                Error::InvalidInput(format!("image {r} out of range for {} images", features.len()))
            })?;
            kmeans_fit(&[f], scope, cfg)
        }
        Scope::Multi => kmeans_fit(&features.iter().collect::<Vec<_>>(), scope, cfg),
    }
}

/// Median of `values` (mean of the two middle values for even counts);
/// 0 when empty. Reorders `values`.
fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

fn member_weight(distance: f64, median: f64, beta: f64) -> f64 {
    if median > 0.0 {
        (-beta * distance * distance / (median * median)).exp()
    } else {
        1.0
    }
}

/// Appearance distribution of one cluster: the mean of the members'
/// geometric distributions, weighted by `exp(-β d² / M²)`. With `M = 0`
/// every member weighs 1.
pub fn cluster_pdf(members: &[DiscretePdf], distances: &[f64], median: f64, beta: f64) -> Result<DiscretePdf> {
    if members.is_empty() {
        return Err(Error::InvalidInput("cluster has no members".into()));
    }
    if members.len() != distances.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} members but {} distances",
            members.len(),
            distances.len()
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) || !(median >= 0.0) {
        return Err(Error::InvalidInput(format!("beta {beta} and median {median} must be >= 0")));
    }
    let bins = members[0].bins();
    let mut acc = vec![0.0f64; bins];
    let mut total = 0.0;
    for (h, &d) in members.iter().zip(distances) {
        if h.bins() != bins {
            return Err(Error::DimensionMismatch("member pdfs have differing bin counts".into()));
        }
        let w = member_weight(d, median, beta);
        total += w;
        for (a, p) in acc.iter_mut().zip(h.probs()) {
            *a += w * p;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    DiscretePdf::new(acc)
}

/// Appearance distributions of a fitted model, one per non-empty cluster,
/// plus the cluster index of each pixel of the images in scope.
#[derive(Debug, Clone, PartialEq)]
pub struct AppearancePdfs {
    scope: Scope,
    clusters: Vec<Option<DiscretePdf>>,
    assignments: Vec<Vec<u32>>,
}

impl AppearancePdfs {
    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn cluster(&self, k: usize) -> Option<&DiscretePdf> {
        self.clusters[k].as_ref()
    }

    pub fn clusters(&self) -> &[Option<DiscretePdf>] {
        &self.clusters
    }

    /// Number of images covered.
    pub fn image_count(&self) -> usize {
        self.assignments.len()
    }

    /// `h^A` of `pixel` in the `i`-th covered image.
    pub fn pixel(&self, i: usize, pixel: usize) -> &DiscretePdf {
        self.clusters[self.assignments[i][pixel] as usize]
            .as_ref()
            .expect("assigned clusters are non-empty")
    }
}

/// Per-cluster appearance distributions from each pixel's geometric label.
/// `geometric` holds one label field per scene image; only the images in
/// `scope` are read.
pub fn pdfs_for_scope(
    model: &ClusterModel,
    scope: Scope,
    geometric: &[LabelField],
    beta: f64,
) -> Result<AppearancePdfs> {
    if model.scope != scope {
        return Err(Error::InvalidInput(format!(
            "model fitted for {:?} queried for {scope:?}",
            model.scope
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("beta {beta} must be finite and >= 0")));
    }
    let fields: Vec<&LabelField> = match scope {
        Scope::Single(r) => vec![geometric.get(r).ok_or_else(|| {
            Error::InvalidInput(format!("image {r} out of range for {} label fields", geometric.len()))
        })?],
        Scope::Multi => geometric.iter().collect(),
    };
    if fields.len() != model.image_count() {
        return Err(Error::DimensionMismatch(format!(
            "model covers {} images, got {} label fields",
            model.image_count(),
            fields.len()
        )));
    }
    let bins = fields[0].bins();
    let k = model.k();
    let mut acc = vec![0.0f64; k * bins];
    let mut total = vec![0.0f64; k];
    for (i, field) in fields.iter().enumerate() {
        if field.bins() != bins || field.data().len() != model.assignments[i].len() {
            return Err(Error::DimensionMismatch(format!(
                "label field {i} does not match the clustered image"
            )));
        }
        for ((&c, &d), &m) in model.assignments[i]
            .iter()
            .zip(&model.distances[i])
            .zip(field.data())
        {
            let c = c as usize;
            let w = member_weight(d, model.medians[c], beta);
            acc[c * bins + m as usize - 1] += w;
            total[c] += w;
        }
    }
    let clusters = (0..k)
        .map(|c| {
            (model.sizes[c] > 0).then(|| {
                let p = acc[c * bins..(c + 1) * bins].iter().map(|a| a / total[c]).collect();
                DiscretePdf::from_raw(p)
            })
        })
        .collect();
    Ok(AppearancePdfs {
        scope,
        clusters,
        assignments: model.assignments.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn points(rows: &[&[f32]]) -> FeatureMap {
        let d = rows[0].len();
        FeatureMap::new(1, rows.len(), d, rows.concat()).unwrap()
    }

    fn cfg(k: usize) -> KMeansConfig {
        KMeansConfig {
            k,
            ..KMeansConfig::default()
        }
    }

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let f = points(&[&[0.0, 1.0], &[2.0, 3.0], &[4.0, 8.0], &[6.0, 0.0]]);
        let m = kmeans_fit(&[&f], Scope::Single(0), &cfg(1)).unwrap();
        assert_eq!(m.center(0), &[3.0, 3.0]);
        assert!(m.assignment(0).iter().all(|&c| c == 0));
    }

    #[test]
    fn one_cluster_per_point_has_zero_objective() {
        let f = points(&[&[0.0], &[1.0], &[5.0], &[9.0], &[2.5]]);
        let m = kmeans_fit(&[&f], Scope::Multi, &cfg(5)).unwrap();
        assert_eq!(*m.objective_history().last().unwrap(), 0.0);
        assert!(m.distances(0).iter().all(|&d| d == 0.0));
    }

    #[test]
    fn two_blobs_are_separated() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sigma = 0.5;
        let n = 200;
        let mut data = Vec::new();
        for (cx, cy) in [(0.0, 0.0), (50.0, 20.0)] {
            for _ in 0..n {
                data.push((cx + sigma * gaussian(&mut rng)) as f32);
                data.push((cy + sigma * gaussian(&mut rng)) as f32);
            }
        }
        let oracle = |blob: usize| {
            let pts = &data[blob * 2 * n..(blob + 1) * 2 * n];
            let mx: f64 = pts.iter().step_by(2).map(|&v| v as f64).sum::<f64>() / n as f64;
            let my: f64 = pts.iter().skip(1).step_by(2).map(|&v| v as f64).sum::<f64>() / n as f64;
            [mx, my]
        };
        let f = FeatureMap::new(1, 2 * n, 2, data.clone()).unwrap();
        let m = kmeans_fit(&[&f], Scope::Multi, &cfg(2)).unwrap();
        let bound = 3.0 * sigma / (n as f64).sqrt();
        for blob in 0..2 {
            let target = oracle(blob);
            let c = m.center(m.assignment(0)[blob * n] as usize);
            assert!((c[0] - target[0]).abs() < bound && (c[1] - target[1]).abs() < bound);
        }
    }

    #[test]
    fn fit_is_deterministic_and_stride_assigns_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f32> = (0..6 * 7 * 3).map(|_| rng.random()).collect();
        let f = FeatureMap::new(6, 7, 3, data).unwrap();
        let c = KMeansConfig {
            k: 5,
            sample_stride: 3,
            ..KMeansConfig::default()
        };
        let a = kmeans_fit(&[&f, &f], Scope::Multi, &c).unwrap();
        let b = kmeans_fit(&[&f, &f], Scope::Multi, &c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.assignment(1).len(), 42);
        assert_eq!((0..5).map(|k| a.cluster_size(k)).sum::<usize>(), 84);
    }

    #[test]
    fn rejects_bad_fits() {
        let f = points(&[&[0.0], &[1.0]]);
        assert!(kmeans_fit(&[&f], Scope::Multi, &cfg(3)).is_err());
        assert!(kmeans_fit(&[], Scope::Multi, &cfg(1)).is_err());
        let empty = FeatureMap::new(1, 2, 0, vec![]).unwrap();
        assert!(kmeans_fit(&[&empty], Scope::Multi, &cfg(1)).is_err());
        let other = FeatureMap::new(1, 1, 2, vec![0.0, 0.0]).unwrap();
        assert!(kmeans_fit(&[&f, &other], Scope::Multi, &cfg(1)).is_err());
    }

    #[test]
    fn identical_points_use_uniform_init_fallback() {
        let f = points(&[&[1.0f32, 1.0][..]; 6]);
        let m = kmeans_fit(&[&f], Scope::Multi, &cfg(3)).unwrap();
        assert!((0..3).all(|k| m.median(k) == 0.0));
        assert_eq!(*m.objective_history().last().unwrap(), 0.0);
    }

    #[test]
    fn median_convention() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&mut []), 0.0);
    }

    #[test]
    fn cluster_pdf_examples() {
        let d = |m| DiscretePdf::delta(6, m).unwrap();
        assert_eq!(cluster_pdf(&[d(4)], &[0.7], 0.3, 0.3).unwrap(), d(4));
        let sym = cluster_pdf(&[d(3), d(5)], &[1.0, 1.0], 2.0, 0.3).unwrap();
        assert_eq!(sym.prob(3), 0.5);
        assert_eq!(sym.prob(5), 0.5);

        let m = 1.7;
        let h = cluster_pdf(&[d(1), d(2)], &[0.0, m], m, 0.3).unwrap();
        let w = (-0.3f64).exp();
        assert!((h.prob(1) - 1.0 / (1.0 + w)).abs() < 1e-12);
        assert!((h.prob(1) - 0.57444).abs() < 1e-5);
        assert!((h.prob(2) - 0.42556).abs() < 1e-5);

        let flat = cluster_pdf(&[d(1), d(2)], &[0.0, 5.0], 0.0, 0.3).unwrap();
        assert_eq!(flat.prob(1), 0.5);
        assert!(cluster_pdf(&[], &[], 1.0, 0.3).is_err());
    }

    #[test]
    fn fast_path_matches_cluster_pdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let bins = 7;
        let feats: Vec<FeatureMap> = (0..3)
            .map(|_| FeatureMap::new(5, 6, 2, (0..60).map(|_| rng.random()).collect()).unwrap())
            .collect();
        let labels: Vec<LabelField> = (0..3)
            .map(|_| LabelField::new(5, 6, bins, (0..30).map(|_| rng.random_range(1..=bins as u32)).collect()).unwrap())
            .collect();
        let model = fit_scope(&feats, Scope::Multi, &cfg(6)).unwrap();
        let fast = pdfs_for_scope(&model, Scope::Multi, &labels, DEFAULT_BETA).unwrap();
        for k in 0..6 {
            let mut hs = Vec::new();
            let mut ds = Vec::new();
            for i in 0..3 {
                for p in 0..30 {
                    if model.assignment(i)[p] as usize == k {
                        hs.push(DiscretePdf::delta(bins, labels[i].data()[p]).unwrap());
                        ds.push(model.distances(i)[p]);
                    }
                }
            }
            match fast.cluster(k) {
                Some(h) => {
                    let slow = cluster_pdf(&hs, &ds, model.median(k), DEFAULT_BETA).unwrap();
                    for m in 1..=bins as u32 {
                        assert!((h.prob(m) - slow.prob(m)).abs() < 1e-12);
                    }
                }
                None => assert!(hs.is_empty()),
            }
        }
    }

    #[test]
    fn one_image_scopes_coincide() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = FeatureMap::new(4, 4, 3, (0..48).map(|_| rng.random()).collect()).unwrap();
        let labels = vec![LabelField::new(4, 4, 5, (0..16).map(|_| rng.random_range(1..=5)).collect()).unwrap()];
        let feats = [f];
        let single = fit_scope(&feats, Scope::Single(0), &cfg(3)).unwrap();
        let multi = fit_scope(&feats, Scope::Multi, &cfg(3)).unwrap();
        let a = pdfs_for_scope(&single, Scope::Single(0), &labels, 0.3).unwrap();
        let b = pdfs_for_scope(&multi, Scope::Multi, &labels, 0.3).unwrap();
        for p in 0..16 {
            assert_eq!(a.pixel(0, p), b.pixel(0, p));
        }
        assert!(pdfs_for_scope(&single, Scope::Multi, &labels, 0.3).is_err());
    }

    #[test]
    fn disjoint_images_give_matching_scopes() {
        // image 0 lives near 0, image 1 near 10; no cluster can span both
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let feats: Vec<FeatureMap> = [0.0f32, 10.0]
            .iter()
            .map(|&o| FeatureMap::new(3, 3, 1, (0..9).map(|i| o + (i % 3) as f32 + 0.01 * rng.random::<f32>()).collect()).unwrap())
            .collect();
        let labels: Vec<LabelField> = (0..2)
            .map(|_| LabelField::new(3, 3, 4, (0..9).map(|_| rng.random_range(1..=4)).collect()).unwrap())
            .collect();
        let multi = fit_scope(&feats, Scope::Multi, &cfg(6)).unwrap();
        let m = pdfs_for_scope(&multi, Scope::Multi, &labels, 0.3).unwrap();
        for r in 0..2 {
            let single = fit_scope(&feats, Scope::Single(r), &cfg(3)).unwrap();
            let s = pdfs_for_scope(&single, Scope::Single(r), &labels, 0.3).unwrap();
            for p in 0..9 {
                for bin in 1..=4 {
                    assert!((s.pixel(0, p).prob(bin) - m.pixel(r, p).prob(bin)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn shared_background_blends_both_images() {
        // one flat cluster shared by two images with labels 2 and 5
        let feats = vec![
            FeatureMap::new(1, 4, 1, vec![0.0; 4]).unwrap(),
            FeatureMap::new(1, 2, 1, vec![0.0; 2]).unwrap(),
        ];
        let labels = vec![
            LabelField::uniform(1, 4, 6, 2).unwrap(),
            LabelField::uniform(1, 2, 6, 5).unwrap(),
        ];
        let model = fit_scope(&feats, Scope::Multi, &cfg(1)).unwrap();
        let h = pdfs_for_scope(&model, Scope::Multi, &labels, 0.3).unwrap();
        let bg = h.pixel(1, 0);
        assert!((bg.prob(2) - 4.0 / 6.0).abs() < 1e-12);
        assert!((bg.prob(5) - 2.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn dump_writes_centers_and_medians() {
        let dir = tempfile::tempdir().unwrap();
        let f = points(&[&[0.0, 1.0], &[2.0, 3.0], &[10.0, 10.0]]);
        let m = kmeans_fit(&[&f], Scope::Multi, &cfg(2)).unwrap();
        m.dump(dir.path().join("c.fmap"), dir.path().join("m.txt")).unwrap();
        let t = crate::grids::read_tensor(dir.path().join("c.fmap")).unwrap().into_features();
        assert_eq!((t.height(), t.width(), t.depth()), (2, 1, 2));
        let text = std::fs::read_to_string(dir.path().join("m.txt")).unwrap();
        assert_eq!(text.lines().count(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn lloyd_invariants(seed in 0u64..1000, k in 1usize..6, beta in 0.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = FeatureMap::new(4, 5, 3, (0..60).map(|_| rng.random_range(0..4) as f32).collect()).unwrap();
            let model = kmeans_fit(&[&f], Scope::Single(0), &KMeansConfig { k, seed, ..KMeansConfig::default() }).unwrap();
            let hist = model.objective_history();
            for w in hist.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12);
            }
            for (p, &c) in model.assignment(0).iter().enumerate() {
                let point: Vec<f64> = f.pixel(p).iter().map(|&v| v as f64).collect();
                let own = sq_dist(&point, model.center(c as usize));
                for j in 0..k {
                    let other = sq_dist(&point, model.center(j));
                    if j < c as usize {
                        prop_assert!(own < other);
                    } else {
                        prop_assert!(own <= other);
                    }
                }
            }
            for c in 0..k {
                prop_assert!(model.median(c) >= 0.0);
            }
            let labels = vec![LabelField::new(4, 5, 6, (0..20).map(|_| rng.random_range(1..=6)).collect()).unwrap()];
            let pdfs = pdfs_for_scope(&model, Scope::Single(0), &labels, beta).unwrap();
            for h in pdfs.clusters().iter().flatten() {
                prop_assert!(h.validate().is_ok());
            }
        }

        #[test]
        fn zero_beta_is_plain_mean(labels in proptest::collection::vec(1u32..=4, 1..12),
                                   dists in proptest::collection::vec(0.0f64..5.0, 12)) {
            let hs: Vec<DiscretePdf> = labels.iter().map(|&m| DiscretePdf::delta(4, m).unwrap()).collect();
            let h = cluster_pdf(&hs, &dists[..hs.len()], 1.3, 0.0).unwrap();
            for m in 1..=4u32 {
                let expected = labels.iter().filter(|&&l| l == m).count() as f64 / labels.len() as f64;
                prop_assert!((h.prob(m) - expected).abs() < 1e-12);
            }
        }
    }
}
