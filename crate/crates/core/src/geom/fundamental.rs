use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::matches::{Match, SparseMatches};
use crate::error::{Error, Result};

/// A rank-2 fundamental matrix with unit Frobenius norm, signed so its
/// largest-magnitude entry is positive. For a correspondence `p ↔ p'`,
/// `p'ᵀ F p = 0` and `F p` is the epipolar line in the other image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix {
    m: Matrix3<f64>,
}

impl FundamentalMatrix {
    /// Projects `m` onto rank 2 and normalizes it.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("fundamental matrix has non-finite entries".into()));
        }
        let svd = m.svd(true, true);
        let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
        let mut s = svd.singular_values;
        let smallest = s.imin();
        s[smallest] = 0.0;
        let r2 = u * Matrix3::from_diagonal(&s) * v_t;
        let norm = r2.norm();
        if !(norm > 0.0) {
            return Err(Error::Degenerate("fundamental matrix is zero".into()));
        }
        let mut f = r2 / norm;
        if f[f.iamax_full()] < 0.0 {
            f = -f;
        }
        Ok(Self { m: f })
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.m
    }

    /// Row-major entries.
    pub fn to_rows(&self) -> [[f64; 3]; 3] {
        let m = &self.m;
        [
            [m[(0, 0)], m[(0, 1)], m[(0, 2)]],
            [m[(1, 0)], m[(1, 1)], m[(1, 2)]],
            [m[(2, 0)], m[(2, 1)], m[(2, 2)]],
        ]
    }

    /// The matrix for the swapped image pair.
    pub fn transposed(&self) -> Self {
        Self::from_matrix(self.m.transpose()).expect("transpose of a valid matrix")
    }

    /// `p'ᵀ F p`.
    pub fn residual(&self, m: &Match) -> f64 {
        Vector3::new(m.xp, m.yp, 1.0).dot(&(self.m * Vector3::new(m.x, m.y, 1.0)))
    }
}

/// First-order geometric error of a correspondence, in pixels:
/// `|p'ᵀFp| / sqrt((Fp)₁² + (Fp)₂² + (Fᵀp')₁² + (Fᵀp')₂²)`.
pub fn sampson_distance(f: &FundamentalMatrix, m: &Match) -> f64 {
    let p = Vector3::new(m.x, m.y, 1.0);
    let q = Vector3::new(m.xp, m.yp, 1.0);
    let fp = f.m * p;
    let ftq = f.m.transpose() * q;
    let denom = fp.x * fp.x + fp.y * fp.y + ftq.x * ftq.x + ftq.y * ftq.y;
    let e = q.dot(&fp).abs();
    if denom > 0.0 {
        e / denom.sqrt()
    } else if e == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Similarity moving the centroid to the origin with RMS distance √2.
fn normalizing_transform(points: impl Iterator<Item = (f64, f64)> + Clone) -> Matrix3<f64> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points.clone().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (cx, cy) = (sx / n, sy / n);
    let ms: f64 = points.map(|(x, y)| (x - cx).powi(2) + (y - cy).powi(2)).sum::<f64>() / n;
    let scale = if ms > 0.0 { (2.0 / ms).sqrt() } else { 1.0 };
    Matrix3::new(scale, 0.0, -scale * cx, 0.0, scale, -scale * cy, 0.0, 0.0, 1.0)
}

/// Normalized eight-point estimate from at least 8 correspondences.
pub fn eight_point(matches: &[Match]) -> Result<FundamentalMatrix> {
    if matches.len() < 8 {
        return Err(Error::InvalidInput(format!(
            "need at least 8 matches, got {}",
            matches.len()
        )));
    }
    let t1 = normalizing_transform(matches.iter().map(|m| (m.x, m.y)));
    let t2 = normalizing_transform(matches.iter().map(|m| (m.xp, m.yp)));
    // a zero row keeps the system at least 9×9 so the full V is available
    let rows = matches.len().max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, m) in matches.iter().enumerate() {
        let p = t1 * Vector3::new(m.x, m.y, 1.0);
        let q = t2 * Vector3::new(m.xp, m.yp, 1.0);
        let row = [
            q.x * p.x,
            q.x * p.y,
            q.x,
            q.y * p.x,
            q.y * p.y,
            q.y,
            p.x,
            p.y,
            1.0,
        ];
        for (j, v) in row.into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Degenerate("SVD did not converge".into()))?;
    let k = svd.singular_values.imin();
    let fv = v_t.row(k);
    let fn_ = Matrix3::new(fv[0], fv[1], fv[2], fv[3], fv[4], fv[5], fv[6], fv[7], fv[8]);
    let rank2 = FundamentalMatrix::from_matrix(fn_)?;
    FundamentalMatrix::from_matrix(t2.transpose() * rank2.m * t1)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Maximum Sampson distance of an inlier, in pixels.
    pub inlier_threshold: f64,
    pub seed: u64,
    /// When at least this fraction of the consensus also fits one
    /// homography, only the homography inliers are reported (values above
    /// 1 disable the check).
    pub plane_fraction: f64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            iterations: 1000,
            inlier_threshold: 1.0,
            seed: 0,
            plane_fraction: 0.9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalEstimate {
    pub f: FundamentalMatrix,
    /// Indices into the input match list, ascending.
    pub inliers: Vec<usize>,
}

fn inliers_of(f: &FundamentalMatrix, matches: &[Match], order: &[usize], threshold: f64) -> Vec<usize> {
    order
        .iter()
        .copied()
        .filter(|&i| sampson_distance(f, &matches[i]) <= threshold)
        .collect()
}

/// RANSAC over minimal 8-point samples, then a refit on the consensus set.
///
/// Samples index a canonically sorted copy of the list, so the result does
/// not depend on the order of `matches`.
pub fn estimate_fundamental(matches: &SparseMatches, cfg: &RansacConfig) -> Result<FundamentalEstimate> {
    let list = matches.as_slice();
    if list.len() < 8 {
        return Err(Error::InvalidInput(format!(
            "need at least 8 matches, got {}",
            list.len()
        )));
    }
    if !(cfg.inlier_threshold >= 0.0) || cfg.iterations == 0 {
        return Err(Error::InvalidInput("RANSAC needs iterations >= 1 and a threshold >= 0".into()));
    }
    let order = matches.canonical_order();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<(FundamentalMatrix, Vec<usize>)> = None;
    let mut picked = Vec::with_capacity(8);

    for _ in 0..cfg.iterations {
        picked.clear();
        let mut idx = sample(&mut rng, order.len(), 8).into_vec();
        idx.sort_unstable();
        picked.extend(idx.iter().map(|&i| list[order[i]]));
        let Ok(f) = eight_point(&picked) else { continue };
        let inl = inliers_of(&f, list, &order, cfg.inlier_threshold);
        if best.as_ref().is_none_or(|(_, b)| inl.len() > b.len()) {
            let all = inl.len() == list.len();
            best = Some((f, inl));
            if all {
                break;
            }
        }
    }

    let (mut f, mut inliers) =
        best.ok_or_else(|| Error::Degenerate("no sample produced a fundamental matrix".into()))?;
    if inliers.len() < 8 {
        return Err(Error::Degenerate(format!(
            "consensus set has only {} matches",
            inliers.len()
        )));
    }
    let consensus: Vec<Match> = inliers.iter().map(|&i| list[i]).collect();
    if let Ok(refit) = eight_point(&consensus) {
        let refit_inliers = inliers_of(&refit, list, &order, cfg.inlier_threshold);
        if refit_inliers.len() >= inliers.len() {
            f = refit;
            inliers = refit_inliers;
        }
    }
    if let Some(on_plane) = dominant_plane(list, &inliers, cfg, &mut rng) {
        inliers = on_plane;
    }
    inliers.sort_unstable();
    Ok(FundamentalEstimate { f, inliers })
}

/// Least-squares homography `p' ~ H p` (normalized DLT, at least 4 points).
fn homography_dlt(matches: &[Match]) -> Option<Matrix3<f64>> {
    let t1 = normalizing_transform(matches.iter().map(|m| (m.x, m.y)));
    let t2 = normalizing_transform(matches.iter().map(|m| (m.xp, m.yp)));
    let rows = (2 * matches.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, m) in matches.iter().enumerate() {
        let p = t1 * Vector3::new(m.x, m.y, 1.0);
        let q = t2 * Vector3::new(m.xp, m.yp, 1.0);
        let r1 = [0.0, 0.0, 0.0, -p.x, -p.y, -1.0, q.y * p.x, q.y * p.y, q.y];
        let r2 = [p.x, p.y, 1.0, 0.0, 0.0, 0.0, -q.x * p.x, -q.x * p.y, -q.x];
        for j in 0..9 {
            a[(2 * i, j)] = r1[j];
            a[(2 * i + 1, j)] = r2[j];
        }
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let h = v_t.row(svd.singular_values.imin());
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let full = t2.try_inverse()? * hn * t1;
    full.iter().all(|v| v.is_finite()).then_some(full)
}

fn transfer_error(h: &Matrix3<f64>, m: &Match) -> f64 {
    let q = h * Vector3::new(m.x, m.y, 1.0);
    if q.z.abs() < 1e-12 {
        return f64::INFINITY;
    }
    (q.x / q.z - m.xp).hypot(q.y / q.z - m.yp)
}

/// Correspondences on a plane leave the epipole undetermined, so any
/// off-plane matches a consensus picks up are indistinguishable from
/// chance. Returns the homography inliers when they dominate `consensus`.
fn dominant_plane(
    list: &[Match],
    consensus: &[usize],
    cfg: &RansacConfig,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<usize>> {
    if cfg.plane_fraction > 1.0 || consensus.len() < 8 {
        return None;
    }
    let needed = (cfg.plane_fraction * consensus.len() as f64).ceil() as usize;
    let mut best: Vec<usize> = Vec::new();
    for _ in 0..cfg.iterations.min(500) {
        let mut idx = sample(rng, consensus.len(), 4).into_vec();
        idx.sort_unstable();
        let four: Vec<Match> = idx.iter().map(|&i| list[consensus[i]]).collect();
        let Some(h) = homography_dlt(&four) else { continue };
        let fit: Vec<usize> = consensus
            .iter()
            .copied()
            .filter(|&i| transfer_error(&h, &list[i]) <= cfg.inlier_threshold)
            .collect();
        if fit.len() > best.len() {
            best = fit;
        }
    }
    (best.len() >= needed.max(8) && best.len() < consensus.len()).then_some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3x4, Rotation3, Vector4};
    use rand::Rng;

    fn skew(t: Vector3<f64>) -> Matrix3<f64> {
        Matrix3::new(0.0, -t.z, t.y, t.z, 0.0, -t.x, -t.y, t.x, 0.0)
    }

    struct Rig {
        k: Matrix3<f64>,
        r: Matrix3<f64>,
        t: Vector3<f64>,
    }

    impl Rig {
        fn new() -> Self {
            Self {
                k: Matrix3::new(500.0, 0.0, 320.0, 0.0, 500.0, 240.0, 0.0, 0.0, 1.0),
                r: *Rotation3::from_euler_angles(0.05, -0.2, 0.03).matrix(),
                t: Vector3::new(1.0, 0.1, 0.2),
            }
        }

        /// `K⁻ᵀ [t]ₓ R K⁻¹`, from the camera pair.
        fn truth(&self) -> FundamentalMatrix {
            let ki = self.k.try_inverse().unwrap();
            FundamentalMatrix::from_matrix(ki.transpose() * skew(self.t) * self.r * ki).unwrap()
        }

        fn project(&self, x: Vector3<f64>) -> Match {
            let mut p1 = Matrix3x4::zeros();
            p1.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.k);
            let mut rt = Matrix3x4::zeros();
            rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.r);
            rt.set_column(3, &self.t);
            let p2 = self.k * rt;
            let h = Vector4::new(x.x, x.y, x.z, 1.0);
            let (a, b) = (p1 * h, p2 * h);
            Match::new(a.x / a.z, a.y / a.z, b.x / b.z, b.y / b.z)
        }
    }

    fn close_up_to_sign(a: &FundamentalMatrix, b: &FundamentalMatrix, tol: f64) -> bool {
        (a.m - b.m).norm() < tol || (a.m + b.m).norm() < tol
    }

    #[test]
    fn recovers_known_camera_pair() {
        let rig = Rig::new();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let matches: Vec<Match> = (0..40)
            .map(|_| {
                rig.project(Vector3::new(
                    rng.random_range(-2.0..2.0),
                    rng.random_range(-1.5..1.5),
                    rng.random_range(4.0..9.0),
                ))
            })
            .collect();
        let est = estimate_fundamental(&SparseMatches::new(matches.clone()), &RansacConfig::default()).unwrap();
        for m in &matches {
            assert!(sampson_distance(&est.f, m) < 1e-6);
        }
        assert_eq!(est.inliers.len(), 40);
        assert!(close_up_to_sign(&est.f, &rig.truth(), 1e-6));
        assert!((est.f.matrix().norm() - 1.0).abs() < 1e-12);
        assert!(est.f.matrix().determinant().abs() < 1e-12);
    }

    #[test]
    fn planar_scene_rejects_outliers() {
        let rig = Rig::new();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut matches = Vec::new();
        let mut outlier = Vec::new();
        for _ in 0..70 {
            // plane z = 6 + 0.3 x
            let x = rng.random_range(-2.0..2.0);
            matches.push(rig.project(Vector3::new(x, rng.random_range(-1.5..1.5), 6.0 + 0.3 * x)));
            outlier.push(false);
        }
        for _ in 0..30 {
            matches.push(Match::new(
                rng.random_range(0.0..640.0),
                rng.random_range(0.0..480.0),
                rng.random_range(0.0..640.0),
                rng.random_range(0.0..480.0),
            ));
            outlier.push(true);
        }
        let est = estimate_fundamental(&SparseMatches::new(matches), &RansacConfig::default()).unwrap();
        let kept_outliers = est.inliers.iter().filter(|&&i| outlier[i]).count();
        assert!(kept_outliers <= 3, "{kept_outliers} outliers kept");
        assert!(est.inliers.iter().filter(|&&i| !outlier[i]).count() >= 60);
    }

    #[test]
    fn deterministic_and_order_invariant() {
        let rig = Rig::new();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut matches: Vec<Match> = (0..30)
            .map(|_| rig.project(Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-1.0..1.0), rng.random_range(4.0..8.0))))
            .collect();
        for m in matches.iter_mut().take(8) {
            m.xp += rng.random_range(20.0..60.0);
        }
        let cfg = RansacConfig::default();
        let a = estimate_fundamental(&SparseMatches::new(matches.clone()), &cfg).unwrap();
        let b = estimate_fundamental(&SparseMatches::new(matches.clone()), &cfg).unwrap();
        assert_eq!(a, b);
        matches.reverse();
        let c = estimate_fundamental(&SparseMatches::new(matches), &cfg).unwrap();
        assert_eq!(a.f, c.f);
        let mapped: Vec<usize> = a.inliers.iter().map(|&i| 29 - i).rev().collect();
        assert_eq!(mapped, c.inliers);
    }

    #[test]
    fn too_few_matches() {
        let m = SparseMatches::new(vec![Match::new(0.0, 0.0, 1.0, 1.0); 7]);
        assert!(matches!(estimate_fundamental(&m, &RansacConfig::default()), Err(Error::InvalidInput(_))));
        assert!(eight_point(m.as_slice()).is_err());
    }

    #[test]
    fn normalization_and_rank() {
        let f = FundamentalMatrix::from_matrix(Matrix3::new(1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, -10.0)).unwrap();
        assert!((f.matrix().norm() - 1.0).abs() < 1e-12);
        assert!(f.matrix().determinant().abs() < 1e-12);
        assert!(f.matrix()[f.matrix().iamax_full()] > 0.0);
        assert!(FundamentalMatrix::from_matrix(Matrix3::zeros()).is_err());
    }
}
