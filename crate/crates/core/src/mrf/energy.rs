use crate::error::{Error, Result};
use crate::grids::{gradient_magnitude, LabelField, ScalarMap};
use crate::scoring::{unary, DiscretePdf};

/// Default smoothness weight.
pub const DEFAULT_LAMBDA: f64 = 450.0;
/// Floor on the gradient magnitude before inversion (caps weights at 100).
pub const DEFAULT_EPS_GRAD: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParams {
    pub lambda: f64,
    pub eps_grad: f64,
    pub eps_log: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            lambda: DEFAULT_LAMBDA,
            eps_grad: DEFAULT_EPS_GRAD,
            eps_log: crate::scoring::DEFAULT_EPS_LOG,
        }
    }
}

/// Labeling energy on a 4-connected grid:
///
/// `E(x) = Σ_j U_j(x_j) + λ Σ_j Σ_{i ∈ N(j)} w_j·[x_j ≠ x_i]`
///
/// The pairwise sum visits every neighbor pair in both orientations, so an
/// undirected edge `{p, q}` costs `λ·(w_p + w_q)` when cut.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyModel {
    height: usize,
    width: usize,
    bins: usize,
    unary: Vec<f64>,
    weights: Vec<f64>,
    lambda: f64,
}

impl EnergyModel {
    /// `unary` holds `bins` costs per pixel (row-major, label 1 first);
    /// `weights` holds the directed pairwise weight of each pixel.
    pub fn from_parts(
        height: usize,
        width: usize,
        bins: usize,
        unary: Vec<f64>,
        weights: Vec<f64>,
        lambda: f64,
    ) -> Result<Self> {
        let n = height * width;
        if n == 0 || bins == 0 {
            return Err(Error::InvalidInput("empty energy model".into()));
        }
        if unary.len() != n * bins || weights.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width} grid with {bins} labels: got {} unary and {} weight values",
                unary.len(),
                weights.len()
            )));
        }
        if let Some(u) = unary.iter().find(|u| !(u.is_finite() && **u >= 0.0)) {
            return Err(Error::InvalidInput(format!("unary cost {u} is negative or not finite")));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::InvalidInput(format!("pairwise weight {w} is negative or not finite")));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidInput(format!("lambda {lambda} must be finite and >= 0")));
        }
        Ok(Self {
            height,
            width,
            bins,
            unary,
            weights,
            lambda,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Directed weight `w_j` of pixel `j`.
    pub fn weight(&self, pixel: usize) -> f64 {
        self.weights[pixel]
    }

    #[inline]
    pub fn unary_cost(&self, pixel: usize, label: u32) -> f64 {
        self.unary[pixel * self.bins + label as usize - 1]
    }

    pub fn unary_costs(&self, pixel: usize) -> &[f64] {
        &self.unary[pixel * self.bins..(pixel + 1) * self.bins]
    }

    /// Cost of cutting the undirected edge `{p, q}`.
    #[inline]
    pub fn edge_weight(&self, p: usize, q: usize) -> f64 {
        self.lambda * (self.weights[p] + self.weights[q])
    }

    /// Right and down neighbor pairs, each undirected edge once.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let (h, w) = (self.height, self.width);
        (0..h).flat_map(move |y| {
            (0..w).flat_map(move |x| {
                let p = y * w + x;
                let right = (x + 1 < w).then_some((p, p + 1));
                let down = (y + 1 < h).then_some((p, p + w));
                right.into_iter().chain(down)
            })
        })
    }

    fn check_labels(&self, labels: &LabelField) -> Result<()> {
        if labels.dims() != self.dims() {
            return Err(Error::DimensionMismatch(format!(
                "label field {:?} vs model {:?}",
                labels.dims(),
                self.dims()
            )));
        }
        if let Some(&m) = labels
            .data()
            .iter()
            .find(|&&m| m == 0 || m as usize > self.bins)
        {
            return Err(Error::InvalidInput(format!("label {m} outside 1..={}", self.bins)));
        }
        Ok(())
    }

    /// Evaluates the energy literally: every pixel against each of its
    /// 4-neighbors.
    pub fn energy(&self, labels: &LabelField) -> Result<f64> {
        self.check_labels(labels)?;
        Ok(self.energy_unchecked(labels.data()))
    }

    pub(crate) fn energy_unchecked(&self, x: &[u32]) -> f64 {
        let (h, w) = (self.height, self.width);
        let mut unary_sum = 0.0;
        let mut pair_sum = 0.0;
        for y in 0..h {
            for c in 0..w {
                let j = y * w + c;
                unary_sum += self.unary_cost(j, x[j]);
                let mut differing = 0u32;
                if c > 0 && x[j - 1] != x[j] {
                    differing += 1;
                }
                if c + 1 < w && x[j + 1] != x[j] {
                    differing += 1;
                }
                if y > 0 && x[j - w] != x[j] {
                    differing += 1;
                }
                if y + 1 < h && x[j + w] != x[j] {
                    differing += 1;
                }
                pair_sum += differing as f64 * self.weights[j];
            }
        }
        unary_sum + self.lambda * pair_sum
    }
}

/// Builds the energy from per-pixel label distributions and a grayscale
/// image: unary `-ln max(h_j(m), eps_log)`, directed weight
/// `1 / max(|∇I_j|, eps_grad)`.
pub fn build_energy(
    pdfs: &[DiscretePdf],
    image: &ScalarMap,
    params: &EnergyParams,
) -> Result<EnergyModel> {
    let (h, w) = image.dims();
    if pdfs.len() != h * w {
        return Err(Error::DimensionMismatch(format!(
            "{} pdfs for a {h}x{w} image",
            pdfs.len()
        )));
    }
    if !(params.eps_grad > 0.0) || !(params.eps_log > 0.0) {
        return Err(Error::InvalidInput("eps_grad and eps_log must be positive".into()));
    }
    let bins = pdfs.first().map(DiscretePdf::bins).unwrap_or(0);
    if pdfs.iter().any(|p| p.bins() != bins) {
        return Err(Error::DimensionMismatch("pdfs have differing bin counts".into()));
    }
    let mut unary_table = Vec::with_capacity(h * w * bins);
    for pdf in pdfs {
        for m in 1..=bins as u32 {
            unary_table.push(unary(pdf, m, params.eps_log));
        }
    }
    let grad = gradient_magnitude(image)?;
    let weights = grad
        .data()
        .iter()
        .map(|&g| 1.0 / (g as f64).max(params.eps_grad))
        .collect();
    EnergyModel::from_parts(h, w, bins, unary_table, weights, params.lambda)
}
