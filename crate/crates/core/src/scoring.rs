//! Per-pixel label distributions over the discretized score space.
//!
//! Scores in `[0, 1]` are mapped onto `b` labels `1..=b`. Label `m` covers the
//! score interval `((m-1)/b, m/b]`, with a score of exactly 0 clamped into
//! label 1.

use crate::error::{Error, Result};

/// Default number of score labels.
pub const DEFAULT_BINS: usize = 30;
/// Default mixture weight of the geometric distribution.
pub const DEFAULT_ALPHA: f64 = 0.2;
/// Floor applied to probabilities before taking the log in the unary term.
pub const DEFAULT_EPS_LOG: f64 = 1e-8;

const SUM_TOLERANCE: f64 = 1e-9;

/// A probability vector over `b` score labels. Index 0 holds label 1.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePdf {
    p: Vec<f64>,
}

impl DiscretePdf {
    /// Validates non-negativity and unit mass (± 1e-9).
    pub fn new(p: Vec<f64>) -> Result<Self> {
        let pdf = Self { p };
        pdf.validate()?;
        Ok(pdf)
    }

    /// Unit mass at `label` (1-based).
    pub fn delta(bins: usize, label: u32) -> Result<Self> {
        check_label(label, bins)?;
        let mut p = vec![0.0; bins];
        p[label as usize - 1] = 1.0;
        Ok(Self { p })
    }

    pub fn uniform(bins: usize) -> Self {
        Self {
            p: vec![1.0 / bins as f64; bins],
        }
    }

    /// Wraps a vector that the caller guarantees is a valid PDF.
    pub(crate) fn from_raw(p: Vec<f64>) -> Self {
        debug_assert!(Self { p: p.clone() }.validate().is_ok());
        Self { p }
    }

    pub fn bins(&self) -> usize {
        self.p.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.p
    }

    /// Probability of `label` (1-based).
    pub fn prob(&self, label: u32) -> f64 {
        self.p[label as usize - 1]
    }

    pub fn sum(&self) -> f64 {
        self.p.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.is_empty() {
            return Err(Error::InvalidInput("pdf has no bins".into()));
        }
        if let Some(v) = self.p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidInput(format!("pdf entry {v} is negative or not finite")));
        }
        let s = self.sum();
        if (s - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!("pdf sums to {s}, not 1")));
        }
        Ok(())
    }

    /// Label with the largest probability; ties go to the lowest label.
    pub fn argmax(&self) -> u32 {
        let mut best = 0;
        for (i, &v) in self.p.iter().enumerate().skip(1) {
            if v > self.p[best] {
                best = i;
            }
        }
        best as u32 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixParams {
    pub alpha: f64,
    pub bins: usize,
    pub eps_log: f64,
}

impl Default for MixParams {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            bins: DEFAULT_BINS,
            eps_log: DEFAULT_EPS_LOG,
        }
    }
}

impl MixParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidInput(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if self.bins < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 bins, got {}", self.bins)));
        }
        if !(self.eps_log > 0.0) {
            return Err(Error::InvalidInput(format!("eps_log must be positive, got {}", self.eps_log)));
        }
        Ok(())
    }
}

fn check_label(label: u32, bins: usize) -> Result<()> {
    if label == 0 || label as usize > bins {
        return Err(Error::InvalidInput(format!("label {label} outside 1..={bins}")));
    }
    Ok(())
}

/// Label of a score: `ceil(s·b)`, clamped to `[1, b]`.
pub fn score_to_label(score: f64, bins: usize) -> Result<u32> {
    if !(0.0..=1.0).contains(&score) {
        return Err(Error::InvalidInput(format!("score {score} outside [0, 1]")));
    }
    if bins < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 bins, got {bins}")));
    }
    Ok(((score * bins as f64).ceil() as usize).clamp(1, bins) as u32)
}

/// Geometric distribution of a pixel: a delta at its discretized score.
pub fn discretize(score: f64, bins: usize) -> Result<DiscretePdf> {
    DiscretePdf::delta(bins, score_to_label(score, bins)?)
}

/// `alpha·hg + (1 - alpha)·ha`.
pub fn mix(hg: &DiscretePdf, ha: &DiscretePdf, alpha: f64) -> Result<DiscretePdf> {
    if hg.bins() != ha.bins() {
        return Err(Error::DimensionMismatch(format!(
            "mixing pdfs with {} and {} bins",
            hg.bins(),
            ha.bins()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(DiscretePdf {
        p: hg
            .p
            .iter()
            .zip(&ha.p)
            .map(|(g, a)| alpha * g + (1.0 - alpha) * a)
            .collect(),
    })
}

/// Mixture where the geometric part is a delta at `label`; avoids
/// materializing the delta.
pub fn mix_delta(label: u32, ha: &DiscretePdf, alpha: f64) -> DiscretePdf {
    let mut p: Vec<f64> = ha.p.iter().map(|a| (1.0 - alpha) * a).collect();
    p[label as usize - 1] += alpha;
    DiscretePdf { p }
}

/// Unary cost of assigning `label`: `-ln(max(h(label), eps_log))`.
pub fn unary(h: &DiscretePdf, label: u32, eps_log: f64) -> f64 {
    -h.prob(label).max(eps_log).ln()
}

/// Bin midpoint `(m - 0.5) / b`.
pub fn label_to_score(label: u32, bins: usize) -> Result<f64> {
    check_label(label, bins)?;
    Ok((label as f64 - 0.5) / bins as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn discretize_examples() {
        assert_eq!(discretize(0.5, 30).unwrap().argmax(), 15);
        assert_eq!(discretize(0.0, 30).unwrap().argmax(), 1);
        assert_eq!(discretize(1.0, 30).unwrap().argmax(), 30);
        assert!(discretize(1.01, 30).is_err());
        assert!(discretize(-0.1, 30).is_err());
        let d = discretize(0.37, 10).unwrap();
        assert_eq!(d.probs().iter().filter(|&&v| v == 1.0).count(), 1);
        assert_eq!(d.sum(), 1.0);
    }

    #[test]
    fn mix_endpoints() {
        let hg = DiscretePdf::delta(30, 7).unwrap();
        let ha = DiscretePdf::uniform(30);
        assert_eq!(mix(&hg, &ha, 1.0).unwrap(), hg);
        assert_eq!(mix(&hg, &ha, 0.0).unwrap(), ha);
    }

    #[test]
    fn mix_delta_with_uniform() {
        let hg = DiscretePdf::delta(30, 12).unwrap();
        let h = mix(&hg, &DiscretePdf::uniform(30), 0.2).unwrap();
        assert!((h.prob(12) - (0.2 + 0.8 / 30.0)).abs() < 1e-12);
        assert!((h.prob(12) - 0.22667).abs() < 1e-5);
        for m in (1..=30).filter(|&m| m != 12) {
            assert!((h.prob(m) - 0.02667).abs() < 1e-5);
        }
        assert_eq!(h, mix_delta(12, &DiscretePdf::uniform(30), 0.2));
        h.validate().unwrap();
    }

    #[test]
    fn mix_rejects_bin_mismatch() {
        assert!(mix(&DiscretePdf::uniform(3), &DiscretePdf::uniform(4), 0.5).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)] // the printed six-digit value is the check
    fn unary_examples() {
        let one = DiscretePdf::delta(4, 2).unwrap();
        assert_eq!(unary(&one, 2, 1e-8), 0.0);
        assert!((unary(&one, 1, 1e-8) - 18.420681).abs() < 1e-6);
        let half = DiscretePdf::new(vec![0.5, 0.5]).unwrap();
        assert!((unary(&half, 1, 1e-8) - 0.693147).abs() < 1e-6);
    }

    #[test]
    fn label_to_score_examples() {
        assert!((label_to_score(15, 30).unwrap() - 0.48333).abs() < 1e-5);
        assert!((label_to_score(1, 30).unwrap() - 0.016667).abs() < 1e-6);
        assert!(label_to_score(0, 30).is_err());
        assert!(label_to_score(31, 30).is_err());
    }

    #[test]
    fn uniform_argmax_is_lowest() {
        assert_eq!(DiscretePdf::uniform(5).argmax(), 1);
    }

    proptest! {
        #[test]
        fn midpoint_round_trip(bins in 2usize..200, frac in 0.0f64..1.0) {
            let m = 1 + ((frac * bins as f64) as u32).min(bins as u32 - 1);
            let s = label_to_score(m, bins).unwrap();
            prop_assert_eq!(score_to_label(s, bins).unwrap(), m);
        }

        #[test]
        fn discretize_is_monotone(a in 0.0f64..=1.0, b in 0.0f64..=1.0, bins in 2usize..64) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(score_to_label(lo, bins).unwrap() <= score_to_label(hi, bins).unwrap());
        }

        #[test]
        fn mix_is_valid_and_affine(raw_g in proptest::collection::vec(0.0f64..1.0, 6),
                                   raw_a in proptest::collection::vec(0.0f64..1.0, 6),
                                   alpha in 0.0f64..=1.0) {
            let norm = |v: Vec<f64>| {
                let s: f64 = v.iter().sum::<f64>() + 1e-3;
                DiscretePdf::new(v.iter().map(|x| (x + 1e-3 / 6.0) / s).collect()).unwrap()
            };
            let (g, a) = (norm(raw_g), norm(raw_a));
            let h = mix(&g, &a, alpha).unwrap();
            prop_assert!(h.validate().is_ok());
            for m in 1..=6u32 {
                let expected = alpha * g.prob(m) + (1.0 - alpha) * a.prob(m);
                prop_assert!((h.prob(m) - expected).abs() < 1e-15);
            }
        }

        #[test]
        fn unary_is_finite_and_decreasing(p1 in 0.0f64..=1.0, p2 in 0.0f64..=1.0) {
            let u = |p: f64| unary(&DiscretePdf { p: vec![p, 1.0 - p] }, 1, DEFAULT_EPS_LOG);
            prop_assert!(u(p1).is_finite() && u(p1) >= 0.0);
            if p1 < p2 {
                prop_assert!(u(p1) >= u(p2));
            }
        }
    }
}
