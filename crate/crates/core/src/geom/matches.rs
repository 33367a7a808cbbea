use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A point correspondence `(x, y) ↔ (x', y')` in pixel coordinates, where
/// pixel `(col, row)` has its center at `(col, row)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub x: f64,
    pub y: f64,
    pub xp: f64,
    pub yp: f64,
}

impl Match {
    pub fn new(x: f64, y: f64, xp: f64, yp: f64) -> Self {
        Self { x, y, xp, yp }
    }

    pub fn swapped(&self) -> Self {
        Self::new(self.xp, self.yp, self.x, self.y)
    }

    fn key(&self) -> [f64; 4] {
        [self.x, self.y, self.xp, self.yp]
    }
}

/// Correspondences between a reference image and one other image.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseMatches {
    matches: Vec<Match>,
}

impl SparseMatches {
    pub fn new(matches: Vec<Match>) -> Self {
        Self { matches }
    }

    pub fn as_slice(&self) -> &[Match] {
        &self.matches
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// The same correspondences seen from the other image.
    pub fn swapped(&self) -> Self {
        Self::new(self.matches.iter().map(Match::swapped).collect())
    }

    /// Maps coordinates from a full-resolution image onto a grid downsampled
    /// by `factor` (block averaging keeps block centers aligned).
    pub fn rescaled(&self, factor: usize) -> Self {
        let f = factor as f64;
        let s = |v: f64| (v + 0.5) / f - 0.5;
        Self::new(
            self.matches
                .iter()
                .map(|m| Match::new(s(m.x), s(m.y), s(m.xp), s(m.yp)))
                .collect(),
        )
    }

    /// Indices ordered by `(x, y, x', y')`, independent of list order.
    pub fn canonical_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.matches.len()).collect();
        idx.sort_by(|&a, &b| {
            let (ka, kb) = (self.matches[a].key(), self.matches[b].key());
            ka.iter()
                .zip(&kb)
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        idx
    }

    /// Checks every point against the `(height, width)` of both images.
    pub fn check_bounds(&self, reference: (usize, usize), other: (usize, usize)) -> Result<()> {
        let inside = |x: f64, y: f64, (h, w): (usize, usize)| {
            x >= -0.5 && y >= -0.5 && x <= w as f64 - 0.5 && y <= h as f64 - 0.5
        };
        for (i, m) in self.matches.iter().enumerate() {
            if !inside(m.x, m.y, reference) || !inside(m.xp, m.yp, other) {
                return Err(Error::InvalidInput(format!(
                    "match {i} ({} {} {} {}) lies outside the images",
                    m.x, m.y, m.xp, m.yp
                )));
            }
        }
        Ok(())
    }

    /// Parses `x y x' y'` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut matches = Vec::new();
        let mut offset = 0u64;
        for (n, raw) in text.split_inclusive('\n').enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if !line.is_empty() {
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(str::parse::<f64>)
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| Error::format(offset, format!("line {}: {e}", n + 1)))?;
                if vals.len() != 4 || vals.iter().any(|v| !v.is_finite()) {
                    return Err(Error::format(
                        offset,
                        format!("line {}: expected four finite numbers", n + 1),
                    ));
                }
                matches.push(Match::new(vals[0], vals[1], vals[2], vals[3]));
            }
            offset += raw.len() as u64;
        }
        Ok(Self { matches })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# x y x' y'\n");
        for m in &self.matches {
            writeln!(out, "{} {} {} {}", m.x, m.y, m.xp, m.yp).expect("string write");
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
