use crate::error::{Error, Result};

/// A `height × width` grid of real values stored row-major.
///
/// Used for score maps (values in `[0, 1]`), grayscale images, gradient
/// magnitudes and single image channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl ScalarMap {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        check_len(height, width, 1, data.len())?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, value: f32) {
        self.data[y * self.width + x] = value;
    }

    /// Checks the score-map invariant: every value finite and in `[0, 1]`.
    pub fn validate_scores(&self) -> Result<()> {
        match self
            .data
            .iter()
            .position(|v| !(0.0..=1.0).contains(v))
        {
            None => Ok(()),
            Some(i) => Err(Error::InvalidInput(format!(
                "score map value {} at pixel ({}, {}) is outside [0, 1]",
                self.data[i],
                i / self.width,
                i % self.width
            ))),
        }
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.width, self.height, |y, x| self.get(x, y))
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}

/// A `height × width × depth` grid of per-pixel feature vectors, row-major
/// with the channels of each pixel stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    depth: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, depth: usize, data: Vec<f32>) -> Result<Self> {
        check_len(height, width, depth, data.len())?;
        Ok(Self {
            height,
            width,
            depth,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Feature vector of pixel `index` (row-major pixel index).
    #[inline]
    pub fn pixel(&self, index: usize) -> &[f32] {
        &self.data[index * self.depth..(index + 1) * self.depth]
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> &[f32] {
        self.pixel(y * self.width + x)
    }

    pub fn pixels(&self) -> impl ExactSizeIterator<Item = &[f32]> + '_ {
        self.data.chunks_exact(self.depth.max(1))
    }
}

impl From<ScalarMap> for FeatureMap {
    fn from(map: ScalarMap) -> Self {
        FeatureMap {
            height: map.height,
            width: map.width,
            depth: 1,
            data: map.data,
        }
    }
}

/// Ground-truth / predicted class of a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MaskClass {
    Static,
    Dynamic,
    /// Excluded from both intersection and union during evaluation.
    DontCare,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    data: Vec<MaskClass>,
}

impl Mask {
    pub fn new(height: usize, width: usize, data: Vec<MaskClass>) -> Result<Self> {
        check_len(height, width, 1, data.len())?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, class: MaskClass) -> Self {
        Self {
            height,
            width,
            data: vec![class; height * width],
        }
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

    pub fn data(&self) -> &[MaskClass] {
        &self.data
    }

    pub fn get(&self, y: usize, x: usize) -> MaskClass {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, y: usize, x: usize, class: MaskClass) {
        self.data[y * self.width + x] = class;
    }

    pub fn count(&self, class: MaskClass) -> usize {
        self.data.iter().filter(|&&c| c == class).count()
    }
}

/// Per-pixel MRF labels, 1-based: every entry lies in `1..=bins`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelField {
    height: usize,
    width: usize,
    bins: usize,
    data: Vec<u32>,
}

impl LabelField {
    pub fn new(height: usize, width: usize, bins: usize, data: Vec<u32>) -> Result<Self> {
        check_len(height, width, 1, data.len())?;
        if let Some(bad) = data.iter().find(|&&m| m == 0 || m as usize > bins) {
            return Err(Error::InvalidInput(format!(
                "label {bad} outside 1..={bins}"
            )));
        }
        Ok(Self {
            height,
            width,
            bins,
            data,
        })
    }

    pub fn uniform(height: usize, width: usize, bins: usize, label: u32) -> Result<Self> {
        Self::new(height, width, bins, vec![label; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [u32] {
        &mut self.data
    }

    pub fn get(&self, y: usize, x: usize) -> u32 {
        self.data[y * self.width + x]
    }
}

/// Three-channel image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    pub r: ScalarMap,
    pub g: ScalarMap,
    pub b: ScalarMap,
}

impl RgbImage {
    pub fn new(r: ScalarMap, g: ScalarMap, b: ScalarMap) -> Result<Self> {
        if r.dims() != g.dims() || r.dims() != b.dims() {
            return Err(Error::DimensionMismatch(format!(
                "rgb channels {:?} {:?} {:?}",
                r.dims(),
                g.dims(),
                b.dims()
            )));
        }
        Ok(Self { r, g, b })
    }

    pub fn from_gray(gray: ScalarMap) -> Self {
        Self {
            r: gray.clone(),
            g: gray.clone(),
            b: gray,
        }
    }

    pub fn height(&self) -> usize {
        self.r.height()
    }

    pub fn width(&self) -> usize {
        self.r.width()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.r.dims()
    }
}

fn check_len(height: usize, width: usize, depth: usize, len: usize) -> Result<()> {
    let expected = height
        .checked_mul(width)
        .and_then(|n| n.checked_mul(depth))
        .ok_or_else(|| Error::InvalidInput(format!("{height}x{width}x{depth} overflows")))?;
    if expected != len {
        return Err(Error::DimensionMismatch(format!(
            "{height}x{width}x{depth} grid needs {expected} values, got {len}"
        )));
    }
    Ok(())
}
