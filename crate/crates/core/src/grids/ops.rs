use super::maps::{FeatureMap, RgbImage, ScalarMap};
use crate::error::{Error, Result};

pub const LUMA_WEIGHTS: [f32; 3] = [0.299, 0.587, 0.114];

pub fn to_gray(image: &RgbImage) -> ScalarMap {
    let [wr, wg, wb] = LUMA_WEIGHTS;
    let data = image
        .r
        .data()
        .iter()
        .zip(image.g.data())
        .zip(image.b.data())
        .map(|((&r, &g), &b)| wr * r + wg * g + wb * b)
        .collect();
    ScalarMap::new(image.height(), image.width(), data).expect("channel dims already checked")
}

/// Image gradient magnitude `sqrt(gx² + gy²)`.
///
/// Central differences in the interior, one-sided differences on the
/// first/last row and column. Requires `height, width >= 2`.
pub fn gradient_magnitude(image: &ScalarMap) -> Result<ScalarMap> {
    let (h, w) = image.dims();
    if h < 2 || w < 2 {
        return Err(Error::InvalidInput(format!(
            "gradient needs at least 2x2 pixels, got {h}x{w}"
        )));
    }
    let diff = |a: f32, b: f32, span: f32| (a - b) / span;
    Ok(ScalarMap::from_fn(h, w, |y, x| {
        let gx = if x == 0 {
            diff(image.get(y, 1), image.get(y, 0), 1.0)
        } else if x == w - 1 {
            diff(image.get(y, w - 1), image.get(y, w - 2), 1.0)
        } else {
            diff(image.get(y, x + 1), image.get(y, x - 1), 2.0)
        };
        let gy = if y == 0 {
            diff(image.get(1, x), image.get(0, x), 1.0)
        } else if y == h - 1 {
            diff(image.get(h - 1, x), image.get(h - 2, x), 1.0)
        } else {
            diff(image.get(y + 1, x), image.get(y - 1, x), 2.0)
        };
        (gx * gx + gy * gy).sqrt()
    }))
}

/// Mean over a `window × window` neighborhood with edge replication.
fn box_mean(map: &ScalarMap, window: usize) -> ScalarMap {
    if window == 1 {
        return map.clone();
    }
    let (h, w) = map.dims();
    let r = (window / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let norm = 1.0 / (window * window) as f64;
    ScalarMap::from_fn(h, w, |y, x| {
        let mut sum = 0.0f64;
        for dy in -r..=r {
            let yy = clamp(y as isize + dy, h);
            for dx in -r..=r {
                sum += map.get(yy, clamp(x as isize + dx, w)) as f64;
            }
        }
        (sum * norm) as f32
    })
}

/// Simple appearance features: per pixel, the window means of R, G, B and of
/// the luma gradient magnitude (depth 4). `window` must be odd.
pub fn builtin_features(image: &RgbImage, window: usize) -> Result<FeatureMap> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "feature window must be odd and >= 1, got {window}"
        )));
    }
    let (h, w) = image.dims();
    if window > h || window > w {
        return Err(Error::InvalidInput(format!(
            "feature window {window} larger than {h}x{w} image"
        )));
    }
    let grad = gradient_magnitude(&to_gray(image))?;
    let channels = [
        box_mean(&image.r, window),
        box_mean(&image.g, window),
        box_mean(&image.b, window),
        box_mean(&grad, window),
    ];
    let mut data = Vec::with_capacity(h * w * 4);
    for i in 0..h * w {
        for c in &channels {
            data.push(c.data()[i]);
        }
    }
    FeatureMap::new(h, w, 4, data)
}

/// Block-average downsampling by an integer factor. Dimensions must divide.
pub fn downsample(map: &ScalarMap, factor: usize) -> Result<ScalarMap> {
    if factor == 1 {
        return Ok(map.clone());
    }
    let (h, w) = map.dims();
    if factor == 0 || h % factor != 0 || w % factor != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{h}x{w} is not divisible by scale factor {factor}"
        )));
    }
    let norm = 1.0 / (factor * factor) as f64;
    Ok(ScalarMap::from_fn(h / factor, w / factor, |y, x| {
        let mut sum = 0.0f64;
        for yy in y * factor..(y + 1) * factor {
            for xx in x * factor..(x + 1) * factor {
                sum += map.get(yy, xx) as f64;
            }
        }
        (sum * norm) as f32
    }))
}

pub fn downsample_rgb(image: &RgbImage, factor: usize) -> Result<RgbImage> {
    RgbImage::new(
        downsample(&image.r, factor)?,
        downsample(&image.g, factor)?,
        downsample(&image.b, factor)?,
    )
}
