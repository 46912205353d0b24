//! Image and waveform quality metrics.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reported PSNR for identical images.
pub const PSNR_SENTINEL_DB: f64 = 100.0;

fn same_shape<A, B>(a: &Array2<A>, b: &Array2<B>) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::ShapeMismatch { expected: a.dim(), got: b.dim() });
    }
    Ok(())
}

/// `sum |g - g'|^2 / (J K A^2)`.
pub fn pmse(truth: &Array2<f64>, pred: &Array2<f64>, a: f64) -> Result<f64> {
    same_shape(truth, pred)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::invalid(format!("PMSE normalizer must be positive, got {a}")));
    }
    let sq: f64 = truth.iter().zip(pred.iter()).map(|(g, p)| (g - p).powi(2)).sum();
    Ok(sq / (truth.len() as f64 * a * a))
}

/// Global `(min, max)` of a matrix.
pub fn value_range(a: &Array2<f64>) -> (f64, f64) {
    a.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Affine map of `[lo, hi]` onto `0..=255`, rounding half up and clamping.
pub fn to_pixels(values: &Array2<f64>, lo: f64, hi: f64) -> Result<Array2<u8>> {
    if !lo.is_finite() || !hi.is_finite() || hi <= lo {
        return Err(Error::invalid(format!("pixel range needs lo < hi, got [{lo}, {hi}]")));
    }
    let scale = 255.0 / (hi - lo);
    Ok(values.mapv(|v| ((v - lo) * scale + 0.5).floor().clamp(0.0, 255.0) as u8))
}

/// `10 log10(255^2 / MSE)`; identical images report [`PSNR_SENTINEL_DB`].
pub fn psnr(reference: &Array2<u8>, test: &Array2<u8>) -> Result<f64> {
    same_shape(reference, test)?;
    let mse = reference.iter().zip(test.iter()).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_SENTINEL_DB);
    }
    Ok((10.0 * (255.0f64 * 255.0 / mse).log10()).min(PSNR_SENTINEL_DB))
}

const SSIM_WIN: usize = 11;
const SSIM_SIGMA: f64 = 1.5;

fn gaussian_window() -> [f64; SSIM_WIN] {
    let mut w = [0.0; SSIM_WIN];
    let c = (SSIM_WIN / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-(i as f64 - c).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable Gaussian filtering, keeping only fully covered positions.
fn filter_valid(a: &Array2<f64>, w: &[f64; SSIM_WIN]) -> Array2<f64> {
    let (r, c) = a.dim();
    let (ro, co) = (r + 1 - SSIM_WIN, c + 1 - SSIM_WIN);
    let rows = Array2::from_shape_fn((r, co), |(i, j)| (0..SSIM_WIN).map(|k| w[k] * a[[i, j + k]]).sum::<f64>());
    Array2::from_shape_fn((ro, co), |(i, j)| (0..SSIM_WIN).map(|k| w[k] * rows[[i + k, j]]).sum::<f64>())
}

/// Mean single-scale SSIM with an 11x11 Gaussian window (sigma 1.5),
/// `K1 = 0.01`, `K2 = 0.03`, `L = 255`, over fully covered windows.
pub fn ssim(a: &Array2<u8>, b: &Array2<u8>) -> Result<f64> {
    same_shape(a, b)?;
    let (r, c) = a.dim();
    if r < SSIM_WIN || c < SSIM_WIN {
        return Err(Error::invalid(format!("SSIM needs images of at least {SSIM_WIN}x{SSIM_WIN}")));
    }
    let w = gaussian_window();
    let x = a.mapv(|v| v as f64);
    let y = b.mapv(|v| v as f64);
    let mx = filter_valid(&x, &w);
    let my = filter_valid(&y, &w);
    let sxx = filter_valid(&(&x * &x), &w);
    let syy = filter_valid(&(&y * &y), &w);
    let sxy = filter_valid(&(&x * &y), &w);
    let (c1, c2) = ((0.01f64 * 255.0).powi(2), (0.03f64 * 255.0).powi(2));
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx.as_slice().unwrap()[i], my.as_slice().unwrap()[i]);
        let vx = sxx.as_slice().unwrap()[i] - ux * ux;
        let vy = syy.as_slice().unwrap()[i] - uy * uy;
        let cov = sxy.as_slice().unwrap()[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(total / mx.len() as f64)
}

/// Coefficient of determination `1 - SS_res / SS_tot` over all pixels of
/// all images.
pub fn r2<'a>(pairs: impl IntoIterator<Item = (&'a Array2<f64>, &'a Array2<f64>)> + Clone) -> Result<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for (t, p) in pairs.clone() {
        same_shape(t, p)?;
        n += t.len();
        sum += t.sum();
    }
    if n == 0 {
        return Err(Error::invalid("R^2 of an empty batch"));
    }
    let mean = sum / n as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for (t, p) in pairs {
        for (&g, &q) in t.iter().zip(p.iter()) {
            ss_res += (g - q).powi(2);
            ss_tot += (g - mean).powi(2);
        }
    }
    if ss_tot == 0.0 {
        return Err(Error::invalid("R^2 is undefined for a constant truth"));
    }
    Ok(1.0 - ss_res / ss_tot)
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Metrics of one predicted image against its truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub id: String,
    pub pmse: f64,
    pub psnr: f64,
    pub ssim: f64,
    /// `None` when the truth image is constant.
    pub r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub median: Option<f64>,
    pub mean: Option<f64>,
}

impl Summary {
    pub fn of(values: &[f64]) -> Self {
        Summary { median: median(values), mean: mean(values) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` increasing edges.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    /// Counts in `bins` equal bins over `[lo, hi]`; values outside are
    /// clamped into the end bins.
    pub fn new(values: &[f64], lo: f64, hi: f64, bins: usize) -> Self {
        let width = (hi - lo) / bins as f64;
        let edges = (0..=bins).map(|k| lo + width * k as f64).collect();
        let mut counts = vec![0; bins];
        for &v in values {
            let k = ((v - lo) / width).floor();
            counts[(k.max(0.0) as usize).min(bins - 1)] += 1;
        }
        Histogram { edges, counts }
    }
}

/// Per-sample metrics plus aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// PMSE normalizer (largest truth permittivity in the dataset).
    pub a: f64,
    pub samples: Vec<SampleMetrics>,
    pub pmse: Summary,
    pub psnr: Summary,
    pub ssim: Summary,
    pub r2: Summary,
    /// R^2 over all pixels of all samples.
    pub r2_pooled: Option<f64>,
    pub pmse_histogram: Histogram,
}

impl MetricReport {
    pub const HISTOGRAM_BINS: usize = 20;

    /// Scores `(id, truth, pred)` triples with PMSE normalizer `a`. PSNR and
    /// SSIM use pixels mapped from `[1, a]`.
    pub fn build(items: &[(String, Array2<f64>, Array2<f64>)], a: f64) -> Result<Self> {
        let mut samples = Vec::with_capacity(items.len());
        for (id, truth, pred) in items {
            let (pt, pp) = (to_pixels(truth, 1.0, a)?, to_pixels(pred, 1.0, a)?);
            samples.push(SampleMetrics {
                id: id.clone(),
                pmse: pmse(truth, pred, a)?,
                psnr: psnr(&pt, &pp)?,
                ssim: ssim(&pt, &pp)?,
                r2: r2([(truth, pred)]).ok(),
            });
        }
        let col = |f: fn(&SampleMetrics) -> Option<f64>| samples.iter().filter_map(f).collect::<Vec<_>>();
        let pmses = col(|s| Some(s.pmse));
        let hi = pmses.iter().copied().fold(0.1f64, f64::max);
        Ok(MetricReport {
            a,
            pmse_histogram: Histogram::new(&pmses, 0.0, hi, Self::HISTOGRAM_BINS),
            pmse: Summary::of(&pmses),
            psnr: Summary::of(&col(|s| Some(s.psnr))),
            ssim: Summary::of(&col(|s| Some(s.ssim))),
            r2: Summary::of(&col(|s| s.r2)),
            r2_pooled: r2(items.iter().map(|(_, t, p)| (t, p))).ok(),
            samples,
        })
    }
}
