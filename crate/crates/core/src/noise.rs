//! Additive measurement noise calibrated to an exact realized SNR.
//!
//! The raw noise field is scaled per draw so that the mean-square ratio of
//! signal to noise over the whole matrix equals the target.

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Stream, NOISE_STREAM};
use crate::scenario::Measurement;

/// Reported SNR when the noise is exactly zero.
pub const SNR_SENTINEL_DB: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    /// Zero mean, unit variance.
    Gaussian,
    /// Unit scale; the nonzero mean is kept.
    Rayleigh,
    /// `U(-1, 1)`.
    Uniform,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::Gaussian, NoiseKind::Rayleigh, NoiseKind::Uniform];
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Rayleigh => "rayleigh",
            NoiseKind::Uniform => "uniform",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "rayleigh" => Ok(NoiseKind::Rayleigh),
            "uniform" => Ok(NoiseKind::Uniform),
            _ => Err(Error::invalid(format!("unknown noise kind {s:?}; expected gaussian, rayleigh or uniform"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub snr_db: f64,
    pub seed: u64,
}

/// What was added, persisted next to the noisy measurement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseMeta {
    pub kind: NoiseKind,
    pub snr_db: f64,
    pub seed: u64,
    /// Scale applied to the raw noise field.
    pub alpha: f64,
    pub realized_snr_db: f64,
}

/// Raw noise field of `kind`, drawn in row-major order.
pub fn draw_noise(kind: NoiseKind, shape: (usize, usize), seed: u64) -> Array2<f64> {
    let mut rng = Stream::new(seed, NOISE_STREAM);
    Array2::from_shape_simple_fn(shape, || match kind {
        NoiseKind::Gaussian => rng.normal(),
        NoiseKind::Rayleigh => rng.rayleigh(),
        NoiseKind::Uniform => 2.0 * rng.uniform() - 1.0,
    })
}

fn mean_square(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64
}

/// `clean + alpha * n` with `alpha` chosen so the realized SNR is `spec.snr_db`.
pub fn add_noise(clean: &Measurement, spec: &NoiseSpec) -> Result<(Measurement, NoiseMeta)> {
    if !spec.snr_db.is_finite() {
        return Err(Error::invalid(format!("SNR must be finite, got {}", spec.snr_db)));
    }
    let p_signal = mean_square(&clean.values);
    if p_signal.is_nan() || p_signal <= 0.0 {
        return Err(Error::invalid("clean measurement has zero power"));
    }
    let raw = draw_noise(spec.kind, clean.values.dim(), spec.seed);
    let p_noise = mean_square(&raw);
    let alpha = (p_signal / (p_noise * 10f64.powf(spec.snr_db / 10.0))).sqrt();
    let noisy = Measurement::new(&clean.values + &(raw * alpha), clean.sample_dt)?;
    let realized_snr_db = realized_snr(clean, &noisy)?;
    Ok((noisy, NoiseMeta { kind: spec.kind, snr_db: spec.snr_db, seed: spec.seed, alpha, realized_snr_db }))
}

/// `10 log10(sum clean^2 / sum (noisy - clean)^2)`; identical inputs report
/// [`SNR_SENTINEL_DB`].
pub fn realized_snr(clean: &Measurement, noisy: &Measurement) -> Result<f64> {
    if clean.dim() != noisy.dim() {
        return Err(Error::ShapeMismatch { expected: clean.dim(), got: noisy.dim() });
    }
    let signal: f64 = clean.values.iter().map(|v| v * v).sum();
    let noise: f64 = clean.values.iter().zip(noisy.values.iter()).map(|(c, n)| (n - c).powi(2)).sum();
    if noise == 0.0 {
        return Ok(SNR_SENTINEL_DB);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// Sample moments of a pooled set of draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Moments {
    pub fn of(values: impl IntoIterator<Item = f64> + Clone) -> Self {
        let (n, sum) = values.clone().into_iter().fold((0usize, 0.0), |(n, s), v| (n + 1, s + v));
        let n = n as f64;
        let mean = sum / n;
        let (m2, m3, m4) = values.into_iter().fold((0.0, 0.0, 0.0), |(a, b, c), v| {
            let d = v - mean;
            (a + d * d, b + d * d * d, c + d * d * d * d)
        });
        let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
        Moments { mean, variance: m2, skewness: m3 / m2.powf(1.5), excess_kurtosis: m4 / (m2 * m2) - 3.0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clean() -> Measurement {
        let v = Array2::from_shape_fn((128, 128), |(r, s)| {
            (r as f64 * 0.3 + s as f64 * 0.11).sin() * (-(s as f64 - 40.0).powi(2) / 400.0).exp()
        });
        Measurement::new(v, 1e-10).unwrap()
    }

    #[test]
    fn realized_snr_is_exact() {
        let c = clean();
        for kind in NoiseKind::ALL {
            for snr in [1.0, 3.0, 5.0] {
                let (noisy, meta) = add_noise(&c, &NoiseSpec { kind, snr_db: snr, seed: 17 }).unwrap();
                let got = realized_snr(&c, &noisy).unwrap();
                assert!((got - snr).abs() <= 1e-9, "{kind} {snr}: {got}");
                assert_eq!(meta.realized_snr_db, got);
            }
        }
    }

    #[test]
    fn huge_snr_leaves_signal_untouched() {
        let c = clean();
        let (noisy, _) = add_noise(&c, &NoiseSpec { kind: NoiseKind::Gaussian, snr_db: 300.0, seed: 1 }).unwrap();
        let num: f64 = c.values.iter().zip(noisy.values.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = c.values.iter().map(|a| a * a).sum();
        assert!((num / den).sqrt() <= 1e-12);
    }

    #[test]
    fn seeded_and_deterministic() {
        let c = clean();
        let spec = NoiseSpec { kind: NoiseKind::Rayleigh, snr_db: 3.0, seed: 99 };
        assert_eq!(add_noise(&c, &spec).unwrap(), add_noise(&c, &spec).unwrap());
        let other = NoiseSpec { seed: 100, ..spec };
        assert_ne!(add_noise(&c, &spec).unwrap().0, add_noise(&c, &other).unwrap().0);
    }

    #[test]
    fn snr_edge_cases() {
        let c = clean();
        let doubled = Measurement::new(&c.values * 2.0, c.sample_dt).unwrap();
        assert!(realized_snr(&c, &doubled).unwrap().abs() < 1e-12);
        assert_eq!(realized_snr(&c, &c).unwrap(), SNR_SENTINEL_DB);
        let zero = Measurement::new(Array2::zeros((4, 4)), 1e-10).unwrap();
        assert!(add_noise(&zero, &NoiseSpec { kind: NoiseKind::Uniform, snr_db: 1.0, seed: 0 }).is_err());
        assert!(add_noise(&c, &NoiseSpec { kind: NoiseKind::Uniform, snr_db: f64::NAN, seed: 0 }).is_err());
    }

    #[test]
    fn kind_names_roundtrip() {
        for k in NoiseKind::ALL {
            assert_eq!(k.to_string().parse::<NoiseKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
        assert!("pink".parse::<NoiseKind>().is_err());
    }

    #[test]
    fn distribution_shapes_over_pooled_draws() {
        // 7 fields of 128x128 pool just over 10^5 draws.
        let pooled =
            |kind| -> Vec<f64> { (0..7).flat_map(|seed| draw_noise(kind, (128, 128), seed).into_iter()).collect() };
        let g = Moments::of(pooled(NoiseKind::Gaussian));
        assert!(g.skewness.abs() < 0.05, "{g:?}");
        assert!(g.mean.abs() < 0.01 && (g.variance - 1.0).abs() < 0.01, "{g:?}");
        let r = Moments::of(pooled(NoiseKind::Rayleigh));
        assert!((r.skewness - 0.631).abs() < 0.05, "{r:?}");
        assert!((r.mean - (std::f64::consts::PI / 2.0).sqrt()).abs() < 0.01, "{r:?}");
        let u = Moments::of(pooled(NoiseKind::Uniform));
        assert!((u.excess_kurtosis + 1.2).abs() < 0.05, "{u:?}");
        assert!(u.mean.abs() < 0.01 && (u.variance - 1.0 / 3.0).abs() < 0.01, "{u:?}");
    }

    #[test]
    fn moments_of_known_sets() {
        let m = Moments::of([1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert_eq!(m.variance, 1.25);
        assert_eq!(m.skewness, 0.0);
        assert!((m.excess_kurtosis - (-1.36)).abs() < 1e-12);
    }
}
