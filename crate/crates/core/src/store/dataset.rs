//! Pipeline stages operating on a dataset directory.
//!
//! Every stage reads the manifest, writes per-sample files, and rewrites the
//! manifest once at the end. Sample `i` of a dataset generated with seed `S`
//! uses phantom seed `S + i`; `add-noise` with seed `T` uses noise seed
//! `T + i`.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use super::manifest::{Manifest, SampleEntry};
use super::tensor::{read_array, write_tensor, Tensor};
use crate::error::{Error, Result};
use crate::inversion::{invert, InversionConfig, InversionState, StopReason, Truth};
use crate::metrics::MetricReport;
use crate::noise::{add_noise, NoiseKind, NoiseSpec};
use crate::phantom::{self, Family, GlyphStore};
use crate::scenario::{Measurement, Scenario};

fn sample_dir(id: &str) -> String {
    format!("samples/{id}")
}

fn write_f32(dir: &Path, rel: &str, a: &Array2<f64>) -> Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    write_tensor(&path, &Tensor::from_array_f32(a))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Runs `f` on a pool of `jobs` threads, or on the global pool when `None`.
fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match jobs {
        None => Ok(f()),
        Some(0) => Err(Error::invalid("--jobs must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn read_measurement(dir: &Path, rel: &str, sc: &Scenario) -> Result<Measurement> {
    let values = read_array(dir.join(rel))?;
    let expected = (sc.n_receivers, sc.n_samples);
    if values.dim() != expected {
        return Err(Error::ShapeMismatch { expected, got: values.dim() });
    }
    Measurement::new(values, sc.sample_dt)
}

/// Creates a dataset of `count` phantoms of `family` in `out`.
pub fn generate(
    out: impl AsRef<Path>,
    sc: &Scenario,
    family: Family,
    count: usize,
    seed: u64,
    glyphs: Option<&GlyphStore>,
) -> Result<Manifest> {
    let out = out.as_ref();
    if out.join(super::MANIFEST_FILE).exists() {
        return Err(Error::invalid(format!("{} already holds a dataset", out.display())));
    }
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut m = Manifest::new(sc.clone());
    m.families = vec![family];
    for i in 0..count {
        let id = format!("{i:05}");
        let s = seed.wrapping_add(i as u64);
        let p = phantom::generate(family, s, glyphs)?;
        let entry = SampleEntry {
            truth_eps: format!("{}/eps.ticn", sample_dir(&id)),
            truth_sigma: format!("{}/sigma.ticn", sample_dir(&id)),
            id,
            family,
            seed: s,
            clean: None,
            noisy: None,
            noise: None,
            phantom: p.meta,
        };
        write_f32(out, &entry.truth_eps, &p.eps)?;
        write_f32(out, &entry.truth_sigma, &p.sigma)?;
        // The normalizer must match what readers see after the f32 round trip.
        let stored_max = p.eps.iter().map(|&v| v as f32 as f64).fold(f64::NEG_INFINITY, f64::max);
        m.eps_max = m.eps_max.max(stored_max);
        m.samples.push(entry);
    }
    m.save(out)?;
    Ok(m)
}

/// Simulates the scattered field of every sample and stores it as `clean`.
/// Existing noisy data is dropped from the manifest.
pub fn simulate(dir: impl AsRef<Path>, jobs: Option<usize>) -> Result<Manifest> {
    let dir = dir.as_ref();
    let mut m = Manifest::load(dir)?;
    m.validate_files(dir)?;
    let sc = &m.scenario;
    let paths = with_jobs(jobs, || {
        let incident = sc.incident()?;
        m.samples
            .par_iter()
            .map(|s| {
                let eps = read_array(dir.join(&s.truth_eps))?;
                let sigma = read_array(dir.join(&s.truth_sigma))?;
                let scattered = sc.simulate_image(&eps, Some(&sigma))?.minus(&incident)?;
                let rel = format!("{}/clean.ticn", sample_dir(&s.id));
                write_f32(dir, &rel, &scattered.values)?;
                Ok(rel)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    for (s, rel) in m.samples.iter_mut().zip(paths) {
        s.clean = Some(rel);
        s.noisy = None;
        s.noise = None;
    }
    m.save(dir)?;
    Ok(m)
}

/// Adds `kind` noise at `snr_db` to every clean measurement.
pub fn noise(dir: impl AsRef<Path>, kind: NoiseKind, snr_db: f64, seed: u64, jobs: Option<usize>) -> Result<Manifest> {
    let dir = dir.as_ref();
    let mut m = Manifest::load(dir)?;
    m.validate_files(dir)?;
    let sc = &m.scenario;
    let results = with_jobs(jobs, || {
        m.samples
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let clean_rel = s.clean.as_ref().ok_or_else(|| {
                    Error::invalid(format!("sample {} has no clean measurement; run simulate first", s.id))
                })?;
                let clean = read_measurement(dir, clean_rel, sc)?;
                let spec = NoiseSpec { kind, snr_db, seed: seed.wrapping_add(i as u64) };
                let (noisy, meta) = add_noise(&clean, &spec)?;
                let rel = format!("{}/noisy.ticn", sample_dir(&s.id));
                write_f32(dir, &rel, &noisy.values)?;
                Ok((rel, meta))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    for (s, (rel, meta)) in m.samples.iter_mut().zip(results) {
        s.noisy = Some(rel);
        s.noise = Some(meta);
    }
    m.save(dir)?;
    Ok(m)
}

/// Where [`invert_sample`] puts the permittivity of sample `id`.
pub fn predicted_eps_path(pred: impl AsRef<Path>, id: &str) -> PathBuf {
    pred.as_ref().join(id).join("eps.ticn")
}

#[derive(Debug, Serialize)]
struct InversionSummary<'a> {
    id: &'a str,
    measurement: &'a str,
    iterations: usize,
    stop: StopReason,
    final_objective: f64,
    final_pmse: Option<f64>,
    pmse_normalizer: f64,
    config: &'a InversionConfig,
}

/// Inverts the noisy measurement of sample `id` (clean when no noise was
/// added). Writes `eps.ticn`, `sigma.ticn`, `objective.json`, `pmse.json` and
/// `summary.json` under `out/<id>/`.
pub fn invert_sample(
    dir: impl AsRef<Path>,
    id: &str,
    cfg: &InversionConfig,
    out: impl AsRef<Path>,
) -> Result<InversionState> {
    let dir = dir.as_ref();
    let m = Manifest::load(dir)?;
    let s = m.sample(id)?;
    let (kind, rel) = match (&s.noisy, &s.clean) {
        (Some(n), _) => ("noisy", n),
        (None, Some(c)) => ("clean", c),
        (None, None) => return Err(Error::invalid(format!("sample {id} has no measurement; run simulate first"))),
    };
    let measured = read_measurement(dir, rel, &m.scenario)?;
    let truth = read_array(dir.join(&s.truth_eps))?;
    let state = invert(&measured, cfg, &m.scenario, Some(Truth { eps: &truth, scale: m.eps_max }))?;

    let out = out.as_ref().join(id);
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    write_tensor(out.join("eps.ticn"), &Tensor::from_array_f32(&state.eps))?;
    write_tensor(out.join("sigma.ticn"), &Tensor::from_array_f32(&state.sigma))?;
    write_json(&out.join("objective.json"), &state.objective)?;
    write_json(&out.join("pmse.json"), &state.pmse)?;
    let summary = InversionSummary {
        id,
        measurement: kind,
        iterations: state.iterations,
        stop: state.stop,
        final_objective: *state.objective.last().expect("objective history starts with the initial value"),
        final_pmse: state.pmse.last().copied(),
        pmse_normalizer: m.eps_max,
        config: cfg,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(state)
}

/// Scores every sample that has a prediction under `pred` against the
/// dataset truth.
pub fn evaluate(pred: impl AsRef<Path>, dir: impl AsRef<Path>) -> Result<MetricReport> {
    let (pred, dir) = (pred.as_ref(), dir.as_ref());
    let m = Manifest::load(dir)?;
    let mut items = Vec::new();
    for s in &m.samples {
        let path = predicted_eps_path(pred, &s.id);
        if !path.exists() {
            continue;
        }
        let truth = read_array(dir.join(&s.truth_eps))?;
        let p = read_array(&path)?;
        if p.dim() != truth.dim() {
            return Err(Error::ShapeMismatch { expected: truth.dim(), got: p.dim() });
        }
        items.push((s.id.clone(), truth, p));
    }
    if items.is_empty() {
        return Err(Error::invalid(format!("no predictions for dataset samples under {}", pred.display())));
    }
    MetricReport::build(&items, m.eps_max)
}
