//! Analytic references for the forward solver.
//!
//! Frequency-domain solutions (`e^{j omega t}` convention) for a `J_z` line
//! source in free space and in the presence of a homogeneous dielectric
//! cylinder, synthesized into time traces for the discrete source waveform.

pub mod bessel;

use std::time::Instant;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fdtd::{Cell, MaterialGrid, ProbeSet, SourceSpec, C0, MU0};
use crate::scenario::Scenario;

/// Circular dielectric cylinder centred on the ring centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    /// Radius (m).
    pub radius: f64,
    pub eps_r: f64,
}

/// FFT length used for synthesis; long enough that the late-time tail of a
/// 2-D Green's function does not wrap into the recorded window.
const N_FFT: usize = 1 << 14;
/// Highest synthesized frequency as a multiple of the pulse centre frequency.
const F_MAX_FACTOR: f64 = 6.0;

/// Time traces of a frequency response driven by a sampled source.
///
/// `waveform[k]` acts at `(k + 1/2) dt`. `response(omega)` returns the field
/// per unit line current at each output; the result holds the fields at time
/// levels `levels` (multiples of `dt`), outputs by levels.
pub fn synthesize<F>(
    waveform: &[f64],
    dt: f64,
    f_max: f64,
    n_out: usize,
    levels: &[usize],
    mut response: F,
) -> Array2<f64>
where
    F: FnMut(f64) -> Vec<Complex64>,
{
    let n = N_FFT.max(waveform.len().next_power_of_two() * 4);
    let mut spec: Vec<Complex64> =
        (0..n).map(|k| Complex64::new(waveform.get(k).copied().unwrap_or(0.0), 0.0)).collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut spec);
    let df = 1.0 / (n as f64 * dt);
    let m_max = ((f_max / df) as usize).min(n / 2 - 1);

    let mut bins: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n]; n_out];
    for m in 1..=m_max {
        let omega = std::f64::consts::TAU * m as f64 * df;
        let shift = Complex64::from_polar(1.0, -omega * dt / 2.0);
        let h = response(omega);
        for (o, hv) in h.iter().enumerate() {
            let v = spec[m] * shift * hv;
            bins[o][m] = v;
            bins[o][n - m] = v.conj();
        }
    }
    let inverse = planner.plan_fft_inverse(n);
    let mut out = Array2::zeros((n_out, levels.len()));
    for (o, b) in bins.iter_mut().enumerate() {
        inverse.process(b);
        for (s, &l) in levels.iter().enumerate() {
            out[[o, s]] = b[l % n].re / n as f64;
        }
    }
    out
}

/// `E_z` per unit line current at distance `rho` from the source.
pub fn line_source_field(omega: f64, rho: f64) -> Complex64 {
    let k = omega / C0;
    let h0 = bessel::h2_all(1, k * rho)[0];
    -h0 * (omega * MU0 / 4.0)
}

/// Scattered `E_z` per unit line current for a source at polar position
/// `(rho_s, phi_s)` and receivers at `rx` (polar), around `cyl`.
pub fn cylinder_scattered_field(
    omega: f64,
    cyl: &Cylinder,
    (rho_s, phi_s): (f64, f64),
    rx: &[(f64, f64)],
) -> Vec<Complex64> {
    let k = omega / C0;
    let k1 = k * cyl.eps_r.sqrt();
    let ka = k * cyl.radius;
    let k1a = k1 * cyl.radius;
    let n_max = (k1a.max(ka) + 4.0 * k1a.max(ka).cbrt() + 10.0).ceil() as usize;

    let j_in = bessel::j_all(n_max + 1, k1a);
    let dj_in = bessel::derivatives(&j_in);
    let j_out = bessel::j_all(n_max + 1, ka);
    let dj_out = bessel::derivatives(&j_out);
    let h_out = bessel::h2_all(n_max + 1, ka);
    let dh_out = bessel::derivatives(&h_out);
    let coeff: Vec<Complex64> = (0..=n_max)
        .map(|n| {
            let num = Complex64::from(k * j_in[n] * dj_out[n] - k1 * dj_in[n] * j_out[n]);
            let den = dh_out[n] * (-k * j_in[n]) + h_out[n] * (k1 * dj_in[n]);
            num / den
        })
        .collect();
    let h_src = bessel::h2_all(n_max, k * rho_s);
    let scale = -omega * MU0 / 4.0;
    rx.iter()
        .map(|&(rho, phi)| {
            let h_rx = bessel::h2_all(n_max, k * rho);
            let dphi = phi - phi_s;
            let mut sum = coeff[0] * h_src[0] * h_rx[0];
            for n in 1..=n_max {
                sum += coeff[n] * h_src[n] * h_rx[n] * (2.0 * (n as f64 * dphi).cos());
            }
            sum * scale
        })
        .collect()
}

/// Relative L2 distance `|a - b| / |b|`.
pub fn relative_l2(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let num: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

/// Cylinder on the grid with boundary cells filled by area fraction.
pub fn rasterize_cylinder(sc: &Scenario, cyl: &Cylinder) -> MaterialGrid {
    const SUB: usize = 16;
    let g = &sc.grid;
    let mut mat = MaterialGrid::vacuum(g.nx, g.ny);
    let r_cells = cyl.radius / g.dx;
    let reach = r_cells.ceil() as usize + 1;
    let (ci, cj) = sc.center;
    for i in ci - reach..=ci + reach {
        for j in cj - reach..=cj + reach {
            let (x0, y0) = (i as f64 - ci as f64, j as f64 - cj as f64);
            let mut inside = 0usize;
            for a in 0..SUB {
                for b in 0..SUB {
                    let x = x0 - 0.5 + (a as f64 + 0.5) / SUB as f64;
                    let y = y0 - 0.5 + (b as f64 + 0.5) / SUB as f64;
                    if x * x + y * y < r_cells * r_cells {
                        inside += 1;
                    }
                }
            }
            mat.eps_r[[i, j]] = 1.0 + (cyl.eps_r - 1.0) * inside as f64 / (SUB * SUB) as f64;
        }
    }
    mat
}

fn polar(sc: &Scenario, cell: Cell) -> (f64, f64) {
    let (x, y) = sc.cell_position(cell);
    (x.hypot(y), y.atan2(x))
}

fn sample_levels(sc: &Scenario) -> Vec<usize> {
    (0..sc.n_samples).map(|s| (s + 1) * sc.decimation).collect()
}

/// Analytic scattered traces (receivers by samples) for `cyl` in `sc`.
pub fn cylinder_traces(sc: &Scenario, cyl: &Cylinder) -> Array2<f64> {
    let src = sc.source();
    let current = sc.grid.dx * sc.grid.dx;
    let tx = polar(sc, sc.transmitter);
    let rx: Vec<(f64, f64)> = sc.receivers.iter().map(|&c| polar(sc, c)).collect();
    synthesize(&src.waveform, sc.grid.dt, F_MAX_FACTOR * sc.pulse.fc, rx.len(), &sample_levels(sc), |w| {
        cylinder_scattered_field(w, cyl, tx, &rx).into_iter().map(|v| v * current).collect()
    })
}

/// Outcome of the forward-solver checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForwardValidation {
    /// Relative L2 error of FDTD scattered traces against the cylinder series.
    pub cylinder_error: f64,
    /// Relative L2 error of a free-space trace 30 cells from the source.
    pub free_space_error: f64,
    /// Wall time of the two FDTD runs behind the cylinder comparison (s).
    pub cylinder_seconds: f64,
}

impl ForwardValidation {
    pub const CYLINDER_TOLERANCE: f64 = 0.03;
    pub const FREE_SPACE_TOLERANCE: f64 = 0.02;

    pub fn passed(&self) -> bool {
        self.cylinder_error <= Self::CYLINDER_TOLERANCE && self.free_space_error <= Self::FREE_SPACE_TOLERANCE
    }
}

/// FDTD against the analytic cylinder: returns `(fdtd, analytic)` scattered
/// traces and the FDTD wall time.
pub fn cylinder_comparison(sc: &Scenario, cyl: &Cylinder) -> Result<(Array2<f64>, Array2<f64>, f64)> {
    let start = Instant::now();
    let (total, incident) = rayon::join(|| sc.simulate(&rasterize_cylinder(sc, cyl)), || sc.incident());
    let fdtd = total?.minus(&incident?)?.values;
    let seconds = start.elapsed().as_secs_f64();
    Ok((fdtd, cylinder_traces(sc, cyl), seconds))
}

/// Free-space FDTD trace `offset` cells from a centred source against the
/// line-source solution; returns the relative L2 error.
pub fn free_space_error(sc: &Scenario, offset: usize) -> Result<f64> {
    let g = &sc.grid;
    let src = SourceSpec { cell: sc.center, waveform: sc.source().waveform };
    let probe = (sc.center.0 + offset, sc.center.1);
    let probes = ProbeSet { cells: vec![probe], decimation: sc.decimation };
    let fdtd = sc.solver(&MaterialGrid::vacuum(g.nx, g.ny))?.run(&src, &probes, None)?.traces;
    let rho = offset as f64 * g.dx;
    let current = g.dx * g.dx;
    let oracle = synthesize(&src.waveform, g.dt, F_MAX_FACTOR * sc.pulse.fc, 1, &sample_levels(sc), |w| {
        vec![line_source_field(w, rho) * current]
    });
    Ok(relative_l2(&fdtd, &oracle))
}

/// Radius 0.15 m, `eps_r = 2` cylinder and free-space checks on `sc`.
pub fn validate_forward(sc: &Scenario) -> Result<ForwardValidation> {
    let cyl = Cylinder { radius: 0.15, eps_r: 2.0 };
    let (fdtd, analytic, cylinder_seconds) = cylinder_comparison(sc, &cyl)?;
    Ok(ForwardValidation {
        cylinder_error: relative_l2(&fdtd, &analytic),
        free_space_error: free_space_error(sc, 30 * sc.imaging_cells / 128)?,
        cylinder_seconds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesis_of_identity_response_returns_waveform() {
        // A pure half-step advance maps a zero-mean source onto itself.
        let dt = 1e-11;
        let w: Vec<f64> = (0..64).map(|k| (k as f64 - 20.0) * (-(k as f64 - 20.0).powi(2) / 20.0).exp()).collect();
        let out = synthesize(&w, dt, 1.0 / (2.0 * dt), 1, &(0..64).collect::<Vec<_>>(), |omega| {
            vec![Complex64::from_polar(1.0, omega * dt / 2.0)]
        });
        for k in 0..64 {
            assert!((out[[0, k]] - w[k]).abs() < 1e-9, "{k}: {} vs {}", out[[0, k]], w[k]);
        }
    }

    #[test]
    fn vanishing_cylinder_scatters_nothing() {
        let cyl = Cylinder { radius: 0.15, eps_r: 1.0 };
        let f = cylinder_scattered_field(2e9 * std::f64::consts::PI, &cyl, (0.75, 0.0), &[(0.75, 1.0), (0.75, 3.0)]);
        assert!(f.iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn pec_like_limit_is_reciprocal() {
        let cyl = Cylinder { radius: 0.1, eps_r: 6.0 };
        let w = 2.0 * std::f64::consts::PI * 1.3e9;
        let ab = cylinder_scattered_field(w, &cyl, (0.5, 0.2), &[(0.7, 2.1)])[0];
        let ba = cylinder_scattered_field(w, &cyl, (0.7, 2.1), &[(0.5, 0.2)])[0];
        assert!((ab - ba).norm() <= 1e-12 * ab.norm());
    }

    #[test]
    fn rasterized_area_matches_disc() {
        let sc = crate::scenario::default_scenario();
        let cyl = Cylinder { radius: 0.15, eps_r: 3.0 };
        let m = rasterize_cylinder(&sc, &cyl);
        let area: f64 = m.eps_r.iter().map(|v| (v - 1.0) / 2.0).sum::<f64>() * sc.grid.dx * sc.grid.dx;
        let exact = std::f64::consts::PI * 0.15 * 0.15;
        assert!((area - exact).abs() < 1e-3 * exact);
    }
}
