//! 2-D TM_z finite-difference time-domain solver.
//!
//! Fields live on a staggered Yee grid: `E_z` at integer cell positions
//! `(i, j)`, `H_x` at `(i, j + 1/2)` and `H_y` at `(i + 1/2, j)`. Electric
//! fields are sampled at integer time steps and magnetic fields at half
//! steps. The outermost ring of `E_z` nodes is a PEC wall, shielded from the
//! interior by a convolutional PML.
//!
//! Conventions used throughout:
//!
//! * `x` is the first array axis (`i`), `y` the second (`j`); flat buffers are
//!   row-major with index `i * ny + j`.
//! * `J_z` enters as an impressed current: `eps dE/dt = curl H - sigma E - J`.
//! * Step `k` advances `E_z` from time `k dt` to `(k + 1) dt`; the source
//!   sample used by step `k` therefore acts at `(k + 1/2) dt`.

mod cpml;
mod solver;

use serde::{Deserialize, Serialize};

pub use cpml::{CpmlParams, CpmlProfile};
pub use solver::{AdjointOutput, EzHistory, FieldState, RunOutput, Solver, Window};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const C0: f64 = 299_792_458.0;
/// Vacuum permeability (H/m), CODATA 2018.
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Vacuum permittivity (F/m), `1 / (mu0 c0^2)`.
pub const EPS0: f64 = 1.0 / (MU0 * C0 * C0);
/// Free-space wave impedance (ohm).
pub const ETA0: f64 = MU0 * C0;

/// Grid cell index `(i, j)`.
pub type Cell = (usize, usize);

/// Discretization of the computational domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    /// Cell size (m).
    pub dx: f64,
    /// Time step (s).
    pub dt: f64,
    pub n_steps: usize,
    /// CPML thickness on every side, in cells.
    pub pml_cells: usize,
    pub eps0: f64,
    pub mu0: f64,
    pub c0: f64,
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, dx: f64, dt: f64, n_steps: usize, pml_cells: usize) -> Result<Self> {
        let grid = GridSpec { nx, ny, dx, dt, n_steps, pml_cells, eps0: EPS0, mu0: MU0, c0: C0 };
        grid.validate()?;
        Ok(grid)
    }

    /// Largest stable time step for this cell size.
    pub fn cfl_limit(&self) -> f64 {
        self.dx / (self.c0 * std::f64::consts::SQRT_2)
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::invalid(format!("cell size must be positive, got {}", self.dx)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {}", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps must be positive"));
        }
        if self.pml_cells < 8 {
            return Err(Error::invalid(format!("CPML needs at least 8 cells, got {}", self.pml_cells)));
        }
        if self.nx <= 2 * self.pml_cells || self.ny <= 2 * self.pml_cells {
            return Err(Error::invalid(format!(
                "grid {}x{} leaves no interior inside {} CPML cells",
                self.nx, self.ny, self.pml_cells
            )));
        }
        if self.dt > self.cfl_limit() {
            return Err(Error::invalid(format!(
                "time step {:e} s violates the CFL bound {:e} s",
                self.dt,
                self.cfl_limit()
            )));
        }
        Ok(())
    }

    pub(crate) fn idx(&self, (i, j): Cell) -> usize {
        i * self.ny + j
    }

    pub fn contains(&self, (i, j): Cell) -> bool {
        i < self.nx && j < self.ny
    }
}

/// Time step at `courant_fraction` of the 2-D CFL limit.
pub fn cfl_timestep(dx: f64, courant_fraction: f64) -> Result<f64> {
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::invalid(format!("cell size must be positive, got {dx}")));
    }
    if !(courant_fraction > 0.0 && courant_fraction <= 1.0) {
        return Err(Error::invalid(format!("courant fraction must lie in (0, 1], got {courant_fraction}")));
    }
    Ok(courant_fraction * dx / (C0 * std::f64::consts::SQRT_2))
}

/// Delay of the Ricker peak for centre frequency `fc`.
pub fn ricker_delay(fc: f64) -> f64 {
    1.2 / fc
}

/// Ricker wavelet with unit peak at `t = 1.2 / fc`.
pub fn ricker_pulse(t: f64, fc: f64) -> f64 {
    debug_assert!(fc > 0.0);
    let tau = t - ricker_delay(fc);
    let a = (std::f64::consts::PI * fc * tau).powi(2);
    (1.0 - 2.0 * a) * (-a).exp()
}

/// Ricker samples for every internal step, taken at the half-step times
/// `(k + 1/2) dt` where the current acts.
pub fn ricker_waveform(fc: f64, dt: f64, n_steps: usize, amplitude: f64) -> Vec<f64> {
    (0..n_steps).map(|k| amplitude * ricker_pulse((k as f64 + 0.5) * dt, fc)).collect()
}

/// Per-cell relative permittivity and conductivity, indexed `[i, j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialGrid {
    pub eps_r: ndarray::Array2<f64>,
    pub sigma: ndarray::Array2<f64>,
}

impl MaterialGrid {
    pub fn vacuum(nx: usize, ny: usize) -> Self {
        MaterialGrid { eps_r: ndarray::Array2::from_elem((nx, ny), 1.0), sigma: ndarray::Array2::zeros((nx, ny)) }
    }

    pub fn new(eps_r: ndarray::Array2<f64>, sigma: ndarray::Array2<f64>) -> Result<Self> {
        let m = MaterialGrid { eps_r, sigma };
        m.validate()?;
        Ok(m)
    }

    pub fn dim(&self) -> (usize, usize) {
        self.eps_r.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.eps_r.dim() != self.sigma.dim() {
            return Err(Error::ShapeMismatch { expected: self.eps_r.dim(), got: self.sigma.dim() });
        }
        if let Some(v) = self.eps_r.iter().find(|v| !(**v >= 1.0 && v.is_finite())) {
            return Err(Error::invalid(format!("relative permittivity must be >= 1, found {v}")));
        }
        if let Some(v) = self.sigma.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("conductivity must be >= 0, found {v}")));
        }
        Ok(())
    }
}

/// Soft `J_z` source: one amplitude (A/m^2) per internal step.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub cell: Cell,
    pub waveform: Vec<f64>,
}

/// Receiver cells, recorded every `decimation` internal steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    pub cells: Vec<Cell>,
    pub decimation: usize,
}

impl ProbeSet {
    pub fn n_samples(&self, n_steps: usize) -> usize {
        n_steps / self.decimation
    }

    /// Sample index recorded at the end of internal step `k`, if any.
    pub fn sample_at(&self, k: usize) -> Option<usize> {
        (k + 1).is_multiple_of(self.decimation).then(|| (k + 1) / self.decimation - 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::{num_complex::Complex64, FftPlanner};

    #[test]
    fn cfl_timestep_direct_formula() {
        let dt = cfl_timestep(0.01, 1.0).unwrap();
        assert!((dt - 0.01 / (2.997_924_58e8 * 2f64.sqrt())).abs() < 1e-25);
        assert!((dt - 2.3585e-11).abs() < 1e-14);
    }

    #[test]
    fn default_step_sits_below_cfl() {
        let dx = 0.75 / 128.0;
        assert_eq!(dx, 5.859_375e-3);
        let limit = cfl_timestep(dx, 1.0).unwrap();
        assert!((limit - 1.3819e-11).abs() < 1e-14);
        let fraction = 1.25e-11 / limit;
        assert!(fraction < 1.0);
        let dt = cfl_timestep(dx, fraction).unwrap();
        assert!((dt - 1.25e-11).abs() < 1e-24);
    }

    #[test]
    fn cfl_rejects_bad_inputs() {
        assert!(cfl_timestep(0.01, 0.0).is_err());
        assert!(cfl_timestep(0.01, 1.5).is_err());
        assert!(cfl_timestep(-1.0, 0.5).is_err());
        assert!(cfl_timestep(0.0, 0.5).is_err());
    }

    #[test]
    fn ricker_peak_and_zero() {
        let fc = 1e9;
        let t0 = ricker_delay(fc);
        assert_eq!(ricker_pulse(t0, fc), 1.0);
        let tz = 1.0 / (std::f64::consts::PI * fc * 2f64.sqrt());
        assert!(ricker_pulse(t0 + tz, fc).abs() < 1e-15);
        assert!(ricker_pulse(t0 - tz, fc).abs() < 1e-15);
    }

    #[test]
    fn ricker_spectrum_peaks_at_centre_frequency() {
        let fc = 1e9;
        let dt = 1.25e-11;
        let n = 4096;
        let w = ricker_waveform(fc, dt, n, 1.0);
        let mut buf: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        let df = 1.0 / (n as f64 * dt);
        let peak = (1..n / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap();
        assert!((peak as f64 * df - fc).abs() <= df, "peak at {} Hz", peak as f64 * df);
    }

    #[test]
    fn grid_invariants() {
        assert!(GridSpec::new(301, 301, 0.75 / 128.0, 1.25e-11, 1024, 10).is_ok());
        assert!(GridSpec::new(301, 301, 0.75 / 128.0, 1.4e-11, 1024, 10).is_err());
        assert!(GridSpec::new(301, 301, 0.75 / 128.0, 1.25e-11, 1024, 7).is_err());
        assert!(GridSpec::new(20, 301, 0.75 / 128.0, 1.25e-11, 1024, 10).is_err());
        assert!(GridSpec::new(301, 301, 0.75 / 128.0, 1.25e-11, 0, 10).is_err());
    }

    #[test]
    fn material_invariants() {
        let mut m = MaterialGrid::vacuum(4, 4);
        assert!(m.validate().is_ok());
        m.eps_r[[1, 1]] = 0.5;
        assert!(m.validate().is_err());
        let mut m = MaterialGrid::vacuum(4, 4);
        m.sigma[[2, 2]] = -0.1;
        assert!(m.validate().is_err());
    }

    #[test]
    fn probe_sampling_schedule() {
        let p = ProbeSet { cells: vec![], decimation: 8 };
        assert_eq!(p.n_samples(1024), 128);
        assert_eq!(p.sample_at(6), None);
        assert_eq!(p.sample_at(7), Some(0));
        assert_eq!(p.sample_at(1023), Some(127));
    }
}
