//! Fixed measurement geometry and the mapping between 128x128 material
//! images and the full FDTD domain.
//!
//! Images are indexed `[row, col]` with row 0 at the top (largest `y`). Pixel
//! `(r, c)` occupies grid cell `(image_i0 + c, image_j_top - r)`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdtd::{ricker_waveform, Cell, GridSpec, MaterialGrid, ProbeSet, Solver, SourceSpec, Window};

/// Pulse parameters for the soft `J_z` transmitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Ricker centre frequency (Hz).
    pub fc: f64,
    /// Peak current density (A/m^2).
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Side of the square imaging region (m).
    pub imaging_side: f64,
    /// Image raster, pixels per side.
    pub imaging_cells: usize,
    pub ring_radius: f64,
    pub n_receivers: usize,
    /// Transmitter angle on the ring (rad), counter-clockwise from `+x`.
    pub tx_angle: f64,
    pub n_samples: usize,
    /// Recording interval (s).
    pub sample_dt: f64,
    /// Internal steps per recorded sample.
    pub decimation: usize,
    pub pulse: Pulse,
    pub grid: GridSpec,
    /// Ring centre cell.
    pub center: Cell,
    pub image_i0: usize,
    pub image_j_top: usize,
    /// Snapped receiver cells; these define the geometry everywhere.
    pub receivers: Vec<Cell>,
    pub transmitter: Cell,
}

pub fn default_scenario() -> Scenario {
    Scenario::with_refinement(1).expect("canonical scenario is valid")
}

impl Scenario {
    /// Canonical geometry with every cell subdivided `refine` times per axis.
    ///
    /// Physical sizes, the pulse, the receiver angles and the recorded sample
    /// times are unchanged; `dx`, `dt` shrink by `refine`.
    pub fn with_refinement(refine: usize) -> Result<Self> {
        if refine == 0 {
            return Err(Error::invalid("refinement factor must be positive"));
        }
        let imaging_side = 0.75;
        let imaging_cells = 128 * refine;
        let dx = imaging_side / imaging_cells as f64;
        let dt = 1.25e-11 / refine as f64;
        let pml = 10 * refine;
        let half = 140 * refine + pml;
        let n = 2 * half + 1;
        let decimation = 8 * refine;
        let n_samples = 128;
        let grid = GridSpec::new(n, n, dx, dt, decimation * n_samples, pml)?;
        let ring_radius = 0.75;
        let n_receivers = 128;
        let tx_angle = 0.0;
        let center = (half, half);
        let receivers = ring_cells(center, ring_radius / dx, n_receivers, tx_angle);
        let sc = Scenario {
            imaging_side,
            imaging_cells,
            ring_radius,
            n_receivers,
            tx_angle,
            n_samples,
            sample_dt: decimation as f64 * dt,
            decimation,
            pulse: Pulse { fc: 1.0e9, amplitude: 1.0 },
            grid,
            center,
            image_i0: half - imaging_cells / 2,
            image_j_top: half + imaging_cells / 2 - 1,
            transmitter: receivers[0],
            receivers,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.receivers.len() != self.n_receivers || self.n_receivers == 0 {
            return Err(Error::invalid("receiver list does not match n_receivers"));
        }
        if self.decimation * self.n_samples > self.grid.n_steps {
            return Err(Error::invalid("recording window exceeds the simulated steps"));
        }
        let n = self.imaging_cells;
        if self.image_i0 + n > self.grid.nx || self.image_j_top + 1 < n || self.image_j_top >= self.grid.ny {
            return Err(Error::invalid("imaging region exceeds the grid"));
        }
        let pml = self.grid.pml_cells;
        let inside = |(i, j): Cell| i > pml && j > pml && i + pml + 1 < self.grid.nx && j + pml + 1 < self.grid.ny;
        if !self.receivers.iter().chain([&self.transmitter]).all(|&c| inside(c)) {
            return Err(Error::invalid("ring reaches into the CPML"));
        }
        if self.receivers.iter().any(|&c| self.in_imaging_region(c)) {
            return Err(Error::invalid("receiver inside the imaging region"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        self.grid.dx
    }

    /// Recording window length (s).
    pub fn window(&self) -> f64 {
        self.n_samples as f64 * self.sample_dt
    }

    pub fn in_imaging_region(&self, (i, j): Cell) -> bool {
        let n = self.imaging_cells;
        i >= self.image_i0 && i < self.image_i0 + n && j <= self.image_j_top && j + n > self.image_j_top
    }

    /// Position of `cell` relative to the ring centre (m).
    pub fn cell_position(&self, (i, j): Cell) -> (f64, f64) {
        let dx = self.grid.dx;
        ((i as f64 - self.center.0 as f64) * dx, (j as f64 - self.center.1 as f64) * dx)
    }

    /// Imaging region as an `E_z` capture window.
    pub fn imaging_window(&self) -> Window {
        let n = self.imaging_cells;
        Window { i0: self.image_i0, j0: self.image_j_top + 1 - n, ni: n, nj: n }
    }

    /// Window-local index of image pixel `(r, c)`.
    pub fn window_index(&self, r: usize, c: usize) -> usize {
        let n = self.imaging_cells;
        c * n + (n - 1 - r)
    }

    /// Reorders a field on [`Scenario::imaging_window`] into image layout.
    pub fn window_to_image(&self, w: &[f64]) -> Array2<f64> {
        let n = self.imaging_cells;
        Array2::from_shape_fn((n, n), |(r, c)| w[self.window_index(r, c)])
    }

    pub fn source(&self) -> SourceSpec {
        SourceSpec {
            cell: self.transmitter,
            waveform: ricker_waveform(self.pulse.fc, self.grid.dt, self.grid.n_steps, self.pulse.amplitude),
        }
    }

    pub fn probes(&self) -> ProbeSet {
        ProbeSet { cells: self.receivers.clone(), decimation: self.decimation }
    }

    /// Full-domain material with `eps` (and `sigma`) inside the imaging
    /// square and vacuum elsewhere.
    pub fn embed_image(&self, eps: &Array2<f64>, sigma: Option<&Array2<f64>>) -> Result<MaterialGrid> {
        let n = self.imaging_cells;
        check_image(eps, n, "permittivity", 1.0)?;
        if let Some(s) = sigma {
            check_image(s, n, "conductivity", 0.0)?;
        }
        let mut mat = MaterialGrid::vacuum(self.grid.nx, self.grid.ny);
        for ((r, c), &v) in eps.indexed_iter() {
            mat.eps_r[[self.image_i0 + c, self.image_j_top - r]] = v;
        }
        if let Some(s) = sigma {
            for ((r, c), &v) in s.indexed_iter() {
                mat.sigma[[self.image_i0 + c, self.image_j_top - r]] = v;
            }
        }
        Ok(mat)
    }

    /// Permittivity and conductivity images read back from the imaging square.
    pub fn extract_image(&self, mat: &MaterialGrid) -> Result<(Array2<f64>, Array2<f64>)> {
        if mat.dim() != (self.grid.nx, self.grid.ny) {
            return Err(Error::ShapeMismatch { expected: (self.grid.nx, self.grid.ny), got: mat.dim() });
        }
        let n = self.imaging_cells;
        let pick =
            |a: &Array2<f64>| Array2::from_shape_fn((n, n), |(r, c)| a[[self.image_i0 + c, self.image_j_top - r]]);
        Ok((pick(&mat.eps_r), pick(&mat.sigma)))
    }

    /// Solver for this grid and `mat`.
    pub fn solver(&self, mat: &MaterialGrid) -> Result<Solver> {
        Solver::new(&self.grid, mat)
    }

    /// Receiver traces for `mat`.
    pub fn simulate(&self, mat: &MaterialGrid) -> Result<Measurement> {
        let out = self.solver(mat)?.run(&self.source(), &self.probes(), None)?;
        Measurement::new(out.traces, self.sample_dt)
    }

    /// Receiver traces with the imaging square filled from `eps` and `sigma`.
    pub fn simulate_image(&self, eps: &Array2<f64>, sigma: Option<&Array2<f64>>) -> Result<Measurement> {
        self.simulate(&self.embed_image(eps, sigma)?)
    }

    /// Traces for the empty (vacuum) domain.
    pub fn incident(&self) -> Result<Measurement> {
        self.simulate(&MaterialGrid::vacuum(self.grid.nx, self.grid.ny))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_image(a: &Array2<f64>, n: usize, what: &str, min: f64) -> Result<()> {
    if a.dim() != (n, n) {
        return Err(Error::ShapeMismatch { expected: (n, n), got: a.dim() });
    }
    if let Some(v) = a.iter().find(|v| !(**v >= min && v.is_finite())) {
        return Err(Error::invalid(format!("{what} image value {v} is below {min} or not finite")));
    }
    Ok(())
}

/// `n` cells evenly spaced on a circle of `radius_cells` around `center`,
/// snapped to the nearest node.
pub fn ring_cells(center: Cell, radius_cells: f64, n: usize, angle0: f64) -> Vec<Cell> {
    (0..n)
        .map(|k| {
            let th = angle0 + std::f64::consts::TAU * k as f64 / n as f64;
            let di = (radius_cells * th.cos()).round() as isize;
            let dj = (radius_cells * th.sin()).round() as isize;
            ((center.0 as isize + di) as usize, (center.1 as isize + dj) as usize)
        })
        .collect()
}

/// Receiver traces: rows are receivers, columns are time samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub values: Array2<f64>,
    /// Sample interval (s).
    pub sample_dt: f64,
}

impl Measurement {
    pub fn new(values: Array2<f64>, sample_dt: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("measurement contains non-finite values"));
        }
        if sample_dt.is_nan() || sample_dt <= 0.0 {
            return Err(Error::invalid("sample interval must be positive"));
        }
        Ok(Measurement { values, sample_dt })
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    /// `self - other`, sample by sample.
    pub fn minus(&self, other: &Measurement) -> Result<Measurement> {
        if self.dim() != other.dim() {
            return Err(Error::ShapeMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(Measurement { values: &self.values - &other.values, sample_dt: self.sample_dt })
    }
}
