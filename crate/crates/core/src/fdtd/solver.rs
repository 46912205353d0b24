use ndarray::Array2;

use super::cpml::{CpmlParams, CpmlProfile};
use super::{Cell, GridSpec, MaterialGrid, ProbeSet, SourceSpec};
use crate::error::{Error, Result};

/// Rectangular block of `E_z` cells, `i0..i0 + ni` by `j0..j0 + nj`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub i0: usize,
    pub j0: usize,
    pub ni: usize,
    pub nj: usize,
}

impl Window {
    pub fn len(&self) -> usize {
        self.ni * self.nj
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn gather(&self, ny: usize, field: &[f64], out: &mut [f64]) {
        for a in 0..self.ni {
            let src = (self.i0 + a) * ny + self.j0;
            out[a * self.nj..(a + 1) * self.nj].copy_from_slice(&field[src..src + self.nj]);
        }
    }

    /// Flat grid index of window cell `c` (row-major within the window).
    pub fn grid_index(&self, ny: usize, c: usize) -> usize {
        (self.i0 + c / self.nj) * ny + self.j0 + c % self.nj
    }
}

/// `E_z` restricted to a window, one frame per time level.
#[derive(Debug, Clone)]
pub struct EzHistory {
    pub window: Window,
    n_frames: usize,
    data: Vec<f64>,
}

impl EzHistory {
    fn zeros(window: Window, n_frames: usize) -> Self {
        EzHistory { window, n_frames, data: vec![0.0; window.len() * n_frames] }
    }

    pub fn n_frames(&self) -> usize {
        self.n_frames
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        let n = self.window.len();
        &self.data[k * n..(k + 1) * n]
    }

    fn frame_mut(&mut self, k: usize) -> &mut [f64] {
        let n = self.window.len();
        &mut self.data[k * n..(k + 1) * n]
    }
}

/// Electromagnetic state, including the CPML convolution memories.
///
/// The same layout holds the adjoint variables during a reverse sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    ez: Vec<f64>,
    hx: Vec<f64>,
    hy: Vec<f64>,
    /// Memory for `dH_y/dx` in the `E_z` update.
    psi_ez_x: Vec<f64>,
    /// Memory for `dH_x/dy` in the `E_z` update.
    psi_ez_y: Vec<f64>,
    /// Memory for `dE_z/dy` in the `H_x` update.
    psi_hx: Vec<f64>,
    /// Memory for `dE_z/dx` in the `H_y` update.
    psi_hy: Vec<f64>,
}

impl FieldState {
    pub fn new(grid: &GridSpec) -> Self {
        let n = grid.n_cells();
        FieldState {
            ez: vec![0.0; n],
            hx: vec![0.0; n],
            hy: vec![0.0; n],
            psi_ez_x: vec![0.0; n],
            psi_ez_y: vec![0.0; n],
            psi_hx: vec![0.0; n],
            psi_hy: vec![0.0; n],
        }
    }

    pub fn ez(&self) -> &[f64] {
        &self.ez
    }

    /// `H_x` at `(i, j + 1/2)`; the last column is padding and stays zero.
    pub fn hx(&self) -> &[f64] {
        &self.hx
    }

    /// `H_y` at `(i + 1/2, j)`; the last row is padding and stays zero.
    pub fn hy(&self) -> &[f64] {
        &self.hy
    }

    pub fn is_zero(&self) -> bool {
        [&self.ez, &self.hx, &self.hy, &self.psi_ez_x, &self.psi_ez_y, &self.psi_hx, &self.psi_hy]
            .iter()
            .all(|f| f.iter().all(|&v| v == 0.0))
    }

    fn is_finite(&self) -> bool {
        self.ez.iter().all(|v| v.is_finite())
    }
}

/// Output of a forward run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Recorded `E_z`, probes by samples.
    pub traces: Array2<f64>,
    /// `E_z` on the capture window for time levels `0..=n_steps`.
    pub history: Option<EzHistory>,
}

/// Output of an adjoint sweep.
#[derive(Debug, Clone)]
pub struct AdjointOutput {
    /// Adjoint `E_z` on the capture window; frame `k` is the sensitivity of
    /// the objective to `E_z` at time level `k + 1`, for `k in 0..n_steps`.
    pub history: Option<EzHistory>,
    /// Sensitivity to the source amplitude of every internal step.
    pub source_sensitivity: Vec<f64>,
}

/// Update coefficients for one material map on one grid.
///
/// The forward step is linear in the fields; [`Solver::adjoint_step`] applies
/// its exact transpose, sub-update by sub-update in reverse order.
#[derive(Debug, Clone)]
pub struct Solver {
    grid: GridSpec,
    eps_r: Vec<f64>,
    sigma: Vec<f64>,
    ca: Vec<f64>,
    cb: Vec<f64>,
    /// `cb / dx`.
    cbd: Vec<f64>,
    /// `dt / mu0`.
    ch: f64,
    /// `dt / (mu0 dx)`.
    chd: f64,
    e_x: Profile,
    e_y: Profile,
    h_x: Profile,
    h_y: Profile,
}

/// CPML profile with `1/kappa` and `c/dx` precomputed, and active nodes
/// clipped to the updated range.
#[derive(Debug, Clone)]
struct Profile {
    b: Vec<f64>,
    c: Vec<f64>,
    inv_kappa: Vec<f64>,
    active: Vec<usize>,
}

impl Profile {
    fn from_cpml(p: CpmlProfile, dx: f64, range: std::ops::Range<usize>) -> Self {
        Profile {
            inv_kappa: p.kappa.iter().map(|k| 1.0 / k).collect(),
            c: p.c.iter().map(|c| c / dx).collect(),
            b: p.b,
            active: p.active.into_iter().filter(|a| range.contains(a)).collect(),
        }
    }
}

impl Solver {
    pub fn new(grid: &GridSpec, mat: &MaterialGrid) -> Result<Self> {
        Self::with_cpml(grid, mat, &CpmlParams::default())
    }

    pub fn with_cpml(grid: &GridSpec, mat: &MaterialGrid, cpml: &CpmlParams) -> Result<Self> {
        grid.validate()?;
        mat.validate()?;
        if mat.dim() != (grid.nx, grid.ny) {
            return Err(Error::ShapeMismatch { expected: (grid.nx, grid.ny), got: mat.dim() });
        }
        let (nx, ny, dx, dt) = (grid.nx, grid.ny, grid.dx, grid.dt);
        let eps_r: Vec<f64> = mat.eps_r.iter().copied().collect();
        let sigma: Vec<f64> = mat.sigma.iter().copied().collect();
        let mut ca = vec![0.0; nx * ny];
        let mut cb = vec![0.0; nx * ny];
        for i in 1..nx - 1 {
            for j in 1..ny - 1 {
                let idx = i * ny + j;
                let eps = grid.eps0 * eps_r[idx];
                let loss = 0.5 * sigma[idx] * dt;
                ca[idx] = (eps - loss) / (eps + loss);
                cb[idx] = dt / (eps + loss);
            }
        }
        let cbd = cb.iter().map(|c| c / dx).collect();
        let pml = grid.pml_cells;
        Ok(Solver {
            grid: grid.clone(),
            eps_r,
            sigma,
            ca,
            cb,
            cbd,
            ch: dt / grid.mu0,
            chd: dt / (grid.mu0 * dx),
            e_x: Profile::from_cpml(CpmlProfile::new(cpml, nx, pml, 0.0, nx, dx, dt), dx, 1..nx - 1),
            e_y: Profile::from_cpml(CpmlProfile::new(cpml, ny, pml, 0.0, ny, dx, dt), dx, 1..ny - 1),
            h_x: Profile::from_cpml(CpmlProfile::new(cpml, nx, pml, 0.5, nx - 1, dx, dt), dx, 0..nx - 1),
            h_y: Profile::from_cpml(CpmlProfile::new(cpml, ny, pml, 0.5, ny - 1, dx, dt), dx, 0..ny - 1),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn eps_r(&self) -> &[f64] {
        &self.eps_r
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// `E_z` self-coefficient `(1 - sigma dt / 2 eps) / (1 + sigma dt / 2 eps)`.
    pub fn ca(&self) -> &[f64] {
        &self.ca
    }

    /// `E_z` curl coefficient `dt / (eps + sigma dt / 2)`.
    pub fn cb(&self) -> &[f64] {
        &self.cb
    }

    fn check_cell(&self, cell: Cell, what: &str) -> Result<usize> {
        let (i, j) = cell;
        if i == 0 || j == 0 || i + 1 >= self.grid.nx || j + 1 >= self.grid.ny {
            return Err(Error::invalid(format!("{what} cell {cell:?} is outside the updated interior")));
        }
        Ok(self.grid.idx(cell))
    }

    fn check_window(&self, w: &Window) -> Result<()> {
        if w.i0 + w.ni > self.grid.nx || w.j0 + w.nj > self.grid.ny {
            return Err(Error::invalid(format!("capture window {w:?} exceeds the grid")));
        }
        Ok(())
    }

    /// Advances `state` by internal step `k` of `src`.
    pub fn step(&self, state: &mut FieldState, src: &SourceSpec, k: usize) -> Result<()> {
        if k >= self.grid.n_steps {
            return Err(Error::invalid(format!("step {k} is beyond n_steps {}", self.grid.n_steps)));
        }
        let idx = self.check_cell(src.cell, "source")?;
        let amp = src.waveform.get(k).copied().unwrap_or(0.0);
        self.step_raw(state, Some((idx, amp)));
        if !state.is_finite() {
            return Err(Error::Unstable { step: k });
        }
        Ok(())
    }

    fn step_raw(&self, s: &mut FieldState, src: Option<(usize, f64)>) {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (ch, chd) = (self.ch, self.chd);

        // H_x -= dt/mu0 * (dEz/dy / kappa + psi)
        for i in 0..nx {
            let r = i * ny;
            for j in 0..ny - 1 {
                s.hx[r + j] -= chd * self.h_y.inv_kappa[j] * (s.ez[r + j + 1] - s.ez[r + j]);
            }
        }
        // H_y += dt/mu0 * (dEz/dx / kappa + psi)
        for i in 0..nx - 1 {
            let r = i * ny;
            let f = chd * self.h_x.inv_kappa[i];
            for j in 0..ny {
                s.hy[r + j] += f * (s.ez[r + ny + j] - s.ez[r + j]);
            }
        }
        for i in 0..nx {
            let r = i * ny;
            for &j in &self.h_y.active {
                let p = &mut s.psi_hx[r + j];
                *p = self.h_y.b[j] * *p + self.h_y.c[j] * (s.ez[r + j + 1] - s.ez[r + j]);
                s.hx[r + j] -= ch * *p;
            }
        }
        for &i in &self.h_x.active {
            let r = i * ny;
            let (b, c) = (self.h_x.b[i], self.h_x.c[i]);
            for j in 0..ny {
                let p = &mut s.psi_hy[r + j];
                *p = b * *p + c * (s.ez[r + ny + j] - s.ez[r + j]);
                s.hy[r + j] += ch * *p;
            }
        }

        // E_z = ca E_z + cb (dHy/dx / kappa - dHx/dy / kappa + psi_x - psi_y - J)
        for i in 1..nx - 1 {
            let r = i * ny;
            let kx = self.e_x.inv_kappa[i];
            for j in 1..ny - 1 {
                let idx = r + j;
                let curl = (s.hy[idx] - s.hy[idx - ny]) * kx - (s.hx[idx] - s.hx[idx - 1]) * self.e_y.inv_kappa[j];
                s.ez[idx] = self.ca[idx] * s.ez[idx] + self.cbd[idx] * curl;
            }
        }
        if let Some((idx, amp)) = src {
            s.ez[idx] -= self.cb[idx] * amp;
        }
        for &i in &self.e_x.active {
            let r = i * ny;
            let (b, c) = (self.e_x.b[i], self.e_x.c[i]);
            for j in 1..ny - 1 {
                let idx = r + j;
                let p = &mut s.psi_ez_x[idx];
                *p = b * *p + c * (s.hy[idx] - s.hy[idx - ny]);
                s.ez[idx] += self.cb[idx] * *p;
            }
        }
        for i in 1..nx - 1 {
            let r = i * ny;
            for &j in &self.e_y.active {
                let idx = r + j;
                let p = &mut s.psi_ez_y[idx];
                *p = self.e_y.b[j] * *p + self.e_y.c[j] * (s.hx[idx] - s.hx[idx - 1]);
                s.ez[idx] -= self.cb[idx] * *p;
            }
        }
    }

    /// Applies the transpose of one forward step to the adjoint state `a`.
    ///
    /// Returns the sensitivity to the source amplitude at `src` for the step
    /// being reversed.
    pub fn adjoint_step(&self, a: &mut FieldState, src: Option<Cell>) -> Result<f64> {
        let idx = src.map(|c| self.check_cell(c, "source")).transpose()?;
        Ok(self.adjoint_step_raw(a, idx))
    }

    fn adjoint_step_raw(&self, a: &mut FieldState, src: Option<usize>) -> f64 {
        let (nx, ny) = (self.grid.nx, self.grid.ny);
        let (ch, chd) = (self.ch, self.chd);

        for i in 1..nx - 1 {
            let r = i * ny;
            for &j in &self.e_y.active {
                let idx = r + j;
                a.psi_ez_y[idx] -= self.cb[idx] * a.ez[idx];
                let t = self.e_y.c[j] * a.psi_ez_y[idx];
                a.hx[idx] += t;
                a.hx[idx - 1] -= t;
                a.psi_ez_y[idx] *= self.e_y.b[j];
            }
        }
        for &i in &self.e_x.active {
            let r = i * ny;
            let (b, c) = (self.e_x.b[i], self.e_x.c[i]);
            for j in 1..ny - 1 {
                let idx = r + j;
                a.psi_ez_x[idx] += self.cb[idx] * a.ez[idx];
                let t = c * a.psi_ez_x[idx];
                a.hy[idx] += t;
                a.hy[idx - ny] -= t;
                a.psi_ez_x[idx] *= b;
            }
        }
        let src_sens = src.map_or(0.0, |idx| -self.cb[idx] * a.ez[idx]);
        for i in 1..nx - 1 {
            let r = i * ny;
            let kx = self.e_x.inv_kappa[i];
            for j in 1..ny - 1 {
                let idx = r + j;
                let w = self.cbd[idx] * a.ez[idx];
                let wx = w * kx;
                let wy = w * self.e_y.inv_kappa[j];
                a.hy[idx] += wx;
                a.hy[idx - ny] -= wx;
                a.hx[idx] -= wy;
                a.hx[idx - 1] += wy;
                a.ez[idx] *= self.ca[idx];
            }
        }

        for &i in &self.h_x.active {
            let r = i * ny;
            let (b, c) = (self.h_x.b[i], self.h_x.c[i]);
            for j in 0..ny {
                let idx = r + j;
                a.psi_hy[idx] += ch * a.hy[idx];
                let t = c * a.psi_hy[idx];
                a.ez[idx + ny] += t;
                a.ez[idx] -= t;
                a.psi_hy[idx] *= b;
            }
        }
        for i in 0..nx {
            let r = i * ny;
            for &j in &self.h_y.active {
                let idx = r + j;
                a.psi_hx[idx] -= ch * a.hx[idx];
                let t = self.h_y.c[j] * a.psi_hx[idx];
                a.ez[idx + 1] += t;
                a.ez[idx] -= t;
                a.psi_hx[idx] *= self.h_y.b[j];
            }
        }
        for i in 0..nx - 1 {
            let r = i * ny;
            let f = chd * self.h_x.inv_kappa[i];
            for j in 0..ny {
                let t = f * a.hy[r + j];
                a.ez[r + ny + j] += t;
                a.ez[r + j] -= t;
            }
        }
        for i in 0..nx {
            let r = i * ny;
            for j in 0..ny - 1 {
                let t = chd * self.h_y.inv_kappa[j] * a.hx[r + j];
                a.ez[r + j + 1] -= t;
                a.ez[r + j] += t;
            }
        }

        // The PEC ring is not a state variable.
        for j in 0..ny {
            a.ez[j] = 0.0;
            a.ez[(nx - 1) * ny + j] = 0.0;
        }
        for i in 0..nx {
            a.ez[i * ny] = 0.0;
            a.ez[i * ny + ny - 1] = 0.0;
        }
        src_sens
    }

    fn check_probes(&self, probes: &ProbeSet) -> Result<(Vec<usize>, usize)> {
        if probes.decimation == 0 {
            return Err(Error::invalid("probe decimation must be positive"));
        }
        let n_samples = probes.n_samples(self.grid.n_steps);
        if n_samples == 0 {
            return Err(Error::invalid(format!(
                "decimation {} leaves no samples in {} steps",
                probes.decimation, self.grid.n_steps
            )));
        }
        let idx = probes.cells.iter().map(|&c| self.check_cell(c, "probe")).collect::<Result<_>>()?;
        Ok((idx, n_samples))
    }

    /// Runs the full time window, recording `E_z` at the probes every
    /// `decimation` steps and optionally the whole history on `capture`.
    pub fn run(&self, src: &SourceSpec, probes: &ProbeSet, capture: Option<Window>) -> Result<RunOutput> {
        let src_idx = self.check_cell(src.cell, "source")?;
        let (probe_idx, n_samples) = self.check_probes(probes)?;
        if let Some(w) = &capture {
            self.check_window(w)?;
        }
        let n_steps = self.grid.n_steps;
        let mut state = FieldState::new(&self.grid);
        let mut traces = Array2::zeros((probe_idx.len(), n_samples));
        let mut history = capture.map(|w| EzHistory::zeros(w, n_steps + 1));
        for k in 0..n_steps {
            let amp = src.waveform.get(k).copied().unwrap_or(0.0);
            self.step_raw(&mut state, Some((src_idx, amp)));
            if !state.is_finite() {
                return Err(Error::Unstable { step: k });
            }
            if let Some(s) = probes.sample_at(k).filter(|&s| s < n_samples) {
                for (p, &idx) in probe_idx.iter().enumerate() {
                    traces[[p, s]] = state.ez[idx];
                }
            }
            if let Some(h) = history.as_mut() {
                let w = h.window;
                w.gather(self.grid.ny, &state.ez, h.frame_mut(k + 1));
            }
        }
        Ok(RunOutput { traces, history })
    }

    /// Reverse sweep driven by `injections` (probes by samples) added to the
    /// adjoint `E_z` at the probe cells at each recording step.
    ///
    /// `visit(k, adjoint_ez)` sees the full-grid adjoint `E_z` for time level
    /// `k + 1` before step `k` is reversed.
    pub fn adjoint_sweep<F>(
        &self,
        injections: &Array2<f64>,
        probes: &ProbeSet,
        src: Option<Cell>,
        mut visit: F,
    ) -> Result<Vec<f64>>
    where
        F: FnMut(usize, &[f64]),
    {
        let (probe_idx, n_samples) = self.check_probes(probes)?;
        if injections.dim() != (probe_idx.len(), n_samples) {
            return Err(Error::ShapeMismatch { expected: (probe_idx.len(), n_samples), got: injections.dim() });
        }
        let src_idx = src.map(|c| self.check_cell(c, "source")).transpose()?;
        let n_steps = self.grid.n_steps;
        let mut adj = FieldState::new(&self.grid);
        let mut sens = vec![0.0; n_steps];
        for k in (0..n_steps).rev() {
            if let Some(s) = probes.sample_at(k).filter(|&s| s < n_samples) {
                for (p, &idx) in probe_idx.iter().enumerate() {
                    adj.ez[idx] += injections[[p, s]];
                }
            }
            visit(k, &adj.ez);
            sens[k] = self.adjoint_step_raw(&mut adj, src_idx);
            if !adj.is_finite() {
                return Err(Error::Unstable { step: k });
            }
        }
        Ok(sens)
    }

    /// [`Solver::adjoint_sweep`] collecting the adjoint history on `capture`.
    pub fn adjoint_run(
        &self,
        injections: &Array2<f64>,
        probes: &ProbeSet,
        src: Option<Cell>,
        capture: Option<Window>,
    ) -> Result<AdjointOutput> {
        if let Some(w) = &capture {
            self.check_window(w)?;
        }
        let ny = self.grid.ny;
        let mut history = capture.map(|w| EzHistory::zeros(w, self.grid.n_steps));
        let source_sensitivity = self.adjoint_sweep(injections, probes, src, |k, ez| {
            if let Some(h) = history.as_mut() {
                let w = h.window;
                w.gather(ny, ez, h.frame_mut(k));
            }
        })?;
        Ok(AdjointOutput { history, source_sensitivity })
    }
}
