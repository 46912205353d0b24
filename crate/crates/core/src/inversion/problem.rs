use ndarray::Array2;

use crate::error::{Error, Result};
use crate::fdtd::{EzHistory, Solver, EPS0};
use crate::scenario::{Measurement, Scenario};

/// Fixed data of one inversion: geometry, measured scattered field and the
/// incident field that converts solver traces to scattered traces.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub scenario: &'a Scenario,
    pub measured: &'a Measurement,
    incident: Measurement,
}

/// Objective value and everything needed to differentiate it.
#[derive(Debug)]
pub struct Evaluation {
    pub objective: f64,
    /// `E(p) - E_mea`, receivers by samples.
    pub residuals: Array2<f64>,
    solver: Solver,
    history: Option<EzHistory>,
}

impl<'a> Problem<'a> {
    pub fn new(scenario: &'a Scenario, measured: &'a Measurement) -> Result<Self> {
        let expected = (scenario.n_receivers, scenario.n_samples);
        if measured.dim() != expected {
            return Err(Error::ShapeMismatch { expected, got: measured.dim() });
        }
        Ok(Problem { scenario, measured, incident: scenario.incident()? })
    }

    /// Like [`Problem::new`] with an incident field computed elsewhere.
    pub fn with_incident(scenario: &'a Scenario, measured: &'a Measurement, incident: Measurement) -> Result<Self> {
        let expected = (scenario.n_receivers, scenario.n_samples);
        if measured.dim() != expected || incident.dim() != expected {
            return Err(Error::ShapeMismatch { expected, got: measured.dim() });
        }
        Ok(Problem { scenario, measured, incident })
    }

    pub fn incident(&self) -> &Measurement {
        &self.incident
    }

    /// Scattered traces predicted for the images `(eps, sigma)`.
    pub fn predict(&self, eps: &Array2<f64>, sigma: &Array2<f64>) -> Result<Measurement> {
        self.scenario.simulate_image(eps, Some(sigma))?.minus(&self.incident)
    }

    /// `E(p) - E_mea`.
    pub fn residuals(&self, eps: &Array2<f64>, sigma: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.predict(eps, sigma)?.values - &self.measured.values)
    }

    /// `1/2 sum r^2 * sample_dt`.
    pub fn misfit(&self, residuals: &Array2<f64>) -> f64 {
        0.5 * residuals.iter().map(|r| r * r).sum::<f64>() * self.scenario.sample_dt
    }

    /// One forward solve; keeps the imaging-region history when `with_history`.
    pub fn evaluate(&self, eps: &Array2<f64>, sigma: &Array2<f64>, with_history: bool) -> Result<Evaluation> {
        let sc = self.scenario;
        let solver = sc.solver(&sc.embed_image(eps, Some(sigma))?)?;
        let capture = with_history.then(|| sc.imaging_window());
        let out = solver.run(&sc.source(), &sc.probes(), capture)?;
        let residuals = out.traces - &self.incident.values - &self.measured.values;
        Ok(Evaluation { objective: self.misfit(&residuals), residuals, solver, history: out.history })
    }

    pub fn objective(&self, eps: &Array2<f64>, sigma: &Array2<f64>) -> Result<f64> {
        Ok(self.evaluate(eps, sigma, false)?.objective)
    }

    /// Gradients of the misfit with respect to the `eps` and `sigma` images,
    /// from one adjoint sweep over the evaluation's forward history.
    pub fn gradient(&self, eval: &Evaluation) -> Result<(Array2<f64>, Array2<f64>)> {
        let sc = self.scenario;
        let hist = eval.history.as_ref().ok_or_else(|| Error::invalid("evaluation was run without history"))?;
        let window = hist.window;
        let ny = sc.grid.ny;
        let dt = sc.grid.dt;
        let n = window.len();
        let cells: Vec<usize> = (0..n).map(|c| window.grid_index(ny, c)).collect();
        let solver = &eval.solver;
        let (ca, cb, eps_r, sigma) = (solver.ca(), solver.cb(), solver.eps_r(), solver.sigma());
        // d ca / d m and (d cb / d m) / cb, per window cell.
        let mut dca_e = vec![0.0; n];
        let mut dcb_e = vec![0.0; n];
        let mut dca_s = vec![0.0; n];
        let mut dcb_s = vec![0.0; n];
        let mut ca_w = vec![0.0; n];
        for (c, &g) in cells.iter().enumerate() {
            let cbg = cb[g];
            dca_e[c] = sigma[g] * EPS0 * cbg * cbg / dt;
            dcb_e[c] = -EPS0 * cbg / dt;
            dca_s[c] = -EPS0 * eps_r[g] * cbg * cbg / dt;
            dcb_s[c] = -0.5 * cbg;
            ca_w[c] = ca[g];
        }
        let injections = &eval.residuals * sc.sample_dt;
        let mut g_eps = vec![0.0; n];
        let mut g_sigma = vec![0.0; n];
        solver.adjoint_sweep(&injections, &sc.probes(), None, |k, adj| {
            let (f0, f1) = (hist.frame(k), hist.frame(k + 1));
            for c in 0..n {
                let lambda = adj[cells[c]];
                if lambda == 0.0 {
                    continue;
                }
                let q = f1[c] - ca_w[c] * f0[c];
                g_eps[c] += lambda * (dca_e[c] * f0[c] + dcb_e[c] * q);
                g_sigma[c] += lambda * (dca_s[c] * f0[c] + dcb_s[c] * q);
            }
        })?;
        Ok((sc.window_to_image(&g_eps), sc.window_to_image(&g_sigma)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::default_scenario;

    #[test]
    fn misfit_is_quadratic_in_residual() {
        let sc = default_scenario();
        let zero = Measurement::new(Array2::zeros((sc.n_receivers, sc.n_samples)), sc.sample_dt).unwrap();
        let p = Problem::with_incident(&sc, &zero, zero.clone()).unwrap();
        let r = Array2::from_shape_fn(zero.dim(), |(i, j)| ((i * 7 + j * 3) % 11) as f64 - 5.0);
        let f = p.misfit(&r);
        assert!(f > 0.0);
        assert_eq!(p.misfit(&(&r * 2.0)), 4.0 * f);
        let by_hand = 0.5 * r.iter().map(|v| v * v).sum::<f64>() * 1e-10;
        assert!((f - by_hand).abs() <= 1e-12 * f);
    }

    #[test]
    fn rejects_wrong_measurement_shape() {
        let sc = default_scenario();
        let bad = Measurement::new(Array2::zeros((3, 4)), sc.sample_dt).unwrap();
        assert!(matches!(Problem::with_incident(&sc, &bad, bad.clone()), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn gradient_needs_history() {
        let sc = default_scenario();
        let zero = Measurement::new(Array2::zeros((sc.n_receivers, sc.n_samples)), sc.sample_dt).unwrap();
        let p = Problem::with_incident(&sc, &zero, zero.clone()).unwrap();
        let img = Array2::from_elem((128, 128), 1.0);
        let ev = p.evaluate(&img, &Array2::zeros((128, 128)), false).unwrap();
        assert!(p.gradient(&ev).is_err());
    }
}
