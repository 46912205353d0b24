//! Adjoint-gradient inversion of receiver traces for permittivity and
//! conductivity images.
//!
//! The misfit is `F(p) = 1/2 sum_{receivers, samples} (E(p) - E_mea)^2 dt_s`,
//! where `E(p)` is the scattered field predicted for the images `p`. Its
//! gradient is assembled from one forward run (with the imaging-region `E_z`
//! history kept) and one discrete adjoint sweep. Updates use projected
//! steepest descent with Armijo backtracking.

mod problem;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

pub use problem::{Evaluation, Problem};

use crate::error::{Error, Result};
use crate::metrics::pmse;
use crate::scenario::{Measurement, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub max_iters: usize,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo_c: f64,
    /// Step shrink factor per backtrack.
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// First trial step along `-grad`. `None` picks the step whose largest
    /// permittivity update is 0.5.
    pub initial_step: Option<f64>,
    pub eps_bounds: (f64, f64),
    pub sigma_bounds: (f64, f64),
    /// Stop once an accepted step lowers the misfit by less than this fraction.
    pub stop_rel_tol: f64,
    pub invert_sigma: bool,
    /// Weight of `1/2 ||p - p_background||^2`. Zero disables it.
    pub tikhonov: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            max_iters: 50,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 30,
            initial_step: None,
            eps_bounds: (1.0, 12.0),
            sigma_bounds: (0.0, 0.5),
            stop_rel_tol: 1e-6,
            invert_sigma: false,
            tikhonov: 0.0,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::invalid(format!("inversion config: {m}")));
        if !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return bad("armijo_c must lie in (0, 1)");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if let Some(s) = self.initial_step {
            if !(s > 0.0 && s.is_finite()) {
                return bad("initial_step must be positive");
            }
        }
        let (lo, hi) = self.eps_bounds;
        if !(lo >= 1.0 && hi > lo && hi.is_finite()) {
            return bad("eps bounds must satisfy 1 <= lo < hi");
        }
        let (lo, hi) = self.sigma_bounds;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return bad("sigma bounds must satisfy 0 <= lo < hi");
        }
        if self.stop_rel_tol.is_nan() || self.stop_rel_tol < 0.0 {
            return bad("stop_rel_tol must be non-negative");
        }
        if !(self.tikhonov >= 0.0 && self.tikhonov.is_finite()) {
            return bad("tikhonov weight must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    /// Relative decrease fell below `stop_rel_tol`, or the misfit is zero.
    Converged,
    /// No projected step passed the Armijo test.
    Stagnated,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InversionState {
    pub eps: Array2<f64>,
    pub sigma: Array2<f64>,
    pub grad_eps: Array2<f64>,
    pub grad_sigma: Array2<f64>,
    /// Objective before the first update and after every accepted step.
    pub objective: Vec<f64>,
    /// PMSE of `eps` against the truth at the same points, when a truth is given.
    pub pmse: Vec<f64>,
    /// Accepted step lengths.
    pub steps: Vec<f64>,
    pub iterations: usize,
    pub stop: StopReason,
}

/// Ground truth for progress reporting: permittivity image and PMSE scale.
#[derive(Debug, Clone, Copy)]
pub struct Truth<'a> {
    pub eps: &'a Array2<f64>,
    pub scale: f64,
}

/// Penalized objective and its gradient at `(eps, sigma)`.
struct Point {
    eps: Array2<f64>,
    sigma: Array2<f64>,
    value: f64,
    grad_eps: Array2<f64>,
    grad_sigma: Array2<f64>,
}

struct Driver<'p, 'a> {
    problem: &'p Problem<'a>,
    cfg: &'p InversionConfig,
}

impl Driver<'_, '_> {
    fn penalty(&self, eps: &Array2<f64>, sigma: &Array2<f64>) -> f64 {
        if self.cfg.tikhonov == 0.0 {
            return 0.0;
        }
        let mut s = eps.iter().map(|e| (e - 1.0).powi(2)).sum::<f64>();
        if self.cfg.invert_sigma {
            s += sigma.iter().map(|v| v * v).sum::<f64>();
        }
        0.5 * self.cfg.tikhonov * s
    }

    fn evaluate(&self, eps: &Array2<f64>, sigma: &Array2<f64>) -> Result<(f64, Evaluation)> {
        let ev = self.problem.evaluate(eps, sigma, true)?;
        Ok((ev.objective + self.penalty(eps, sigma), ev))
    }

    fn point(&self, eps: Array2<f64>, sigma: Array2<f64>, value: f64, ev: &Evaluation) -> Result<Point> {
        let (mut grad_eps, mut grad_sigma) = self.problem.gradient(ev)?;
        let w = self.cfg.tikhonov;
        if w > 0.0 {
            Zip::from(&mut grad_eps).and(&eps).for_each(|g, &e| *g += w * (e - 1.0));
            Zip::from(&mut grad_sigma).and(&sigma).for_each(|g, &s| *g += w * s);
        }
        if !self.cfg.invert_sigma {
            grad_sigma.fill(0.0);
        }
        Ok(Point { eps, sigma, value, grad_eps, grad_sigma })
    }
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn norm(a: &Array2<f64>) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Reconstructs images from the scattered-field `measured` traces, starting
/// from vacuum.
pub fn invert(
    measured: &Measurement,
    cfg: &InversionConfig,
    sc: &Scenario,
    truth: Option<Truth<'_>>,
) -> Result<InversionState> {
    let problem = Problem::new(sc, measured)?;
    invert_problem(&problem, cfg, truth)
}

/// [`invert`] for a prepared [`Problem`].
pub fn invert_problem(
    problem: &Problem<'_>,
    cfg: &InversionConfig,
    truth: Option<Truth<'_>>,
) -> Result<InversionState> {
    cfg.validate()?;
    let sc = problem.scenario;
    let n = sc.imaging_cells;
    if let Some(t) = truth {
        if t.eps.dim() != (n, n) {
            return Err(Error::ShapeMismatch { expected: (n, n), got: t.eps.dim() });
        }
    }
    let drv = Driver { problem, cfg };
    let (eps_lo, eps_hi) = cfg.eps_bounds;
    let (sig_lo, sig_hi) = cfg.sigma_bounds;
    let eps0 = Array2::from_elem((n, n), 1.0f64.clamp(eps_lo, eps_hi));
    let sig0 = Array2::from_elem((n, n), 0.0f64.clamp(sig_lo, sig_hi));
    let (f0, ev) = drv.evaluate(&eps0, &sig0)?;
    let mut x = drv.point(eps0, sig0, f0, &ev)?;
    drop(ev);

    let score = |eps: &Array2<f64>| -> Result<Option<f64>> { truth.map(|t| pmse(t.eps, eps, t.scale)).transpose() };
    let mut objective = vec![x.value];
    let mut pmse_hist: Vec<f64> = score(&x.eps)?.into_iter().collect();
    let mut steps = Vec::new();

    // Conductivity directions are rescaled so that both parameters move by a
    // comparable fraction of their admissible range.
    let sigma_scale = if cfg.invert_sigma {
        let (ge, gs) = (norm(&x.grad_eps), norm(&x.grad_sigma));
        if ge > 0.0 && gs > 0.0 {
            (ge / gs) * (sig_hi - sig_lo) / (eps_hi - eps_lo)
        } else {
            1.0
        }
    } else {
        0.0
    };

    let mut stop = StopReason::MaxIters;
    let mut iterations = 0;
    if x.value == 0.0 {
        stop = StopReason::Converged;
    }
    while stop == StopReason::MaxIters && iterations < cfg.max_iters {
        let d_eps = x.grad_eps.mapv(|g| -g);
        let d_sig = x.grad_sigma.mapv(|g| -sigma_scale * g);
        let step0 = match cfg.initial_step {
            Some(s) => s,
            None => {
                let (me, ms) = (max_abs(&d_eps), max_abs(&d_sig));
                if me > 0.0 {
                    0.5 / me
                } else if ms > 0.0 {
                    0.5 * (sig_hi - sig_lo) / (eps_hi - eps_lo) / ms
                } else {
                    stop = StopReason::Converged;
                    break;
                }
            }
        };

        let mut accepted = None;
        let mut step = step0;
        for _ in 0..=cfg.max_backtracks {
            let eps_t = Zip::from(&x.eps).and(&d_eps).map_collect(|&p, &d| (p + step * d).clamp(eps_lo, eps_hi));
            let sig_t = Zip::from(&x.sigma).and(&d_sig).map_collect(|&p, &d| (p + step * d).clamp(sig_lo, sig_hi));
            let slope = Zip::from(&x.grad_eps).and(&eps_t).and(&x.eps).fold(0.0, |s, &g, &a, &b| s + g * (a - b))
                + Zip::from(&x.grad_sigma).and(&sig_t).and(&x.sigma).fold(0.0, |s, &g, &a, &b| s + g * (a - b));
            if slope.is_nan() || slope >= 0.0 {
                // The projected step no longer points downhill.
                break;
            }
            let (f, ev) = drv.evaluate(&eps_t, &sig_t)?;
            if f <= x.value + cfg.armijo_c * slope {
                accepted = Some((eps_t, sig_t, f, ev));
                break;
            }
            step *= cfg.backtrack;
        }
        let Some((eps_t, sig_t, f, ev)) = accepted else {
            stop = StopReason::Stagnated;
            break;
        };
        iterations += 1;
        let rel = (x.value - f) / x.value;
        x = drv.point(eps_t, sig_t, f, &ev)?;
        drop(ev);
        objective.push(f);
        steps.push(step);
        if let Some(p) = score(&x.eps)? {
            pmse_hist.push(p);
        }
        if f == 0.0 || rel < cfg.stop_rel_tol {
            stop = StopReason::Converged;
        }
    }

    Ok(InversionState {
        eps: x.eps,
        sigma: x.sigma,
        grad_eps: x.grad_eps,
        grad_sigma: x.grad_sigma,
        objective,
        pmse: pmse_hist,
        steps,
        iterations,
        stop,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert!(InversionConfig::default().validate().is_ok());
    }

    #[test]
    fn config_rejects_bad_values() {
        let d = InversionConfig::default();
        let cases = [
            InversionConfig { armijo_c: 0.0, ..d.clone() },
            InversionConfig { backtrack: 1.0, ..d.clone() },
            InversionConfig { initial_step: Some(-1.0), ..d.clone() },
            InversionConfig { eps_bounds: (0.5, 12.0), ..d.clone() },
            InversionConfig { eps_bounds: (3.0, 2.0), ..d.clone() },
            InversionConfig { sigma_bounds: (-0.1, 0.5), ..d.clone() },
            InversionConfig { stop_rel_tol: f64::NAN, ..d.clone() },
            InversionConfig { tikhonov: -1.0, ..d },
        ];
        for c in cases {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn config_roundtrips_through_json() {
        let c = InversionConfig { invert_sigma: true, initial_step: Some(2.0), ..Default::default() };
        let back: InversionConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
