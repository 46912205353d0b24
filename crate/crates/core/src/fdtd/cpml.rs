//! Convolutional PML coefficient profiles (Roden & Gedney form).
//!
//! Each axis carries one profile for the integer (`E_z`) node positions and
//! one for the half-integer (`H`) positions. Inside the layer the recursive
//! convolution is `psi <- b psi + c dF`, and the stretched derivative becomes
//! `dF / kappa + psi`.

use serde::{Deserialize, Serialize};

use super::{EPS0, ETA0};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpmlParams {
    /// Polynomial grading order for sigma and kappa.
    pub order: f64,
    /// Peak conductivity as a multiple of `(order + 1) / (dx eta0)`.
    pub sigma_factor: f64,
    pub kappa_max: f64,
    /// Complex-frequency shift at the inner interface (S/m), graded linearly to 0.
    pub alpha_max: f64,
}

impl Default for CpmlParams {
    fn default() -> Self {
        CpmlParams { order: 3.0, sigma_factor: 0.8, kappa_max: 5.0, alpha_max: 0.05 }
    }
}

/// Coefficients along one axis for one staggering.
#[derive(Debug, Clone)]
pub struct CpmlProfile {
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub kappa: Vec<f64>,
    /// Node indices with non-zero depth, i.e. where the psi recursion runs.
    pub active: Vec<usize>,
}

impl CpmlProfile {
    /// Profile for `len` nodes at positions `p + offset`, `p = 0..len`, on an
    /// axis of `n` E-nodes with `pml` cells of absorber on each side.
    pub(crate) fn new(params: &CpmlParams, n: usize, pml: usize, offset: f64, len: usize, dx: f64, dt: f64) -> Self {
        let thickness = pml as f64;
        let inner_hi = (n - 1 - pml) as f64;
        let sigma_max = params.sigma_factor * (params.order + 1.0) / (dx * ETA0);

        let mut b = vec![0.0; len];
        let mut c = vec![0.0; len];
        let mut kappa = vec![1.0; len];
        let mut active = Vec::new();
        for p in 0..len {
            let x = p as f64 + offset;
            let depth = if x < thickness {
                (thickness - x) / thickness
            } else if x > inner_hi {
                (x - inner_hi) / thickness
            } else {
                0.0
            };
            if depth <= 0.0 {
                continue;
            }
            let depth = depth.min(1.0);
            let graded = depth.powf(params.order);
            let sigma = sigma_max * graded;
            let k = 1.0 + (params.kappa_max - 1.0) * graded;
            let alpha = params.alpha_max * (1.0 - depth);
            let bp = (-(sigma / k + alpha) * dt / EPS0).exp();
            kappa[p] = k;
            b[p] = bp;
            c[p] = if sigma > 0.0 { sigma * (bp - 1.0) / (k * (sigma + k * alpha)) } else { 0.0 };
            active.push(p);
        }
        CpmlProfile { b, c, kappa, active }
    }
}
