//! Fixtures shared by the integration tests.
#![allow(dead_code)]

use ndarray::Array2;
use tdinv::phantom::{from_shapes, Shape};
use tdinv::rng::Stream;
use tdinv::scenario::{Measurement, Scenario};

pub const TEST_STREAM: u64 = 99;

pub fn bump(cx: f64, cy: f64, width: f64) -> Array2<f64> {
    Array2::from_shape_fn((128, 128), |(r, c)| {
        let d2 = (c as f64 + 0.5 - cx).powi(2) + (r as f64 + 0.5 - cy).powi(2);
        (-d2 / (2.0 * width * width)).exp()
    })
}

/// A lossy, smoothly varying point away from the parameter bounds.
pub fn base_point() -> (Array2<f64>, Array2<f64>) {
    let eps = bump(50.0, 70.0, 15.0) * 0.6 + 1.4;
    let sigma = bump(80.0, 50.0, 12.0) * 0.02 + 0.03;
    (eps, sigma)
}

/// Scattered field of an off-centre lossy disc.
pub fn disc_measurement(sc: &Scenario, incident: &Measurement) -> Measurement {
    let p = from_shapes(&[Shape::Circle { cx: 64.0, cy: 60.0, radius: 15.0, eps: 2.5, sigma: 0.05 }]);
    sc.simulate_image(&p.eps, Some(&p.sigma)).unwrap().minus(incident).unwrap()
}

/// Sum of three Gaussian bumps with random centres, widths and signs.
pub fn smooth_direction(rng: &mut Stream) -> Array2<f64> {
    let mut d = Array2::zeros((128, 128));
    for _ in 0..3 {
        let (cx, cy) = (rng.range(20.0, 108.0), rng.range(20.0, 108.0));
        d = d + bump(cx, cy, rng.range(6.0, 20.0)) * rng.normal();
    }
    d
}

pub fn dot(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
