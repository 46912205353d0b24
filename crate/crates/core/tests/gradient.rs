//! Adjoint and gradient consistency on the canonical scenario. The
//! inner-product identity and directional-derivative checks live in the
//! acceptance suite.

mod common;

use common::{base_point, disc_measurement, TEST_STREAM};
use ndarray::Array2;
use rayon::prelude::*;
use tdinv::inversion::Problem;
use tdinv::rng::Stream;
use tdinv::scenario::default_scenario;

#[test]
fn adjoint_is_linear_in_residual() {
    let sc = default_scenario();
    let (eps, sigma) = base_point();
    let solver = sc.solver(&sc.embed_image(&eps, Some(&sigma)).unwrap()).unwrap();
    let probes = sc.probes();
    let mut rng = Stream::new(5, TEST_STREAM);
    let dims = (sc.n_receivers, sc.n_samples);
    let r1 = Array2::from_shape_fn(dims, |_| rng.normal());
    let r2 = Array2::from_shape_fn(dims, |_| rng.normal());
    let src = Some(sc.transmitter);
    let run = |r: &Array2<f64>| solver.adjoint_sweep(r, &probes, src, |_, _| {}).unwrap();
    let (s1, s2) = (run(&r1), run(&r2));
    let s12 = run(&(&r1 * 2.0 - &r2 * 3.0));
    let scale = s12.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 0..s12.len() {
        assert!((s12[k] - (2.0 * s1[k] - 3.0 * s2[k])).abs() <= 1e-10 * scale);
    }
}

#[test]
fn misfit_vanishes_at_truth() {
    let sc = default_scenario();
    let (eps, sigma) = base_point();
    let incident = sc.incident().unwrap();
    let meas = sc.simulate_image(&eps, Some(&sigma)).unwrap().minus(&incident).unwrap();
    let problem = Problem::with_incident(&sc, &meas, incident).unwrap();
    let ev = problem.evaluate(&eps, &sigma, true).unwrap();
    assert_eq!(ev.objective, 0.0);
    let (ge, gs) = problem.gradient(&ev).unwrap();
    assert!(ge.iter().chain(gs.iter()).all(|&g| g == 0.0));
}

#[test]
fn gradient_matches_single_pixel_perturbations() {
    let sc = default_scenario();
    let incident = sc.incident().unwrap();
    let meas = disc_measurement(&sc, &incident);
    let problem = Problem::with_incident(&sc, &meas, incident).unwrap();
    let (eps, sigma) = base_point();
    let (ge, gs) = problem.gradient(&problem.evaluate(&eps, &sigma, true).unwrap()).unwrap();
    let mut rng = Stream::new(7, TEST_STREAM);
    let picks: Vec<(usize, usize, bool)> =
        (0..14).map(|k| (rng.int_inclusive(10, 117), rng.int_inclusive(10, 117), k >= 10)).collect();
    let results: Vec<(f64, f64)> = picks
        .par_iter()
        .map(|&(r, c, is_sigma)| {
            let h = if is_sigma { 1e-3 } else { 1e-2 };
            let f = |s: f64| {
                let (mut e, mut g) = (eps.clone(), sigma.clone());
                if is_sigma {
                    g[[r, c]] += s;
                } else {
                    e[[r, c]] += s;
                }
                problem.objective(&e, &g).unwrap()
            };
            let fd = (f(h) - f(-h)) / (2.0 * h);
            (fd, if is_sigma { gs[[r, c]] } else { ge[[r, c]] })
        })
        .collect();
    for ((r, c, is_sigma), (fd, an)) in picks.iter().zip(results) {
        let rel = (fd - an).abs() / an.abs();
        assert!(rel < 1e-2, "pixel ({r},{c}) sigma={is_sigma}: fd {fd:e} vs adjoint {an:e}");
    }
}

#[test]
fn zero_residuals_give_zero_adjoint() {
    let sc = default_scenario();
    let (eps, sigma) = base_point();
    let solver = sc.solver(&sc.embed_image(&eps, Some(&sigma)).unwrap()).unwrap();
    let zero = Array2::zeros((sc.n_receivers, sc.n_samples));
    let out = solver.adjoint_run(&zero, &sc.probes(), Some(sc.transmitter), Some(sc.imaging_window())).unwrap();
    let h = out.history.unwrap();
    assert!((0..h.n_frames()).all(|k| h.frame(k).iter().all(|&v| v == 0.0)));
    assert!(out.source_sensitivity.iter().all(|&v| v == 0.0));
}
