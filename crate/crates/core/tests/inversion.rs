//! Short end-to-end inversion runs on the canonical scenario.

use ndarray::Array2;
use tdinv::inversion::{invert, invert_problem, InversionConfig, Problem, StopReason, Truth};
use tdinv::phantom::{from_shapes, Shape};
use tdinv::scenario::{default_scenario, Measurement};

#[test]
fn empty_domain_converges_immediately() {
    let sc = default_scenario();
    let incident = sc.incident().unwrap();
    let zero = Measurement::new(Array2::zeros(incident.dim()), sc.sample_dt).unwrap();
    let problem = Problem::with_incident(&sc, &zero, incident).unwrap();
    let st = invert_problem(&problem, &InversionConfig::default(), None).unwrap();
    assert_eq!(st.stop, StopReason::Converged);
    assert_eq!(st.iterations, 0);
    assert_eq!(st.objective, vec![0.0]);
    assert!(st.eps.iter().all(|&e| e == 1.0));
}

#[test]
fn lossy_inversion_decreases_misfit_within_bounds() {
    let sc = default_scenario();
    let p = from_shapes(&[Shape::Circle { cx: 60.0, cy: 70.0, radius: 14.0, eps: 3.0, sigma: 0.1 }]);
    let measured = sc.simulate_image(&p.eps, Some(&p.sigma)).unwrap().minus(&sc.incident().unwrap()).unwrap();
    let before = measured.clone();
    let cfg = InversionConfig {
        max_iters: 3,
        invert_sigma: true,
        eps_bounds: (1.0, 1.2),
        sigma_bounds: (0.0, 0.02),
        ..Default::default()
    };
    let st = invert(&measured, &cfg, &sc, Some(Truth { eps: &p.eps, scale: 3.0 })).unwrap();
    assert_eq!(measured, before);
    assert_eq!(st.iterations, 3);
    assert_eq!(st.objective.len(), 4);
    assert_eq!(st.pmse.len(), 4);
    assert!(st.objective.windows(2).all(|w| w[1] < w[0]), "{:?}", st.objective);
    assert!(st.eps.iter().all(|&e| (1.0..=1.2).contains(&e)));
    assert!(st.sigma.iter().all(|&s| (0.0..=0.02).contains(&s)));
    assert!(st.eps.iter().any(|&e| e > 1.0), "permittivity never updated");
    assert!(st.sigma.iter().any(|&s| s > 0.0), "conductivity never updated");
}
