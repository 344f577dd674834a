use fld_core::classical::{solve_classical, Stop};
use fld_core::scenes::{make_noise_sphere, make_point_source};
use fld_core::solver::{max_flux_ratio, solve, solve_with_boundary};
use fld_core::{Boundary, FluxLimiter, GridDims, Precision, ScalarField, SolverConfig, Voxel};
use proptest::prelude::*;

const FLUX_TOL: f64 = 1e-3;

fn config(limiter: FluxLimiter, omega: f64, tol: f64) -> SolverConfig {
    let mut c = SolverConfig::default().with_limiter(limiter).with_omega(omega);
    c.conv_tol = tol;
    c
}

#[test]
fn converged_fld_solutions_respect_flux_limit() {
    let scene = make_noise_sphere(24, 5).unwrap();
    let m = &scene.channels[0];
    for limiter in FluxLimiter::FLUX_LIMITING {
        let r = solve(&m.sigma_t, &m.albedo, &m.emission, &config(limiter, 1.5, 1e-6)).unwrap();
        assert!(r.converged, "{limiter:?}");
        let ratio = max_flux_ratio(&r.phi, &r.diffusion).unwrap();
        assert!(ratio <= 1.0 + FLUX_TOL, "{limiter:?}: |E|/phi = {ratio}");
    }
    let ps = make_point_source(21, 4.0, 0.6).unwrap();
    let m = &ps.channels[0];
    let r = solve(&m.sigma_t, &m.albedo, &m.emission, &config(FluxLimiter::LevermorePomraning, 1.7, 1e-6)).unwrap();
    assert!(r.converged);
    assert!(max_flux_ratio(&r.phi, &r.diffusion).unwrap() <= 1.0 + FLUX_TOL);
}

#[test]
fn constant_limiter_matches_classical_reference() {
    let scene = make_noise_sphere(20, 9).unwrap();
    let m = &scene.channels[0];
    let cfg = config(FluxLimiter::Cda, 1.6, 1e-8);
    let fld = solve(&m.sigma_t, &m.albedo, &m.emission, &cfg).unwrap();
    let cda = solve_classical(&m.sigma_t, &m.albedo, &m.emission, &cfg, Stop::Converged).unwrap();
    assert!(fld.converged && cda.converged);
    assert_eq!(fld.iterations, cda.iterations);
    let scale = cda.phi.max();
    for (a, b) in fld.phi.data().iter().zip(cda.phi.data()) {
        assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
    }
}

#[test]
fn noise_sphere_converges_for_each_omega() {
    let scene = make_noise_sphere(24, 1).unwrap();
    let m = &scene.channels[0];
    let mut previous = usize::MAX;
    for omega in [1.0, 1.2, 1.5, 1.8] {
        let r = solve(&m.sigma_t, &m.albedo, &m.emission, &config(FluxLimiter::LevermorePomraning, omega, 1e-6)).unwrap();
        assert!(r.converged, "omega {omega}: {}", r.final_residual());
        assert!(r.iterations < previous, "over-relaxation should not slow convergence here");
        previous = r.iterations;
        assert!(r.phi.data().iter().all(|&v| v >= 0.0 && v.is_finite()));
    }
}

#[test]
fn single_precision_converges_with_vacuum() {
    let scene = make_noise_sphere(24, 2).unwrap();
    let m = &scene.channels[0];
    assert_eq!(m.sigma_t.min(), 0.0);
    let mut cfg = config(FluxLimiter::LevermorePomraning, 1.5, 1e-4).with_precision(Precision::Single);
    cfg.sigma_eps = 1e-3;
    let single = solve(&m.sigma_t, &m.albedo, &m.emission, &cfg).unwrap();
    assert!(single.converged);
    cfg.precision = Precision::Double;
    let double = solve(&m.sigma_t, &m.albedo, &m.emission, &cfg).unwrap();
    let diff = single.phi.zip_map(&double.phi, |a, b| a - b).unwrap();
    assert!(diff.rms() < 1e-3 * double.phi.rms());
}

#[test]
fn exact_boundary_reproduces_supplied_values() {
    let d = GridDims::cube(9, 1.0).unwrap();
    let sigma = ScalarField::constant(d, 3.0);
    let albedo = ScalarField::constant(d, 0.5);
    let mut j = ScalarField::zeros(d);
    j.set(Voxel::new(4, 4, 4), 1.0);
    let value = |v: Voxel| 0.01 * (1 + v.i + v.j + v.k) as f64;
    let r = solve_with_boundary(&sigma, &albedo, &j, &config(FluxLimiter::Cda, 1.5, 1e-9), Boundary::Values(&value)).unwrap();
    for idx in 0..d.len() {
        let v = d.voxel(idx);
        if d.is_boundary(v) {
            assert_eq!(r.phi.get(v), value(v));
            assert!((r.diffusion.get(v) - 1.0 / 9.0).abs() < 1e-15);
        }
    }
}

/// The threaded pass computes each color from a snapshot while the serial
/// pass updates in place, so equal bits mean update order does not matter.
#[test]
fn update_order_does_not_change_result() {
    let scene = make_noise_sphere(19, 4).unwrap();
    let m = &scene.channels[0];
    let cfg = config(FluxLimiter::LevermorePomraning, 1.5, 1e-6);
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| solve(&m.sigma_t, &m.albedo, &m.emission, &cfg).unwrap())
    };
    let serial = run(1);
    let threaded = run(4);
    assert_eq!(serial.iterations, threaded.iterations);
    assert_eq!(serial.residual_history, threaded.residual_history);
    assert_eq!(serial.phi, threaded.phi);
    assert_eq!(serial.diffusion, threaded.diffusion);
}

fn small_medium() -> impl Strategy<Value = (ScalarField, ScalarField, ScalarField)> {
    let d = GridDims::cube(7, 1.0).unwrap();
    let n = d.len();
    (
        proptest::collection::vec(0.0f64..20.0, n),
        proptest::collection::vec(0.0f64..=1.0, n),
        proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], n),
    )
        .prop_filter("emission must be non-zero", |(_, _, j)| j.iter().any(|&x| x > 0.0))
        .prop_map(move |(s, a, j)| {
            (
                ScalarField::from_vec(d, s).unwrap(),
                ScalarField::from_vec(d, a).unwrap(),
                ScalarField::from_vec(d, j).unwrap(),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solutions_are_nonnegative_and_deterministic((s, a, j) in small_medium(), omega in 1.0f64..1.8) {
        let cfg = config(FluxLimiter::LevermorePomraning, omega, 1e-5);
        let first = solve(&s, &a, &j, &cfg).unwrap();
        prop_assert!(first.phi.data().iter().all(|&v| v >= 0.0 && v.is_finite()));
        prop_assert!(first.residual_history.iter().all(|r| r.is_finite()));
        let second = solve(&s, &a, &j, &cfg).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn classical_solution_scales_with_emission((s, a, j) in small_medium()) {
        let cfg = config(FluxLimiter::Cda, 1.5, 1e-7);
        let base = solve(&s, &a, &j, &cfg).unwrap();
        let doubled = solve(&s, &a, &j.map(|x| 2.0 * x), &cfg).unwrap();
        prop_assert_eq!(base.iterations, doubled.iterations);
        for (x, y) in base.phi.data().iter().zip(doubled.phi.data()) {
            prop_assert!((2.0 * x - y).abs() <= 1e-12 * y.abs().max(1e-300));
        }
    }

    #[test]
    fn converged_lp_solution_is_flux_limited((s, a, j) in small_medium()) {
        let r = solve(&s, &a, &j, &config(FluxLimiter::LevermorePomraning, 1.4, 1e-7)).unwrap();
        prop_assume!(r.converged);
        prop_assert!(max_flux_ratio(&r.phi, &r.diffusion).unwrap() <= 1.0 + FLUX_TOL);
    }
}
