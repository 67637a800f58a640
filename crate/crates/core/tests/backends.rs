#![cfg(feature = "parallel")]

use dirichlet_shift::bundle::{curvature_pi1_closed, frame_ensemble, spiral_points, thm32_report, BundleConfig, EnsembleSpec};
use dirichlet_shift::exec::{map_parallel, map_sequential};
use dirichlet_shift::green::{green_potential, DensityField, QuadratureSpec};

#[test]
fn backends_agree_bit_for_bit() {
    let pts = spiral_points(40, 0.9);
    let a = map_sequential(&pts, |&p| curvature_pi1_closed(p));
    let b = map_parallel(&pts, |&p| curvature_pi1_closed(p));
    assert_eq!(a, b);

    let q = QuadratureSpec {
        radial_nodes: 48,
        angular_nodes: 32,
        ..QuadratureSpec::default()
    };
    let rho = DensityField::abs_sq();
    let few = &pts[..6];
    let a = map_sequential(few, |&p| green_potential(p, &rho, &q).unwrap().value);
    let b = map_parallel(few, |&p| green_potential(p, &rho, &q).unwrap().value);
    assert_eq!(a, b);

    let frames = frame_ensemble(1, &EnsembleSpec { count: 2, ..EnsembleSpec::default() }).unwrap();
    let cfg = BundleConfig { truncation: 40, ..BundleConfig::default() };
    let jobs: Vec<_> = frames.iter().flat_map(|f| spiral_points(2, 0.5).into_iter().map(move |p| (f, p))).collect();
    let a = map_sequential(&jobs, |(f, p)| thm32_report(f, *p, &cfg).unwrap());
    let b = map_parallel(&jobs, |(f, p)| thm32_report(f, *p, &cfg).unwrap());
    assert_eq!(a, b);
}
