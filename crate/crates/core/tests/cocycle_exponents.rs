use hamflow::catalog;
use hamflow::domination::{
    anosov_diagnostic, conservation_identity_residual_with, domination_scan, domination_scan_with, Classification, Directions,
};
use hamflow::flow::IntegratorConfig;
use hamflow::lyapunov::{
    angle_between, integrated_le, oseledets_splitting, upper_exponent, RenormalizedProduct,
};
use hamflow::poincare::{block_schedule, cocycle_blocks, compose, normal_cocycle, transversal_cocycle};
use hamflow::sampling::SurfaceRegion;
use hamflow::symplectic::Box4;
use hamflow::{Error, HamiltonianSystem, Mat2, Vec2, Vec4};
use proptest::prelude::*;

fn hyperbolic() -> HamiltonianSystem {
    catalog::system("hyperbolic-drift").unwrap()
}

fn cfg() -> IntegratorConfig {
    IntegratorConfig::default()
}

#[test]
fn hyperbolic_cocycle_is_the_matrix_exponential() {
    // Frame at the origin is (e2, e4); the fiber block of exp(tA) with A = [[0,-1],[-1,0]].
    let c = transversal_cocycle(&hyperbolic(), &Vec4::zeros(), 1.0, &cfg()).unwrap();
    let (ch, sh) = (1f64.cosh(), 1f64.sinh());
    assert!((c.phi - Mat2::new(ch, -sh, -sh, ch)).amax() < 1e-6);
    assert!(c.area_residual() < 1e-9);
}

#[test]
fn translation_cocycle_is_identity() {
    let sys = catalog::system("translation").unwrap();
    let c = transversal_cocycle(&sys, &Vec4::zeros(), 2.0, &cfg()).unwrap();
    assert!((c.phi - Mat2::identity()).amax() < 1e-12);
    assert_eq!(c.t, 2.0);
}

#[test]
fn composition_follows_the_orbit() {
    let sys = catalog::system("elliptic-drift").unwrap();
    let y0 = Vec4::new(0.0, 0.3, 0.0, 0.1);
    let blocks = cocycle_blocks(&sys, &y0, 2, 1.0, &cfg()).unwrap();
    let c = compose(&blocks[0], &blocks[1]).unwrap();
    assert_eq!(c.t, 2.0);
    let direct = transversal_cocycle(&sys, &y0, 2.0, &cfg()).unwrap();
    assert!((c.phi - direct.phi).amax() < 1e-12);
    assert!(matches!(compose(&blocks[1], &blocks[0]), Err(Error::FrameMismatch { .. })));
}

#[test]
fn block_schedule_covers_the_window() {
    assert_eq!(block_schedule(0.0), (0, 0.0));
    assert_eq!(block_schedule(3.0), (3, 1.0));
    assert_eq!(block_schedule(2.5), (3, 2.5 / 3.0));
    assert_eq!(block_schedule(-2.0), (2, -1.0));
}

#[test]
fn normal_cocycle_keeps_the_fiber_block() {
    let sys = catalog::system("quadratic(0.5,0.2,0,0.1,1,0,0.3,0.7,0.1,0.9)").unwrap();
    let y0 = Vec4::new(0.3, -0.1, 0.2, 0.4);
    let n = normal_cocycle(&sys, &y0, 2.0, &cfg()).unwrap();
    let t = transversal_cocycle(&sys, &y0, 2.0, &cfg()).unwrap();
    assert!(n.invariance_defect() < 1e-9, "defect {}", n.invariance_defect());
    let fiber = n.p.fixed_view::<2, 2>(0, 0).into_owned();
    assert!((fiber - t.phi).amax() < 1e-9);
}

#[test]
fn hyperbolic_exponent_and_splitting() {
    let sys = hyperbolic();
    let e = upper_exponent(&sys, &Vec4::zeros(), 20.0, &cfg()).unwrap();
    assert!((e.lambda_plus - 1.0).abs() < 1e-6);
    let s = oseledets_splitting(&sys, &Vec4::zeros(), 10.0, &cfg()).unwrap();
    // Unstable (1,-1), stable (1,1) in (y2, y4).
    let up = Vec2::new(1.0, -1.0).normalize();
    let down = Vec2::new(1.0, 1.0).normalize();
    assert!(angle_between(&s.n_plus, &up) < 1e-6);
    assert!(angle_between(&s.n_minus, &down) < 1e-6);
    assert!((s.angle - std::f64::consts::FRAC_PI_2).abs() < 1e-6);
}

#[test]
fn elliptic_orbit_has_no_splitting() {
    let sys = catalog::system("elliptic-drift").unwrap();
    let y0 = Vec4::new(0.0, 0.2, 0.0, 0.0);
    let e = upper_exponent(&sys, &y0, 50.0, &cfg()).unwrap();
    assert!(e.lambda_plus.abs() < 1e-3);
    assert!(matches!(oseledets_splitting(&sys, &y0, 10.0, &cfg()), Err(Error::TrivialSplitting { .. })));
}

#[test]
fn backward_blocks_invert_the_forward_cocycle() {
    let sys = catalog::system("quadratic(0.5,0.2,0,0.1,-1,0,0.3,0.7,0.1,0.9)").unwrap();
    let y0 = Vec4::new(0.1, 0.2, 0.3, 0.1);
    let fwd = cocycle_blocks(&sys, &y0, 3, 1.0, &cfg()).unwrap();
    let end = fwd.last().unwrap().dst.base;
    let bwd = cocycle_blocks(&sys, &end, 3, -1.0, &cfg()).unwrap();
    let pf = fwd.iter().fold(Mat2::identity(), |a, b| b.phi * a);
    let pb = bwd.iter().fold(Mat2::identity(), |a, b| b.phi * a);
    assert!((pb * pf - Mat2::identity()).amax() < 1e-8);
    assert!(matches!(upper_exponent(&sys, &y0, -1.0, &cfg()), Err(Error::Parameter(_))));
}

#[test]
fn renormalized_product_tracks_the_log_norm() {
    let m = Mat2::new(3.0, 1.0, 0.0, 1.0 / 3.0);
    let mut p = RenormalizedProduct::default();
    let mut direct = Mat2::identity();
    for _ in 0..30 {
        p.push(&m);
        direct = m * direct;
    }
    let exact = direct.svd(false, false).singular_values.max().ln();
    assert!((p.log_norm() - exact).abs() < 1e-9);
}

#[test]
fn integrated_exponent_on_a_hyperbolic_patch() {
    let sys = hyperbolic();
    // Small enough that every orbit stays in the linear regime for T = 10.
    let region = SurfaceRegion::new(0.0, Box4::cube(1e-6));
    let le = integrated_le(&sys, &region, 10.0, 200, 5, &cfg()).unwrap();
    assert!((le.value - 1.0).abs() < 0.05, "{}", le.value);
    assert!(matches!(integrated_le(&sys, &region, 10.0, 1, 5, &cfg()), Err(Error::Parameter(_))));
}

#[test]
fn hyperbolic_orbit_is_dominated_at_m_one() {
    let r = domination_scan(&hyperbolic(), &Vec4::zeros(), 1, 5.0, &cfg()).unwrap();
    assert_eq!(r.classification, Classification::Dominated(1));
    // Exact ratio is e^{-2}.
    assert!((r.worst - (-2f64).exp()).abs() < 1e-6);
}

#[test]
fn swapped_directions_are_not_dominated() {
    let up = Vec2::new(1.0, -1.0).normalize();
    let down = Vec2::new(1.0, 1.0).normalize();
    let dirs = Directions::Supplied { n_plus: down, n_minus: up };
    let r = domination_scan_with(&hyperbolic(), &Vec4::zeros(), 1, 3.0, dirs, &cfg()).unwrap();
    assert_eq!(r.classification, Classification::NotDominated);
    assert!((r.worst - 2f64.exp()).abs() < 1e-5);
}

#[test]
fn elliptic_orbit_is_trivially_not_dominated() {
    let sys = catalog::system("elliptic-drift").unwrap();
    let r = domination_scan(&sys, &Vec4::new(0.0, 0.2, 0.0, 0.0), 1, 3.0, &cfg()).unwrap();
    assert!(r.trivial);
    assert_eq!(r.classification, Classification::NotDominated);
    assert!(r.worst.is_infinite());
}

#[test]
fn conservation_identity_with_supplied_directions() {
    let sys = catalog::system("translation").unwrap();
    let a = Vec2::new(1.0, 0.0);
    let b = Vec2::new(0.6, 0.8);
    let r = conservation_identity_residual_with(&sys, &Vec4::zeros(), 3.0, a, b, &cfg()).unwrap();
    assert!(r < 1e-12);
    let up = Vec2::new(1.0, -1.0);
    let down = Vec2::new(1.0, 1.0);
    let r = conservation_identity_residual_with(&hyperbolic(), &Vec4::zeros(), 2.0, up, down, &cfg()).unwrap();
    assert!(r < 1e-8);
}

#[test]
fn anosov_diagnostic_examples() {
    let region = SurfaceRegion::new(0.0, Box4::cube(1e-6));
    let h = anosov_diagnostic(&hyperbolic(), &region, 5, 6, 5.0, 1, &cfg()).unwrap();
    assert!(h.satisfied);
    assert_eq!(h.contraction_m, 1);
    assert!((h.theta - (-2f64).exp()).abs() < 1e-3);
    let ell = catalog::system("elliptic-drift").unwrap();
    let e = anosov_diagnostic(&ell, &region, 2, 4, 3.0, 1, &cfg()).unwrap();
    assert!(!e.satisfied);
    assert_eq!(e.contraction_m, 0);
    assert!(matches!(anosov_diagnostic(&ell, &region, 2, 0, 3.0, 1, &cfg()), Err(Error::EmptySample)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cocycles_preserve_area(y in prop::array::uniform4(-0.5f64..0.5)) {
        let sys = catalog::system("quadratic(0.5,0.2,0,0.1,1,0,0.3,0.7,0.1,0.9)").unwrap();
        let y = Vec4::from(y);
        prop_assume!(sys.is_regular(&y) && sys.gradient(&y).unwrap().norm() > 0.1);
        let c = transversal_cocycle(&sys, &y, 1.0, &cfg()).unwrap();
        prop_assert!(c.area_residual() < 1e-8);
        // The flow direction is carried to itself, so the fiber block loses nothing.
        let n = normal_cocycle(&sys, &y, 1.0, &cfg()).unwrap();
        prop_assert!(n.invariance_defect() < 1e-8);
    }

    #[test]
    fn exponent_is_subadditive(t1 in 1usize..4, t2 in 1usize..4) {
        let sys = catalog::system("quadratic(0.5,0.2,0,0.1,-1,0,0.3,0.7,0.1,0.9)").unwrap();
        let y0 = Vec4::new(0.1, 0.2, 0.3, 0.1);
        let blocks = cocycle_blocks(&sys, &y0, t1 + t2, 1.0, &cfg()).unwrap();
        let prod = |bs: &[hamflow::poincare::TransversalCocycle]| {
            bs.iter().fold(Mat2::identity(), |a, b| b.phi * a).svd(false, false).singular_values.max().ln()
        };
        let whole = prod(&blocks);
        prop_assert!(whole <= prod(&blocks[..t1]) + prod(&blocks[t1..]) + 1e-9);
    }
}
