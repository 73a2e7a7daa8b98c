use approx::assert_relative_eq;
use proptest::prelude::*;
use sobolab::geometry::{build_grid, integrate, CuspDomain, IntegrateConfig, Region, Verdict};
use sobolab::{Error, ExtendedReal};

fn h1() -> Region {
    Region::Cusp(CuspDomain::lipschitz(2).unwrap())
}

fn value(v: &ExtendedReal) -> f64 {
    v.to_f64()
}

#[test]
fn membership_examples() {
    let d = CuspDomain::new(vec![2.0]).unwrap();
    assert!(d.contains(&[0.01, 0.5]).unwrap());
    assert!(!d.contains(&[0.3, 0.5]).unwrap());
    let l = CuspDomain::new(vec![1.0]).unwrap();
    assert!(l.contains(&[0.4, 0.5]).unwrap());
    assert!(matches!(d.contains(&[0.1, 0.2, 0.3]), Err(Error::Dimension { .. })));
}

#[test]
fn aggregate_gamma_examples() {
    assert_eq!(CuspDomain::new(vec![2.0]).unwrap().gamma(), 3.0);
    let h = CuspDomain::new(vec![1.0, 1.0]).unwrap();
    assert_eq!(h.gamma(), 3.0);
    assert!(h.is_lipschitz());
    assert_eq!(CuspDomain::new(vec![2.0, 3.0]).unwrap().gamma(), 6.0);
    assert_eq!(CuspDomain::new(vec![2.0, 3.0]).unwrap().sigma(), 2.5);
}

#[test]
fn grid_is_finer_near_the_tip() {
    let g = build_grid(&h1(), 3, 1.0).unwrap();
    let height = |c: &sobolab::geometry::GridCell| c.hi[1] - c.lo[1];
    let low = g.cells.iter().filter(|c| c.lo[1] == 0.0).map(height).fold(f64::INFINITY, f64::min);
    let high = g.cells.iter().filter(|c| (c.hi[1] - 1.0).abs() < 1e-12).map(height).fold(0.0, f64::max);
    assert!(low < high);
}

#[test]
fn uniform_grid_on_box() {
    let b = Region::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] };
    let g = build_grid(&b, 1, 0.0).unwrap();
    let w0 = g.cells[0].weight;
    assert!(g.cells.iter().all(|c| (c.weight - w0).abs() < 1e-15));
    assert_relative_eq!(g.total_weight(), 1.0, max_relative = 1e-14);
}

#[test]
fn grid_measure_equals_cusp_volume() {
    let d = Region::Cusp(CuspDomain::new(vec![2.0]).unwrap());
    let g = build_grid(&d, 5, 1.0).unwrap();
    assert_relative_eq!(g.total_weight(), 1.0 / 3.0, max_relative = 1e-12);
}

#[test]
fn integrate_examples() {
    let cfg = IntegrateConfig::default();
    let one = integrate(|_| 1.0, &h1(), &cfg).unwrap();
    assert_eq!(one.verdict, Verdict::Finite);
    assert_relative_eq!(value(&one.value), 0.5, max_relative = 1e-9);

    let div = integrate(|x| x[1].powi(-2), &h1(), &cfg).unwrap();
    assert_eq!(div.verdict, Verdict::Divergent);
    assert_eq!(div.value, ExtendedReal::Infinite);

    let half = integrate(|x| x[1].powf(-0.5), &h1(), &cfg).unwrap();
    assert_eq!(half.verdict, Verdict::Finite);
    assert_relative_eq!(value(&half.value), 2.0 / 3.0, max_relative = 1e-3);
}

#[test]
fn nan_integrand_is_an_evaluation_error() {
    let r = integrate(|_| f64::NAN, &h1(), &IntegrateConfig::default());
    assert!(matches!(r, Err(Error::Evaluation(_))));
}

#[test]
fn ball_and_box_volumes() {
    let cfg = IntegrateConfig::default();
    let ball = Region::Ball { center: vec![0.0, 0.0, 0.0], radius: 2.0 };
    let v = integrate(|_| 1.0, &ball, &cfg).unwrap();
    assert_relative_eq!(value(&v.value), 4.0 / 3.0 * std::f64::consts::PI * 8.0, max_relative = 1e-9);
    let b = Region::Box { lo: vec![0.0, -1.0], hi: vec![2.0, 1.0] };
    let v = integrate(|x| x[0], &b, &cfg).unwrap();
    assert_relative_eq!(value(&v.value), 4.0, max_relative = 1e-9);
}

// ∫_{H_1} x_n^{-β} = 1/(2-β) in the plane
fn power_oracle(beta: f64) -> f64 {
    1.0 / (2.0 - beta)
}

#[test]
fn refinement_error_does_not_increase() {
    for beta in [0.0, 0.5, 1.0, 1.5] {
        let cfg = IntegrateConfig { tol: 1e-14, ..Default::default() };
        let v = integrate(|x| x[1].powf(-beta), &h1(), &cfg).unwrap();
        let exact = power_oracle(beta);
        let e = &v.estimates;
        let k = e.len();
        assert!(k >= 2);
        assert!((e[k - 1] - exact).abs() <= (e[k - 2] - exact).abs() * (1.0 + 1e-9) + 1e-15, "beta {beta}: {e:?}");
    }
}

#[test]
fn nonnegative_estimates_do_not_decrease() {
    // cells only subdivide toward the tip; uncovered mass shrinks
    let cfg = IntegrateConfig { tol: 1e-14, ..Default::default() };
    let v = integrate(|x| x[1].powf(-1.5), &h1(), &cfg).unwrap();
    assert!(v.estimates.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)), "{:?}", v.estimates);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn integrate_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, beta in 0.0f64..1.5, gamma1 in 1.0f64..3.0) {
        let region = Region::Cusp(CuspDomain::new(vec![gamma1]).unwrap());
        let cfg = IntegrateConfig::default();
        let f = |x: &[f64]| x[1].powf(-beta);
        let g = |x: &[f64]| x[0] + 1.0;
        let vf = integrate(f, &region, &cfg).unwrap();
        let vg = integrate(g, &region, &cfg).unwrap();
        let vh = integrate(|x: &[f64]| a * f(x) + b * g(x), &region, &cfg).unwrap();
        prop_assume!(vf.is_finite() && vg.is_finite() && vh.is_finite());
        let expect = a * value(&vf.value) + b * value(&vg.value);
        let scale = a.abs() * value(&vf.value) + b.abs() * value(&vg.value);
        prop_assert!((value(&vh.value) - expect).abs() <= 1e-2 * scale + 1e-12);
    }

    #[test]
    fn cusp_volume_matches_grid(gs in proptest::collection::vec(1.0f64..4.0, 1..3), levels in 1u32..5) {
        let d = CuspDomain::new(gs).unwrap();
        let vol = d.volume();
        let g = build_grid(&Region::Cusp(d), levels, 1.0).unwrap();
        prop_assert!((g.total_weight() - vol).abs() <= 1e-12 * vol);
    }

    #[test]
    fn nodes_are_interior(gs in proptest::collection::vec(1.0f64..4.0, 1..3), levels in 1u32..4) {
        let d = CuspDomain::new(gs).unwrap();
        let g = build_grid(&Region::Cusp(d.clone()), levels, 2.0).unwrap();
        for c in &g.cells {
            prop_assert!(d.contains(&c.node).unwrap());
        }
    }
}
