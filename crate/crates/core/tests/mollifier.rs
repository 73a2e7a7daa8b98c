use approx::assert_relative_eq;
use proptest::prelude::*;
use sobolab::mollifier::{
    commutation_check, convergence_test, mollify, ConvergenceGrid, ConvolutionRule, MollifierKernel, MollifyDomain,
    MollifySpec, SmoothFunction,
};
use sobolab::weights::Weight;
use sobolab::Error;

fn spec(r: f64) -> MollifySpec {
    MollifySpec { r, delta: 0.2, p: 2.0, weight: Weight::power(2, 0.0).unwrap() }
}

fn square() -> MollifyDomain {
    MollifyDomain::Box { lo: vec![0.0, 0.0], hi: vec![1.0, 1.0] }
}

fn samples() -> Vec<Vec<f64>> {
    vec![vec![0.5, 0.5], vec![0.3, 0.7], vec![0.72, 0.35], vec![0.45, 0.6]]
}

// Σ over a fine polar grid of ω(z); the kernel must integrate to one
#[test]
fn kernel_has_unit_mass() {
    for n in 1..=3 {
        let k = MollifierKernel::new(n).unwrap();
        let m = 400;
        let h = 2.0 / m as f64;
        let mut total = 0.0;
        let mut idx = vec![0usize; n];
        'outer: loop {
            let z: Vec<f64> = idx.iter().map(|&i| -1.0 + (i as f64 + 0.5) * h).collect();
            total += k.eval(&z) * h.powi(n as i32);
            for d in 0..n {
                idx[d] += 1;
                if idx[d] < m {
                    continue 'outer;
                }
                idx[d] = 0;
            }
            break;
        }
        // the bump vanishes to all orders at the sphere, so the midpoint sum converges fast
        let tol = if n == 3 { 1e-6 } else { 1e-8 };
        assert!((total - 1.0).abs() < tol, "n = {n}: {total}");
        assert_eq!(k.eval(&vec![1.0; n]), 0.0);
    }
}

#[test]
fn mollify_examples() {
    let rule = ConvolutionRule::default();
    let x = [0.5, 0.5];
    let c = mollify(|_| 3.25, &spec(0.1), &x, &square(), &rule).unwrap();
    assert_relative_eq!(c, 3.25, max_relative = 1e-14);
    let lin = mollify(|z| 2.0 * z[0] - z[1] + 0.3, &spec(0.1), &x, &square(), &rule).unwrap();
    assert_relative_eq!(lin, 0.8, max_relative = 1e-13);

    // |x|² at the origin: r² times the kernel's second moment
    let big = MollifyDomain::Box { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] };
    let r = 0.1;
    let v = mollify(|z| z[0] * z[0] + z[1] * z[1], &spec(r), &[0.0, 0.0], &big, &ConvolutionRule::tensor(2, 32).unwrap()).unwrap();
    let m2 = MollifierKernel::new(2).unwrap().second_moment();
    assert_relative_eq!(v, r * r * m2, max_relative = 1e-5);

    assert!(matches!(mollify(|_| 1.0, &spec(0.1), &[0.05, 0.5], &square(), &rule), Err(Error::Domain(_))));
    let bad = MollifySpec { r: 0.3, ..spec(0.1) };
    assert!(matches!(mollify(|_| 1.0, &bad, &x, &square(), &rule), Err(Error::Input(_))));
}

#[test]
fn commutation_examples() {
    let rule = ConvolutionRule::default();
    let cubic = SmoothFunction::Polynomial { terms: vec![(1.0, vec![3, 0]), (-1.5, vec![1, 2]), (0.2, vec![2, 0])] };
    let d = commutation_check(&cubic, &[1, 0], &spec(0.1), &square(), &samples(), 1e-4, &rule).unwrap();
    assert!(d < 1e-6, "{d}");

    let c = SmoothFunction::Constant { value: 4.0 };
    for alpha in [[1, 0], [0, 1], [1, 1], [2, 0]] {
        let d = commutation_check(&c, &alpha, &spec(0.1), &square(), &samples(), 1e-4, &rule).unwrap();
        assert!(d < 1e-12, "{alpha:?}: {d}");
    }

    let s = SmoothFunction::Sine { axis: 0, frequency: 1.0, phase: 0.0, amplitude: 1.0 };
    let d = commutation_check(&s, &[2, 0], &spec(0.1), &square(), &samples(), 1e-4, &rule).unwrap();
    assert!(d < 1e-6, "{d}");
    // both sides are close to -A_r sin
    let x = [0.4, 0.5];
    let a = mollify(|z| s.derivative(&[2, 0], z), &spec(0.1), &x, &square(), &rule).unwrap();
    let b = mollify(|z| s.value(z), &spec(0.1), &x, &square(), &rule).unwrap();
    assert_relative_eq!(a, -b, max_relative = 1e-12);
}

#[test]
fn corpus_commutes_for_every_multiindex() {
    let rule = ConvolutionRule::default();
    for f in SmoothFunction::corpus(2) {
        for alpha in [[1, 0], [0, 1], [2, 0], [1, 1], [0, 2]] {
            let d = commutation_check(&f, &alpha, &spec(0.1), &square(), &samples(), 1e-4, &rule).unwrap();
            assert!(d < 1e-6, "{f:?} {alpha:?}: {d}");
        }
    }
}

#[test]
fn commutation_error_shrinks_with_step() {
    let rule = ConvolutionRule::default();
    let s = SmoothFunction::Sine { axis: 1, frequency: 3.0, phase: 0.4, amplitude: 0.5 };
    let coarse = commutation_check(&s, &[0, 1], &spec(0.1), &square(), &samples(), 1e-1, &rule).unwrap();
    let fine = commutation_check(&s, &[0, 1], &spec(0.1), &square(), &samples(), 5e-2, &rule).unwrap();
    // central differences: halving the step divides the error by about four
    let ratio = coarse / fine;
    assert!(ratio > 3.5 && ratio < 4.5, "{ratio}");
}

#[test]
fn convergence_examples() {
    let grid = ConvergenceGrid::default();
    let dom = MollifyDomain::lipschitz_cusp();
    let radii = [0.08, 0.04, 0.02, 0.01];
    let one = Weight::power(2, 0.0).unwrap();
    let c = convergence_test(|_| 1.5, &one, 2.0, 0.1, &radii, &dom, &grid).unwrap();
    assert!(c.iter().all(|p| p.norm < 1e-13));

    // Lipschitz with a kink at x_1 = 0.5: error decays like r
    let kinked = ConvergenceGrid { breaks: vec![0.5], ..Default::default() };
    let f = |x: &[f64]| (x[0] - 0.5).abs();
    let c = convergence_test(f, &one, 2.0, 0.1, &radii, &dom, &kinked).unwrap();
    for w in c.windows(2) {
        let rate = (w[0].norm / w[1].norm).log2();
        assert!(rate > 1.0 && rate < 2.0, "rate {rate}: {c:?}");
    }

    let w1 = Weight::power(2, 1.0).unwrap();
    let c = convergence_test(|x: &[f64]| x[0], &w1, 2.0, 0.1, &radii, &dom, &grid).unwrap();
    assert!(c.last().unwrap().norm < 1e-3);

    let outside = Weight::power(2, 3.0).unwrap();
    assert!(matches!(convergence_test(|x: &[f64]| x[0], &outside, 2.0, 0.1, &radii, &dom, &grid), Err(Error::Validity(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mollified_sup_is_bounded(x0 in 0.25f64..0.75, x1 in 0.25f64..0.75, r in 0.01f64..0.2, k in 0usize..4) {
        let f = &SmoothFunction::corpus(2)[k];
        let rule = ConvolutionRule::default();
        let v = mollify(|z| f.value(z), &spec(r), &[x0, x1], &square(), &rule).unwrap();
        // sup of f over the unit square, evaluated on a fine grid plus a safety margin
        let mut sup: f64 = 0.0;
        for i in 0..=200 {
            for j in 0..=200 {
                sup = sup.max(f.value(&[i as f64 / 200.0, j as f64 / 200.0]).abs());
            }
        }
        prop_assert!(v.abs() <= sup * (1.0 + 1e-3));
    }

    #[test]
    fn mollification_is_linear(
        a in -5.0f64..5.0, b in -5.0f64..5.0, x0 in 0.25f64..0.75, x1 in 0.25f64..0.75, r in 0.01f64..0.2,
    ) {
        let corpus = SmoothFunction::corpus(2);
        let (f, g) = (&corpus[1], &corpus[3]);
        let rule = ConvolutionRule::default();
        let x = [x0, x1];
        let lhs = mollify(|z| a * f.value(z) + b * g.value(z), &spec(r), &x, &square(), &rule).unwrap();
        let rhs = a * mollify(|z| f.value(z), &spec(r), &x, &square(), &rule).unwrap()
            + b * mollify(|z| g.value(z), &spec(r), &x, &square(), &rule).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }
}
