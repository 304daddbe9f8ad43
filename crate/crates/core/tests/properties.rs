use proptest::prelude::*;

use spraylab::catalog::{MetricSpec, PerturbedSpray};
use spraylab::expr::Expr;
use spraylab::jet::{Jet, JetSpace};
use spraylab::measures::VolumeForm;
use spraylab::par::Execution;
use spraylab::projective::{ProjectivePoint, WeylRoute};
use spraylab::spray::{Frame, Spray, TangentPoint};
use spraylab::verify::{CheckResult, Measure};

const VARS: usize = 3;
const DEGREE: usize = 5;

fn close(a: &Jet, b: &Jet, rel: f64) -> bool {
    let mag = a.coeffs().iter().chain(b.coeffs()).map(|c| c.abs()).fold(1.0, f64::max);
    a.coeffs().len() == b.coeffs().len()
        && a.coeffs().iter().zip(b.coeffs()).all(|(u, v)| (u - v).abs() <= rel * mag)
}

/// A smooth jet: quadratic polynomial plus an exponential.
fn jet_strategy() -> impl Strategy<Value = Jet> {
    (
        prop::array::uniform3(-1.0f64..1.0),
        prop::array::uniform4(-2.0f64..2.0),
        -1.0f64..1.0,
        -0.5f64..0.5,
    )
        .prop_map(|(x, c, q, e)| {
            let s = JetSpace::new(VARS).unwrap();
            let v: Vec<Jet> = (0..VARS).map(|i| s.seed(i, x[i], DEGREE).unwrap()).collect();
            let mut j = s.constant(c[0], DEGREE);
            for i in 0..VARS {
                j.add_scaled(&v[i], c[i + 1]);
            }
            j.add_scaled(&(&v[0] * &v[1]), q);
            j.add_scaled(&(&v[2] * e).exp(), 1.0);
            j
        })
}

fn positive_jet() -> impl Strategy<Value = Jet> {
    jet_strategy().prop_map(|j| {
        let shift = 0.5 - j.value().min(0.0);
        &j + shift
    })
}

fn randers_point() -> impl Strategy<Value = TangentPoint> {
    (
        prop::array::uniform3(-0.3f64..0.3),
        prop::array::uniform3(-1.0f64..1.0),
    )
        .prop_filter_map("zero fibre vector", |(x, y)| {
            let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            (r > 0.2).then(|| TangentPoint::new(x.to_vec(), y.to_vec()).unwrap())
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn product_rule(a in jet_strategy(), b in jet_strategy(), var in 0..VARS) {
        let lhs = (&a * &b).deriv(var).unwrap();
        let rhs = &(&a.deriv(var).unwrap() * &b) + &(&a * &b.deriv(var).unwrap());
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn multiplication_is_associative_and_commutative(a in jet_strategy(), b in jet_strategy(), c in jet_strategy()) {
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c)), 1e-12));
        prop_assert!(close(&(&a * &b), &(&b * &a), 1e-14));
    }

    #[test]
    fn elementary_inverses(a in positive_jet()) {
        let one = a.space().constant(1.0, DEGREE);
        prop_assert!(close(&a.ln().unwrap().exp(), &a, 1e-11));
        prop_assert!(close(&(&a.recip().unwrap() * &a), &one, 1e-11));
        let r = a.sqrt().unwrap();
        prop_assert!(close(&(&r * &r), &a, 1e-11));
        prop_assert!(close(&a.powf(1.5).unwrap(), &(&a * &r), 1e-11));
    }

    #[test]
    fn mixed_partials_commute(a in jet_strategy(), i in 0..VARS, j in 0..VARS) {
        let ij = a.deriv(i).unwrap().deriv(j).unwrap();
        let ji = a.deriv(j).unwrap().deriv(i).unwrap();
        prop_assert!(close(&ij, &ji, 1e-12));
    }

    #[test]
    fn spray_homogeneity(p in randers_point(), lambda in 0.3f64..3.0) {
        let spray = MetricSpec::generic_randers(3).build().unwrap().spray();
        let a = Frame::from_spray(spray.as_ref(), &p, 4).unwrap();
        let b = Frame::from_spray(spray.as_ref(), &p.scaled(lambda).unwrap(), 4).unwrap();
        for (g, h) in a.coefficients().iter().zip(b.coefficients()) {
            prop_assert!((h.value() - lambda * lambda * g.value()).abs() <= 1e-12 * (1.0 + h.value().abs()));
        }
        let (ra, rb) = (a.curvature().unwrap().r.value(), b.curvature().unwrap().r.value());
        prop_assert!((rb - lambda * lambda * ra).abs() <= 1e-10 * (1.0 + rb.abs()));
    }

    #[test]
    fn weyl_is_projectively_invariant(p in randers_point(), a in prop::array::uniform3(-0.5f64..0.5)) {
        let base = MetricSpec::generic_randers(3).build().unwrap().spray();
        let oneform: Vec<Expr> = a.iter().map(|c| Expr::parse(&format!("{c}")).unwrap()).collect();
        let pert = PerturbedSpray { base: base.clone(), oneform };
        let v = VolumeForm::Coordinate;
        let w0 = ProjectivePoint::new(base.as_ref(), &v, &p, 7).unwrap().weyl(WeylRoute::ViaChi).unwrap();
        let w1 = ProjectivePoint::new(&pert as &dyn Spray, &v, &p, 7).unwrap().weyl(WeylRoute::ViaChi).unwrap();
        let m = Measure::agree(&w0.values(), &w1.values());
        prop_assert!(m.passes(1e-9, 1e-12), "{m:?}");
    }

    #[test]
    fn pass_flag_matches_rule(res in 0.0f64..1.0, mag in 0.0f64..10.0, tol in 1e-9f64..1e-1) {
        let p = TangentPoint::new(vec![0.0, 0.0], vec![1.0, 0.0]).unwrap();
        let r = CheckResult::from_measure("c", &p, Measure::new(res, mag), tol, 1e-9);
        prop_assert_eq!(r.pass, r.residual <= r.tol * r.scale + 1e-9);
    }

    #[test]
    fn execution_modes_agree(v in prop::collection::vec(-1e3f64..1e3, 0..200)) {
        let f = |x: &f64| x.sin() * x;
        prop_assert_eq!(Execution::Parallel.map(&v, f), Execution::Sequential.map(&v, f));
    }

    #[test]
    fn expression_display_round_trips(c in prop::array::uniform3(-3.0f64..3.0), x in prop::array::uniform2(-1.0f64..1.0)) {
        let e = Expr::parse(&format!("{} * x1^2 - exp({} * x2) / (1 + {}*x1*x1)", c[0], c[1], c[2].abs())).unwrap();
        let again = Expr::parse(&e.to_string()).unwrap();
        let (a, b) = (e.eval(&x).unwrap(), again.eval(&x).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }
}
