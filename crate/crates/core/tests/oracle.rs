use spraylab::catalog::{sample, MetricSpec};
use spraylab::jet::{Jet, JetSpace};
use spraylab::measures::{bh_ln_sigma, VolumeForm};
use spraylab::par::Execution;
use spraylab::spray::TangentPoint;
use spraylab::verify::{fd_agreement, fd_oracle, FdVar};

#[test]
fn jet_partials_match_finite_differences() {
    let cases = [
        MetricSpec::Euclidean { dim: 3 },
        MetricSpec::Funk { dim: 3 },
        MetricSpec::generic_randers(3),
        MetricSpec::conformal_flat_2d(),
    ];
    let volume = VolumeForm::parse("explicit:exp(0.3*x1)").unwrap();
    for spec in cases {
        let spray = spec.build().unwrap().spray();
        for p in sample(spray.as_ref(), 3, 3, &spec.default_box()).unwrap() {
            for (name, m) in fd_agreement(spray.as_ref(), &volume, &p, 1e-3, 1e-2).unwrap() {
                assert!(m.passes(1e-5, 1e-8), "{} {name}: {m:?}", spray.label());
            }
        }
    }
}

#[test]
fn euclidean_norm_gradient() {
    let p = TangentPoint::new(vec![0.0; 3], vec![0.3, -1.2, 0.5]).unwrap();
    let r = p.y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let norm = |q: &TangentPoint| Ok(vec![q.y.iter().map(|v| v * v).sum::<f64>().sqrt()]);
    for k in 0..3 {
        let d = fd_oracle(norm, &p, &[FdVar::Y(k)], 1e-3).unwrap();
        assert!((d[0] - p.y[k] / r).abs() < 1e-10);
    }
}

#[test]
fn bh_density_gradient_matches_quadrature_jets() {
    let spec = MetricSpec::generic_randers(3);
    let metric = spec.build().unwrap().metric().unwrap();
    let x = [0.1, -0.15, 0.2];
    let space = JetSpace::new(3).unwrap();
    let xs: Vec<Jet> = (0..3).map(|i| space.seed(i, x[i], 1).unwrap()).collect();
    let jets = bh_ln_sigma(metric.as_ref(), &xs, 64, Execution::Sequential).unwrap();
    let p = TangentPoint::new(x.to_vec(), vec![1.0, 0.0, 0.0]).unwrap();
    let field = |q: &TangentPoint| {
        let s = JetSpace::new(3)?;
        let c: Vec<Jet> = q.x.iter().map(|&v| s.constant(v, 0)).collect();
        Ok(vec![bh_ln_sigma(metric.as_ref(), &c, 64, Execution::Sequential)?.value()])
    };
    for i in 0..3 {
        let fd = fd_oracle(field, &p, &[FdVar::X(i)], 1e-3).unwrap()[0];
        let exact = jets.deriv(i).unwrap().value();
        assert!((fd - exact).abs() <= 1e-4 * exact.abs().max(1.0), "{fd} vs {exact}");
    }
}
