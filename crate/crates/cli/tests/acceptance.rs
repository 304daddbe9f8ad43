//! Acceptance criteria. Each prints one PASS or FAIL line; the test fails
//! if any criterion does.

use std::collections::BTreeMap;
use std::time::Instant;

use spraylab::catalog::{sample, MetricSpec};
use spraylab::measures::VolumeForm;
use spraylab::par::Execution;
use spraylab::verify::{
    fd_agreement, identity_suite, randers_bh_check, run_checks, theorem_check, SuiteOptions,
    SuiteReport, TheoremOptions, Tolerances, ABS_FLOOR,
};

const POINTS: usize = 20;
const SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn vol(s: &str) -> VolumeForm {
    VolumeForm::parse(s).unwrap()
}

fn params(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// One fixture per catalog family, with a mix of volume forms.
fn catalog_fixtures() -> Vec<(MetricSpec, VolumeForm)> {
    let general = MetricSpec::from_params(
        "riemannian",
        &params(&[("dim", "2"), ("a", "1 + x1^2, 0.2*x1*x2; 0.2*x1*x2, 1 + x2^2")]),
    )
    .unwrap();
    vec![
        (MetricSpec::Euclidean { dim: 3 }, VolumeForm::Coordinate),
        (MetricSpec::RoundSphere, VolumeForm::bh()),
        (MetricSpec::HyperbolicBall { dim: 2 }, vol("explicit:exp(x1*x2)")),
        (MetricSpec::HyperbolicBall { dim: 3 }, VolumeForm::Coordinate),
        (MetricSpec::conformal_flat_2d(), vol("explicit:1 + x2^2")),
        (MetricSpec::FlatPolar, VolumeForm::Coordinate),
        (general, VolumeForm::bh()),
        (MetricSpec::generic_randers(2), VolumeForm::bh()),
        (MetricSpec::generic_randers(3), vol("explicit:exp(x1)")),
        (MetricSpec::Funk { dim: 2 }, VolumeForm::Coordinate),
        (MetricSpec::Funk { dim: 3 }, VolumeForm::bh()),
        (MetricSpec::fourth_root(0.5), vol("explicit:exp(0.2*x3)")),
        (MetricSpec::Square { dim: 3, squared: true }, VolumeForm::Coordinate),
        (MetricSpec::perturbed(MetricSpec::generic_randers(3)), VolumeForm::Coordinate),
    ]
}

fn opts(tol: Tolerances) -> SuiteOptions {
    SuiteOptions {
        points: POINTS,
        seed: SEED,
        tol,
        ..SuiteOptions::default()
    }
}

/// Pins both tiers to one tolerance.
fn pinned(t: f64) -> Tolerances {
    Tolerances {
        jet: t,
        quad: t,
        floor: ABS_FLOOR,
    }
}

fn failures(r: &SuiteReport) -> Vec<String> {
    r.failed()
        .map(|c| {
            format!(
                "{} on {} ({:.2e} at scale {:.2e}{})",
                c.id,
                c.fixture,
                c.max_residual,
                c.scale,
                c.error.as_deref().map(|e| format!(", {e}")).unwrap_or_default()
            )
        })
        .collect()
}

fn report_outcome(reports: &[SuiteReport]) -> Outcome {
    let fails: Vec<String> = reports.iter().flat_map(failures).collect();
    let checks: usize = reports.iter().map(|r| r.checks.len()).sum();
    let evaluated: usize = reports
        .iter()
        .flat_map(|r| &r.checks)
        .map(|c| c.evaluated)
        .sum();
    let worst = reports
        .iter()
        .flat_map(|r| &r.checks)
        .filter(|c| c.evaluated > 0)
        .map(|c| c.max_residual / (c.tol * c.scale + ABS_FLOOR))
        .fold(0.0, f64::max);
    if fails.is_empty() && evaluated > 0 {
        outcome(
            true,
            format!("{checks} checks, {evaluated} evaluations, worst residual at {worst:.2e} of its bound"),
        )
    } else if evaluated == 0 {
        outcome(false, "nothing was evaluated")
    } else {
        outcome(false, fails.join("; "))
    }
}

fn c1_oracle() -> Outcome {
    let fixtures = [
        MetricSpec::Euclidean { dim: 3 },
        MetricSpec::Funk { dim: 3 },
        MetricSpec::generic_randers(3),
        MetricSpec::conformal_flat_2d(),
    ];
    let volume = vol("explicit:exp(0.3*x1 - 0.2*x2)");
    let mut worst: f64 = 0.0;
    let mut fails = Vec::new();
    for spec in fixtures {
        let spray = spec.build().unwrap().spray();
        for p in sample(spray.as_ref(), 5, SEED, &spec.default_box()).unwrap() {
            match fd_agreement(spray.as_ref(), &volume, &p, 1e-3, 1e-2) {
                Err(e) => fails.push(format!("{}: {e}", spray.label())),
                Ok(ms) => {
                    for (name, m) in ms {
                        worst = worst.max(m.residual / (1e-5 * m.scale + 1e-8));
                        if !m.passes(1e-5, 1e-8) {
                            fails.push(format!("{} {name}: {:.2e}", spray.label(), m.residual));
                        }
                    }
                }
            }
        }
    }
    if fails.is_empty() {
        outcome(true, format!("G, N, R, S first and second partials; worst at {worst:.2e} of 1e-5 rel + 1e-8"))
    } else {
        outcome(false, fails.join("; "))
    }
}

fn c2_wo_routes() -> Outcome {
    let spec = MetricSpec::generic_randers(3);
    let reports: Vec<SuiteReport> = [VolumeForm::Coordinate, vol("explicit:exp(x1)"), VolumeForm::bh()]
        .iter()
        .map(|v| run_checks(&spec, v, &["wo.routes"], &opts(pinned(1e-6))).unwrap())
        .collect();
    report_outcome(&reports)
}

fn theorem(name: &str, only: Option<&str>) -> Outcome {
    let o = TheoremOptions {
        points: POINTS,
        seed: SEED,
        ..TheoremOptions::default()
    };
    match theorem_check(name, &o) {
        Err(e) => outcome(false, e.to_string()),
        Ok(mut r) => {
            if let Some(prefix) = only {
                r.checks.retain(|c| c.id.starts_with(prefix));
            }
            report_outcome(&[r])
        }
    }
}

fn c7_identities() -> Outcome {
    let reports: Vec<SuiteReport> = catalog_fixtures()
        .iter()
        .map(|(s, v)| identity_suite(s, v, &opts(Tolerances::default())).unwrap())
        .collect();
    report_outcome(&reports)
}

fn c9_projective() -> Outcome {
    let reports: Vec<SuiteReport> = catalog_fixtures()
        .iter()
        .map(|(s, v)| {
            run_checks(s, v, &["projective.W", "projective.Wo"], &opts(pinned(1e-6))).unwrap()
        })
        .collect();
    report_outcome(&reports)
}

fn c10_chi() -> Outcome {
    let spec = MetricSpec::generic_randers(3);
    let reports: Vec<SuiteReport> = [VolumeForm::Coordinate, vol("explicit:exp(x1)")]
        .iter()
        .map(|v| run_checks(&spec, v, &["chi.routes", "chi.volume"], &opts(pinned(1e-7))).unwrap())
        .collect();
    report_outcome(&reports)
}

fn c11_bh() -> Outcome {
    let mut fails = Vec::new();
    let mut worst = (0.0f64, 0.0f64);
    for dim in [2, 3] {
        let spec = MetricSpec::generic_randers(dim);
        match randers_bh_check(&spec, 10, SEED, 64, 1, Execution::default()) {
            Err(e) => fails.push(e.to_string()),
            Ok(qs) => {
                for q in qs {
                    let rel = q.density / q.density_scale;
                    worst = (worst.0.max(rel), worst.1.max(q.drift));
                    if rel > 1e-6 || q.drift > 1e-8 {
                        fails.push(format!("randers({dim}) at {:?}: rel {rel:.2e}, drift {:.2e}", q.x, q.drift));
                    }
                }
            }
        }
    }
    if fails.is_empty() {
        outcome(true, format!("max relative density error {:.2e} (≤ 1e-6), max drift {:.2e} (≤ 1e-8)", worst.0, worst.1))
    } else {
        outcome(false, fails.join("; "))
    }
}

fn cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut argv = vec!["spraylab".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = spraylab_cli::run(&argv, &mut out, &mut err);
    (code, out)
}

fn c12_determinism() -> Outcome {
    let runs: [&[&str]; 3] = [
        &["verify", "--metric", "randers", "--dim", "3", "--volume", "bh", "--points", "5", "--seed", "9", "--per-point"],
        &["eval", "--metric", "funk", "--dim", "3", "--points", "3", "--seed", "1", "--format", "csv"],
        &["theorem", "cor14", "--points", "5", "--seed", "3"],
    ];
    let mut fails = Vec::new();
    for args in runs {
        let (c1, a) = cli(args);
        let (c2, b) = cli(args);
        let mut seq = args.to_vec();
        seq.push("--sequential");
        let (c3, s) = cli(&seq);
        if c1 != 0 || c2 != 0 || c3 != 0 {
            fails.push(format!("{} exited {c1}/{c2}/{c3}", args[0]));
        }
        if a.is_empty() || a != b {
            fails.push(format!("{}: repeated runs differ", args[0]));
        }
        if a != s {
            fails.push(format!("{}: parallel and sequential runs differ", args[0]));
        }
    }
    if fails.is_empty() {
        outcome(true, "verify, eval and theorem reports byte-identical across runs and execution modes")
    } else {
        outcome(false, fails.join("; "))
    }
}

#[test]
fn acceptance() {
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("oracle agreement with finite differences", Box::new(c1_oracle)),
        ("four-route W^o agreement on randers(3)", Box::new(c2_wo_routes)),
        ("W^o = 0 on funk(3) for three volume forms", Box::new(|| theorem("thm12", None))),
        ("fourth-root(2+2): B = 0, Ric = 0, S_BH = 0, W^o = 0", Box::new(|| theorem("ex17", None))),
        ("W^o independent of the volume form in dimension two", Box::new(|| theorem("cor14", Some("cor14.independent[conformal")))),
        ("Einstein formula for W^o and W^o = 0 on the sphere", Box::new(|| theorem("prop32", None))),
        ("identity suite on every catalog fixture", Box::new(c7_identities)),
        ("volume-change laws on randers(3)", Box::new(|| theorem("thm43", Some("thm43.")))),
        ("projective invariance of W and W^o", Box::new(c9_projective)),
        ("χ routes and volume independence on randers(3)", Box::new(c10_chi)),
        ("Busemann–Hausdorff quadrature against the Randers closed form", Box::new(c11_bh)),
        ("deterministic reports", Box::new(c12_determinism)),
    ];
    let mut failed = Vec::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        println!(
            "criterion {:>2} {} {name}: {} [{:.1}s]",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
