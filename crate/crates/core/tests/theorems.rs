use spraylab::verify::{theorem_check, TheoremOptions, THEOREMS};

#[test]
fn every_theorem_holds_on_its_fixtures() {
    let opts = TheoremOptions { points: 4, seed: 11, ..TheoremOptions::default() };
    let mut fails = Vec::new();
    for name in THEOREMS {
        let r = theorem_check(name, &opts).unwrap();
        assert!(!r.checks.is_empty(), "{name} has no checks");
        for c in r.failed() {
            fails.push(format!("{}: {:.3e} at scale {:.3e} {:?}", c.id, c.max_residual, c.scale, c.error));
        }
    }
    assert!(fails.is_empty(), "{}", fails.join("\n"));
}

#[test]
fn unknown_theorem_is_an_error() {
    assert!(theorem_check("thm99", &TheoremOptions::default()).is_err());
}
