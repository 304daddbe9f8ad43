use serde_json::Value;

fn cli(args: &[&str]) -> (i32, String, String) {
    let mut argv = vec!["spraylab".to_string()];
    argv.extend(args.iter().map(|s| s.to_string()));
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = spraylab_cli::run(&argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn records(out: &str) -> Vec<Value> {
    out.lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn list_prints_every_family() {
    let (code, out, _) = cli(&["list"]);
    assert_eq!(code, 0);
    let names: Vec<String> = records(&out)
        .iter()
        .map(|r| r["family"].as_str().unwrap().to_string())
        .collect();
    for f in ["euclidean", "randers", "funk", "fourth-root", "square-metric", "projective-perturbation"] {
        assert!(names.iter().any(|n| n == f), "{f} missing");
    }
    let (code, out, _) = cli(&["list", "--format", "csv"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().next().unwrap(), "family,kind,params");
}

#[test]
fn euclidean_verify_has_zero_residuals() {
    let (code, out, _) = cli(&["verify", "--metric", "euclidean", "--dim", "3", "--volume", "coordinate", "--points", "10", "--seed", "7"]);
    assert_eq!(code, 0);
    let recs = records(&out);
    let summary = recs.last().unwrap();
    assert_eq!(summary["type"], "summary");
    assert_eq!(summary["pass"], true);
    for r in recs.iter().filter(|r| r["type"] == "check") {
        let res = r["residual"].as_f64().unwrap();
        assert!(res < 1e-12, "{}: {res}", r["id"]);
    }
}

#[test]
fn eval_reports_every_route() {
    let (code, out, _) = cli(&["eval", "--metric", "funk", "--dim", "3", "--points", "1", "--seed", "1"]);
    assert_eq!(code, 0);
    let recs = records(&out);
    assert_eq!(recs.len(), 1);
    let wo = recs[0]["Wo"].as_object().unwrap();
    assert_eq!(wo.len(), 4);
    let arrays: Vec<Vec<f64>> = wo
        .values()
        .map(|v| v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect())
        .collect();
    for a in &arrays {
        for b in &arrays {
            let d = a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            assert!(d <= 1e-6);
        }
    }
    for k in ["F", "G", "N", "Gamma", "B", "Rik", "Ric", "R", "T", "S", "tau", "Ghat", "W"] {
        assert!(recs[0]["values"].get(k).is_some(), "{k} missing");
    }
    assert_eq!(recs[0]["chi"].as_object().unwrap().len(), 3);
}

#[test]
fn theorem_with_volume_override() {
    let (code, out, _) = cli(&["theorem", "thm12", "--volume", "explicit:exp(x1)", "--points", "5"]);
    assert_eq!(code, 0);
    assert!(out.contains("explicit:exp(x1)"));
}

#[test]
fn failing_checks_exit_one() {
    let (code, out, _) = cli(&["verify", "--metric", "randers", "--dim", "2", "--points", "3", "--tol-jet", "1e-30", "--tol-floor", "0"]);
    assert_eq!(code, 1);
    assert!(records(&out).last().unwrap()["pass"] == false);
}

#[test]
fn configuration_errors_exit_two() {
    let cases: [&[&str]; 6] = [
        &["frobnicate"],
        &["verify", "--metric", "klein-bottle"],
        &["verify", "--metric", "randers", "--dim", "2", "--param", "b=1.2,0"],
        &["verify", "--degree", "3"],
        &["theorem", "thm99"],
        &["eval", "--volume", "lebesgue"],
    ];
    for args in cases {
        let (code, out, err) = cli(args);
        assert_eq!(code, 2, "{args:?}");
        assert!(out.is_empty());
        assert!(!err.is_empty());
    }
    let (_, _, err) = cli(&["verify", "--metric", "randers", "--dim", "2", "--param", "b=1.2,0"]);
    assert!(err.contains("‖b‖_α < 1"));
}

#[test]
fn config_file_with_flag_precedence() {
    let dir = std::env::temp_dir().join(format!("spraylab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("run.cfg");
    std::fs::write(
        &path,
        "# fixture\nmetric.family = funk\nmetric.dim = 2\nvolume.kind = explicit\nvolume.expr = exp(x2)\npoints.count = 2\npoints.seed = 7\n",
    )
    .unwrap();
    let p = path.to_str().unwrap();
    let (code, out, _) = cli(&["verify", "--config", p, "--seed", "9"]);
    assert_eq!(code, 0);
    let s = records(&out).pop().unwrap();
    assert_eq!(s["seed"], 9);
    assert_eq!(s["points"], 2);
    assert!(s["fixtures"][0].as_str().unwrap().starts_with("funk(2) | explicit:exp(x2)"));
    std::fs::write(&path, "points.sed = 7\n").unwrap();
    let (code, _, err) = cli(&["verify", "--config", p]);
    assert_eq!(code, 2);
    assert!(err.contains("points.sed"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn csv_has_fixed_columns() {
    let (code, out, _) = cli(&["verify", "--metric", "euclidean", "--points", "2", "--format", "csv"]);
    assert_eq!(code, 0);
    let mut lines = out.lines();
    assert_eq!(
        lines.next().unwrap(),
        "record,suite,id,fixture,evaluated,skipped,failed,residual,scale,tol,pass,x,y,error,notes"
    );
    assert!(lines.all(|l| l.starts_with("check,") || l.starts_with("summary,")));
    let (_, out, _) = cli(&["eval", "--metric", "euclidean", "--points", "1", "--format", "csv"]);
    assert_eq!(out.lines().next().unwrap(), "record,metric,volume,index,x,y,quantity,component,value");
}
