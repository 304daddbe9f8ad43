//! Command-line driver: `list`, `eval`, `verify` and `theorem`.
//!
//! Reports go to the output stream, diagnostics to the error stream. Exit
//! codes: 0 when every check passes, 1 when any check fails, 2 on a
//! configuration error.

pub mod config;
pub mod output;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use spraylab::catalog::{self, families};
use spraylab::error::GeomError;
use spraylab::measures::ChiRoute;
use spraylab::projective::{ProjectivePoint, WeylRoute};
use spraylab::spray::{seeds, Spray, TangentPoint};
use spraylab::verify::{
    identity_suite, theorem_check, SuiteOptions, SuiteReport, TheoremOptions, THEOREMS,
};

use config::{ConfigError, Format, RunConfig};
use output::{
    f17s, CheckRecord, EvalRecord, FamilyRecord, PointRecord, Sink, SummaryRecord, F17,
    CHECK_COLUMNS, EVAL_COLUMNS, FAMILY_COLUMNS,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "spraylab", version, about = "Curvature of sprays and Finsler metrics at sampled points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print catalog families and their parameters.
    List {
        #[arg(long, value_name = "json-lines|csv")]
        format: Option<String>,
    },
    /// Per-point curvature report.
    Eval(RunArgs),
    /// Run the identity suite on one fixture.
    Verify(RunArgs),
    /// Check a named statement on its fixtures.
    Theorem {
        /// One of thm12, thm15, cor14, cor33, prop32, thm43, ex17, ex45.
        name: String,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Flat `key = value` file with dotted keys; flags override it.
    #[arg(long)]
    config: Option<String>,
    /// Catalog family.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    dim: Option<usize>,
    /// Family parameter as key=value; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// coordinate, explicit:<σ(x)>, bh or bh:<nodes>.
    #[arg(long, allow_hyphen_values = true)]
    volume: Option<String>,
    #[arg(long)]
    bh_nodes: Option<usize>,
    /// Quadrature nodes per angle in dimension 4.
    #[arg(long)]
    bh_nodes_4d: Option<usize>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// ball:R, ball:R@c1,c2,.., cube:H or cube:lo:hi.
    #[arg(long = "box", value_name = "REGION")]
    region: Option<String>,
    /// Jet degree of metric inputs.
    #[arg(long)]
    degree: Option<usize>,
    #[arg(long)]
    tol_jet: Option<f64>,
    #[arg(long)]
    tol_quad: Option<f64>,
    #[arg(long)]
    tol_floor: Option<f64>,
    #[arg(long, value_name = "json-lines|csv")]
    format: Option<String>,
    /// Also emit one record per check and point.
    #[arg(long)]
    per_point: bool,
    /// Evaluate points on the calling thread.
    #[arg(long)]
    sequential: bool,
    /// Function of x for the volume-change checks.
    #[arg(long, allow_hyphen_values = true)]
    f: Option<String>,
}

impl RunArgs {
    fn flag_keys(&self) -> Result<Vec<(String, String)>, ConfigError> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        if let Some(m) = &self.metric {
            put("metric.family", m.clone());
        }
        if let Some(d) = self.dim {
            put("metric.dim", d.to_string());
        }
        for p in &self.params {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("--param expects key=value, got {p:?}")))?;
            put(&format!("metric.{}", k.trim()), v.trim().to_string());
        }
        if let Some(n) = self.bh_nodes {
            put("volume.nodes", n.to_string());
        }
        if let Some(n) = self.bh_nodes_4d {
            put("volume.nodes_4d", n.to_string());
        }
        if let Some(n) = self.points {
            put("points.count", n.to_string());
        }
        if let Some(s) = self.seed {
            put("points.seed", s.to_string());
        }
        if let Some(b) = &self.region {
            put("points.box", b.clone());
        }
        if let Some(d) = self.degree {
            put("jet.degree", d.to_string());
        }
        if let Some(t) = self.tol_jet {
            put("tol.jet", t.to_string());
        }
        if let Some(t) = self.tol_quad {
            put("tol.quad", t.to_string());
        }
        if let Some(t) = self.tol_floor {
            put("tol.floor", t.to_string());
        }
        if let Some(f) = &self.format {
            put("output.format", f.clone());
        }
        if self.per_point {
            put("output.per_point", "true".into());
        }
        if self.sequential {
            put("exec.mode", "sequential".into());
        }
        if let Some(f) = &self.f {
            put(config::F_KEY, f.clone());
        }
        if let Some(v) = &self.volume {
            out.extend(config::volume_keys(v)?);
        }
        Ok(out)
    }

    fn resolve(&self) -> Result<RunConfig, ConfigError> {
        let file = match &self.config {
            None => BTreeMap::new(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError(format!("cannot read {path}: {e}")))?;
                config::parse_file(&text)?
            }
        };
        let mut file = file;
        if self.volume.is_some() {
            // a volume flag replaces the file's volume form as a whole
            file.remove("volume.expr");
        }
        config::build(&config::merge(file, self.flag_keys()?))
    }
}

enum Failure {
    Config(String),
    Io(std::io::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<GeomError> for Failure {
    fn from(e: GeomError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e)
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Io(e.into())
    }
}

/// Runs the command line `args` (program name first) and returns the exit
/// code.
pub fn run(args: &[String], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_PASS
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_CONFIG
                }
            };
        }
    };
    let result = match &cli.command {
        Command::List { format } => list(format.as_deref(), out),
        Command::Eval(a) => a.resolve().map_err(Failure::from).and_then(|c| eval(&c, out, err)),
        Command::Verify(a) => a.resolve().map_err(Failure::from).and_then(|c| verify(&c, out)),
        Command::Theorem { name, run } => {
            if !THEOREMS.contains(&name.as_str()) {
                Err(Failure::Config(format!(
                    "unknown theorem {name:?}; expected one of {}",
                    THEOREMS.join(", ")
                )))
            } else {
                run.resolve()
                    .map_err(Failure::from)
                    .and_then(|c| theorem(name, run.volume.is_some() || c.volume_set, &c, out))
            }
        }
    };
    match result {
        Ok(code) => code,
        Err(Failure::Config(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_CONFIG
        }
        Err(Failure::Io(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_FAIL
        }
    }
}

fn sink<'a>(format: Format, out: &'a mut dyn Write, header: &[&str]) -> std::io::Result<Sink<'a>> {
    match format {
        Format::JsonLines => Ok(Sink::json(out)),
        Format::Csv => Sink::csv(out, header),
    }
}

fn list(format: Option<&str>, out: &mut dyn Write) -> Result<i32, Failure> {
    let format = match format.unwrap_or("json-lines") {
        "json-lines" | "jsonl" => Format::JsonLines,
        "csv" => Format::Csv,
        other => return Err(Failure::Config(format!("unknown format {other:?}"))),
    };
    let mut s = sink(format, out, &FAMILY_COLUMNS)?;
    for f in families() {
        s.family(&FamilyRecord {
            kind_tag: "family",
            family: f.name,
            kind: f.kind,
            params: f.params.iter().copied().collect(),
        })?;
    }
    s.finish()?;
    Ok(EXIT_PASS)
}

/// Every reported quantity at one point.
fn eval_record(cfg: &RunConfig, spray: &dyn Spray, p: &TangentPoint, index: usize) -> spraylab::error::Result<EvalRecord> {
    let pp = ProjectivePoint::new(spray, &cfg.volume, p, cfg.degree)?;
    let fr = pp.base();
    let curv = pp.curvature()?;
    let proj = pp.eval()?;
    let mut values: BTreeMap<String, Vec<F17>> = BTreeMap::new();
    let mut put = |k: &str, v: &[f64]| {
        values.insert(k.to_string(), f17s(v));
    };
    if let Some(m) = spray.metric() {
        let s = seeds(p, 1)?;
        put("F", &[m.norm(&s.x, &s.y)?.value()]);
    }
    let g: Vec<f64> = fr.coefficients().iter().map(|j| j.value()).collect();
    put("G", &g);
    put("N", &fr.nonlinear().values());
    put("Gamma", &fr.gamma().values());
    put("B", &fr.berwald()?.values());
    put("Rik", &curv.rik.values());
    put("Ric", &[curv.ric.value()]);
    put("R", &[curv.r.value()]);
    put("T", &curv.t.values());
    put("S", &[pp.s().value()]);
    put("tau", &[pp.tau()?.value()]);
    put("Ghat", &proj.ghat);
    put("Nhat", &proj.nhat);
    put("Shat", &[proj.shat]);
    put("chihat", &proj.chihat);
    put("Rhat_ik", &proj.rhat_ik);
    put("Rhat", &[proj.rhat]);
    put("That", &proj.that);
    put("W", &proj.w);
    put("W.viaChi", &pp.weyl(WeylRoute::ViaChi)?.values());
    let mut chi = BTreeMap::new();
    for r in ChiRoute::ALL {
        chi.insert(r.name(), f17s(&pp.chi(r)?.values()));
    }
    let wo = proj.wo.iter().map(|(r, v)| (r.name(), f17s(v))).collect();
    Ok(EvalRecord {
        kind: "eval",
        metric: spray.label(),
        volume: cfg.volume.to_string(),
        index,
        x: f17s(&p.x),
        y: f17s(&p.y),
        values,
        chi,
        wo,
    })
}

fn eval(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let spray: Arc<dyn Spray> = cfg.metric.build()?.spray();
    let region = cfg.region.clone().unwrap_or_else(|| cfg.metric.default_box());
    let pts = catalog::sample(spray.as_ref(), cfg.points, cfg.seed, &region)?;
    let records = cfg.exec.map(&pts, |p| eval_record(cfg, spray.as_ref(), p, 0));
    let mut s = sink(cfg.format, out, &EVAL_COLUMNS)?;
    let mut code = EXIT_PASS;
    for (i, (r, p)) in records.into_iter().zip(&pts).enumerate() {
        match r {
            Ok(mut rec) => {
                rec.index = i;
                s.eval(&rec)?;
            }
            Err(e) => {
                writeln!(err, "point {i} (x = {:?}, y = {:?}): {e}", p.x, p.y)?;
                code = EXIT_FAIL;
            }
        }
    }
    s.finish()?;
    Ok(code)
}

fn emit_report(r: &SuiteReport, cfg: &RunConfig, s: &mut Sink) -> std::io::Result<()> {
    if cfg.per_point {
        for c in &r.results {
            s.check(&CheckRecord {
                kind: "point",
                suite: r.name.clone(),
                id: c.id.clone(),
                fixture: String::new(),
                evaluated: 1,
                skipped: 0,
                failed: usize::from(!c.pass),
                residual: F17(c.residual),
                scale: F17(c.scale),
                tol: F17(c.tol),
                pass: c.pass,
                point: Some(PointRecord::new(&c.point.x, &c.point.y)),
                error: c.error.clone(),
            })?;
        }
    }
    for c in &r.checks {
        s.check(&CheckRecord {
            kind: "check",
            suite: r.name.clone(),
            id: c.id.clone(),
            fixture: c.fixture.clone(),
            evaluated: c.evaluated,
            skipped: c.skipped,
            failed: c.failed,
            residual: F17(c.max_residual),
            scale: F17(c.scale),
            tol: F17(c.tol),
            pass: c.pass,
            point: c.worst_point.as_ref().map(|p| PointRecord::new(&p.x, &p.y)),
            error: c.error.clone(),
        })?;
    }
    s.summary(&SummaryRecord {
        kind: "summary",
        suite: r.name.clone(),
        fixtures: r.fixtures.iter().map(|f| format!("{} | {}", f.metric, f.volume)).collect(),
        seed: r.seed,
        points: r.points,
        degree: r.degree,
        checks: r.checks.len(),
        failed: r.failed().count(),
        pass: r.pass,
        notes: r.notes.clone(),
    })
}

fn finish_report(r: &SuiteReport, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut s = sink(cfg.format, out, &CHECK_COLUMNS)?;
    emit_report(r, cfg, &mut s)?;
    s.finish()?;
    Ok(if r.pass { EXIT_PASS } else { EXIT_FAIL })
}

fn verify(cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, Failure> {
    let opts = SuiteOptions {
        points: cfg.points,
        seed: cfg.seed,
        region: cfg.region.clone(),
        degree: cfg.degree,
        tol: cfg.tol,
        exec: cfg.exec,
        f: cfg.f.clone(),
    };
    let report = identity_suite(&cfg.metric, &cfg.volume, &opts)?;
    finish_report(&report, cfg, out)
}

fn theorem(name: &str, volume_set: bool, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, Failure> {
    let opts = TheoremOptions {
        points: cfg.points,
        seed: cfg.seed,
        degree: cfg.degree,
        tol: cfg.tol,
        volumes: if volume_set { vec![cfg.volume.clone()] } else { Vec::new() },
        bh_nodes: cfg.bh_nodes,
        bh_nodes_4d: cfg.bh_nodes_4d,
        exec: cfg.exec,
    };
    let report = theorem_check(name, &opts)?;
    finish_report(&report, cfg, out)
}
