//! Run configuration: a flat `key = value` file with dotted keys, overridden
//! by command-line flags, over built-in defaults.

use std::collections::BTreeMap;
use std::fmt;

use spraylab::catalog::{MetricSpec, SampleBox};
use spraylab::expr::Expr;
use spraylab::jet::MAX_DEGREE;
use spraylab::measures::{VolumeForm, DEFAULT_BH_NODES};
use spraylab::par::Execution;
use spraylab::verify::{Tolerances, ABS_FLOOR, DEFAULT_POINTS, TOL_JET, TOL_QUAD};
use spraylab::DEFAULT_DEGREE;

/// Lowest metric degree at which every reported quantity is defined.
pub const MIN_DEGREE: usize = 7;

/// Keys accepted outside `metric.*`.
pub const KEYS: [&str; 15] = [
    "metric.family",
    "volume.kind",
    "volume.expr",
    "volume.nodes",
    "volume.nodes_4d",
    "points.count",
    "points.seed",
    "points.box",
    "jet.degree",
    "tol.jet",
    "tol.quad",
    "tol.floor",
    "output.format",
    "output.per_point",
    "exec.mode",
];

/// Key of the function used by the volume-change checks.
pub const F_KEY: &str = "check.f";

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<spraylab::error::GeomError> for ConfigError {
    fn from(e: spraylab::error::GeomError) -> Self {
        ConfigError(e.to_string())
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    JsonLines,
    Csv,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub metric: MetricSpec,
    pub volume: VolumeForm,
    /// Whether a volume form was given explicitly.
    pub volume_set: bool,
    pub bh_nodes: usize,
    pub bh_nodes_4d: usize,
    pub points: usize,
    pub seed: u64,
    pub region: Option<SampleBox>,
    pub degree: usize,
    pub tol: Tolerances,
    pub format: Format,
    pub per_point: bool,
    pub exec: Execution,
    pub f: Expr,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected key = value", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(ConfigError(format!("line {}: empty key", i + 1)));
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Splits a volume argument (`coordinate`, `explicit:<σ>`, `bh`, `bh:<n>`)
/// into config keys.
pub fn volume_keys(spec: &str) -> Result<Vec<(String, String)>> {
    let s = spec.trim();
    let (kind, arg) = match s.split_once(':') {
        Some((k, a)) => (k.trim(), Some(a.trim())),
        None => (s, None),
    };
    let kind = if kind == "busemann-hausdorff" { "bh" } else { kind };
    let mut out = vec![("volume.kind".to_string(), kind.to_string())];
    match (kind, arg) {
        ("coordinate", None) | ("bh", None) => {}
        ("explicit", Some(e)) => out.push(("volume.expr".into(), e.to_string())),
        ("bh", Some(n)) => out.push(("volume.nodes".into(), n.to_string())),
        _ => return Err(ConfigError(format!("unknown volume form {s:?}"))),
    }
    Ok(out)
}

fn parse_num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse()
            .map_err(|_| ConfigError(format!("{key}: cannot parse {v:?}"))),
    }
}

fn parse_bool(map: &BTreeMap<String, String>, key: &str) -> Result<bool> {
    match map.get(key).map(String::as_str) {
        None | Some("false") => Ok(false),
        Some("true") => Ok(true),
        Some(v) => Err(ConfigError(format!("{key}: expected true or false, got {v:?}"))),
    }
}

/// Validates a merged key map into a run configuration.
pub fn build(map: &BTreeMap<String, String>) -> Result<RunConfig> {
    for k in map.keys() {
        if !KEYS.contains(&k.as_str()) && k != F_KEY && !k.starts_with("metric.") {
            return Err(ConfigError(format!("unknown key {k:?}")));
        }
    }
    let family = map.get("metric.family").map_or("euclidean", String::as_str);
    let params: BTreeMap<String, String> = map
        .iter()
        .filter_map(|(k, v)| {
            k.strip_prefix("metric.")
                .filter(|k| *k != "family")
                .map(|k| (k.to_string(), v.clone()))
        })
        .collect();
    let metric = MetricSpec::from_params(family, &params)?;

    let bh_nodes = parse_num(map, "volume.nodes", DEFAULT_BH_NODES)?;
    let bh_nodes_4d = parse_num(map, "volume.nodes_4d", 32usize)?;
    if bh_nodes < 2 || bh_nodes_4d < 2 {
        return Err(ConfigError("volume.nodes: at least 2 nodes are needed".into()));
    }
    let volume_set = map.contains_key("volume.kind");
    let volume = match map.get("volume.kind").map_or("coordinate", String::as_str) {
        "coordinate" => VolumeForm::Coordinate,
        "bh" | "busemann-hausdorff" => VolumeForm::BusemannHausdorff { nodes: bh_nodes },
        "explicit" => {
            let e = map
                .get("volume.expr")
                .ok_or_else(|| ConfigError("volume.kind = explicit needs volume.expr".into()))?;
            let e = Expr::parse(e)?;
            e.check_dim(metric.dim())?;
            VolumeForm::Explicit(e)
        }
        other => return Err(ConfigError(format!("volume.kind: unknown kind {other:?}"))),
    };
    if map.contains_key("volume.expr") && !matches!(volume, VolumeForm::Explicit(_)) {
        return Err(ConfigError("volume.expr is only valid with volume.kind = explicit".into()));
    }

    let points = parse_num(map, "points.count", DEFAULT_POINTS)?;
    if points == 0 {
        return Err(ConfigError("points.count must be positive".into()));
    }
    let seed = parse_num(map, "points.seed", 0u64)?;
    let region = match map.get("points.box") {
        None => None,
        Some(b) => Some(SampleBox::parse(b, metric.dim())?),
    };
    let degree = parse_num(map, "jet.degree", DEFAULT_DEGREE)?;
    if !(MIN_DEGREE..=MAX_DEGREE).contains(&degree) {
        return Err(ConfigError(format!(
            "jet.degree must lie in {MIN_DEGREE}..={MAX_DEGREE}, got {degree}"
        )));
    }
    let tol = Tolerances {
        jet: parse_num(map, "tol.jet", TOL_JET)?,
        quad: parse_num(map, "tol.quad", TOL_QUAD)?,
        floor: parse_num(map, "tol.floor", ABS_FLOOR)?,
    };
    if !(tol.jet > 0.0 && tol.quad > 0.0 && tol.floor >= 0.0) {
        return Err(ConfigError("tolerances must be positive".into()));
    }
    let format = match map.get("output.format").map_or("json-lines", String::as_str) {
        "json-lines" | "jsonl" => Format::JsonLines,
        "csv" => Format::Csv,
        other => return Err(ConfigError(format!("output.format: unknown format {other:?}"))),
    };
    let exec = match map.get("exec.mode").map_or("parallel", String::as_str) {
        "parallel" => Execution::Parallel,
        "sequential" => Execution::Sequential,
        other => return Err(ConfigError(format!("exec.mode: unknown mode {other:?}"))),
    };
    let f = Expr::parse(map.get(F_KEY).map_or("0.1*x1*x2", String::as_str))?;
    f.check_dim(metric.dim())?;
    Ok(RunConfig {
        metric,
        volume,
        volume_set,
        bh_nodes,
        bh_nodes_4d,
        points,
        seed,
        region,
        degree,
        tol,
        format,
        per_point: parse_bool(map, "output.per_point")?,
        exec,
        f,
    })
}

/// File values, then flag values on top.
pub fn merge(file: BTreeMap<String, String>, flags: Vec<(String, String)>) -> BTreeMap<String, String> {
    let mut map = file;
    for (k, v) in flags {
        map.insert(k, v);
    }
    map
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let c = build(&BTreeMap::new()).unwrap();
        assert_eq!(c.points, DEFAULT_POINTS);
        assert_eq!(c.degree, DEFAULT_DEGREE);
        assert_eq!(c.tol, Tolerances::default());
        assert_eq!(c.bh_nodes, DEFAULT_BH_NODES);
        assert_eq!(c.seed, 0);
        assert_eq!(c.format, Format::JsonLines);
        assert!(!c.volume_set);
        assert!(matches!(c.volume, VolumeForm::Coordinate));
    }

    #[test]
    fn flags_override_file() {
        let file = parse_file("points.seed = 7 # from file\nmetric.family=funk\n").unwrap();
        let map = merge(file, vec![("points.seed".into(), "9".into())]);
        let c = build(&map).unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!(c.metric.family(), "funk");
    }

    #[test]
    fn rejects_bad_input() {
        let bad = |s: &str| build(&parse_file(s).unwrap()).unwrap_err().0;
        assert!(bad("colour = red").contains("unknown key"));
        assert!(bad("points.count = many").contains("points.count"));
        assert!(bad("metric.family = randers\nmetric.dim = 2\nmetric.b = 1.2,0").contains("< 1"));
        assert!(bad("jet.degree = 3").contains("jet.degree"));
        assert!(parse_file("no equals sign").is_err());
    }

    #[test]
    fn volume_argument_splits_into_keys() {
        let k = volume_keys("explicit:exp(x1)").unwrap();
        assert_eq!(k[1], ("volume.expr".to_string(), "exp(x1)".to_string()));
        assert_eq!(volume_keys("bh:32").unwrap()[1].1, "32");
        assert!(volume_keys("lebesgue").is_err());
    }
}
