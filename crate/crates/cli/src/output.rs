//! Report records and their json-lines and csv encodings. Every float is
//! written with 17 significant digits.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// A float written with 17 significant digits; non-finite values become
/// `null` in json.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F17(pub f64);

pub fn fmt17(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            let raw = RawValue::from_string(fmt17(self.0)).map_err(serde::ser::Error::custom)?;
            raw.serialize(s)
        } else {
            s.serialize_none()
        }
    }
}

pub fn f17s(v: &[f64]) -> Vec<F17> {
    v.iter().copied().map(F17).collect()
}

fn joined(v: &[f64]) -> String {
    v.iter().map(|x| fmt17(*x)).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub x: Vec<F17>,
    pub y: Vec<F17>,
}

impl PointRecord {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        PointRecord { x: f17s(x), y: f17s(y) }
    }
}

/// One catalog family.
#[derive(Debug, Clone, Serialize)]
pub struct FamilyRecord {
    #[serde(rename = "type")]
    pub kind_tag: &'static str,
    pub family: &'static str,
    pub kind: &'static str,
    pub params: BTreeMap<&'static str, &'static str>,
}

/// Aggregate of one check, or one point of one check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub suite: String,
    pub id: String,
    pub fixture: String,
    pub evaluated: usize,
    pub skipped: usize,
    pub failed: usize,
    pub residual: F17,
    pub scale: F17,
    pub tol: F17,
    pub pass: bool,
    pub point: Option<PointRecord>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRecord {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub suite: String,
    pub fixtures: Vec<String>,
    pub seed: u64,
    pub points: usize,
    pub degree: usize,
    pub checks: usize,
    pub failed: usize,
    pub pass: bool,
    pub notes: Vec<String>,
}

/// Everything about one tangent point. Tensors are flattened row-major,
/// upper indices first.
#[derive(Debug, Clone, Serialize)]
pub struct EvalRecord {
    #[serde(rename = "type")]
    pub kind: &'static str,
    pub metric: String,
    pub volume: String,
    pub index: usize,
    pub x: Vec<F17>,
    pub y: Vec<F17>,
    pub values: BTreeMap<String, Vec<F17>>,
    #[serde(rename = "chi")]
    pub chi: BTreeMap<&'static str, Vec<F17>>,
    #[serde(rename = "Wo")]
    pub wo: BTreeMap<&'static str, Vec<F17>>,
}

pub const CHECK_COLUMNS: [&str; 15] = [
    "record", "suite", "id", "fixture", "evaluated", "skipped", "failed", "residual", "scale", "tol",
    "pass", "x", "y", "error", "notes",
];

pub const EVAL_COLUMNS: [&str; 9] = [
    "record", "metric", "volume", "index", "x", "y", "quantity", "component", "value",
];

pub const FAMILY_COLUMNS: [&str; 3] = ["family", "kind", "params"];

/// Writes records in the configured format.
pub enum Sink<'a> {
    Json(&'a mut dyn Write),
    Csv(Box<csv::Writer<&'a mut dyn Write>>),
}

impl<'a> Sink<'a> {
    pub fn json(out: &'a mut dyn Write) -> Self {
        Sink::Json(out)
    }

    pub fn csv(out: &'a mut dyn Write, header: &[&str]) -> std::io::Result<Self> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header)?;
        Ok(Sink::Csv(Box::new(w)))
    }

    fn json_line<T: Serialize>(out: &mut dyn Write, rec: &T) -> std::io::Result<()> {
        serde_json::to_writer(&mut *out, rec)?;
        out.write_all(b"\n")
    }

    fn row(&mut self, cols: &[String]) -> std::io::Result<()> {
        match self {
            Sink::Csv(w) => Ok(w.write_record(cols)?),
            Sink::Json(_) => unreachable!("csv row on a json sink"),
        }
    }

    pub fn family(&mut self, r: &FamilyRecord) -> std::io::Result<()> {
        match self {
            Sink::Json(out) => Self::json_line(*out, r),
            Sink::Csv(_) => {
                let params = r
                    .params
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join(" ");
                self.row(&[r.family.to_string(), r.kind.to_string(), params])
            }
        }
    }

    pub fn check(&mut self, r: &CheckRecord) -> std::io::Result<()> {
        match self {
            Sink::Json(out) => Self::json_line(*out, r),
            Sink::Csv(_) => {
                let (x, y) = r.point.as_ref().map_or((String::new(), String::new()), |p| {
                    let xs: Vec<f64> = p.x.iter().map(|v| v.0).collect();
                    let ys: Vec<f64> = p.y.iter().map(|v| v.0).collect();
                    (joined(&xs), joined(&ys))
                });
                self.row(&[
                    r.kind.to_string(),
                    r.suite.clone(),
                    r.id.clone(),
                    r.fixture.clone(),
                    r.evaluated.to_string(),
                    r.skipped.to_string(),
                    r.failed.to_string(),
                    fmt17(r.residual.0),
                    fmt17(r.scale.0),
                    fmt17(r.tol.0),
                    r.pass.to_string(),
                    x,
                    y,
                    r.error.clone().unwrap_or_default(),
                    String::new(),
                ])
            }
        }
    }

    pub fn summary(&mut self, r: &SummaryRecord) -> std::io::Result<()> {
        match self {
            Sink::Json(out) => Self::json_line(*out, r),
            Sink::Csv(_) => self.row(&[
                r.kind.to_string(),
                r.suite.clone(),
                r.suite.clone(),
                r.fixtures.join(" ; "),
                r.checks.to_string(),
                String::new(),
                r.failed.to_string(),
                String::new(),
                String::new(),
                String::new(),
                r.pass.to_string(),
                String::new(),
                String::new(),
                String::new(),
                r.notes.join(" ; "),
            ]),
        }
    }

    pub fn eval(&mut self, r: &EvalRecord) -> std::io::Result<()> {
        match self {
            Sink::Json(out) => Self::json_line(*out, r),
            Sink::Csv(_) => {
                let xs: Vec<f64> = r.x.iter().map(|v| v.0).collect();
                let ys: Vec<f64> = r.y.iter().map(|v| v.0).collect();
                let (x, y) = (joined(&xs), joined(&ys));
                let mut rows = Vec::new();
                for (q, vals) in &r.values {
                    rows.push((q.clone(), vals));
                }
                for (route, vals) in &r.chi {
                    rows.push((format!("chi.{route}"), vals));
                }
                for (route, vals) in &r.wo {
                    rows.push((format!("Wo.{route}"), vals));
                }
                for (q, vals) in rows {
                    for (i, v) in vals.iter().enumerate() {
                        self.row(&[
                            r.kind.to_string(),
                            r.metric.clone(),
                            r.volume.clone(),
                            r.index.to_string(),
                            x.clone(),
                            y.clone(),
                            q.clone(),
                            i.to_string(),
                            fmt17(v.0),
                        ])?;
                    }
                }
                Ok(())
            }
        }
    }

    pub fn finish(self) -> std::io::Result<()> {
        match self {
            Sink::Json(out) => out.flush(),
            Sink::Csv(mut w) => w.flush(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_with_17_digits() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            let s = fmt17(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
        assert_eq!(serde_json::to_string(&F17(0.5)).unwrap(), "5.0000000000000000e-1");
        assert_eq!(serde_json::to_string(&F17(f64::NAN)).unwrap(), "null");
    }
}
