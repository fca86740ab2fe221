//! File formats: measure and decomposition JSON, sample and pair CSV, and a
//! deterministic JSON writer (sorted keys, 17 significant digits).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_value::Value;
use thiserror::Error;

use crate::disintegration::MixtureDecomposition;
use crate::measure::{MeasureError, ShiftedExponential, Uniform, ZeroMeanMeasure};
use crate::optimal::AlternativeDisintegration;
use crate::scalar::{parse_rational, Rational, Scalar};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("cannot parse number {0:?}")]
    BadNumber(String),
    #[error("{0}")]
    Schema(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

type Result<T> = std::result::Result<T, IoError>;

/// A number given either as a JSON number or as a string such as `"3/10"`,
/// `"0.25"`, `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Float(f64),
    Text(String),
}

impl Num {
    pub fn rational(&self) -> Result<Rational> {
        match self {
            Num::Float(x) => Rational::from_f64(*x).ok_or_else(|| IoError::BadNumber(x.to_string())),
            Num::Text(s) => parse_rational(s.trim()).ok_or_else(|| IoError::BadNumber(s.clone())),
        }
    }

    pub fn float(&self) -> Result<f64> {
        match self {
            Num::Float(x) => Ok(*x),
            Num::Text(s) => match s.trim() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                t => parse_rational(t).map(|q| q.to_f64()).ok_or_else(|| IoError::BadNumber(s.clone())),
            },
        }
    }
}

/// `{"backend":"discrete","atoms":[[x,mass],...]}`, or an empirical sample,
/// or a named analytic law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "lowercase")]
pub enum MeasureSpec {
    Discrete {
        atoms: Vec<(Num, Num)>,
        #[serde(default)]
        recentre: bool,
        #[serde(default)]
        mean_tolerance: Option<f64>,
    },
    Empirical {
        samples: Vec<f64>,
    },
    Analytic {
        law: String,
        #[serde(default)]
        half_width: Option<f64>,
    },
}

impl MeasureSpec {
    pub fn build(&self) -> Result<ZeroMeanMeasure> {
        match self {
            MeasureSpec::Discrete { atoms, recentre, mean_tolerance } => {
                let pairs = atoms
                    .iter()
                    .map(|(x, p)| Ok((x.rational()?, p.rational()?)))
                    .collect::<Result<Vec<_>>>()?;
                let tol = mean_tolerance.unwrap_or(crate::measure::DEFAULT_MEAN_TOLERANCE);
                Ok(ZeroMeanMeasure::from_rational_atoms_tol(pairs, *recentre, tol)?)
            }
            MeasureSpec::Empirical { samples } => Ok(ZeroMeanMeasure::from_samples(samples, true)?),
            MeasureSpec::Analytic { law, half_width } => match law.as_str() {
                "uniform" => Ok(ZeroMeanMeasure::from_analytic(Arc::new(Uniform { half_width: half_width.unwrap_or(1.0) }))?),
                "shifted_exponential" => Ok(ZeroMeanMeasure::from_analytic(Arc::new(ShiftedExponential))?),
                other => Err(IoError::Schema(format!("unknown analytic law {other:?}"))),
            },
        }
    }
}

pub fn parse_measure(json: &str) -> Result<ZeroMeanMeasure> {
    serde_json::from_str::<MeasureSpec>(json)?.build()
}

/// Serializable view of a discrete measure.
pub fn measure_spec(measure: &ZeroMeanMeasure) -> Option<MeasureSpec> {
    let atoms = match measure.exact() {
        Some(t) => t.atoms().map(|(x, p)| (Num::Text(x.to_string()), Num::Text(p.to_string()))).collect(),
        None => measure.atoms()?.into_iter().map(|(x, p)| (Num::Float(x), Num::Float(p))).collect(),
    };
    Some(MeasureSpec::Discrete { atoms, recentre: false, mean_tolerance: None })
}

/// One component of the decomposition schema `{"a":…,"b":…,"w":…}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub a: Num,
    pub b: Num,
    pub w: Num,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionFile {
    pub components: Vec<ComponentRecord>,
}

impl DecompositionFile {
    pub fn from_decomposition<S: Scalar>(d: &MixtureDecomposition<S>) -> Self {
        let num = |s: &S| if S::EXACT { Num::Text(s.to_string()) } else { Num::Float(s.to_f64()) };
        DecompositionFile {
            components: d
                .components
                .iter()
                .map(|c| ComponentRecord { a: num(&c.law.a), b: num(&c.law.b), w: num(&c.weight) })
                .collect(),
        }
    }

    /// Reads the components as an alternative disintegration; `a` and `b`
    /// may come in either order.
    pub fn alternative(&self) -> Result<AlternativeDisintegration<f64>> {
        let comps = self
            .components
            .iter()
            .map(|c| {
                let (a, b, w) = (c.a.float()?, c.b.float()?, c.w.float()?);
                Ok((w, a.max(b), a.min(b)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(AlternativeDisintegration::new(comps))
    }
}

pub fn parse_alternative(json: &str) -> Result<AlternativeDisintegration<f64>> {
    serde_json::from_str::<DecompositionFile>(json)?.alternative()
}

fn csv_reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

fn is_header(record: &csv::StringRecord) -> bool {
    record.iter().any(|f| f.parse::<f64>().is_err() && !matches!(f, "inf" | "-inf"))
}

/// Rows of a numeric CSV with an optional header line; returns the header
/// (if any) and the rows.
pub fn read_table<R: Read>(r: R) -> Result<(Option<Vec<String>>, Vec<Vec<f64>>)> {
    let mut header = None;
    let mut rows = Vec::new();
    for (i, rec) in csv_reader(r).records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        if i == 0 && is_header(&rec) {
            header = Some(rec.iter().map(str::to_string).collect());
            continue;
        }
        let row = rec
            .iter()
            .map(|f| Num::Text(f.to_string()).float())
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

/// One-column sample CSV.
pub fn read_samples<R: Read>(r: R) -> Result<Vec<f64>> {
    let (_, rows) = read_table(r)?;
    rows.into_iter()
        .map(|row| match row.as_slice() {
            [x] => Ok(*x),
            _ => Err(IoError::Schema(format!("expected one column, got {}", row.len()))),
        })
        .collect()
}

/// Pair CSV with columns `x,r` (header optional, extra columns ignored), or
/// a single column `x`, in which case the `r` column is `None`.
pub fn read_pairs<R: Read>(r: R) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let (header, rows) = read_table(r)?;
    let col = |name: &str, default: usize| {
        header.as_ref().map_or(Some(default), |h| h.iter().position(|c| c.eq_ignore_ascii_case(name)))
    };
    let width = rows.first().map_or(0, Vec::len);
    let xi = col("x", 0).ok_or_else(|| IoError::Schema("no x column".into()))?;
    let ri = col("r", 1).filter(|&i| i < width);
    let pick = |i: usize| {
        rows.iter()
            .map(|row| row.get(i).copied().ok_or_else(|| IoError::Schema("ragged CSV".into())))
            .collect::<Result<Vec<f64>>>()
    };
    let xs = pick(xi)?;
    let rs = ri.map(pick).transpose()?;
    Ok((xs, rs))
}

/// CSV text from a header and rows, floats in the canonical format.
pub fn write_table(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(format_float).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// `{:.16e}` for finite values (negative zero printed as zero); `inf`,
/// `-inf`, `nan` otherwise.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        format!("{:.16e}", 0.0)
    } else if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// Deterministic JSON: object keys sorted, floats with 17 significant
/// digits, non-finite floats as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_value::to_value(value).map_err(|e| IoError::Schema(e.to_string()))?;
    let mut out = String::new();
    write_value(&v, 0, &mut out);
    out.push('\n');
    Ok(out)
}

fn key_text(k: &Value) -> String {
    match k {
        Value::String(s) => s.clone(),
        Value::Char(c) => c.to_string(),
        Value::F64(x) => format_float(*x),
        Value::F32(x) => format_float(f64::from(*x)),
        other => {
            let mut s = String::new();
            write_value(other, 0, &mut s);
            s.trim_matches('"').to_string()
        }
    }
}

fn indent(out: &mut String, level: usize) {
    out.push('\n');
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(v: &Value, level: usize, out: &mut String) {
    match v {
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::U8(x) => write!(out, "{x}").unwrap(),
        Value::U16(x) => write!(out, "{x}").unwrap(),
        Value::U32(x) => write!(out, "{x}").unwrap(),
        Value::U64(x) => write!(out, "{x}").unwrap(),
        Value::I8(x) => write!(out, "{x}").unwrap(),
        Value::I16(x) => write!(out, "{x}").unwrap(),
        Value::I32(x) => write!(out, "{x}").unwrap(),
        Value::I64(x) => write!(out, "{x}").unwrap(),
        Value::F32(x) => write_float(f64::from(*x), out),
        Value::F64(x) => write_float(*x, out),
        Value::Char(c) => out.push_str(&serde_json::to_string(&c.to_string()).unwrap()),
        Value::String(s) => out.push_str(&serde_json::to_string(s).unwrap()),
        Value::Unit | Value::Option(None) => out.push_str("null"),
        Value::Option(Some(inner)) | Value::Newtype(inner) => write_value(inner, level, out),
        Value::Seq(items) => write_seq(items.iter(), level, out),
        Value::Bytes(bytes) => write_seq(bytes.iter().map(|b| Value::U8(*b)).collect::<Vec<_>>().iter(), level, out),
        Value::Map(map) => {
            let sorted: BTreeMap<String, &Value> = map.iter().map(|(k, v)| (key_text(k), v)).collect();
            if sorted.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (k, v)) in sorted.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                indent(out, level + 1);
                out.push_str(&serde_json::to_string(k).unwrap());
                out.push_str(": ");
                write_value(v, level + 1, out);
            }
            indent(out, level);
            out.push('}');
        }
    }
}

fn write_seq<'a>(items: impl ExactSizeIterator<Item = &'a Value>, level: usize, out: &mut String) {
    if items.len() == 0 {
        out.push_str("[]");
        return;
    }
    // Short scalar rows stay on one line.
    let items: Vec<&Value> = items.collect();
    let flat = items.len() <= 4 && items.iter().all(|v| !matches!(v, Value::Seq(_) | Value::Map(_)));
    out.push('[');
    for (i, v) in items.iter().enumerate() {
        if i > 0 {
            out.push(',');
            if flat {
                out.push(' ');
            }
        }
        if !flat {
            indent(out, level + 1);
        }
        write_value(v, level + 1, out);
    }
    if !flat {
        indent(out, level);
    }
    out.push(']');
}

fn write_float(x: f64, out: &mut String) {
    if x.is_finite() {
        out.push_str(&format_float(x));
    } else {
        write!(out, "\"{}\"", format_float(x)).unwrap();
    }
}
