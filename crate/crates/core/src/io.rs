//! Graph files (JSON), function files (CSV) and report serialization.
//!
//! Reals are written with 17 significant digits and trailing zeros dropped,
//! so every `f64` round-trips and identical values give identical bytes.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::besov::{BoundaryFunction, BoundaryFunctional};
use crate::error::{Error, Result};
use crate::generate::Domain;
use crate::graph::{BesovParams, EdgeRecord, MetricMeasureGraph, VertexRecord};
use crate::sobolev::VertexFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileParams {
    pub p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(default, rename = "Theta", skip_serializing_if = "Option::is_none")]
    pub codim: Option<f64>,
}

impl FileParams {
    /// Resolves to Besov parameters. Without either exponent, `Theta = 1`.
    pub fn besov(&self) -> Result<BesovParams> {
        match (self.theta, self.codim) {
            (None, None) => BesovParams::from_codimension(self.p, 1.0),
            (t, c) => BesovParams::resolve(self.p, t, c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    pub params: FileParams,
    pub vertices: Vec<VertexRecord>,
    pub edges: Vec<EdgeRecord>,
}

impl GraphFile {
    pub fn from_domain(domain: Domain, params: FileParams) -> Self {
        Self {
            params,
            vertices: domain.vertices,
            edges: domain.edges,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_string(self)
    }

    pub fn graph(&self) -> Result<MetricMeasureGraph> {
        MetricMeasureGraph::new(&self.vertices, &self.edges)
    }
}

/// `%.17g`: 17 significant digits, trailing zeros removed.
pub fn format_real(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if x == 0.0 {
        return if x.is_sign_negative() {
            "-0".into()
        } else {
            "0".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let m = trim_zeros(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Pretty JSON with reals written by [`format_real`]; non-finite values become `null`.
struct RealFormatter(PrettyFormatter<'static>);

impl Formatter for RealFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> std::io::Result<()> {
        w.write_all(format_real(value).as_bytes())
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty-printed JSON; struct fields keep declaration order, maps are sorted.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut out, RealFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    out.push(b'\n');
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

/// One-line JSON with the same real formatting.
pub fn to_json_line<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = Vec::new();
    write_compact(&v, &mut out)?;
    Ok(String::from_utf8(out).expect("serde_json writes UTF-8"))
}

fn write_compact(v: &serde_json::Value, out: &mut Vec<u8>) -> Result<()> {
    use serde_json::Value;
    match v {
        Value::Number(n) if n.is_f64() => out.extend(format_real(n.as_f64().unwrap()).bytes()),
        Value::Array(items) => {
            out.push(b'[');
            for (k, item) in items.iter().enumerate() {
                if k > 0 {
                    out.push(b',');
                }
                write_compact(item, out)?;
            }
            out.push(b']');
        }
        Value::Object(map) => {
            out.push(b'{');
            for (k, (key, item)) in map.iter().enumerate() {
                if k > 0 {
                    out.push(b',');
                }
                serde_json::to_writer(&mut *out, key)?;
                out.push(b':');
                write_compact(item, out)?;
            }
            out.push(b'}');
        }
        other => serde_json::to_writer(&mut *out, other)?,
    }
    Ok(())
}

/// Flattens a report into `key,value` rows with dotted keys for nested fields.
pub fn to_csv_rows<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    fn walk(prefix: &str, v: &serde_json::Value, rows: &mut Vec<(String, String)>) {
        use serde_json::Value;
        let join = |k: &str| {
            if prefix.is_empty() {
                k.to_string()
            } else {
                format!("{prefix}.{k}")
            }
        };
        match v {
            Value::Object(map) => map.iter().for_each(|(k, item)| walk(&join(k), item, rows)),
            Value::Array(items) => items
                .iter()
                .enumerate()
                .for_each(|(k, item)| walk(&join(&k.to_string()), item, rows)),
            Value::Number(n) if n.is_f64() => {
                rows.push((prefix.into(), format_real(n.as_f64().unwrap())))
            }
            Value::String(s) => rows.push((prefix.into(), s.clone())),
            Value::Null => rows.push((prefix.into(), String::new())),
            other => rows.push((prefix.into(), other.to_string())),
        }
    }
    let mut rows = Vec::new();
    walk("", &serde_json::to_value(value)?, &mut rows);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"])?;
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv of UTF-8 fields"))
}

#[derive(Debug, Deserialize)]
struct ValueRow {
    id: String,
    value: f64,
}

#[derive(Debug, Deserialize)]
struct WeightRow {
    id: String,
    weight: f64,
}

fn rows<T: for<'de> Deserialize<'de>>(reader: impl Read, column: &str) -> Result<Vec<T>> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = r.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "id" || &headers[1] != column {
        return Err(Error::Format(format!(
            "expected header `id,{column}`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Places `(id, value)` pairs on the slots of `targets` (vertex indices), each exactly once.
fn assign(
    graph: &MetricMeasureGraph,
    pairs: impl IntoIterator<Item = (String, f64)>,
    slot: impl Fn(usize) -> Option<usize>,
    len: usize,
    what: &str,
) -> Result<Vec<f64>> {
    let mut out = vec![f64::NAN; len];
    let mut seen = HashSet::new();
    for (id, value) in pairs {
        let z = graph.vertex(&id)?;
        let k = slot(z).ok_or_else(|| Error::Format(format!("`{id}` is not a {what} vertex")))?;
        if !seen.insert(k) {
            return Err(Error::Format(format!("`{id}` listed twice")));
        }
        if !value.is_finite() {
            return Err(Error::Format(format!("non-finite value at `{id}`")));
        }
        out[k] = value;
    }
    if let Some(k) = out.iter().position(|v| v.is_nan()) {
        return Err(Error::Format(format!(
            "missing value for a {what} vertex (slot {k})"
        )));
    }
    Ok(out)
}

pub fn read_boundary_function(
    reader: impl Read,
    graph: &MetricMeasureGraph,
) -> Result<BoundaryFunction> {
    let rows: Vec<ValueRow> = rows(reader, "value")?;
    let values = assign(
        graph,
        rows.into_iter().map(|r| (r.id, r.value)),
        |z| graph.boundary_slot(z),
        graph.num_boundary(),
        "boundary",
    )?;
    Ok(BoundaryFunction(values))
}

/// Functional file; weights must sum to zero unless `renormalize` is set.
pub fn read_functional(
    reader: impl Read,
    graph: &MetricMeasureGraph,
    renormalize: bool,
) -> Result<BoundaryFunctional> {
    let rows: Vec<WeightRow> = rows(reader, "weight")?;
    let weights = assign(
        graph,
        rows.into_iter().map(|r| (r.id, r.weight)),
        |z| graph.boundary_slot(z),
        graph.num_boundary(),
        "boundary",
    )?;
    if renormalize {
        Ok(BoundaryFunctional::renormalized(weights))
    } else {
        BoundaryFunctional::new(weights)
    }
}

pub fn read_vertex_function(
    reader: impl Read,
    graph: &MetricMeasureGraph,
) -> Result<VertexFunction> {
    let rows: Vec<ValueRow> = rows(reader, "value")?;
    let n = graph.num_vertices();
    let values = assign(
        graph,
        rows.into_iter().map(|r| (r.id, r.value)),
        Some,
        n,
        "graph",
    )?;
    Ok(VertexFunction(values))
}

fn write_pairs<'a>(
    ids: impl IntoIterator<Item = &'a str>,
    values: &[f64],
    column: &str,
) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", column])?;
    for (id, v) in ids.into_iter().zip(values) {
        w.write_record([id, &format_real(*v)])?;
    }
    finish_csv(w)
}

pub fn boundary_function_csv(f: &BoundaryFunction, graph: &MetricMeasureGraph) -> Result<String> {
    write_pairs(
        graph.boundary().iter().map(|&z| graph.id(z)),
        f.values(),
        "value",
    )
}

pub fn functional_csv(l: &BoundaryFunctional, graph: &MetricMeasureGraph) -> Result<String> {
    write_pairs(
        graph.boundary().iter().map(|&z| graph.id(z)),
        l.weights(),
        "weight",
    )
}

pub fn vertex_function_csv(u: &VertexFunction, graph: &MetricMeasureGraph) -> Result<String> {
    write_pairs(
        (0..graph.num_vertices()).map(|z| graph.id(z)),
        u.values(),
        "value",
    )
}

/// `x,y` series for external plotting.
pub fn series_csv(points: &[(f64, f64)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["x", "y"])?;
    for (x, y) in points {
        w.write_record([format_real(*x), format_real(*y)])?;
    }
    finish_csv(w)
}
