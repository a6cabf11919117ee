//! JSON input schemas and deterministic report serialization.
//!
//! Graph file: `{"index_base": 0|1, "n": int, "edges": [[u, v, w], ...]}`
//! with `index_base` defaulting to 0 and `w` to 1.0.
//!
//! Covariance file: `{"iid": {"variance": x}}` or `{"matrix": [[...], ...]}`.
//!
//! Load profile file: `{"mu": [...]}`.
//!
//! Penalty file: `{"p_diag": [...], "q": [...]}` with `q` defaulting to zeros.

use std::io;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::control::PenaltyModel;
use crate::error::{Error, Result};
use crate::graph::{Edge, WeightedGraph};
use crate::stochastic::{iid_covariance, validate_covariance, CovarianceModel, LoadProfile};

#[derive(Debug, Clone, Copy, PartialEq, Deserialize, Serialize)]
#[serde(untagged)]
pub enum EdgeEntry {
    Weighted(usize, usize, f64),
    Unit(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GraphFile {
    #[serde(default)]
    pub index_base: usize,
    pub n: usize,
    pub edges: Vec<EdgeEntry>,
}

impl GraphFile {
    pub fn into_graph(self) -> Result<WeightedGraph> {
        if self.index_base > 1 {
            return Err(Error::Parse(format!("index_base must be 0 or 1, got {}", self.index_base)));
        }
        let base = self.index_base;
        let shift = |x: usize| {
            x.checked_sub(base)
                .ok_or_else(|| Error::Parse(format!("node {x} is below index base {base}")))
        };
        let edges = self
            .edges
            .into_iter()
            .map(|e| {
                let (u, v, weight) = match e {
                    EdgeEntry::Weighted(u, v, w) => (u, v, w),
                    EdgeEntry::Unit(u, v) => (u, v, 1.0),
                };
                Ok(Edge { u: shift(u)?, v: shift(v)?, weight })
            })
            .collect::<Result<Vec<_>>>()?;
        WeightedGraph::new(self.n, edges)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum CovarianceFile {
    Iid { variance: f64 },
    Matrix(Vec<Vec<f64>>),
}

impl CovarianceFile {
    pub fn into_model(self, n: usize) -> Result<CovarianceModel> {
        match self {
            CovarianceFile::Iid { variance } => iid_covariance(n, variance),
            CovarianceFile::Matrix(rows) => {
                if rows.len() != n {
                    return Err(Error::DimensionMismatch { expected: n, found: rows.len() });
                }
                if let Some(r) = rows.iter().find(|r| r.len() != n) {
                    return Err(Error::DimensionMismatch { expected: n, found: r.len() });
                }
                validate_covariance(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct LoadProfileFile {
    pub mu: Vec<f64>,
}

impl LoadProfileFile {
    pub fn into_profile(self, n: usize) -> Result<LoadProfile> {
        if self.mu.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.mu.len() });
        }
        LoadProfile::new(DVector::from_vec(self.mu))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyFile {
    pub p_diag: Vec<f64>,
    #[serde(default)]
    pub q: Option<Vec<f64>>,
}

impl PenaltyFile {
    pub fn into_model(self, n: usize, xi: f64) -> Result<PenaltyModel> {
        if self.p_diag.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.p_diag.len() });
        }
        let q = self.q.unwrap_or_else(|| vec![0.0; n]);
        PenaltyModel::new(DVector::from_vec(self.p_diag), DVector::from_vec(q), xi)
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Reads a graph file; returns the graph (0-based) and the file's index base.
pub fn read_graph(path: &Path) -> Result<(WeightedGraph, usize)> {
    let file: GraphFile = read_json(path)?;
    let base = file.index_base;
    Ok((file.into_graph()?, base))
}

pub fn read_covariance(path: &Path, n: usize) -> Result<CovarianceModel> {
    read_json::<CovarianceFile>(path)?.into_model(n)
}

pub fn read_load_profile(path: &Path, n: usize) -> Result<LoadProfile> {
    read_json::<LoadProfileFile>(path)?.into_profile(n)
}

pub fn read_penalty(path: &Path, n: usize, xi: f64) -> Result<PenaltyModel> {
    read_json::<PenaltyFile>(path)?.into_model(n, xi)
}

/// Formats `x` with 17 significant digits, trailing zeros removed, in the
/// style of C's `%.17g`.
pub fn format_g17(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.16e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    let sign = if negative { "-" } else { "" };

    if !(-5..17).contains(&exp) {
        let (lead, frac) = digits.split_at(1);
        let frac = frac.trim_end_matches('0');
        return if frac.is_empty() {
            format!("{sign}{lead}e{exp}")
        } else {
            format!("{sign}{lead}.{frac}e{exp}")
        };
    }
    let (int_part, frac_part) = if exp >= 0 {
        let split = (exp + 1) as usize;
        (digits[..split].to_string(), digits[split..].to_string())
    } else {
        ("0".to_string(), "0".repeat((-exp - 1) as usize) + &digits)
    };
    let frac_part = frac_part.trim_end_matches('0');
    if frac_part.is_empty() {
        format!("{sign}{int_part}")
    } else {
        format!("{sign}{int_part}.{frac_part}")
    }
}

/// Pretty JSON with floats written by [`format_g17`].
struct G17Formatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for G17Formatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_g17(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

/// Serializes `value` as pretty JSON with 17-significant-digit floats. Keys
/// appear in declaration order, so equal inputs give byte-identical output.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let fmt = G17Formatter { inner: PrettyFormatter::with_indent(b"  ") };
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// Row-major nested vectors of a matrix, for serialization.
pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn g17_examples() {
        assert_eq!(format_g17(0.625), "0.625");
        assert_eq!(format_g17(0.1), "0.10000000000000001");
        assert_eq!(format_g17(2.0), "2");
        assert_eq!(format_g17(-1.25), "-1.25");
        assert_eq!(format_g17(1e20), "1e20");
        assert_eq!(format_g17(1.5e-7), "1.4999999999999999e-7");
        assert_eq!(format_g17(0.0001), "0.0001");
        assert_eq!(format_g17(123456.0), "123456");
        assert_eq!(format_g17(f64::NAN), "null");
    }

    proptest! {
        #[test]
        fn g17_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL) {
            let s = format_g17(x);
            let back: f64 = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn graph_file_with_index_base() {
        let g: GraphFile =
            serde_json::from_str(r#"{"index_base": 1, "n": 3, "edges": [[1, 2], [2, 3, 2.5]]}"#)
                .unwrap();
        let g = g.into_graph().unwrap();
        assert_eq!(g.edges()[0], Edge { u: 0, v: 1, weight: 1.0 });
        assert_eq!(g.edges()[1], Edge { u: 1, v: 2, weight: 2.5 });

        let bad: GraphFile =
            serde_json::from_str(r#"{"index_base": 1, "n": 3, "edges": [[0, 1]]}"#).unwrap();
        assert!(matches!(bad.into_graph(), Err(Error::Parse(_))));
    }

    #[test]
    fn covariance_files() {
        let iid: CovarianceFile = serde_json::from_str(r#"{"iid": {"variance": 2.0}}"#).unwrap();
        assert_eq!(iid.into_model(3).unwrap().total_variance(), 6.0);
        let m: CovarianceFile =
            serde_json::from_str(r#"{"matrix": [[1.0, 0.2], [0.2, 1.0]]}"#).unwrap();
        assert!((m.into_model(2).unwrap().total_variance() - 2.4).abs() < 1e-15);
        let m: CovarianceFile = serde_json::from_str(r#"{"matrix": [[1.0]]}"#).unwrap();
        assert!(matches!(m.into_model(2), Err(Error::DimensionMismatch { .. })));
        assert!(serde_json::from_str::<CovarianceFile>(r#"{"diag": [1.0]}"#).is_err());
    }

    #[test]
    fn json_output_is_stable() {
        #[derive(Serialize)]
        struct Out {
            b: f64,
            a: Vec<f64>,
        }
        let s = to_json_string(&Out { b: 0.1, a: vec![1.0, -0.5] }).unwrap();
        assert_eq!(s, "{\n  \"b\": 0.10000000000000001,\n  \"a\": [\n    1,\n    -0.5\n  ]\n}");
    }
}
