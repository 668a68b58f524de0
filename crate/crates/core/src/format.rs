//! JSON instance and solution files.
//!
//! Instances come in two kinds:
//!
//! ```json
//! {"kind": "matrix", "A": [[1, 0.5], [0.2, 1]], "m": [0, 0], "w": [0.5, 0.5]}
//! {"kind": "geometry", "body": {"type": "lp", "p": "inf", "dim": 2},
//!  "map": [[2, 0], [0, 1]], "hyperplanes": [{"normal": [1, 0], "offset": 0}]}
//! ```
//!
//! `p` is a number in `[1, inf)` or the string `"inf"`; `map` is optional.
//! Numbers are written in shortest round-trip form, so reading a written
//! file back gives bit-identical values.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::geometry::{Body, Hyperplane};
use crate::matrix::Matrix;
use crate::solver::{Certificate, PlankSystem};

/// Why a file was rejected: JSON syntax / shape errors carry a position,
/// validation errors carry the offending field.
#[derive(Debug, Clone, PartialEq)]
pub enum FormatError {
    Syntax { line: usize, column: usize, message: String },
    Field { path: String, message: String },
}

impl fmt::Display for FormatError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormatError::Syntax { line, column, message } => write!(f, "line {line}, column {column}: {message}"),
            FormatError::Field { path, message } => write!(f, "field `{path}`: {message}"),
        }
    }
}

impl std::error::Error for FormatError {}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        let full = e.to_string();
        let message = match full.rfind(" at line ") {
            Some(cut) => full[..cut].to_string(),
            None => full,
        };
        FormatError::Syntax { line: e.line(), column: e.column(), message }
    }
}

fn field(path: impl Into<String>, message: impl fmt::Display) -> FormatError {
    FormatError::Field { path: path.into(), message: message.to_string() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Exponent {
    Finite(f64),
    Named(String),
}

impl Exponent {
    pub fn from_p(p: f64) -> Self {
        if p.is_infinite() {
            Exponent::Named("inf".into())
        } else {
            Exponent::Finite(p)
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Exponent::Finite(p) if *p >= 1.0 && p.is_finite() => Some(*p),
            Exponent::Named(s) if s == "inf" => Some(f64::INFINITY),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BodySpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub p: Exponent,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HyperplaneSpec {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum InstanceFile {
    Matrix {
        #[serde(rename = "A")]
        a: Vec<Vec<f64>>,
        m: Vec<f64>,
        w: Vec<f64>,
    },
    Geometry {
        body: BodySpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        map: Option<Vec<Vec<f64>>>,
        hyperplanes: Vec<HyperplaneSpec>,
    },
}

/// A validated instance.
#[derive(Debug, Clone, PartialEq)]
pub enum Instance {
    Matrix(PlankSystem),
    Geometry { body: Body, hyperplanes: Vec<Hyperplane> },
}

fn parse_matrix(path: &str, rows: &[Vec<f64>]) -> Result<Matrix, FormatError> {
    if rows.is_empty() {
        return Err(field(path, "must have at least one row"));
    }
    let n = rows.len();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(field(format!("{path}[{i}]"), format!("has {} entries, expected {n}", r.len())));
        }
    }
    Matrix::from_rows(rows).map_err(|e| field(path, e))
}

impl InstanceFile {
    pub fn from_system(sys: &PlankSystem) -> Self {
        InstanceFile::Matrix { a: sys.a().to_rows(), m: sys.m().to_vec(), w: sys.w().to_vec() }
    }

    /// Checks every invariant the solvers rely on.
    pub fn validate(&self) -> Result<Instance, FormatError> {
        match self {
            InstanceFile::Matrix { a, m, w } => {
                let a = parse_matrix("A", a)?;
                let n = a.rows();
                if m.len() != n {
                    return Err(field("m", format!("has {} entries, A has {n} rows", m.len())));
                }
                if w.len() != n {
                    return Err(field("w", format!("has {} entries, A has {n} rows", w.len())));
                }
                for i in 0..n {
                    if (a[(i, i)] - 1.0).abs() > crate::solver::UNIT_DIAGONAL_TOL {
                        return Err(field(format!("A[{i}][{i}]"), format!("is {}, expected 1", a[(i, i)])));
                    }
                }
                if let Some(i) = w.iter().position(|v| v.is_nan() || *v <= 0.0) {
                    return Err(field(format!("w[{i}]"), format!("is {}, must be positive", w[i])));
                }
                let sum: f64 = w.iter().sum();
                if sum > 1.0 + crate::solver::WIDTH_SUM_TOL {
                    return Err(field("w", format!("sums to {sum}, must be at most 1")));
                }
                let sys = PlankSystem::new(a, m.clone(), w.clone()).map_err(|e| field("", e))?;
                Ok(Instance::Matrix(sys))
            }
            InstanceFile::Geometry { body, map, hyperplanes } => {
                if body.kind != "lp" {
                    return Err(field("body.type", format!("unknown body type {:?}", body.kind)));
                }
                let p = body
                    .p
                    .value()
                    .ok_or_else(|| field("body.p", format!("{:?} is not a number in [1, inf] or \"inf\"", body.p)))?;
                let mut shape = Body::lp_ball(p, body.dim).map_err(|e| field("body", e))?;
                if let Some(rows) = map {
                    let t = parse_matrix("map", rows)?;
                    shape = Body::linear_image(shape, t).map_err(|e| field("map", e))?;
                }
                if hyperplanes.is_empty() {
                    return Err(field("hyperplanes", "must list at least one hyperplane"));
                }
                let mut hps = Vec::with_capacity(hyperplanes.len());
                for (i, h) in hyperplanes.iter().enumerate() {
                    if h.normal.len() != body.dim {
                        return Err(field(
                            format!("hyperplanes[{i}].normal"),
                            format!("has {} entries, body dimension is {}", h.normal.len(), body.dim),
                        ));
                    }
                    let norm = h.normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if !norm.is_finite() || norm < 1e-12 {
                        return Err(field(format!("hyperplanes[{i}].normal"), "is null"));
                    }
                    if !h.offset.is_finite() {
                        return Err(field(format!("hyperplanes[{i}].offset"), "is not finite"));
                    }
                    hps.push(Hyperplane::new(h.normal.clone(), h.offset));
                }
                Ok(Instance::Geometry { body: shape, hyperplanes: hps })
            }
        }
    }
}

/// Parses and validates an instance file.
pub fn parse_instance(text: &str) -> Result<Instance, FormatError> {
    let file: InstanceFile = serde_json::from_str(text)?;
    file.validate()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CertificateSpec {
    EqualWidth,
    Replicated { resolution: usize },
    DirectWeighted,
    Homothet,
}

impl CertificateSpec {
    pub fn from_certificate(c: Certificate) -> Self {
        match c {
            Certificate::EqualWidth => CertificateSpec::EqualWidth,
            Certificate::Replicated(n) => CertificateSpec::Replicated { resolution: n },
            Certificate::DirectWeighted => CertificateSpec::DirectWeighted,
        }
    }

    pub fn certificate(&self) -> Option<Certificate> {
        match *self {
            CertificateSpec::EqualWidth => Some(Certificate::EqualWidth),
            CertificateSpec::Replicated { resolution } => Some(Certificate::Replicated(resolution)),
            CertificateSpec::DirectWeighted => Some(Certificate::DirectWeighted),
            CertificateSpec::Homothet => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Norms {
    pub l1: f64,
    pub l2sq: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gauge: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverMetadata {
    pub iterations: usize,
    pub flips: usize,
    #[serde(default)]
    pub sheet_resolution: Option<usize>,
    pub system_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionFile {
    pub lambda: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
    pub margins: Vec<f64>,
    pub norms: Norms,
    pub certificate: CertificateSpec,
    pub metadata: SolverMetadata,
}

pub fn parse_solution(text: &str) -> Result<SolutionFile, FormatError> {
    let file: SolutionFile = serde_json::from_str(text)?;
    if let Some(i) = file.lambda.iter().position(|v| !v.is_finite()) {
        return Err(field(format!("lambda[{i}]"), "is not finite"));
    }
    if let Some(c) = &file.center {
        if let Some(i) = c.iter().position(|v| !v.is_finite()) {
            return Err(field(format!("center[{i}]"), "is not finite"));
        }
    }
    if matches!(file.certificate, CertificateSpec::Homothet) && file.center.is_none() {
        return Err(field("center", "is required for a homothet certificate"));
    }
    Ok(file)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizationFile {
    pub theta: Vec<f64>,
    #[serde(rename = "U")]
    pub u: Vec<Vec<f64>>,
    #[serde(rename = "H")]
    pub h: Vec<Vec<f64>>,
    pub residual: f64,
    pub iterations: usize,
    pub nuclear_trace: f64,
    pub tol: f64,
    pub converged: bool,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

impl From<FormatError> for Error {
    fn from(e: FormatError) -> Self {
        Error::InvalidSystem(e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_instance_roundtrip() {
        let text = r#"{"kind": "matrix", "A": [[1, 0.5], [-0.25, 1]], "m": [0, 1], "w": [0.3, 0.2]}"#;
        let Instance::Matrix(sys) = parse_instance(text).unwrap() else { panic!() };
        assert_eq!(sys.a()[(1, 0)], -0.25);
        let again = to_json(&InstanceFile::from_system(&sys));
        assert_eq!(parse_instance(&again).unwrap(), Instance::Matrix(sys));
    }

    #[test]
    fn geometry_instance_with_map_and_inf() {
        let text = r#"{"kind": "geometry", "body": {"type": "lp", "p": "inf", "dim": 2},
            "map": [[2, 0], [0, 1]], "hyperplanes": [{"normal": [1, 0], "offset": 0.5}]}"#;
        let Instance::Geometry { body, hyperplanes } = parse_instance(text).unwrap() else { panic!() };
        assert_eq!(body.dim(), 2);
        assert_eq!(hyperplanes.len(), 1);
        assert!((body.gauge(&[2.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_instance("{\n  \"kind\": \"matrix\",\n  \"A\": [[1,]]\n}").unwrap_err();
        assert!(matches!(err, FormatError::Syntax { line: 3, .. }), "{err}");
        assert!(matches!(parse_instance("{\"kind\": \"sphere\"}"), Err(FormatError::Syntax { .. })));
    }

    #[test]
    fn validation_errors_name_the_field() {
        let cases = [
            (r#"{"kind":"matrix","A":[[2]],"m":[0],"w":[0.5]}"#, "A[0][0]"),
            (r#"{"kind":"matrix","A":[[1,0],[0,1]],"m":[0,0],"w":[0.6,0.6]}"#, "w"),
            (r#"{"kind":"matrix","A":[[1,0],[0,1]],"m":[0],"w":[0.1,0.1]}"#, "m"),
            (r#"{"kind":"matrix","A":[[1,0],[0]],"m":[0,0],"w":[0.1,0.1]}"#, "A[1]"),
            (r#"{"kind":"matrix","A":[[1]],"m":[0],"w":[0]}"#, "w[0]"),
            (
                r#"{"kind":"geometry","body":{"type":"lp","p":0.5,"dim":2},"hyperplanes":[{"normal":[1,0],"offset":0}]}"#,
                "body.p",
            ),
            (
                r#"{"kind":"geometry","body":{"type":"lp","p":"huge","dim":2},"hyperplanes":[{"normal":[1,0],"offset":0}]}"#,
                "body.p",
            ),
            (
                r#"{"kind":"geometry","body":{"type":"lp","p":2,"dim":2},"hyperplanes":[{"normal":[0,0],"offset":0}]}"#,
                "hyperplanes[0].normal",
            ),
            (
                r#"{"kind":"geometry","body":{"type":"lp","p":2,"dim":2},"hyperplanes":[{"normal":[1],"offset":0}]}"#,
                "hyperplanes[0].normal",
            ),
            (
                r#"{"kind":"geometry","body":{"type":"lp","p":2,"dim":2},"map":[[1,1],[1,1]],"hyperplanes":[{"normal":[1,0],"offset":0}]}"#,
                "map",
            ),
            (r#"{"kind":"geometry","body":{"type":"box","p":2,"dim":2},"hyperplanes":[]}"#, "body.type"),
        ];
        for (text, want) in cases {
            match parse_instance(text) {
                Err(FormatError::Field { path, .. }) => assert_eq!(path, want, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn solution_file_roundtrip() {
        let file = SolutionFile {
            lambda: vec![0.1 + 0.2, -1.0 / 3.0],
            center: None,
            ratio: None,
            margins: vec![0.5, 0.5],
            norms: Norms { l1: 0.6, l2sq: 0.2, weighted: Some(0.4), gauge: None },
            certificate: CertificateSpec::Replicated { resolution: 40 },
            metadata: SolverMetadata { iterations: 3, flips: 1, sheet_resolution: Some(40), system_size: 12 },
        };
        let back = parse_solution(&to_json(&file)).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.lambda[0].to_bits(), (0.1f64 + 0.2).to_bits());
    }

    #[test]
    fn homothet_solution_requires_center() {
        let text = r#"{"lambda":[0.5],"margins":[0.5],"norms":{"l1":0.5,"l2sq":0.25},
            "certificate":{"type":"homothet"},"metadata":{"iterations":0,"flips":0,"system_size":1}}"#;
        assert!(matches!(parse_solution(text), Err(FormatError::Field { .. })));
    }
}
