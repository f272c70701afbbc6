//! Input documents, report envelopes and number formatting.

use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ChargeConfiguration, ComponentPartition};
use crate::faraday::DiscreteMeasure;
use crate::kernel::KernelSpec;
use crate::moments::quadrature::DensityGrid;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: parse error at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("validation error: {kind}: {message}")]
    Validation { kind: &'static str, message: String },
    #[error("usage error: {0}")]
    Usage(String),
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        Self::Validation {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum KernelType {
    Newtonian,
    Log,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct KernelDoc {
    #[serde(rename = "type")]
    pub kind: KernelType,
    #[serde(default)]
    pub normalized: bool,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ChargeDoc {
    pub position: Vec<f64>,
    pub q: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct ComponentDoc {
    pub points: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
pub struct GridDoc {
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub values: Vec<f64>,
}

/// Union of every input schema; commands pick the parts they need.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct InputDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub charges: Option<Vec<ChargeDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<Vec<ComponentDoc>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<[f64; 3]>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridDoc>,
}

/// Raw input bytes plus the parsed document.
pub struct Input {
    pub path: String,
    pub bytes: Vec<u8>,
    pub doc: InputDoc,
}

pub fn read_input(path: &Path) -> Result<Input, CliError> {
    let shown = path.display().to_string();
    let bytes = std::fs::read(path).map_err(|e| CliError::Io {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    let doc = parse_input(&shown, &bytes)?;
    Ok(Input {
        path: shown,
        bytes,
        doc,
    })
}

/// Parses a configuration document. A report produced by this tool whose
/// `result` is itself a configuration is accepted too.
pub fn parse_input(path: &str, bytes: &[u8]) -> Result<InputDoc, CliError> {
    let parse_err = |e: serde_json::Error| CliError::Parse {
        path: path.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let value: Value = serde_json::from_slice(bytes).map_err(parse_err)?;
    let value = match value {
        Value::Object(mut map) if map.contains_key("manifest") && map.contains_key("result") => {
            map.remove("result").unwrap_or(Value::Null)
        }
        v => v,
    };
    // Re-parse from text so field errors keep their positions.
    if let Ok(doc) = serde_json::from_value::<InputDoc>(value.clone()) {
        return Ok(doc);
    }
    serde_json::from_slice::<InputDoc>(bytes).map_err(parse_err)
}

impl InputDoc {
    fn dimension(&self) -> Result<usize, CliError> {
        self.dimension
            .ok_or_else(|| CliError::Usage("input has no \"dimension\"".into()))
    }

    pub fn kernel(&self) -> Result<KernelSpec, CliError> {
        let d = self.dimension()?;
        if let Some(k) = &self.kernel {
            let log = k.kind == KernelType::Log;
            if log != (d == 2) {
                return Err(CliError::Validation {
                    kind: "DimensionMismatch",
                    message: format!("kernel type {:?} does not match dimension {d}", k.kind),
                });
            }
            return Ok(KernelSpec::new(d, k.normalized)?);
        }
        Ok(KernelSpec::unnormalized(d)?)
    }

    pub fn configuration(&self) -> Result<ChargeConfiguration, CliError> {
        let d = self.dimension()?;
        let charges = self
            .charges
            .as_ref()
            .ok_or_else(|| CliError::Usage("input has no \"charges\"".into()))?;
        let entries = charges.iter().map(|c| (c.position.clone(), c.q)).collect();
        Ok(ChargeConfiguration::new(d, entries)?)
    }

    pub fn partition(&self) -> Result<ComponentPartition, CliError> {
        let d = self.dimension()?;
        let comps = self
            .components
            .as_ref()
            .ok_or_else(|| CliError::Usage("input has no \"components\"".into()))?;
        let points = comps.iter().map(|c| c.points.clone()).collect();
        let targets = comps.iter().map(|c| c.q).collect();
        Ok(ComponentPartition::new(d, points, targets)?)
    }

    pub fn measure(&self) -> Result<Option<DiscreteMeasure>, CliError> {
        match (&self.nodes, &self.masses) {
            (Some(n), Some(m)) => Ok(Some(DiscreteMeasure::new(n.clone(), m.clone())?)),
            (None, None) => Ok(None),
            _ => Err(CliError::Usage("measure needs both \"nodes\" and \"masses\"".into())),
        }
    }

    pub fn grid(&self) -> Result<Option<DensityGrid>, CliError> {
        self.grid
            .as_ref()
            .map(|g| DensityGrid::new(g.nodes.clone(), g.weights.clone(), g.values.clone()))
            .transpose()
            .map_err(Into::into)
    }

    /// Document form of a configuration, readable back as input.
    pub fn from_configuration(cfg: &ChargeConfiguration, kernel: Option<KernelDoc>) -> Self {
        Self {
            dimension: Some(cfg.dimension()),
            kernel,
            charges: Some(
                cfg.charges()
                    .iter()
                    .map(|c| ChargeDoc {
                        position: c.position.coords().to_vec(),
                        q: c.q,
                    })
                    .collect(),
            ),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time_ms: u64,
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    /// `ok`, `negative` or `error`.
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<&'static str>,
    pub messages: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub manifest: RunManifest,
    pub result: Value,
    pub diagnostics: Diagnostics,
}

/// Pretty JSON with every float written to 17 significant digits.
struct RoundTrip<'a>(PrettyFormatter<'a>);

impl Formatter for RoundTrip<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn to_json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, RoundTrip(PrettyFormatter::new()));
    value
        .serialize(&mut ser)
        .expect("report values serialize infallibly");
    out.push(b'\n');
    out
}

pub const CSV_HEADER: &str = "x,y,z,residual,eig1,eig2,eig3,kind";

/// One CSV row per point.
pub fn csv_bytes(rows: &[([f64; 3], f64, [f64; 3], &str)]) -> Vec<u8> {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for (p, r, e, kind) in rows {
        let nums: Vec<String> = p
            .iter()
            .chain(std::iter::once(r))
            .chain(e.iter())
            .map(|v| format!("{v:.16e}"))
            .collect();
        s.push_str(&nums.join(","));
        s.push(',');
        s.push_str(kind);
        s.push('\n');
    }
    s.into_bytes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        let x = 0.1 + 0.2;
        let bytes = to_json_bytes(&serde_json::json!({ "v": x, "n": 3 }));
        let back: Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back["v"].as_f64().unwrap(), x);
        assert_eq!(back["n"].as_u64().unwrap(), 3);
        assert!(String::from_utf8(bytes).unwrap().contains("3.0000000000000004e-1"));
    }

    #[test]
    fn parse_errors_carry_positions() {
        let e = parse_input("x.json", b"").unwrap_err();
        assert!(matches!(e, CliError::Parse { line: 1, .. }), "{e}");
        let e = parse_input("x.json", b"{\n  \"dimension\": 3,\n  \"charges\": [}\n").unwrap_err();
        assert!(matches!(e, CliError::Parse { line: 3, .. }), "{e}");
    }

    #[test]
    fn duplicate_positions_fail_validation() {
        let doc = parse_input(
            "x.json",
            br#"{"dimension": 2, "charges": [{"position": [0, 0], "q": 1}, {"position": [0, 0], "q": 1}]}"#,
        )
        .unwrap();
        let e = doc.configuration().unwrap_err();
        assert!(e.to_string().contains("DuplicatePosition"), "{e}");
    }

    #[test]
    fn csv_layout() {
        let b = csv_bytes(&[([0.0, 0.0, 1.0], 0.0, [-1.0, 0.0, 1.0], "degenerate")]);
        let s = String::from_utf8(b).unwrap();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert!(lines.next().unwrap().ends_with(",degenerate"));
    }
}
