//! File formats.
//!
//! Problem files are JSON objects with a row-major `matrix` (a list of rows,
//! each a list of `[re, im]` pairs) and an `observation` vector of `[re, im]`
//! pairs. Numbers in written artifacts are rounded to 12 significant digits
//! so outputs compare byte-for-byte across runs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(deserialize_with = "rectangular")]
    pub matrix: Vec<Vec<[f64; 2]>>,
    pub observation: Vec<[f64; 2]>,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn rectangular<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<[f64; 2]>>, D::Error> {
    let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
    let Some(first) = rows.first() else {
        return Err(D::Error::custom("matrix has no rows"));
    };
    let p = first.len();
    if p == 0 {
        return Err(D::Error::custom("matrix has no columns"));
    }
    if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != p) {
        return Err(D::Error::custom(format!(
            "matrix row {i} has {} entries, expected {p}",
            row.len()
        )));
    }
    Ok(rows)
}

impl ProblemFile {
    pub fn from_parts(matrix: &Array2<Complex64>, observation: &Array1<Complex64>) -> Self {
        ProblemFile {
            schema_version: SCHEMA_VERSION,
            matrix: matrix
                .rows()
                .into_iter()
                .map(|r| r.iter().map(|z| pair(*z)).collect())
                .collect(),
            observation: observation.iter().map(|z| pair(*z)).collect(),
        }
    }

    pub fn matrix(&self) -> Array2<Complex64> {
        let n = self.matrix.len();
        let p = self.matrix[0].len();
        Array2::from_shape_fn((n, p), |(i, j)| {
            let [re, im] = self.matrix[i][j];
            Complex64::new(re, im)
        })
    }

    pub fn observation(&self) -> Array1<Complex64> {
        self.observation
            .iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect()
    }
}

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub fn read_problem(path: &Path) -> CliResult<ProblemFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

pub fn sha256_hex(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Rounds to 12 significant digits; maps `-0` to `0`.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return if x == 0.0 { 0.0 } else { x };
    }
    let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    if r == 0.0 {
        0.0
    } else {
        r
    }
}

/// Fixed-width CSV number.
pub fn fmt_num(x: f64) -> String {
    format!("{:.10e}", if x == 0.0 { 0.0 } else { x })
}

/// Rounds every float in a JSON tree.
pub fn rounded(value: Value) -> Value {
    match value {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().expect("f64 number"));
            serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
        }
        Value::Array(v) => Value::Array(v.into_iter().map(rounded).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, rounded(v))).collect()),
        other => other,
    }
}

pub fn complex_pairs(values: impl IntoIterator<Item = Complex64>) -> Vec<[f64; 2]> {
    values.into_iter().map(pair).collect()
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let v = serde_json::to_value(value).expect("output types serialize");
    let mut text = serde_json::to_string_pretty(&rounded(v)).expect("JSON values serialize");
    text.push('\n');
    write_text(path, &text)
}

/// Comma-separated table with a header line.
pub fn csv_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
