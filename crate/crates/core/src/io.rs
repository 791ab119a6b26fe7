//! State files, trace CSV and run metadata.
//!
//! A state file is one JSON document:
//!
//! ```json
//! {"dims":[2,2],"kind":"density","matrix":[[[0.5,0.0],[0.0,0.0]], ...]}
//! ```
//!
//! `matrix` is row-major with `[re, im]` pairs. Operators such as witnesses
//! use `"kind":"operator"` and skip the trace and positivity checks.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gilbert::{HaltCriteria, Trace, TraceRecord};
use crate::linalg::{ComplexMatrix, DensityMatrix};

pub const TRACE_HEADER: [&str; 3] = ["c_t", "c_s", "d2"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    #[default]
    Density,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub dims: Vec<usize>,
    #[serde(default)]
    pub kind: StateKind,
    pub matrix: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl StateFile {
    pub fn from_matrix(dims: &[usize], kind: StateKind, m: &ComplexMatrix) -> Self {
        let matrix = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .map(|j| [m[(i, j)].re, m[(i, j)].im])
                    .collect()
            })
            .collect();
        Self {
            dims: dims.to_vec(),
            kind,
            matrix,
            name: None,
            metadata: None,
        }
    }

    pub fn from_density(rho: &DensityMatrix) -> Self {
        Self::from_matrix(rho.dims(), StateKind::Density, rho.matrix())
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn to_matrix(&self) -> Result<ComplexMatrix> {
        let n = self.matrix.len();
        if n == 0 || self.matrix.iter().any(|row| row.len() != n) {
            return Err(Error::Format("matrix must be square and non-empty".into()));
        }
        Ok(ComplexMatrix::from_fn(n, n, |i, j| {
            let [re, im] = self.matrix[i][j];
            Complex64::new(re, im)
        }))
    }

    /// Validates as a density matrix. Fails for `kind: operator`.
    pub fn to_density(&self) -> Result<DensityMatrix> {
        if self.kind != StateKind::Density {
            return Err(Error::Validation(
                "file holds an operator, not a state".into(),
            ));
        }
        DensityMatrix::new(self.dims.clone(), self.to_matrix()?)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

pub fn read_state(path: impl AsRef<Path>) -> Result<DensityMatrix> {
    StateFile::read(path)?.to_density()
}

/// Reads the matrix of a state file of either kind.
pub fn read_operator(path: impl AsRef<Path>) -> Result<ComplexMatrix> {
    StateFile::read(path)?.to_matrix()
}

/// Shortest decimal form with at least 15 significant digits that parses
/// back to the same value.
pub fn format_d2(x: f64) -> String {
    for digits in 14..=16 {
        let s = format!("{x:.digits$e}");
        if s.parse::<f64>().ok() == Some(x) {
            return s;
        }
    }
    format!("{x:.16e}")
}

pub fn write_trace<W: Write>(out: W, trace: &Trace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace.records() {
        w.write_record([r.c_t.to_string(), r.c_s.to_string(), format_d2(r.d2)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trace_file(path: impl AsRef<Path>, trace: &Trace) -> Result<()> {
    write_trace(fs::File::create(path)?, trace)
}

/// Parses a trace CSV. Any deviation from the three-column layout is a
/// format error.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().ne(TRACE_HEADER) {
        return Err(Error::Format(format!(
            "expected header `c_t,c_s,d2`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != 3 {
            return Err(Error::Format(format!("row with {} fields", row.len())));
        }
        let bad = |what: &str| {
            Error::Format(format!(
                "bad {what} `{}`",
                row.iter().collect::<Vec<_>>().join(",")
            ))
        };
        records.push(TraceRecord {
            c_t: row[0].trim().parse().map_err(|_| bad("c_t"))?,
            c_s: row[1].trim().parse().map_err(|_| bad("c_s"))?,
            d2: row[2].trim().parse().map_err(|_| bad("d2"))?,
        });
    }
    Ok(records)
}

pub fn read_trace_file(path: impl AsRef<Path>) -> Result<Vec<TraceRecord>> {
    read_trace(fs::File::open(path)?)
}

/// Summary of a run, written next to the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub state: String,
    pub dims: Vec<usize>,
    pub seed: u64,
    pub halt: HaltCriteria,
    pub final_d2: f64,
    pub c_t: u64,
    pub c_s: u64,
    pub wall_seconds: f64,
}

impl RunMetadata {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{css_max_entangled, upb_tiles_state};
    use proptest::prelude::*;

    #[test]
    fn state_file_roundtrip_is_byte_identical() {
        for rho in [css_max_entangled(3).unwrap(), upb_tiles_state()] {
            let first = StateFile::from_density(&rho).to_json().unwrap();
            let back = StateFile::from_json(&first).unwrap().to_density().unwrap();
            assert_eq!(back, rho);
            let second = StateFile::from_density(&back).to_json().unwrap();
            assert_eq!(first, second);
        }
    }

    #[test]
    fn kind_defaults_to_density() {
        let s = r#"{"dims":[2],"matrix":[[[1,0],[0,0]],[[0,0],[0,0]]]}"#;
        let f = StateFile::from_json(s).unwrap();
        assert_eq!(f.kind, StateKind::Density);
        assert!(f.to_density().is_ok());
        let op = r#"{"dims":[2],"kind":"operator","matrix":[[[2,0],[0,0]],[[0,0],[0,0]]]}"#;
        let f = StateFile::from_json(op).unwrap();
        assert!(f.to_density().is_err());
        assert!(f.to_matrix().is_ok());
    }

    #[test]
    fn ragged_matrix_is_rejected() {
        let s = r#"{"dims":[2],"matrix":[[[1,0],[0,0]],[[0,0]]]}"#;
        assert!(matches!(
            StateFile::from_json(s).unwrap().to_matrix(),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn trace_csv_layout() {
        let trace = Trace::from_records(vec![
            TraceRecord {
                c_t: 3,
                c_s: 1,
                d2: 0.5,
            },
            TraceRecord {
                c_t: 7,
                c_s: 2,
                d2: 1.0 / 3.0,
            },
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("c_t,c_s,d2"));
        assert_eq!(lines.next(), Some("3,1,5.00000000000000e-1"));
        assert_eq!(read_trace(text.as_bytes()).unwrap(), trace.records());
    }

    #[test]
    fn two_column_csv_is_a_format_error() {
        let text = "c_t,c_s\n1,1\n";
        assert!(matches!(read_trace(text.as_bytes()), Err(Error::Format(_))));
        let text = "c_t,c_s,d2\n1,1\n";
        assert!(matches!(read_trace(text.as_bytes()), Err(Error::Format(_))));
        let text = "c_t,c_s,d2\n1,x,0.5\n";
        assert!(matches!(read_trace(text.as_bytes()), Err(Error::Format(_))));
    }

    proptest! {
        #[test]
        fn formatted_d2_roundtrips(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
            let s = format_d2(x);
            prop_assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            prop_assert!(mantissa.len() >= 15);
        }
    }
}
