//! JSON matrix documents: `{"n": <int>, "rows": [[...], ...]}` with `2n`
//! rows of `2n` finite numbers each.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::SquareMatrix2n;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixDocument {
    n: usize,
    rows: Vec<Vec<f64>>,
}

pub fn parse_matrix_json(text: &str) -> Result<SquareMatrix2n> {
    let doc: MatrixDocument =
        serde_json::from_str(text).map_err(|e| Error::MatrixFile(e.to_string()))?;
    if doc.n == 0 {
        return Err(Error::MatrixFile("n must be at least 1".into()));
    }
    let size = 2 * doc.n;
    if doc.rows.len() != size {
        return Err(Error::MatrixFile(format!(
            "expected {size} rows for n = {}, found {}",
            doc.n,
            doc.rows.len()
        )));
    }
    if let Some(i) = doc.rows.iter().position(|r| r.len() != size) {
        return Err(Error::MatrixFile(format!(
            "ragged row {i}: expected {size} entries, found {}",
            doc.rows[i].len()
        )));
    }
    SquareMatrix2n::from_rows(&doc.rows).map_err(|e| Error::MatrixFile(e.to_string()))
}

pub fn read_matrix_file(path: impl AsRef<Path>) -> Result<SquareMatrix2n> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::MatrixFile(format!("{}: {e}", path.display())))?;
    parse_matrix_json(&text)
}

pub fn to_matrix_json(m: &SquareMatrix2n) -> String {
    let doc = MatrixDocument {
        n: m.dim_n(),
        rows: m.rows(),
    };
    serde_json::to_string(&doc).expect("matrix document serializes")
}
