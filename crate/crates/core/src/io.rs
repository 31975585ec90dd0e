//! Matrix Market (array, real, general) export and import with a JSON
//! sidecar carrying the grid metadata.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gallery::{BoundaryCondition, Embedding, OperatorHandle, Provenance};
use crate::lattice::{GridSpec, NodeScheme};

pub const MTX_HEADER: &str = "%%MatrixMarket matrix array real general";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub name: String,
    pub bc: Option<BoundaryCondition>,
    pub interval: (f64, f64),
    pub n: usize,
    pub weights: Vec<f64>,
    pub node_scheme: NodeScheme,
    pub provenance: Provenance,
}

/// Fixed 17-significant-digit scientific notation.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Sidecar path next to a matrix file (`m.mtx` → `m.json`).
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_matrix_market(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut s = String::with_capacity(m.len() * 26 + 64);
    s.push_str(MTX_HEADER);
    s.push('\n');
    s.push_str(&format!("{} {}\n", m.nrows(), m.ncols()));
    // nalgebra storage is column-major, as the array format requires.
    for v in m.iter() {
        s.push_str(&format_f64(*v));
        s.push('\n');
    }
    fs::write(path, s)?;
    Ok(())
}

pub fn read_matrix_market(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().trim();
    if !header.eq_ignore_ascii_case(MTX_HEADER) {
        return Err(Error::Parse(format!("unsupported Matrix Market header: {header}")));
    }
    let mut body = lines.filter(|l| !l.trim().is_empty() && !l.starts_with('%'));
    let dims = body.next().ok_or_else(|| Error::Parse("missing dimensions line".into()))?;
    let dims: Vec<usize> = dims
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad dimension {t}"))))
        .collect::<Result<_>>()?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse("dimensions line needs two entries".into()));
    };
    let values: Vec<f64> = body
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad value {l}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} values, found {}",
            rows * cols,
            values.len()
        )));
    }
    Ok(DMatrix::from_column_slice(rows, cols, &values))
}

pub fn export_operator(op: &OperatorHandle, path: &Path) -> Result<PathBuf> {
    write_matrix_market(path, op.matrix())?;
    let grid = op.grid();
    let sidecar = Sidecar {
        name: op.name().to_string(),
        bc: op.boundary(),
        interval: grid.interval(),
        n: grid.n(),
        weights: grid.weights().to_vec(),
        node_scheme: grid.node_scheme(),
        provenance: op.provenance(),
    };
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar)
        .map_err(|e| Error::Parse(format!("sidecar serialization: {e}")))?;
    fs::write(&side, json)?;
    Ok(side)
}

pub fn import_operator(path: &Path) -> Result<OperatorHandle> {
    let m = read_matrix_market(path)?;
    let side = fs::read_to_string(sidecar_path(path))?;
    let meta: Sidecar =
        serde_json::from_str(&side).map_err(|e| Error::Parse(format!("sidecar: {e}")))?;
    let grid = GridSpec::new(meta.interval.0, meta.interval.1, meta.n, meta.node_scheme)?;
    if grid.weights().len() != meta.weights.len()
        || grid
            .weights()
            .iter()
            .zip(&meta.weights)
            .any(|(a, b)| (a - b).abs() > 1e-14 * a.abs().max(1.0))
    {
        return Err(Error::Parse("sidecar weights do not match the grid".into()));
    }
    let mut op = OperatorHandle::new(meta.name, grid.clone(), m, meta.provenance)?;
    if let Some(bc) = meta.bc {
        op = op.with_boundary(bc);
        if bc == BoundaryCondition::Dirichlet {
            let (a, b) = grid.interval();
            let host = GridSpec::new(a, b, grid.n() + 2, NodeScheme::EndpointsIncluded)?;
            op = op.with_embedding(Embedding {
                host,
                indices: (1..=grid.n()).collect(),
            })?;
        }
    }
    Ok(op)
}
