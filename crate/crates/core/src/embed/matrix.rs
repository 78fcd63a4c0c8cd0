use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::corpus::{Corpus, Side};

use super::EmbedError;

/// Maximum allowed deviation of a column's Euclidean norm from 1.
pub const NORM_TOLERANCE: f64 = 1e-3;
/// Column means beyond this magnitude are reported as diagnostics.
pub const MEAN_TOLERANCE: f64 = 0.01;

/// Column-per-statement matrix of unit-norm embedding vectors.
///
/// Rows are embedding attributes, columns are statements in ref order. Values
/// are stored column-major so each statement's vector is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    side: Side,
    n_dims: usize,
    refs: Vec<usize>,
    values: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Builds a matrix from statement columns, checking finiteness and unit norm.
    pub fn from_columns(
        side: Side,
        refs: Vec<usize>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self, EmbedError> {
        let mat = Self::assemble(side, refs, columns)?;
        for j in 0..mat.m_statements() {
            let norm = l2(mat.column(j));
            if (norm - 1.0).abs() > NORM_TOLERANCE {
                return Err(EmbedError::NotUnitNorm {
                    column: j + 1,
                    norm,
                });
            }
        }
        Ok(mat)
    }

    /// Builds a matrix after dividing each column by its own norm.
    pub fn normalized(
        side: Side,
        refs: Vec<usize>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self, EmbedError> {
        let mut mat = Self::assemble(side, refs, columns)?;
        let n = mat.n_dims;
        for j in 0..mat.m_statements() {
            let col = &mut mat.values[j * n..(j + 1) * n];
            let norm = l2(col);
            if norm == 0.0 {
                return Err(EmbedError::ZeroVector { column: j + 1 });
            }
            col.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(mat)
    }

    fn assemble(
        side: Side,
        refs: Vec<usize>,
        columns: Vec<Vec<f64>>,
    ) -> Result<Self, EmbedError> {
        if refs.len() != columns.len() {
            return Err(EmbedError::Shape(format!(
                "{} refs for {} columns",
                refs.len(),
                columns.len()
            )));
        }
        let n_dims = columns.first().map_or(0, Vec::len);
        if !columns.is_empty() && n_dims < 2 {
            return Err(EmbedError::Shape(format!(
                "embedding vectors need at least 2 attributes, got {n_dims}"
            )));
        }
        let mut values = Vec::with_capacity(n_dims * columns.len());
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != n_dims {
                return Err(EmbedError::Shape(format!(
                    "column {} has {} attributes, expected {n_dims}",
                    j + 1,
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(EmbedError::NonFinite {
                    row: i + 1,
                    column: j + 1,
                });
            }
            values.extend(col);
        }
        Ok(Self {
            side,
            n_dims,
            refs,
            values,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn m_statements(&self) -> usize {
        self.refs.len()
    }

    /// Ref numbers aligned with columns.
    pub fn refs(&self) -> &[usize] {
        &self.refs
    }

    /// Column index of a statement ref.
    pub fn position(&self, ref_num: usize) -> Option<usize> {
        self.refs.iter().position(|&r| r == ref_num)
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_dims..(j + 1) * self.n_dims]
    }

    pub fn column_for(&self, ref_num: usize) -> Option<&[f64]> {
        self.position(ref_num).map(|j| self.column(j))
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_dims.max(1))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[col * self.n_dims + row]
    }

    /// Columns (1-based) whose mean exceeds [`MEAN_TOLERANCE`] in magnitude.
    pub fn off_center_columns(&self) -> Vec<(usize, f64)> {
        self.columns()
            .enumerate()
            .filter_map(|(j, c)| {
                let mean = c.iter().sum::<f64>() / c.len() as f64;
                (mean.abs() > MEAN_TOLERANCE).then_some((j + 1, mean))
            })
            .collect()
    }

    /// Checks that the matrix has one column per corpus statement, in ref order.
    pub fn check_against(&self, corpus: &Corpus) -> Result<(), EmbedError> {
        if self.m_statements() != corpus.len() {
            return Err(EmbedError::Shape(format!(
                "matrix has {} columns but the {} corpus has {} statements",
                self.m_statements(),
                corpus.side(),
                corpus.len()
            )));
        }
        Ok(())
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Writes a headerless CSV with one row per attribute and one column per statement.
pub fn save_matrix(mat: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<(), EmbedError> {
    let path = path.as_ref();
    let io = |source| EmbedError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let mut line = String::new();
    for i in 0..mat.n_dims() {
        line.clear();
        for j in 0..mat.m_statements() {
            if j > 0 {
                line.push(',');
            }
            // Debug formatting of f64 is the shortest string that round-trips.
            line.push_str(&format!("{:?}", mat.get(i, j)));
        }
        line.push('\n');
        out.write_all(line.as_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Reads a matrix written by [`save_matrix`]; refs are assigned 1..m.
pub fn load_matrix(path: impl AsRef<Path>, side: Side) -> Result<EmbeddingMatrix, EmbedError> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| EmbedError::Csv(format!("{}: {e}", path.display())))?;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| EmbedError::Csv(format!("{}: {e}", path.display())))?;
        let row = i + 1;
        if i == 0 {
            columns = vec![Vec::new(); record.len()];
        } else if record.len() != columns.len() {
            return Err(EmbedError::Ragged {
                row,
                found: record.len(),
                expected: columns.len(),
            });
        }
        for (j, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| EmbedError::NonNumeric {
                row,
                column: j + 1,
                cell: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(EmbedError::NonFinite {
                    row,
                    column: j + 1,
                });
            }
            columns[j].push(value);
        }
    }
    if columns.is_empty() {
        return Err(EmbedError::Csv(format!("{}: no data", path.display())));
    }
    let refs = (1..=columns.len()).collect();
    EmbeddingMatrix::from_columns(side, refs, columns)
}

/// Reads a matrix and checks its column count against `corpus`.
pub fn load_matrix_for(
    path: impl AsRef<Path>,
    corpus: &Corpus,
) -> Result<EmbeddingMatrix, EmbedError> {
    let mat = load_matrix(path, corpus.side())?;
    mat.check_against(corpus)?;
    Ok(mat)
}
