//! Real matrices with dense and compressed-sparse-row storage, plus
//! Matrix Market I/O.
//!
//! Both storages expose the same row-oriented operations so objective sums
//! and gradients can be evaluated in a fixed row order regardless of the
//! backing representation.

use std::cell::Cell;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Compressed sparse rows: `row_ptr[i]..row_ptr[i+1]` indexes the entries of
/// row `i`, with column indices ascending within a row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from triplets. Duplicate (row, col) entries are summed.
    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Self {
        entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        let mut row = 0usize;
        for (i, j, v) in entries {
            debug_assert!(i < nrows && j < ncols);
            while row < i {
                row_ptr.push(col_idx.len());
                row += 1;
            }
            if col_idx.len() > row_ptr[row] && *col_idx.last().unwrap() == j {
                *values.last_mut().unwrap() += v; // duplicate entry
            } else {
                col_idx.push(j);
                values.push(v);
            }
        }
        while row < nrows {
            row_ptr.push(col_idx.len());
            row += 1;
        }
        CsrMatrix { nrows, ncols, row_ptr, col_idx, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    fn row_entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        self.col_idx[lo..hi].iter().copied().zip(self.values[lo..hi].iter().copied())
    }
}

/// A real `n x d` matrix, dense or CSR.
#[derive(Clone, Debug)]
pub enum Matrix {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

impl Matrix {
    pub fn nrows(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.nrows(),
            Matrix::Sparse(m) => m.nrows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.ncols(),
            Matrix::Sparse(m) => m.ncols,
        }
    }

    /// Stored nonzeros: entry count for CSR, nonzero value count for dense.
    pub fn nnz(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.iter().filter(|v| **v != 0.0).count(),
            Matrix::Sparse(m) => m.nnz(),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, Matrix::Sparse(_))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Matrix::Dense(m) => m.clone(),
            Matrix::Sparse(m) => {
                let mut out = DMatrix::zeros(m.nrows, m.ncols);
                for i in 0..m.nrows {
                    for (j, v) in m.row_entries(i) {
                        out[(i, j)] = v;
                    }
                }
                out
            }
        }
    }

    /// `A x`, accumulated row by row in ascending row order.
    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols(), "matvec dimension");
        let mut out = DVector::zeros(self.nrows());
        match self {
            Matrix::Dense(m) => out.gemv(1.0, m, x, 0.0),
            Matrix::Sparse(m) => {
                for i in 0..m.nrows {
                    out[i] = m.row_entries(i).map(|(j, v)| v * x[j]).sum();
                }
            }
        }
        out
    }

    /// `A^T v`.
    pub fn tr_matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        assert_eq!(v.len(), self.nrows(), "tr_matvec dimension");
        let mut out = DVector::zeros(self.ncols());
        match self {
            Matrix::Dense(m) => out.gemv_tr(1.0, m, v, 0.0),
            Matrix::Sparse(m) => {
                for i in 0..m.nrows {
                    let vi = v[i];
                    if vi != 0.0 {
                        for (j, a) in m.row_entries(i) {
                            out[j] += a * vi;
                        }
                    }
                }
            }
        }
        out
    }

    /// Weighted Gram matrix `A^T diag(w) A` as a dense `d x d` matrix.
    pub fn gram_weighted(&self, w: &DVector<f64>) -> DMatrix<f64> {
        assert_eq!(w.len(), self.nrows(), "gram weight dimension");
        let d = self.ncols();
        let mut out = DMatrix::zeros(d, d);
        match self {
            Matrix::Dense(m) => {
                // (sqrt(w) A)^T (sqrt(w) A) keeps the computation in one gemm
                let mut scaled = m.clone();
                for i in 0..m.nrows() {
                    let s = w[i];
                    for j in 0..d {
                        scaled[(i, j)] *= s;
                    }
                }
                out.gemm_tr(1.0, m, &scaled, 0.0);
            }
            Matrix::Sparse(m) => {
                for i in 0..m.nrows {
                    let wi = w[i];
                    if wi == 0.0 {
                        continue;
                    }
                    let lo = m.row_ptr[i];
                    let hi = m.row_ptr[i + 1];
                    for a in lo..hi {
                        let (ja, va) = (m.col_idx[a], m.values[a]);
                        for b in lo..hi {
                            out[(ja, m.col_idx[b])] += wi * va * m.values[b];
                        }
                    }
                }
            }
        }
        // fold out symmetry drift from accumulation order
        for i in 0..d {
            for j in (i + 1)..d {
                let s = 0.5 * (out[(i, j)] + out[(j, i)]);
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    /// Plain Gram matrix `A^T A`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.gram_weighted(&DVector::from_element(self.nrows(), 1.0))
    }

    /// Dot product of row `i` with `x`.
    pub fn row_dot(&self, i: usize, x: &DVector<f64>) -> f64 {
        match self {
            Matrix::Dense(m) => m.row(i).transpose().dot(x),
            Matrix::Sparse(m) => m.row_entries(i).map(|(j, v)| v * x[j]).sum(),
        }
    }

    /// `out += coeff * a_i` where `a_i` is row `i` as a d-vector.
    pub fn row_axpy(&self, i: usize, coeff: f64, out: &mut DVector<f64>) {
        match self {
            Matrix::Dense(m) => {
                for j in 0..m.ncols() {
                    out[j] += coeff * m[(i, j)];
                }
            }
            Matrix::Sparse(m) => {
                for (j, v) in m.row_entries(i) {
                    out[j] += coeff * v;
                }
            }
        }
    }

    /// Row `i` as a dense d-vector.
    pub fn row_vector(&self, i: usize) -> DVector<f64> {
        let mut out = DVector::zeros(self.ncols());
        self.row_axpy(i, 1.0, &mut out);
        out
    }
}

/// Counting facade over row accesses. Stochastic solvers route their
/// per-step row reads through this so tests can audit that a mini-batch
/// step touches exactly the sampled rows.
pub struct CountedRows<'a> {
    matrix: &'a Matrix,
    count: Cell<u64>,
}

impl<'a> CountedRows<'a> {
    pub fn new(matrix: &'a Matrix) -> Self {
        CountedRows { matrix, count: Cell::new(0) }
    }

    pub fn row_dot(&self, i: usize, x: &DVector<f64>) -> f64 {
        self.count.set(self.count.get() + 1);
        self.matrix.row_dot(i, x)
    }

    /// Materializes row `i` into `out`, counting one access. Callers reuse
    /// the buffer for every in-step use of that row.
    pub fn row_into(&self, i: usize, out: &mut DVector<f64>) {
        self.count.set(self.count.get() + 1);
        out.fill(0.0);
        self.matrix.row_axpy(i, 1.0, out);
    }

    pub fn rows_touched(&self) -> u64 {
        self.count.get()
    }
}

// ---------------------------------------------------------------------------
// Matrix Market I/O
// ---------------------------------------------------------------------------

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.display().to_string(), line, msg: msg.into() }
}

/// Reads a Matrix Market file (`coordinate` or `array`, `real`, `general`).
///
/// Coordinate files are stored sparse when the stored-entry density is below
/// 0.25, dense otherwise; array files are stored dense.
pub fn read_matrix_market(path: &Path) -> Result<Matrix> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))
        .and_then(|(i, l)| l.map(|l| (i, l)).map_err(|e| Error::io(path, e)))?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() < 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_err(path, 1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>' header"));
    }
    let format = fields[2].as_str();
    if !matches!(format, "coordinate" | "array") {
        return Err(parse_err(path, 1, format!("unsupported format '{format}' (need coordinate or array)")));
    }
    if fields[3] != "real" {
        return Err(parse_err(path, 1, format!("unsupported field '{}' (need real)", fields[3])));
    }
    if fields[4] != "general" {
        return Err(parse_err(path, 1, format!("unsupported symmetry '{}' (need general)", fields[4])));
    }

    // first non-comment line carries the size
    let (size_lineno, size_line) = loop {
        let (i, line) = lines
            .next()
            .ok_or_else(|| parse_err(path, 2, "missing size line"))
            .and_then(|(i, l)| l.map(|l| (i, l)).map_err(|e| Error::io(path, e)))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        break (i + 1, line);
    };
    let sizes: Vec<&str> = size_line.split_whitespace().collect();

    if format == "coordinate" {
        if sizes.len() != 3 {
            return Err(parse_err(path, size_lineno, "coordinate size line needs 'rows cols nnz'"));
        }
        let nrows: usize = sizes[0].parse().map_err(|_| parse_err(path, size_lineno, "bad row count"))?;
        let ncols: usize = sizes[1].parse().map_err(|_| parse_err(path, size_lineno, "bad column count"))?;
        let nnz: usize = sizes[2].parse().map_err(|_| parse_err(path, size_lineno, "bad nnz count"))?;
        let mut entries = Vec::with_capacity(nnz);
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            let parts: Vec<&str> = trimmed.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(parse_err(path, lineno, "coordinate entry needs 'row col value'"));
            }
            let r: usize = parts[0].parse().map_err(|_| parse_err(path, lineno, "bad row index"))?;
            let c: usize = parts[1].parse().map_err(|_| parse_err(path, lineno, "bad column index"))?;
            let v: f64 = parts[2].parse().map_err(|_| parse_err(path, lineno, "bad value"))?;
            if r < 1 || r > nrows || c < 1 || c > ncols {
                return Err(parse_err(path, lineno, format!("index ({r}, {c}) outside {nrows} x {ncols}")));
            }
            entries.push((r - 1, c - 1, v));
        }
        if entries.len() != nnz {
            return Err(parse_err(
                path,
                size_lineno,
                format!("header promises {nnz} entries, file has {}", entries.len()),
            ));
        }
        let csr = CsrMatrix::from_triplets(nrows, ncols, entries);
        let density = csr.nnz() as f64 / (nrows.max(1) * ncols.max(1)) as f64;
        if density < crate::problem::SPARSE_DENSITY_THRESHOLD {
            Ok(Matrix::Sparse(csr))
        } else {
            Ok(Matrix::Dense(Matrix::Sparse(csr).to_dense()))
        }
    } else {
        if sizes.len() != 2 {
            return Err(parse_err(path, size_lineno, "array size line needs 'rows cols'"));
        }
        let nrows: usize = sizes[0].parse().map_err(|_| parse_err(path, size_lineno, "bad row count"))?;
        let ncols: usize = sizes[1].parse().map_err(|_| parse_err(path, size_lineno, "bad column count"))?;
        let mut values = Vec::with_capacity(nrows * ncols);
        for (i, line) in lines {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::io(path, e))?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('%') {
                continue;
            }
            for tok in trimmed.split_whitespace() {
                let v: f64 = tok.parse().map_err(|_| parse_err(path, lineno, format!("bad value '{tok}'")))?;
                values.push(v);
            }
        }
        if values.len() != nrows * ncols {
            return Err(parse_err(
                path,
                size_lineno,
                format!("array needs {} values, file has {}", nrows * ncols, values.len()),
            ));
        }
        // Matrix Market array data is column-major
        Ok(Matrix::Dense(DMatrix::from_vec(nrows, ncols, values)))
    }
}

/// Writes `m` in Matrix Market format: coordinate for sparse storage, array
/// for dense. Values use shortest round-trip decimals, so a read-back
/// reproduces the matrix entry-exactly.
pub fn write_matrix_market(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = String::new();
    match m {
        Matrix::Sparse(csr) => {
            out.push_str("%%MatrixMarket matrix coordinate real general\n");
            let _ = writeln!(out, "{} {} {}", csr.nrows, csr.ncols, csr.nnz());
            for i in 0..csr.nrows {
                for (j, v) in csr.row_entries(i) {
                    let _ = writeln!(out, "{} {} {}", i + 1, j + 1, v);
                }
            }
        }
        Matrix::Dense(d) => {
            out.push_str("%%MatrixMarket matrix array real general\n");
            let _ = writeln!(out, "{} {}", d.nrows(), d.ncols());
            for j in 0..d.ncols() {
                for i in 0..d.nrows() {
                    let _ = writeln!(out, "{}", d[(i, j)]);
                }
            }
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Reads a plain-text vector: one decimal per non-empty line.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut values = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') || trimmed.starts_with('#') {
            continue;
        }
        let v: f64 = trimmed
            .parse()
            .map_err(|_| parse_err(path, lineno, format!("bad value '{trimmed}'")))?;
        values.push(v);
    }
    Ok(DVector::from_vec(values))
}

/// Writes a vector as one decimal per line (shortest round-trip form).
pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    let mut out = String::new();
    for x in v.iter() {
        let _ = writeln!(out, "{x}");
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_csr() -> CsrMatrix {
        CsrMatrix::from_triplets(3, 2, vec![(2, 1, 5.0), (0, 0, 1.0), (0, 1, 2.0)])
    }

    #[test]
    fn csr_sorts_and_sums_duplicates() {
        let m = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, -1.0)]);
        assert_eq!(m.nnz(), 2);
        let d = Matrix::Sparse(m).to_dense();
        assert_eq!(d[(0, 0)], 3.0);
        assert_eq!(d[(1, 1)], -1.0);
    }

    #[test]
    fn matvec_agrees_between_storages() {
        let sp = Matrix::Sparse(small_csr());
        let de = Matrix::Dense(sp.to_dense());
        let x = DVector::from_vec(vec![0.5, -2.0]);
        let a = sp.matvec(&x);
        let b = de.matvec(&x);
        assert!((a - b).norm() < 1e-14);
        let v = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert!((sp.tr_matvec(&v) - de.tr_matvec(&v)).norm() < 1e-14);
    }

    #[test]
    fn gram_weighted_agrees_between_storages() {
        let sp = Matrix::Sparse(small_csr());
        let de = Matrix::Dense(sp.to_dense());
        let w = DVector::from_vec(vec![1.0, 0.5, 2.0]);
        let gs = sp.gram_weighted(&w);
        let gd = de.gram_weighted(&w);
        assert!((gs - gd).norm() < 1e-13);
    }

    #[test]
    fn counted_rows_counts_each_access() {
        let m = Matrix::Sparse(small_csr());
        let counted = CountedRows::new(&m);
        let x = DVector::from_vec(vec![1.0, 1.0]);
        let mut row = DVector::zeros(2);
        counted.row_dot(0, &x);
        counted.row_into(2, &mut row);
        assert_eq!(counted.rows_touched(), 2);
        assert_eq!(row[1], 5.0);
    }

    #[test]
    fn matrix_market_roundtrip_sparse_and_dense() {
        let dir = tempfile::tempdir().unwrap();
        let sp = Matrix::Sparse(CsrMatrix::from_triplets(
            4,
            3,
            vec![(0, 0, 1.25e-7), (3, 2, -9.875)],
        ));
        let p1 = dir.path().join("sp.mtx");
        write_matrix_market(&p1, &sp).unwrap();
        let back = read_matrix_market(&p1).unwrap();
        assert!(back.is_sparse());
        assert_eq!(back.to_dense(), sp.to_dense());

        let de = Matrix::Dense(DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.25, 4.0]));
        let p2 = dir.path().join("de.mtx");
        write_matrix_market(&p2, &de).unwrap();
        let back = read_matrix_market(&p2).unwrap();
        assert!(!back.is_sparse());
        assert_eq!(back.to_dense(), de.to_dense());
    }

    #[test]
    fn parse_error_carries_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.mtx");
        std::fs::write(&p, "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 x 3.0\n").unwrap();
        match read_matrix_market(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn header_promise_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("short.mtx");
        std::fs::write(&p, "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 3.0\n").unwrap();
        assert!(read_matrix_market(&p).is_err());
    }
}
