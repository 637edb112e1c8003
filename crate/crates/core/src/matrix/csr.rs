use std::ops::Range;

use super::{DenseMatrix, ElementPrecision, Elements};
use crate::error::{Error, Result};

/// Compressed sparse row matrix in canonical form: indices strictly
/// increasing within each row and no explicitly stored zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Elements,
}

impl CsrMatrix {
    /// Validates and wraps raw CSR arrays.
    pub fn from_parts(
        rows: usize,
        cols: usize,
        row_ptr: Vec<usize>,
        col_idx: Vec<u32>,
        values: Elements,
    ) -> Result<Self> {
        if row_ptr.len() != rows + 1 {
            return Err(Error::Structure(format!(
                "row_ptr has {} entries, expected {}",
                row_ptr.len(),
                rows + 1
            )));
        }
        if row_ptr[0] != 0 {
            return Err(Error::Structure("row_ptr[0] must be 0".into()));
        }
        let nnz = row_ptr[rows];
        if col_idx.len() != nnz || values.len() != nnz {
            return Err(Error::Structure(format!(
                "row_ptr ends at {nnz} but there are {} indices and {} values",
                col_idx.len(),
                values.len()
            )));
        }
        for i in 0..rows {
            let (start, end) = (row_ptr[i], row_ptr[i + 1]);
            if start > end {
                return Err(Error::Structure(format!("row_ptr decreases at row {i}")));
            }
            let row = &col_idx[start..end];
            if let Some(&last) = row.last() {
                if last as usize >= cols {
                    return Err(Error::Structure(format!(
                        "column {last} out of range in row {i}"
                    )));
                }
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Structure(format!(
                    "row {i} has unsorted or duplicate column indices"
                )));
            }
        }
        if let Some(pos) = (0..nnz).find(|&k| values.is_zero_at(k)) {
            return Err(Error::Structure(format!(
                "explicit zero stored at position {pos}"
            )));
        }
        if let Elements::Float32(v) = &values {
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { index });
            }
        }
        Ok(Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let (rows, cols) = (m.rows(), m.cols());
        let data = m.data();
        let mut row_ptr = Vec::with_capacity(rows + 1);
        let mut col_idx = Vec::new();
        let mut keep = Vec::new();
        row_ptr.push(0);
        for i in 0..rows {
            for j in 0..cols {
                let idx = i * cols + j;
                if !data.is_zero_at(idx) {
                    col_idx.push(j as u32);
                    keep.push(idx);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let values = match data {
            Elements::Int8(v) => Elements::Int8(keep.iter().map(|&k| v[k]).collect()),
            Elements::Float32(v) => Elements::Float32(keep.iter().map(|&k| v[k]).collect()),
        };
        Self {
            rows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut data = Elements::zeros(self.precision(), self.rows * self.cols);
        for i in 0..self.rows {
            for k in self.row_range(i) {
                let dst = i * self.cols + self.col_idx[k] as usize;
                match (&mut data, &self.values) {
                    (Elements::Int8(d), Elements::Int8(v)) => d[dst] = v[k],
                    (Elements::Float32(d), Elements::Float32(v)) => d[dst] = v[k],
                    _ => unreachable!("precision fixed at construction"),
                }
            }
        }
        DenseMatrix::new(self.rows, self.cols, data).expect("shape and values already validated")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn precision(&self) -> ElementPrecision {
        self.values.precision()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u32] {
        &self.col_idx
    }

    pub fn values(&self) -> &Elements {
        &self.values
    }

    /// Positions of row `i` inside `col_idx` / `values`.
    pub fn row_range(&self, i: usize) -> Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    pub fn row_nnz(&self) -> Vec<u32> {
        self.row_ptr
            .windows(2)
            .map(|w| (w[1] - w[0]) as u32)
            .collect()
    }
}

impl From<&DenseMatrix> for CsrMatrix {
    fn from(m: &DenseMatrix) -> Self {
        CsrMatrix::from_dense(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::generate_matrix;
    use proptest::prelude::*;

    #[test]
    fn zero_matrix_has_empty_rows() {
        let csr = CsrMatrix::from_dense(&DenseMatrix::zeros(2, 2, ElementPrecision::Int8));
        assert_eq!(csr.row_ptr(), &[0, 0, 0]);
        assert!(csr.col_idx().is_empty());
        assert!(csr.values().is_empty());
        assert_eq!(
            csr.to_dense(),
            DenseMatrix::zeros(2, 2, ElementPrecision::Int8)
        );
    }

    #[test]
    fn identity_structure() {
        let eye = DenseMatrix::from_i8(2, 2, vec![1, 0, 0, 1]).unwrap();
        let csr = CsrMatrix::from_dense(&eye);
        assert_eq!(csr.row_ptr(), &[0, 1, 2]);
        assert_eq!(csr.col_idx(), &[0, 1]);
        assert_eq!(csr.values(), &Elements::Int8(vec![1, 1]));
        assert_eq!(csr.to_dense(), eye);
    }

    #[test]
    fn fully_dense_csr_reconstructs_every_element() {
        let values: Vec<f32> = (1..=12).map(|x| x as f32 * 0.5).collect();
        let row_ptr = vec![0, 4, 8, 12];
        let col_idx = vec![0, 1, 2, 3, 0, 1, 2, 3, 0, 1, 2, 3];
        let csr = CsrMatrix::from_parts(3, 4, row_ptr, col_idx, Elements::Float32(values.clone()))
            .unwrap();
        let dense = csr.to_dense();
        assert_eq!(dense.as_f32().unwrap(), values.as_slice());
    }

    #[test]
    fn sparse_round_trip_at_ninety_percent() {
        let m = generate_matrix(64, 64, ElementPrecision::Int8, 0.9, 11).unwrap();
        let csr = CsrMatrix::from_dense(&m);
        assert_eq!(csr.nnz(), m.count_nonzero());
        assert_eq!(csr.to_dense(), m);
    }

    #[test]
    fn structural_violations_are_rejected() {
        let v = |n| Elements::Int8(vec![1; n]);
        // unsorted
        assert!(matches!(
            CsrMatrix::from_parts(1, 4, vec![0, 2], vec![2, 1], v(2)),
            Err(Error::Structure(_))
        ));
        // duplicate
        assert!(CsrMatrix::from_parts(1, 4, vec![0, 2], vec![1, 1], v(2)).is_err());
        // out of range
        assert!(CsrMatrix::from_parts(1, 4, vec![0, 1], vec![4], v(1)).is_err());
        // decreasing row_ptr
        assert!(CsrMatrix::from_parts(2, 4, vec![0, 2, 1], vec![0, 1], v(1)).is_err());
        // nnz mismatch
        assert!(CsrMatrix::from_parts(1, 4, vec![0, 2], vec![0, 1], v(1)).is_err());
        // explicit zero
        assert!(CsrMatrix::from_parts(1, 4, vec![0, 1], vec![0], Elements::Int8(vec![0])).is_err());
        // row_ptr[0] != 0
        assert!(CsrMatrix::from_parts(1, 4, vec![1, 1], vec![], v(0)).is_err());
    }

    fn arb_dense() -> impl Strategy<Value = DenseMatrix> {
        (1usize..12, 1usize..12, 0.0f64..=1.0, any::<u64>()).prop_map(|(r, c, s, seed)| {
            generate_matrix(r, c, ElementPrecision::Int8, s, seed).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn dense_csr_dense_is_identity(m in arb_dense()) {
            let csr = CsrMatrix::from_dense(&m);
            prop_assert_eq!(csr.nnz(), m.count_nonzero());
            prop_assert_eq!(csr.to_dense(), m);
        }

        #[test]
        fn csr_dense_csr_is_identity(m in arb_dense()) {
            let csr = CsrMatrix::from_dense(&m);
            let again = CsrMatrix::from_dense(&csr.to_dense());
            prop_assert_eq!(again, csr);
        }
    }
}
