//! Matrix representations shared by the engine, the oracle and the CLI.
//!
//! Elements are either signed 8-bit integers or finite 32-bit floats. On the
//! wire every value travels inside a 32-bit word: four int8 lanes or one
//! float. See [`PackedWordView`] for the lane layout.

mod csr;
mod generate;
pub(crate) mod packing;

pub use csr::CsrMatrix;
pub use generate::{generate_matrix, MatrixRng};
pub use packing::PackedWordView;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of every interface and buffer word.
pub const WORD_BITS: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementPrecision {
    Int8,
    #[serde(alias = "float", alias = "f32")]
    Float32,
}

impl ElementPrecision {
    /// Logical elements carried by one 32-bit word.
    pub const fn lanes(self) -> usize {
        match self {
            ElementPrecision::Int8 => 4,
            ElementPrecision::Float32 => 1,
        }
    }

    pub const fn tag(self) -> u32 {
        match self {
            ElementPrecision::Int8 => 0,
            ElementPrecision::Float32 => 1,
        }
    }

    pub fn from_tag(tag: u32) -> Result<Self> {
        match tag {
            0 => Ok(ElementPrecision::Int8),
            1 => Ok(ElementPrecision::Float32),
            other => Err(Error::Format(format!("unknown precision tag {other}"))),
        }
    }

    pub const fn name(self) -> &'static str {
        match self {
            ElementPrecision::Int8 => "int8",
            ElementPrecision::Float32 => "float32",
        }
    }
}

impl std::fmt::Display for ElementPrecision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A flat, precision-tagged element sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Elements {
    Int8(Vec<i8>),
    Float32(Vec<f32>),
}

impl Elements {
    pub fn precision(&self) -> ElementPrecision {
        match self {
            Elements::Int8(_) => ElementPrecision::Int8,
            Elements::Float32(_) => ElementPrecision::Float32,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Elements::Int8(v) => v.len(),
            Elements::Float32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn zeros(precision: ElementPrecision, len: usize) -> Self {
        match precision {
            ElementPrecision::Int8 => Elements::Int8(vec![0; len]),
            ElementPrecision::Float32 => Elements::Float32(vec![0.0; len]),
        }
    }

    /// True when element `i` equals the zero of its precision (`-0.0` included).
    pub fn is_zero_at(&self, i: usize) -> bool {
        match self {
            Elements::Int8(v) => v[i] == 0,
            Elements::Float32(v) => v[i] == 0.0,
        }
    }

    pub fn count_nonzero(&self) -> usize {
        match self {
            Elements::Int8(v) => v.iter().filter(|&&x| x != 0).count(),
            Elements::Float32(v) => v.iter().filter(|&&x| x != 0.0).count(),
        }
    }

    /// 32-bit lane payload of element `i`: the byte for int8, the IEEE-754
    /// pattern for float.
    pub fn bits_at(&self, i: usize) -> u32 {
        match self {
            Elements::Int8(v) => v[i] as u8 as u32,
            Elements::Float32(v) => v[i].to_bits(),
        }
    }

    fn check_finite(&self) -> Result<()> {
        if let Elements::Float32(v) = self {
            if let Some(index) = v.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { index });
            }
        }
        Ok(())
    }
}

/// Row-major N×M matrix in a single element precision.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Elements,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Elements) -> Result<Self> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(Error::DataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        data.check_finite()?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_i8(rows: usize, cols: usize, data: Vec<i8>) -> Result<Self> {
        Self::new(rows, cols, Elements::Int8(data))
    }

    pub fn from_f32(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        Self::new(rows, cols, Elements::Float32(data))
    }

    /// Builds an int8 matrix from wider integers, rejecting values outside
    /// the int8 range.
    pub fn from_i32_checked(rows: usize, cols: usize, data: &[i32]) -> Result<Self> {
        let narrowed = data
            .iter()
            .enumerate()
            .map(|(index, &v)| {
                i8::try_from(v).map_err(|_| Error::Int8Range {
                    index,
                    value: v as i64,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_i8(rows, cols, narrowed)
    }

    pub fn zeros(rows: usize, cols: usize, precision: ElementPrecision) -> Self {
        Self {
            rows,
            cols,
            data: Elements::zeros(precision, rows * cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn precision(&self) -> ElementPrecision {
        self.data.precision()
    }

    pub fn data(&self) -> &Elements {
        &self.data
    }

    pub fn into_data(self) -> Elements {
        self.data
    }

    pub fn as_i8(&self) -> Option<&[i8]> {
        match &self.data {
            Elements::Int8(v) => Some(v),
            Elements::Float32(_) => None,
        }
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            Elements::Float32(v) => Some(v),
            Elements::Int8(_) => None,
        }
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.count_nonzero()
    }

    pub fn zero_fraction(&self) -> f64 {
        let total = self.rows * self.cols;
        if total == 0 {
            return 0.0;
        }
        (total - self.count_nonzero()) as f64 / total as f64
    }

    /// Number of non-zero elements in each row.
    pub fn row_nnz(&self) -> Vec<u32> {
        (0..self.rows)
            .map(|i| {
                (i * self.cols..(i + 1) * self.cols)
                    .filter(|&idx| !self.data.is_zero_at(idx))
                    .count() as u32
            })
            .collect()
    }

    /// Packs row `i` along its columns into 32-bit words.
    pub fn pack_row(&self, i: usize) -> PackedWordView {
        let range = i * self.cols..(i + 1) * self.cols;
        match &self.data {
            Elements::Int8(v) => PackedWordView::pack_i8(&v[range]),
            Elements::Float32(v) => PackedWordView::pack_f32_unchecked(&v[range]),
        }
    }
}
