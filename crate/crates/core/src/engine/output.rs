use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputLayout {
    RowMajor,
    ColumnMajor,
}

/// Element storage of `C`: requantized int8, raw int32 accumulators, or float.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputData {
    Int8(Vec<i8>),
    Int32(Vec<i32>),
    Float32(Vec<f32>),
}

impl OutputData {
    pub fn len(&self) -> usize {
        match self {
            OutputData::Int8(v) => v.len(),
            OutputData::Int32(v) => v.len(),
            OutputData::Float32(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kind(&self) -> &'static str {
        match self {
            OutputData::Int8(_) => "int8",
            OutputData::Int32(_) => "int32",
            OutputData::Float32(_) => "float32",
        }
    }

    /// Raw bit patterns, for exact comparisons that distinguish `-0.0`.
    pub fn to_bits(&self) -> Vec<u32> {
        match self {
            OutputData::Int8(v) => v.iter().map(|&x| x as u8 as u32).collect(),
            OutputData::Int32(v) => v.iter().map(|&x| x as u32).collect(),
            OutputData::Float32(v) => v.iter().map(|x| x.to_bits()).collect(),
        }
    }

    pub(crate) fn zeros_like(kind: &OutputData, len: usize) -> Self {
        match kind {
            OutputData::Int8(_) => OutputData::Int8(vec![0; len]),
            OutputData::Int32(_) => OutputData::Int32(vec![0; len]),
            OutputData::Float32(_) => OutputData::Float32(vec![0.0; len]),
        }
    }

    pub(crate) fn copy_from(&mut self, dst: usize, src: &OutputData, src_idx: usize) {
        match (self, src) {
            (OutputData::Int8(d), OutputData::Int8(s)) => d[dst] = s[src_idx],
            (OutputData::Int32(d), OutputData::Int32(s)) => d[dst] = s[src_idx],
            (OutputData::Float32(d), OutputData::Float32(s)) => d[dst] = s[src_idx],
            _ => panic!("output kinds differ"),
        }
    }
}

/// The `N×P` result matrix `C` in the layout Stage 4 wrote it.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputMatrix {
    pub rows: usize,
    pub cols: usize,
    pub layout: OutputLayout,
    pub data: OutputData,
}

impl OutputMatrix {
    /// Buffer position of `C[i][j]`.
    pub fn index(&self, i: usize, j: usize) -> usize {
        match self.layout {
            OutputLayout::RowMajor => i * self.cols + j,
            OutputLayout::ColumnMajor => j * self.rows + i,
        }
    }

    /// Same matrix re-laid out row-major.
    pub fn to_row_major(&self) -> OutputMatrix {
        if self.layout == OutputLayout::RowMajor {
            return self.clone();
        }
        let mut data = OutputData::zeros_like(&self.data, self.data.len());
        for i in 0..self.rows {
            for j in 0..self.cols {
                data.copy_from(i * self.cols + j, &self.data, self.index(i, j));
            }
        }
        OutputMatrix {
            rows: self.rows,
            cols: self.cols,
            layout: OutputLayout::RowMajor,
            data,
        }
    }

    pub fn as_i8(&self) -> Option<&[i8]> {
        match &self.data {
            OutputData::Int8(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_i32(&self) -> Option<&[i32]> {
        match &self.data {
            OutputData::Int32(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_f32(&self) -> Option<&[f32]> {
        match &self.data {
            OutputData::Float32(v) => Some(v),
            _ => None,
        }
    }

    /// Bit-level equality including layout.
    pub fn bit_identical(&self, other: &OutputMatrix) -> bool {
        self.rows == other.rows
            && self.cols == other.cols
            && self.layout == other.layout
            && self.data.kind() == other.data.kind()
            && self.data.to_bits() == other.data.to_bits()
    }
}
