use super::{ElementPrecision, Elements};
use crate::error::{Error, Result};

/// Logical elements packed into 32-bit words.
///
/// Int8 lane `z` of word `w` occupies bits `[8z+7 : 8z]` and holds logical
/// element `4w + z`, so the first element sits in the low byte. Lanes past
/// the logical length in the final word are zero. A float word is the
/// IEEE-754 bit pattern of its single element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackedWordView {
    words: Vec<u32>,
    precision: ElementPrecision,
    logical_len: usize,
}

impl PackedWordView {
    pub fn pack(elements: &Elements) -> Result<Self> {
        match elements {
            Elements::Int8(v) => Ok(Self::pack_i8(v)),
            Elements::Float32(v) => Self::pack_f32(v),
        }
    }

    pub fn pack_i8(values: &[i8]) -> Self {
        let words = values
            .chunks(4)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u32, |w, (z, &v)| w | ((v as u8 as u32) << (8 * z)))
            })
            .collect();
        Self {
            words,
            precision: ElementPrecision::Int8,
            logical_len: values.len(),
        }
    }

    /// Packs integers that must fit in int8.
    pub fn pack_i32_as_i8(values: &[i32]) -> Result<Self> {
        let narrowed = values
            .iter()
            .enumerate()
            .map(|(index, &v)| {
                i8::try_from(v).map_err(|_| Error::Int8Range {
                    index,
                    value: v as i64,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::pack_i8(&narrowed))
    }

    pub fn pack_f32(values: &[f32]) -> Result<Self> {
        if let Some(index) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self::pack_f32_unchecked(values))
    }

    pub(crate) fn pack_f32_unchecked(values: &[f32]) -> Self {
        Self {
            words: values.iter().map(|v| v.to_bits()).collect(),
            precision: ElementPrecision::Float32,
            logical_len: values.len(),
        }
    }

    /// Wraps raw words, checking the word count and that padding lanes are zero.
    pub fn from_words(
        words: Vec<u32>,
        precision: ElementPrecision,
        logical_len: usize,
    ) -> Result<Self> {
        let lanes = precision.lanes();
        let expected = logical_len.div_ceil(lanes);
        if words.len() != expected {
            return Err(Error::Format(format!(
                "{} words cannot hold exactly {logical_len} {precision} elements",
                words.len()
            )));
        }
        let used = logical_len % lanes;
        if used != 0 {
            let last = *words
                .last()
                .expect("non-empty when a lane remainder exists");
            if last >> (8 * used) != 0 {
                return Err(Error::Format("non-zero padding lanes in final word".into()));
            }
        }
        Ok(Self {
            words,
            precision,
            logical_len,
        })
    }

    pub fn words(&self) -> &[u32] {
        &self.words
    }

    pub fn precision(&self) -> ElementPrecision {
        self.precision
    }

    pub fn lanes_per_word(&self) -> usize {
        self.precision.lanes()
    }

    pub fn logical_len(&self) -> usize {
        self.logical_len
    }

    pub fn unpack(&self) -> Elements {
        match self.precision {
            ElementPrecision::Int8 => Elements::Int8(
                (0..self.logical_len)
                    .map(|i| lane_i8(self.words[i / 4], i % 4))
                    .collect(),
            ),
            ElementPrecision::Float32 => {
                Elements::Float32(self.words.iter().map(|&w| f32::from_bits(w)).collect())
            }
        }
    }
}

/// Signed value of int8 lane `z` of `word`.
#[inline(always)]
pub(crate) fn lane_i8(word: u32, z: usize) -> i8 {
    (word >> (8 * z)) as u8 as i8
}
