use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DenseMatrix, ElementPrecision, Elements};
use crate::error::{Error, Result};

/// Portable element generator.
///
/// The stream is ChaCha8 seeded through `seed_from_u64` (PCG32 key
/// expansion). Every derived sample consumes exactly one `u64` per attempt:
///
/// * unit interval: `(x >> 11) * 2^-53`
/// * non-zero int8: top byte of `x` as two's complement, redrawn when 0
/// * non-zero float: `2 * ((x >> 40) * 2^-24) - 1`, redrawn when 0
///
/// Reimplementations following these rules reproduce matrices bit for bit.
pub struct MatrixRng {
    inner: ChaCha8Rng,
}

impl MatrixRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn nonzero_i8(&mut self) -> i8 {
        loop {
            let v = (self.next_u64() >> 56) as u8 as i8;
            if v != 0 {
                return v;
            }
        }
    }

    pub fn nonzero_f32(&mut self) -> f32 {
        loop {
            let u = (self.next_u64() >> 40) as f32 * (1.0 / (1u32 << 24) as f32);
            let v = 2.0 * u - 1.0;
            if v != 0.0 {
                return v;
            }
        }
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + (self.next_u64() % span) as i64
    }
}

/// Random `rows × cols` matrix where each element is independently zero with
/// probability `sparsity`; non-zeros are uniform over the non-zero int8
/// values or over `[-1, 1) \ {0}` for floats.
pub fn generate_matrix(
    rows: usize,
    cols: usize,
    precision: ElementPrecision,
    sparsity: f64,
    seed: u64,
) -> Result<DenseMatrix> {
    if !(0.0..=1.0).contains(&sparsity) {
        return Err(Error::InvalidSparsity(sparsity));
    }
    let mut rng = MatrixRng::new(seed);
    let len = rows * cols;
    let data = match precision {
        ElementPrecision::Int8 => Elements::Int8(
            (0..len)
                .map(|_| {
                    if rng.unit() < sparsity {
                        0
                    } else {
                        rng.nonzero_i8()
                    }
                })
                .collect(),
        ),
        ElementPrecision::Float32 => Elements::Float32(
            (0..len)
                .map(|_| {
                    if rng.unit() < sparsity {
                        0.0
                    } else {
                        rng.nonzero_f32()
                    }
                })
                .collect(),
        ),
    };
    DenseMatrix::new(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_sparsity_is_all_zero() {
        let m = generate_matrix(40, 30, ElementPrecision::Float32, 1.0, 3).unwrap();
        assert_eq!(m.count_nonzero(), 0);
    }

    #[test]
    fn zero_sparsity_has_no_zeros() {
        let m = generate_matrix(100, 100, ElementPrecision::Int8, 0.0, 3).unwrap();
        assert_eq!(m.count_nonzero(), 100 * 100);
        let f = generate_matrix(100, 100, ElementPrecision::Float32, 0.0, 3).unwrap();
        assert_eq!(f.count_nonzero(), 100 * 100);
        assert!(f.as_f32().unwrap().iter().all(|x| (-1.0..1.0).contains(x)));
    }

    #[test]
    fn ninety_percent_target_is_met() {
        let m = generate_matrix(1024, 1024, ElementPrecision::Int8, 0.9, 7).unwrap();
        let zf = m.zero_fraction();
        assert!((0.89..=0.91).contains(&zf), "zero fraction {zf}");
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let a = generate_matrix(33, 17, ElementPrecision::Float32, 0.5, 99).unwrap();
        let b = generate_matrix(33, 17, ElementPrecision::Float32, 0.5, 99).unwrap();
        let bits = |m: &DenseMatrix| {
            m.as_f32()
                .unwrap()
                .iter()
                .map(|x| x.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(&a), bits(&b));
        let c = generate_matrix(33, 17, ElementPrecision::Float32, 0.5, 100).unwrap();
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn int8_values_cover_both_extremes() {
        let m = generate_matrix(200, 200, ElementPrecision::Int8, 0.0, 5).unwrap();
        let v = m.as_i8().unwrap();
        assert!(v.contains(&-128));
        assert!(v.contains(&127));
    }

    #[test]
    fn out_of_range_sparsity_is_rejected() {
        assert!(generate_matrix(2, 2, ElementPrecision::Int8, 1.5, 0).is_err());
        assert!(generate_matrix(2, 2, ElementPrecision::Int8, -0.1, 0).is_err());
    }
}
