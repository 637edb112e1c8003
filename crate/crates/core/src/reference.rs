//! Brute-force reference implementations used to check the engine.
//!
//! Everything here is written against the arithmetic definitions directly:
//! triple-loop products in wide integers, and requantization in `i128` with
//! explicit floor/round steps. Nothing is shared with the engine or with
//! [`crate::quant`].

use crate::matrix::DenseMatrix;
use crate::quant::QuantParams;

const I32_MIN: i128 = i32::MIN as i128;
const I32_MAX: i128 = i32::MAX as i128;

fn sat32(x: i128) -> i128 {
    x.clamp(I32_MIN, I32_MAX)
}

/// `round(a·b / 2^31)` with halves rounded toward +inf, saturating the single
/// `(-2^31)²` overflow.
pub fn reference_srdhm(a: i32, b: i32) -> i32 {
    let prod = a as i128 * b as i128;
    let q = (prod + (1i128 << 30)).div_euclid(1i128 << 31);
    sat32(q) as i32
}

/// `x / 2^e` rounded to nearest, halves away from zero.
pub fn reference_rounding_rshift(x: i32, e: u32) -> i32 {
    let x = x as i128;
    let denom = 1i128 << (e + 1);
    let mag = (2 * x.abs() + (1i128 << e)) / denom;
    (x.signum() * mag) as i32
}

pub fn reference_requantize(acc: i32, channel: usize, qp: &QuantParams) -> i8 {
    let c = &qp.channels[channel];
    let biased = sat32(acc as i128 + c.bias as i128) as i32;
    let scaled = if c.shift > 0 {
        let up = sat32((biased as i128) << c.shift) as i32;
        reference_srdhm(up, c.qm)
    } else {
        reference_rounding_rshift(reference_srdhm(biased, c.qm), (-c.shift) as u32)
    };
    (scaled as i128 + qp.zero_point_out as i128).clamp(qp.clamp_min as i128, qp.clamp_max as i128)
        as i8
}

/// `Σ_k A[i][k]·(B[k][j] − zp)` for int8 operands, row-major N×P.
///
/// # Panics
/// If either operand is not int8 or a sum leaves the int32 range.
pub fn reference_gemm_i32(a: &DenseMatrix, b: &DenseMatrix, zero_point_rhs: i8) -> Vec<i32> {
    let (n, m, p) = (a.rows(), a.cols(), b.cols());
    assert_eq!(m, b.rows());
    let av = a.as_i8().expect("int8 A");
    let bv = b.as_i8().expect("int8 B");
    let zp = zero_point_rhs as i64;
    let mut out = Vec::with_capacity(n * p);
    for i in 0..n {
        for j in 0..p {
            let mut s: i64 = 0;
            for k in 0..m {
                s += av[i * m + k] as i64 * (bv[k * p + j] as i64 - zp);
            }
            out.push(i32::try_from(s).expect("reference sum fits int32"));
        }
    }
    out
}

/// Reference int8 pipeline output: raw sums, or requantized per row channel.
pub fn reference_int8(
    a: &DenseMatrix,
    b: &DenseMatrix,
    zero_point_rhs: i8,
    qp: Option<&QuantParams>,
) -> Elements32 {
    let raw = reference_gemm_i32(a, b, zero_point_rhs);
    match qp {
        None => Elements32::Int32(raw),
        Some(qp) => {
            let p = b.cols();
            Elements32::Int8(
                raw.iter()
                    .enumerate()
                    .map(|(idx, &acc)| reference_requantize(acc, idx / p, qp))
                    .collect(),
            )
        }
    }
}

/// Row-major reference output values.
#[derive(Debug, Clone, PartialEq)]
pub enum Elements32 {
    Int8(Vec<i8>),
    Int32(Vec<i32>),
}

/// Float product computed in f64, plus `Σ_k |A[i][k]·(B[k][j] − zp)|` for
/// error bounds. Row-major N×P.
pub fn reference_gemm_f64(
    a: &DenseMatrix,
    b: &DenseMatrix,
    zero_point_rhs: f32,
) -> (Vec<f64>, Vec<f64>) {
    let (n, m, p) = (a.rows(), a.cols(), b.cols());
    assert_eq!(m, b.rows());
    let av = a.as_f32().expect("float A");
    let bv = b.as_f32().expect("float B");
    let zp = zero_point_rhs as f64;
    let mut vals = Vec::with_capacity(n * p);
    let mut mags = Vec::with_capacity(n * p);
    for i in 0..n {
        for j in 0..p {
            let (mut s, mut mag) = (0.0f64, 0.0f64);
            for k in 0..m {
                let t = av[i * m + k] as f64 * (bv[k * p + j] as f64 - zp);
                s += t;
                mag += t.abs();
            }
            vals.push(s);
            mags.push(mag);
        }
    }
    (vals, mags)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_primitives_match_hand_values() {
        assert_eq!(reference_srdhm(i32::MIN, i32::MIN), i32::MAX);
        assert_eq!(reference_srdhm(2, 1 << 30), 1);
        assert_eq!(reference_rounding_rshift(5, 1), 3);
        assert_eq!(reference_rounding_rshift(-5, 1), -3);
        assert_eq!(reference_rounding_rshift(9, 0), 9);
    }

    #[test]
    fn gemm_oracle_small_case() {
        let a = DenseMatrix::from_i8(2, 2, vec![1, 2, 0, -1]).unwrap();
        let b = DenseMatrix::from_i8(2, 2, vec![1, 1, 1, 1]).unwrap();
        assert_eq!(reference_gemm_i32(&a, &b, 1), vec![0, 0, 0, 0]);
        assert_eq!(reference_gemm_i32(&a, &b, 0), vec![3, 3, -1, -1]);
    }
}
