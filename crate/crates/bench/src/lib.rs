//! Deterministic fixtures shared by the benchmarks.

use fades_core::{generate_matrix, CsrMatrix, DenseMatrix, ElementPrecision};

pub struct Fixture {
    pub a: DenseMatrix,
    pub a_csr: CsrMatrix,
    pub b: DenseMatrix,
}

/// `A` is `n×m` at the given sparsity, `B` is a dense `m×p`.
pub fn fixture(
    n: usize,
    m: usize,
    p: usize,
    precision: ElementPrecision,
    sparsity: f64,
    seed: u64,
) -> Fixture {
    let a = generate_matrix(n, m, precision, sparsity, seed).expect("valid sparsity");
    let b = generate_matrix(m, p, precision, 0.0, seed.wrapping_add(1)).expect("valid sparsity");
    let a_csr = CsrMatrix::from_dense(&a);
    Fixture { a, a_csr, b }
}
