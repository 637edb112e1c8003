use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Contiguous block of `A` rows owned by one core; every core sees all of `B`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreAssignment {
    pub core_id: usize,
    pub rows: Range<usize>,
}

/// Balanced split of `n` rows over `cores`: the first `n % cores` blocks get
/// one extra row. Surplus cores receive empty ranges.
pub fn split_rows(n: usize, cores: usize) -> Vec<CoreAssignment> {
    assert!(cores >= 1);
    let (base, extra) = (n / cores, n % cores);
    let mut start = 0;
    (0..cores)
        .map(|core_id| {
            let len = base + usize::from(core_id < extra);
            let rows = start..start + len;
            start += len;
            CoreAssignment { core_id, rows }
        })
        .collect()
}
