use std::ops::Range;

use serde::{Deserialize, Serialize};

/// Split of B's `p` columns into tiles of `tile_width` columns; the last
/// tile may be narrower.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePlan {
    pub p: usize,
    pub tile_width: usize,
    pub tile_count: usize,
    pub last_tile_width: usize,
}

impl TilePlan {
    /// `p` must be at least 1 and `pes` at least 1.
    pub fn new(p: usize, pes: usize) -> Self {
        assert!(p >= 1 && pes >= 1, "tiling needs p >= 1 and pes >= 1");
        let tile_count = p.div_ceil(pes);
        Self {
            p,
            tile_width: pes,
            tile_count,
            last_tile_width: p - pes * (tile_count - 1),
        }
    }

    pub fn columns(&self, tile: usize) -> Range<usize> {
        let start = tile * self.tile_width;
        start..(start + self.tile_width).min(self.p)
    }

    pub fn width(&self, tile: usize) -> usize {
        self.columns(tile).len()
    }

    pub fn tiles(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.tile_count).map(|t| self.columns(t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mobilenet_layer_tiling() {
        let plan = TilePlan::new(49, 32);
        assert_eq!(plan.tile_count, 2);
        assert_eq!(plan.last_tile_width, 17);
        assert_eq!(plan.columns(1), 32..49);
    }

    #[test]
    fn one_extra_column_makes_a_width_one_tile() {
        let plan = TilePlan::new(9, 8);
        assert_eq!(plan.tile_count, 2);
        assert_eq!(plan.last_tile_width, 1);
    }

    proptest! {
        #[test]
        fn widths_cover_p(p in 1usize..2000, log_pe in 1u32..9) {
            let plan = TilePlan::new(p, 1 << log_pe);
            let widths: Vec<usize> = plan.tiles().map(|r| r.len()).collect();
            prop_assert_eq!(widths.iter().sum::<usize>(), p);
            prop_assert!((1..=plan.tile_width).contains(&plan.last_tile_width));
            prop_assert_eq!(*widths.last().unwrap(), plan.last_tile_width);
        }
    }
}
