//! Point symmetries of a rectangular grid of cells.

use serde::{Deserialize, Serialize};

use crate::model::Cell;

/// Element of the dihedral group of the square. On rectangular grids only
/// the identity, the half turn and the two mirror flips are available.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symmetry {
    Identity,
    Rot90,
    Rot180,
    Rot270,
    /// Mirror across the vertical axis (col -> cols-1-col).
    FlipH,
    /// Mirror across the horizontal axis (row -> rows-1-row).
    FlipV,
    Transpose,
    AntiTranspose,
}

impl Symmetry {
    pub const ALL: [Symmetry; 8] = [
        Symmetry::Identity,
        Symmetry::Rot90,
        Symmetry::Rot180,
        Symmetry::Rot270,
        Symmetry::FlipH,
        Symmetry::FlipV,
        Symmetry::Transpose,
        Symmetry::AntiTranspose,
    ];

    pub const RECTANGULAR: [Symmetry; 4] = [Symmetry::Identity, Symmetry::Rot180, Symmetry::FlipH, Symmetry::FlipV];

    /// Group acting on a `rows` × `cols` grid.
    pub fn group(rows: usize, cols: usize) -> &'static [Symmetry] {
        if rows == cols {
            &Self::ALL
        } else {
            &Self::RECTANGULAR
        }
    }

    pub fn applies_to(self, rows: usize, cols: usize) -> bool {
        Self::group(rows, cols).contains(&self)
    }

    /// Image of `cell`. Quarter turns and diagonal mirrors need a square grid.
    pub fn apply(self, cell: Cell, rows: usize, cols: usize) -> Cell {
        let Cell { row: r, col: c } = cell;
        let (lr, lc) = (rows - 1, cols - 1);
        let (row, col) = match self {
            Symmetry::Identity => (r, c),
            Symmetry::Rot90 => (c, lr - r),
            Symmetry::Rot180 => (lr - r, lc - c),
            Symmetry::Rot270 => (lc - c, r),
            Symmetry::FlipH => (r, lc - c),
            Symmetry::FlipV => (lr - r, c),
            Symmetry::Transpose => (c, r),
            Symmetry::AntiTranspose => (lc - c, lr - r),
        };
        Cell { row, col }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elements_are_distinct_bijections() {
        let n = 4;
        let mut images = Vec::new();
        for g in Symmetry::ALL {
            let mut seen = vec![false; n * n];
            let mut image = Vec::new();
            for row in 0..n {
                for col in 0..n {
                    let c = g.apply(Cell { row, col }, n, n);
                    assert!(!seen[c.row * n + c.col]);
                    seen[c.row * n + c.col] = true;
                    image.push(c);
                }
            }
            images.push(image);
        }
        for i in 0..8 {
            for j in (i + 1)..8 {
                assert_ne!(images[i], images[j]);
            }
        }
    }

    #[test]
    fn rectangular_subgroup_stays_in_bounds() {
        for g in Symmetry::RECTANGULAR {
            for row in 0..2 {
                for col in 0..5 {
                    let c = g.apply(Cell { row, col }, 2, 5);
                    assert!(c.row < 2 && c.col < 5);
                }
            }
        }
        assert!(!Symmetry::Rot90.applies_to(2, 5));
    }
}
