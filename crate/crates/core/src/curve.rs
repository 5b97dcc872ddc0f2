//! Hilbert curve ranks on a `side × side` grid.
//!
//! The base case visits `(0,0), (1,0), (1,1), (0,1)` (as `(row, col)`) in
//! rank order 0..3; larger curves follow the usual rotate-and-reflect
//! recursion, so every aligned `2^k × 2^k` sub-square is a contiguous rank
//! range traversed by a rotated or reflected copy of the order-`2^k` curve.

use serde::{Deserialize, Serialize};

use crate::error::{MeshError, Result};

/// Position of a cell along the Hilbert curve, in `[0, side²)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CurveRank(pub usize);

fn check_side(side: usize) -> Result<()> {
    if side == 0 || !side.is_power_of_two() {
        return Err(MeshError::Config(format!("curve side {side} is not a power of two")));
    }
    Ok(())
}

/// Rank of cell `(row, col)` on the Hilbert curve of the given side.
pub fn hilbert_rank(p: (usize, usize), side: usize) -> Result<CurveRank> {
    check_side(side)?;
    let (row, col) = p;
    if row >= side {
        return Err(MeshError::OutOfRange { what: "row", value: row, limit: side });
    }
    if col >= side {
        return Err(MeshError::OutOfRange { what: "col", value: col, limit: side });
    }
    Ok(CurveRank(rank_unchecked(row, col, side)))
}

/// Cell `(row, col)` holding rank `r`; the inverse of [`hilbert_rank`].
pub fn hilbert_point(r: CurveRank, side: usize) -> Result<(usize, usize)> {
    check_side(side)?;
    if r.0 >= side * side {
        return Err(MeshError::OutOfRange { what: "curve rank", value: r.0, limit: side * side });
    }
    Ok(point_unchecked(r.0, side))
}

// x is the column, y the row.
fn rotate(s: usize, x: &mut usize, y: &mut usize, rx: usize, ry: usize) {
    if ry == 0 {
        if rx == 1 {
            *x = s - 1 - *x;
            *y = s - 1 - *y;
        }
        std::mem::swap(x, y);
    }
}

pub(crate) fn rank_unchecked(row: usize, col: usize, side: usize) -> usize {
    let (mut x, mut y) = (col, row);
    let mut d = 0;
    let mut s = side / 2;
    while s > 0 {
        let rx = usize::from(x & s != 0);
        let ry = usize::from(y & s != 0);
        d += s * s * ((3 * rx) ^ ry);
        // only the low bits matter below this level
        x &= s - 1;
        y &= s - 1;
        rotate(s, &mut x, &mut y, rx, ry);
        s /= 2;
    }
    d
}

pub(crate) fn point_unchecked(r: usize, side: usize) -> (usize, usize) {
    let (mut x, mut y) = (0usize, 0usize);
    let mut t = r;
    let mut s = 1;
    while s < side {
        let rx = 1 & (t / 2);
        let ry = 1 & (t ^ rx);
        rotate(s, &mut x, &mut y, rx, ry);
        x += s * rx;
        y += s * ry;
        t /= 4;
        s *= 2;
    }
    (y, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell() {
        assert_eq!(hilbert_rank((0, 0), 1).unwrap(), CurveRank(0));
        assert_eq!(hilbert_point(CurveRank(0), 1).unwrap(), (0, 0));
    }

    #[test]
    fn base_case_orientation() {
        let order: Vec<_> = (0..4).map(|r| hilbert_point(CurveRank(r), 2).unwrap()).collect();
        assert_eq!(order, vec![(0, 0), (1, 0), (1, 1), (0, 1)]);
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(hilbert_rank((4, 0), 4).is_err());
        assert!(hilbert_rank((0, 4), 4).is_err());
        assert!(hilbert_point(CurveRank(16), 4).is_err());
        assert!(hilbert_rank((0, 0), 3).is_err());
    }

    #[test]
    fn bijection_and_adjacency_side_16() {
        let side = 16;
        let mut seen = vec![false; side * side];
        for row in 0..side {
            for col in 0..side {
                let r = hilbert_rank((row, col), side).unwrap().0;
                assert!(!seen[r]);
                seen[r] = true;
                assert_eq!(hilbert_point(CurveRank(r), side).unwrap(), (row, col));
            }
        }
        for r in 1..side * side {
            let (a, b) = point_unchecked(r - 1, side);
            let (c, d) = point_unchecked(r, side);
            assert_eq!(a.abs_diff(c) + b.abs_diff(d), 1, "rank {r}");
        }
    }
}
