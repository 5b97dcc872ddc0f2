//! Moving selected records into a smaller region.

use super::scan::{dec_word, segmented_scan, ScanDir, ScanOp};
use super::{for_each_slot, mesh_sort, settle};
use crate::error::{MeshError, Result};
use crate::mesh::{MeshMachine, Tiling};
use crate::record::{Lanes, Record, Word, NONE};
use crate::trace::RouteEvent;

/// Packs the records of `lanes` satisfying `keep` into the leading
/// side-`target` sub-block of every block and drops the rest.
///
/// A counting pass runs first; if any block holds more kept records than
/// the target can store, nothing moves and `CapacityExceeded` is returned.
pub fn compact_route(
    m: &mut MeshMachine,
    t: &Tiling,
    lanes: Lanes,
    keep: impl Fn(&Record) -> bool,
    target: usize,
) -> Result<()> {
    assert!(target <= t.side() && target.is_power_of_two());
    let counts = count(m, t, lanes, &keep)?;
    let capacity = target * target * lanes.len();
    let mut over = None;
    for (block, &count) in counts.iter().enumerate() {
        m.trace.routes.push(RouteEvent { block_side: t.side(), target_side: target, block, count, capacity });
        if count > capacity && over.is_none() {
            over = Some((t.starts()[block], count));
        }
    }
    if let Some((block, count)) = over {
        return Err(MeshError::CapacityExceeded { block, count, capacity });
    }
    for_each_slot(m, t, lanes, |r, _| {
        if !r.is_null() && !keep(r) {
            *r = Record::NULL;
        }
    });
    mesh_sort(m, t, lanes, |r: &Record| (!r.is_null()).then_some(()))
}

/// Number of records satisfying `keep` per block, by a forward sum scan;
/// the host reads each block's last scratch word.
fn count(m: &mut MeshMachine, t: &Tiling, lanes: Lanes, keep: &impl Fn(&Record) -> bool) -> Result<Vec<usize>> {
    segmented_scan(m, t, lanes, ScanDir::Forward, ScanOp::Sum, |_| Some([0, 0]), |r, _| {
        (!r.is_null() && keep(r)).then_some(1)
    })?;
    let last = lanes.iter().last().expect("lanes nonempty");
    let len = t.block_len();
    let counts = t.starts().iter().map(|&s| dec_word(m.cell(s + len - 1).scratch[last]).unwrap_or(0) as usize).collect();
    super::clear_scratch(m, t);
    Ok(counts)
}

/// Destination, in the `from` sequence, of the `j`-th null when `v` records
/// are packed into the `to` lanes.
fn free_position(j: usize, v: usize, u: usize, to_idx: &[usize], other_idx: &[usize]) -> usize {
    let k = to_idx.len();
    let f = u - k;
    let (full, rem) = (v / k, v % k);
    if f > 0 && j < full * f {
        return (j / f) * u + other_idx[j % f];
    }
    let j = j - full * f;
    let mut partial: Vec<usize> = other_idx.iter().chain(&to_idx[rem..]).copied().collect();
    partial.sort_unstable();
    if j < partial.len() {
        return full * u + partial[j];
    }
    let j = j - partial.len();
    (full + 1) * u + j
}

/// Gathers the records of lanes `from` into lanes `to` (a subset of
/// `from`) within every block, at most one record per `to` slot, in
/// sequence order.
pub fn pack(m: &mut MeshMachine, t: &Tiling, from: Lanes, to: Lanes) -> Result<()> {
    assert!(to.iter().all(|l| from.contains(l)) && !to.is_empty());
    let u = from.len();
    let to_idx: Vec<usize> = to.iter().map(|l| from.index_of(l).expect("subset")).collect();
    let other_idx: Vec<usize> = (0..u).filter(|i| !to_idx.contains(i)).collect();

    // real records before and including each slot
    segmented_scan(m, t, from, ScanDir::Forward, ScanOp::Sum, |_| Some([0, 0]), |r, _| (!r.is_null()).then_some(1))?;
    for_each_slot(m, t, from, |r, w| {
        r.home = dec_word(*w).unwrap_or(0);
        *w = NONE;
    });
    // block total, from the last slot backwards
    segmented_scan(m, t, from, ScanDir::Backward, ScanOp::Earliest, |_| Some([0, 0]), |r, _| Some(r.home))?;
    let capacity = t.block_len() * to.len();
    let len = t.block_len();
    let k = to.len();
    let mut over = None;
    {
        let cells = m.cells_mut();
        for &start in t.starts() {
            for off in 0..len {
                let c = &mut cells[start + off];
                for (i, l) in from.iter().enumerate() {
                    let total = c.scratch[l] as usize;
                    c.scratch[l] = NONE;
                    if total > capacity {
                        over = Some((start, total));
                    }
                    let r = &mut c.slots[l];
                    let before = r.home as usize;
                    let dest = if r.is_null() {
                        let p = off * u + i;
                        free_position(p - before, total.min(capacity), u, &to_idx, &other_idx)
                    } else {
                        let idx = before - 1;
                        (idx / k) * u + to_idx[idx % k]
                    };
                    r.home = dest as Word;
                }
            }
        }
    }
    if let Some((block, count)) = over {
        return Err(MeshError::CapacityExceeded { block, count, capacity });
    }
    mesh_sort(m, t, from, |r: &Record| Some(r.home))?;
    settle(m, t, from, 0);
    Ok(())
}
