//! Step-counted building blocks composed from [`MeshMachine::sync_step`].
//!
//! Every primitive works on a [`Tiling`] and a set of record [`Lanes`]. Within
//! one block the lanes form a single sequence: processors in curve order, and
//! inside each processor its lanes in ascending order. Sorting, scanning and
//! routing are all defined on that sequence.
//!
//! Each primitive has two executions selected by [`ExecMode`]: a stepwise one
//! that moves every word through real synchronous steps, and a fused one that
//! computes the same final state directly and charges the same number of
//! steps. The test suite checks the two agree bit for bit, steps included.
//!
//! [`MeshMachine::sync_step`]: crate::mesh::MeshMachine::sync_step
//! [`ExecMode`]: crate::mesh::ExecMode

use std::cmp::Ordering;

use crate::mesh::{MeshMachine, Tiling};
use crate::record::{Lanes, Record, Word, NONE};

mod lookup;
mod route;
mod scan;
mod sort;

pub use lookup::batched_lookup;
pub use route::{compact_route, pack};
pub(crate) use scan::dec_word;
pub use scan::{scan_steps, segmented_broadcast, segmented_min, segmented_scan, ScanDir, ScanOp, ScanOutcome};
pub use sort::{mesh_sort, sort_steps};

/// Sequence order used by every sort: keyed records first by key, then
/// unkeyed records; ties broken by the whole record.
#[inline]
pub(crate) fn seq_cmp<K: Ord>(ka: &Option<K>, ra: &Record, kb: &Option<K>, rb: &Record) -> Ordering {
    match (ka, kb) {
        (Some(x), Some(y)) => x.cmp(y).then_with(|| ra.cmp(rb)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => ra.cmp(rb),
    }
}

/// Writes `home` = position in the block sequence into every slot of
/// `lanes`, nulls included.
pub(crate) fn set_homes(m: &mut MeshMachine, t: &Tiling, lanes: Lanes) {
    let k = lanes.len();
    let len = t.block_len();
    let cells = m.cells_mut();
    for &start in t.starts() {
        for off in 0..len {
            for (i, l) in lanes.iter().enumerate() {
                cells[start + off].slots[l].home = (off * k + i) as Word;
            }
        }
    }
}

/// Clears `home`, turns every null into the canonical null and drops the
/// given flags from the records in `lanes`.
pub(crate) fn settle(m: &mut MeshMachine, t: &Tiling, lanes: Lanes, clear_flags: u16) {
    let cells = m.cells_mut();
    for rank in t.ranks() {
        for l in lanes.iter() {
            let r = &mut cells[rank].slots[l];
            if r.is_null() {
                *r = Record::NULL;
            } else {
                r.home = 0;
                r.flags &= !clear_flags;
            }
        }
    }
}

/// Resets the scratch word of every slot in the region.
pub fn clear_scratch(m: &mut MeshMachine, t: &Tiling) {
    let cells = m.cells_mut();
    for rank in t.ranks() {
        cells[rank].scratch = [NONE; crate::mesh::LANES];
    }
}

/// Applies `f` to every slot of `lanes`, nulls included. Purely local.
pub fn for_each_slot(m: &mut MeshMachine, t: &Tiling, lanes: Lanes, mut f: impl FnMut(&mut Record, &mut Word)) {
    let cells = m.cells_mut();
    for rank in t.ranks() {
        let c = &mut cells[rank];
        for l in lanes.iter() {
            f(&mut c.slots[l], &mut c.scratch[l]);
        }
    }
}

/// Moves every record of lane `from` into lane `to` of the same processor.
/// Fails if a destination slot is occupied.
pub fn move_lane(m: &mut MeshMachine, t: &Tiling, from: usize, to: usize) -> crate::Result<()> {
    let cells = m.cells_mut();
    for rank in t.ranks() {
        let c = &mut cells[rank];
        if c.slots[from].is_null() {
            continue;
        }
        if !c.slots[to].is_null() {
            return Err(crate::MeshError::Invariant(format!("lane {to} of rank {rank} occupied by a lane move")));
        }
        c.slots[to] = std::mem::replace(&mut c.slots[from], Record::NULL);
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod testutil {
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    use crate::mesh::{ExecMode, MeshConfig, MeshMachine};
    use crate::record::{Lanes, Record};

    pub fn machine(side: usize, exec: ExecMode) -> MeshMachine {
        MeshMachine::new(MeshConfig::new(side).with_exec(exec)).unwrap()
    }

    /// Fills `lanes` with random edge records (some nulls) from `seed`.
    pub fn fill_random(m: &mut MeshMachine, lanes: Lanes, seed: u64, key_range: u64, null_pct: u32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for rank in 0..m.processors() {
            for l in lanes.iter() {
                let rec = if rng.gen_range(0..100) < null_pct {
                    Record::NULL
                } else {
                    let mut r = Record::edge(rng.gen_range(0..key_range), rng.gen_range(0..key_range), 0, rng.gen());
                    r.ord = rng.gen_range(0..key_range);
                    r
                };
                m.load(rank, l, rec);
            }
        }
    }

    /// Runs `f` on a fused and a stepwise machine prepared by `init` and
    /// asserts identical final states and step reports.
    pub fn assert_modes_agree(
        side: usize,
        init: impl Fn(&mut MeshMachine),
        f: impl Fn(&mut MeshMachine) -> crate::Result<()>,
    ) -> MeshMachine {
        let mut fused = machine(side, ExecMode::Fused);
        let mut step = machine(side, ExecMode::Stepwise);
        init(&mut fused);
        init(&mut step);
        f(&mut fused).unwrap();
        f(&mut step).unwrap();
        assert_eq!(fused.steps(), step.steps(), "step reports differ at side {side}");
        for rank in 0..fused.processors() {
            assert_eq!(fused.cell(rank), step.cell(rank), "rank {rank} differs at side {side}");
        }
        fused
    }
}
