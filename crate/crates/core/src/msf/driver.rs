//! The recursive spanning forest driver.

use super::{clear_flags, clear_lanes, coarsen, live_vertices, lookup_by_lane, pairs, shift, F, S, W};
use crate::error::{MeshError, Result};
use crate::mesh::{MeshMachine, Tiling};
use crate::primitives::{compact_route, for_each_slot};
use crate::record::{flags, Kind, Record};
use crate::trace::RoundsSummary;

/// Flags with `MSF` the spanning forest edges among the edges in lanes 0–1
/// of every block of `t`, given that no block has more than `vcap` vertices.
///
/// A block of at most `2^rounds` processors is finished by coarsening alone.
/// A larger block coarsens until at most `b²/2^rounds` vertices can remain,
/// solves the contracted graph on each quadrant independently, routes the
/// union of the quadrant forests into the leading sixteenth of the block and
/// solves it once more there.
pub fn msf_block(m: &mut MeshMachine, t: &Tiling, rounds: usize, vcap: usize) -> Result<()> {
    let b = t.side();
    let p = b * b;
    let base = b <= 4 || p <= 1 << rounds;
    let target = if base { 1 } else { p >> rounds };
    let r = halvings(vcap, target);

    pairs(m, t, F, W, |f, w| {
        f.flags = 0;
        if f.kind == Kind::Edge {
            *w = *f;
        }
    })?;
    let initial = live_vertices(m, t, W);
    for _ in 0..r {
        coarsen(m, t)?;
    }
    let remaining = live_vertices(m, t, W);
    for (block, (&i, &left)) in initial.iter().zip(&remaining).enumerate() {
        m.trace.rounds_summaries.push(RoundsSummary { block_side: b, block, rounds: r, initial: i, remaining: left });
    }
    if base {
        if remaining.iter().any(|&n| n > 0) {
            return Err(MeshError::Invariant(format!("edges survive coarsening on a side-{b} block")));
        }
        return Ok(());
    }

    m.push_frame(t, F);
    shift(m, t, W, F)?;
    msf_block(m, &t.quadrants(), rounds, vcap >> r)?;
    let old = m.set_phase("route");
    compact_route(m, t, F, |r| r.has(flags::MSF), b / 4)?;
    m.set_phase(old);
    clear_flags(m, t, F, flags::MSF);
    msf_block(m, &t.leading(b / 4), rounds, vcap >> r)?;

    let old = m.set_phase("merge");
    for_each_slot(m, t, F, |r, _| {
        if !r.has(flags::MSF) {
            *r = Record::NULL;
        }
    });
    shift(m, t, F, S)?;
    m.pop_frame(t, F)?;
    lookup_by_lane(
        m,
        t,
        S,
        F,
        |r| (r.kind == Kind::Edge).then_some((r.idx, 0)),
        |r| (r.kind == Kind::Edge).then_some(r.idx),
        |r, found| {
            if found.is_some() {
                r.set(flags::MSF, true);
            }
        },
    )?;
    clear_lanes(m, t, S);
    m.set_phase(old);
    Ok(())
}

/// Rounds of vertex halving that bring `vcap` down to at most `target`.
fn halvings(vcap: usize, target: usize) -> usize {
    let mut r = 0;
    while vcap >> r > target {
        r += 1;
    }
    r
}
