//! One Borůvka round on the working edges of every block.

use super::{clear_flags, clear_lanes, label_trees, live_vertices, lookup_by_lane, pairs, shift, F, S, W};
use crate::error::Result;
use crate::mesh::{MeshMachine, Tiling};
use crate::primitives::{mesh_sort, pack, segmented_min, set_homes, settle};
use crate::record::{flags, Kind, Record};
use crate::trace::HalvingEvent;

/// Marks with `SELECTED` every working edge that is the cheapest edge of
/// one of its endpoints.
///
/// Each edge gets a reversed copy in the scratch lanes, so both endpoints
/// see it as an outgoing half-edge. After the call the winning half-edges
/// (original or copy) still carry `WIN`; the copies stay in the scratch
/// lanes next to their originals.
pub fn select_min_incident(m: &mut MeshMachine, t: &Tiling) -> Result<()> {
    pairs(m, t, W, S, |e, c| {
        if e.kind == Kind::Edge {
            *c = Record { a: e.b, b: e.a, flags: flags::COPY, ..*e };
        }
    })?;
    let half = W.union(S);
    set_homes(m, t, half);
    mesh_sort(m, t, half, |r: &Record| (r.kind == Kind::Edge).then_some((r.a, r.ord)))?;
    segmented_min(m, t, half, |r| (r.kind == Kind::Edge).then_some([r.a, 0]), |r| (r.kind == Kind::Edge).then_some(r.ord), flags::WIN)?;
    mesh_sort(m, t, half, |r: &Record| Some(r.home))?;
    settle(m, t, half, 0);
    pairs(m, t, W, S, |e, c| {
        if e.kind == Kind::Edge {
            e.set(flags::SELECTED, e.has(flags::WIN) || c.has(flags::WIN));
        }
    })
}

/// Contracts every tree formed by the selected edges into one vertex.
///
/// Selected edges are flagged `MSF` in the frozen input lanes. The surviving
/// working edges are relabeled to the smallest vertex of each endpoint's
/// tree, edges inside a tree are dropped, and of parallel edges only the
/// first in edge order remains.
pub fn coarsen(m: &mut MeshMachine, t: &Tiling) -> Result<()> {
    let old = m.set_phase("coarsen");
    let before = live_vertices(m, t, W);
    select_min_incident(m, t)?;
    lookup_by_lane(
        m,
        t,
        W,
        F,
        |r| (r.kind == Kind::Edge && r.has(flags::SELECTED)).then_some((r.idx, 0)),
        |r| (r.kind == Kind::Edge).then_some(r.idx),
        |r, found| {
            if found.is_some() {
                r.set(flags::MSF, true);
            }
        },
    )?;
    m.push_frame(t, F);

    // one vertex record per live vertex: the endpoint owning each winning half-edge
    m.local(t, |_, p| {
        for i in 0..2 {
            let (f, w, s) = (i, 2 + i, 4 + i);
            p.slots[s] = if p.slots[s].has(flags::WIN) { Record::vertex(p.slots[s].a) } else { Record::NULL };
            if p.slots[w].has(flags::WIN) {
                p.slots[f] = Record::vertex(p.slots[w].a);
                p.slots[w].set(flags::WIN, false);
            }
        }
    })?;
    pack(m, t, F.union(S), S)?;

    pairs(m, t, W, F, |e, tree| {
        if e.has(flags::SELECTED) {
            *tree = Record::edge(e.a, e.b, 0, e.idx);
            e.set(flags::SELECTED, false);
        }
    })?;
    m.push_frame(t, W);
    shift(m, t, S, W)?;
    label_trees(m, t)?;
    m.set_phase("coarsen");
    shift(m, t, W, S)?;
    m.pop_frame(t, W)?;

    relabel(m, t, |r| r.a, |r, v| r.a = v)?;
    relabel(m, t, |r| r.b, |r, v| r.b = v)?;
    crate::primitives::for_each_slot(m, t, W, |e, _| {
        if e.kind == Kind::Edge {
            if e.a == e.b {
                *e = Record::NULL;
            } else if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
        }
    });
    mesh_sort(m, t, W, |r: &Record| (r.kind == Kind::Edge).then_some((r.a, r.b, r.ord)))?;
    segmented_min(m, t, W, |r| (r.kind == Kind::Edge).then_some([r.a, r.b]), |r| (r.kind == Kind::Edge).then_some(r.ord), flags::WIN)?;
    crate::primitives::for_each_slot(m, t, W, |e, _| {
        if e.kind == Kind::Edge && !e.has(flags::WIN) {
            *e = Record::NULL;
        }
    });
    clear_flags(m, t, W, flags::WIN);
    clear_lanes(m, t, S);
    m.pop_frame(t, F)?;

    let after = live_vertices(m, t, W);
    for (block, (&b, &a)) in before.iter().zip(&after).enumerate() {
        m.trace.coarsen_rounds.push(HalvingEvent { block_side: t.side(), block, before: b, after: a });
    }
    m.set_phase(old);
    Ok(())
}

/// Replaces one endpoint of every working edge by its tree label, read
/// from the labeled roster in the scratch lanes.
fn relabel(
    m: &mut MeshMachine,
    t: &Tiling,
    get: impl Fn(&Record) -> u64,
    put: impl Fn(&mut Record, u64),
) -> Result<()> {
    lookup_by_lane(
        m,
        t,
        S,
        W,
        |r| (r.kind == Kind::Vertex).then_some((r.v(), r.root())),
        |r| (r.kind == Kind::Edge).then(|| get(r)),
        |r, found| {
            if let Some(v) = found {
                put(r, v);
            }
        },
    )
}
