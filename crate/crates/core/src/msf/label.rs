//! Labeling every vertex of a forest with the smallest vertex of its tree.
//!
//! Each pass points every vertex at its smallest neighbour when that is
//! smaller than itself, resolves the resulting rooted subtrees, lets every
//! one-vertex subtree join a neighbouring one and contracts the subtrees.
//! Two passes at least quarter the vertex count, so the remaining forest is
//! routed into the leading quarter of the block and labeled there. The roster
//! of every pass is kept on the ledger and relabeled on the way back.

use super::{clear_flags, clear_lanes, lookup_by_lane, pairs, shift, ALL, E, R, S};
use crate::error::{MeshError, Result};
use crate::mesh::{MeshMachine, Tiling};
use crate::primitives::{batched_lookup, compact_route, for_each_slot, mesh_sort, segmented_scan, set_homes, settle, ScanDir, ScanOp};
use crate::record::{flags, Kind, Record, NONE};
use crate::trace::{ContractionMap, HalvingEvent};

/// Labels the forest whose edges sit in lanes 0–1 and whose vertices sit,
/// one record each, in lanes 2–3. Afterwards every vertex record holds its
/// tree's smallest vertex as `root` and the edge lanes are empty.
pub fn label_trees(m: &mut MeshMachine, t: &Tiling) -> Result<()> {
    let old = m.set_phase("label");
    let mut level = 0;
    level_down(m, t, &mut level)?;
    clear_flags(m, t, R, flags::FINISHED);
    m.set_phase(old);
    Ok(())
}

fn level_down(m: &mut MeshMachine, t: &Tiling, level: &mut usize) -> Result<()> {
    let b = t.side();
    if b == 1 {
        let mut stray = false;
        for_each_slot(m, t, E, |r, _| stray |= !r.is_null());
        if stray {
            return Err(MeshError::Invariant("forest edges left in a single processor".into()));
        }
        for_each_slot(m, t, R, |r, _| {
            if r.kind == Kind::Vertex {
                r.aux2 = r.v();
            }
        });
        return Ok(());
    }
    for _ in 0..2 {
        label_pass(m, t, *level)?;
        *level += 1;
    }
    let old = m.set_phase("route");
    compact_route(m, t, E, |r| r.kind == Kind::Edge, b / 2)?;
    compact_route(m, t, R, |r| r.kind == Kind::Vertex, b / 2)?;
    m.set_phase(old);
    level_down(m, &t.leading(b / 2), level)?;
    for _ in 0..2 {
        unwind_labels(m, t)?;
    }
    Ok(())
}

fn label_pass(m: &mut MeshMachine, t: &Tiling, level: usize) -> Result<()> {
    build_directed_forest(m, t)?;
    mesh_sort(m, t, R, |r: &Record| (r.kind == Kind::Vertex).then_some(r.v()))?;
    resolve_greatest_ancestors(m, t)?;
    adopt_singletons(m, t)?;
    trace_pass(m, t);

    for end in [0, 1] {
        lookup_by_lane(
            m,
            t,
            R,
            E,
            |r| (r.kind == Kind::Vertex).then_some((r.v(), r.ptr())),
            |r| (r.kind == Kind::Edge).then_some(if end == 0 { r.a } else { r.b }),
            |r, found| {
                let p = found.expect("every endpoint is on the roster");
                if end == 0 {
                    r.a = p
                } else {
                    r.b = p
                }
            },
        )?;
    }
    for_each_slot(m, t, E, |r, _| {
        if r.kind == Kind::Edge && r.a == r.b {
            *r = Record::NULL;
        }
    });
    pairs(m, t, R, S, |v, next| {
        if v.kind == Kind::Vertex && v.ptr() == v.v() && !v.has(flags::FINISHED) {
            *next = Record::vertex(v.v());
        }
    })?;
    if m.trace.capture_contraction {
        let mut entries = Vec::new();
        for rank in t.ranks() {
            for l in R.iter() {
                let r = &m.cell(rank).slots[l];
                if r.kind == Kind::Vertex {
                    entries.push((r.v(), r.ptr()));
                }
            }
        }
        entries.sort_unstable();
        m.trace.contraction.push(ContractionMap { level, entries });
    }
    m.push_frame(t, R);
    shift(m, t, S, R)
}

fn trace_pass(m: &mut MeshMachine, t: &Tiling) {
    let len = t.block_len();
    let events: Vec<HalvingEvent> = t
        .starts()
        .iter()
        .enumerate()
        .map(|(block, &s)| {
            let mut live = 0;
            let mut roots = std::collections::HashSet::new();
            for c in &m.cells()[s..s + len] {
                for l in R.iter() {
                    let r = &c.slots[l];
                    if r.kind == Kind::Vertex && !r.has(flags::FINISHED) {
                        live += 1;
                        roots.insert(r.ptr());
                    }
                }
            }
            HalvingEvent { block_side: t.side(), block, before: live, after: roots.len() }
        })
        .collect();
    m.trace.label_passes.extend(events);
}

/// Sets every roster vertex's `nbr` to its smallest forest neighbour and its
/// `ptr` to the smaller of itself and that neighbour.
pub fn build_directed_forest(m: &mut MeshMachine, t: &Tiling) -> Result<()> {
    pairs(m, t, E, S, |e, c| {
        if e.kind == Kind::Edge {
            *c = Record { a: e.b, b: e.a, flags: flags::COPY, ..*e };
        }
    })?;
    set_homes(m, t, ALL);
    let key = |r: &Record| match r.kind {
        Kind::Vertex => Some((r.v(), 0, 0)),
        Kind::Edge => Some((r.a, 1, r.b)),
        _ => None,
    };
    mesh_sort(m, t, ALL, key)?;
    segmented_scan(m, t, ALL, ScanDir::Backward, ScanOp::Min, |r| key(r).map(|k| [k.0, 0]), |r, _| {
        (r.kind == Kind::Edge).then_some(r.b)
    })?;
    for_each_slot(m, t, ALL, |r, w| {
        match r.kind {
            Kind::Vertex => {
                let nbr = crate::primitives::dec_word(*w);
                r.aux = nbr.unwrap_or(NONE);
                r.b = nbr.map_or(r.v(), |n| n.min(r.v()));
            }
            Kind::Edge if r.has(flags::COPY) => r.vacate(),
            _ => {}
        }
        *w = NONE;
    });
    mesh_sort(m, t, ALL, |r: &Record| Some(r.home))?;
    settle(m, t, ALL, 0);
    Ok(())
}

/// Replaces every roster vertex's `ptr` by the root of its directed tree.
///
/// The roster must be sorted by vertex label, so a vertex's ancestors lie
/// no later in the sequence than itself. On blocks of side 1, 2, 4, … the
/// pointer is advanced to the parent of the farthest ancestor inside the
/// block; three lookup rounds per size suffice because each one leaves the
/// current quadrant for an earlier one.
pub fn resolve_greatest_ancestors(m: &mut MeshMachine, t: &Tiling) -> Result<()> {
    let mut s = 1;
    loop {
        let ts = t.refine(s);
        for _ in 0..3 {
            pairs(m, t, R, S, |v, q| {
                if v.kind == Kind::Vertex && v.ptr() != v.v() {
                    *q = Record { kind: Kind::Query, a: v.ptr(), aux: NONE, ..Record::NULL };
                }
            })?;
            batched_lookup(
                m,
                &ts,
                R.union(S),
                |r| (r.kind == Kind::Vertex).then_some((r.v(), r.ptr())),
                |r| (r.kind == Kind::Query).then_some(r.a),
                |r, found| {
                    if let Some(p) = found {
                        r.aux = p;
                    }
                },
            )?;
            pairs(m, t, R, S, |v, q| {
                if q.kind == Kind::Query {
                    if q.aux != NONE {
                        v.b = q.aux;
                    }
                    *q = Record::NULL;
                }
            })?;
        }
        if s == t.side() {
            return Ok(());
        }
        s *= 2;
    }
}

/// Attaches every one-vertex subtree to the subtree of its smallest
/// neighbour; a vertex with no neighbour at all is marked `FINISHED`.
pub fn adopt_singletons(m: &mut MeshMachine, t: &Tiling) -> Result<()> {
    // a subtree root is a singleton when nobody else points at it
    pairs(m, t, R, S, |v, mk| {
        if v.kind == Kind::Vertex && v.ptr() != v.v() {
            *mk = Record { kind: Kind::Query, flags: flags::MARKER, a: v.ptr(), ..Record::NULL };
        }
    })?;
    let lanes = R.union(S);
    set_homes(m, t, lanes);
    let key = |r: &Record| match r.kind {
        Kind::Vertex => Some((r.v(), 0)),
        Kind::Query => Some((r.a, 1)),
        _ => None,
    };
    mesh_sort(m, t, lanes, key)?;
    segmented_scan(m, t, lanes, ScanDir::Backward, ScanOp::Earliest, |r| key(r).map(|k| [k.0, 0]), |r, _| {
        (r.kind == Kind::Query).then_some(1)
    })?;
    for_each_slot(m, t, lanes, |r, w| {
        match r.kind {
            Kind::Vertex => r.set(flags::HAS_IN, *w == 1),
            Kind::Query => r.vacate(),
            _ => {}
        }
        *w = NONE;
    });
    mesh_sort(m, t, lanes, |r: &Record| Some(r.home))?;
    settle(m, t, lanes, 0);

    pairs(m, t, R, S, |v, q| {
        if v.kind != Kind::Vertex || v.ptr() != v.v() || v.has(flags::HAS_IN) {
            return;
        }
        if v.nbr() == NONE {
            v.set(flags::FINISHED, true);
            v.aux2 = v.v();
        } else {
            *q = Record { kind: Kind::Query, a: v.nbr(), aux: NONE, ..Record::NULL };
        }
    })?;
    batched_lookup(
        m,
        t,
        lanes,
        |r| (r.kind == Kind::Vertex).then_some((r.v(), r.ptr())),
        |r| (r.kind == Kind::Query).then_some(r.a),
        |r, found| r.aux = found.unwrap_or(NONE),
    )?;
    let mut orphan = false;
    pairs(m, t, R, S, |v, q| {
        if q.kind == Kind::Query {
            orphan |= q.aux == NONE;
            v.b = q.aux;
            *q = Record::NULL;
        }
        v.set(flags::HAS_IN, false);
    })?;
    if orphan {
        return Err(MeshError::MissingParent { label: NONE, level: t.side() });
    }
    Ok(())
}

/// Restores the roster of the last pass from the ledger and gives each of
/// its vertices the root of the subtree it was contracted into.
pub fn unwind_labels(m: &mut MeshMachine, t: &Tiling) -> Result<()> {
    shift(m, t, R, S)?;
    m.pop_frame(t, R)?;
    lookup_by_lane(
        m,
        t,
        S,
        R,
        |r| (r.kind == Kind::Vertex).then_some((r.v(), r.root())),
        |r| (r.kind == Kind::Vertex).then_some(r.ptr()),
        |r, found| r.aux2 = found.unwrap_or(r.ptr()),
    )?;
    clear_lanes(m, t, S);
    Ok(())
}
