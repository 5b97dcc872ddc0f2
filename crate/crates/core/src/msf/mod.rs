//! Minimal spanning forest and connected components on the mesh.
//!
//! Lanes are assigned by role. Inside the spanning forest driver lanes 0–1
//! hold the frozen input edges of the current call, 2–3 the working copy
//! that coarsening contracts, and 4–5 scratch. Tree labeling reuses the same
//! slots as tree edges (0–1), vertex roster (2–3) and scratch (4–5). Whatever
//! a step does not need is parked on the per-processor ledger stack.

use std::collections::{BTreeSet, HashSet};

use serde::Serialize;

use crate::error::{MeshError, Result};
use crate::graph::Graph;
use crate::mesh::{ExecMode, MeshConfig, MeshMachine, StepReport, Tiling};
use crate::primitives::{batched_lookup, for_each_slot, mesh_sort};
use crate::record::{flags, Kind, Lanes, Record, Word};
use crate::trace::Trace;

mod coarsen;
mod driver;
mod label;

pub use coarsen::{coarsen, select_min_incident};
pub use driver::msf_block;
pub use label::{adopt_singletons, build_directed_forest, label_trees, resolve_greatest_ancestors, unwind_labels};

pub(crate) const F: Lanes = Lanes::of(&[0, 1]);
pub(crate) const W: Lanes = Lanes::of(&[2, 3]);
pub(crate) const S: Lanes = Lanes::of(&[4, 5]);
pub(crate) const ALL: Lanes = Lanes::of(&[0, 1, 2, 3, 4, 5]);
/// Tree edges during labeling.
pub(crate) const E: Lanes = F;
/// Vertex roster during labeling.
pub(crate) const R: Lanes = W;

/// Largest weight a graph may carry.
pub const MAX_WEIGHT: u64 = (1 << 60) - 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MsfConfig {
    /// Coarsening rounds before each recursive split.
    pub rounds: usize,
    /// Mesh side; the smallest that fits when `None`.
    pub side: Option<usize>,
    pub exec: ExecMode,
    /// Record child → parent maps of the final component labeling.
    pub capture_contraction: bool,
}

impl Default for MsfConfig {
    fn default() -> Self {
        MsfConfig { rounds: 6, side: None, exec: ExecMode::Fused, capture_contraction: false }
    }
}

/// What a run of the mesh pipeline produced.
#[derive(Clone, Debug, Serialize)]
pub struct MsfResult {
    pub side: usize,
    /// Input indices of the spanning forest edges.
    pub msf_origins: BTreeSet<usize>,
    /// Component label of every vertex: the smallest vertex in its component.
    pub component_of: Vec<Word>,
    pub steps: StepReport,
    pub trace: Trace,
}

impl MsfResult {
    pub fn components(&self) -> usize {
        self.component_of.iter().collect::<HashSet<_>>().len()
    }
}

/// Smallest admissible side whose mesh holds `records` records.
pub fn fitting_side(records: usize) -> usize {
    let mut side = 2;
    while side * side < records {
        side *= 2;
    }
    side
}

/// Runs the whole pipeline: ingestion, spanning forest, component labels.
pub fn minimum_spanning_forest(g: &Graph, cfg: &MsfConfig) -> Result<MsfResult> {
    g.validate()?;
    if let Some(&e) = g.edges.iter().find(|e| e.w > MAX_WEIGHT) {
        return Err(MeshError::OutOfRange { what: "weight", value: e.w as usize, limit: MAX_WEIGHT as usize });
    }
    if !(1..=32).contains(&cfg.rounds) {
        return Err(MeshError::Config(format!("coarsening rounds must lie in 1..=32, got {}", cfg.rounds)));
    }
    let edges: Vec<(usize, &crate::graph::Edge)> = g.edges.iter().enumerate().filter(|(_, e)| e.u != e.v).collect();
    let records = edges.len() + g.n_vertices;
    let side = match cfg.side {
        Some(s) if s * s < records => {
            return Err(MeshError::Config(format!("side {s} holds {} records, the input has {records}", s * s)))
        }
        Some(s) => s,
        None => fitting_side(records),
    };
    let mut m = MeshMachine::new(MeshConfig::new(side).with_exec(cfg.exec))?;
    let root = m.root_tiling();

    m.set_phase("ingest");
    for (rank, (idx, e)) in edges.iter().enumerate() {
        let (a, b) = (e.u.min(e.v) as Word, e.u.max(e.v) as Word);
        m.load(rank, 0, Record::edge(a, b, e.w, *idx as Word));
    }
    for v in 0..g.n_vertices {
        m.load(edges.len() + v, 0, Record::self_loop(v as Word));
    }
    order_edges(&mut m, &root)?;
    m.local(&root, |ctx, s| {
        if s.slots[0].kind == Kind::SelfLoop {
            s.slots[1] = std::mem::replace(&mut s.slots[0], Record::NULL);
        } else if s.slots[0].kind == Kind::Edge {
            s.slots[0].ord = ctx.rank as Word;
        }
    })?;
    m.push_frame(&root, Lanes::of(&[1]));

    msf_block(&mut m, &root, cfg.rounds, side * side)?;

    let mut msf_origins = BTreeSet::new();
    m.local(&root, |_, s| {
        for l in F.iter() {
            let r = &mut s.slots[l];
            if r.has(flags::MSF) {
                msf_origins.insert(r.idx as usize);
                r.flags = 0;
            } else {
                *r = Record::NULL;
            }
        }
    })?;

    m.pop_frame(&root, Lanes::of(&[1]))?;
    m.set_phase("components");
    m.local(&root, |_, s| {
        if s.slots[1].kind == Kind::SelfLoop {
            s.slots[2] = Record::vertex(s.slots[1].a);
            s.slots[1] = Record::NULL;
        }
    })?;
    m.trace.capture_contraction = cfg.capture_contraction;
    label_trees(&mut m, &root)?;
    m.trace.capture_contraction = false;

    let mut component_of = vec![crate::record::NONE; g.n_vertices];
    for c in m.cells() {
        for l in R.iter() {
            let r = &c.slots[l];
            if r.kind == Kind::Vertex {
                component_of[r.v() as usize] = r.root();
            }
        }
    }
    if component_of.iter().any(|&c| c == crate::record::NONE) || m.ledger_depth() != 0 {
        return Err(MeshError::Invariant("component labeling left vertices unlabeled".into()));
    }
    Ok(MsfResult { side, msf_origins, component_of, steps: m.steps().clone(), trace: std::mem::take(&mut m.trace) })
}

/// Sorts lane 0 by the total edge order `(w, min, max, index)`, self-loops
/// last; afterwards an edge's curve rank is its position in that order.
fn order_edges(m: &mut MeshMachine, t: &Tiling) -> Result<()> {
    mesh_sort(m, t, Lanes::of(&[0]), |r: &Record| (r.kind == Kind::Edge).then_some((r.aux, r.a, r.b, r.idx)))
}

/// Applies `f` to the slot pairs `(src[i], dst[i])` of every processor.
pub(crate) fn pairs(
    m: &mut MeshMachine,
    t: &Tiling,
    src: Lanes,
    dst: Lanes,
    mut f: impl FnMut(&mut Record, &mut Record),
) -> Result<()> {
    m.local(t, |_, s| {
        for (a, b) in src.iter().zip(dst.iter()) {
            let [x, y] = s.slots.get_disjoint_mut([a, b]).expect("distinct lanes");
            f(x, y);
        }
    })
}

/// Moves every record of `src` into the empty slot of the matching `dst` lane.
pub(crate) fn shift(m: &mut MeshMachine, t: &Tiling, src: Lanes, dst: Lanes) -> Result<()> {
    for (a, b) in src.iter().zip(dst.iter()) {
        crate::primitives::move_lane(m, t, a, b)?;
    }
    Ok(())
}

pub(crate) fn clear_lanes(m: &mut MeshMachine, t: &Tiling, lanes: Lanes) {
    for_each_slot(m, t, lanes, |r, _| *r = Record::NULL);
}

pub(crate) fn clear_flags(m: &mut MeshMachine, t: &Tiling, lanes: Lanes, f: u16) {
    for_each_slot(m, t, lanes, |r, _| r.flags &= !f);
}

/// Lookup where directory and queries are told apart by lane rather than
/// by content.
pub(crate) fn lookup_by_lane(
    m: &mut MeshMachine,
    t: &Tiling,
    dir_lanes: Lanes,
    query_lanes: Lanes,
    dir: impl Fn(&Record) -> Option<(Word, Word)>,
    query: impl Fn(&Record) -> Option<Word>,
    deliver: impl FnMut(&mut Record, Option<Word>),
) -> Result<()> {
    for_each_slot(m, t, dir_lanes, |r, _| {
        if !r.is_null() && dir(r).is_some() {
            r.set(flags::DIR, true);
        }
    });
    for_each_slot(m, t, query_lanes, |r, _| {
        if !r.is_null() && query(r).is_some() {
            r.set(flags::QUERY, true);
        }
    });
    let lanes = dir_lanes.union(query_lanes);
    batched_lookup(
        m,
        t,
        lanes,
        |r| if r.has(flags::DIR) { dir(r) } else { None },
        |r| if r.has(flags::QUERY) { query(r) } else { None },
        deliver,
    )?;
    clear_flags(m, t, lanes, flags::DIR | flags::QUERY);
    Ok(())
}

/// Distinct endpoints of the edge records in `lanes`, per block. Read by
/// the host for the trace only.
pub(crate) fn live_vertices(m: &MeshMachine, t: &Tiling, lanes: Lanes) -> Vec<usize> {
    let len = t.block_len();
    t.starts()
        .iter()
        .map(|&s| {
            let mut seen = HashSet::new();
            for c in &m.cells()[s..s + len] {
                for l in lanes.iter() {
                    let r = &c.slots[l];
                    if r.kind == Kind::Edge {
                        seen.insert(r.a);
                        seen.insert(r.b);
                    }
                }
            }
            seen.len()
        })
        .collect()
}
