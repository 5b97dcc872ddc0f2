//! Sorting the block sequence into curve order.
//!
//! The stepwise sort is shearsort on bundles: each processor keeps its lanes
//! sorted, and every comparator of the odd-even transposition phases becomes
//! a merge-split between neighboring bundles. That leaves the data sorted in
//! snake order (even local rows ascend eastward, odd rows westward). A fixed
//! permutation then moves each bundle from its snake index to the processor
//! with the same curve offset, routed offline in three one-dimensional phases
//! (column, row, column) from an edge coloring of the column-transfer graph.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::seq_cmp;
use crate::error::Result;
use crate::mesh::{empty_outbox, CellCtx, Direction, ExecMode, FnRule, MeshMachine, Packet, ProcessorState, Tiling};
use crate::record::{Lanes, Record, RECORD_WORDS};

/// Steps one sort of a side-`b` block costs.
pub fn sort_steps(b: usize) -> u64 {
    if b <= 1 {
        return 0;
    }
    let phases = 2 * b.trailing_zeros() as u64 + 1;
    phases * b as u64 + 3 * b as u64
}

/// Sorts the records of `lanes` in every block of `t` by `key`, records with
/// no key last, ties broken by the whole record.
pub fn mesh_sort<K: Ord>(m: &mut MeshMachine, t: &Tiling, lanes: Lanes, key: impl Fn(&Record) -> Option<K>) -> Result<()> {
    if t.side() == 1 {
        local_sort(m, t, lanes, &key);
        return Ok(());
    }
    match m.exec() {
        ExecMode::Fused => {
            fused(m, t, lanes, &key);
            m.charge(sort_steps(t.side()));
            Ok(())
        }
        ExecMode::Stepwise => stepwise(m, t, lanes, &key),
    }
}

fn fused<K: Ord>(m: &mut MeshMachine, t: &Tiling, lanes: Lanes, key: &impl Fn(&Record) -> Option<K>) {
    let len = t.block_len();
    let cells = m.cells_mut();
    let mut items: Vec<(Option<K>, Record)> = Vec::with_capacity(len * lanes.len());
    for &start in t.starts() {
        items.clear();
        for c in &cells[start..start + len] {
            for l in lanes.iter() {
                let r = c.slots[l];
                items.push((key(&r), r));
            }
        }
        items.sort_unstable_by(|(ka, ra), (kb, rb)| seq_cmp(ka, ra, kb, rb));
        let mut it = items.drain(..);
        for c in &mut cells[start..start + len] {
            for l in lanes.iter() {
                c.slots[l] = it.next().expect("sizes match").1;
            }
        }
    }
}

fn sort_bundle<K: Ord>(state: &mut ProcessorState, lanes: Lanes, key: &impl Fn(&Record) -> Option<K>) {
    let mut b: Vec<(Option<K>, Record)> = lanes.iter().map(|l| (key(&state.slots[l]), state.slots[l])).collect();
    b.sort_unstable_by(|(ka, ra), (kb, rb)| seq_cmp(ka, ra, kb, rb));
    for (l, (_, r)) in lanes.iter().zip(b) {
        state.slots[l] = r;
    }
}

fn local_sort<K: Ord>(m: &mut MeshMachine, t: &Tiling, lanes: Lanes, key: &impl Fn(&Record) -> Option<K>) {
    let cells = m.cells_mut();
    for rank in t.ranks() {
        sort_bundle(&mut cells[rank], lanes, key);
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Axis {
    Row,
    Col,
}

/// Position along the line and the direction toward position + 1.
fn line_pos(ctx: &CellCtx, axis: Axis, snake: bool) -> (usize, Direction) {
    let (r, c) = ctx.local();
    match axis {
        Axis::Row if snake && r % 2 == 1 => (ctx.block_side - 1 - c, Direction::West),
        Axis::Row => (c, Direction::East),
        Axis::Col => (r, Direction::South),
    }
}

/// Partner direction and whether this processor is the lower of the pair.
fn partner(ctx: &CellCtx, axis: Axis, snake: bool, parity: usize) -> Option<(Direction, bool)> {
    let (pos, fwd) = line_pos(ctx, axis, snake);
    if pos % 2 == parity && pos + 1 < ctx.block_side {
        Some((fwd, true))
    } else if pos >= 1 && (pos - 1) % 2 == parity {
        Some((fwd.opposite(), false))
    } else {
        None
    }
}

fn bundle_packet(state: &ProcessorState, lanes: Lanes) -> Packet {
    let mut p = Packet::new();
    for l in lanes.iter() {
        p.extend(state.slots[l].to_words());
    }
    p.extend(state.regs.iter().copied());
    p
}

fn unpack_records(p: &Packet, k: usize) -> impl Iterator<Item = Record> + '_ {
    (0..k).map(move |i| Record::from_words(&p[i * RECORD_WORDS..(i + 1) * RECORD_WORDS]))
}

fn merge_split_round<K: Ord>(
    m: &mut MeshMachine,
    t: &Tiling,
    lanes: Lanes,
    key: &impl Fn(&Record) -> Option<K>,
    axis: Axis,
    parity: usize,
) -> Result<()> {
    let k = lanes.len();
    let rule = FnRule {
        send: |ctx: &CellCtx, s: &ProcessorState| {
            let mut out = empty_outbox();
            if let Some((d, _)) = partner(ctx, axis, true, parity) {
                out[d as usize] = Some(bundle_packet(s, lanes));
            }
            out
        },
        receive: |ctx: &CellCtx, s: &mut ProcessorState, inbox: &[Option<Packet>; 4]| {
            let Some((d, lower)) = partner(ctx, axis, true, parity) else { return };
            let Some(p) = &inbox[d as usize] else { return };
            let mut all: Vec<(Option<K>, Record)> = lanes.iter().map(|l| s.slots[l]).chain(unpack_records(p, k)).map(|r| (key(&r), r)).collect();
            all.sort_unstable_by(|(ka, ra), (kb, rb)| seq_cmp(ka, ra, kb, rb));
            let keep = if lower { &all[..k] } else { &all[k..] };
            for (l, (_, r)) in lanes.iter().zip(keep) {
                s.slots[l] = *r;
            }
        },
    };
    m.sync_step(t, &rule)
}

fn route_round(m: &mut MeshMachine, t: &Tiling, lanes: Lanes, axis: Axis, reg: usize, parity: usize) -> Result<()> {
    let k = lanes.len();
    let rule = FnRule {
        send: |ctx: &CellCtx, s: &ProcessorState| {
            let mut out = empty_outbox();
            if let Some((d, _)) = partner(ctx, axis, false, parity) {
                out[d as usize] = Some(bundle_packet(s, lanes));
            }
            out
        },
        receive: |ctx: &CellCtx, s: &mut ProcessorState, inbox: &[Option<Packet>; 4]| {
            let Some((d, lower)) = partner(ctx, axis, false, parity) else { return };
            let Some(p) = &inbox[d as usize] else { return };
            let mine = s.regs[reg];
            let theirs = p[k * RECORD_WORDS + reg];
            if (lower && theirs < mine) || (!lower && theirs > mine) {
                for (l, r) in lanes.iter().zip(unpack_records(p, k)) {
                    s.slots[l] = r;
                }
                s.regs.clear();
                s.regs.extend(p[k * RECORD_WORDS..].iter().copied());
            }
        },
    };
    m.sync_step(t, &rule)
}

fn stepwise<K: Ord>(m: &mut MeshMachine, t: &Tiling, lanes: Lanes, key: &impl Fn(&Record) -> Option<K>) -> Result<()> {
    let b = t.side();
    m.local(t, |_, s| sort_bundle(s, lanes, key))?;
    let phases = 2 * b.trailing_zeros() as usize + 1;
    for phase in 0..phases {
        let axis = if phase % 2 == 0 { Axis::Row } else { Axis::Col };
        for round in 0..b {
            merge_split_round(m, t, lanes, key, axis, round % 2)?;
        }
    }

    let coords = m.coords();
    let plans: HashMap<usize, Arc<Vec<[u64; 3]>>> = t.starts().iter().map(|&s| (s, placement_plan(&coords, s, b))).collect();
    m.local(t, |ctx, s| {
        let (r, c) = ctx.local();
        s.regs.clear();
        s.regs.extend(plans[&ctx.block_start][r * b + c]);
    })?;
    for (axis, reg) in [(Axis::Col, 0), (Axis::Row, 1), (Axis::Col, 2)] {
        for round in 0..b {
            route_round(m, t, lanes, axis, reg, round % 2)?;
        }
    }
    m.local(t, |_, s| s.regs.clear())
}

type PlanKey = (usize, (usize, usize), (usize, usize));

fn plan_cache() -> &'static Mutex<HashMap<PlanKey, Arc<Vec<[u64; 3]>>>> {
    static CACHE: OnceLock<Mutex<HashMap<PlanKey, Arc<Vec<[u64; 3]>>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// For each local processor `(r, c)` of the block starting at `start`: the
/// row its bundle visits after the first column phase, then its destination
/// column and row.
fn placement_plan(coords: &[(usize, usize)], start: usize, b: usize) -> Arc<Vec<[u64; 3]>> {
    let origin = {
        let (r, c) = coords[start];
        (r - r % b, c - c % b)
    };
    let local = |rank: usize| (coords[rank].0 - origin.0, coords[rank].1 - origin.1);
    let key = (b, local(start), local(start + b * b - 1));
    if let Some(p) = plan_cache().lock().unwrap().get(&key) {
        return p.clone();
    }
    let mut dest = vec![(0, 0); b * b];
    for r in 0..b {
        for c in 0..b {
            let snake = r * b + if r % 2 == 0 { c } else { b - 1 - c };
            dest[r * b + c] = local(start + snake);
        }
    }
    let edges: Vec<(usize, usize)> = (0..b * b).map(|i| (i % b, dest[i].1)).collect();
    let mut colors = vec![0; edges.len()];
    color_regular(b, &edges, (0..edges.len()).collect(), 0, &mut colors);
    let plan: Vec<[u64; 3]> = (0..b * b).map(|i| [colors[i] as u64, dest[i].1 as u64, dest[i].0 as u64]).collect();
    let plan = Arc::new(plan);
    plan_cache().lock().unwrap().insert(key, plan.clone());
    plan
}

fn next_unused(adj: &[usize], ptr: &mut usize, used: &[bool]) -> Option<usize> {
    while *ptr < adj.len() {
        let e = adj[*ptr];
        *ptr += 1;
        if !used[e] {
            return Some(e);
        }
    }
    None
}

/// Colors the edges `ids` of a `d`-regular bipartite multigraph on
/// `nodes + nodes` vertices with colors `base..base + d`, each color class a
/// perfect matching. `d` must be a power of two.
pub(crate) fn color_regular(nodes: usize, edges: &[(usize, usize)], ids: Vec<usize>, base: usize, colors: &mut [usize]) {
    let d = ids.len() / nodes;
    if d <= 1 {
        for e in ids {
            colors[e] = base;
        }
        return;
    }
    let mut adj = vec![Vec::new(); 2 * nodes];
    for &e in &ids {
        let (u, v) = edges[e];
        adj[u].push(e);
        adj[nodes + v].push(e);
    }
    let mut used = vec![false; edges.len()];
    let mut ptr = vec![0; 2 * nodes];
    let (mut h0, mut h1) = (Vec::with_capacity(ids.len() / 2), Vec::with_capacity(ids.len() / 2));
    for start in 0..nodes {
        while let Some(mut e) = next_unused(&adj[start], &mut ptr[start], &used) {
            let mut cur = start;
            let mut half = 0;
            loop {
                used[e] = true;
                if half == 0 { h0.push(e) } else { h1.push(e) }
                let (u, v) = edges[e];
                cur = if cur < nodes { nodes + v } else { u };
                half ^= 1;
                match next_unused(&adj[cur], &mut ptr[cur], &used) {
                    Some(e2) => e = e2,
                    None => break,
                }
            }
            debug_assert_eq!(cur, start);
        }
    }
    color_regular(nodes, edges, h0, base, colors);
    color_regular(nodes, edges, h1, base + d / 2, colors);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::point_unchecked;
    use crate::primitives::testutil::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn coloring_gives_perfect_matchings() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for b in [2usize, 4, 8, 16] {
            let mut targets: Vec<usize> = (0..b * b).map(|i| i % b).collect();
            targets.shuffle(&mut rng);
            let edges: Vec<(usize, usize)> = (0..b * b).map(|i| (i / b, targets[i])).collect();
            let mut colors = vec![0; edges.len()];
            color_regular(b, &edges, (0..edges.len()).collect(), 0, &mut colors);
            for col in 0..b {
                let class: Vec<_> = (0..edges.len()).filter(|&e| colors[e] == col).map(|e| edges[e]).collect();
                assert_eq!(class.len(), b);
                let mut l: Vec<_> = class.iter().map(|e| e.0).collect();
                let mut r: Vec<_> = class.iter().map(|e| e.1).collect();
                l.sort();
                r.sort();
                assert_eq!(l, (0..b).collect::<Vec<_>>());
                assert_eq!(r, (0..b).collect::<Vec<_>>());
            }
        }
    }

    fn keys_in_curve_order(m: &MeshMachine, lanes: Lanes) -> Vec<Record> {
        m.cells().iter().flat_map(|c| lanes.iter().map(move |l| c.slots[l])).collect()
    }

    #[test]
    fn stepwise_matches_fused() {
        for side in [2usize, 4, 8, 16] {
            for (seed, lanes) in [(1, Lanes::of(&[0])), (2, Lanes::of(&[0, 1])), (3, Lanes::of(&[1, 3, 4]))] {
                assert_modes_agree(
                    side,
                    |m| fill_random(m, Lanes::of(&[0, 1, 2, 3, 4, 5]), seed + side as u64, 20, 30),
                    |m| {
                        let t = m.root_tiling().quadrants();
                        mesh_sort(m, &t, lanes, |r: &Record| (!r.is_null()).then_some(r.a))
                    },
                );
            }
        }
    }

    #[test]
    fn sorted_sequence_matches_oracle() {
        let side = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let mut m = machine(side, ExecMode::Stepwise);
            let mut keys: Vec<u64> = (0..(side * side) as u64).collect();
            keys.shuffle(&mut rng);
            for (rank, &k) in keys.iter().enumerate() {
                m.load(rank, 0, Record::vertex(k));
            }
            let t = m.root_tiling();
            mesh_sort(&mut m, &t, Lanes::of(&[0]), |r: &Record| Some(r.a)).unwrap();
            keys.sort();
            for (i, k) in keys.iter().enumerate() {
                let (row, col) = point_unchecked(i, side);
                assert_eq!(m.cell_at(row, col).slots[0].a, *k);
            }
            assert_eq!(m.steps().total_steps, sort_steps(side));
        }
    }

    #[test]
    fn sorted_input_is_fixed_point() {
        let mut m = machine(8, ExecMode::Stepwise);
        for rank in 0..64 {
            m.load(rank, 0, Record::vertex(rank as u64 * 3));
        }
        let before = keys_in_curve_order(&m, Lanes::of(&[0]));
        let t = m.root_tiling();
        mesh_sort(&mut m, &t, Lanes::of(&[0]), |r: &Record| Some(r.a)).unwrap();
        assert_eq!(before, keys_in_curve_order(&m, Lanes::of(&[0])));
    }
}
