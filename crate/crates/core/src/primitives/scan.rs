//! Segmented scans along the block sequence.
//!
//! A scan element is `(start, value)`, where `start` marks the first element
//! of a run of equal segment keys. Elements combine with the usual segmented
//! operator, which is associative, so the stepwise execution can use a
//! quadtree sweep: totals climb the quadrant hierarchy and prefixes come back
//! down. At each level a token visits the four quadrant anchors (the first
//! processor of each quadrant in scan order) by neighbor hops, so a level
//! costs the Manhattan length of that tour.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::curve::point_unchecked;
use crate::error::Result;
use crate::mesh::{empty_outbox, CellCtx, Direction, ExecMode, FnRule, MeshMachine, Packet, ProcessorState, Tiling};
use crate::record::{Lanes, Record, Word, NONE};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScanDir {
    Forward,
    Backward,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanOp {
    Min,
    Sum,
    /// The most recent value seen.
    Latest,
    /// The first value seen.
    Earliest,
}

impl ScanOp {
    #[inline]
    fn apply(self, x: Option<Word>, y: Option<Word>) -> Option<Word> {
        match self {
            ScanOp::Min => match (x, y) {
                (Some(a), Some(b)) => Some(a.min(b)),
                _ => x.or(y),
            },
            ScanOp::Sum => match (x, y) {
                (Some(a), Some(b)) => Some(a + b),
                _ => x.or(y),
            },
            ScanOp::Latest => y.or(x),
            ScanOp::Earliest => x.or(y),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Elem {
    start: bool,
    val: Option<Word>,
}

const IDENTITY: Elem = Elem { start: false, val: None };

#[inline]
fn combine(op: ScanOp, x: Elem, y: Elem) -> Elem {
    if y.start {
        y
    } else {
        Elem { start: x.start, val: op.apply(x.val, y.val) }
    }
}

fn enc(v: Option<Word>) -> Word {
    v.unwrap_or(NONE)
}

pub(crate) fn dec(w: Word) -> Option<Word> {
    (w != NONE).then_some(w)
}

pub(crate) use dec as dec_word;

/// What a scan noticed besides its results.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ScanOutcome {
    /// Some element with a value followed another valued element of its
    /// segment.
    pub repeated: bool,
    /// Segment keys decreased somewhere along the scan direction.
    pub unsorted: bool,
}

type SegKey = [Word; 2];

fn seg_key(k: Option<SegKey>) -> SegKey {
    k.unwrap_or([NONE; 2])
}

/// Steps one scan of a side-`b` block costs.
pub fn scan_steps(b: usize, dir: ScanDir) -> u64 {
    static CACHE: OnceLock<Mutex<HashMap<(usize, ScanDir), u64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(&s) = cache.lock().unwrap().get(&(b, dir)) {
        return s;
    }
    let mut total = 0u64;
    if b > 1 {
        total = 1;
        let mut c = 1;
        while c < b {
            let a = canonical_anchors(c, dir);
            let d = |i: usize, j: usize| (a[i].0.abs_diff(a[j].0) + a[i].1.abs_diff(a[j].1)) as u64;
            total += d(0, 1) + d(1, 2) + d(2, 3) + d(3, 0);
            total += d(0, 1) + d(1, 2) + d(2, 3);
            c *= 2;
        }
    }
    cache.lock().unwrap().insert((b, dir), total);
    total
}

/// Anchors of the four side-`c` quadrants of a side-`2c` curve, in scan order.
fn canonical_anchors(c: usize, dir: ScanDir) -> [(usize, usize); 4] {
    let q = c * c;
    std::array::from_fn(|k| match dir {
        ScanDir::Forward => point_unchecked(k * q, 2 * c),
        ScanDir::Backward => point_unchecked((4 - k) * q - 1, 2 * c),
    })
}

/// Block offset of scan position `s`.
#[inline]
fn offset(s: usize, len: usize, dir: ScanDir) -> usize {
    match dir {
        ScanDir::Forward => s,
        ScanDir::Backward => len - 1 - s,
    }
}

fn lane_order(lanes: Lanes, dir: ScanDir) -> Vec<usize> {
    let mut v: Vec<usize> = lanes.iter().collect();
    if dir == ScanDir::Backward {
        v.reverse();
    }
    v
}

/// Inclusive segmented scan over `lanes` in every block of `t`.
///
/// Each slot's element is `(seg(record), value(record, scratch))`; records
/// with no segment key share the key "none". Every slot's scratch word is
/// overwritten with its inclusive result (`NONE` for no value).
pub fn segmented_scan(
    m: &mut MeshMachine,
    t: &Tiling,
    lanes: Lanes,
    dir: ScanDir,
    op: ScanOp,
    seg: impl Fn(&Record) -> Option<SegKey>,
    value: impl Fn(&Record, Word) -> Option<Word>,
) -> Result<ScanOutcome> {
    match m.exec() {
        ExecMode::Fused => {
            let out = fused(m, t, lanes, dir, op, &seg, &value);
            m.charge(scan_steps(t.side(), dir));
            Ok(out)
        }
        ExecMode::Stepwise => stepwise(m, t, lanes, dir, op, &seg, &value),
    }
}

fn fused(
    m: &mut MeshMachine,
    t: &Tiling,
    lanes: Lanes,
    dir: ScanDir,
    op: ScanOp,
    seg: &impl Fn(&Record) -> Option<SegKey>,
    value: &impl Fn(&Record, Word) -> Option<Word>,
) -> ScanOutcome {
    let len = t.block_len();
    let order = lane_order(lanes, dir);
    let cells = m.cells_mut();
    let mut out = ScanOutcome::default();
    for &start in t.starts() {
        let mut prev: Option<SegKey> = None;
        let mut acc = IDENTITY;
        for s in 0..len {
            let c = &mut cells[start + offset(s, len, dir)];
            for &l in &order {
                let key = seg_key(seg(&c.slots[l]));
                let e = Elem { start: prev != Some(key), val: value(&c.slots[l], c.scratch[l]) };
                if let Some(p) = prev {
                    out.unsorted |= key < p;
                }
                out.repeated |= !e.start && e.val.is_some() && acc.val.is_some();
                acc = combine(op, acc, e);
                c.scratch[l] = enc(acc.val);
                prev = Some(key);
            }
        }
    }
    out
}

// Register layout used by the stepwise scan.
const TOT: usize = 0;
const PART: usize = 2;
const PRE: usize = 4;
const TOK: usize = 6;
const FIRST: usize = 9;
const SCAN_REGS: usize = 10;

fn get(s: &ProcessorState, at: usize) -> Elem {
    Elem { start: s.regs[at] == 1, val: dec(s.regs[at + 1]) }
}

fn put(s: &mut ProcessorState, at: usize, e: Elem) {
    s.regs[at] = Word::from(e.start);
    s.regs[at + 1] = enc(e.val);
}

fn clear(s: &mut ProcessorState, at: usize, n: usize) {
    for w in &mut s.regs[at..at + n] {
        *w = NONE;
    }
}

fn pack_coords(p: (usize, usize)) -> Word {
    ((p.0 as Word) << 32) | p.1 as Word
}

fn stepwise(
    m: &mut MeshMachine,
    t: &Tiling,
    lanes: Lanes,
    dir: ScanDir,
    op: ScanOp,
    seg: &impl Fn(&Record) -> Option<SegKey>,
    value: &impl Fn(&Record, Word) -> Option<Word>,
) -> Result<ScanOutcome> {
    let b = t.side();
    let len = b * b;
    let order = lane_order(lanes, dir);
    let coords = m.coords();
    let pos = |ctx: &CellCtx| match dir {
        ScanDir::Forward => ctx.rank - ctx.block_start,
        ScanDir::Backward => len - 1 - (ctx.rank - ctx.block_start),
    };
    let rank_at = |ctx: &CellCtx, s: usize| ctx.block_start + offset(s, len, dir);

    m.local(t, |_, s| {
        s.regs.clear();
        s.regs.extend(std::iter::repeat(NONE).take(SCAN_REGS));
    })?;

    // Each processor learns the segment key of the element just before its
    // first one.
    if b > 1 {
        let rule = FnRule {
            send: |ctx: &CellCtx, s: &ProcessorState| {
                let mut out = empty_outbox();
                let p = pos(ctx);
                if p + 1 < len {
                    let last = *order.last().expect("lanes nonempty");
                    let to = coords[rank_at(ctx, p + 1)];
                    let d = Direction::between((ctx.row, ctx.col), to).expect("curve neighbors are adjacent");
                    let k = seg_key(seg(&s.slots[last]));
                    out[d as usize] = Some(Packet::from_iter(k));
                }
                out
            },
            receive: |ctx: &CellCtx, s: &mut ProcessorState, inbox: &[Option<Packet>; 4]| {
                let p = pos(ctx);
                if p == 0 {
                    return;
                }
                let from = coords[rank_at(ctx, p - 1)];
                let d = Direction::between((ctx.row, ctx.col), from).expect("curve neighbors are adjacent");
                let k = inbox[d as usize].as_ref().expect("predecessor always sends");
                s.regs[TOK] = 1;
                s.regs[TOK + 1] = k[0];
                s.regs[TOK + 2] = k[1];
            },
        };
        m.sync_step(t, &rule)?;
    }

    // Local elements: segment starts and the processor total.
    let mut unsorted = false;
    m.local(t, |_, s| {
        let mut prev = (s.regs[TOK] == 1).then(|| [s.regs[TOK + 1], s.regs[TOK + 2]]);
        let mut tot = IDENTITY;
        for (i, &l) in order.iter().enumerate() {
            let key = seg_key(seg(&s.slots[l]));
            if let Some(p) = prev {
                unsorted |= key < p;
            }
            let e = Elem { start: prev != Some(key), val: value(&s.slots[l], s.scratch[l]) };
            if i == 0 {
                s.regs[FIRST] = Word::from(e.start);
            }
            tot = combine(op, tot, e);
            prev = Some(key);
        }
        clear(s, TOK, 3);
        put(s, TOT, tot);
    })?;

    // Anchor of sub-block `k` (side `c`) inside the side-`2c` parent holding
    // scan position `p`.
    let anchor = |p: usize, c: usize, k: usize| (p / (4 * c * c)) * 4 * c * c + k * c * c;
    let quadrant_of = |p: usize, c: usize| -> Option<usize> {
        let q = c * c;
        (p % q == 0).then_some((p / q) % 4)
    };
    let dist = |c: usize, i: usize, j: usize| {
        let a = canonical_anchors(c, dir);
        a[i].0.abs_diff(a[j].0) + a[i].1.abs_diff(a[j].1)
    };

    // Up-sweep.
    let mut c = 1;
    while c < b {
        // Q0 launches its total toward Q1.
        m.local(t, |ctx, s| {
            let p = pos(ctx);
            if quadrant_of(p, c) == Some(0) {
                let tot = get(s, TOT);
                put(s, TOK, tot);
                s.regs[TOK + 2] = pack_coords(coords[rank_at(ctx, anchor(p, c, 1))]);
            }
        })?;
        for (from, to) in [(0usize, 1usize), (1, 2), (2, 3), (3, 0)] {
            move_tokens(m, t, dist(c, from, to))?;
            m.local(t, |ctx, s| {
                let p = pos(ctx);
                if quadrant_of(p, c) != Some(to) || s.regs[TOK + 2] == NONE {
                    return;
                }
                let tok = get(s, TOK);
                if to == 0 {
                    put(s, TOT, tok);
                    clear(s, TOK, 3);
                } else {
                    put(s, PART, tok);
                    let tot = get(s, TOT);
                    clear(s, TOT, 2);
                    put(s, TOK, combine(op, tok, tot));
                    let next = (to + 1) % 4;
                    s.regs[TOK + 2] = pack_coords(coords[rank_at(ctx, anchor(p, c, next))]);
                }
            })?;
        }
        c *= 2;
    }

    // Down-sweep.
    m.local(t, |ctx, s| {
        clear(s, TOT, 2);
        if pos(ctx) == 0 {
            put(s, PRE, IDENTITY);
        }
    })?;
    let mut c = b / 2;
    while c >= 1 {
        m.local(t, |ctx, s| {
            let p = pos(ctx);
            if quadrant_of(p, c) == Some(0) && p % (4 * c * c) == 0 {
                let pre = get(s, PRE);
                put(s, TOK, pre);
                s.regs[TOK + 2] = pack_coords(coords[rank_at(ctx, anchor(p, c, 1))]);
            }
        })?;
        for (from, to) in [(0usize, 1usize), (1, 2), (2, 3)] {
            move_tokens(m, t, dist(c, from, to))?;
            m.local(t, |ctx, s| {
                let p = pos(ctx);
                if quadrant_of(p, c) != Some(to) || s.regs[TOK + 2] == NONE {
                    return;
                }
                let tok = get(s, TOK);
                let part = get(s, PART);
                clear(s, PART, 2);
                put(s, PRE, combine(op, tok, part));
                if to == 3 {
                    clear(s, TOK, 3);
                } else {
                    s.regs[TOK + 2] = pack_coords(coords[rank_at(ctx, anchor(p, c, to + 1))]);
                }
            })?;
        }
        c /= 2;
    }

    // Final local pass from each processor's exclusive prefix.
    let mut repeated = false;
    m.local(t, |_, s| {
        let mut acc = get(s, PRE);
        let mut prev: Option<SegKey> = None;
        for (i, &l) in order.iter().enumerate() {
            let key = seg_key(seg(&s.slots[l]));
            let start = if i == 0 { s.regs[FIRST] == 1 } else { prev != Some(key) };
            let e = Elem { start, val: value(&s.slots[l], s.scratch[l]) };
            repeated |= !e.start && e.val.is_some() && acc.val.is_some();
            acc = combine(op, acc, e);
            s.scratch[l] = enc(acc.val);
            prev = Some(key);
        }
        s.regs.clear();
    })?;
    Ok(ScanOutcome { repeated, unsorted })
}

/// Moves every token `steps` hops toward its destination, rows first.
fn move_tokens(m: &mut MeshMachine, t: &Tiling, steps: usize) -> Result<()> {
    let hop = |ctx: &CellCtx, s: &ProcessorState| -> Option<Direction> {
        let dest = s.regs[TOK + 2];
        if dest == NONE {
            return None;
        }
        let (dr, dc) = ((dest >> 32) as usize, (dest & 0xffff_ffff) as usize);
        if dr < ctx.row {
            Some(Direction::North)
        } else if dr > ctx.row {
            Some(Direction::South)
        } else if dc < ctx.col {
            Some(Direction::West)
        } else if dc > ctx.col {
            Some(Direction::East)
        } else {
            None
        }
    };
    for _ in 0..steps {
        let rule = FnRule {
            send: |ctx: &CellCtx, s: &ProcessorState| {
                let mut out = empty_outbox();
                if let Some(d) = hop(ctx, s) {
                    out[d as usize] = Some(Packet::from_iter(s.regs[TOK..TOK + 3].iter().copied()));
                }
                out
            },
            receive: |ctx: &CellCtx, s: &mut ProcessorState, inbox: &[Option<Packet>; 4]| {
                if hop(ctx, s).is_some() {
                    clear(s, TOK, 3);
                }
                for p in inbox.iter().flatten() {
                    s.regs[TOK..TOK + 3].copy_from_slice(p);
                }
            },
        };
        m.sync_step(t, &rule)?;
    }
    Ok(())
}

/// Flags, within each run of equal segment keys, the record with the
/// smallest value. Values must be distinct within a segment; records with no
/// value are never flagged. Clears the scratch of `lanes` afterwards.
pub fn segmented_min(
    m: &mut MeshMachine,
    t: &Tiling,
    lanes: Lanes,
    seg: impl Fn(&Record) -> Option<SegKey>,
    value: impl Fn(&Record) -> Option<Word>,
    flag: u16,
) -> Result<()> {
    let out = segmented_scan(m, t, lanes, ScanDir::Forward, ScanOp::Min, &seg, |r, _| value(r))?;
    if out.unsorted {
        return Err(crate::MeshError::Contract("segmented_min input is not sorted by segment key".into()));
    }
    segmented_scan(m, t, lanes, ScanDir::Backward, ScanOp::Earliest, &seg, |_, w| dec(w))?;
    super::for_each_slot(m, t, lanes, |r, w| {
        if !r.is_null() {
            let win = value(r).is_some_and(|v| v == *w);
            r.set(flag, win);
        }
        *w = NONE;
    });
    Ok(())
}

/// Copies each segment's source value into the scratch word of every slot
/// of the segment (`NONE` where the segment has no source).
pub fn segmented_broadcast(
    m: &mut MeshMachine,
    t: &Tiling,
    lanes: Lanes,
    seg: impl Fn(&Record) -> Option<SegKey>,
    source: impl Fn(&Record) -> Option<Word>,
) -> Result<()> {
    let out = segmented_scan(m, t, lanes, ScanDir::Forward, ScanOp::Latest, &seg, |r, _| source(r))?;
    if out.repeated {
        return Err(crate::MeshError::Contract("segment with two broadcast sources".into()));
    }
    segmented_scan(m, t, lanes, ScanDir::Backward, ScanOp::Latest, &seg, |_, w| dec(w))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::MeshMachine;
    use crate::primitives::testutil::*;
    use crate::primitives::{clear_scratch, mesh_sort};
    use crate::record::flags;

    const ALL: Lanes = Lanes::of(&[0, 1, 2, 3, 4, 5]);

    fn sequence(m: &MeshMachine, start: usize, len: usize, lanes: Lanes) -> Vec<(Record, Word)> {
        (start..start + len).flat_map(|r| lanes.iter().map(move |l| (m.cell(r).slots[l], m.cell(r).scratch[l]))).collect()
    }

    #[test]
    fn scan_costs() {
        assert_eq!(scan_steps(1, ScanDir::Forward), 0);
        // one boundary exchange, a unit tour up and three hops down
        assert_eq!(scan_steps(2, ScanDir::Forward), 1 + 4 + 3);
        for b in [4usize, 8, 16, 32, 64, 128, 256] {
            let s = scan_steps(b, ScanDir::Forward);
            assert!(s <= 16 * b as u64, "side {b}: {s}");
            assert!(scan_steps(b, ScanDir::Backward) <= 16 * b as u64);
        }
    }

    #[test]
    fn stepwise_matches_fused() {
        let ops = [ScanOp::Min, ScanOp::Sum, ScanOp::Latest, ScanOp::Earliest];
        for side in [2usize, 4, 8, 16] {
            for (i, op) in ops.into_iter().enumerate() {
                for dir in [ScanDir::Forward, ScanDir::Backward] {
                    for (tile, lanes) in [(side, Lanes::of(&[0])), (side / 2, Lanes::of(&[1, 2])), (side, ALL)] {
                        assert_modes_agree(
                            side,
                            |m| fill_random(m, ALL, 100 + i as u64 + side as u64, 4, 40),
                            |m| {
                                let t = m.root_tiling().refine(tile.max(1));
                                segmented_scan(m, &t, lanes, dir, op, |r| (!r.is_null()).then_some([r.a, 0]), |r, _| {
                                    (!r.is_null() && r.b % 2 == 0).then_some(r.ord)
                                })
                                .map(|_| ())
                            },
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn scan_matches_sequential_oracle() {
        let side = 8;
        let mut m = machine(side, ExecMode::Fused);
        fill_random(&mut m, Lanes::of(&[0, 1]), 7, 3, 20);
        let lanes = Lanes::of(&[0, 1]);
        let t = m.root_tiling().quadrants();
        let seg = |r: &Record| (!r.is_null()).then_some([r.a, 0]);
        segmented_scan(&mut m, &t, lanes, ScanDir::Forward, ScanOp::Sum, seg, |r, _| (!r.is_null()).then_some(r.b)).unwrap();
        for &start in t.starts() {
            let seq = sequence(&m, start, t.block_len(), lanes);
            let mut acc: Option<u64> = None;
            let mut prev = None;
            for (r, w) in seq {
                let k = seg(&r);
                if Some(k) != prev {
                    acc = None;
                }
                if !r.is_null() {
                    acc = Some(acc.unwrap_or(0) + r.b);
                }
                assert_eq!(w, acc.unwrap_or(NONE));
                prev = Some(k);
            }
        }
    }

    #[test]
    fn segmented_min_flags_group_minima() {
        for seed in 0..5 {
            let side = 16;
            let mut m = machine(side, ExecMode::Fused);
            fill_random(&mut m, Lanes::of(&[0, 1]), seed, 12, 25);
            let lanes = Lanes::of(&[0, 1]);
            // distinct values per record
            for rank in 0..m.processors() {
                for l in lanes.iter() {
                    let mut r = m.cell(rank).slots[l];
                    if !r.is_null() {
                        r.ord = (rank * 2 + l) as u64;
                        m.load(rank, l, r);
                    }
                }
            }
            let t = m.root_tiling();
            mesh_sort(&mut m, &t, lanes, |r: &Record| (!r.is_null()).then_some(r.a)).unwrap();
            segmented_min(&mut m, &t, lanes, |r| (!r.is_null()).then_some([r.a, 0]), |r| (!r.is_null()).then_some(r.ord), flags::WIN)
                .unwrap();
            let recs: Vec<Record> = sequence(&m, 0, side * side, lanes).into_iter().map(|x| x.0).filter(|r| !r.is_null()).collect();
            let mut best = std::collections::BTreeMap::new();
            for r in &recs {
                let e = best.entry(r.a).or_insert(r.ord);
                *e = (*e).min(r.ord);
            }
            for r in &recs {
                assert_eq!(r.has(flags::WIN), best[&r.a] == r.ord);
            }
        }
    }

    #[test]
    fn segmented_min_rejects_unsorted() {
        let mut m = machine(4, ExecMode::Fused);
        m.load(0, 0, Record::vertex(5));
        m.load(1, 0, Record::vertex(2));
        let t = m.root_tiling();
        let r = segmented_min(&mut m, &t, Lanes::of(&[0]), |r| (!r.is_null()).then_some([r.a, 0]), |r| Some(r.a), flags::WIN);
        assert!(r.is_err());
    }

    #[test]
    fn broadcast_single_and_empty() {
        let mut m = machine(4, ExecMode::Stepwise);
        for rank in 0..16 {
            m.load(rank, 0, Record::vertex(1));
        }
        let t = m.root_tiling();
        segmented_broadcast(&mut m, &t, Lanes::of(&[0]), |r| Some([r.a, 0]), |_| None).unwrap();
        assert!(m.cells().iter().all(|c| c.scratch[0] == NONE));
        clear_scratch(&mut m, &t);
        let mut src = m.cell(0).slots[0];
        src.aux2 = 77;
        m.load(0, 0, src);
        segmented_broadcast(&mut m, &t, Lanes::of(&[0]), |r| Some([r.a, 0]), |r| (r.aux2 == 77).then_some(9)).unwrap();
        assert!(m.cells().iter().all(|c| c.scratch[0] == 9));
        let mut dup = m.cell(5).slots[0];
        dup.aux2 = 77;
        m.load(5, 0, dup);
        clear_scratch(&mut m, &t);
        assert!(segmented_broadcast(&mut m, &t, Lanes::of(&[0]), |r| Some([r.a, 0]), |r| (r.aux2 == 77).then_some(9)).is_err());
    }
}
