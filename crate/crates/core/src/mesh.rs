//! The simulated mesh-connected computer.
//!
//! A [`MeshMachine`] is a `side × side` grid of processors. Data moves only
//! through [`MeshMachine::sync_step`]: every processor in a region computes
//! its outbound packets from its pre-step state, then every processor
//! consumes the packets its four neighbors addressed to it. Each call
//! advances the step counter by exactly one.
//!
//! Processors are stored in Hilbert-rank order, so any aligned sub-square is
//! a contiguous slice. A [`Tiling`] is a set of equal, disjoint aligned
//! sub-squares ("blocks") that run the same schedule in lockstep; links
//! between blocks carry nothing.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use arrayvec::ArrayVec;
use serde::{Deserialize, Serialize};

use crate::curve::{point_unchecked, rank_unchecked};
use crate::error::{MeshError, Result};
use crate::record::{Lanes, Record, Word, NONE, RECORD_WORDS};
use crate::trace::Trace;

/// Record slots per processor.
pub const LANES: usize = 6;
/// Scratch registers per processor, on top of the record slots.
pub const REG_WORDS: usize = 10;
/// Largest packet one link carries in one step.
pub const PACKET_WORDS: usize = LANES * RECORD_WORDS + 8;

pub type Packet = ArrayVec<Word, PACKET_WORDS>;
pub type Outbox = [Option<Packet>; 4];
pub type Inbox = [Option<Packet>; 4];

/// How primitives execute their step schedules.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecMode {
    /// Every exchange is a real [`MeshMachine::sync_step`].
    Stepwise,
    /// Primitives compute the state their schedule produces directly and
    /// charge the schedule's exact step count.
    #[default]
    Fused,
}

/// Order in which `sync_step` visits processors internally. Results never
/// depend on it.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum IterationOrder {
    #[default]
    Forward,
    Reverse,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeshConfig {
    pub side: usize,
    pub word_capacity: usize,
    pub record_capacity: usize,
    pub exec: ExecMode,
    pub iteration: IterationOrder,
}

impl MeshConfig {
    pub fn new(side: usize) -> Self {
        MeshConfig {
            side,
            word_capacity: 64,
            record_capacity: 2,
            exec: ExecMode::default(),
            iteration: IterationOrder::default(),
        }
    }

    pub fn with_exec(mut self, exec: ExecMode) -> Self {
        self.exec = exec;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.side < 2 || !self.side.is_power_of_two() {
            return Err(MeshError::Config(format!("side {} must be a power of two and at least 2", self.side)));
        }
        if self.record_capacity != 2 {
            return Err(MeshError::Config(format!(
                "record_capacity {} unsupported; the lane layout packs working sets two per processor",
                self.record_capacity
            )));
        }
        let needed = LANES * RECORD_WORDS + LANES;
        if self.word_capacity < needed {
            return Err(MeshError::Config(format!(
                "word_capacity {} below the {needed} words the record slots and their scratch need",
                self.word_capacity
            )));
        }
        Ok(())
    }
}

/// One processor: a bounded set of record slots plus scratch words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessorState {
    pub coords: (usize, usize),
    pub slots: [Record; LANES],
    /// Per-slot scratch word written by scans; `NONE` when unused.
    pub scratch: [Word; LANES],
    pub regs: ArrayVec<Word, REG_WORDS>,
}

impl ProcessorState {
    fn new(coords: (usize, usize)) -> Self {
        ProcessorState { coords, slots: [Record::NULL; LANES], scratch: [NONE; LANES], regs: ArrayVec::new() }
    }

    pub fn words(&self) -> usize {
        let recs = self.slots.iter().filter(|r| !r.is_null()).count();
        let scratch = self.scratch.iter().filter(|&&w| w != NONE).count();
        recs * RECORD_WORDS + scratch + self.regs.len()
    }

    pub fn records(&self) -> impl Iterator<Item = &Record> {
        self.slots.iter().filter(|r| !r.is_null())
    }
}

/// An aligned square region of the mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SubmeshView {
    pub origin: (usize, usize),
    pub side: usize,
    /// Quadrant depth below the full mesh.
    pub level: usize,
    /// First Hilbert rank inside the view; the view covers `start..start + side²`.
    pub start: usize,
    root_side: usize,
}

impl SubmeshView {
    fn aligned(start: usize, side: usize, level: usize, root_side: usize) -> Self {
        let (r, c) = point_unchecked(start, root_side);
        SubmeshView { origin: (r - r % side, c - c % side), side, level, start, root_side }
    }

    pub fn processors(&self) -> usize {
        self.side * self.side
    }

    pub fn ranks(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.processors()
    }

    pub fn contains(&self, (row, col): (usize, usize)) -> bool {
        row >= self.origin.0 && row < self.origin.0 + self.side && col >= self.origin.1 && col < self.origin.1 + self.side
    }

    /// The `i`-th quadrant in curve order.
    pub fn quadrant(&self, i: usize) -> Result<SubmeshView> {
        if self.side < 2 {
            return Err(MeshError::Contract("a 1×1 view has no quadrants".into()));
        }
        if i > 3 {
            return Err(MeshError::OutOfRange { what: "quadrant", value: i, limit: 4 });
        }
        let q = self.side / 2;
        Ok(SubmeshView::aligned(self.start + i * q * q, q, self.level + 1, self.root_side))
    }
}

/// Equal aligned blocks executing one schedule side by side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tiling {
    side: usize,
    starts: Arc<Vec<usize>>,
    root_side: usize,
}

impl Tiling {
    pub fn from_view(v: &SubmeshView) -> Tiling {
        Tiling { side: v.side, starts: Arc::new(vec![v.start]), root_side: v.root_side }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn block_len(&self) -> usize {
        self.side * self.side
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    pub fn blocks(&self) -> impl Iterator<Item = SubmeshView> + '_ {
        let level = (self.root_side / self.side).trailing_zeros() as usize;
        self.starts.iter().map(move |&s| SubmeshView::aligned(s, self.side, level, self.root_side))
    }

    /// Every block split into sub-blocks of side `side`.
    pub fn refine(&self, side: usize) -> Tiling {
        assert!(side.is_power_of_two() && side <= self.side);
        let per = self.block_len() / (side * side);
        let len = side * side;
        let starts = self.starts.iter().flat_map(|&s| (0..per).map(move |k| s + k * len)).collect();
        Tiling { side, starts: Arc::new(starts), root_side: self.root_side }
    }

    pub fn quadrants(&self) -> Tiling {
        self.refine(self.side / 2)
    }

    /// The first (curve-order) sub-block of side `side` in every block.
    pub fn leading(&self, side: usize) -> Tiling {
        assert!(side.is_power_of_two() && side <= self.side);
        Tiling { side, starts: self.starts.clone(), root_side: self.root_side }
    }

    pub fn ranks(&self) -> impl Iterator<Item = usize> + '_ {
        let len = self.block_len();
        self.starts.iter().flat_map(move |&s| s..s + len)
    }
}

/// Where a processor sits, as seen by a step rule.
#[derive(Clone, Copy, Debug)]
pub struct CellCtx {
    pub rank: usize,
    pub row: usize,
    pub col: usize,
    pub block_start: usize,
    pub block_side: usize,
    pub block_origin: (usize, usize),
}

impl CellCtx {
    pub fn local(&self) -> (usize, usize) {
        (self.row - self.block_origin.0, self.col - self.block_origin.1)
    }

    /// Whether the neighbor in `dir` lies in the same block.
    pub fn has_neighbor(&self, dir: Direction) -> bool {
        let (lr, lc) = self.local();
        match dir {
            Direction::North => lr > 0,
            Direction::South => lr + 1 < self.block_side,
            Direction::West => lc > 0,
            Direction::East => lc + 1 < self.block_side,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    North = 0,
    East = 1,
    South = 2,
    West = 3,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::North, Direction::East, Direction::South, Direction::West];

    pub fn opposite(self) -> Direction {
        Direction::ALL[(self as usize + 2) % 4]
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Direction::North => (-1, 0),
            Direction::East => (0, 1),
            Direction::South => (1, 0),
            Direction::West => (0, -1),
        }
    }

    /// Direction of the unit hop from `from` to `to`.
    pub fn between(from: (usize, usize), to: (usize, usize)) -> Option<Direction> {
        Direction::ALL.into_iter().find(|d| {
            let (dr, dc) = d.delta();
            from.0 as isize + dr == to.0 as isize && from.1 as isize + dc == to.1 as isize
        })
    }
}

/// A per-processor local rule applied by [`MeshMachine::sync_step`].
///
/// `send` sees only the processor's own pre-step state; `receive` sees the
/// pre-step state plus at most one packet per link.
pub trait StepRule {
    fn send(&self, ctx: &CellCtx, state: &ProcessorState) -> Outbox;
    fn receive(&self, ctx: &CellCtx, state: &mut ProcessorState, inbox: &Inbox);
}

/// A rule built from two closures.
pub struct FnRule<S, R> {
    pub send: S,
    pub receive: R,
}

impl<S, R> StepRule for FnRule<S, R>
where
    S: Fn(&CellCtx, &ProcessorState) -> Outbox,
    R: Fn(&CellCtx, &mut ProcessorState, &Inbox),
{
    fn send(&self, ctx: &CellCtx, state: &ProcessorState) -> Outbox {
        (self.send)(ctx, state)
    }
    fn receive(&self, ctx: &CellCtx, state: &mut ProcessorState, inbox: &Inbox) {
        (self.receive)(ctx, state, inbox)
    }
}

pub fn empty_outbox() -> Outbox {
    [None, None, None, None]
}

/// Synchronous-step counts, split by the phase that issued them.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub total_steps: u64,
    pub per_phase: BTreeMap<String, u64>,
}

impl StepReport {
    fn add(&mut self, phase: &str, n: u64) {
        if n == 0 {
            return;
        }
        self.total_steps += n;
        *self.per_phase.entry(phase.to_string()).or_default() += n;
    }

    pub fn phase(&self, p: &str) -> u64 {
        self.per_phase.get(p).copied().unwrap_or(0)
    }
}

struct Frame {
    side: usize,
    starts: Arc<Vec<usize>>,
    lanes: Lanes,
    data: Vec<Record>,
}

pub struct MeshMachine {
    config: MeshConfig,
    cells: Vec<ProcessorState>,
    rank_at: Vec<usize>,
    coords: Arc<Vec<(usize, usize)>>,
    steps: StepReport,
    phase: &'static str,
    frames: Vec<Frame>,
    outbox: Vec<Outbox>,
    pub trace: Trace,
}

impl MeshMachine {
    pub fn new(config: MeshConfig) -> Result<Self> {
        config.validate()?;
        let side = config.side;
        let n = side * side;
        let mut rank_at = vec![0; n];
        let cells: Vec<ProcessorState> = (0..n)
            .map(|r| {
                let p = point_unchecked(r, side);
                rank_at[p.0 * side + p.1] = r;
                ProcessorState::new(p)
            })
            .collect();
        debug_assert!((0..n).all(|i| rank_unchecked(i / side, i % side, side) == rank_at[i]));
        let coords = Arc::new(cells.iter().map(|c| c.coords).collect());
        Ok(MeshMachine {
            config,
            cells,
            rank_at,
            coords,
            steps: StepReport::default(),
            phase: "other",
            frames: Vec::new(),
            outbox: Vec::new(),
            trace: Trace::default(),
        })
    }

    pub fn config(&self) -> &MeshConfig {
        &self.config
    }

    pub fn side(&self) -> usize {
        self.config.side
    }

    pub fn exec(&self) -> ExecMode {
        self.config.exec
    }

    pub fn processors(&self) -> usize {
        self.cells.len()
    }

    pub fn root_view(&self) -> SubmeshView {
        SubmeshView::aligned(0, self.side(), 0, self.side())
    }

    pub fn root_tiling(&self) -> Tiling {
        Tiling::from_view(&self.root_view())
    }

    pub fn steps(&self) -> &StepReport {
        &self.steps
    }

    /// Processor by curve rank.
    pub fn cell(&self, rank: usize) -> &ProcessorState {
        &self.cells[rank]
    }

    pub fn cell_at(&self, row: usize, col: usize) -> &ProcessorState {
        &self.cells[self.rank_at[row * self.side() + col]]
    }

    /// Grid position of every curve rank.
    pub fn coords(&self) -> Arc<Vec<(usize, usize)>> {
        self.coords.clone()
    }

    pub fn rank_of(&self, row: usize, col: usize) -> usize {
        self.rank_at[row * self.side() + col]
    }

    /// All processors in curve order.
    pub fn cells(&self) -> &[ProcessorState] {
        &self.cells
    }

    pub(crate) fn cells_mut(&mut self) -> &mut [ProcessorState] {
        &mut self.cells
    }

    /// Host-side loading of one slot; used only for ingestion and tests.
    pub fn load(&mut self, rank: usize, lane: usize, rec: Record) {
        self.cells[rank].slots[lane] = rec;
    }

    pub fn phase(&self) -> &'static str {
        self.phase
    }

    /// Sets the phase tag later steps are charged to; returns the old tag.
    pub fn set_phase(&mut self, phase: &'static str) -> &'static str {
        std::mem::replace(&mut self.phase, phase)
    }

    pub fn in_phase<T>(&mut self, phase: &'static str, f: impl FnOnce(&mut Self) -> T) -> T {
        let old = self.set_phase(phase);
        let out = f(self);
        self.set_phase(old);
        out
    }

    /// Charges the step count of a fused schedule.
    pub(crate) fn charge(&mut self, steps: u64) {
        let phase = self.phase;
        self.steps.add(phase, steps);
    }

    pub fn ctx(&self, rank: usize, block_start: usize, block_side: usize) -> CellCtx {
        let (row, col) = self.cells[rank].coords;
        let (br, bc) = self.cells[block_start].coords;
        CellCtx {
            rank,
            row,
            col,
            block_start,
            block_side,
            block_origin: (br - br % block_side, bc - bc % block_side),
        }
    }

    fn neighbor(&self, ctx: &CellCtx, dir: Direction) -> usize {
        let (dr, dc) = dir.delta();
        let r = (ctx.row as isize + dr) as usize;
        let c = (ctx.col as isize + dc) as usize;
        self.rank_at[r * self.side() + c]
    }

    /// One synchronous step over every block of `region`.
    pub fn sync_step(&mut self, region: &Tiling, rule: &dyn StepRule) -> Result<()> {
        let n = self.cells.len();
        if self.outbox.len() != n {
            self.outbox = (0..n).map(|_| empty_outbox()).collect();
        }
        let side = region.side();
        let mut order: Vec<(usize, usize)> =
            region.starts().iter().flat_map(|&s| (s..s + side * side).map(move |r| (r, s))).collect();
        if self.config.iteration == IterationOrder::Reverse {
            order.reverse();
        }
        for &(rank, start) in &order {
            let ctx = self.ctx(rank, start, side);
            let out = rule.send(&ctx, &self.cells[rank]);
            for d in Direction::ALL {
                if out[d as usize].is_some() && !ctx.has_neighbor(d) {
                    return Err(MeshError::CrossBoundary { row: ctx.row, col: ctx.col });
                }
            }
            self.outbox[rank] = out;
        }
        for &(rank, start) in &order {
            let ctx = self.ctx(rank, start, side);
            let mut inbox = empty_outbox();
            for d in Direction::ALL {
                if ctx.has_neighbor(d) {
                    let nb = self.neighbor(&ctx, d);
                    inbox[d as usize] = self.outbox[nb][d.opposite() as usize].clone();
                }
            }
            rule.receive(&ctx, &mut self.cells[rank], &inbox);
        }
        for &(rank, _) in &order {
            self.outbox[rank] = empty_outbox();
            self.check_capacity(rank)?;
        }
        self.charge(1);
        Ok(())
    }

    /// Local computation on every processor of `region`; costs no steps.
    pub fn local(&mut self, region: &Tiling, mut f: impl FnMut(&CellCtx, &mut ProcessorState)) -> Result<()> {
        let side = region.side();
        for &start in region.starts() {
            for rank in start..start + side * side {
                let ctx = self.ctx(rank, start, side);
                f(&ctx, &mut self.cells[rank]);
                self.check_capacity(rank)?;
            }
        }
        Ok(())
    }

    fn check_capacity(&self, rank: usize) -> Result<()> {
        let c = &self.cells[rank];
        let words = c.words();
        if words > self.config.word_capacity {
            return Err(MeshError::CapacityOverflow {
                row: c.coords.0,
                col: c.coords.1,
                words,
                capacity: self.config.word_capacity,
            });
        }
        Ok(())
    }

    /// Moves the records in `lanes` of every block into a fresh ledger frame.
    pub fn push_frame(&mut self, region: &Tiling, lanes: Lanes) {
        let mut data = Vec::with_capacity(region.len() * region.block_len() * lanes.len());
        for rank in region.ranks() {
            for l in lanes.iter() {
                data.push(std::mem::replace(&mut self.cells[rank].slots[l], Record::NULL));
            }
        }
        self.frames.push(Frame { side: region.side(), starts: region.starts.clone(), lanes, data });
    }

    /// Restores the most recent ledger frame; it must have been pushed with
    /// the same region and lanes, and the lanes must be empty again.
    pub fn pop_frame(&mut self, region: &Tiling, lanes: Lanes) -> Result<()> {
        let frame = self.frames.pop().ok_or_else(|| MeshError::Invariant("ledger is empty".into()))?;
        if frame.side != region.side() || *frame.starts != *region.starts || frame.lanes != lanes {
            return Err(MeshError::Invariant("ledger frame does not match the region being restored".into()));
        }
        let mut it = frame.data.into_iter();
        for rank in region.ranks() {
            for l in lanes.iter() {
                let slot = &mut self.cells[rank].slots[l];
                if !slot.is_null() {
                    return Err(MeshError::Invariant(format!("lane {l} of rank {rank} occupied on ledger restore")));
                }
                *slot = it.next().expect("frame sized to region");
            }
        }
        Ok(())
    }

    pub fn ledger_depth(&self) -> usize {
        self.frames.len()
    }

    /// One line per processor in row-major order: `row col: word,word,...`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let side = self.side();
        for row in 0..side {
            for col in 0..side {
                let c = self.cell_at(row, col);
                let words: Vec<String> = c
                    .records()
                    .flat_map(|r| r.to_words())
                    .chain(c.regs.iter().copied())
                    .map(|w| w.to_string())
                    .collect();
                let _ = writeln!(out, "{row} {col}: {}", words.join(","));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn create_small_mesh() {
        let m = MeshMachine::new(MeshConfig::new(2)).unwrap();
        assert_eq!(m.processors(), 4);
        assert_eq!(m.steps().total_steps, 0);
        assert_eq!(m.root_tiling().len(), 1);
    }

    #[test]
    fn rejects_bad_side() {
        assert!(MeshMachine::new(MeshConfig::new(3)).is_err());
        assert!(MeshMachine::new(MeshConfig::new(1)).is_err());
        let mut c = MeshConfig::new(4);
        c.word_capacity = 16;
        assert!(MeshMachine::new(c).is_err());
    }

    #[test]
    fn quadrants_of_side_64() {
        let m = MeshMachine::new(MeshConfig::new(64)).unwrap();
        assert_eq!(m.processors(), 4096);
        let root = m.root_view();
        let q0 = root.quadrant(0).unwrap();
        assert_eq!(q0.side, 32);
        assert_eq!(q0.origin, (0, 0));
        assert_eq!(q0.start, 0);
        assert!(root.quadrant(4).is_err());
    }

    #[test]
    fn quadrants_partition_every_view() {
        for side in [2usize, 4, 8, 16, 32] {
            let m = MeshMachine::new(MeshConfig::new(side)).unwrap();
            let mut stack = vec![m.root_view()];
            while let Some(v) = stack.pop() {
                if v.side == 1 {
                    assert!(v.quadrant(0).is_err());
                    continue;
                }
                let mut covered = vec![0u8; side * side];
                for i in 0..4 {
                    let q = v.quadrant(i).unwrap();
                    for rank in q.ranks() {
                        let p = m.cell(rank).coords;
                        assert!(q.contains(p) && v.contains(p));
                        covered[rank] += 1;
                    }
                    stack.push(q);
                }
                for rank in 0..side * side {
                    let inside = v.ranks().contains(&rank);
                    assert_eq!(covered[rank], u8::from(inside));
                }
            }
        }
    }

    #[test]
    fn ledger_round_trip() {
        let mut m = MeshMachine::new(MeshConfig::new(4)).unwrap();
        let t = m.root_tiling();
        m.load(5, 1, Record::self_loop(9));
        m.push_frame(&t, Lanes::of(&[1]));
        assert!(m.cell(5).slots[1].is_null());
        m.pop_frame(&t, Lanes::of(&[1])).unwrap();
        assert_eq!(m.cell(5).slots[1], Record::self_loop(9));
        assert!(m.pop_frame(&t, Lanes::of(&[1])).is_err());
    }
}
